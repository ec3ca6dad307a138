"""Task-weighting strategies driven by gradient alignment.

The central quantity is the per-task "marginal gain": the inner product of a
task's training gradient with a held-out validation gradient. Softmax of the
gains at a temperature is the closed-form maximizer of the entropy-regularized
alignment objective over the probability simplex; this module provides that
weighting, baseline weighters (uniform ratio-based, gradient surgery), the
brute-force simplex oracle used to check the closed form, and the alignment
diagnostics used by the convergence tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import ParamVector, zeros_like

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class GradientBundle:
    """K per-task training gradients plus one validation gradient.

    All K+1 vectors share a single parameter layout; bundles are immutable
    and safe to evaluate concurrently.
    """

    train_grads: tuple[ParamVector, ...]
    val_grad: ParamVector
    iteration: int = 0

    def __post_init__(self):
        if len(self.train_grads) < 1:
            raise ValueError("need at least one task gradient")
        for g in self.train_grads:
            if g.layout != self.val_grad.layout:
                raise ValueError("layout: bundle gradients do not share one layout")
        if self.iteration < 0:
            raise ValueError("iteration must be non-negative")

    @property
    def num_tasks(self) -> int:
        return len(self.train_grads)


@dataclass(frozen=True)
class TaskWeights:
    """A point on the (K-1)-simplex plus the gains that produced it.

    ``temperature == 0`` marks hard-max weights: one-hot at the largest gain,
    ties broken toward the lowest task index.
    """

    weights: np.ndarray
    gains: np.ndarray
    temperature: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        g = np.asarray(self.gains, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "gains", g)
        if w.shape != g.shape or w.ndim != 1:
            raise ValueError("weights and gains must be equal-length vectors")
        if w.min() < -1e-12 or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the probability simplex")

    @property
    def num_tasks(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class AlignmentStats:
    """Coverage of the validation direction by the task-gradient cone.

    gamma_hat: best achievable alignment ratio  max_k m_k / ||g_val||^2.
    m_hat: smallest norm ratio ||sum_k w_k g_k|| / ||g_val|| over the simplex.
    """

    gamma_hat: float
    m_hat: float


def marginal_gains(bundle: GradientBundle) -> np.ndarray:
    """Inner product of each task gradient with the validation gradient."""
    return np.array([bundle.val_grad.dot(g) for g in bundle.train_grads])


def softmax_weights(gains: np.ndarray, temperature: float) -> TaskWeights:
    """Closed-form weights maximizing alignment plus scaled entropy.

    For temperature > 0 this is softmax(gains / temperature), computed with
    max-subtraction; temperature == 0 yields the hard-max vertex.
    """
    gains = np.asarray(gains, dtype=np.float64)
    if gains.ndim != 1 or gains.size < 1:
        raise ValueError("gains must be a non-empty vector")
    if not np.all(np.isfinite(gains)):
        raise ValueError("non-finite gain")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        w = np.zeros_like(gains)
        w[int(np.argmax(gains))] = 1.0
    else:
        z = gains / temperature
        z -= z.max()
        e = np.exp(z)
        w = e / e.sum()
    return TaskWeights(w, gains, float(temperature))


def entropy_objective(weights: np.ndarray, gains: np.ndarray, temperature: float) -> float:
    """sum_k w_k m_k - temperature * sum_k w_k log w_k, with 0 log 0 = 0."""
    w = np.asarray(weights, dtype=np.float64)
    m = np.asarray(gains, dtype=np.float64)
    if w.shape != m.shape:
        raise ValueError("weights and gains must have equal length")
    if w.min() < -SIMPLEX_TOL or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("weights are off the simplex beyond tolerance")
    w = np.clip(w, 0.0, None)
    pos = w > 0
    entropy = -float(np.sum(w[pos] * np.log(w[pos])))
    return float(np.dot(w, m)) + temperature * entropy


def simplex_grid_search(
    gains: np.ndarray, temperature: float, step: float
) -> tuple[np.ndarray, float]:
    """Exact maximum of the entropy objective over the simplex lattice.

    The lattice has spacing ``step`` (weights are multiples of step summing
    to 1). The objective is separable across tasks, so the lattice maximum is
    found by allocating the 1/step units task by task; the result is
    identical to enumerating every lattice point. Small K only.
    """
    gains = np.asarray(gains, dtype=np.float64)
    k = gains.size
    if not 2 <= k <= 4:
        raise ValueError("oracle limited to small K (2..4)")
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(round(1.0 / step))
    if n < 1:
        raise ValueError("step must be at most 1")

    frac = np.arange(n + 1) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -frac * np.log(frac)
    ent[0] = 0.0

    def phi(idx: int) -> np.ndarray:
        return frac * gains[idx] + temperature * ent

    best = phi(0)
    choices = []
    for task in range(1, k):
        contrib = phi(task)
        new = np.full(n + 1, -np.inf)
        choice = np.zeros(n + 1, dtype=np.int64)
        for c in range(n + 1):
            cand = best[: n + 1 - c] + contrib[c]
            tail = new[c:]
            better = cand > tail
            tail[better] = cand[better]
            choice[c:][better] = c
        best = new
        choices.append(choice)
    value = float(best[n])

    counts = np.zeros(k, dtype=np.int64)
    r = n
    for task in range(k - 1, 0, -1):
        c = int(choices[task - 1][r])
        counts[task] = c
        r -= c
    counts[0] = r
    return counts / n, value


def combine(bundle: GradientBundle, weights) -> ParamVector:
    """Convex combination sum_k w_k g_k of the task gradients, fixed order."""
    w = weights.weights if isinstance(weights, TaskWeights) else np.asarray(weights, float)
    if w.size != bundle.num_tasks:
        raise ValueError(f"weights have {w.size} entries for {bundle.num_tasks} tasks")
    out = zeros_like(bundle.val_grad.layout)
    acc = out.values
    for wk, g in zip(w, bundle.train_grads):
        acc += wk * g.values
    return out


def alignment_certificate(
    bundle: GradientBundle, temperature: float
) -> tuple[float, float, bool]:
    """Alignment of the softmax direction versus the best-vertex floor.

    Returns (lhs, rhs, holds) where lhs is the validation alignment of the
    softmax-weighted direction, rhs = max_k m_k - temperature * log K (the
    best alignment over the simplex minus the entropy slack), and holds
    checks lhs >= rhs - 1e-9.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    gains = marginal_gains(bundle)
    direction = combine(bundle, softmax_weights(gains, temperature))
    lhs = bundle.val_grad.dot(direction)
    rhs = float(gains.max()) - temperature * np.log(bundle.num_tasks)
    return lhs, rhs, lhs >= rhs - 1e-9


def log_sum_exp_bounds(x: np.ndarray, temperature: float) -> tuple[float, float, float]:
    """(max, smoothed max, max + temperature*log K) for the scaled log-sum-exp."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    x = np.asarray(x, dtype=np.float64)
    top = float(x.max())
    lse = top + temperature * np.log(np.sum(np.exp((x - top) / temperature)))
    return top, float(lse), top + temperature * np.log(x.size)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, v.size + 1) > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


def simplex_lattice(k: int, n: int) -> np.ndarray:
    """All lattice points on the simplex with denominator n, as (N, k) weights."""

    def counts(k_left: int, n_left: int) -> np.ndarray:
        if k_left == 1:
            return np.array([[n_left]], dtype=np.int64)
        blocks = []
        for c in range(n_left + 1):
            rest = counts(k_left - 1, n_left - c)
            first = np.full((rest.shape[0], 1), c, dtype=np.int64)
            blocks.append(np.hstack([first, rest]))
        return np.vstack(blocks)

    if n < 1:
        raise ValueError("lattice denominator must be >= 1")
    return counts(k, n) / n


def _min_combination_norm(grads: np.ndarray, k: int) -> float:
    """min over the simplex of ||sum_k w_k g_k||; grid for K<=4, else PGD."""
    gram = grads @ grads.T
    if k <= 4:
        ws = simplex_lattice(k, 100)  # grid step 1e-2
        best = float(np.min(np.einsum("ij,jk,ik->i", ws, gram, ws)))
        return float(np.sqrt(max(best, 0.0)))

    w = np.full(k, 1.0 / k)
    lip = 2.0 * float(np.linalg.eigvalsh(gram)[-1])
    lr = 1.0 / max(lip, 1e-12)
    for _ in range(500):
        w = _project_simplex(w - lr * 2.0 * (gram @ w))
    return float(np.sqrt(max(w @ gram @ w, 0.0)))


def alignment_stats(bundle: GradientBundle) -> AlignmentStats:
    """Empirical coverage constants of the task-gradient cone."""
    val_sq = bundle.val_grad.dot(bundle.val_grad)
    if val_sq <= 0.0:
        raise ValueError("degenerate validation gradient")
    gains = marginal_gains(bundle)
    gamma_hat = float(gains.max()) / val_sq
    grads = np.stack([g.values for g in bundle.train_grads])
    m_hat = _min_combination_norm(grads, bundle.num_tasks) / np.sqrt(val_sq)
    return AlignmentStats(gamma_hat=gamma_hat, m_hat=float(m_hat))


def dwa_weights(loss_history, temperature: float) -> np.ndarray:
    """Loss-ratio weighting: softmax of r_k = L_k(i-1)/L_k(i-2) at temperature.

    With fewer than two recorded losses for any task the warm-up rule applies
    and weights are uniform. Renormalized to the simplex (the native scheme
    sums weights to K; the factor is absorbed into the step size).
    """
    k = len(loss_history)
    if k < 1:
        raise ValueError("need at least one task history")
    if any(len(h) < 2 for h in loss_history):
        return np.full(k, 1.0 / k)
    ratios = np.empty(k)
    for i, hist in enumerate(loss_history):
        prev, prev2 = float(hist[-1]), float(hist[-2])
        if prev <= 0 or prev2 <= 0:
            raise ValueError("non-positive loss in history")
        ratios[i] = prev / prev2
    return softmax_weights(ratios, temperature).weights


def pcgrad_combine(bundle: GradientBundle, seed) -> ParamVector:
    """Gradient surgery: project away conflicting components, then average.

    Each task gradient is projected against the other tasks' original
    gradients in a seeded random order whenever their inner product is
    negative; zero-norm projectors are skipped.
    """
    if bundle.num_tasks < 2:
        raise ValueError("gradient surgery needs at least two tasks")
    rng = np.random.default_rng(seed)
    originals = [g.values for g in bundle.train_grads]
    norms_sq = [float(v @ v) for v in originals]
    acc = np.zeros_like(originals[0])
    for i in range(bundle.num_tasks):
        g = originals[i].copy()
        others = [j for j in range(bundle.num_tasks) if j != i]
        for j in rng.permutation(others):
            if norms_sq[j] == 0.0:
                continue
            dot = float(g @ originals[j])
            if dot < 0.0:
                g -= (dot / norms_sq[j]) * originals[j]
        acc += g
    return bundle.val_grad.with_values(acc / bundle.num_tasks)


# -- weight trace log ------------------------------------------------------

WEIGHT_TRACE_FIELDS = "iteration, strategy, m_1..m_K, w_1..w_K, gamma_hat"


def write_weight_trace(path: str | Path, records) -> None:
    """One line per iteration: iteration, strategy, K gains, K weights, gamma_hat.

    Tab-separated; the header names every column.
    """
    records = list(records)
    with open(path, "w") as fh:
        if records:
            k = len(records[0][2])
            cols = ["iteration", "strategy"]
            cols += [f"m{i + 1}" for i in range(k)]
            cols += [f"w{i + 1}" for i in range(k)]
            cols.append("gamma_hat")
            fh.write("\t".join(cols) + "\n")
        for iteration, strategy, gains, weights, gamma_hat in records:
            parts = [str(int(iteration)), strategy]
            parts += [repr(float(g)) for g in gains]
            parts += [repr(float(w)) for w in weights]
            parts.append(repr(float(gamma_hat)))
            fh.write("\t".join(parts) + "\n")


def read_weight_trace(path: str | Path) -> list[tuple[int, str, np.ndarray, np.ndarray, float]]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            return out
        k = sum(1 for c in header.split("\t") if c.startswith("m"))
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            iteration, strategy = int(parts[0]), parts[1]
            gains = np.array([float(v) for v in parts[2 : 2 + k]])
            weights = np.array([float(v) for v in parts[2 + k : 2 + 2 * k]])
            gamma_hat = float(parts[2 + 2 * k])
            out.append((iteration, strategy, gains, weights, gamma_hat))
    return out
