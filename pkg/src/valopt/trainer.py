"""Training loop with strategy-selected task weights and convergence checks.

Each iteration samples proportion-matched train/validation minibatches,
computes per-task training gradients and the validation gradient, turns them
into task weights according to the configured strategy, and applies a plain
gradient step on the combined direction. Diagnostics record everything the
first-order and convergence-envelope checks need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import BatchSampler
from .model import SharedBottomModel
from .params import ParamVector, save_checkpoint
from .weighting import (
    GradientBundle,
    combine,
    dwa_weights,
    marginal_gains,
    pcgrad_combine,
    softmax_weights,
)

STRATEGIES = ("vamo", "vanilla", "dwa", "pcgrad", "stl", "vamo_noval")
_TEMPERATURE_STRATEGIES = ("vamo", "vamo_noval")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int
    step_size: float
    strategy: str = "vamo"
    schedule: str = "constant"  # constant | robbins_monro (eta_i = eta/(1+i)^0.6)
    temperature: float | None = None  # required (>= 0) for vamo/vamo_noval only
    batch_size: int = 16
    seed: int = 0
    ema_beta: float = 0.0  # optional smoothing of gains; 0 disables
    dwa_temperature: float = 2.0
    momentum: float = 0.0  # excluded from the convergence-bound suites
    diag_every: int = 1
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.step_size < 0:
            raise ValueError("step size must be non-negative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.schedule not in ("constant", "robbins_monro"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.strategy in _TEMPERATURE_STRATEGIES:
            if self.temperature is not None and self.temperature < 0:
                raise ValueError("temperature must be >= 0")
        elif self.temperature is not None:
            raise ValueError(f"temperature does not apply to strategy {self.strategy!r}")
        if not 0.0 <= self.ema_beta < 1.0:
            raise ValueError("ema_beta must lie in [0, 1)")
        if self.diag_every < 1:
            raise ValueError("diag_every must be at least 1")

    def eta(self, i: int) -> float:
        if self.schedule == "robbins_monro":
            return self.step_size / (1.0 + i) ** 0.6
        return self.step_size

    def effective_temperature(self) -> float:
        return 1.0 if self.temperature is None else self.temperature


@dataclass(frozen=True)
class DiagRecord:
    iteration: int
    train_losses: tuple[float, ...]
    val_loss: float
    val_grad_sq: float
    weights: tuple[float, ...]
    gains: tuple[float, ...]
    gamma_hat: float
    predicted_delta: float
    actual_delta: float
    step_norm: float
    grad_diff_norm: float
    max_task_grad_norm: float


@dataclass
class RunDiagnostics:
    strategy: str
    num_tasks: int
    records: list[DiagRecord] = field(default_factory=list)
    final_val_loss: float | None = None

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def weight_trace(self):
        return [
            (r.iteration, self.strategy, r.gains, r.weights, r.gamma_hat)
            for r in self.records
        ]


# -- problem adapters --------------------------------------------------------


@dataclass(frozen=True)
class IterationData:
    """Everything one iteration needs: losses, gradients, and a revaluator."""

    train_losses: tuple[float, ...]
    train_grads: tuple[ParamVector, ...]
    val_loss: float
    val_grad: ParamVector
    val_loss_fn: Callable[[ParamVector], float]


class DatasetProblem:
    """Adapter from (model, sampler) to the per-iteration training interface.

    Per-task gradients come from the task sub-batches of one train minibatch;
    the validation loss is the unweighted mean of per-task validation batch
    means, so its gradient is the per-task gradient average.
    """

    def __init__(
        self,
        model: SharedBottomModel,
        sampler: BatchSampler,
        batch_size: int,
        seed: int,
        restrict_to_task: int | None = None,
    ):
        self.model = model
        self.sampler = sampler
        self.batch_size = batch_size
        self.seed = seed
        self.restrict = restrict_to_task
        self.tasks = (
            list(range(len(sampler.split.task_histogram)))
            if restrict_to_task is None
            else [restrict_to_task]
        )

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def initial_params(self) -> ParamVector:
        return self.model.params

    def evaluate(self, i: int, params: ParamVector) -> IterationData:
        model = self.model.with_params(params)
        train = self.sampler.sample_batch(
            "train", self.batch_size, [self.seed, i, 0], restrict_to_task=self.restrict
        )
        val = self.sampler.sample_batch(
            "val", self.batch_size, [self.seed, i, 1], restrict_to_task=self.restrict
        )
        losses, grads = [], []
        for task in self.tasks:
            loss, grad = model.loss_and_grad(
                task, train.windows[task], train.qualities[task], train.targets[task]
            )
            losses.append(loss)
            grads.append(grad)

        val_losses, val_grads = [], []
        for task in self.tasks:
            loss, grad = model.loss_and_grad(
                task, val.windows[task], val.qualities[task], val.targets[task]
            )
            val_losses.append(loss)
            val_grads.append(grad)
        k = len(self.tasks)
        val_grad = val_grads[0].with_values(
            sum(g.values for g in val_grads) / k
        )

        def val_loss_fn(p: ParamVector) -> float:
            m = self.model.with_params(p)
            return float(
                np.mean(
                    [
                        m.loss(t, val.windows[t], val.qualities[t], val.targets[t])
                        for t in self.tasks
                    ]
                )
            )

        return IterationData(
            tuple(losses), tuple(grads), float(np.mean(val_losses)), val_grad, val_loss_fn
        )


# -- the loop -----------------------------------------------------------------


@dataclass
class TrainResult:
    strategy: str
    params: ParamVector | None
    per_task: dict[int, ParamVector]
    diagnostics: RunDiagnostics | None
    stl_diagnostics: dict[int, RunDiagnostics] = field(default_factory=dict)


def _strategy_direction(cfg: TrainConfig, i: int, data: IterationData, state: dict):
    """(weights, gains, direction) for one iteration under cfg.strategy."""
    bundle = GradientBundle(data.train_grads, data.val_grad, iteration=i)
    k = bundle.num_tasks
    gains = marginal_gains(bundle)

    if cfg.strategy in ("vamo", "stl"):
        smoothed = gains
        if cfg.ema_beta > 0.0:
            prev = state.get("ema")
            smoothed = gains if prev is None else cfg.ema_beta * prev + (1 - cfg.ema_beta) * gains
            state["ema"] = smoothed
        weights = softmax_weights(smoothed, cfg.effective_temperature()).weights
        return weights, gains, combine(bundle, weights)

    if cfg.strategy == "vamo_noval":
        # ablation: alignment target is the summed training gradient
        target = data.val_grad.with_values(sum(g.values for g in data.train_grads))
        surrogate = np.array([target.dot(g) for g in data.train_grads])
        weights = softmax_weights(surrogate, cfg.effective_temperature()).weights
        return weights, surrogate, combine(bundle, weights)

    if cfg.strategy == "vanilla":
        weights = np.full(k, 1.0 / k)
        return weights, gains, combine(bundle, weights)

    if cfg.strategy == "dwa":
        history = state.setdefault("loss_history", [[] for _ in range(k)])
        weights = dwa_weights(history, cfg.dwa_temperature)
        for h, loss in zip(history, data.train_losses):
            h.append(loss)
        return weights, gains, combine(bundle, weights)

    if cfg.strategy == "pcgrad":
        direction = pcgrad_combine(bundle, [cfg.seed, i]) if k > 1 else bundle.train_grads[0]
        weights = np.full(k, 1.0 / k)
        return weights, gains, direction

    raise ValueError(f"unknown strategy {cfg.strategy!r}")


def train_problem(problem, cfg: TrainConfig) -> tuple[ParamVector, RunDiagnostics]:
    """Run the weighted-update loop on any problem adapter."""
    params = problem.initial_params()
    diag = RunDiagnostics(strategy=cfg.strategy, num_tasks=problem.num_tasks)
    state: dict = {}
    velocity = None
    prev_val_grad = None
    last_val_loss_fn = None

    for i in range(cfg.iterations):
        data = problem.evaluate(i, params)
        if not all(map(math.isfinite, (*data.train_losses, data.val_loss))):
            raise RuntimeError(f"divergence at iteration {i}")
        weights, gains, direction = _strategy_direction(cfg, i, data, state)

        eta = cfg.eta(i)
        step_vec = direction.values
        if cfg.momentum > 0.0:
            velocity = step_vec if velocity is None else cfg.momentum * velocity + step_vec
            step_vec = velocity
        new_params = params.with_values(params.values - eta * step_vec)

        if i % cfg.diag_every == 0:
            val_sq = data.val_grad.dot(data.val_grad)
            predicted = -eta * data.val_grad.dot(direction)
            actual = data.val_loss_fn(new_params) - data.val_loss
            true_gains = marginal_gains(
                GradientBundle(data.train_grads, data.val_grad, iteration=i)
            )
            gamma_hat = float(true_gains.max()) / val_sq if val_sq > 0 else float("nan")
            grad_diff = (
                float(np.linalg.norm(data.val_grad.values - prev_val_grad))
                if prev_val_grad is not None
                else 0.0
            )
            diag.records.append(
                DiagRecord(
                    iteration=i,
                    train_losses=tuple(data.train_losses),
                    val_loss=data.val_loss,
                    val_grad_sq=val_sq,
                    weights=tuple(float(w) for w in weights),
                    gains=tuple(float(g) for g in gains),
                    gamma_hat=gamma_hat,
                    predicted_delta=predicted,
                    actual_delta=actual,
                    step_norm=float(eta * np.linalg.norm(step_vec)),
                    grad_diff_norm=grad_diff,
                    max_task_grad_norm=max(g.norm() for g in data.train_grads),
                )
            )
            prev_val_grad = data.val_grad.values.copy()

        params = new_params
        last_val_loss_fn = data.val_loss_fn
        if cfg.checkpoint_every and cfg.checkpoint_dir and (i + 1) % cfg.checkpoint_every == 0:
            path = Path(cfg.checkpoint_dir) / f"checkpoint_{i + 1:06d}.txt"
            save_checkpoint(params, path)

    if last_val_loss_fn is not None:
        diag.final_val_loss = last_val_loss_fn(params)
    return params, diag


def train(model: SharedBottomModel, sampler: BatchSampler, cfg: TrainConfig) -> TrainResult:
    """Train on a split dataset; under ``stl`` each task gets its own model."""
    num_tasks = len(sampler.split.task_histogram)
    if cfg.batch_size < num_tasks and cfg.strategy != "stl":
        raise ValueError("batch size must be at least the task count")
    if cfg.strategy == "stl":
        per_task, diags = {}, {}
        for task in range(num_tasks):
            problem = DatasetProblem(
                model, sampler, cfg.batch_size, cfg.seed, restrict_to_task=task
            )
            params, diag = train_problem(problem, cfg)
            per_task[task] = params
            diags[task] = diag
        return TrainResult(cfg.strategy, None, per_task, None, diags)

    problem = DatasetProblem(model, sampler, cfg.batch_size, cfg.seed)
    params, diag = train_problem(problem, cfg)
    return TrainResult(cfg.strategy, params, {t: params for t in range(num_tasks)}, diag)


# -- diagnostics-driven checks ---------------------------------------------------


def first_order_check(diag: RunDiagnostics) -> float:
    """Pearson correlation between predicted and realized validation-loss changes."""
    pred = diag.series("predicted_delta")
    act = diag.series("actual_delta")
    ok = np.isfinite(pred) & np.isfinite(act)
    pred, act = pred[ok], act[ok]
    if pred.size < 10:
        raise ValueError("need at least 10 diagnostic records")
    if np.std(pred) == 0.0 or np.std(act) == 0.0:
        raise ValueError("degenerate correlation: constant series")
    return float(np.corrcoef(pred, act)[0, 1])


@dataclass(frozen=True)
class EnvelopeResult:
    bound: float
    average: float
    holds: bool


def _envelope_gap(diag: RunDiagnostics) -> float:
    losses = list(diag.series("val_loss"))
    if diag.final_val_loss is not None:
        losses.append(diag.final_val_loss)
    return float(losses[0] - min(losses))


def convergence_envelope(
    diag: RunDiagnostics,
    smoothness: float,
    grad_bound: float,
    temperature: float,
    step_size: float,
    coverage: float,
) -> EnvelopeResult:
    """Check the running mean of squared validation-gradient norms against
    its descent bound.

    bound = gap / (eta * coverage * I) + temperature * log K / coverage
            + smoothness * grad_bound^2 * eta / (2 * coverage),
    with gap the observed drop of the validation loss from its start to its
    recorded minimum. Requires positive alignment coverage on every record.
    """
    gammas = diag.series("gamma_hat")
    if not np.all(np.isfinite(gammas)) or gammas.min() <= 0.0:
        raise ValueError("Assumption violated: non-positive alignment coverage; bound inapplicable")
    if coverage <= 0:
        raise ValueError("coverage must be positive")
    n = len(diag.records)
    average = float(np.mean(diag.series("val_grad_sq")))
    bound = (
        _envelope_gap(diag) / (step_size * coverage * n)
        + temperature * np.log(diag.num_tasks) / coverage
        + smoothness * grad_bound**2 * step_size / (2.0 * coverage)
    )
    return EnvelopeResult(float(bound), average, average <= bound)


def envelope_series(
    diag: RunDiagnostics,
    smoothness: float,
    grad_bound: float,
    temperature: float,
    step_size: float,
    coverage: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Prefix running averages and the matching bounds (full-run gap proxy)."""
    sq = diag.series("val_grad_sq")
    prefixes = np.arange(1, sq.size + 1)
    averages = np.cumsum(sq) / prefixes
    floors = temperature * np.log(diag.num_tasks) / coverage + (
        smoothness * grad_bound**2 * step_size / (2.0 * coverage)
    )
    bounds = _envelope_gap(diag) / (step_size * coverage * prefixes) + floors
    return averages, bounds


def estimate_constants(diag: RunDiagnostics) -> tuple[float, float]:
    """Empirical (smoothness, gradient-bound) estimates from a diagnostics run."""
    ratios = []
    for prev, rec in zip(diag.records, diag.records[1:]):
        if prev.step_norm > 0:
            ratios.append(rec.grad_diff_norm / prev.step_norm)
    smoothness = max(ratios) if ratios else 0.0
    grad_bound = float(diag.series("max_task_grad_norm").max())
    return smoothness, grad_bound


# -- diagnostics file format ------------------------------------------------------

_SCALAR_FIELDS = (
    "val_loss",
    "val_grad_sq",
    "gamma_hat",
    "predicted_delta",
    "actual_delta",
    "step_norm",
    "grad_diff_norm",
    "max_task_grad_norm",
)


def write_diagnostics(diag: RunDiagnostics, path: str | Path) -> None:
    """Tab-separated records: iteration, per-task losses/weights/gains, scalars."""
    k = diag.num_tasks
    cols = ["iteration"]
    cols += [f"train_loss{j + 1}" for j in range(k)]
    cols += [f"w{j + 1}" for j in range(k)]
    cols += [f"m{j + 1}" for j in range(k)]
    cols += list(_SCALAR_FIELDS)
    with open(path, "w") as fh:
        fh.write(f"# strategy={diag.strategy} tasks={k}")
        if diag.final_val_loss is not None:
            fh.write(f" final_val_loss={diag.final_val_loss!r}")
        fh.write("\n")
        fh.write("\t".join(cols) + "\n")
        for r in diag.records:
            parts = [str(r.iteration)]
            parts += [repr(v) for v in r.train_losses]
            parts += [repr(v) for v in r.weights]
            parts += [repr(v) for v in r.gains]
            parts += [repr(float(getattr(r, f))) for f in _SCALAR_FIELDS]
            fh.write("\t".join(parts) + "\n")


def read_diagnostics(path: str | Path) -> RunDiagnostics:
    with open(path) as fh:
        meta = fh.readline().strip().lstrip("# ").split()
        kv = dict(item.split("=", 1) for item in meta)
        k = int(kv["tasks"])
        diag = RunDiagnostics(strategy=kv["strategy"], num_tasks=k)
        if "final_val_loss" in kv:
            diag.final_val_loss = float(kv["final_val_loss"])
        fh.readline()  # column header
        for line in fh:
            v = line.rstrip("\n").split("\t")
            idx = 1
            losses = tuple(float(x) for x in v[idx : idx + k]); idx += k
            weights = tuple(float(x) for x in v[idx : idx + k]); idx += k
            gains = tuple(float(x) for x in v[idx : idx + k]); idx += k
            scalars = [float(x) for x in v[idx:]]
            diag.records.append(
                DiagRecord(int(v[0]), losses, *scalars[:2], weights, gains, *scalars[2:])
            )
    return diag
