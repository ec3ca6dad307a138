"""Periodicity-aware features for multivariate step histories.

A history window is scanned for dominant periods via a direct DFT amplitude
spectrum; the series is folded at each selected period into a phase-by-period
tensor, summarized by fixed pooling statistics, passed through one dense
layer, and aggregated with amplitude-softmax weights into an augmentation
vector that is added to the raw state features.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# pooling statistics per channel, in order:
#   grand mean, grand max, mean over phases of per-phase max, max over phases
#   of per-phase mean
STATS_PER_CHANNEL = 4


@dataclass(frozen=True)
class HistoryWindow:
    """H past steps of d channels, oldest row first; 15-minute steps by default."""

    samples: np.ndarray
    step_minutes: int = 15

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        object.__setattr__(self, "samples", samples)
        if samples.shape[0] < 4:
            raise ValueError("window too short: need at least 4 steps")
        if not np.all(np.isfinite(samples)):
            raise ValueError("window contains non-finite entries")
        if self.step_minutes < 1:
            raise ValueError("step_minutes must be positive")

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class PeriodDecomposition:
    """Amplitude spectrum with the selected periods and their softmax weights."""

    spectrum: np.ndarray
    periods: tuple[tuple[int, float], ...]
    k_top: int

    def __post_init__(self):
        qs = [q for q, _ in self.periods]
        ws = np.array([w for _, w in self.periods])
        if len(set(qs)) != len(qs):
            raise ValueError("periods must be distinct")
        if ws.min() < 0 or abs(ws.sum() - 1.0) > 1e-9:
            raise ValueError("amplitude weights must be non-negative and sum to 1")
        h = len(self.spectrum)
        if any(not 2 <= q <= h for q in qs):
            raise ValueError("periods must lie in [2, H]")


@lru_cache(maxsize=8)
def _dft_matrix(h: int) -> np.ndarray:
    f = np.arange(h)
    return np.exp(-2j * np.pi * np.outer(f, f) / h)


def spectrum(window: HistoryWindow) -> np.ndarray:
    """Per-frequency amplitude |sum_h x_h e^{-2 pi i f h / H}|, channel-averaged.

    Entry 0 is the DC component; callers selecting periods exclude it.
    """
    x = window.samples
    amps = np.abs(_dft_matrix(window.length) @ x)
    return amps.mean(axis=1)


def top_periods(spectrum_values: np.ndarray, k_top: int) -> PeriodDecomposition:
    """Select candidate periods from the k_top dominant non-DC frequencies.

    Only frequencies 1..H//2 are considered (the upper half of a real
    signal's spectrum mirrors the lower). Ties prefer the lower frequency.
    Each frequency f maps to period H//f clamped to [2, H]; duplicate periods
    keep the larger amplitude. Weights are the softmax of the selected
    amplitudes. If every candidate amplitude is (numerically) zero the
    decomposition degenerates to the single period H with weight 1.
    """
    if k_top < 1:
        raise ValueError("k_top must be at least 1")
    s = np.asarray(spectrum_values, dtype=np.float64)
    h = s.size
    freqs = np.arange(1, h // 2 + 1)
    amps = s[freqs]
    if amps.size == 0 or amps.max() <= 1e-9 * max(float(s[0]), 1.0):
        return PeriodDecomposition(s, ((h, 1.0),), k_top)

    order = np.lexsort((freqs, -amps))  # amplitude desc, then frequency asc
    chosen: dict[int, float] = {}
    for idx in order[: min(k_top, amps.size)]:
        q = min(max(h // int(freqs[idx]), 2), h)
        if q not in chosen or amps[idx] > chosen[q]:
            chosen[q] = float(amps[idx])
    qs = list(chosen)
    a = np.array([chosen[q] for q in qs])
    e = np.exp(a - a.max())
    w = e / e.sum()
    return PeriodDecomposition(s, tuple(zip(qs, w.tolist())), k_top)


def reshape_period(window: HistoryWindow, q: int) -> np.ndarray:
    """Fold the series at period q into a (q, H//q, d) phase-by-period tensor.

    The oldest H mod q samples are dropped; rows index phase within the
    period, columns index consecutive periods, so the most recent sample sits
    at the last phase of the last column.
    """
    h = window.length
    if not 2 <= q <= h:
        raise ValueError(f"period {q} out of range [2, {h}]")
    cols = h // q
    kept = window.samples[h - q * cols :]
    return kept.reshape(cols, q, window.channels).transpose(1, 0, 2)


@dataclass(frozen=True)
class PeriodFeatureParams:
    """Dense layer mapping pooled period statistics to the feature width."""

    weight: np.ndarray  # (width, STATS_PER_CHANNEL * d)
    bias: np.ndarray  # (width,)

    @classmethod
    def seeded(cls, width: int, channels: int, seed: int) -> "PeriodFeatureParams":
        fan_in = STATS_PER_CHANNEL * channels
        bound = 1.0 / np.sqrt(fan_in)
        rng = np.random.default_rng(seed)
        return cls(
            weight=rng.uniform(-bound, bound, size=(width, fan_in)),
            bias=rng.uniform(-bound, bound, size=width),
        )

    @property
    def width(self) -> int:
        return self.bias.size


def pool_stats(folded: np.ndarray) -> np.ndarray:
    """Fixed-size pooling summary of one (q, cols, d) folded tensor.

    Returns STATS_PER_CHANNEL blocks of d values each: grand mean, grand max,
    mean over phases of the per-phase max, max over phases of the per-phase
    mean. The size is independent of the period, so one dense layer serves
    every candidate period.
    """
    grand_mean = folded.mean(axis=(0, 1))
    grand_max = folded.max(axis=(0, 1))
    phase_max_mean = folded.max(axis=1).mean(axis=0)
    phase_mean_max = folded.mean(axis=1).max(axis=0)
    return np.concatenate([grand_mean, grand_max, phase_max_mean, phase_mean_max])


def period_features(
    decomp: PeriodDecomposition, window: HistoryWindow, params: PeriodFeatureParams
) -> np.ndarray:
    """Amplitude-weighted sum over periods of Dense(pool_stats(fold_q))."""
    expected = STATS_PER_CHANNEL * window.channels
    if params.weight.shape[1] != expected:
        raise ValueError(
            f"shape: feature params expect {params.weight.shape[1]} stats, window gives {expected}"
        )
    z = np.zeros(params.width)
    for q, w in decomp.periods:
        stats = pool_stats(reshape_period(window, q))
        z += w * (params.weight @ stats + params.bias)
    return z


def period_features_grad(
    decomp: PeriodDecomposition,
    window: HistoryWindow,
    params: PeriodFeatureParams,
    upstream: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of <upstream, period_features> w.r.t. the dense layer params."""
    upstream = np.asarray(upstream, dtype=np.float64)
    d_weight = np.zeros_like(params.weight)
    d_bias = np.zeros_like(params.bias)
    for q, w in decomp.periods:
        stats = pool_stats(reshape_period(window, q))
        d_weight += w * np.outer(upstream, stats)
        d_bias += w * upstream
    return d_weight, d_bias


def augment_state(state: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Elementwise sum of a state vector and its periodicity feature vector."""
    state = np.asarray(state, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if state.shape != z.shape:
        raise ValueError(f"shape: state {state.shape} vs feature {z.shape}")
    return state + z
