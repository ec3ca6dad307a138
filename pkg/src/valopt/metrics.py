"""Per-task return metrics and the multi-task performance summary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TaskMetrics:
    """Seed-replicated returns and costs of one policy on one task."""

    task: int
    returns: tuple[float, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        if len(self.returns) != len(self.costs) or not self.returns:
            raise ValueError("need matching, non-empty return/cost series")

    @property
    def runs(self) -> int:
        return len(self.returns)

    @property
    def mean_return(self) -> float:
        return float(np.mean(self.returns))

    @property
    def std_return(self) -> float:
        return float(np.std(self.returns))

    @property
    def mean_cost(self) -> float:
        return float(np.mean(self.costs))

    @property
    def roi(self) -> float | None:
        """Return divided by cost; undefined while nothing was spent."""
        return self.mean_return / self.mean_cost if self.mean_cost > 0 else None

    @property
    def cost_per_unit(self) -> float | None:
        """Cost per unit of return (count-valued tasks report this)."""
        return self.mean_cost / self.mean_return if self.mean_return > 0 else None


def delta_m(stl_values, method_values) -> float:
    """Mean per-task relative drop versus single-task learning, in percent.

    (1/K) * sum_k -(M_method,k - M_stl,k) / M_stl,k * 100; more negative is
    better (the method beats the per-task baselines).
    """
    stl = np.asarray(stl_values, dtype=np.float64)
    method = np.asarray(method_values, dtype=np.float64)
    if stl.shape != method.shape or stl.ndim != 1 or stl.size == 0:
        raise ValueError("need equal-length metric tuples")
    if np.any(stl == 0.0):
        raise ValueError("undefined relative drop: zero baseline metric")
    return float(np.mean(-(method - stl) / stl) * 100.0)


@dataclass(frozen=True)
class BenchmarkResult:
    """Per-strategy task metrics with the single-task baseline and summary."""

    strategies: tuple[str, ...]
    metrics: dict[str, tuple[TaskMetrics, ...]]  # strategy -> per-task metrics
    stl_metrics: tuple[TaskMetrics, ...]
    delta_m: dict[str, float]
    per_seed: dict[str, tuple[tuple[float, ...], ...]]  # strategy -> per-seed task returns
    seeds: tuple[int, ...]
