"""Hand-constructed deterministic problems with known constants.

These drive the convergence-envelope and first-order-prediction suites on
full-batch objectives where smoothness, gradient bounds, and alignment
coverage are known exactly rather than estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import ParamVector
from .trainer import IterationData

LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class AnalyticProblem:
    """Deterministic full-batch problem over a flat parameter vector."""

    task_losses: tuple[LossFn, ...]
    val_loss: LossFn
    theta0: np.ndarray

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=np.float64)
        self._layout = (("theta", (self.theta0.size,)),)

    @property
    def num_tasks(self) -> int:
        return len(self.task_losses)

    def initial_params(self) -> ParamVector:
        return ParamVector(self.theta0.copy(), self._layout)

    def evaluate(self, i: int, params: ParamVector) -> IterationData:
        theta = params.values
        losses, grads = [], []
        for fn in self.task_losses:
            loss, grad = fn(theta)
            losses.append(float(loss))
            grads.append(ParamVector(grad, self._layout))
        vloss, vgrad = self.val_loss(theta)

        def val_loss_fn(p: ParamVector) -> float:
            return float(self.val_loss(p.values)[0])

        return IterationData(
            tuple(losses),
            tuple(grads),
            float(vloss),
            ParamVector(vgrad, self._layout),
            val_loss_fn,
        )


def quadratic(curvature: float, center: np.ndarray | float = 0.0) -> LossFn:
    """0.5 * curvature * ||theta - center||^2."""

    def fn(theta: np.ndarray):
        d = theta - center
        return 0.5 * curvature * float(d @ d), curvature * d

    return fn


def linear(slope: np.ndarray) -> LossFn:
    slope = np.asarray(slope, dtype=np.float64)

    def fn(theta: np.ndarray):
        return float(slope @ theta), slope.copy()

    return fn


@dataclass(frozen=True)
class ProblemConstants:
    """Known analysis constants for a constructed problem."""

    smoothness: float  # Lipschitz constant of the validation gradient
    grad_bound: float  # bound on every task-gradient norm along the run
    coverage: float  # min over iterations of max_k m_k / ||g_val||^2


def aligned_quadratics(
    dim: int = 4,
    task_curvatures: tuple[float, ...] = (1.0, 0.5),
    val_curvature: float = 1.0,
    radius: float = 1.0,
) -> tuple[AnalyticProblem, ProblemConstants]:
    """Co-centered convex quadratic tasks, positively aligned with validation.

    All losses share the minimizer at the origin, so every task gradient is a
    positive multiple of the validation gradient: coverage equals
    max_k a_k / a_val at every iterate, the validation loss is a_val-smooth,
    and descent keeps ||theta|| <= radius, bounding task gradients by
    max_k a_k * radius.
    """
    theta0 = np.full(dim, radius / np.sqrt(dim))
    tasks = tuple(quadratic(a) for a in task_curvatures)
    problem = AnalyticProblem(tasks, quadratic(val_curvature), theta0)
    constants = ProblemConstants(
        smoothness=val_curvature,
        grad_bound=max(task_curvatures) * radius,
        coverage=max(task_curvatures) / val_curvature,
    )
    return problem, constants


def linear_validation_problem(dim: int = 3) -> AnalyticProblem:
    """Quadratic tasks with a linear validation loss.

    The first-order prediction of the validation-loss change is exact for a
    linear function, while the quadratic tasks keep the update direction
    changing between iterations.
    """
    centers = [np.linspace(1.0, 2.0, dim), np.linspace(-2.0, -1.0, dim)]
    tasks = tuple(quadratic(1.0, c) for c in centers)
    slope = np.full(dim, 0.5)
    return AnalyticProblem(tasks, linear(slope), np.zeros(dim))


def orthogonal_problem(dim: int = 2) -> AnalyticProblem:
    """Task gradients orthogonal to the validation gradient (zero coverage)."""
    e_val = np.zeros(dim)
    e_val[0] = 1.0

    def val(theta: np.ndarray):
        return 0.5 * theta[0] ** 2, e_val * theta[0]

    def task(offset: float) -> LossFn:
        def fn(theta: np.ndarray):
            g = np.zeros(dim)
            g[1] = theta[1] - offset
            return 0.5 * (theta[1] - offset) ** 2, g

        return fn

    return AnalyticProblem((task(1.0), task(-1.0)), val, np.full(dim, 0.5))
