"""Temporal splitting and proportion-matched minibatch sampling.

Trajectories are partitioned strictly by day (train < validation day <
test day), and minibatches apportion their size across tasks by largest
remainder against the full-corpus task histogram, with at least one sample
per task. Windows of trailing augmented states are built here so training
and evaluation share one input pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .simulator import EnvConfig, Trajectory, trajectory_features
from .temporal import (
    HistoryWindow,
    PeriodFeatureParams,
    augment_state,
    period_features,
    spectrum,
    top_periods,
)


@dataclass(frozen=True)
class SplitDataset:
    train: tuple[Trajectory, ...]
    val: tuple[Trajectory, ...]
    test: tuple[Trajectory, ...]
    task_histogram: tuple[int, ...]
    d_val: int
    d_test: int

    def part(self, name: str) -> tuple[Trajectory, ...]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise ValueError(f"unknown split part {name!r}") from None


def temporal_split(trajectories, d_val: int, d_test: int) -> SplitDataset:
    """Partition by day: train < d_val, validation == d_val, test == d_test."""
    if d_val >= d_test:
        raise ValueError("overlapping day assignment: d_val must precede d_test")
    train, val, test = [], [], []
    for traj in trajectories:
        if traj.day < d_val:
            train.append(traj)
        elif traj.day == d_val:
            val.append(traj)
        elif traj.day == d_test:
            test.append(traj)
        else:
            raise ValueError(f"day {traj.day} not assigned to any split")
    if not train or not val or not test:
        raise ValueError("empty split: each of train/val/test needs at least one day")
    num_tasks = max(t.task for t in trajectories) + 1
    hist = [0] * num_tasks
    for t in trajectories:
        hist[t.task] += 1
    return SplitDataset(tuple(train), tuple(val), tuple(test), tuple(hist), d_val, d_test)


def write_split_manifest(split: SplitDataset, path: str | Path) -> None:
    """Day-to-split assignment for audit."""
    days = {}
    for name in ("train", "val", "test"):
        for traj in split.part(name):
            days[traj.day] = name
    with open(path, "w") as fh:
        fh.write("[assignment]\n")
        for day in sorted(days):
            fh.write(f"{day} = {days[day]}\n")
        fh.write("\n[counts]\n")
        for name in ("train", "val", "test"):
            fh.write(f"{name} = {len(split.part(name))}\n")


def apportion(histogram, size: int) -> list[int]:
    """Largest-remainder quotas of ``size`` by histogram proportions.

    Every task with corpus presence receives at least one slot (taken from
    the largest quota when rounding gives zero). Deterministic: remainder
    ties prefer the lower task index.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    total = hist.sum()
    k = hist.size
    if size < k:
        raise ValueError(f"batch size {size} below task count {k}")
    exact = size * hist / total
    quotas = np.floor(exact).astype(np.int64)
    remainder = exact - quotas
    short = size - int(quotas.sum())
    for idx in np.lexsort((np.arange(k), -remainder))[:short]:
        quotas[idx] += 1
    while True:
        missing = [i for i in range(k) if quotas[i] == 0]
        if not missing:
            break
        donor = int(np.argmax(quotas))
        quotas[donor] -= 1
        quotas[missing[0]] += 1
    return quotas.tolist()


@dataclass(frozen=True)
class Batch:
    """Per-task arrays of (window, quality, target action) samples."""

    windows: dict[int, np.ndarray]  # task -> (n_k, W, FEATURE_DIM + 1)
    qualities: dict[int, np.ndarray]
    targets: dict[int, np.ndarray]
    sizes: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.sizes.values())


@dataclass
class FeaturePipeline:
    """State-window construction shared by training, evaluation, and rollouts.

    Each step's state features are augmented with a periodicity feature
    vector computed from the trailing ``history`` steps of earlier features
    (zero-padded at episode start); windows stack the last ``window``
    augmented rows and append a padding-flag channel.
    """

    cfg: EnvConfig
    window: int = 8
    history: int = 96
    k_top: int = 2
    feature_params: PeriodFeatureParams | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def window_dim(self) -> int:
        from .simulator import FEATURE_DIM

        return FEATURE_DIM + 1

    def _feature_vector(self, rows: np.ndarray, t: int) -> np.ndarray:
        """Periodicity features for step t from rows strictly before t."""
        past = rows[max(0, t - self.history) : t]
        padded = np.zeros((self.history, rows.shape[1]))
        if len(past):
            padded[self.history - len(past) :] = past
        win = HistoryWindow(padded)
        return period_features(top_periods(spectrum(win), self.k_top), win, self.feature_params)

    def augment_series(self, rows: np.ndarray) -> np.ndarray:
        """Augmented feature rows for a whole episode."""
        if self.feature_params is None:
            return rows
        out = np.empty_like(rows)
        for t in range(rows.shape[0]):
            out[t] = augment_state(rows[t], self._feature_vector(rows, t))
        return out

    def series_for(self, traj: Trajectory) -> np.ndarray:
        key = id(traj)
        if key not in self._cache:
            self._cache[key] = self.augment_series(trajectory_features(self.cfg, traj))
        return self._cache[key]

    def window_at(self, series: np.ndarray, t: int) -> np.ndarray:
        """(window, dim+1) slice ending at step t, zero-padded on the left."""
        w = self.window
        out = np.zeros((w, series.shape[1] + 1))
        lo = max(0, t - w + 1)
        chunk = series[lo : t + 1]
        out[w - len(chunk) :, :-1] = chunk
        out[: w - len(chunk), -1] = 1.0  # padding flag
        return out

    def rollout_window_fn(self):
        """Stateful window builder for live rollouts (augments each row once)."""
        if self.feature_params is None:
            def build_raw(history: np.ndarray) -> np.ndarray:
                return self.window_at(history, history.shape[0] - 1)

            return build_raw

        augmented: list[np.ndarray] = []

        def build(history: np.ndarray) -> np.ndarray:
            while len(augmented) < history.shape[0]:
                t = len(augmented)
                augmented.append(augment_state(history[t], self._feature_vector(history, t)))
            return self.window_at(np.asarray(augmented), history.shape[0] - 1)

        return build


@dataclass
class BatchSampler:
    """Draws proportion-matched minibatches from one split."""

    split: SplitDataset
    pipeline: FeaturePipeline

    def sample_batch(
        self, part: str, size: int, seed, restrict_to_task: int | None = None
    ) -> Batch:
        """Quota-apportioned batch of (window, quality, target) samples.

        Samples are drawn uniformly with replacement over the part's
        (trajectory, step) pairs, tasks in ascending order, so a fixed seed
        reproduces the batch exactly. ``restrict_to_task`` draws the whole
        batch from one task (single-task training).
        """
        trajectories = self.split.part(part)
        k = len(self.split.task_histogram)
        if restrict_to_task is None:
            quotas = apportion(self.split.task_histogram, size)
            tasks = range(k)
        else:
            quotas = {restrict_to_task: size}
            tasks = [restrict_to_task]
        rng = np.random.default_rng(seed)
        windows, qualities, targets, sizes = {}, {}, {}, {}
        for task in tasks:
            quota = quotas[task]
            pool = [t for t in trajectories if t.task == task]
            if not pool:
                raise ValueError(f"task missing in split: task {task} has no {part} data")
            picks = rng.integers(0, len(pool), size=quota)
            steps = rng.integers(0, self.pipeline.cfg.steps_per_day, size=quota)
            wins = np.empty((quota, self.pipeline.window, self.pipeline.window_dim))
            quals = np.empty(quota)
            acts = np.empty(quota)
            for row, (pi, st) in enumerate(zip(picks, steps)):
                traj = pool[pi]
                series = self.pipeline.series_for(traj)
                wins[row] = self.pipeline.window_at(series, int(st))
                quals[row] = traj.quality
                acts[row] = traj.steps[int(st)].action
            windows[task], qualities[task], targets[task] = wins, quals, acts
            sizes[task] = quota
        return Batch(windows, qualities, targets, sizes)

    def max_quality(self, part: str, task: int) -> float:
        pool = [t.quality for t in self.split.part(part) if t.task == task]
        if not pool:
            raise ValueError(f"task missing in split: task {task} has no {part} data")
        return max(pool)
