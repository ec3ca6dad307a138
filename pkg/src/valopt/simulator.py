"""Synthetic nonstationary budgeted-auction environment.

One episode is a day of T steps. Each step offers a batch of impression
opportunities (value, market price) per task, drawn from diurnal periodic
volume/value curves with a multiplicative day-over-day drift. The agent's
action is a bid-scaling factor: it bids action * value on every opportunity,
wins when the bid beats the market price and the full price still fits the
remaining budget, and pays the market price. Everything is a pure function
of (config, day, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

_CURVE_FLOOR = 0.05  # keeps periodic multipliers positive
_TRAILING_STEPS = 4  # horizon for spend-rate / win-rate state features


@dataclass(frozen=True)
class TaskSpec:
    """One bidding task's market profile."""

    name: str
    base_value: float  # mean impression value at curve level 1.0
    value_dispersion: float  # lognormal sigma of values
    budget: float
    volume_base: float  # mean opportunities per step at curve level 1.0
    volume_amplitude: float = 0.5
    volume_phase: float = 0.0
    drift: float | None = None  # per-day multiplicative shift; None -> config drift

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError(f"task {self.name}: budget must be positive")
        if self.value_dispersion <= 0:
            raise ValueError(f"task {self.name}: dispersion must be positive")
        if self.base_value <= 0 or self.volume_base < 0:
            raise ValueError(f"task {self.name}: value/volume must be non-negative")


@dataclass(frozen=True)
class EnvConfig:
    tasks: tuple[TaskSpec, ...]
    steps_per_day: int = 96
    curve_period: int = 96  # fundamental diurnal period, in steps
    harmonic_period: int = 8
    harmonic_amplitude: float = 0.0
    value_amplitude: float = 0.2
    price_ratio: float = 0.5  # mean market price relative to mean value
    price_dispersion: float = 0.35
    price_value_corr: float = 0.5
    drift: float = 0.0
    discount: float = 1.0

    def __post_init__(self):
        if self.steps_per_day < 1:
            raise ValueError("steps_per_day must be at least 1")
        if len(self.tasks) < 1:
            raise ValueError("need at least one task")
        if not -1.0 <= self.price_value_corr <= 1.0:
            raise ValueError("price/value correlation must lie in [-1, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.price_ratio <= 0 or self.price_dispersion <= 0:
            raise ValueError("price parameters must be positive")

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def task_drift(self, task: int) -> float:
        d = self.tasks[task].drift
        return self.drift if d is None else d


# -- expected curves (used by generation and by expectation-based tests) ----


def drift_factor(cfg: EnvConfig, task: int, day: int) -> float:
    return (1.0 + cfg.task_drift(task)) ** (day - 1)


def volume_curve(cfg: EnvConfig, task: int) -> np.ndarray:
    """Expected opportunities per step over one day, before drift."""
    spec = cfg.tasks[task]
    t = np.arange(cfg.steps_per_day)
    curve = 1.0 + spec.volume_amplitude * np.sin(
        2.0 * np.pi * t / cfg.curve_period + spec.volume_phase
    )
    if cfg.harmonic_amplitude:
        curve = curve + cfg.harmonic_amplitude * np.sin(2.0 * np.pi * t / cfg.harmonic_period)
    return spec.volume_base * np.maximum(curve, _CURVE_FLOOR)


def value_mean_curve(cfg: EnvConfig, task: int) -> np.ndarray:
    """Mean impression value per step over one day, before drift."""
    spec = cfg.tasks[task]
    t = np.arange(cfg.steps_per_day)
    curve = 1.0 + cfg.value_amplitude * np.sin(
        2.0 * np.pi * t / cfg.curve_period + spec.volume_phase
    )
    return spec.base_value * np.maximum(curve, _CURVE_FLOOR)


def expected_counts(cfg: EnvConfig, task: int, day: int) -> np.ndarray:
    return volume_curve(cfg, task) * drift_factor(cfg, task, day)


def expected_value_mean(cfg: EnvConfig, task: int, day: int) -> np.ndarray:
    return value_mean_curve(cfg, task) * drift_factor(cfg, task, day)


# -- day generation ----------------------------------------------------------


@dataclass(frozen=True)
class AuctionDay:
    """Per-step impression opportunities for every task on one day."""

    day: int
    values: tuple[tuple[np.ndarray, ...], ...]  # [task][step] -> impression values
    prices: tuple[tuple[np.ndarray, ...], ...]  # [task][step] -> market prices


def generate_day(cfg: EnvConfig, day: int, seed: int) -> AuctionDay:
    """Draw one day's opportunities; bit-reproducible from (cfg, day, seed)."""
    if day < 1:
        raise ValueError("day must be >= 1")
    all_values, all_prices = [], []
    rho = cfg.price_value_corr
    mix = np.sqrt(1.0 - rho * rho)
    for k, spec in enumerate(cfg.tasks):
        rng = np.random.default_rng([seed, day, k])
        counts = rng.poisson(expected_counts(cfg, k, day))
        means = expected_value_mean(cfg, k, day)
        sv, sp = spec.value_dispersion, cfg.price_dispersion
        task_values, task_prices = [], []
        for t in range(cfg.steps_per_day):
            n = int(counts[t])
            z = rng.standard_normal((2, n))
            zp = rho * z[0] + mix * z[1]
            v = np.exp(np.log(means[t]) - 0.5 * sv * sv + sv * z[0])
            p = np.exp(np.log(cfg.price_ratio * means[t]) - 0.5 * sp * sp + sp * zp)
            task_values.append(v)
            task_prices.append(p)
        all_values.append(tuple(task_values))
        all_prices.append(tuple(task_prices))
    return AuctionDay(day, tuple(all_values), tuple(all_prices))


# -- episode state and stepping ----------------------------------------------


@dataclass(frozen=True)
class BidState:
    """Advertiser status at the start of a step."""

    step: int
    budget_left: float
    time_left_frac: float
    spend_rate: float  # mean spend per step over the trailing window
    recent_win_rate: float
    recent_avg_value: float
    recent: tuple[tuple[float, int, int, float], ...] = ()  # (cost, wins, opps, value) per step

    def __post_init__(self):
        if self.budget_left < 0:
            raise ValueError("budget_left must be non-negative")


def initial_state(cfg: EnvConfig, task: int) -> BidState:
    return BidState(
        step=0,
        budget_left=cfg.tasks[task].budget,
        time_left_frac=1.0,
        spend_rate=0.0,
        recent_win_rate=0.0,
        recent_avg_value=0.0,
    )


def step(
    cfg: EnvConfig,
    state: BidState,
    action: float,
    values: np.ndarray,
    prices: np.ndarray,
) -> tuple[BidState, float, float]:
    """Run one step's auctions at bid = action * value; pay the market price.

    An opportunity is won iff the bid strictly beats the price and the full
    price fits the remaining budget (checked in opportunity order), so the
    episode's total cost can never exceed the budget.
    """
    if not np.isfinite(action) or action < 0:
        raise ValueError(f"invalid bid scale: {action!r}")
    budget = state.budget_left
    reward = cost = 0.0
    wins = 0
    if action > 0 and values.size:
        bids = action * values
        candidates = bids > prices
        cand_cost = float(prices[candidates].sum())
        if cand_cost <= budget:
            wins = int(candidates.sum())
            reward = float(values[candidates].sum())
            cost = cand_cost
        else:
            for v, p, ok in zip(values, prices, candidates):
                if ok and p <= budget - cost:
                    wins += 1
                    reward += float(v)
                    cost += float(p)
        budget -= cost

    recent = (state.recent + ((cost, wins, int(values.size), reward),))[-_TRAILING_STEPS:]
    total_opps = sum(r[2] for r in recent)
    total_wins = sum(r[1] for r in recent)
    total_value = sum(r[3] for r in recent)
    t_next = state.step + 1
    next_state = BidState(
        step=t_next,
        budget_left=budget,
        time_left_frac=(cfg.steps_per_day - t_next) / cfg.steps_per_day,
        spend_rate=sum(r[0] for r in recent) / len(recent),
        recent_win_rate=total_wins / total_opps if total_opps else 0.0,
        recent_avg_value=total_value / total_wins if total_wins else 0.0,
        recent=recent,
    )
    return next_state, reward, cost


# -- state features ------------------------------------------------------------

FEATURE_NAMES = (
    "step_frac",
    "time_left_frac",
    "budget_frac",
    "spend_rate_norm",
    "win_rate",
    "value_norm",
)
FEATURE_DIM = len(FEATURE_NAMES)
FEAT_TIME_LEFT = 1
FEAT_BUDGET = 2


def state_features(cfg: EnvConfig, task: int, state: BidState) -> np.ndarray:
    """Normalized state vector used as model input and temporal channel set."""
    spec = cfg.tasks[task]
    per_step_budget = spec.budget / cfg.steps_per_day
    return np.array(
        [
            state.step / cfg.steps_per_day,
            state.time_left_frac,
            state.budget_left / spec.budget,
            state.spend_rate / per_step_budget,
            state.recent_win_rate,
            state.recent_avg_value / spec.base_value,
        ]
    )


# -- trajectories ---------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryStep:
    """State snapshot at decision time plus the action and its outcome."""

    t: int
    budget_left: float
    time_left_frac: float
    spend_rate: float
    win_rate: float
    avg_value: float
    action: float
    reward: float
    cost: float


@dataclass(frozen=True)
class Trajectory:
    task: int
    day: int
    steps: tuple[TrajectoryStep, ...]
    quality: float

    def total_reward(self) -> float:
        return sum(s.reward for s in self.steps)

    def total_cost(self) -> float:
        return sum(s.cost for s in self.steps)

    def discounted_return(self, discount: float) -> float:
        return sum(s.reward * discount ** s.t for s in self.steps)


def trajectory_features(cfg: EnvConfig, traj: Trajectory) -> np.ndarray:
    """(T, FEATURE_DIM) state-feature rows reconstructed from logged steps."""
    spec = cfg.tasks[traj.task]
    per_step_budget = spec.budget / cfg.steps_per_day
    rows = np.empty((len(traj.steps), FEATURE_DIM))
    for i, s in enumerate(traj.steps):
        rows[i] = (
            s.t / cfg.steps_per_day,
            s.time_left_frac,
            s.budget_left / spec.budget,
            s.spend_rate / per_step_budget,
            s.win_rate,
            s.avg_value / spec.base_value,
        )
    return rows


def rollout(
    cfg: EnvConfig,
    policy,
    task: int,
    day: int,
    seed: int,
    *,
    window_fn=None,
    quality_condition: float = 0.0,
    reference_return: float = 1.0,
    auction: AuctionDay | None = None,
) -> Trajectory:
    """Run one episode with ``policy(task, window, quality_condition) -> action``.

    The policy sees a window whose last row is the current state's feature
    vector; ``window_fn`` maps the feature history so far (current row
    included) to that window, defaulting to just the current row. The
    trajectory quality is the episode return divided by ``reference_return``.
    """
    if auction is None:
        auction = generate_day(cfg, day, seed)
    state = initial_state(cfg, task)
    history = np.empty((cfg.steps_per_day, FEATURE_DIM))
    steps = []
    total_reward = 0.0
    for t in range(cfg.steps_per_day):
        history[t] = state_features(cfg, task, state)
        window = window_fn(history[: t + 1]) if window_fn else history[t : t + 1]
        action = policy(task, window, quality_condition)
        if action is None or not np.isfinite(action):
            raise ValueError(f"policy produced non-finite action at step {t}")
        pre = state
        state, reward, cost = step(
            cfg, state, float(action), auction.values[task][t], auction.prices[task][t]
        )
        total_reward += reward
        steps.append(
            TrajectoryStep(
                t=t,
                budget_left=pre.budget_left,
                time_left_frac=pre.time_left_frac,
                spend_rate=pre.spend_rate,
                win_rate=pre.recent_win_rate,
                avg_value=pre.recent_avg_value,
                action=float(action),
                reward=reward,
                cost=cost,
            )
        )
    return Trajectory(task, day, tuple(steps), total_reward / reference_return)


# -- behavior policy and dataset generation -------------------------------------


@dataclass(frozen=True)
class BehaviorSpec:
    """Budget-pacing heuristic with multiplicative lognormal action noise."""

    base_scale: float = 1.0
    noise_sigma: float = 0.25


def behavior_policy(cfg: EnvConfig, spec: BehaviorSpec, rng: np.random.Generator):
    """Pacing policy: scale bids by remaining-budget vs remaining-time ratio."""
    min_frac = 1.0 / cfg.steps_per_day

    def act(task, window, quality):
        row = window[-1]
        pace = row[FEAT_BUDGET] / max(row[FEAT_TIME_LEFT], min_frac)
        noise = 1.0
        if spec.noise_sigma > 0:
            sigma = spec.noise_sigma
            noise = float(np.exp(sigma * rng.standard_normal() - 0.5 * sigma * sigma))
        return spec.base_scale * pace * noise

    return act


def day_schedule(count: int, days: int) -> list[int]:
    """Spread ``count`` trajectories over days 1..days, extras on earliest days."""
    base, extra = divmod(count, days)
    return [base + (1 if d < extra else 0) for d in range(days)]


def generate_dataset(
    cfg: EnvConfig,
    days: int,
    counts: tuple[int, ...],
    behavior: BehaviorSpec,
    seed: int,
) -> tuple[list[Trajectory], tuple[float, ...]]:
    """Logged behavior trajectories plus per-task reference returns.

    Trajectory quality is the episode return normalized by the task's mean
    behavior return over the training days (all but the last two), so the
    conditioning signal is comparable across tasks.
    """
    if len(counts) != cfg.num_tasks:
        raise ValueError("need one trajectory count per task")
    if any(c < 1 for c in counts):
        raise ValueError("trajectory counts must be at least 1")
    raw: list[Trajectory] = []
    for k in range(cfg.num_tasks):
        schedule = day_schedule(counts[k], days)
        for day in range(1, days + 1):
            for j in range(schedule[day - 1]):
                policy = behavior_policy(cfg, behavior, np.random.default_rng([seed, k, day, j]))
                raw.append(rollout(cfg, policy, k, day, seed))

    train_cutoff = days - 2 if days >= 3 else days
    refs = []
    for k in range(cfg.num_tasks):
        returns = [t.total_reward() for t in raw if t.task == k and t.day <= train_cutoff]
        mean = float(np.mean(returns)) if returns else 0.0
        refs.append(mean if mean > 0 else 1.0)
    out = [replace(t, quality=t.total_reward() / refs[t.task]) for t in raw]
    return out, tuple(refs)


# -- trajectory file format ------------------------------------------------------

TRAJECTORY_SCHEMA = 1
TRAJECTORY_FIELDS = (
    "day",
    "task",
    "t",
    "budget_left",
    "time_left_frac",
    "spend_rate",
    "win_rate",
    "avg_value",
    "action",
    "reward",
    "cost",
)


def write_trajectories(path: str | Path, trajectories) -> None:
    """One step per line in TRAJECTORY_FIELDS order; t resets to 0 per episode."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# trajectory-schema {TRAJECTORY_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_FIELDS)
        for traj in trajectories:
            for s in traj.steps:
                writer.writerow(
                    [traj.day, traj.task, s.t]
                    + [
                        repr(float(v))
                        for v in (
                            s.budget_left,
                            s.time_left_frac,
                            s.spend_rate,
                            s.win_rate,
                            s.avg_value,
                            s.action,
                            s.reward,
                            s.cost,
                        )
                    ]
                )


def read_trajectories(
    path: str | Path, reference_returns: tuple[float, ...] | None = None
) -> list[Trajectory]:
    """Rebuild trajectories from a step file; episode boundaries are t == 0.

    Quality labels are recomputed from ``reference_returns`` (per task); with
    none given, quality equals the raw episode return.
    """
    out: list[Trajectory] = []
    current: list[TrajectoryStep] = []
    meta: tuple[int, int] | None = None

    def flush():
        if not current:
            return
        day, task = meta
        total = sum(s.reward for s in current)
        ref = reference_returns[task] if reference_returns else 1.0
        out.append(Trajectory(task, day, tuple(current), total / ref))

    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# trajectory-schema"):
            raise ValueError("not a trajectory file (missing schema header)")
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRAJECTORY_FIELDS:
            raise ValueError("unexpected trajectory columns")
        for row in reader:
            day, task, t = int(row[0]), int(row[1]), int(row[2])
            if t == 0:
                flush()
                current = []
                meta = (day, task)
            vals = [float(v) for v in row[3:]]
            current.append(TrajectoryStep(t, *vals))
    flush()
    return out
