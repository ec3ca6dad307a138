import numpy as np
import pytest

from valopt.simulator import (
    AuctionDay,
    BehaviorSpec,
    EnvConfig,
    TaskSpec,
    behavior_policy,
    day_schedule,
    expected_counts,
    expected_value_mean,
    generate_dataset,
    generate_day,
    initial_state,
    read_trajectories,
    rollout,
    state_features,
    step,
    write_trajectories,
)
from valopt.temporal import HistoryWindow, spectrum, top_periods


def flat_env(**kw):
    """Single-task environment with flat curves unless overridden."""
    task_kw = dict(
        name="t0",
        base_value=4.0,
        value_dispersion=0.4,
        budget=100.0,
        volume_base=4.0,
        volume_amplitude=0.0,
    )
    for key in list(kw):
        if key in task_kw:
            task_kw[key] = kw.pop(key)
    base = dict(tasks=(TaskSpec(**task_kw),), steps_per_day=96)
    base.update(kw)
    return EnvConfig(**base)


def multi_env(drift=0.0, **kw):
    return EnvConfig(
        tasks=(
            TaskSpec("a", 8.0, 0.5, 300.0, 4.0, volume_amplitude=0.5),
            TaskSpec("b", 4.0, 0.4, 200.0, 8.0, volume_amplitude=0.5, volume_phase=0.7),
            TaskSpec("c", 1.0, 0.4, 60.0, 16.0, volume_amplitude=0.6, volume_phase=1.4),
        ),
        drift=drift,
        **kw,
    )


# -- day generation -----------------------------------------------------------


def test_generate_day_poisson_mean_oracle():
    cfg = flat_env(steps_per_day=200, volume_base=4.0)
    counts = []
    for seed in range(50):
        day = generate_day(cfg, 1, seed)
        counts.extend(len(v) for v in day.values[0])
    n = len(counts)
    assert n == 10_000
    sigma_mean = np.sqrt(4.0 / n)
    assert abs(np.mean(counts) - 4.0) <= 3.0 * sigma_mean


def test_generate_day_value_mean_oracle():
    cfg = flat_env(value_amplitude=0.0, base_value=4.0)
    values = np.concatenate(
        [np.concatenate(generate_day(cfg, 1, s).values[0]) for s in range(30)]
    )
    sigma_mean = values.std() / np.sqrt(values.size)
    assert abs(values.mean() - 4.0) <= 3.0 * sigma_mean


def test_no_drift_days_identical_in_expectation():
    cfg = multi_env(drift=0.0)
    for task in range(3):
        assert np.array_equal(expected_counts(cfg, task, 1), expected_counts(cfg, task, 9))
        assert np.array_equal(
            expected_value_mean(cfg, task, 1), expected_value_mean(cfg, task, 9)
        )


def test_generate_day_bit_identical():
    cfg = multi_env(drift=0.03)
    a = generate_day(cfg, 4, 123)
    b = generate_day(cfg, 4, 123)
    for k in range(cfg.num_tasks):
        for t in range(cfg.steps_per_day):
            assert np.array_equal(a.values[k][t], b.values[k][t])
            assert np.array_equal(a.prices[k][t], b.prices[k][t])


def test_day_must_be_positive():
    with pytest.raises(ValueError, match="day"):
        generate_day(flat_env(), 0, 1)


# -- stepping ----------------------------------------------------------------


def test_step_zero_action_wins_nothing():
    cfg = flat_env()
    s0 = initial_state(cfg, 0)
    s1, reward, cost = step(cfg, s0, 0.0, np.array([5.0, 2.0]), np.array([1.0, 1.0]))
    assert (reward, cost) == (0.0, 0.0)
    assert s1.budget_left == 100.0
    assert s1.step == 1
    assert s1.time_left_frac == pytest.approx(95 / 96)


def test_step_exhausted_budget_wins_nothing():
    cfg = flat_env()
    s0 = initial_state(cfg, 0)
    broke = type(s0)(
        step=3, budget_left=0.0, time_left_frac=0.5, spend_rate=0.0,
        recent_win_rate=0.0, recent_avg_value=0.0,
    )
    _, reward, cost = step(cfg, broke, 10.0, np.array([5.0]), np.array([1.0]))
    assert (reward, cost) == (0.0, 0.0)


def test_step_hand_win_rule():
    cfg = flat_env()
    s0 = initial_state(cfg, 0)
    s1, reward, cost = step(cfg, s0, 0.5, np.array([10.0]), np.array([4.0]))
    assert reward == 10.0 and cost == 4.0
    assert s1.budget_left == 96.0
    assert s1.recent_win_rate == 1.0
    assert s1.recent_avg_value == 10.0
    assert s1.spend_rate == 4.0


def test_step_budget_gate_sequential():
    cfg = flat_env(budget=5.0)
    s0 = initial_state(cfg, 0)
    # both bids win on price, only the first fits the budget
    s1, reward, cost = step(cfg, s0, 1.0, np.array([10.0, 10.0]), np.array([4.0, 4.0]))
    assert (reward, cost) == (10.0, 4.0)
    assert s1.budget_left == 1.0


def test_step_rejects_negative_action():
    cfg = flat_env()
    with pytest.raises(ValueError, match="invalid bid scale"):
        step(cfg, initial_state(cfg, 0), -0.1, np.array([1.0]), np.array([1.0]))


# -- rollouts -----------------------------------------------------------------


def test_rollout_zero_policy():
    cfg = flat_env()
    traj = rollout(cfg, lambda task, w, y: 0.0, 0, 1, 7)
    assert traj.total_reward() == 0.0
    assert traj.total_cost() == 0.0
    assert traj.quality == 0.0
    assert len(traj.steps) == cfg.steps_per_day


def test_rollout_infinite_budget_wins_everything():
    cfg = flat_env(budget=1e12)
    day = generate_day(cfg, 1, 3)
    traj = rollout(cfg, lambda task, w, y: 1e9, 0, 1, 3)
    total_value = sum(float(v.sum()) for v in day.values[0])
    assert traj.total_reward() == pytest.approx(total_value)


def test_rollout_budget_never_exceeded():
    cfg = multi_env(drift=0.05)
    rng = np.random.default_rng(0)
    for trial in range(60):
        task = int(rng.integers(0, 3))
        action = float(rng.uniform(0, 3))
        traj = rollout(cfg, lambda t, w, y: action, task, int(rng.integers(1, 10)), trial)
        assert traj.total_cost() <= cfg.tasks[task].budget + 1e-12


def test_rollout_monotone_in_action():
    cfg = flat_env(budget=1e12)
    auction = generate_day(cfg, 1, 11)
    rewards, costs = [], []
    for action in (0.2, 0.5, 1.0, 2.0):
        traj = rollout(cfg, lambda t, w, y: action, 0, 1, 11, auction=auction)
        rewards.append(traj.total_reward())
        costs.append(traj.total_cost())
    assert all(a <= b for a, b in zip(rewards, rewards[1:]))
    assert all(a <= b for a, b in zip(costs, costs[1:]))


def test_rollout_rejects_non_finite_policy():
    cfg = flat_env()
    with pytest.raises(ValueError, match="non-finite action"):
        rollout(cfg, lambda t, w, y: float("nan"), 0, 1, 1)


def test_periodicity_recovered_from_expected_volume():
    cfg = multi_env(harmonic_amplitude=0.0)
    curve = expected_counts(cfg, 0, 1)
    dec = top_periods(spectrum(HistoryWindow(curve)), 1)
    assert dec.periods[0][0] == cfg.curve_period


def test_drift_monotone_in_expectation():
    for drift in (0.04, -0.04):
        cfg = multi_env(drift=drift)
        daily = [float(np.mean(expected_value_mean(cfg, 0, d))) for d in range(1, 11)]
        diffs = np.diff(daily)
        assert np.all(diffs > 0) if drift > 0 else np.all(diffs < 0)


# -- dataset generation ------------------------------------------------------------


def test_day_schedule_even_spread():
    assert day_schedule(20, 10) == [2] * 10
    assert day_schedule(10, 10) == [1] * 10
    assert day_schedule(13, 10) == [2, 2, 2, 1, 1, 1, 1, 1, 1, 1]


def test_generate_dataset_counts_and_days():
    cfg = multi_env(drift=0.05)
    trajs, refs = generate_dataset(cfg, 10, (20, 20, 10), BehaviorSpec(), seed=1)
    assert len(trajs) == 50
    hist = [sum(1 for t in trajs if t.task == k) for k in range(3)]
    assert hist == [20, 20, 10]
    assert {t.day for t in trajs} == set(range(1, 11))
    assert len(refs) == 3 and all(r > 0 for r in refs)


def test_generate_dataset_noise_zero_replicas_identical():
    cfg = multi_env()
    trajs, _ = generate_dataset(cfg, 5, (10, 5, 5), BehaviorSpec(noise_sigma=0.0), seed=2)
    per_day = [t for t in trajs if t.task == 0 and t.day == 1]
    assert len(per_day) == 2
    assert per_day[0].steps == per_day[1].steps


def test_generate_dataset_reproducible():
    cfg = multi_env(drift=0.02)
    a, ra = generate_dataset(cfg, 4, (4, 4, 4), BehaviorSpec(), seed=9)
    b, rb = generate_dataset(cfg, 4, (4, 4, 4), BehaviorSpec(), seed=9)
    assert ra == rb
    assert all(x == y for x, y in zip(a, b))


def test_quality_is_normalized_return():
    cfg = multi_env()
    trajs, refs = generate_dataset(cfg, 4, (4, 4, 4), BehaviorSpec(), seed=5)
    for t in trajs:
        assert t.quality == pytest.approx(t.total_reward() / refs[t.task])


def test_behavior_policy_reads_pacing_features():
    cfg = flat_env()
    policy = behavior_policy(cfg, BehaviorSpec(noise_sigma=0.0), np.random.default_rng(0))
    row = state_features(cfg, 0, initial_state(cfg, 0))
    assert policy(0, row[None, :], 0.0) == pytest.approx(1.0)  # on pace at start


# -- trajectory files -----------------------------------------------------------------


def test_trajectory_file_roundtrip(tmp_path):
    cfg = multi_env(drift=0.03)
    trajs, refs = generate_dataset(cfg, 4, (4, 3, 3), BehaviorSpec(), seed=11)
    path = tmp_path / "trajectories.csv"
    write_trajectories(path, trajs)
    back = read_trajectories(path, refs)
    assert len(back) == len(trajs)
    for orig, loaded in zip(trajs, back):
        assert loaded.task == orig.task and loaded.day == orig.day
        assert loaded.quality == pytest.approx(orig.quality)
        assert loaded.steps == orig.steps


def test_trajectory_file_header_guard(tmp_path):
    path = tmp_path / "bogus.csv"
    path.write_text("day,task\n")
    with pytest.raises(ValueError, match="schema"):
        read_trajectories(path)
