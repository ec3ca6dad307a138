"""Benchmark orchestration: train every strategy on shared data, evaluate on
fresh test-day auctions, and emit deterministic result tables."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import BatchSampler, FeaturePipeline, temporal_split
from .metrics import BenchmarkResult, TaskMetrics, delta_m
from .model import ModelConfig, SharedBottomModel
from .simulator import (
    FEATURE_DIM,
    BehaviorSpec,
    EnvConfig,
    TaskSpec,
    generate_dataset,
    rollout,
)
from .temporal import PeriodFeatureParams
from .trainer import TrainConfig, TrainResult, train, write_diagnostics
from .weighting import write_weight_trace


@dataclass(frozen=True)
class PipelineConfig:
    window: int = 8
    history: int = 96
    k_top: int = 2
    temporal: bool = True  # False reproduces the "no periodicity features" ablation
    temporal_seed: int = 7


@dataclass(frozen=True)
class BenchConfig:
    env: EnvConfig
    behavior: BehaviorSpec = BehaviorSpec()
    days: int = 10
    counts: tuple[int, ...] = (20, 20, 10)
    d_val: int = 9
    d_test: int = 10
    seeds: tuple[int, ...] = (1, 2, 3)
    eval_rollouts: int = 3
    strategies: tuple[str, ...] = ("vanilla", "vamo", "vamo_noval")
    iterations: int = 300
    step_size: float = 0.05
    batch_size: int = 15
    temperature: float = 1.0
    model_hidden: int = 32
    model_encoder_layers: int = 2
    model_head_layers: int = 1
    model_activation: str = "tanh"
    pipeline: PipelineConfig = PipelineConfig()

    def __post_init__(self):
        if not self.strategies or not self.seeds:
            raise ValueError("need at least one strategy and one seed")


def parse_strategy(token: str) -> tuple[str, float | None]:
    """'vamo:0.1' -> ('vamo', 0.1); bare names carry no temperature."""
    name, _, temp = token.partition(":")
    return name, (float(temp) if temp else None)


def build_pipeline(cfg: EnvConfig, pc: PipelineConfig) -> FeaturePipeline:
    params = (
        PeriodFeatureParams.seeded(FEATURE_DIM, FEATURE_DIM, pc.temporal_seed)
        if pc.temporal
        else None
    )
    return FeaturePipeline(cfg, pc.window, pc.history, pc.k_top, params)


def model_config(bench: BenchConfig, init_seed: int) -> ModelConfig:
    return ModelConfig(
        num_tasks=bench.env.num_tasks,
        window=bench.pipeline.window,
        feature_dim=FEATURE_DIM + 1,
        hidden=bench.model_hidden,
        encoder_layers=bench.model_encoder_layers,
        head_layers=bench.model_head_layers,
        activation=bench.model_activation,
        init_seed=init_seed,
    )


def greedy_policy(model: SharedBottomModel, params):
    """Deterministic policy from a trained model; negative outputs bid zero."""

    def act(task, window, quality):
        return max(0.0, model.with_params(params).forward(task, window, quality))

    return act


def evaluate_policy(
    cfg: EnvConfig,
    model: SharedBottomModel,
    params,
    task: int,
    test_day: int,
    seeds,
    pipeline: FeaturePipeline,
    quality_condition: float,
) -> TaskMetrics:
    """Greedy rollouts on freshly generated test-day auctions, one per seed."""
    policy = greedy_policy(model, params)
    returns, costs = [], []
    for seed in seeds:
        traj = rollout(
            cfg,
            policy,
            task,
            test_day,
            seed,
            window_fn=pipeline.rollout_window_fn(),
            quality_condition=quality_condition,
        )
        returns.append(traj.total_reward())
        costs.append(traj.total_cost())
    return TaskMetrics(task, tuple(returns), tuple(costs))


def _train_config(bench: BenchConfig, token: str, seed: int) -> TrainConfig:
    name, temp = parse_strategy(token)
    if name in ("vamo", "vamo_noval"):
        temp = bench.temperature if temp is None else temp
    return TrainConfig(
        iterations=bench.iterations,
        step_size=bench.step_size,
        strategy=name,
        temperature=temp,
        batch_size=bench.batch_size,
        seed=seed,
    )


@dataclass
class SeedRun:
    """Everything trained and measured for one benchmark seed."""

    seed: int
    stl_returns: tuple[float, ...]
    stl_costs: tuple[float, ...]
    strategy_returns: dict[str, tuple[float, ...]]
    strategy_costs: dict[str, tuple[float, ...]]
    results: dict[str, TrainResult] = field(default_factory=dict)


def _eval_result(
    bench: BenchConfig,
    result: TrainResult,
    sampler: BatchSampler,
    pipeline: FeaturePipeline,
    model: SharedBottomModel,
    eval_seeds,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    returns, costs = [], []
    for task in range(bench.env.num_tasks):
        m = evaluate_policy(
            bench.env,
            model,
            result.per_task[task],
            task,
            bench.d_test,
            eval_seeds,
            pipeline,
            sampler.max_quality("train", task),
        )
        returns.append(m.mean_return)
        costs.append(m.mean_cost)
    return tuple(returns), tuple(costs)


def run_seed(bench: BenchConfig, seed: int) -> SeedRun:
    """Generate one seed's data, train STL plus every strategy, evaluate all."""
    trajectories, _ = generate_dataset(bench.env, bench.days, bench.counts, bench.behavior, seed)
    split = temporal_split(trajectories, bench.d_val, bench.d_test)
    pipeline = build_pipeline(bench.env, bench.pipeline)
    sampler = BatchSampler(split, pipeline)
    model = SharedBottomModel.create(model_config(bench, init_seed=seed))
    eval_seeds = [int(x) for x in np.random.SeedSequence([seed, 9000]).generate_state(
        bench.eval_rollouts
    )]

    stl_result = train(model, sampler, _train_config(bench, "stl", seed))
    stl_returns, stl_costs = _eval_result(bench, stl_result, sampler, pipeline, model, eval_seeds)

    run = SeedRun(seed, stl_returns, stl_costs, {}, {})
    run.results["stl"] = stl_result
    for token in bench.strategies:
        result = train(model, sampler, _train_config(bench, token, seed))
        returns, costs = _eval_result(bench, result, sampler, pipeline, model, eval_seeds)
        run.strategy_returns[token] = returns
        run.strategy_costs[token] = costs
        run.results[token] = result
    return run


def run_benchmark(bench: BenchConfig, out_dir: str | Path | None = None) -> BenchmarkResult:
    """Train and evaluate every (strategy, seed); optionally write result files."""
    runs = [run_seed(bench, seed) for seed in bench.seeds]
    k = bench.env.num_tasks

    stl = tuple(
        TaskMetrics(
            t,
            tuple(r.stl_returns[t] for r in runs),
            tuple(r.stl_costs[t] for r in runs),
        )
        for t in range(k)
    )
    metrics, deltas, per_seed = {}, {}, {}
    for token in bench.strategies:
        metrics[token] = tuple(
            TaskMetrics(
                t,
                tuple(r.strategy_returns[token][t] for r in runs),
                tuple(r.strategy_costs[token][t] for r in runs),
            )
            for t in range(k)
        )
        # paired per-seed comparison against the same seed's STL baselines
        seed_deltas = [
            delta_m(r.stl_returns, r.strategy_returns[token]) for r in runs
        ]
        deltas[token] = float(np.mean(seed_deltas))
        per_seed[token] = tuple(r.strategy_returns[token] for r in runs)

    result = BenchmarkResult(
        strategies=tuple(bench.strategies),
        metrics=metrics,
        stl_metrics=stl,
        delta_m=deltas,
        per_seed=per_seed,
        seeds=tuple(bench.seeds),
    )
    if out_dir is not None:
        write_result_tables(bench, result, runs, Path(out_dir))
    return result


# -- result tables -----------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_result_tables(bench: BenchConfig, result: BenchmarkResult, runs, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    task_names = [spec.name for spec in bench.env.tasks]

    header = ["strategy"]
    for name in task_names:
        header += [f"return_{name}", f"std_{name}"]
    header.append("delta_m_pct")
    lines = [",".join(header)]
    stl_row = ["stl"]
    for tm in result.stl_metrics:
        stl_row += [_fmt(tm.mean_return), _fmt(tm.std_return)]
    stl_row.append("")
    lines.append(",".join(stl_row))
    for token in result.strategies:
        row = [token]
        for tm in result.metrics[token]:
            row += [_fmt(tm.mean_return), _fmt(tm.std_return)]
        row.append(_fmt(result.delta_m[token]))
        lines.append(",".join(row))
    (out_dir / "benchmark.csv").write_text("\n".join(lines) + "\n")

    per_seed_lines = [",".join(["strategy", "seed"] + [f"return_{n}" for n in task_names]
                              + ["delta_m_pct"])]
    for i, run in enumerate(runs):
        per_seed_lines.append(
            ",".join(["stl", str(run.seed)] + [_fmt(v) for v in run.stl_returns] + [""])
        )
        for token in result.strategies:
            d = delta_m(run.stl_returns, run.strategy_returns[token])
            per_seed_lines.append(
                ",".join(
                    [token, str(run.seed)]
                    + [_fmt(v) for v in run.strategy_returns[token]]
                    + [_fmt(d)]
                )
            )
    (out_dir / "per_seed.csv").write_text("\n".join(per_seed_lines) + "\n")

    traces = out_dir / "traces"
    traces.mkdir(exist_ok=True)
    for run in runs:
        for token, tr in run.results.items():
            safe = token.replace(":", "_")
            if tr.diagnostics is not None:
                write_weight_trace(
                    traces / f"{safe}_seed{run.seed}.trace", tr.diagnostics.weight_trace()
                )
                write_diagnostics(tr.diagnostics, traces / f"{safe}_seed{run.seed}.diag")


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


# -- default synthetic profile -------------------------------------------------


def default_env() -> EnvConfig:
    """Three task profiles: high-value/low-count, mid, low-value/high-count."""
    return EnvConfig(
        tasks=(
            TaskSpec("store", base_value=10.0, value_dispersion=0.5, budget=400.0,
                     volume_base=5.0, volume_amplitude=0.5, volume_phase=0.0),
            TaskSpec("direct", base_value=5.0, value_dispersion=0.45, budget=300.0,
                     volume_base=10.0, volume_amplitude=0.5, volume_phase=0.8),
            TaskSpec("cart", base_value=1.0, value_dispersion=0.4, budget=80.0,
                     volume_base=25.0, volume_amplitude=0.6, volume_phase=1.6),
        ),
        harmonic_amplitude=0.15,
        drift=0.05,
    )


def default_bench(seeds: tuple[int, ...] = (1, 2, 3, 4, 5)) -> BenchConfig:
    return BenchConfig(env=default_env(), seeds=seeds)
