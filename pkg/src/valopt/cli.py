"""Command-line entry points: gen-data, train, evaluate, benchmark, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import benchmark as bench_mod
from . import config as config_mod
from .dataset import BatchSampler, temporal_split, write_split_manifest
from .model import SharedBottomModel
from .params import load_checkpoint, save_checkpoint
from .simulator import generate_dataset, read_trajectories, write_trajectories
from .trainer import train, write_diagnostics
from .weighting import write_weight_trace


def _load_dataset(data_dir: Path):
    env, behavior = config_mod.load_env(data_dir / "env.cfg")
    manifest = config_mod.manifest_from_text((data_dir / "manifest.cfg").read_text())
    trajectories = read_trajectories(
        data_dir / "trajectories.csv", manifest["reference_returns"]
    )
    return env, behavior, manifest, trajectories


def cmd_gen_data(args) -> int:
    env, behavior = config_mod.load_env(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts = tuple(int(c) for c in args.counts.split(","))
    trajectories, refs = generate_dataset(env, args.days, counts, behavior, args.seed)
    write_trajectories(out / "trajectories.csv", trajectories)
    env_text = config_mod.env_to_text(env, behavior)
    (out / "env.cfg").write_text(env_text)
    (out / "manifest.cfg").write_text(
        config_mod.manifest_to_text(
            args.days, args.seed, counts, refs, bench_mod.config_hash(env_text)
        )
    )
    print(f"wrote {len(trajectories)} trajectories to {out}")
    return 0


def cmd_train(args) -> int:
    cfg, model_kw, pipeline_cfg, split_kw = config_mod.train_from_text(
        Path(args.config).read_text()
    )
    data_dir = Path(args.data)
    env, _, manifest, trajectories = _load_dataset(data_dir)
    d_val = split_kw.get("d_val", manifest["days"] - 1)
    d_test = split_kw.get("d_test", manifest["days"])
    split = temporal_split(trajectories, d_val, d_test)
    pipeline = bench_mod.build_pipeline(env, pipeline_cfg)
    sampler = BatchSampler(split, pipeline)

    from .model import ModelConfig
    from .simulator import FEATURE_DIM

    model_kw.setdefault("window", pipeline_cfg.window)
    model = SharedBottomModel.create(
        ModelConfig(num_tasks=env.num_tasks, feature_dim=FEATURE_DIM + 1, **model_kw)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_split_manifest(split, out / "split_manifest.cfg")
    result = train(model, sampler, cfg)
    if cfg.strategy == "stl":
        for task, params in result.per_task.items():
            save_checkpoint(params, out / f"model_task{task}.txt")
            write_diagnostics(result.stl_diagnostics[task], out / f"diagnostics_task{task}.tsv")
    else:
        save_checkpoint(result.params, out / "model.txt")
        write_diagnostics(result.diagnostics, out / "diagnostics.tsv")
        write_weight_trace(out / "weights.trace", result.diagnostics.weight_trace())
    print(f"trained strategy={cfg.strategy} for {cfg.iterations} iterations -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    data_dir = Path(args.data)
    env, _, manifest, trajectories = _load_dataset(data_dir)
    split = temporal_split(trajectories, manifest["days"] - 1, manifest["days"])
    pipeline_cfg = bench_mod.PipelineConfig(window=args.window, temporal=not args.no_temporal)
    pipeline = bench_mod.build_pipeline(env, pipeline_cfg)
    sampler = BatchSampler(split, pipeline)
    params = load_checkpoint(args.checkpoint)

    from .model import ModelConfig
    from .simulator import FEATURE_DIM

    model = SharedBottomModel.create(
        ModelConfig(
            num_tasks=env.num_tasks,
            window=args.window,
            feature_dim=FEATURE_DIM + 1,
            hidden=args.hidden,
        )
    ).with_params(params)
    seeds = [int(s) for s in args.seeds.split(",")]
    metrics = bench_mod.evaluate_policy(
        env,
        model,
        params,
        args.task,
        manifest["days"],
        seeds,
        pipeline,
        sampler.max_quality("train", args.task),
    )
    roi = f"{metrics.roi:.4f}" if metrics.roi is not None else "n/a"
    print(
        f"task={args.task} runs={metrics.runs} mean_return={metrics.mean_return:.4f} "
        f"std={metrics.std_return:.4f} mean_cost={metrics.mean_cost:.4f} roi={roi}"
    )
    return 0


def cmd_benchmark(args) -> int:
    if args.config:
        bench = config_mod.load_bench(args.config)
    else:
        bench = bench_mod.default_bench()
    out = Path(args.out)
    result = bench_mod.run_benchmark(bench, out)
    (out / "bench_config.cfg").write_text(config_mod.bench_to_text(bench))
    for token in result.strategies:
        print(f"{token}: delta_m% = {result.delta_m[token]:.2f}")
    print(f"tables written to {out}")
    return 0


def cmd_report(args) -> int:
    from .report import render_report

    written = render_report(args.results, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valopt",
        description="Multi-task bidding toolkit: data generation, training, "
        "evaluation, benchmarks, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a logged trajectory dataset")
    p.add_argument("--config", required=True, help="environment config file")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=10)
    p.add_argument("--counts", default="20,20,10", help="per-task trajectory counts")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train one strategy on a dataset")
    p.add_argument("--config", required=True, help="training config file")
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on the test day")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--task", type=int, required=True)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--no-temporal", action="store_true")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run strategies x seeds and emit tables")
    p.add_argument("--config", help="benchmark config file (defaults to the built-in profile)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("report", help="render tables, plot data, and figures")
    p.add_argument("--results", required=True, help="benchmark output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
