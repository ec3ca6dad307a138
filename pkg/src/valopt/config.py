"""Plain-text configuration files (key-value pairs under section headers).

One format serves the environment profile, dataset manifests, training runs,
and benchmark definitions.
"""

from __future__ import annotations

import configparser
import io
from pathlib import Path

from .benchmark import BenchConfig, PipelineConfig
from .simulator import BehaviorSpec, EnvConfig, TaskSpec
from .trainer import TrainConfig


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None)


def _dump(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- environment --------------------------------------------------------------


def env_to_text(cfg: EnvConfig, behavior: BehaviorSpec | None = None) -> str:
    cp = _parser()
    cp["env"] = {
        "steps_per_day": str(cfg.steps_per_day),
        "curve_period": str(cfg.curve_period),
        "harmonic_period": str(cfg.harmonic_period),
        "harmonic_amplitude": repr(cfg.harmonic_amplitude),
        "value_amplitude": repr(cfg.value_amplitude),
        "price_ratio": repr(cfg.price_ratio),
        "price_dispersion": repr(cfg.price_dispersion),
        "price_value_corr": repr(cfg.price_value_corr),
        "drift": repr(cfg.drift),
        "discount": repr(cfg.discount),
    }
    for spec in cfg.tasks:
        section = {
            "base_value": repr(spec.base_value),
            "value_dispersion": repr(spec.value_dispersion),
            "budget": repr(spec.budget),
            "volume_base": repr(spec.volume_base),
            "volume_amplitude": repr(spec.volume_amplitude),
            "volume_phase": repr(spec.volume_phase),
        }
        if spec.drift is not None:
            section["drift"] = repr(spec.drift)
        cp[f"task.{spec.name}"] = section
    if behavior is not None:
        cp["behavior"] = {
            "base_scale": repr(behavior.base_scale),
            "noise_sigma": repr(behavior.noise_sigma),
        }
    return _dump(cp)


def env_from_text(text: str) -> tuple[EnvConfig, BehaviorSpec]:
    cp = _parser()
    cp.read_string(text)
    env = cp["env"]
    tasks = []
    for name in cp.sections():
        if not name.startswith("task."):
            continue
        sec = cp[name]
        tasks.append(
            TaskSpec(
                name=name[len("task.") :],
                base_value=sec.getfloat("base_value"),
                value_dispersion=sec.getfloat("value_dispersion"),
                budget=sec.getfloat("budget"),
                volume_base=sec.getfloat("volume_base"),
                volume_amplitude=sec.getfloat("volume_amplitude", 0.5),
                volume_phase=sec.getfloat("volume_phase", 0.0),
                drift=sec.getfloat("drift") if "drift" in sec else None,
            )
        )
    cfg = EnvConfig(
        tasks=tuple(tasks),
        steps_per_day=env.getint("steps_per_day", 96),
        curve_period=env.getint("curve_period", 96),
        harmonic_period=env.getint("harmonic_period", 8),
        harmonic_amplitude=env.getfloat("harmonic_amplitude", 0.0),
        value_amplitude=env.getfloat("value_amplitude", 0.2),
        price_ratio=env.getfloat("price_ratio", 0.5),
        price_dispersion=env.getfloat("price_dispersion", 0.35),
        price_value_corr=env.getfloat("price_value_corr", 0.5),
        drift=env.getfloat("drift", 0.0),
        discount=env.getfloat("discount", 1.0),
    )
    behavior = BehaviorSpec()
    if cp.has_section("behavior"):
        behavior = BehaviorSpec(
            base_scale=cp["behavior"].getfloat("base_scale", 1.0),
            noise_sigma=cp["behavior"].getfloat("noise_sigma", 0.25),
        )
    return cfg, behavior


def load_env(path: str | Path) -> tuple[EnvConfig, BehaviorSpec]:
    return env_from_text(Path(path).read_text())


# -- dataset manifest -----------------------------------------------------------


def manifest_to_text(
    days: int, seed: int, counts, references, cfg_hash: str
) -> str:
    cp = _parser()
    cp["dataset"] = {
        "schema": "1",
        "days": str(days),
        "seed": str(seed),
        "config_hash": cfg_hash,
    }
    cp["counts"] = {f"task{i}": str(int(c)) for i, c in enumerate(counts)}
    cp["reference_returns"] = {f"task{i}": repr(float(r)) for i, r in enumerate(references)}
    return _dump(cp)


def manifest_from_text(text: str) -> dict:
    cp = _parser()
    cp.read_string(text)
    k = len(cp["counts"])
    return {
        "days": cp["dataset"].getint("days"),
        "seed": cp["dataset"].getint("seed"),
        "config_hash": cp["dataset"]["config_hash"],
        "counts": tuple(cp["counts"].getint(f"task{i}") for i in range(k)),
        "reference_returns": tuple(
            cp["reference_returns"].getfloat(f"task{i}") for i in range(k)
        ),
    }


# -- training -----------------------------------------------------------------


def train_to_text(cfg: TrainConfig, model_kw: dict, pipeline: PipelineConfig, split: dict) -> str:
    cp = _parser()
    train_section = {
        "iterations": str(cfg.iterations),
        "step_size": repr(cfg.step_size),
        "strategy": cfg.strategy,
        "schedule": cfg.schedule,
        "batch_size": str(cfg.batch_size),
        "seed": str(cfg.seed),
        "ema_beta": repr(cfg.ema_beta),
        "dwa_temperature": repr(cfg.dwa_temperature),
        "diag_every": str(cfg.diag_every),
        "checkpoint_every": str(cfg.checkpoint_every),
    }
    if cfg.temperature is not None:
        train_section["temperature"] = repr(cfg.temperature)
    cp["train"] = train_section
    cp["model"] = {k: str(v) for k, v in model_kw.items()}
    cp["pipeline"] = {
        "window": str(pipeline.window),
        "history": str(pipeline.history),
        "k_top": str(pipeline.k_top),
        "temporal": str(pipeline.temporal),
        "temporal_seed": str(pipeline.temporal_seed),
    }
    cp["split"] = {k: str(v) for k, v in split.items()}
    return _dump(cp)


def train_from_text(text: str) -> tuple[TrainConfig, dict, PipelineConfig, dict]:
    cp = _parser()
    cp.read_string(text)
    tr = cp["train"]
    cfg = TrainConfig(
        iterations=tr.getint("iterations"),
        step_size=tr.getfloat("step_size"),
        strategy=tr.get("strategy", "vamo"),
        schedule=tr.get("schedule", "constant"),
        temperature=tr.getfloat("temperature") if "temperature" in tr else None,
        batch_size=tr.getint("batch_size", 16),
        seed=tr.getint("seed", 0),
        ema_beta=tr.getfloat("ema_beta", 0.0),
        dwa_temperature=tr.getfloat("dwa_temperature", 2.0),
        diag_every=tr.getint("diag_every", 1),
        checkpoint_every=tr.getint("checkpoint_every", 0),
    )
    model_kw = {}
    if cp.has_section("model"):
        sec = cp["model"]
        for key in ("window", "hidden", "encoder_layers", "head_layers", "head_hidden",
                    "init_seed"):
            if key in sec:
                model_kw[key] = sec.getint(key)
        if "activation" in sec:
            model_kw["activation"] = sec["activation"]
    pipeline = PipelineConfig()
    if cp.has_section("pipeline"):
        sec = cp["pipeline"]
        pipeline = PipelineConfig(
            window=sec.getint("window", 8),
            history=sec.getint("history", 96),
            k_top=sec.getint("k_top", 2),
            temporal=sec.getboolean("temporal", True),
            temporal_seed=sec.getint("temporal_seed", 7),
        )
    split = {}
    if cp.has_section("split"):
        split = {"d_val": cp["split"].getint("d_val"), "d_test": cp["split"].getint("d_test")}
    return cfg, model_kw, pipeline, split


# -- benchmark ------------------------------------------------------------------


def bench_to_text(bench: BenchConfig) -> str:
    cp = _parser()
    cp.read_string(env_to_text(bench.env, bench.behavior))
    cp["benchmark"] = {
        "days": str(bench.days),
        "counts": ",".join(str(c) for c in bench.counts),
        "d_val": str(bench.d_val),
        "d_test": str(bench.d_test),
        "seeds": ",".join(str(s) for s in bench.seeds),
        "eval_rollouts": str(bench.eval_rollouts),
        "strategies": ",".join(bench.strategies),
        "iterations": str(bench.iterations),
        "step_size": repr(bench.step_size),
        "batch_size": str(bench.batch_size),
        "temperature": repr(bench.temperature),
        "model_hidden": str(bench.model_hidden),
        "model_encoder_layers": str(bench.model_encoder_layers),
        "model_head_layers": str(bench.model_head_layers),
        "model_activation": bench.model_activation,
    }
    cp["pipeline"] = {
        "window": str(bench.pipeline.window),
        "history": str(bench.pipeline.history),
        "k_top": str(bench.pipeline.k_top),
        "temporal": str(bench.pipeline.temporal),
        "temporal_seed": str(bench.pipeline.temporal_seed),
    }
    return _dump(cp)


def bench_from_text(text: str) -> BenchConfig:
    env, behavior = env_from_text(text)
    cp = _parser()
    cp.read_string(text)
    b = cp["benchmark"]
    pipeline = PipelineConfig()
    if cp.has_section("pipeline"):
        sec = cp["pipeline"]
        pipeline = PipelineConfig(
            window=sec.getint("window", 8),
            history=sec.getint("history", 96),
            k_top=sec.getint("k_top", 2),
            temporal=sec.getboolean("temporal", True),
            temporal_seed=sec.getint("temporal_seed", 7),
        )
    return BenchConfig(
        env=env,
        behavior=behavior,
        days=b.getint("days", 10),
        counts=tuple(int(c) for c in b.get("counts", "20,20,10").split(",")),
        d_val=b.getint("d_val", 9),
        d_test=b.getint("d_test", 10),
        seeds=tuple(int(s) for s in b.get("seeds", "1,2,3").split(",")),
        eval_rollouts=b.getint("eval_rollouts", 3),
        strategies=tuple(b.get("strategies", "vanilla,vamo").split(",")),
        iterations=b.getint("iterations", 300),
        step_size=b.getfloat("step_size", 0.05),
        batch_size=b.getint("batch_size", 15),
        temperature=b.getfloat("temperature", 1.0),
        model_hidden=b.getint("model_hidden", 32),
        model_encoder_layers=b.getint("model_encoder_layers", 2),
        model_head_layers=b.getint("model_head_layers", 1),
        model_activation=b.get("model_activation", "tanh"),
        pipeline=pipeline,
    )


def load_bench(path: str | Path) -> BenchConfig:
    return bench_from_text(Path(path).read_text())
