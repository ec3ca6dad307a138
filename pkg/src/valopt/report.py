"""Report rendering: comparison tables, plot-data series, and figures.

Reads a benchmark result directory (benchmark.csv, per_seed.csv, traces/)
and writes a comparison table, two-column (x, y) text series for external
plotting, and the matching rendered PNG figures.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .trainer import read_diagnostics
from .weighting import read_weight_trace


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_xy(path: Path, xs, ys) -> None:
    """Two-column text series: x then y per line, space separated."""
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x} {y!r}\n" if isinstance(y, float) else f"{x} {y}\n")


def render_report(results_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Produce the comparison table, plot-data files, and PNG figures."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    header, rows = _read_csv(results_dir / "benchmark.csv")
    table = out_dir / "comparison_table.csv"
    table.write_text(",".join(header) + "\n" + "\n".join(",".join(r) for r in rows) + "\n")
    written.append(table)

    # strategy overview: mean returns and the multi-task summary metric
    strategies = [r[0] for r in rows if r[0] != "stl"]
    deltas = [float(r[-1]) for r in rows if r[0] != "stl"]
    dat = out_dir / "delta_m_by_strategy.dat"
    write_xy(dat, range(len(strategies)), deltas)
    written.append(dat)

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(len(strategies)), deltas, color="#4878d0")
    ax.set_xticks(range(len(strategies)))
    ax.set_xticklabels(strategies, rotation=20, ha="right")
    ax.set_ylabel(r"$\Delta m$ %  (lower is better)")
    ax.axhline(0.0, color="black", lw=0.8)
    fig.tight_layout()
    fig_path = out_dir / "delta_m_by_strategy.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    written.append(fig_path)

    task_names = [h[len("return_") :] for h in header if h.startswith("return_")]
    returns_fig, ax = plt.subplots(figsize=(6.5, 3.2))
    width = 0.8 / max(len(rows), 1)
    for i, row in enumerate(rows):
        vals = [float(row[1 + 2 * t]) for t in range(len(task_names))]
        ax.bar(np.arange(len(task_names)) + i * width, vals, width, label=row[0])
    ax.set_xticks(np.arange(len(task_names)) + 0.4)
    ax.set_xticklabels(task_names)
    ax.set_ylabel("mean test-day return")
    ax.legend(fontsize=7)
    returns_fig.tight_layout()
    fig_path = out_dir / "returns_by_task.png"
    returns_fig.savefig(fig_path, dpi=150)
    plt.close(returns_fig)
    written.append(fig_path)

    written += _render_traces(results_dir, out_dir)
    return written


def _render_traces(results_dir: Path, out_dir: Path) -> list[Path]:
    traces_dir = results_dir / "traces"
    if not traces_dir.is_dir():
        return []
    written: list[Path] = []

    for trace_file in sorted(traces_dir.glob("*.trace")):
        records = read_weight_trace(trace_file)
        if not records:
            continue
        iters = [r[0] for r in records]
        weights = np.array([r[3] for r in records])
        stem = trace_file.stem
        fig, ax = plt.subplots(figsize=(6, 3))
        for k in range(weights.shape[1]):
            dat = out_dir / f"weights_{stem}_task{k}.dat"
            write_xy(dat, iters, [float(v) for v in weights[:, k]])
            written.append(dat)
            ax.plot(iters, weights[:, k], label=f"task {k}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("task weight")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig_path = out_dir / f"weights_{stem}.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)

    diag_files = sorted(traces_dir.glob("*.diag"))
    if diag_files:
        fig, ax = plt.subplots(figsize=(6, 3))
        for diag_file in diag_files:
            diag = read_diagnostics(diag_file)
            iters = diag.series("iteration")
            losses = diag.series("val_loss")
            dat = out_dir / f"val_loss_{diag_file.stem}.dat"
            write_xy(dat, [int(i) for i in iters], [float(v) for v in losses])
            written.append(dat)
            ax.plot(iters, losses, label=diag_file.stem, lw=0.9)
        ax.set_xlabel("iteration")
        ax.set_ylabel("validation loss")
        ax.legend(fontsize=6)
        fig.tight_layout()
        fig_path = out_dir / "val_loss.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)
    return written
