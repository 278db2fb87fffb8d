"""Figure rendering for completed experiment directories.

The CSV traces and summary are the experiment contract; this module is a
downstream consumer that turns them into matplotlib figures saved next to
the delimited output.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path: Path) -> dict[str, list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols: dict[str, list[str]] = defaultdict(list)
        for row in reader:
            for key, val in row.items():
                cols[key].append(val)
    return cols


def _floats(values: list[str]) -> np.ndarray:
    return np.array([float(v) if v else math.nan for v in values])


def render_run_report(run_dir: str | Path, fmt: str = "png") -> list[Path]:
    """Render convergence, norm-growth, and final-error figures for a run."""
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.csv"
    if not summary_path.exists():
        raise FileNotFoundError(f"no summary.csv in {run_dir}")
    summary = _read_csv(summary_path)
    fig_dir = run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)

    traces: dict[str, list[dict[str, np.ndarray]]] = defaultdict(list)
    for method, trace_path in zip(summary["method"], summary["trace_path"]):
        if not trace_path:
            continue
        cols = _read_csv(Path(trace_path))
        traces[method].append({k: _floats(v) for k, v in cols.items()})

    written: list[Path] = []

    def save(fig, name: str) -> None:
        path = fig_dir / f"{name}.{fmt}"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    # per-iteration test risk
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, runs in traces.items():
        for i, cols in enumerate(runs):
            ax.semilogy(cols["t"], cols["test_risk"], label=method if i == 0 else None, alpha=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("test risk")
    ax.legend()
    ax.set_title("test risk per iteration")
    save(fig, "test_risk")

    # ensemble norm growth
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, runs in traces.items():
        for i, cols in enumerate(runs):
            ax.semilogy(cols["t"], np.maximum(cols["F_norm"], 1e-300),
                        label=method if i == 0 else None, alpha=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("ensemble norm")
    ax.legend()
    ax.set_title("ensemble norm growth")
    save(fig, "ensemble_norm")

    # increments (Cauchy behaviour)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, runs in traces.items():
        for i, cols in enumerate(runs):
            ax.semilogy(cols["t"], np.maximum(cols["increment_norm"], 1e-300),
                        label=method if i == 0 else None, alpha=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("increment norm")
    ax.legend()
    ax.set_title("iterate increments")
    save(fig, "increments")

    # final test RMSE per method
    finals: dict[str, list[float]] = defaultdict(list)
    for method, rmse, err in zip(
        summary["method"], summary["final_test_rmse"], summary["error"]
    ):
        if not err and rmse:
            finals[method].append(float(rmse))
    if finals:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        names = list(finals)
        means = [float(np.mean(finals[m])) for m in names]
        ax.bar(range(len(names)), means)
        for i, m in enumerate(names):
            ax.scatter([i] * len(finals[m]), finals[m], color="k", zorder=3, s=12)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylabel("final test RMSE")
        ax.set_title("final test RMSE by method")
        save(fig, "final_rmse")

    return written
