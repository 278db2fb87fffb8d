"""Synthetic data generation and experiment orchestration.

Targets live on the unit cube with additive gaussian noise.  An experiment
is a grid of training methods times replications; each cell writes a
per-iteration CSV trace, a serialized model, and a bound report, and the
summary is merged atomically at the end.  Reruns of the same config are
byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .algorithms import (
    TrainConfig,
    TrainedEnsemble,
    derive_seed,
    format_float,
    trace_to_csv,
    train,
)
from .core import Dataset, KernelSpec
from .diagnostics import BoundReport, compute_bound_report
from .learners import BaseLearnerConfig, fit_base_learner


class ConfigError(ValueError):
    """Raised for malformed or unknown config content."""


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

TARGET_NAMES = ("sinusoid", "step", "additive-smooth", "friedman-like")


def _target_fn(name: str, X: np.ndarray) -> np.ndarray:
    if name == "sinusoid":
        return np.sin(2.0 * np.pi * X[:, 0])
    if name == "step":
        return np.where(X[:, 0] >= 0.5, 1.0, -1.0)
    if name == "additive-smooth":
        return sum(np.sin(2.0 * np.pi * X[:, j]) / (j + 1) for j in range(X.shape[1]))
    if name == "friedman-like":
        if X.shape[1] < 5:
            raise ConfigError("friedman-like target requires d >= 5")
        return (
            10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3]
            + 5.0 * X[:, 4]
        )
    raise ConfigError(f"unknown target {name!r}")


@dataclass(frozen=True)
class DataSpec:
    target: str
    n: int
    d: int
    noise: float
    seed: int
    train_fraction: float = 0.7

    def __post_init__(self) -> None:
        if self.target not in TARGET_NAMES:
            raise ConfigError(f"unknown target {self.target!r}")
        if self.n < 2 or self.d < 1:
            raise ConfigError("need n >= 2 and d >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError("train_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "n": self.n,
            "d": self.d,
            "noise": self.noise,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DataSpec":
        allowed = {"target", "n", "d", "noise", "seed", "train_fraction"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown data keys {sorted(extra)}")
        return cls(
            target=d["target"],
            n=d["n"],
            d=d["d"],
            noise=d["noise"],
            seed=d["seed"],
            train_fraction=d.get("train_fraction", 0.7),
        )


def generate_data(spec: DataSpec) -> tuple[Dataset, Dataset]:
    """Seeded draw of (train, test): inputs uniform on [0,1]^d, targets
    f*(x) plus N(0, noise^2)."""
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(0.0, 1.0, size=(spec.n, spec.d))
    y = _target_fn(spec.target, X)
    if spec.noise > 0:
        y = y + rng.normal(0.0, spec.noise, size=spec.n)
    k = int(round(spec.train_fraction * spec.n))
    k = min(max(k, 1), spec.n - 1)
    return Dataset(X[:k], y[:k]), Dataset(X[k:], y[k:])


def sample_from_spec(spec: DataSpec, count: int, seed: int) -> Dataset:
    """Fresh draws from the same generative model (probe and replacement sets)."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(count, spec.d))
    y = _target_fn(spec.target, X)
    if spec.noise > 0:
        y = y + rng.normal(0.0, spec.noise, size=count)
    return Dataset(X, y)


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSpec
    methods: tuple[TrainConfig, ...]
    replications: int = 1
    out_dir: str | None = None
    threshold_factor: float = 1.2  # iterations-to-threshold target, times oracle RMSE

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.methods:
            raise ConfigError("experiment needs at least one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError(f"method names must be unique, got {names}")
        object.__setattr__(self, "methods", tuple(self.methods))

    def to_dict(self) -> dict:
        d: dict = {
            "data": self.data.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "replications": self.replications,
            "threshold_factor": self.threshold_factor,
        }
        if self.out_dir is not None:
            d["out_dir"] = self.out_dir
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        allowed = {"data", "methods", "replications", "out_dir", "threshold_factor"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown experiment keys {sorted(extra)}")
        try:
            methods = tuple(TrainConfig.from_dict(m) for m in d["methods"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            data=DataSpec.from_dict(d["data"]),
            methods=methods,
            replications=d.get("replications", 1),
            out_dir=d.get("out_dir"),
            threshold_factor=d.get("threshold_factor", 1.2),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

SUMMARY_COLUMNS = (
    "method",
    "replication",
    "seed",
    "final_train_risk",
    "final_test_risk",
    "final_train_rmse",
    "final_test_rmse",
    "oracle_rmse",
    "threshold_rmse",
    "iterations_to_threshold",
    "rademacher_bound",
    "stability_bound",
    "combined_bound",
    "gap",
    "bound_holds",
    "nearest_lambda",
    "nearest_lambda_distance",
    "trace_path",
    "model_path",
    "error",
)

# grid for the nearest-Tikhonov-solution report; informational only, since
# the flow's parameters do not pin down a regularization strength
NEAREST_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass
class CellResult:
    method: str
    replication: int
    seed: int
    final_train_risk: float = math.nan
    final_test_risk: float = math.nan
    final_train_rmse: float = math.nan
    final_test_rmse: float = math.nan
    oracle_rmse: float = math.nan
    threshold_rmse: float = math.nan
    iterations_to_threshold: int | None = None
    bound: BoundReport | None = None
    nearest_lambda: float | None = None
    nearest_lambda_distance: float | None = None
    trace_path: str = ""
    model_path: str = ""
    error: str = ""

    def row(self) -> list[str]:
        b = self.bound
        return [
            self.method,
            str(self.replication),
            str(self.seed),
            format_float(self.final_train_risk),
            format_float(self.final_test_risk),
            format_float(self.final_train_rmse),
            format_float(self.final_test_rmse),
            format_float(self.oracle_rmse),
            format_float(self.threshold_rmse),
            "" if self.iterations_to_threshold is None else str(self.iterations_to_threshold),
            format_float(b.rademacher_value) if b else "",
            format_float(b.stability_value) if b else "",
            format_float(b.combined) if b else "",
            format_float(b.gap) if b else "",
            str(b.holds).lower() if b else "",
            "" if self.nearest_lambda is None else format_float(self.nearest_lambda),
            "" if self.nearest_lambda_distance is None else format_float(self.nearest_lambda_distance),
            self.trace_path,
            self.model_path,
            self.error,
        ]


@dataclass
class RunSummary:
    cells: list[CellResult]
    out_dir: Path
    summary_csv: Path
    summary_json: Path

    @property
    def ok(self) -> bool:
        return all(not c.error for c in self.cells)


def _oracle_rmse(config: ExperimentConfig, train_data: Dataset, test_data: Dataset) -> float:
    """Exact kernel-ridge fit used as the RMSE reference for thresholds."""
    base = None
    for m in config.methods:
        if m.base.family == "kernel-ridge":
            base = m.base
            break
    if base is None:
        base = BaseLearnerConfig(
            family="kernel-ridge",
            ridge=1e-3,
            norm_cap=math.inf,
            kernel=KernelSpec("gaussian", bandwidth=0.2),
        )
    else:
        base = BaseLearnerConfig(
            family="kernel-ridge", ridge=base.ridge, norm_cap=math.inf, kernel=base.kernel
        )
    f = fit_base_learner(base, train_data.inputs, train_data.targets)
    preds = f(test_data.inputs)
    return float(np.sqrt(np.mean((preds - test_data.targets) ** 2)))


def _cell_name(method: TrainConfig, rep: int) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in method.name)
    return f"{safe}_rep{rep}"


def _run_cell(
    config: ExperimentConfig,
    method: TrainConfig,
    rep: int,
    train_data: Dataset,
    test_data: Dataset,
    oracle: float,
    out_dir: Path,
) -> CellResult:
    seed = derive_seed(method.seed, rep)
    cell = CellResult(method=method.name, replication=rep, seed=seed)
    name = _cell_name(method, rep)
    try:
        resolved = replace(method, seed=seed)
        ensemble = train(resolved, train_data, test=test_data)
        last = ensemble.trace[-1]
        cell.final_train_risk = last.train_risk
        cell.final_test_risk = last.test_risk
        cell.final_train_rmse = last.train_rmse
        cell.final_test_rmse = last.test_rmse
        cell.oracle_rmse = oracle
        cell.threshold_rmse = config.threshold_factor * oracle
        hits = [rec.t for rec in ensemble.trace if rec.test_rmse <= cell.threshold_rmse]
        cell.iterations_to_threshold = hits[0] if hits else None
        cell.bound = compute_bound_report(ensemble)
        if method.base.family == "kernel-ridge":
            from .diagnostics import nearest_ridge_solution

            lam, dist, _ = nearest_ridge_solution(ensemble, NEAREST_LAMBDA_GRID)
            cell.nearest_lambda = lam
            cell.nearest_lambda_distance = dist

        trace_path = out_dir / f"{name}_trace.csv"
        model_path = out_dir / f"{name}_model.json"
        trace_path.write_text(trace_to_csv(ensemble.trace), encoding="utf-8")
        ensemble.predictor.save(model_path)
        (out_dir / f"{name}_bounds.json").write_text(
            json.dumps(cell.bound.to_dict(), indent=2), encoding="utf-8"
        )
        (out_dir / f"{name}_config.json").write_text(
            json.dumps(
                {"train": resolved.to_dict(), "data": config.data.to_dict(), "replication": rep},
                indent=2,
            ),
            encoding="utf-8",
        )
        cell.trace_path = str(trace_path)
        cell.model_path = str(model_path)
    except Exception as exc:  # cell failures are recorded, not fatal
        cell.error = f"{type(exc).__name__}: {exc}"
        cell.bound = None
        if os.environ.get("FIBFLOW_DEBUG"):
            traceback.print_exc()
    return cell


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_experiment(
    config: ExperimentConfig, out_dir: str | Path | None = None, threads: int = 1
) -> RunSummary:
    """Execute all methods x replications and persist every artifact.

    Within a replication all methods see the same data draw, so method
    comparisons are paired.  Cells are independent; failures are recorded
    per cell and the experiment continues.
    """
    out = Path(out_dir if out_dir is not None else (config.out_dir or "fibflow-run"))
    out.mkdir(parents=True, exist_ok=True)

    datasets = []
    for rep in range(config.replications):
        spec = replace(config.data, seed=derive_seed(config.data.seed, rep))
        tr, te = generate_data(spec)
        datasets.append((tr, te, _oracle_rmse(config, tr, te)))

    tasks = [
        (method, rep)
        for method in config.methods
        for rep in range(config.replications)
    ]

    def runner(task: tuple[TrainConfig, int]) -> CellResult:
        method, rep = task
        tr, te, oracle = datasets[rep]
        return _run_cell(config, method, rep, tr, te, oracle, out)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(runner, tasks))
    else:
        cells = [runner(t) for t in tasks]

    lines = [",".join(SUMMARY_COLUMNS)]
    for cell in cells:
        lines.append(",".join(cell.row()))
    summary_csv = out / "summary.csv"
    _atomic_write(summary_csv, "\n".join(lines) + "\n")
    summary_json = out / "summary.json"
    _atomic_write(
        summary_json,
        json.dumps(
            {
                "config": config.to_dict(),
                "cells": [
                    dict(zip(SUMMARY_COLUMNS, cell.row())) for cell in cells
                ],
            },
            indent=2,
        )
        + "\n",
    )
    return RunSummary(cells=cells, out_dir=out, summary_csv=summary_csv, summary_json=summary_json)


# ---------------------------------------------------------------------------
# Bound recomputation from saved artifacts
# ---------------------------------------------------------------------------


def read_trace_csv(path: str | Path) -> list[dict[str, float]]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        rows.append({k: float(v) for k, v in zip(header, line.split(","))})
    return rows


def bound_report_from_artifacts(
    trace_path: str | Path,
    config_path: str | Path,
    delta: float = 0.05,
) -> BoundReport:
    """Recompute a BoundReport from a saved trace and its cell config.

    The dataset is regenerated from the seeded data spec; the saved model
    (``*_model.json`` next to the trace) supplies exact observed losses and
    falls back to the range-derived surrogate when absent.
    """
    from .diagnostics import BoundInputs, combined_values, schedule_view
    from .recursion import alpha_matrix
    from .spectral import spectral_radius
    from .core import RkhsFunction, evaluate

    rows = read_trace_csv(trace_path)
    cell = json.loads(Path(config_path).read_text(encoding="utf-8"))
    cfg = TrainConfig.from_dict(cell["train"])
    data_spec = DataSpec.from_dict(cell["data"])
    rep = cell.get("replication", 0)
    spec = replace(data_spec, seed=derive_seed(data_spec.seed, rep))
    train_data, test_data = generate_data(spec)

    T = cfg.iterations
    steps, cm = schedule_view(cfg)
    kappa = cfg.base.kappa
    f_max = max(r["F_norm"] for r in rows)
    target_bound = float(
        max(np.abs(train_data.targets).max(), np.abs(test_data.targets).max())
    )
    lipschitz = cfg.loss.lipschitz(target_bound, kappa * f_max)

    model_path = Path(str(trace_path).replace("_trace.csv", "_model.json"))
    if model_path.exists():
        model = RkhsFunction.load(model_path)
        tr_loss = cfg.loss.value(evaluate(model, train_data.inputs), train_data.targets)
        te_loss = cfg.loss.value(evaluate(model, test_data.inputs), test_data.targets)
        loss_bound = float(max(tr_loss.max(), te_loss.max()))
    else:
        loss_bound = float(
            cfg.loss.value(np.array([kappa * f_max]), np.array([-target_bound]))[0]
        )

    if cfg.variant == "static-weights":
        w = np.asarray(cfg.static_weights, float)
        w = w / w.sum()
        rho_hat = 1.01
        c_alpha = 0.0
        for t in range(1, T + 1):
            k = np.arange(t)
            bound = rho_hat ** (t - 1 - k) * w[k]
            c_alpha = max(c_alpha, float(np.max(np.abs(w[:t]) / bound)))
    else:
        c_alpha = alpha_matrix(cfg.schedule, T).c_alpha

    inputs = BoundInputs(
        lipschitz=lipschitz,
        curvature=cfg.loss.grad_lipschitz(),
        loss_bound=loss_bound,
        kappa=kappa,
        norm_cap=cfg.base.norm_cap,
        lambda_b=cfg.base.ridge,
        n=train_data.n,
        delta=delta,
        c_alpha=c_alpha,
        rho=spectral_radius(cm),
        weak_c=cfg.weak_c,
    )
    rad, stab, combined = combined_values(inputs, steps, cm, T)
    last = rows[-1]
    return BoundReport(
        rademacher_value=rad,
        stability_value=stab,
        combined=combined,
        constants=(2.0, 1.0, 3.0),
        delta=delta,
        train_risk=last["train_risk"],
        test_risk=last["test_risk"],
        gap=abs(last["test_risk"] - last["train_risk"]),
        lipschitz=lipschitz,
        loss_bound=loss_bound,
    )


def dataset_to_csv(data: Dataset) -> str:
    header = ",".join([f"x{j + 1}" for j in range(data.d)] + ["y"])
    lines = [header]
    for i in range(data.n):
        row = [format_float(v) for v in data.inputs[i]] + [format_float(data.targets[i])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
