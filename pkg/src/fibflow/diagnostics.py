"""Computable theory checks for trained flows.

The two generalization-bound ingredients are a Rademacher-style capacity
term driven by the learner-combination coefficients and a uniform-stability
term driven by companion-matrix power norms.  Both are loose by design; the
assertable property is the inequality direction against the empirical
train/test gap.  The descent inequality and a Cauchy convergence monitor
cover the optimization side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Dataset, RkhsFunction, combine, evaluate
from .learners import fit_base_learner
from .spectral import CompanionMatrix, StepSchedule, power_envelope, spectral_radius


@dataclass(frozen=True)
class BoundInputs:
    lipschitz: float  # L, of the loss over the realized range
    curvature: float  # gradient-Lipschitz constant of the loss (inf for absolute)
    loss_bound: float  # max observed loss value
    kappa: float  # sup_x sqrt(K(x, x))
    norm_cap: float  # B, learner norm cap
    lambda_b: float  # base-learner ridge
    n: int
    delta: float
    c_alpha: float  # fitted combination-coefficient constant
    rho: float  # spectral radius of the update
    weak_c: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def rademacher_bound(
    inputs: BoundInputs, schedule: StepSchedule, T: int | None = None
) -> float:
    """Capacity value (B * C_alpha * kappa / sqrt(n)) * sum_k eta_k."""
    etas = schedule.materialize(T)
    return float(
        inputs.norm_cap * inputs.c_alpha * inputs.kappa / math.sqrt(inputs.n) * etas.sum()
    )


def stability_bound(
    inputs: BoundInputs,
    schedule: StepSchedule,
    envelope: np.ndarray,
    T: int,
) -> float:
    """Uniform-stability value using computed matrix-power norms.

    (2 L^2 kappa^2 / (lambda_b n)) * sum_{k<T} eta_k * ||A^{T-1-k}||.
    """
    if len(envelope) < T:
        raise ValueError(f"envelope has {len(envelope)} entries, need at least {T}")
    etas = schedule.materialize(T)
    k = np.arange(T)
    total = float(np.sum(etas * envelope[T - 1 - k]))
    return 2.0 * inputs.lipschitz**2 * inputs.kappa**2 / (inputs.lambda_b * inputs.n) * total


@dataclass(frozen=True)
class BoundReport:
    rademacher_value: float
    stability_value: float
    combined: float
    constants: tuple[float, float, float]
    delta: float
    train_risk: float
    test_risk: float
    gap: float
    lipschitz: float
    loss_bound: float

    @property
    def holds(self) -> bool:
        return self.gap <= self.combined

    def to_dict(self) -> dict:
        return {
            "rademacher_value": self.rademacher_value,
            "stability_value": self.stability_value,
            "combined": self.combined,
            "constants": list(self.constants),
            "delta": self.delta,
            "train_risk": self.train_risk,
            "test_risk": self.test_risk,
            "gap": self.gap,
            "lipschitz": self.lipschitz,
            "loss_bound": self.loss_bound,
            "holds": self.holds,
        }


def schedule_view(config) -> tuple[StepSchedule, CompanionMatrix]:
    """Steps and companion matrix driving a config, for bound computation.

    The static baseline accumulates F_t = F_{t-1} + w_t h_t, i.e. a
    first-order recursion whose steps are the normalized weights.
    """
    if config.variant == "static-weights":
        w = np.asarray(config.static_weights, dtype=float)
        w = w / w.sum()
        return StepSchedule(kind="explicit", values=tuple(w)), CompanionMatrix((1.0,))
    return config.schedule.steps, config.schedule.companion()


def combined_values(
    inputs: BoundInputs,
    steps: StepSchedule,
    cm: CompanionMatrix,
    T: int,
    constants: tuple[float, float, float] = (2.0, 1.0, 3.0),
) -> tuple[float, float, float]:
    """(rademacher, stability, combined) for one run's schedule and inputs."""
    envelope = power_envelope(cm, T)
    if len(envelope) < T + 1:  # unstable overflow: pad with the last finite value
        envelope = np.concatenate([envelope, np.full(T + 1 - len(envelope), envelope[-1])])
    rad = rademacher_bound(inputs, steps, T)
    stab = stability_bound(inputs, steps, envelope, T)
    c1, c2, c3 = constants
    combined = (
        c1 * inputs.lipschitz * rad
        + c2 * stab
        + c3 * math.sqrt(math.log(2.0 / inputs.delta) / (2.0 * inputs.n))
    )
    return rad, stab, combined


def compute_bound_report(
    ensemble,
    delta: float = 0.05,
    constants: tuple[float, float, float] = (2.0, 1.0, 3.0),
) -> BoundReport:
    """Evaluate the combined bound c1*L*Rad + c2*beta_T + c3*sqrt(log(2/d)/2n).

    The squared-loss Lipschitz constant is evaluated over the realized range
    |F(x)| <= kappa * max_t ||F_t||; the loss bound is the largest loss value
    the final predictor attains on train plus test points.
    """
    cfg = ensemble.config
    T = cfg.iterations
    steps, cm = schedule_view(cfg)
    inputs = build_bound_inputs(ensemble, delta=delta)
    rad, stab, combined = combined_values(inputs, steps, cm, T, constants)
    last = ensemble.trace[-1]
    return BoundReport(
        rademacher_value=rad,
        stability_value=stab,
        combined=combined,
        constants=constants,
        delta=delta,
        train_risk=last.train_risk,
        test_risk=last.test_risk,
        gap=abs(last.test_risk - last.train_risk),
        lipschitz=inputs.lipschitz,
        loss_bound=inputs.loss_bound,
    )


def build_bound_inputs(ensemble, delta: float = 0.05) -> BoundInputs:
    cfg = ensemble.config
    _, cm = schedule_view(cfg)
    kappa = cfg.base.kappa
    target_bound = float(
        max(np.abs(ensemble.train_data.targets).max(), np.abs(ensemble.test_data.targets).max())
    )
    f_max = max(rec.F_norm for rec in ensemble.trace)
    lipschitz = cfg.loss.lipschitz(target_bound, kappa * f_max)
    tr_loss = cfg.loss.value(
        evaluate(ensemble.predictor, ensemble.train_data.inputs), ensemble.train_data.targets
    )
    te_loss = cfg.loss.value(
        evaluate(ensemble.predictor, ensemble.test_data.inputs), ensemble.test_data.targets
    )
    return BoundInputs(
        lipschitz=lipschitz,
        curvature=cfg.loss.grad_lipschitz(),
        loss_bound=float(max(tr_loss.max(), te_loss.max())),
        kappa=kappa,
        norm_cap=cfg.base.norm_cap,
        lambda_b=cfg.base.ridge,
        n=ensemble.train_data.n,
        delta=delta,
        c_alpha=ensemble.alpha.c_alpha,
        rho=spectral_radius(cm),
        weak_c=cfg.weak_c,
    )


# ---------------------------------------------------------------------------
# Per-iteration checks
# ---------------------------------------------------------------------------


def descent_check(ensemble, inputs: BoundInputs) -> np.ndarray:
    """Slack of J(F_t) <= J(F_{t-1}) - eta (c - L^2 eta / 2 lambda) g^2
    + (M/2) eta^2 h^2 per iteration; nonpositive slack means it held.

    J values and gradient norms come from the trace; the first row is
    checked against the objective of the zero initialization.
    """
    slacks = []
    j_prev = ensemble.initial_objective
    for rec in ensemble.trace:
        allowance = rec.eta * (
            inputs.weak_c - inputs.lipschitz**2 * rec.eta / (2.0 * inputs.lambda_b)
        )
        quad = 0.5 * inputs.curvature * rec.eta**2 * rec.h_norm**2
        slacks.append(rec.objective - (j_prev - allowance * rec.grad_norm**2 + quad))
        j_prev = rec.objective
    return np.asarray(slacks)


@dataclass(frozen=True)
class ConvergenceVerdict:
    converged: bool
    max_increment: float
    window: int
    tol: float


def convergence_monitor(trace: Sequence, window: int, tol: float) -> ConvergenceVerdict:
    """Cauchy verdict: all increments over the trailing window below tol."""
    records = trace.trace if hasattr(trace, "trace") else list(trace)
    if window < 1 or window > len(records):
        raise ValueError("window must lie in [1, len(trace)]")
    tail = [rec.increment_norm for rec in records[-window:]]
    worst = float(max(tail))
    return ConvergenceVerdict(converged=worst < tol, max_increment=worst, window=window, tol=tol)


def empirical_loo_perturbation(
    config,
    dataset: Dataset,
    index: int,
    probe: Dataset,
    replacement: tuple[np.ndarray, float],
) -> float:
    """Sup over probe pairs of the loss change after one-sample replacement.

    Trains on the dataset and on a copy whose ``index``-th sample is
    replaced, then compares pointwise losses of the two final predictors.
    """
    from .algorithms import train

    if not (0 <= index < dataset.n):
        raise ValueError(f"index {index} out of range for n={dataset.n}")
    X2 = dataset.inputs.copy()
    y2 = dataset.targets.copy()
    X2[index] = np.asarray(replacement[0], dtype=float)
    y2[index] = float(replacement[1])
    ens_a = train(config, dataset, test=probe)
    ens_b = train(config, Dataset(X2, y2), test=probe)
    la = config.loss.value(evaluate(ens_a.predictor, probe.inputs), probe.targets)
    lb = config.loss.value(evaluate(ens_b.predictor, probe.inputs), probe.targets)
    return float(np.max(np.abs(la - lb)))


def nearest_ridge_solution(
    ensemble, lambda_grid: Sequence[float]
) -> tuple[float, float, list[tuple[float, float]]]:
    """Distance from the final predictor to exact kernel-ridge solutions.

    Reports the grid lambda whose ridge solution is H-closest to F_T.
    Informational only: the flow's implied regularization strength is not
    pinned down by its parameters.
    """
    cfg = ensemble.config
    if cfg.base.family != "kernel-ridge":
        raise ValueError("nearest_ridge_solution requires a kernel-ridge run")
    base = cfg.base
    results = []
    for lam in lambda_grid:
        ridge_cfg = type(base)(
            family="kernel-ridge", ridge=float(lam), norm_cap=math.inf, kernel=base.kernel
        )
        f_lam = fit_base_learner(ridge_cfg, ensemble.train_data.inputs, ensemble.train_data.targets)
        dist = combine([1.0, -1.0], [ensemble.predictor, f_lam]).norm()
        results.append((float(lam), float(dist)))
    best = min(results, key=lambda r: r[1])
    return best[0], best[1], results
