"""End-to-end training drivers for the recursive ensemble variants.

``train`` runs the residual-fitting flow for the fibonacci, first-order,
higher-order, orthogonalized, and Rao-Blackwellized variants; the
static-weights baseline fits its learners independently on bootstrap
resamples and mixes them with fixed weights.  Every run is deterministic
given its config and seed, and records a full per-iteration trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, KernelSpec, RkhsFunction, combine, evaluate
from .learners import (
    BaseLearnerConfig,
    LossSpec,
    empirical_risk_gradient,
    fit_base_learner,
    pseudo_residuals,
    weak_learning_check,
)
from .recursion import (
    AlphaMatrix,
    RecursionSchedule,
    alpha_matrix,
    initial_state,
    orthogonalize,
    rao_blackwell_average,
    step,
)

VARIANTS = (
    "fibonacci",
    "first-order",
    "orthogonalized",
    "rao-blackwell",
    "higher-order",
    "static-weights",
)

TRACE_COLUMNS = (
    "t",
    "eta",
    "train_risk",
    "test_risk",
    "F_norm",
    "h_norm",
    "weak_ratio",
    "descent_slack",
    "increment_norm",
)


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from integer components."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def fibonacci_weights(T: int) -> tuple[float, ...]:
    """First T Fibonacci numbers (1, 1, 2, 3, 5, ...) as floats."""
    w = [1.0, 1.0]
    while len(w) < T:
        w.append(w[-1] + w[-2])
    return tuple(w[:T])


@dataclass
class TraceRecord:
    """One per-iteration row; the first nine fields form the CSV schema."""

    t: int
    eta: float
    train_risk: float
    test_risk: float
    F_norm: float
    h_norm: float
    weak_ratio: float
    descent_slack: float
    increment_norm: float
    # extras (not in the CSV contract)
    train_rmse: float = math.nan
    test_rmse: float = math.nan
    grad_norm: float = math.nan
    objective: float = math.nan
    weak_vacuous: bool = False
    h_raw_norm: float = math.nan
    overlap: float = math.nan
    pred_max: float = math.nan


@dataclass(frozen=True)
class TrainConfig:
    variant: str
    loss: LossSpec
    base: BaseLearnerConfig
    iterations: int
    schedule: RecursionSchedule | None = None
    seed: int = 0
    name: str = ""
    weak_c: float = 0.1
    rb_draws: int = 16
    exact_rb: bool = False
    static_weights: tuple[float, ...] | None = None
    split_fraction: float = 0.7

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0.0 < self.split_fraction < 1.0):
            raise ValueError("split_fraction must lie in (0, 1)")
        if self.variant == "static-weights":
            if not self.static_weights:
                raise ValueError("static-weights variant requires a weight list")
            if len(self.static_weights) != self.iterations:
                raise ValueError("weight list length must equal iterations")
            object.__setattr__(
                self, "static_weights", tuple(float(w) for w in self.static_weights)
            )
        else:
            if self.schedule is None:
                raise ValueError(f"variant {self.variant!r} requires a schedule")
            if self.variant == "first-order" and self.schedule.order != 1:
                raise ValueError("first-order variant requires an order-1 schedule")
            if self.variant == "higher-order" and self.schedule.order < 3:
                raise ValueError("higher-order variant requires order >= 3")
            if self.variant == "rao-blackwell" and self.rb_draws < 1:
                raise ValueError("rao-blackwell variant requires rb_draws >= 1")

    def to_dict(self) -> dict:
        d: dict = {
            "variant": self.variant,
            "loss": self.loss.to_dict(),
            "base": self.base.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "name": self.name,
            "weak_c": self.weak_c,
            "split_fraction": self.split_fraction,
        }
        if self.schedule is not None:
            d["schedule"] = self.schedule.to_dict()
        if self.variant == "rao-blackwell":
            d["rb_draws"] = self.rb_draws
            d["exact_rb"] = self.exact_rb
        if self.static_weights is not None:
            d["static_weights"] = list(self.static_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        allowed = {
            "variant",
            "loss",
            "base",
            "iterations",
            "schedule",
            "seed",
            "name",
            "weak_c",
            "rb_draws",
            "exact_rb",
            "static_weights",
            "split_fraction",
        }
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown train-config keys {sorted(extra)}")
        return cls(
            variant=d["variant"],
            loss=LossSpec.from_dict(d["loss"]),
            base=BaseLearnerConfig.from_dict(d["base"]),
            iterations=d["iterations"],
            schedule=RecursionSchedule.from_dict(d["schedule"]) if "schedule" in d else None,
            seed=d.get("seed", 0),
            name=d.get("name", ""),
            weak_c=d.get("weak_c", 0.1),
            rb_draws=d.get("rb_draws", 16),
            exact_rb=d.get("exact_rb", False),
            static_weights=tuple(d["static_weights"]) if "static_weights" in d else None,
            split_fraction=d.get("split_fraction", 0.7),
        )


@dataclass
class TrainedEnsemble:
    predictor: RkhsFunction
    alpha: AlphaMatrix
    learners: list[RkhsFunction]
    trace: list[TraceRecord]
    config: TrainConfig
    initial_objective: float
    train_data: Dataset
    test_data: Dataset
    iterates: list[RkhsFunction] | None = None


def _split(config: TrainConfig, dataset: Dataset) -> tuple[Dataset, Dataset]:
    rng = np.random.default_rng(derive_seed(config.seed, 0xD5))
    perm = rng.permutation(dataset.n)
    k = int(round(config.split_fraction * dataset.n))
    k = min(max(k, 1), dataset.n - 1)
    tr, te = perm[:k], perm[k:]
    return (
        Dataset(dataset.inputs[tr], dataset.targets[tr]),
        Dataset(dataset.inputs[te], dataset.targets[te]),
    )


def _fill_descent_slack(ensemble: TrainedEnsemble) -> None:
    # done as a post-pass so the squared-loss Lipschitz constant can be
    # evaluated against the realized prediction range of the whole trace
    from .diagnostics import BoundInputs, descent_check

    cfg = ensemble.config
    target_bound = float(np.abs(ensemble.train_data.targets).max())
    pred_bound = float(np.nanmax([rec.pred_max for rec in ensemble.trace]))
    inputs = BoundInputs(
        lipschitz=cfg.loss.lipschitz(target_bound, pred_bound),
        curvature=cfg.loss.grad_lipschitz(),
        loss_bound=math.nan,
        kappa=cfg.base.kappa,
        norm_cap=cfg.base.norm_cap,
        lambda_b=cfg.base.ridge,
        n=ensemble.train_data.n,
        delta=0.05,
        c_alpha=ensemble.alpha.c_alpha,
        rho=math.nan,
        weak_c=cfg.weak_c,
    )
    slacks = descent_check(ensemble, inputs)
    for rec, slack in zip(ensemble.trace, slacks):
        rec.descent_slack = float(slack)


def train(
    config: TrainConfig, dataset: Dataset, test: Dataset | None = None
) -> TrainedEnsemble:
    """Run the configured variant on the dataset.

    When ``test`` is omitted the dataset is split by ``split_fraction``
    with a seed derived from the config seed.  The first learner is fit on
    the raw targets and enters with step eta_0; every later learner is fit
    on the pseudo-residuals of the current head.
    """
    if config.variant == "static-weights":
        return static_weight_baseline(config, dataset, test)
    if test is None:
        train_data, test_data = _split(config, dataset)
    else:
        train_data, test_data = dataset, test

    X, y = train_data.inputs, train_data.targets
    loss, schedule, T = config.loss, config.schedule, config.iterations

    base = config.base
    if config.variant == "rao-blackwell" and config.exact_rb:
        # exact conditional expectation over frequencies: the kernel-ridge
        # solution with the matching gaussian kernel
        base = BaseLearnerConfig(
            family="kernel-ridge",
            ridge=base.ridge,
            norm_cap=base.norm_cap,
            kernel=KernelSpec("gaussian", bandwidth=base.bandwidth),
        )
    kernel = base.kernel if base.family == "kernel-ridge" else None

    def fit_values(t: int, values: np.ndarray) -> RkhsFunction:
        if base.family == "kernel-ridge":
            if config.variant == "rao-blackwell" and not config.exact_rb:
                return rao_blackwell_average(
                    lambda: fit_base_learner(base, X, values), config.rb_draws
                )
            return fit_base_learner(base, X, values)
        if config.variant == "rao-blackwell" and not config.exact_rb:
            draws = iter(range(config.rb_draws))

            def sampler() -> RkhsFunction:
                j = next(draws)
                fmap = base.feature_map(X.shape[1], derive_seed(config.seed, base.seed, t, j))
                return fit_base_learner(base, X, values, feature_map=fmap)

            return rao_blackwell_average(sampler, config.rb_draws)
        fmap = base.feature_map(X.shape[1], derive_seed(config.seed, base.seed, t, 0))
        return fit_base_learner(base, X, values, feature_map=fmap)

    def gradient_for(h: RkhsFunction, predictions: np.ndarray) -> RkhsFunction:
        if kernel is not None:
            return empirical_risk_gradient(loss, train_data, predictions, kernel=kernel)
        parts = []
        if h.kind == "features":
            for fmap in h.components:
                parts.append(
                    empirical_risk_gradient(loss, train_data, predictions, feature_map=fmap)
                )
        if not parts:
            return RkhsFunction.zero()
        return combine([1.0] * len(parts), parts)

    initial_objective = loss.risk(np.zeros(train_data.n), y)  # J(F_0), ||F_0|| = 0
    iterates: list[RkhsFunction] = [RkhsFunction.zero()]
    keep_iterates = config.variant == "orthogonalized"

    learners: list[RkhsFunction] = []
    trace: list[TraceRecord] = []
    prev_preds = np.zeros(train_data.n)
    state = None

    for t in range(T):
        values = y if t == 0 else pseudo_residuals(loss, prev_preds, y, t).values
        h_raw = fit_values(t, values)
        h = h_raw
        overlap = math.nan
        if config.variant == "orthogonalized":
            h = orthogonalize(h_raw, iterates)
            overlap = _max_overlap(h, iterates)
        grad = gradient_for(h, prev_preds)
        weak = weak_learning_check(h, grad, config.weak_c)
        learners.append(h)

        prev_head = state.head if state is not None else RkhsFunction.zero()
        state = initial_state(schedule, h) if t == 0 else step(state, schedule, t, h)
        head = state.head
        if keep_iterates:
            iterates.append(head)

        preds = evaluate(head, X)
        te_preds = evaluate(head, test_data.inputs)
        f_norm = head.norm()
        train_risk = loss.risk(preds, y)
        trace.append(
            TraceRecord(
                t=state.t,
                eta=schedule.steps.value(t),
                train_risk=train_risk,
                test_risk=loss.risk(te_preds, test_data.targets),
                F_norm=f_norm,
                h_norm=h.norm(),
                weak_ratio=weak.ratio,
                descent_slack=math.nan,
                increment_norm=combine([1.0, -1.0], [head, prev_head]).norm(),
                train_rmse=float(np.sqrt(np.mean((preds - y) ** 2))),
                test_rmse=float(np.sqrt(np.mean((te_preds - test_data.targets) ** 2))),
                grad_norm=weak.gradient_norm,
                objective=train_risk + base.ridge * f_norm**2,
                weak_vacuous=weak.vacuous,
                h_raw_norm=h_raw.norm(),
                overlap=overlap,
                pred_max=float(np.abs(preds).max()),
            )
        )
        prev_preds = preds

    ensemble = TrainedEnsemble(
        predictor=state.head,
        alpha=alpha_matrix(schedule, T),
        learners=learners,
        trace=trace,
        config=config,
        initial_objective=initial_objective,
        train_data=train_data,
        test_data=test_data,
        iterates=iterates if keep_iterates else None,
    )
    _fill_descent_slack(ensemble)
    return ensemble


def _max_overlap(h: RkhsFunction, iterates: list[RkhsFunction]) -> float:
    from .core import inner

    hn = h.norm()
    if hn <= 1e-300:
        return 0.0
    worst = 0.0
    for f in iterates:
        fn = f.norm()
        if fn > 1e-300:
            worst = max(worst, abs(inner(h, f)) / (hn * fn))
    return worst


def static_weight_baseline(
    config: TrainConfig, dataset: Dataset, test: Dataset | None = None
) -> TrainedEnsemble:
    """Fixed-weight mix of independently fitted learners.

    Learner t is fit on a seeded bootstrap resample of the raw targets;
    the supplied weights are normalized to sum one and the trace reports
    the prefix combinations F_t = sum_{k<t} w_k h_k.
    """
    if config.variant != "static-weights":
        raise ValueError("config variant must be static-weights")
    if test is None:
        train_data, test_data = _split(config, dataset)
    else:
        train_data, test_data = dataset, test
    X, y = train_data.inputs, train_data.targets
    n, T = train_data.n, config.iterations
    loss, base = config.loss, config.base
    w = np.asarray(config.static_weights, dtype=float)
    w = w / w.sum()
    kernel = base.kernel if base.family == "kernel-ridge" else None

    learners = []
    for t in range(T):
        rng = np.random.default_rng(derive_seed(config.seed, 0xB0, t))
        idx = rng.integers(0, n, n)
        if base.family == "kernel-ridge":
            h = fit_base_learner(base, X[idx], y[idx])
        else:
            fmap = base.feature_map(X.shape[1], derive_seed(config.seed, base.seed, t, 0))
            h = fit_base_learner(base, X[idx], y[idx], feature_map=fmap)
        learners.append(h)

    trace = []
    prev = RkhsFunction.zero()
    prev_preds = np.zeros(n)
    initial_objective = loss.risk(prev_preds, y)
    head = prev
    for t in range(T):
        head = combine(w[: t + 1], learners[: t + 1])
        preds = evaluate(head, X)
        te_preds = evaluate(head, test_data.inputs)
        grad = (
            empirical_risk_gradient(loss, train_data, prev_preds, kernel=kernel)
            if kernel is not None
            else RkhsFunction.zero()
        )
        weak = weak_learning_check(learners[t], grad, config.weak_c)
        f_norm = head.norm()
        train_risk = loss.risk(preds, y)
        trace.append(
            TraceRecord(
                t=t + 1,
                eta=float(w[t]),
                train_risk=train_risk,
                test_risk=loss.risk(te_preds, test_data.targets),
                F_norm=f_norm,
                h_norm=learners[t].norm(),
                weak_ratio=weak.ratio,
                descent_slack=math.nan,
                increment_norm=combine([1.0, -1.0], [head, prev]).norm(),
                train_rmse=float(np.sqrt(np.mean((preds - y) ** 2))),
                test_rmse=float(np.sqrt(np.mean((te_preds - test_data.targets) ** 2))),
                grad_norm=weak.gradient_norm,
                objective=train_risk + base.ridge * f_norm**2,
                weak_vacuous=weak.vacuous,
                h_raw_norm=learners[t].norm(),
                pred_max=float(np.abs(preds).max()),
            )
        )
        prev = head
        prev_preds = preds

    values = np.zeros((T + 1, T))
    for t in range(1, T + 1):
        values[t, :t] = w[:t]
    rho_hat = 1.01
    c_alpha = 0.0
    for t in range(1, T + 1):
        k = np.arange(t)
        bound = rho_hat ** (t - 1 - k) * w[k]
        ratios = np.where(bound > 0, np.abs(values[t, :t]) / bound, 0.0)
        c_alpha = max(c_alpha, float(ratios.max(initial=0.0)))
    alpha = AlphaMatrix(values=values, rho_hat=rho_hat, c_alpha=c_alpha)

    ensemble = TrainedEnsemble(
        predictor=head,
        alpha=alpha,
        learners=learners,
        trace=trace,
        config=config,
        initial_objective=initial_objective,
        train_data=train_data,
        test_data=test_data,
    )
    _fill_descent_slack(ensemble)
    return ensemble


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.17g}"


def trace_to_csv(trace: list[TraceRecord]) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for rec in trace:
        lines.append(
            ",".join(
                [str(rec.t)]
                + [
                    format_float(getattr(rec, col))
                    for col in TRACE_COLUMNS[1:]
                ]
            )
        )
    return "\n".join(lines) + "\n"
