"""Losses, pseudo-residuals, and base-learner fitting.

Base learners are ridge fits of the residual signal, either in the kernel
space (anchored at the training inputs) or in an explicit random Fourier
feature space.  Fitted learners are rescaled onto the norm ball of radius
``norm_cap`` so the flow's boundedness assumptions hold by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import Dataset, FeatureMap, KernelSpec, RkhsFunction, evaluate, inner

LOSS_KINDS = ("squared", "absolute", "huber")


class FitError(RuntimeError):
    """Raised when a ridge system is numerically singular."""


@dataclass(frozen=True)
class LossSpec:
    """Convex loss in the prediction argument.

    * squared:  (z - y)^2             gradient 2 (z - y)
    * absolute: |z - y|               subgradient sign(z - y), 0 at z = y
    * huber:    r^2 / (2 d) if |r| <= d else |r| - d/2, r = z - y

    The absolute and huber losses are 1-Lipschitz.  The squared loss is
    Lipschitz only on bounded ranges; ``lipschitz`` evaluates the constant
    against declared target and prediction bounds.
    """

    kind: str
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "huber" and not (self.threshold is not None and self.threshold > 0):
            raise ValueError("huber loss requires threshold > 0")

    def value(self, predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
        r = np.asarray(predictions, float) - np.asarray(targets, float)
        if self.kind == "squared":
            return r**2
        if self.kind == "absolute":
            return np.abs(r)
        d = self.threshold
        return np.where(np.abs(r) <= d, r**2 / (2.0 * d), np.abs(r) - d / 2.0)

    def gradient(self, predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
        r = np.asarray(predictions, float) - np.asarray(targets, float)
        if self.kind == "squared":
            return 2.0 * r
        if self.kind == "absolute":
            return np.sign(r)
        return np.clip(r / self.threshold, -1.0, 1.0)

    def lipschitz(self, target_bound: float, prediction_bound: float) -> float:
        if self.kind == "squared":
            return 2.0 * (target_bound + prediction_bound)
        return 1.0

    def grad_lipschitz(self) -> float:
        if self.kind == "squared":
            return 2.0
        if self.kind == "huber":
            return 1.0 / self.threshold
        return math.inf

    def risk(self, predictions: np.ndarray, targets: np.ndarray) -> float:
        return float(np.mean(self.value(predictions, targets)))

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.threshold is not None:
            d["threshold"] = self.threshold
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        extra = set(d) - {"kind", "threshold"}
        if extra:
            raise ValueError(f"unknown loss keys {sorted(extra)}")
        return cls(kind=d["kind"], threshold=d.get("threshold"))


@dataclass(frozen=True)
class ResidualVector:
    values: np.ndarray
    iteration: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if not np.isfinite(v).all():
            raise ValueError("residuals contain non-finite entries")
        object.__setattr__(self, "values", v)


def pseudo_residuals(
    loss: LossSpec, predictions: np.ndarray, targets: np.ndarray, iteration: int = 0
) -> ResidualVector:
    """Elementwise negative loss gradient at the current predictions."""
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise ValueError(
            f"predictions and targets differ in length: {predictions.shape} vs {targets.shape}"
        )
    return ResidualVector(values=-loss.gradient(predictions, targets), iteration=iteration)


# ---------------------------------------------------------------------------
# Base learners
# ---------------------------------------------------------------------------

LEARNER_FAMILIES = ("kernel-ridge", "rff-ridge")


@dataclass(frozen=True)
class BaseLearnerConfig:
    family: str
    ridge: float
    norm_cap: float = 10.0
    kernel: KernelSpec | None = None  # kernel-ridge
    dimension: int | None = None  # rff-ridge
    bandwidth: float | None = None  # rff-ridge
    seed: int = 0  # rff-ridge

    def __post_init__(self) -> None:
        if self.family not in LEARNER_FAMILIES:
            raise ValueError(f"unknown base-learner family {self.family!r}")
        if self.ridge <= 0:
            raise ValueError("ridge must be > 0")
        if self.norm_cap <= 0:
            raise ValueError("norm_cap must be > 0")
        if self.family == "kernel-ridge" and self.kernel is None:
            raise ValueError("kernel-ridge requires a kernel spec")
        if self.family == "rff-ridge":
            if self.dimension is None or self.dimension < 1:
                raise ValueError("rff-ridge requires dimension >= 1")
            if self.bandwidth is None or self.bandwidth <= 0:
                raise ValueError("rff-ridge requires bandwidth > 0")

    @property
    def kappa(self) -> float:
        if self.family == "kernel-ridge":
            return self.kernel.kappa
        # realized feature norm: ||phi(x)||^2 = (2/D) sum cos^2 <= 2
        return math.sqrt(2.0)

    def feature_map(self, input_dim: int, seed: int | None = None) -> FeatureMap:
        return FeatureMap(
            seed=self.seed if seed is None else seed,
            dim=self.dimension,
            bandwidth=self.bandwidth,
            input_dim=input_dim,
        )

    def to_dict(self) -> dict:
        d: dict = {"family": self.family, "ridge": self.ridge, "norm_cap": self.norm_cap}
        if self.family == "kernel-ridge":
            d["kernel"] = self.kernel.to_dict()
        else:
            d.update(dimension=self.dimension, bandwidth=self.bandwidth, seed=self.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BaseLearnerConfig":
        family = d.get("family")
        allowed = {"family", "ridge", "norm_cap"}
        allowed |= {"kernel"} if family == "kernel-ridge" else {"dimension", "bandwidth", "seed"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown base-learner keys {sorted(extra)}")
        return cls(
            family=family,
            ridge=d["ridge"],
            norm_cap=d.get("norm_cap", 10.0),
            kernel=KernelSpec.from_dict(d["kernel"]) if "kernel" in d else None,
            dimension=d.get("dimension"),
            bandwidth=d.get("bandwidth"),
            seed=d.get("seed", 0),
        )


def _solve_spd(A: np.ndarray, b: np.ndarray, context: str) -> np.ndarray:
    try:
        return scipy.linalg.solve(A, b, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise FitError(
            f"{context}: ridge system numerically singular ({exc}); increase the ridge "
            f"(matrix size {A.shape[0]}, diagonal range "
            f"[{A.diagonal().min():.3e}, {A.diagonal().max():.3e}])"
        ) from exc


def fit_base_learner(
    config: BaseLearnerConfig,
    X: np.ndarray,
    residuals: np.ndarray | ResidualVector,
    feature_map: FeatureMap | None = None,
) -> RkhsFunction:
    """Ridge-fit the residual signal and cap the result at ``norm_cap``.

    kernel-ridge solves (G + n*ridge*I) c = r over the training Gram matrix
    and returns the expansion anchored at X; rff-ridge solves the normal
    equations in the explicit feature space of ``feature_map`` (built from
    the config seed when not supplied).
    """
    X = np.asarray(X, dtype=float)
    r = residuals.values if isinstance(residuals, ResidualVector) else np.asarray(residuals, float)
    if X.shape[0] != r.shape[0]:
        raise ValueError(f"row counts differ: {X.shape[0]} inputs vs {r.shape[0]} residuals")
    n = X.shape[0]
    if config.family == "kernel-ridge":
        G = config.kernel.gram(X, X)
        c = _solve_spd(G + n * config.ridge * np.eye(n), r, "kernel-ridge")
        h = RkhsFunction.kernel_expansion(config.kernel, X, c)
        norm_sq = float(c @ G @ c)
    else:
        fmap = feature_map if feature_map is not None else config.feature_map(X.shape[1])
        Phi = fmap.features(X)
        w = _solve_spd(
            Phi.T @ Phi + n * config.ridge * np.eye(fmap.dim), Phi.T @ r, "rff-ridge"
        )
        h = RkhsFunction.feature_weights(fmap, w)
        norm_sq = float(w @ w)
    norm = math.sqrt(max(norm_sq, 0.0))
    if norm > config.norm_cap:
        h = h.scale(config.norm_cap / norm)
    return h


# ---------------------------------------------------------------------------
# Risk gradient and the weak-learning diagnostic
# ---------------------------------------------------------------------------


def empirical_risk_gradient(
    loss: LossSpec,
    data: Dataset,
    predictions: np.ndarray,
    *,
    kernel: KernelSpec | None = None,
    feature_map: FeatureMap | None = None,
) -> RkhsFunction:
    """Materialize grad R_n(F) as an element of the hypothesis space.

    In the kernel representation this is the expansion with coefficients
    (1/n) * dl/dz at the training points; in a feature space it is the
    corresponding weight vector (1/n) * Phi' dl/dz.
    """
    g = loss.gradient(predictions, data.targets) / data.n
    if kernel is not None:
        return RkhsFunction.kernel_expansion(kernel, data.inputs, g)
    if feature_map is not None:
        return RkhsFunction.feature_weights(feature_map, feature_map.features(data.inputs).T @ g)
    raise ValueError("provide either kernel or feature_map")


@dataclass(frozen=True)
class WeakLearningReport:
    passed: bool
    ratio: float
    gradient_norm: float
    vacuous: bool


def weak_learning_check(
    h: RkhsFunction, gradient: RkhsFunction, c: float, *, tiny: float = 1e-14
) -> WeakLearningReport:
    """Check <grad, h> <= -c * ||grad|| and report the achieved ratio.

    A (numerically) zero gradient makes the condition vacuous; that case is
    reported as a flagged pass rather than an error.
    """
    if c <= 0:
        raise ValueError("c must be > 0")
    gnorm = gradient.norm()
    if gnorm <= tiny:
        return WeakLearningReport(passed=True, ratio=0.0, gradient_norm=gnorm, vacuous=True)
    ratio = inner(gradient, h) / gnorm
    return WeakLearningReport(passed=ratio <= -c, ratio=ratio, gradient_norm=gnorm, vacuous=False)
