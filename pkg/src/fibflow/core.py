"""Function-space primitives shared by every training flow.

Ensemble iterates and base learners are elements of a reproducing kernel
Hilbert space.  Two concrete representations are supported:

* kernel expansions  f = sum_i c_i K(a_i, .)  carrying their own anchor
  points, and
* explicit feature-weight vectors over one or more frozen random Fourier
  feature maps (functions over distinct maps live in the direct sum of
  their feature spaces, so averaging learners drawn with independent
  frequencies stays exact).

Combining expansions concatenates anchors (with exact, bitwise-equal-row
deduplication) rather than re-projecting, so linear algebra over iterates
is exact up to float round-off.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class RepresentationMismatch(ValueError):
    """Raised when two functions do not live in a common representation."""


class DimensionMismatch(ValueError):
    """Raised when query points do not match the training dimension."""


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

KERNEL_KINDS = ("gaussian", "cubic-spline", "linear")


def _spline1d(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Reproducing kernel of the cubic smoothing-spline space on [0, 1].
    m = np.minimum(x, y)
    return 1.0 + x * y + x * y * m - 0.5 * (x + y) * m**2 + m**3 / 3.0


@dataclass(frozen=True)
class KernelSpec:
    """A positive-definite kernel plus its sup bound kappa.

    ``kappa**2 = sup_x K(x, x)`` over the declared input domain: the whole
    space for the gaussian kernel (kappa = 1) and the rescaled cube
    [0, 1]**d for the cubic-spline and linear kernels, which therefore need
    ``input_dim`` at construction.
    """

    kind: str
    bandwidth: float | None = None
    input_dim: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.bandwidth is None or self.bandwidth <= 0:
                raise ValueError("gaussian kernel requires bandwidth > 0")
        else:
            if self.input_dim is None or self.input_dim < 1:
                raise ValueError(f"{self.kind} kernel requires input_dim >= 1")

    @property
    def kappa(self) -> float:
        if self.kind == "gaussian":
            return 1.0
        if self.kind == "cubic-spline":
            # per-coordinate sup K(x,x) = 1 + 1 + 1/3 at x = 1
            return float((7.0 / 3.0) ** (self.input_dim / 2.0))
        return float(np.sqrt(self.input_dim))  # linear: sup ||x||^2 = d

    def gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
            raise DimensionMismatch(
                f"gram inputs must be 2-d with equal column counts, got {X.shape} vs {Y.shape}"
            )
        if self.kind == "gaussian":
            d2 = (
                (X**2).sum(axis=1)[:, None]
                + (Y**2).sum(axis=1)[None, :]
                - 2.0 * (X @ Y.T)
            )
            np.maximum(d2, 0.0, out=d2)
            return np.exp(-d2 / (2.0 * self.bandwidth**2))
        if self.kind == "cubic-spline":
            G = np.ones((X.shape[0], Y.shape[0]))
            for j in range(X.shape[1]):
                G *= _spline1d(X[:, None, j], Y[None, :, j])
            return G
        return X @ Y.T

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.bandwidth is not None:
            d["bandwidth"] = self.bandwidth
        if self.input_dim is not None:
            d["input_dim"] = self.input_dim
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        extra = set(d) - {"kind", "bandwidth", "input_dim"}
        if extra:
            raise ValueError(f"unknown kernel keys {sorted(extra)}")
        return cls(kind=d["kind"], bandwidth=d.get("bandwidth"), input_dim=d.get("input_dim"))


# ---------------------------------------------------------------------------
# Random Fourier feature maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureMap:
    """A frozen random Fourier feature map approximating a gaussian kernel.

    Frequencies are drawn from the kernel's spectral density N(0, bw^-2 I),
    phases uniformly on [0, 2*pi); features are sqrt(2/D) cos(w'x + b).
    Identity (and hence inner-product compatibility) is the full parameter
    tuple, so the same seed always reproduces the same map bit for bit.
    """

    seed: int
    dim: int
    bandwidth: float
    input_dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("feature dimension must be >= 1")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")

    def _draw(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        omega = rng.normal(0.0, 1.0 / self.bandwidth, size=(self.input_dim, self.dim))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=self.dim)
        return omega, phases

    def features(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"expected points with {self.input_dim} columns, got shape {X.shape}"
            )
        omega, phases = self._draw()
        return np.sqrt(2.0 / self.dim) * np.cos(X @ omega + phases)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dim": self.dim,
            "bandwidth": self.bandwidth,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMap":
        extra = set(d) - {"seed", "dim", "bandwidth", "input_dim"}
        if extra:
            raise ValueError(f"unknown feature-map keys {sorted(extra)}")
        return cls(seed=d["seed"], dim=d["dim"], bandwidth=d["bandwidth"], input_dim=d["input_dim"])


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        X = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"inputs must be a nonempty 2-d matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("targets must be a vector with one entry per input row")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


# ---------------------------------------------------------------------------
# RKHS elements
# ---------------------------------------------------------------------------


class RkhsFunction:
    """An element of the hypothesis space.

    ``kind`` is one of:

    * ``"zero"`` -- the canonical zero function, compatible with everything
      (also what an empty combination returns);
    * ``"kernel"`` -- expansion ``sum_i coefficients[i] * K(anchors[i], .)``;
    * ``"features"`` -- weight vectors over one or more frozen feature maps,
      stored as an insertion-ordered ``{FeatureMap: weights}`` mapping.

    Instances are immutable by convention: no method mutates ``self`` and the
    arrays are never written to after construction.
    """

    __slots__ = ("kind", "kernel", "anchors", "coefficients", "components")

    def __init__(
        self,
        kind: str,
        *,
        kernel: KernelSpec | None = None,
        anchors: np.ndarray | None = None,
        coefficients: np.ndarray | None = None,
        components: dict[FeatureMap, np.ndarray] | None = None,
    ) -> None:
        self.kind = kind
        self.kernel = kernel
        self.anchors = anchors
        self.coefficients = coefficients
        self.components = components
        if kind == "kernel":
            if kernel is None or anchors is None or coefficients is None:
                raise ValueError("kernel expansion requires kernel, anchors, coefficients")
            if anchors.ndim != 2 or coefficients.ndim != 1:
                raise ValueError("anchors must be 2-d and coefficients 1-d")
            if anchors.shape[0] != coefficients.shape[0]:
                raise ValueError("anchor count must equal coefficient length")
        elif kind == "features":
            if components is None:
                raise ValueError("feature-weights function requires components")
            for fmap, w in components.items():
                if w.shape != (fmap.dim,):
                    raise ValueError(
                        f"weight length {w.shape} does not match feature dimension {fmap.dim}"
                    )
        elif kind != "zero":
            raise ValueError(f"unknown representation kind {kind!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls) -> "RkhsFunction":
        return cls("zero")

    @classmethod
    def kernel_expansion(
        cls, kernel: KernelSpec, anchors: np.ndarray, coefficients: np.ndarray
    ) -> "RkhsFunction":
        anchors = np.asarray(anchors, dtype=float)
        coefficients = np.asarray(coefficients, dtype=float)
        return cls("kernel", kernel=kernel, anchors=anchors, coefficients=coefficients)

    @classmethod
    def feature_weights(cls, feature_map: FeatureMap, weights: np.ndarray) -> "RkhsFunction":
        weights = np.asarray(weights, dtype=float)
        return cls("features", components={feature_map: weights})

    # -- basic queries -------------------------------------------------------

    def is_zero_representation(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "kernel":
            return self.coefficients.size == 0
        return len(self.components) == 0

    def norm(self) -> float:
        return float(np.sqrt(max(inner(self, self), 0.0)))

    def scale(self, alpha: float) -> "RkhsFunction":
        return combine([alpha], [self])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return evaluate(self, points)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "kernel":
            return {
                "kind": "kernel",
                "kernel": self.kernel.to_dict(),
                "anchor_dim": int(self.anchors.shape[1]),
                "anchors": self.anchors.tolist(),
                "coefficients": self.coefficients.tolist(),
            }
        return {
            "kind": "features",
            "components": [
                {"map": fmap.to_dict(), "weights": w.tolist()}
                for fmap, w in self.components.items()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RkhsFunction":
        kind = d["kind"]
        if kind == "zero":
            return cls.zero()
        if kind == "kernel":
            anchors = np.asarray(d["anchors"], dtype=float).reshape(-1, d["anchor_dim"])
            return cls(
                "kernel",
                kernel=KernelSpec.from_dict(d["kernel"]),
                anchors=anchors,
                coefficients=np.asarray(d["coefficients"], dtype=float),
            )
        components = {
            FeatureMap.from_dict(item["map"]): np.asarray(item["weights"], dtype=float)
            for item in d["components"]
        }
        return cls("features", components=components)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RkhsFunction":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _check_kernel_compatible(f: RkhsFunction, g: RkhsFunction) -> None:
    if f.kernel != g.kernel:
        raise RepresentationMismatch(f"kernel specs differ: {f.kernel} vs {g.kernel}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def inner(f: RkhsFunction, g: RkhsFunction) -> float:
    """Ambient inner product.  Symmetric and bilinear.

    Kernel expansions use the cross-Gram matrix between anchor sets;
    feature-weight functions use the euclidean dot product, summed over the
    feature maps the two functions share (distinct maps are orthogonal
    components of the ambient direct sum).
    """
    if f.kind == "zero" or g.kind == "zero":
        return 0.0
    if f.kind != g.kind:
        raise RepresentationMismatch(f"cannot pair {f.kind!r} with {g.kind!r}")
    if f.kind == "kernel":
        if f.is_zero_representation() or g.is_zero_representation():
            return 0.0
        _check_kernel_compatible(f, g)
        G = f.kernel.gram(f.anchors, g.anchors)
        return float(f.coefficients @ G @ g.coefficients)
    total = 0.0
    for fmap, w in f.components.items():
        other = g.components.get(fmap)
        if other is not None:
            total += float(w @ other)
    return total


def evaluate(f: RkhsFunction, points: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` at each row of ``points``; linear in ``f``."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise DimensionMismatch(f"points must be a 2-d matrix, got shape {points.shape}")
    if f.kind == "zero":
        return np.zeros(points.shape[0])
    if f.kind == "kernel":
        if f.coefficients.size == 0:
            return np.zeros(points.shape[0])
        if points.shape[1] != f.anchors.shape[1]:
            raise DimensionMismatch(
                f"points have {points.shape[1]} columns, anchors have {f.anchors.shape[1]}"
            )
        return f.kernel.gram(points, f.anchors) @ f.coefficients
    out = np.zeros(points.shape[0])
    for fmap, w in f.components.items():
        out += fmap.features(points) @ w
    return out


def _dedup_rows(anchors: np.ndarray, coefficients: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Merge bitwise-equal anchor rows (first-occurrence order), summing
    # coefficients.  Bitwise equality keeps the merge exact.
    seen: dict[bytes, int] = {}
    keep: list[int] = []
    merged = coefficients.copy()
    for i in range(anchors.shape[0]):
        key = anchors[i].tobytes()
        j = seen.get(key)
        if j is None:
            seen[key] = i
            keep.append(i)
        else:
            merged[j] += merged[i]
    if len(keep) == anchors.shape[0]:
        return anchors, merged
    idx = np.array(keep, dtype=int)
    return anchors[idx], merged[idx]


def combine(
    coeffs: "list[float] | np.ndarray",
    funcs: "list[RkhsFunction]",
    dedup: bool = True,
) -> RkhsFunction:
    """Return ``sum_k coeffs[k] * funcs[k]``.

    An empty list yields the zero function.  Members whose coefficient is
    exactly 0.0 (or that are zero functions) contribute nothing and are
    skipped, so they cannot perturb the float arithmetic of the rest.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.shape[0] != len(funcs):
        raise ValueError("coeffs and funcs must have equal lengths")
    live = [
        (float(c), f)
        for c, f in zip(coeffs, funcs)
        if c != 0.0 and not f.is_zero_representation()
    ]
    if not live:
        return RkhsFunction.zero()
    kinds = {f.kind for _, f in live}
    if len(kinds) > 1:
        raise RepresentationMismatch(f"cannot combine representations {sorted(kinds)}")
    kind = kinds.pop()
    if kind == "kernel":
        kernel = live[0][1].kernel
        for _, f in live[1:]:
            _check_kernel_compatible(live[0][1], f)
        # fast path: all members share the same anchor array
        first_anchors = live[0][1].anchors
        if all(f.anchors is first_anchors for _, f in live[1:]):
            acc = live[0][0] * live[0][1].coefficients
            for c, f in live[1:]:
                acc = acc + c * f.coefficients
            return RkhsFunction.kernel_expansion(kernel, first_anchors, acc)
        anchors = np.concatenate([f.anchors for _, f in live], axis=0)
        coefficients = np.concatenate([c * f.coefficients for c, f in live])
        if dedup:
            anchors, coefficients = _dedup_rows(anchors, coefficients)
        return RkhsFunction.kernel_expansion(kernel, anchors, coefficients)
    merged: dict[FeatureMap, np.ndarray] = {}
    for c, f in live:
        for fmap, w in f.components.items():
            if fmap in merged:
                merged[fmap] = merged[fmap] + c * w
            else:
                merged[fmap] = c * w
    return RkhsFunction("features", components=merged)


# ---------------------------------------------------------------------------
# Recursion state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleState:
    """State vector of an order-m flow: ``(F_t, ..., F_{t-m+1})``, newest first."""

    history: tuple[RkhsFunction, ...]
    t: int

    def __post_init__(self) -> None:
        if len(self.history) < 1:
            raise ValueError("history must contain at least one function")
        if self.t < 0:
            raise ValueError("iteration index must be nonnegative")

    @property
    def head(self) -> RkhsFunction:
        return self.history[0]

    @property
    def order(self) -> int:
        return len(self.history)

    def norm(self) -> float:
        return float(np.sqrt(sum(f.norm() ** 2 for f in self.history)))
