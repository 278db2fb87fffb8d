"""Companion-matrix spectral analysis and step-size schedules.

An order-m linear recurrence ``F_{t+1} = sum_k theta_k F_{t-k} + eta_t h_t``
is driven by the companion matrix with the theta coefficients in its first
row and ones on the subdiagonal.  Its spectral radius decides whether the
homogeneous flow decays (radius < 1) or grows, and the growth rate of the
Fibonacci case is the golden ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class CompanionMatrix:
    """Top-row coefficients (theta_0, ..., theta_{m-1}); subdiagonal is 1."""

    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) < 1:
            raise ValueError("companion matrix needs at least one coefficient")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("companion coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def matrix(self) -> np.ndarray:
        m = self.order
        A = np.zeros((m, m))
        A[0, :] = self.coefficients
        if m > 1:
            A[np.arange(1, m), np.arange(0, m - 1)] = 1.0
        return A


def _charpoly(cm: CompanionMatrix, lam: np.ndarray) -> np.ndarray:
    # p(lam) = lam^m - sum_k theta_k lam^{m-1-k}
    m = cm.order
    p = lam**m
    for k, theta in enumerate(cm.coefficients):
        p = p - theta * lam ** (m - 1 - k)
    return p


def characteristic_roots(cm: CompanionMatrix) -> np.ndarray:
    """All m roots of the characteristic polynomial, sorted by descending modulus.

    The m = 2 case uses the closed form (beta +- sqrt(beta^2 + 4 gamma)) / 2;
    higher orders take eigenvalues of the companion matrix itself, polished
    by a couple of Newton steps and validated against the polynomial.
    """
    m = cm.order
    if m == 1:
        roots = np.array([cm.coefficients[0]], dtype=complex)
    elif m == 2:
        beta, gamma = cm.coefficients
        disc = np.sqrt(complex(beta * beta + 4.0 * gamma))
        roots = np.array([(beta + disc) / 2.0, (beta - disc) / 2.0])
    else:
        roots = np.linalg.eigvals(cm.matrix())
        for _ in range(2):  # Newton polish on the characteristic polynomial
            p = _charpoly(cm, roots)
            dp = m * roots ** (m - 1)
            for k, theta in enumerate(cm.coefficients[:-1]):
                dp = dp - theta * (m - 1 - k) * roots ** (m - 2 - k)
            safe = np.abs(dp) > 0
            roots = np.where(safe, roots - p / np.where(safe, dp, 1.0), roots)
        scale = max(1.0, np.max(np.abs(roots))) ** m * (1.0 + sum(abs(c) for c in cm.coefficients))
        residual = np.max(np.abs(_charpoly(cm, roots)))
        if residual > 1e-12 * scale:
            raise ArithmeticError(
                f"root refinement residual {residual:.3e} exceeds tolerance for {cm}"
            )
    order = np.lexsort((-roots.imag, -roots.real, -np.abs(roots)))
    return roots[order]


def spectral_radius(cm: CompanionMatrix) -> float:
    return float(np.max(np.abs(characteristic_roots(cm))))


def is_stable(cm: CompanionMatrix) -> bool:
    """Strict stability: radius < 1 (radius exactly 1 counts as unstable)."""
    return spectral_radius(cm) < 1.0


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple[complex, ...]
    spectral_radius: float
    stable: bool
    margin: float

    @classmethod
    def from_companion(cls, cm: CompanionMatrix) -> "SpectralReport":
        roots = characteristic_roots(cm)
        radius = float(np.max(np.abs(roots)))
        return cls(
            eigenvalues=tuple(complex(r) for r in roots),
            spectral_radius=radius,
            stable=radius < 1.0,
            margin=1.0 - radius,
        )

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "spectral_radius": self.spectral_radius,
            "stable": self.stable,
            "margin": self.margin,
        }


def power_envelope(cm: CompanionMatrix, K: int) -> np.ndarray:
    """Operator 2-norms of A^k for k = 0..K by repeated multiplication.

    For unstable matrices whose powers overflow, the envelope is truncated
    at the last finite entry.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    A = cm.matrix()
    norms = [1.0]
    P = np.eye(cm.order)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(K):
            P = A @ P
            if not np.isfinite(P).all():
                break
            norms.append(float(np.linalg.norm(P, 2)))
    return np.array(norms)


# ---------------------------------------------------------------------------
# Step-size schedules
# ---------------------------------------------------------------------------

SCHEDULE_KINDS = ("constant", "geometric", "golden", "explicit")


@dataclass(frozen=True)
class StepSchedule:
    """Positive step sizes eta_0, eta_1, ...

    * constant:  eta_t = eta0
    * geometric: eta_t = eta0 * ratio**t with ratio in (0, 1]
    * golden:    eta_t = eta0 * phi**(-t) with phi the golden ratio
    * explicit:  a caller-supplied list
    """

    kind: str
    eta0: float | None = None
    ratio: float | None = None
    values: tuple[float, ...] | None = None
    length: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.values:
                raise ValueError("explicit schedule requires values")
            vals = tuple(float(v) for v in self.values)
            if any(v <= 0 for v in vals):
                raise ValueError("all steps must be > 0")
            object.__setattr__(self, "values", vals)
            if self.length is None:
                object.__setattr__(self, "length", len(vals))
        else:
            if self.eta0 is None or self.eta0 <= 0:
                raise ValueError("eta0 must be > 0")
            if self.kind == "geometric" and not (
                self.ratio is not None and 0.0 < self.ratio <= 1.0
            ):
                raise ValueError("geometric ratio must lie in (0, 1]")

    def value(self, t: int) -> float:
        if self.kind == "constant":
            return self.eta0
        if self.kind == "geometric":
            return self.eta0 * self.ratio**t
        if self.kind == "golden":
            return self.eta0 * GOLDEN_RATIO ** (-t)
        if t >= len(self.values):
            raise IndexError(f"explicit schedule has {len(self.values)} steps, asked for t={t}")
        return self.values[t]

    def materialize(self, T: int | None = None) -> np.ndarray:
        if T is None:
            T = self.length
        if T is None:
            raise ValueError("schedule has no length; pass T")
        return np.array([self.value(t) for t in range(T)])

    def is_summable(self) -> bool:
        # structurally summable kinds; explicit sequences must decay strictly
        if self.kind == "golden":
            return True
        if self.kind == "geometric":
            return self.ratio < 1.0
        if self.kind == "explicit":
            v = self.values
            return all(v[t + 1] < v[t] for t in range(len(v) - 1))
        return False

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "explicit":
            d["values"] = list(self.values)
        else:
            d["eta0"] = self.eta0
            if self.kind == "geometric":
                d["ratio"] = self.ratio
        if self.length is not None:
            d["length"] = self.length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StepSchedule":
        return make_schedule(d)


_SCHEDULE_KEYS = {
    "constant": {"kind", "eta0", "length"},
    "geometric": {"kind", "eta0", "ratio", "length"},
    "golden": {"kind", "eta0", "length"},
    "explicit": {"kind", "values", "length"},
}


def make_schedule(spec: dict) -> StepSchedule:
    """Build a StepSchedule from a plain dict, rejecting unknown keys."""
    kind = spec.get("kind")
    if kind not in SCHEDULE_KINDS:
        raise ValueError(f"unknown schedule kind {kind!r}")
    extra = set(spec) - _SCHEDULE_KEYS[kind]
    if extra:
        raise ValueError(f"unknown schedule keys {sorted(extra)}")
    return StepSchedule(
        kind=kind,
        eta0=spec.get("eta0"),
        ratio=spec.get("ratio"),
        values=tuple(spec["values"]) if "values" in spec else None,
        length=spec.get("length"),
    )


def golden_threshold_check(
    schedule: StepSchedule,
    cm: CompanionMatrix,
    T: int | None = None,
    burn_in: int = 10,
) -> bool:
    """Decide whether the steps decay fast enough to tame the recursion.

    Fits C = max_{t < burn_in} eta_t * rho**t and requires eta_t <= C *
    rho**(-t) for every later step, with rho the spectral radius (the golden
    ratio for the Fibonacci coefficients), plus structural summability.
    """
    etas = schedule.materialize(T)
    rho = spectral_radius(cm)
    base = rho if rho > 0 else 1.0
    burn = min(burn_in, len(etas))
    C = max(etas[t] * base**t for t in range(burn))
    envelope_ok = all(
        etas[t] <= C * base ** (-t) * (1.0 + 1e-12) for t in range(burn, len(etas))
    )
    return envelope_ok and schedule.is_summable()
