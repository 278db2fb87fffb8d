"""The state-space update engine and its exact linear-combination algebra.

``step`` advances an order-m flow one iteration.  ``alpha_matrix`` unrolls
the same recurrence on scalars, giving the coefficients that express each
iterate as an explicit combination of the base learners; ``reconstruct``
materializes that combination and must agree with direct iteration.
``orthogonalize`` and ``rao_blackwell_average`` implement the two learner
post-processing variants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import EnsembleState, RkhsFunction, combine, inner
from .spectral import CompanionMatrix, StepSchedule, spectral_radius


@dataclass(frozen=True)
class RecursionSchedule:
    """Order, update coefficients, and step sizes of one flow.

    ``coefficients`` is either a single length-m vector used at every
    iteration or a per-iteration sequence of such vectors.  The classic
    presets are ``fibonacci`` (m = 2, coefficients (1, 1)) and
    ``first_order`` (m = 1, coefficient (1,), plain additive boosting).
    """

    order: int
    coefficients: tuple
    steps: StepSchedule

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("recursion order must be >= 1")
        coeffs = self.coefficients
        if coeffs and isinstance(coeffs[0], (tuple, list, np.ndarray)):
            coeffs = tuple(tuple(float(c) for c in row) for row in coeffs)
            for row in coeffs:
                if len(row) != self.order:
                    raise ValueError(f"coefficient vector {row} does not match order {self.order}")
        else:
            coeffs = tuple(float(c) for c in coeffs)
            if len(coeffs) != self.order:
                raise ValueError(
                    f"coefficient vector has length {len(coeffs)}, expected {self.order}"
                )
        if not np.isfinite(np.asarray(coeffs, dtype=float)).all():
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def time_varying(self) -> bool:
        return bool(self.coefficients) and isinstance(self.coefficients[0], tuple)

    def coeffs_at(self, t: int) -> tuple[float, ...]:
        if self.time_varying:
            if t - 1 >= len(self.coefficients):
                raise IndexError(f"no coefficient vector for iteration {t}")
            return self.coefficients[t - 1]  # first update happens at t = 1
        return self.coefficients

    def companion(self, t: int = 1) -> CompanionMatrix:
        return CompanionMatrix(self.coeffs_at(t))

    def max_spectral_radius(self, T: int) -> float:
        if self.time_varying:
            return max(spectral_radius(self.companion(t)) for t in range(1, max(T, 2)))
        return spectral_radius(self.companion())

    @classmethod
    def fibonacci(cls, steps: StepSchedule) -> "RecursionSchedule":
        return cls(order=2, coefficients=(1.0, 1.0), steps=steps)

    @classmethod
    def tribonacci(cls, steps: StepSchedule) -> "RecursionSchedule":
        return cls(order=3, coefficients=(1.0, 1.0, 1.0), steps=steps)

    @classmethod
    def first_order(cls, steps: StepSchedule) -> "RecursionSchedule":
        return cls(order=1, coefficients=(1.0,), steps=steps)

    def to_dict(self) -> dict:
        coeffs = self.coefficients
        return {
            "order": self.order,
            "coefficients": [list(c) for c in coeffs]
            if coeffs and isinstance(coeffs[0], tuple)
            else list(coeffs),
            "steps": self.steps.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecursionSchedule":
        extra = set(d) - {"order", "coefficients", "steps"}
        if extra:
            raise ValueError(f"unknown schedule keys {sorted(extra)}")
        return cls(
            order=d["order"],
            coefficients=tuple(
                tuple(row) if isinstance(row, (list, tuple)) else row
                for row in d["coefficients"]
            ),
            steps=StepSchedule.from_dict(d["steps"]),
        )


def initial_state(schedule: RecursionSchedule, h0: RkhsFunction) -> EnsembleState:
    """F_0 = 0 and F_1 = eta_0 h_0; history padded with zeros up to order m."""
    f1 = combine([schedule.steps.value(0)], [h0])
    history = (f1,) + tuple(RkhsFunction.zero() for _ in range(schedule.order - 1))
    return EnsembleState(history=history, t=1)


def step(
    state: EnsembleState, schedule: RecursionSchedule, t: int, h: RkhsFunction
) -> EnsembleState:
    """One update: new head = sum_k theta_{t,k} * history[k] + eta_t * h."""
    if state.t != t:
        raise ValueError(f"state is at iteration {state.t}, got t={t}")
    if len(state.history) != schedule.order:
        raise ValueError(
            f"state history length {len(state.history)} does not match order {schedule.order}"
        )
    coeffs = schedule.coeffs_at(t)
    eta = schedule.steps.value(t)
    head = combine([*coeffs, eta], [*state.history, h])
    history = (head, *state.history[: schedule.order - 1])
    return EnsembleState(history=history, t=t + 1)


# ---------------------------------------------------------------------------
# Explicit learner-combination coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaMatrix:
    """Coefficients alpha[T, k] with F_T = sum_{k<T} alpha[T, k] h_k.

    Row 0 is identically zero (F_0 = 0).  ``c_alpha`` is the smallest
    constant for which |alpha[T, k]| <= c_alpha * rho_hat**(T-1-k) * eta_k
    holds over the whole table, with rho_hat the spectral radius plus 0.01.
    """

    values: np.ndarray  # (T_max + 1, T_max)
    rho_hat: float
    c_alpha: float

    @property
    def t_max(self) -> int:
        return self.values.shape[0] - 1

    def row(self, T: int) -> np.ndarray:
        return self.values[T, :T]


def alpha_matrix(schedule: RecursionSchedule, T: int) -> AlphaMatrix:
    """Unroll the recursion on coefficients up to iteration T.

    The newest learner enters with weight eta_t; older columns follow the
    same linear recurrence as the iterates themselves.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    etas = schedule.steps.materialize(T)
    m = schedule.order
    A = np.zeros((T + 1, T))
    A[1, 0] = etas[0]
    for t in range(1, T):
        coeffs = schedule.coeffs_at(t)
        for j, theta in enumerate(coeffs):
            s = t - j
            if s >= 0 and theta != 0.0:
                A[t + 1, :s] += theta * A[s, :s]
        A[t + 1, t] = etas[t]
    rho_hat = schedule.max_spectral_radius(T) + 0.01
    c_alpha = 0.0
    for t in range(1, T + 1):
        k = np.arange(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = rho_hat ** (t - 1 - k) * etas[k]
            ratios = np.where(bound > 0, np.abs(A[t, :t]) / bound, 0.0)
        c_alpha = max(c_alpha, float(ratios.max(initial=0.0)))
    return AlphaMatrix(values=A, rho_hat=rho_hat, c_alpha=c_alpha)


def reconstruct(alpha: AlphaMatrix, learners: Sequence[RkhsFunction], T: int) -> RkhsFunction:
    """Materialize F_T = sum_k alpha[T, k] h_k; equals direct iteration."""
    if T > alpha.t_max:
        raise ValueError(f"alpha matrix has {alpha.t_max} rows, asked for T={T}")
    if len(learners) < T:
        raise ValueError(f"need {T} learners, got {len(learners)}")
    return combine(alpha.row(T), list(learners[:T]))


# ---------------------------------------------------------------------------
# Learner post-processing
# ---------------------------------------------------------------------------


def orthogonalize(
    h: RkhsFunction,
    history: Sequence[RkhsFunction],
    tol: float = 1e-8,
    passes: int = 2,
) -> RkhsFunction:
    """Remove from ``h`` its orthogonal projection onto span(history).

    Members with relative norm below 1e-10 are pruned, the rest are
    normalized and orthonormalized by modified Gram-Schmidt with
    re-orthogonalization (directions whose residual falls below ``tol``
    are redundant and dropped), and ``h`` is projected out twice.  This is
    the projection a jitter-stabilized Gram solve computes in exact
    arithmetic, but it stays accurate when the span degenerates and member
    norms range over many decades, which the growing flows produce.
    """
    norms = np.array([f.norm() for f in history])
    if norms.size == 0:
        return h
    cutoff = 1e-10 * max(norms.max(), 1e-300)
    kept = [f for f, nf in zip(history, norms) if nf > cutoff]
    kept_norms = [nf for nf in norms if nf > cutoff]
    if not kept:
        return h
    if _shared_kernel_anchors(kept + [h]):
        return _orthogonalize_shared(h, kept, kept_norms, tol, passes)
    basis: list[RkhsFunction] = []
    for f, nf in zip(kept, kept_norms):
        u = combine([1.0 / nf], [f])
        for _ in range(2):
            coeffs = [-inner(q, u) for q in basis]
            if coeffs:
                u = combine([1.0, *coeffs], [u, *basis])
        un = u.norm()
        if un > tol:
            basis.append(combine([1.0 / un], [u]))
    out = h
    for _ in range(max(passes, 1)):
        coeffs = [-inner(q, out) for q in basis]
        if coeffs:
            out = combine([1.0, *coeffs], [out, *basis])
    return out


def _shared_kernel_anchors(funcs: Sequence[RkhsFunction]) -> bool:
    first = funcs[0]
    if first.kind != "kernel":
        return False
    return all(
        f.kind == "kernel" and f.anchors is first.anchors and f.kernel == first.kernel
        for f in funcs[1:]
    )


def _orthogonalize_shared(
    h: RkhsFunction,
    kept: list[RkhsFunction],
    kept_norms: list[float],
    tol: float,
    passes: int,
) -> RkhsFunction:
    # same algorithm in coefficient space: one Gram build, matrix arithmetic
    anchors, kernel = h.anchors, h.kernel
    G = kernel.gram(anchors, anchors)
    rows = [f.coefficients / nf for f, nf in zip(kept, kept_norms)]
    basis: list[np.ndarray] = []
    for u in rows:
        u = u.copy()
        for _ in range(2):
            for q in basis:
                u -= (q @ G @ u) * q
        un = np.sqrt(max(u @ G @ u, 0.0))
        if un > tol:
            basis.append(u / un)
    c = h.coefficients.copy()
    for _ in range(max(passes, 1)):
        for q in basis:
            c -= (q @ G @ c) * q
    return RkhsFunction.kernel_expansion(kernel, anchors, c)


def rao_blackwell_average(sampler: Callable[[], RkhsFunction], M: int) -> RkhsFunction:
    """Equal-weight average of M independent draws from ``sampler``.

    A Monte Carlo surrogate for conditioning the randomized learner on the
    data; draws are reduced in draw order so results are reproducible.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    draws = [sampler() for _ in range(M)]
    if M == 1:
        return draws[0]
    return combine([1.0 / M] * M, draws)
