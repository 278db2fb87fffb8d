"""Continuous-time limits of the second-order recursion.

``simulate_ode`` integrates F'' = a F' + b F + c G(t) with classical RK4.
``discretized_recursion`` runs the scalar recursion under one of two
coefficient scalings:

* ``"as-stated"``: beta = 1 + a*dt, gamma = b*dt, eta = c*dt.  One step of
  algebra shows this flow is a consistent discretization of the first-order
  equation F' = (a + b) F + c G, not of the second-order one (the gamma
  term contributes b*dt*F at leading order, merging into the drift), so the
  limit study measures convergence to that effective equation.
* ``"second-order"``: beta = 2 + a*dt + b*dt^2, gamma = -(1 + a*dt),
  eta = c*dt^2, the consistent bookkeeping for the second-order equation.

Both scalings converge at first order to their respective limits, which is
what ``limit_study`` fits and reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

FORCING_KINDS = ("zero", "constant", "sinusoid", "sampled")
SCALINGS = ("as-stated", "second-order")
REFERENCES = ("effective", "second-order")


class OdeBlowupError(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"trajectory became non-finite at t = {time:.6g}")
        self.time = time


@dataclass(frozen=True)
class OdeParams:
    a: float
    b: float
    c: float
    horizon: float
    f0: float = 0.0
    df0: float = 0.0
    forcing: str = "zero"
    forcing_freq: float = 1.0
    forcing_amplitude: float = 1.0
    forcing_times: tuple[float, ...] | None = None
    forcing_values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if self.forcing not in FORCING_KINDS:
            raise ValueError(f"unknown forcing {self.forcing!r}")
        if self.forcing == "sampled" and (
            self.forcing_times is None or self.forcing_values is None
        ):
            raise ValueError("sampled forcing requires forcing_times and forcing_values")

    def forcing_fn(self) -> Callable[[float], float]:
        if self.forcing == "zero":
            return lambda t: 0.0
        if self.forcing == "constant":
            amp = self.forcing_amplitude
            return lambda t: amp
        if self.forcing == "sinusoid":
            freq, amp = self.forcing_freq, self.forcing_amplitude
            return lambda t: amp * math.sin(2.0 * math.pi * freq * t)
        times = np.asarray(self.forcing_times, dtype=float)
        values = np.asarray(self.forcing_values, dtype=float)
        return lambda t: float(np.interp(t, times, values))

    def to_dict(self) -> dict:
        d: dict = {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "horizon": self.horizon,
            "f0": self.f0,
            "df0": self.df0,
            "forcing": self.forcing,
        }
        if self.forcing == "sinusoid":
            d["forcing_freq"] = self.forcing_freq
        if self.forcing in ("constant", "sinusoid"):
            d["forcing_amplitude"] = self.forcing_amplitude
        if self.forcing == "sampled":
            d["forcing_times"] = list(self.forcing_times)
            d["forcing_values"] = list(self.forcing_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OdeParams":
        allowed = {
            "a",
            "b",
            "c",
            "horizon",
            "f0",
            "df0",
            "forcing",
            "forcing_freq",
            "forcing_amplitude",
            "forcing_times",
            "forcing_values",
        }
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown ode keys {sorted(extra)}")
        kwargs = dict(d)
        if "forcing_times" in kwargs:
            kwargs["forcing_times"] = tuple(kwargs["forcing_times"])
        if "forcing_values" in kwargs:
            kwargs["forcing_values"] = tuple(kwargs["forcing_values"])
        return cls(**kwargs)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def sup_norm_diff(self, other: "Trajectory") -> float:
        if len(self.values) != len(other.values):
            raise ValueError("trajectories have different grids")
        return float(np.max(np.abs(self.values - other.values)))


def _rk4(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    dt: float,
    steps: int,
) -> np.ndarray:
    out = np.empty((steps + 1, y0.size))
    out[0] = y0
    y = y0.astype(float)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            t = k * dt
            k1 = f(t, y)
            k2 = f(t + dt / 2.0, y + dt / 2.0 * k1)
            k3 = f(t + dt / 2.0, y + dt / 2.0 * k2)
            k4 = f(t + dt, y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(y).all():
                raise OdeBlowupError((k + 1) * dt)
            out[k + 1] = y
    return out


def simulate_ode(params: OdeParams, dt_ref: float, refine: int = 1) -> Trajectory:
    """RK4 integration of F'' = a F' + b F + c G(t) on a grid of spacing dt_ref.

    ``refine > 1`` integrates internally at dt_ref / refine and subsamples,
    which is how reference solutions (refine = 16) are produced.
    """
    if dt_ref <= 0:
        raise ValueError("dt_ref must be > 0")
    G = params.forcing_fn()
    a, b, c = params.a, params.b, params.c

    def f(t: float, s: np.ndarray) -> np.ndarray:
        return np.array([s[1], a * s[1] + b * s[0] + c * G(t)])

    steps = int(round(params.horizon / dt_ref))
    fine = _rk4(f, np.array([params.f0, params.df0]), dt_ref / refine, steps * refine)
    times = np.arange(steps + 1) * dt_ref
    return Trajectory(times=times, values=fine[::refine, 0])


def effective_first_order(params: OdeParams, dt_ref: float, refine: int = 1) -> Trajectory:
    """RK4 integration of the stated scaling's true limit F' = (a+b) F + c G."""
    G = params.forcing_fn()
    r, c = params.a + params.b, params.c

    def f(t: float, s: np.ndarray) -> np.ndarray:
        return np.array([r * s[0] + c * G(t)])

    steps = int(round(params.horizon / dt_ref))
    fine = _rk4(f, np.array([params.f0]), dt_ref / refine, steps * refine)
    times = np.arange(steps + 1) * dt_ref
    return Trajectory(times=times, values=fine[::refine, 0])


def discretized_recursion(
    params: OdeParams, dt: float, scaling: str = "as-stated"
) -> Trajectory:
    """Scalar recursion with time-step-scaled coefficients.

    Initial values match F(0) and F(dt) ~ F(0) + dt F'(0).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    G = params.forcing_fn()
    a, b, c = params.a, params.b, params.c
    if scaling == "as-stated":
        beta, gamma, eta = 1.0 + a * dt, b * dt, c * dt
    else:
        beta, gamma, eta = 2.0 + a * dt + b * dt * dt, -(1.0 + a * dt), c * dt * dt
    steps = int(round(params.horizon / dt))
    F = np.empty(steps + 1)
    F[0] = params.f0
    if steps >= 1:
        F[1] = params.f0 + dt * params.df0
    for k in range(1, steps):
        F[k + 1] = beta * F[k] + gamma * F[k - 1] + eta * G(k * dt)
        if not math.isfinite(F[k + 1]):
            raise OdeBlowupError((k + 1) * dt)
    return Trajectory(times=np.arange(steps + 1) * dt, values=F)


@dataclass(frozen=True)
class LimitStudy:
    dts: tuple[float, ...]
    errors: tuple[float, ...]
    fitted_order: float
    scaling: str
    reference: str

    def to_csv(self) -> str:
        lines = ["dt,error"]
        for dt, err in zip(self.dts, self.errors):
            lines.append(f"{dt:.17g},{err:.17g}")
        return "\n".join(lines) + "\n"


def limit_study(
    params: OdeParams,
    dts: "list[float] | tuple[float, ...]",
    scaling: str = "as-stated",
    reference: str | None = None,
) -> LimitStudy:
    """Sup-norm error of the discrete recursion against its continuous limit.

    The default reference is the limit the chosen scaling actually induces:
    the effective first-order equation for "as-stated" and the second-order
    equation for "second-order".  Reference trajectories are integrated at
    dt / 16.
    """
    dts = tuple(float(d) for d in dts)
    if any(dts[i + 1] >= dts[i] for i in range(len(dts) - 1)):
        raise ValueError("dts must be strictly decreasing")
    if reference is None:
        reference = "effective" if scaling == "as-stated" else "second-order"
    if reference not in REFERENCES:
        raise ValueError(f"unknown reference {reference!r}")
    errors = []
    for dt in dts:
        discrete = discretized_recursion(params, dt, scaling=scaling)
        if reference == "effective":
            ref = effective_first_order(params, dt, refine=16)
        else:
            ref = simulate_ode(params, dt, refine=16)
        errors.append(discrete.sup_norm_diff(ref))
    if not all(math.isfinite(e) for e in errors):
        raise ValueError("limit study produced non-finite errors")
    order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return LimitStudy(
        dts=dts, errors=tuple(errors), fitted_order=order, scaling=scaling, reference=reference
    )
