"""Langmuir 1:1 binding model for affinity nano-sensors.

Closed-form association/disassociation responses, the stepped response-factor
(RF) procedure run on each sensor, the equilibrium RF curve, a one-parameter
RF-model fit, and the mapping from RF to the five response classes A..E.

Units follow the usual surface-binding conventions: concentrations in molar,
rates in 1/(M s) and 1/s, responses in response units (RU).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, DegenerateDataError, OutOfRangeError

DEFAULT_MAX_STEPS = 10**6
ACTIVE_REGION_DELTA = 0.05
CLASS_BOUNDARIES = np.array([0.2, 0.4, 0.6, 0.8])


@dataclass(frozen=True)
class SensorParams:
    """Kinetic constants and receptor capacity of one affinity nano-sensor."""

    k_a: float
    k_d: float
    r_max: float = 100.0
    epsilon_r: float = 1e-5

    def __post_init__(self):
        for name in ("k_a", "k_d", "r_max", "epsilon_r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def k_D(self) -> float:
        """Affinity constant k_d / k_a (molar)."""
        return self.k_d / self.k_a

    @classmethod
    def table3(cls) -> "SensorParams":
        """Tabulated rates: k_a = 1e-2, k_d = 1e-3, hence k_D = 0.1 M."""
        return cls(k_a=1e-2, k_d=1e-3)

    @classmethod
    def figure(cls) -> "SensorParams":
        """Rates putting half saturation at 10 M, as in the response plots."""
        return cls(k_a=1e-4, k_d=1e-3)

    @classmethod
    def from_kd(cls, k_D: float, k_d: float = 1e-3, **kwargs) -> "SensorParams":
        return cls(k_a=k_d / k_D, k_d=k_d, **kwargs)


class ResponseClass(enum.Enum):
    A = 0
    B = 1
    C = 2
    D = 3
    E = 4

    @property
    def index(self) -> int:
        return self.value

    @property
    def code(self) -> int:
        """Integer coding 1..5 used by the scoring metrics."""
        return self.value + 1

    @property
    def label(self) -> str:
        return self.name

    @property
    def rf_range(self) -> tuple[float, float]:
        """Left-closed RF interval; E also contains 1.0."""
        lo = 0.2 * self.value
        return (lo, round(lo + 0.2, 10))

    @classmethod
    def from_label(cls, label: str) -> "ResponseClass":
        return cls[label.upper()]


CLASS_LABELS = tuple(c.label for c in ResponseClass)


@dataclass(frozen=True)
class ResponseTrace:
    times: tuple[float, ...]
    values: tuple[float, ...]
    phase: str  # "association" | "disassociation"

    def rows(self):
        for t, v in zip(self.times, self.values):
            yield (t, v, self.phase)


@dataclass(frozen=True)
class RfModelFit:
    k_D_hat: float
    residual_sse: float
    active_region: tuple[float, float]
    n_iter: int = 0

    def predict(self, conc):
        return equilibrium_rf(conc, self.k_D_hat)


def _rate(params: SensorParams, conc):
    return params.k_a * conc + params.k_d


def _r_eq(params: SensorParams, conc):
    return params.k_a * conc * params.r_max / (params.k_a * conc + params.k_d)


def association_response(params: SensorParams, conc, t):
    """Closed-form association-phase response R_a(t) in RU."""
    return _r_eq(params, conc) * -np.expm1(-t * _rate(params, conc))


def disassociation_response(r_d0, k_d, t):
    """Exponential decay R_d0 * exp(-k_d t) once analyte is removed."""
    return r_d0 * np.exp(-k_d * t)


def equilibrium_rf(conc, k_D):
    """Response factor at equilibrium, conc / (conc + k_D)."""
    if np.any(np.asarray(k_D) <= 0):
        raise ValueError("k_D must be > 0")
    return conc / (conc + k_D)


def concentration_for_rf(rf, k_D):
    """Inverse of :func:`equilibrium_rf`."""
    return k_D * rf / (1.0 - rf)


def response_factor(params: SensorParams, conc: float, max_steps: int = DEFAULT_MAX_STEPS) -> float:
    """Step the sensor response at 1 s resolution until it settles, then report RF.

    The association phase runs from R_a(0) = 0 until two successive samples
    differ by less than ``epsilon_r``; the disassociation phase starts from the
    last association value and runs the same test. RF is the larger of the two
    final responses divided by ``r_max``.
    """
    if conc < 0:
        raise ValueError("conc must be >= 0")
    eps = params.epsilon_r

    t = 0
    prev = 0.0
    while True:
        t += 1
        r_a = float(association_response(params, conc, t))
        if abs(r_a - prev) < eps:
            break
        prev = r_a
        if t >= max_steps:
            raise ConvergenceError(f"association phase did not settle within {max_steps} steps")

    r_d0 = r_a
    t = 0
    prev = r_d0
    while True:
        t += 1
        r_d = float(disassociation_response(r_d0, params.k_d, t))
        if abs(r_d - prev) < eps:
            break
        prev = r_d
        if t >= max_steps:
            raise ConvergenceError(f"disassociation phase did not settle within {max_steps} steps")

    return max(r_a, r_d) / params.r_max


def _settle_step(first_diff, rate, eps):
    # successive differences are first_diff * exp(-rate * (t - 1)); first t with diff < eps
    with np.errstate(divide="ignore"):
        x = np.log(np.maximum(first_diff, 1e-300) / eps) / rate
    return np.where(first_diff < eps, 1, np.floor(x) + 2).astype(np.int64)


def response_factor_array(params: SensorParams, conc, max_steps: int = DEFAULT_MAX_STEPS) -> np.ndarray:
    """Vectorised :func:`response_factor`.

    Solves for the settling step of each phase directly instead of looping,
    which is what lets a gateway evaluate thousands of sensors per sweep.
    """
    conc = np.asarray(conc, dtype=float)
    if np.any(conc < 0):
        raise ValueError("conc must be >= 0")
    eps = params.epsilon_r
    rate = _rate(params, conc)
    r_eq = _r_eq(params, conc)
    t_a = _settle_step(r_eq * -np.expm1(-rate), rate, eps)
    if np.any(t_a > max_steps):
        raise ConvergenceError(f"association phase did not settle within {max_steps} steps")
    r_a = r_eq * -np.expm1(-t_a * rate)
    t_d = _settle_step(r_a * -np.expm1(-params.k_d), params.k_d, eps)
    if np.any(t_d > max_steps):
        raise ConvergenceError(f"disassociation phase did not settle within {max_steps} steps")
    return r_a / params.r_max


def classify(rf: float) -> ResponseClass:
    """Map an RF in [0, 1] to its response class (left-closed bins of width 0.2)."""
    if not (0.0 <= rf <= 1.0):
        raise OutOfRangeError(f"rf must lie in [0, 1], got {rf!r}")
    return ResponseClass(int(np.searchsorted(CLASS_BOUNDARIES, rf, side="right")))


def classify_array(rf) -> np.ndarray:
    """Class indices 0..4 for an array of RF values."""
    rf = np.asarray(rf, dtype=float)
    if np.any((rf < 0) | (rf > 1)) or np.any(np.isnan(rf)):
        raise OutOfRangeError("rf values must lie in [0, 1]")
    return np.searchsorted(CLASS_BOUNDARIES, rf, side="right")


def true_class(conc: float, k_D: float) -> ResponseClass:
    return classify(float(equilibrium_rf(conc, k_D)))


def active_region(k_D: float, delta: float = ACTIVE_REGION_DELTA) -> tuple[float, float]:
    """Concentrations where the fitted RF lies within [delta, 1 - delta]."""
    return (k_D * delta / (1 - delta), k_D * (1 - delta) / delta)


def fit_rf_model(
    samples: Iterable[Sequence[float]],
    delta: float = ACTIVE_REGION_DELTA,
    max_iter: int = 200,
    tol: float = 1e-12,
) -> RfModelFit:
    """Least-squares estimate of k_D from ``(concentration, rf)`` pairs.

    Levenberg-damped Gauss-Newton on the single parameter k_D, using the
    analytic derivative d RF / d k_D = -A / (A + k_D)^2. The starting point is
    the concentration whose observed RF is closest to one half.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 3:
        raise DegenerateDataError("need at least 3 (concentration, rf) samples")
    conc, rf = data[:, 0], data[:, 1]
    if np.any(conc < 0):
        raise ValueError("concentrations must be >= 0")
    if np.ptp(conc) == 0:
        raise DegenerateDataError("all concentrations are equal")

    positive = conc > 0
    order = np.argsort(np.abs(rf[positive] - 0.5))
    k = float(conc[positive][order[0]])

    def sse_at(kd):
        res = rf - conc / (conc + kd)
        return float(res @ res)

    sse = sse_at(k)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        pred = conc / (conc + k)
        jac = -conc / (conc + k) ** 2
        grad = float(jac @ (rf - pred))
        hess = float(jac @ jac)
        if hess == 0.0:
            raise DegenerateDataError("RF is insensitive to k_D at these concentrations")
        while True:
            step = grad / (hess * (1.0 + lam))
            k_new = k + step
            if k_new > 0:
                sse_new = sse_at(k_new)
                if sse_new <= sse:
                    break
            lam *= 10.0
            if lam > 1e16:
                # no downhill step exists at this precision: we are at the minimum
                return RfModelFit(k, sse, active_region(k, delta), it)
        converged = abs(step) <= tol * (abs(k) + tol) or (sse - sse_new) <= tol * max(sse, 1e-300)
        k, sse = k_new, sse_new
        lam = max(lam / 10.0, 1e-12)
        if converged:
            return RfModelFit(k, sse, active_region(k, delta), it)
    raise ConvergenceError(f"RF-model fit did not converge in {max_iter} iterations")


def simulate_traces(
    params: SensorParams, conc: float, duration: float, dt: float = 1.0
) -> tuple[ResponseTrace, ResponseTrace]:
    """Association over ``[0, duration]`` then disassociation for the same span."""
    times = np.arange(0.0, duration + dt / 2, dt)
    assoc = association_response(params, conc, times)
    dis = disassociation_response(float(assoc[-1]), params.k_d, times)
    end = float(times[-1])
    return (
        ResponseTrace(tuple(times.tolist()), tuple(assoc.tolist()), "association"),
        ResponseTrace(tuple((times + end).tolist()), tuple(dis.tolist()), "disassociation"),
    )


def write_traces_csv(path, traces: Iterable[ResponseTrace], extra: dict | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "response_ru", "phase", *extra])
        for trace in traces:
            for row in trace.rows():
                writer.writerow([*row, *extra.values()])
