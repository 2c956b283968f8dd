"""Decoy-state bounds on the vacuum and single-photon yields and on e_1.

The unknown photon-number probabilities of each intensity are replaced by
interval bounds, which turns the decoy-state equations into a linear program
over the yields ``y_0 .. y_{n_cut}``. For every intensity with probability
bounds ``[p_lo, p_hi]`` and observed gain interval ``[Y_lo, Y_hi]``::

    sum_n p_lo[n] y_n            <= Y_hi
    sum_n p_hi[n] y_n + Gamma    >= Y_lo,      Gamma = 1 - sum_n p_lo[n]

where ``Gamma`` bounds the gain contributed by photon numbers above n_cut.
The signal intensity uses the correlation-derived bounds for n <= 3 and
``[0, 1]`` above; decoy and vacuum intensities are taken as Poissonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DegenerateDenominator, InfeasibleObservations, ValidationError
from .lp import Constraint, LPProblem, solve_lp
from .photon_model import PhotonNumberDistribution
from .statistics_bounds import DEFAULT_N_CUT, ProbabilityBounds

INTENSITIES = ("u", "v", "w")
E1_CAP = 0.5


@dataclass(frozen=True)
class IntensitySettings:
    u: float = 0.42
    v: float = 0.02
    w: float = 1e-4
    p_u: float = 0.9
    p_v: float = 0.05
    p_w: float = 0.05

    def __post_init__(self):
        if not (self.u > self.v > self.w >= 0):
            raise ValidationError(f"need u > v > w >= 0, got {self.u}, {self.v}, {self.w}")
        probs = (self.p_u, self.p_v, self.p_w)
        if any(not (p > 0) for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValidationError(f"class probabilities {probs} must be positive and sum to 1")

    def mean(self, intensity: str) -> float:
        return getattr(self, intensity)


@dataclass(frozen=True)
class GainInterval:
    """Gain ``Y`` and error gain ``B = Y * E`` for one intensity, as intervals."""

    y_lower: float
    y_upper: float
    b_lower: float = 0.0
    b_upper: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.y_lower <= self.y_upper <= 1.0):
            raise ValidationError(f"bad gain interval [{self.y_lower}, {self.y_upper}]")
        if not (0.0 <= self.b_lower <= self.b_upper <= 1.0):
            raise ValidationError(f"bad error-gain interval [{self.b_lower}, {self.b_upper}]")
        if self.b_lower > self.y_lower or self.b_upper > self.y_upper:
            raise ValidationError("error gain cannot exceed gain")

    @classmethod
    def point(cls, y: float, b: float = 0.0, margin: float = 0.0) -> "GainInterval":
        """Zero-width interval, optionally widened by a relative ``margin``."""
        return cls(
            max(0.0, y * (1 - margin)),
            min(1.0, y * (1 + margin)),
            max(0.0, b * (1 - margin)),
            min(1.0, b * (1 + margin), y * (1 + margin)),
        )


@dataclass(frozen=True)
class ObservedGains:
    u: GainInterval
    v: GainInterval
    w: GainInterval

    def __getitem__(self, intensity: str) -> GainInterval:
        return getattr(self, intensity)


@dataclass(frozen=True)
class YieldBounds:
    y0_lower: float
    y1_lower: float
    e1_upper: float
    e1_clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "y0_lower": self.y0_lower,
            "y1_lower": self.y1_lower,
            "e1_upper": self.e1_upper,
            "e1_clamped": self.e1_clamped,
        }


class ProbabilityIntervals(NamedTuple):
    lower: np.ndarray
    upper: np.ndarray

    @property
    def residual(self) -> float:
        """Largest mass that may sit above n_cut."""
        return max(0.0, 1.0 - math.fsum(self.lower))


def exact_intervals(dist: PhotonNumberDistribution, n_cut: int) -> ProbabilityIntervals:
    p = np.zeros(n_cut + 1)
    k = min(n_cut, dist.n_cut) + 1
    p[:k] = dist.array[:k]
    return ProbabilityIntervals(p, p.copy())


def signal_intervals(bounds: ProbabilityBounds, n_cut: int) -> ProbabilityIntervals:
    """Correlation bounds for the first photon numbers, ``[0, 1]`` beyond them."""
    lower = np.zeros(n_cut + 1)
    upper = np.ones(n_cut + 1)
    k = min(len(bounds.lower), n_cut + 1)
    lower[:k] = bounds.lower[:k]
    upper[:k] = bounds.upper[:k]
    return ProbabilityIntervals(lower, upper)


def poisson_intervals(mu: float, n_cut: int) -> ProbabilityIntervals:
    if mu == 0:
        p = np.zeros(n_cut + 1)
        p[0] = 1.0
        return ProbabilityIntervals(p, p.copy())
    probs = [math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1)) for n in range(n_cut + 1)]
    p = np.array(probs)
    return ProbabilityIntervals(p, p.copy())


def decoy_intervals(
    signal: ProbabilityIntervals, settings: IntensitySettings, n_cut: int
) -> dict[str, ProbabilityIntervals]:
    return {
        "u": signal,
        "v": poisson_intervals(settings.v, n_cut),
        "w": poisson_intervals(settings.w, n_cut),
    }


def _rate_rows(
    intervals: Mapping[str, ProbabilityIntervals], lower_rhs: Mapping[str, float], upper_rhs: Mapping[str, float]
) -> list[Constraint]:
    rows = []
    for key in INTENSITIES:
        iv = intervals[key]
        rows.append(Constraint(iv.lower, "<=", upper_rhs[key]))
        rows.append(Constraint(iv.upper, ">=", lower_rhs[key] - iv.residual))
    return rows


def yield_problem(
    observed: ObservedGains, intervals: Mapping[str, ProbabilityIntervals], target_n: int
) -> LPProblem:
    """LP minimising ``y_target_n`` over yield vectors consistent with the gains."""
    n_vars = len(intervals["u"].lower)
    rows = _rate_rows(
        intervals,
        {k: observed[k].y_lower for k in INTENSITIES},
        {k: observed[k].y_upper for k in INTENSITIES},
    )
    objective = np.zeros(n_vars)
    objective[target_n] = 1.0
    return LPProblem(tuple(objective), tuple(rows), ((0.0, 1.0),) * n_vars)


def solve_yield_bounds(
    observed: ObservedGains, intervals: Mapping[str, ProbabilityIntervals]
) -> tuple[float, float]:
    """``(y0_lower, y1_lower)`` for explicit per-intensity probability intervals."""
    out = []
    for target in (0, 1):
        sol = solve_lp(yield_problem(observed, intervals, target))
        if not sol.optimal:
            raise InfeasibleObservations(
                f"observed gains admit no yield vector (LP {sol.status}); check the gain data"
            )
        out.append(float(min(1.0, max(0.0, sol.x[target]))))
    return out[0], out[1]


def bound_yields(
    observed: ObservedGains,
    signal_bounds: ProbabilityBounds,
    settings: IntensitySettings = IntensitySettings(),
    n_cut: int = DEFAULT_N_CUT,
) -> tuple[float, float]:
    """Lower bounds ``(y0, y1)`` from correlation-derived signal statistics."""
    intervals = decoy_intervals(signal_intervals(signal_bounds, n_cut), settings, n_cut)
    return solve_yield_bounds(observed, intervals)


def max_error_gain_lp(
    observed: ObservedGains, intervals: Mapping[str, ProbabilityIntervals], target_n: int = 1
) -> float:
    """Largest single-photon error gain ``b_1`` compatible with the error-gain data.

    Same construction as the yield LP with ``Y`` replaced by ``B``; used as an
    independent route to the closed-form e_1 bound.
    """
    n_vars = len(intervals["u"].lower)
    rows = _rate_rows(
        intervals,
        {k: observed[k].b_lower for k in INTENSITIES},
        {k: observed[k].b_upper for k in INTENSITIES},
    )
    objective = np.zeros(n_vars)
    objective[target_n] = -1.0
    sol = solve_lp(LPProblem(tuple(objective), tuple(rows), ((0.0, 1.0),) * n_vars))
    if not sol.optimal:
        raise InfeasibleObservations(f"error-gain data admit no solution (LP {sol.status})")
    return float(sol.x[target_n])


class ErrorRateBound(NamedTuple):
    value: float
    raw: float
    clamped: bool


def bound_error_rate_e1(
    b_upper: float | ObservedGains,
    p0_lower: float,
    y0_lower: float,
    e0_lower: float,
    p1_lower: float,
    y1_lower: float,
) -> ErrorRateBound:
    """``(B_hi(u) - p0 y0 e0) / (p1 y1)``, clamped into ``[0, 0.5]``.

    ``b_upper`` is the signal error-gain upper bound, or the full observation
    record from which it is taken.
    """
    if isinstance(b_upper, ObservedGains):
        b_upper = b_upper.u.b_upper
    denom = p1_lower * y1_lower
    if not denom > 0:
        raise DegenerateDenominator("p1_lower * y1_lower = 0: no single-photon contribution certifiable")
    raw = (b_upper - p0_lower * y0_lower * e0_lower) / denom
    value = min(E1_CAP, max(0.0, raw))
    return ErrorRateBound(value, raw, value != raw)
