"""Worst-case bounds on p_0..p_3 from measured correlation functions.

The unknowns are the truncated probabilities ``p_0 .. p_{n_cut}`` and one
variable ``g_m`` per measured order, boxed to ``[g - gamma*sigma, g + gamma*sigma]``
(lower edge floored at 0). Raw moments are tied to the correlation functions
through Stirling numbers of the second kind,

    T_1 = mu
    T_2 = mu^2 g2 + mu
    T_3 = mu^3 g3 + 3 mu^2 g2 + mu
    T_4 = mu^4 g4 + 6 mu^3 g3 + 7 mu^2 g2 + mu,

and truncation is handled by assuming at least half the mass sits at or
below ``n_cut``. This gives, for every raw moment ``k`` reachable from the
measured orders,

    S_k >= T_k / 2
    S_k <= T_k - (n_cut + 1) (T_{k-1} - S_{k-1})       (S_0 = sum p, T_0 = 1)

with ``S_k = sum_n p_n n**k`` and ``1/2 <= S_0 <= 1``. Orders that were not
measured contribute neither a variable nor moment rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BadOrderSet, BadTarget, InfeasibleConstraints, ValidationError
from .hbt_simulator import CorrelationMeasurement
from .lp import Constraint, LPProblem, solve_lp

DEFAULT_N_CUT = 25
DEFAULT_GAMMA = 7.0
#: Lower bound on the probability mass at or below n_cut.
MASS_FLOOR = 0.5
BOUNDED_PHOTON_NUMBERS = (0, 1, 2, 3)

# S(k, j): Stirling numbers of the second kind, n^k = sum_j S(k, j) n(n-1)...(n-j+1)
_STIRLING2 = {
    1: {1: 1},
    2: {1: 1, 2: 1},
    3: {1: 1, 2: 3, 3: 1},
    4: {1: 1, 2: 7, 3: 6, 4: 1},
}


def gaussian_tail_epsilon(gamma: float) -> float:
    """Two-sided probability that a Gaussian falls outside ``+-gamma`` sigma."""
    return math.erfc(gamma / math.sqrt(2.0))


@dataclass(frozen=True)
class CorrelationConstraints:
    measurements: tuple[CorrelationMeasurement, ...]
    mu: float
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        ms = tuple(sorted(self.measurements, key=lambda m: m.order))
        object.__setattr__(self, "measurements", ms)
        orders = tuple(m.order for m in ms)
        if orders not in ((2,), (2, 3), (2, 3, 4)):
            raise BadOrderSet(f"measured orders must be {{2}}, {{2,3}} or {{2,3,4}}, got {set(orders) or '{}'}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValidationError(f"mu must be positive, got {self.mu}")
        if not (self.gamma > 0):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(m.order for m in self.measurements)

    def interval(self, order: int) -> tuple[float, float]:
        for m in self.measurements:
            if m.order == order:
                return max(0.0, m.value - self.gamma * m.sigma), m.value + self.gamma * m.sigma
        raise KeyError(order)

    def truncated(self, orders: Iterable[int]) -> "CorrelationConstraints":
        keep = set(orders)
        return CorrelationConstraints(
            tuple(m for m in self.measurements if m.order in keep), self.mu, self.gamma
        )


def variable_layout(constraints: CorrelationConstraints, n_cut: int) -> dict[str, int]:
    """Column index of each LP variable: ``p0 .. p{n_cut}`` then ``g2``, ``g3``, ``g4``."""
    layout = {f"p{n}": n for n in range(n_cut + 1)}
    for k, order in enumerate(constraints.orders):
        layout[f"g{order}"] = n_cut + 1 + k
    return layout


def build_pn_bound_problem(
    constraints: CorrelationConstraints, n_cut: int, target_n: int, sense: str
) -> LPProblem:
    """LP whose optimum is the lower (``sense="min"``) or upper bound on ``p_target_n``."""
    if target_n not in BOUNDED_PHOTON_NUMBERS:
        raise BadTarget(f"bounds are produced for n in {BOUNDED_PHOTON_NUMBERS}, got {target_n}")
    if sense not in ("min", "max"):
        raise BadTarget(f"sense must be 'min' or 'max', got {sense!r}")
    if n_cut < 4:
        raise ValidationError("n_cut must be at least 4")
    mu = constraints.mu
    layout = variable_layout(constraints, n_cut)
    n_vars = len(layout)
    n = np.arange(n_cut + 1, dtype=float)
    penalty = n_cut + 1

    def moment_target(k: int) -> tuple[np.ndarray, float]:
        """T_k as (coefficients on the g variables, constant)."""
        coeffs = np.zeros(n_vars)
        if k == 0:
            return coeffs, 1.0
        const = 0.0
        for j, s in _STIRLING2[k].items():
            if j == 1:
                const += s * mu
            else:
                coeffs[layout[f"g{j}"]] += s * mu**j
        return coeffs, const

    def raw_moment(k: int) -> np.ndarray:
        row = np.zeros(n_vars)
        row[: n_cut + 1] = n**k
        return row

    rows: list[Constraint] = []
    mass = raw_moment(0)
    rows.append(Constraint(mass, "<=", 1.0))
    rows.append(Constraint(mass, ">=", MASS_FLOOR))
    for k in range(1, len(constraints.orders) + 2):
        t_coef, t_const = moment_target(k)
        # S_k - T_k/2 >= 0
        rows.append(Constraint(raw_moment(k) - MASS_FLOOR * t_coef, ">=", MASS_FLOOR * t_const))
        # S_k - T_k + (n_cut+1)(T_{k-1} - S_{k-1}) <= 0
        prev_coef, prev_const = moment_target(k - 1)
        upper = raw_moment(k) - t_coef + penalty * prev_coef - penalty * raw_moment(k - 1)
        rows.append(Constraint(upper, "<=", t_const - penalty * prev_const))

    bounds = [(0.0, 1.0)] * (n_cut + 1) + [constraints.interval(m) for m in constraints.orders]
    objective = np.zeros(n_vars)
    objective[target_n] = 1.0 if sense == "min" else -1.0
    return LPProblem(tuple(objective), tuple(rows), tuple(bounds))


@dataclass(frozen=True)
class ProbabilityBounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    mu: float
    gamma: float
    n_cut: int
    orders: tuple[int, ...]
    epsilon_per_constraint: float
    assumptions: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for n, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValidationError(f"invalid bounds for p_{n}: [{lo}, {hi}]")

    @property
    def epsilon_total(self) -> float:
        """Union bound over the measured constraints."""
        return len(self.orders) * self.epsilon_per_constraint

    def interval(self, n: int) -> tuple[float, float]:
        return self.lower[n], self.upper[n]

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "gamma": self.gamma,
            "n_cut": self.n_cut,
            "orders": list(self.orders),
            "bounds": {str(n): [self.lower[n], self.upper[n]] for n in range(len(self.lower))},
            "epsilon_total": self.epsilon_total,
        }

    def to_json(self, **extra) -> str:
        doc = self.to_dict()
        doc.update(extra)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ProbabilityBounds":
        keys = sorted(doc["bounds"], key=int)
        orders = tuple(doc["orders"])
        eps = doc["epsilon_total"] / len(orders) if orders else 0.0
        return cls(
            lower=tuple(float(doc["bounds"][k][0]) for k in keys),
            upper=tuple(float(doc["bounds"][k][1]) for k in keys),
            mu=float(doc["mu"]),
            gamma=float(doc["gamma"]),
            n_cut=int(doc["n_cut"]),
            orders=orders,
            epsilon_per_constraint=eps,
        )


def bound_photon_probabilities(
    constraints: CorrelationConstraints, n_cut: int = DEFAULT_N_CUT
) -> ProbabilityBounds:
    """Solve the min and max problems for p_0..p_3.

    Raises ``InfeasibleConstraints`` when no distribution with mean ``mu`` is
    compatible with the measured intervals, which signals a calibration problem.
    """
    lower, upper = [], []
    for target in BOUNDED_PHOTON_NUMBERS:
        ends = []
        for sense in ("min", "max"):
            sol = solve_lp(build_pn_bound_problem(constraints, n_cut, target, sense))
            if not sol.optimal:
                raise InfeasibleConstraints(
                    f"correlation constraints {constraints.orders} at mu={constraints.mu} "
                    f"admit no photon-number distribution (LP {sol.status})"
                )
            ends.append(float(min(1.0, max(0.0, sol.x[target]))))
        lo, hi = ends
        lower.append(min(lo, hi))
        upper.append(max(lo, hi))
    return ProbabilityBounds(
        lower=tuple(lower),
        upper=tuple(upper),
        mu=constraints.mu,
        gamma=constraints.gamma,
        n_cut=n_cut,
        orders=constraints.orders,
        epsilon_per_constraint=gaussian_tail_epsilon(constraints.gamma),
        assumptions={"mass_below_n_cut_at_least": MASS_FLOOR},
    )


def constraints_from_values(
    values: dict[int, tuple[float, float]], mu: float, gamma: float = DEFAULT_GAMMA,
    orders: Sequence[int] | None = None,
) -> CorrelationConstraints:
    """Convenience: ``{order: (g, sigma)}`` -> constraints, optionally keeping ``orders`` only."""
    orders = sorted(values) if orders is None else sorted(orders)
    missing = [m for m in orders if m not in values]
    if missing:
        raise BadOrderSet(f"no measurement for orders {missing}")
    return CorrelationConstraints(
        tuple(CorrelationMeasurement(m, *values[m]) for m in orders), mu, gamma
    )
