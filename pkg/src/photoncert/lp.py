"""Dense two-phase simplex for the small linear programs used by the bounds.

Problems are tiny (tens of variables, a few dozen rows), so the solver favours
determinism and robustness over speed:

* every variable is shifted/reflected onto ``u >= 0`` and finite upper bounds
  become explicit rows;
* rows are equilibrated to unit max-norm before pivoting;
* pivots follow Bland's smallest-index rule, which cannot cycle;
* the final point and the dual multipliers are recomputed from the optimal
  basis with a direct linear solve rather than read off the drifting tableau.

Only minimisation is supported; maximise by negating the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

FEAS_TOL = 1e-8
OPT_TOL = 1e-9
_PIVOT_TOL = 1e-11
_RELATIONS = ("<=", "=", ">=")


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[float, ...]
    relation: str
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))
        object.__setattr__(self, "rhs", float(self.rhs))
        if self.relation not in _RELATIONS:
            raise ValidationError(f"relation must be one of {_RELATIONS}, got {self.relation!r}")


@dataclass(frozen=True)
class LPProblem:
    """minimise ``objective . x`` subject to ``constraints`` and per-variable boxes.

    ``bounds`` defaults to ``[0, inf)`` for every variable; use ``-math.inf`` /
    ``math.inf`` for missing sides.
    """

    objective: tuple[float, ...]
    constraints: tuple[Constraint, ...] = ()
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        obj = tuple(float(c) for c in self.objective)
        object.__setattr__(self, "objective", obj)
        cons = tuple(
            c if isinstance(c, Constraint) else Constraint(*c) for c in self.constraints
        )
        object.__setattr__(self, "constraints", cons)
        n = len(obj)
        if n == 0:
            raise ValidationError("LP needs at least one variable")
        bounds = self.bounds
        if bounds is None:
            bounds = ((0.0, math.inf),) * n
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != n:
            raise ValidationError(f"{len(bounds)} variable bounds for {n} variables")
        for j, (lo, hi) in enumerate(bounds):
            if lo > hi or lo == math.inf or hi == -math.inf or math.isnan(lo) or math.isnan(hi):
                raise ValidationError(f"variable {j} has an empty box [{lo}, {hi}]")
        for i, c in enumerate(cons):
            if len(c.coeffs) != n:
                raise ValidationError(f"constraint {i} has {len(c.coeffs)} coefficients, expected {n}")
            if not all(math.isfinite(a) for a in c.coeffs) or not math.isfinite(c.rhs):
                raise ValidationError(f"constraint {i} has non-finite data")

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.constraints:
            return np.zeros((0, self.n_vars)), np.zeros(0)
        return (
            np.array([c.coeffs for c in self.constraints]),
            np.array([c.rhs for c in self.constraints]),
        )

    def max_violation(self, x: Sequence[float]) -> float:
        """Largest absolute violation of any row or box at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for c in self.constraints:
            lhs = float(np.dot(c.coeffs, x))
            if c.relation == "<=":
                worst = max(worst, lhs - c.rhs)
            elif c.relation == ">=":
                worst = max(worst, c.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - c.rhs))
        for xj, (lo, hi) in zip(x, self.bounds):
            worst = max(worst, lo - xj, xj - hi)
        return worst


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None = None
    x: np.ndarray | None = field(default=None, compare=False)
    duals: np.ndarray | None = field(default=None, compare=False)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class IterationLimit(RuntimeError):
    pass


def lagrangian_bound(problem: LPProblem, duals: Sequence[float]) -> float:
    """Lower bound on the optimum certified by row multipliers ``duals``.

    Multipliers must be sign-feasible (>= 0 on ``>=`` rows, <= 0 on ``<=``
    rows); the box constraints are handled exactly by minimising the reduced
    objective over the box. Returns ``-inf`` if the box is unbounded in an
    improving direction.
    """
    y = np.asarray(duals, dtype=float)
    A, b = problem.matrix()
    reduced = np.asarray(problem.objective) - A.T @ y
    total = float(b @ y)
    for d, (lo, hi) in zip(reduced, problem.bounds):
        if d > 0:
            total += d * lo
        elif d < 0:
            total += d * hi
        if math.isnan(total) or total == -math.inf:
            return -math.inf
    return total


class _StandardForm:
    """``min c.u  s.t.  A u (rel) b, u >= 0`` with ``x = offset + T u``."""

    def __init__(self, problem: LPProblem):
        n = problem.n_vars
        cols = []  # (original var, sign)
        offset = np.zeros(n)
        bound_rows = []  # (column index, width)
        for j, (lo, hi) in enumerate(problem.bounds):
            if math.isfinite(lo):
                offset[j] = lo
                cols.append((j, 1.0))
                if math.isfinite(hi):
                    bound_rows.append((len(cols) - 1, hi - lo))
            elif math.isfinite(hi):
                offset[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        T = np.zeros((n, len(cols)))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        self.T, self.offset = T, offset
        A, b = problem.matrix()
        rel = [c.relation for c in problem.constraints]
        A_u = A @ T
        b_u = b - A @ offset
        extra_A = np.zeros((len(bound_rows), len(cols)))
        for r, (k, width) in enumerate(bound_rows):
            extra_A[r, k] = 1.0
        self.n_general = len(rel)
        self.A = np.vstack([A_u, extra_A])
        self.b = np.concatenate([b_u, [w for _, w in bound_rows]])
        self.rel = rel + ["<="] * len(bound_rows)
        self.c = np.asarray(problem.objective) @ T
        self.const = float(np.dot(problem.objective, offset))


def solve_lp(problem: LPProblem, max_iter: int = 50_000) -> LPSolution:
    """Global optimum of ``problem`` by two-phase simplex with Bland's rule."""
    sf = _StandardForm(problem)
    A, b, rel = sf.A.copy(), sf.b.copy(), list(sf.rel)
    m, n = A.shape

    # Equilibrate and orient rows so that b >= 0; remember the row multiplier.
    row_scale = np.ones(m)
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        amax = np.max(np.abs(A[i])) if n else 0.0
        if amax == 0.0:
            ok = {"<=": b[i] >= -FEAS_TOL, ">=": b[i] <= FEAS_TOL, "=": abs(b[i]) <= FEAS_TOL}[rel[i]]
            if not ok:
                return LPSolution("infeasible")
            keep[i] = False
            continue
        s = 1.0 / amax
        if b[i] < 0:
            s = -s
            rel[i] = {"<=": ">=", ">=": "<=", "=": "="}[rel[i]]
        A[i] *= s
        b[i] *= s
        row_scale[i] = s
    rows = np.flatnonzero(keep)
    A, b = A[rows], b[rows]
    rel = [rel[i] for i in rows]
    m = len(rows)

    # Columns: structural | slack/surplus | artificial
    slack_cols, art_rows = [], []
    for i, r in enumerate(rel):
        if r != "=":
            slack_cols.append((i, 1.0 if r == "<=" else -1.0))
        if r != "<=":
            art_rows.append(i)
    n_s, n_a = len(slack_cols), len(art_rows)
    N = n + n_s + n_a
    full = np.zeros((m, N))
    full[:, :n] = A
    basis = np.empty(m, dtype=np.int64)
    for k, (i, s) in enumerate(slack_cols):
        full[i, n + k] = s
        if s > 0:
            basis[i] = n + k
    for k, i in enumerate(art_rows):
        full[i, n + n_s + k] = 1.0
        basis[i] = n + n_s + k

    tab = np.hstack([full, b[:, None]])
    iterations = 0

    def run(cost: np.ndarray, allowed: np.ndarray) -> str:
        nonlocal iterations
        while True:
            cb = cost[basis]
            reduced = cost - cb @ tab[:, :-1]
            candidates = np.flatnonzero((reduced < -OPT_TOL) & allowed)
            if candidates.size == 0:
                return "optimal"
            q = int(candidates[0])  # Bland: lowest index
            col = tab[:, q]
            pos = np.flatnonzero(col > _PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = tab[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            p = int(ties[np.argmin(basis[ties])])  # Bland: lowest basic index
            tab[p] /= tab[p, q]
            others = np.arange(m) != p
            tab[others] -= np.outer(tab[others, q], tab[p])
            basis[p] = q
            iterations += 1
            if iterations > max_iter:
                raise IterationLimit(f"simplex exceeded {max_iter} pivots")

    # Phase I
    if n_a:
        cost1 = np.zeros(N)
        cost1[n + n_s:] = 1.0
        run(cost1, np.ones(N, dtype=bool))
        infeas = float(tab[basis >= n + n_s, -1].sum())
        if infeas > FEAS_TOL:
            return LPSolution("infeasible", iterations=iterations)
        # Drive zero-level artificials out of the basis; drop redundant rows.
        drop = []
        for p in range(m):
            if basis[p] >= n + n_s:
                row = tab[p, : n + n_s]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size == 0:
                    drop.append(p)
                    continue
                q = int(nz[0])
                tab[p] /= tab[p, q]
                others = np.arange(m) != p
                tab[others] -= np.outer(tab[others, q], tab[p])
                basis[p] = q
        if drop:
            active = np.setdiff1d(np.arange(m), drop)
            tab, basis = tab[active], basis[active]
        else:
            active = np.arange(m)
    else:
        active = np.arange(m)

    # Phase II over structural + slack columns only
    cost2 = np.zeros(N)
    cost2[:n] = sf.c
    allowed = np.zeros(N, dtype=bool)
    allowed[: n + n_s] = True
    status = run(cost2, allowed)
    if status == "unbounded":
        return LPSolution("unbounded", iterations=iterations)

    # Recompute primal and dual from the optimal basis on clean data.
    u_basic, y_active = _refine(full[active], b[active], basis, cost2, tab)
    u = np.zeros(N)
    u[basis] = u_basic
    u = np.clip(u[:n], 0.0, None)
    x = sf.offset + sf.T @ u
    x = np.array([min(max(xj, lo), hi) for xj, (lo, hi) in zip(x, problem.bounds)])
    value = float(np.dot(problem.objective, x))

    # scaled row k <-> standard-form row rows[k]; multiplier picks up the row scale
    y_std = np.zeros(sf.A.shape[0])
    y_std[rows[active]] = y_active * row_scale[rows[active]]
    y = y_std[: sf.n_general]
    # A rounding-level wrong-signed multiplier would void the certificate.
    for i, c in enumerate(problem.constraints):
        if c.relation == ">=" and y[i] < 0:
            y[i] = 0.0
        elif c.relation == "<=" and y[i] > 0:
            y[i] = 0.0
    return LPSolution("optimal", value=value, x=x, duals=y, iterations=iterations)


def _refine(full, b, basis, cost, tab):
    """Basic values ``B^-1 b`` and multipliers ``B^-T c_B`` from the original rows."""
    B = full[:, basis]
    try:
        if np.linalg.cond(B) > 1e12:
            raise np.linalg.LinAlgError
        u_basic = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        u_basic = tab[:, -1].copy()
        y = np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]
    return u_basic, y
