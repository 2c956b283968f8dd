"""Independent reference computations shared by the test modules."""

import itertools

import numpy as np

from photoncert.lp import Constraint, LPProblem


def vertex_enumeration(problem: LPProblem, tol: float = 1e-9):
    """Brute-force optimum of a box-bounded LP: best feasible basic point.

    Every candidate vertex is the solution of n linearly independent active
    rows taken from the constraint rows and the box faces.
    """
    n = problem.n_vars
    rows, rhs = [], []
    for c in problem.constraints:
        rows.append(c.coeffs)
        rhs.append(c.rhs)
    for j, (lo, hi) in enumerate(problem.bounds):
        e = np.zeros(n)
        e[j] = 1.0
        rows += [e, e]
        rhs += [lo, hi]
    rows, rhs = np.array(rows, dtype=float), np.array(rhs)
    combos = np.array(list(itertools.combinations(range(len(rows)), n)))
    mats = rows[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-9
    points = np.linalg.solve(mats[ok], rhs[combos[ok]][..., None])[..., 0]
    c = np.array(problem.objective)
    best = None
    for x in points:
        if problem.max_violation(x) <= tol:
            v = float(c @ x)
            best = v if best is None else min(best, v)
    return best


def random_lp(rng, n_max=5, m_max=6, feasible_bias=0.85):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    lo = rng.uniform(-2, 1, n)
    hi = lo + rng.uniform(0.1, 3, n)
    x0 = rng.uniform(lo, hi)
    anchored = rng.random() < feasible_bias
    cons = []
    for _ in range(m):
        a = rng.uniform(-1, 1, n)
        rel = str(rng.choice(["<=", ">=", "="], p=[0.45, 0.45, 0.1]))
        if anchored:
            slack = 0.0 if rel == "=" else rng.uniform(0, 0.5)
            b = a @ x0 + (slack if rel == "<=" else -slack)
        else:
            b = rng.uniform(-2, 2)
        cons.append(Constraint(a, rel, b))
    return LPProblem(rng.uniform(-1, 1, n), cons, tuple(zip(lo, hi)))


def beale_problem():
    # classic instance on which textbook Dantzig pivoting cycles
    c = (-0.75, 20.0, -0.5, 6.0)
    cons = (
        Constraint((0.25, -8.0, -1.0, 9.0), "<=", 0.0),
        Constraint((0.5, -12.0, -0.5, 3.0), "<=", 0.0),
        Constraint((0.0, 0.0, 1.0, 0.0), "<=", 1.0),
    )
    return LPProblem(c, cons)
