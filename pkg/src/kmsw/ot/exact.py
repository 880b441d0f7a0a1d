"""Exact optimal transport over the uniform-marginal polytope.

With both marginals uniform at 1/n, Birkhoff's theorem guarantees a
permutation optimum, so the problem is the linear assignment problem.  The
assignment comes from scipy's Hungarian/Jonker-Volgenant implementation; dual
potentials are recovered from the optimal permutation by a vectorized
Bellman-Ford pass (feasible potentials exist exactly when the matching is
optimal, because an improving cycle would be a negative cycle).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import PreconditionError


def _duals_from_permutation(cost: np.ndarray, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Feasible dual potentials (f, g) with f_i + g_{sigma(i)} = c_{i,sigma(i)}.

    Works on the column-permuted matrix cp[i, j] = c[i, sigma(j)], where the
    identity matching is optimal; potentials g' must satisfy
    g'_j - g'_i <= cp[i, j] - cp[i, i], a shortest-path system with no negative
    cycles.  Solved by repeated relaxation from an all-zero source.
    """
    n = cost.shape[0]
    cp = cost[:, sigma]
    w = cp - np.diag(cp)[:, None]
    g = np.zeros(n)
    for _ in range(n):
        cand = np.min(g[:, None] + w, axis=0)
        new = np.minimum(g, cand)
        if np.array_equal(new, g):
            break
        g = new
    f = np.diag(cp) - g
    g_out = np.empty(n)
    g_out[sigma] = g
    return f, g_out


@dataclass
class Assignment:
    """A permutation optimum of the assignment problem plus its duals.

    ``permutation[i]`` is the column matched to row ``i``.  Dual potentials are
    computed lazily (they are only needed by the rank-reduction binding step
    and by tests, not on the solver hot path).
    """

    permutation: np.ndarray
    cost: np.ndarray = field(repr=False)

    @cached_property
    def _duals(self) -> tuple[np.ndarray, np.ndarray]:
        return _duals_from_permutation(self.cost, self.permutation)

    @property
    def dual_f(self) -> np.ndarray:
        return self._duals[0]

    @property
    def dual_g(self) -> np.ndarray:
        return self._duals[1]

    @property
    def dual_value(self) -> float:
        """(1/n) sum(f + g); equals the primal optimum exactly."""
        f, g = self._duals
        return float((f.sum() + g.sum()) / len(f))


def solve_exact(cost: np.ndarray) -> tuple[np.ndarray, Assignment, float]:
    """Minimize ``sum_ij pi_ij c_ij`` over the uniform transport polytope.

    Returns the optimal deterministic plan (1/n on the matched pairs), the
    assignment with lazily computed duals, and the optimal value.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise PreconditionError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise PreconditionError("cost matrix contains non-finite entries")
    n = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    sigma = np.empty(n, dtype=np.intp)
    sigma[rows] = cols
    plan = np.zeros((n, n))
    plan[np.arange(n), sigma] = 1.0 / n
    value = float(cost[np.arange(n), sigma].sum() / n)
    return plan, Assignment(permutation=sigma, cost=cost), value


def brute_force_value(cost: np.ndarray) -> float:
    """Factorial enumeration oracle; only sensible for n <= ~8."""
    from itertools import permutations

    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    idx = np.arange(n)
    best = np.inf
    for perm in permutations(range(n)):
        v = cost[idx, list(perm)].sum() / n
        if v < best:
            best = v
    return float(best)


def is_feasible_plan(pi: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ``pi`` is nonnegative with all row and column sums 1/n."""
    pi = np.asarray(pi, dtype=np.float64)
    n = pi.shape[0]
    if pi.ndim != 2 or pi.shape[1] != n:
        return False
    return bool(
        pi.min() >= -tol
        and np.abs(pi.sum(axis=1) - 1.0 / n).max() <= tol
        and np.abs(pi.sum(axis=0) - 1.0 / n).max() <= tol
    )
