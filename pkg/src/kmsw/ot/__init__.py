"""Inner optimal-transport solvers over the uniform-marginal polytope."""

from __future__ import annotations

import numpy as np

from .entropic import BACKEND, dual_to_plan, round_to_polytope, solve_entropic
from .exact import Assignment, brute_force_value, is_feasible_plan, solve_exact

#: Problems up to this size use the exact assignment solver; larger ones the
#: entropic stochastic solver.
EXACT_THRESHOLD = 200


def solve_plan(
    cost: np.ndarray,
    *,
    eps: float | None = None,
    exact_threshold: int = EXACT_THRESHOLD,
    rng=None,
) -> tuple[np.ndarray, float]:
    """Switch-rule front end: exact for n <= threshold, entropic above.

    Returns ``(plan, value)`` where ``value = <plan, cost>``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if n <= exact_threshold or eps is None:
        plan, _, value = solve_exact(cost)
        return plan, value
    plan = solve_entropic(cost, eps, rng=rng)
    return plan, float(np.sum(plan * cost))


__all__ = [
    "Assignment",
    "BACKEND",
    "EXACT_THRESHOLD",
    "brute_force_value",
    "dual_to_plan",
    "is_feasible_plan",
    "round_to_polytope",
    "solve_entropic",
    "solve_exact",
    "solve_plan",
]
