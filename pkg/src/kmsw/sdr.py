"""Semidefinite relaxation solver: inexact mirror ascent on the spectrahedron.

The relaxed problem maximizes

    F(S) = min_{pi in Gamma_n} sum_ij pi_ij <M_ij M_ij^T, S>

over unit-trace PSD matrices S of size 2n.  F is concave (a minimum of linear
functions); a supgradient at S is ``v(S) = sum_ij pi_ij M_ij M_ij^T`` built
from a near-optimal inner plan (Danskin).  Iterates follow the entropic mirror
geometry: ``S_{k+1} = exp(log S_k + gamma v(S_k)) / trace(...)``, and the
returned solution is the running average of the iterates, re-evaluated with
the exact inner solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import as_generator, substream
from .errors import PreconditionError
from .kernels import GramAssembly
from .ot import EXACT_THRESHOLD, solve_entropic, solve_exact

# Eigenvalues are clamped here before taking logs, keeping iterates in the
# positive-definite interior that the multiplicative update assumes.
_LOG_CLAMP = 1e-300


def is_spectrahedron_point(s: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ``s`` is symmetric, unit trace (to tol), with eigmin >= -tol."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        return False
    if np.abs(s - s.T).max() > tol * (1.0 + np.abs(s).max()):
        return False
    if abs(np.trace(s) - 1.0) > tol:
        return False
    return bool(np.linalg.eigvalsh((s + s.T) / 2.0)[0] >= -tol)


@dataclass(frozen=True)
class SolverConfig:
    """Mirror-ascent schedule; defaults follow the worst-case analysis.

    Given a target accuracy ``delta`` and the trace bound ``C = max||M_ij||^2``,
    the schedule is ``max_iters = ceil(16 C^2 log(2n) / delta^2)``,
    ``eps_inner = delta/4`` and ``step_size = log(2n) / (C sqrt(T))``.  Early
    stopping treats ``max_iters`` as a ceiling: the run ends once the exact
    objective of the running average improves by less than ``delta/10`` over
    ``ceil(max_iters/20)`` consecutive checks.
    """

    delta: float
    max_iters: int
    step_size: float
    eps_inner: float
    seed: int = 0
    exact_threshold: int = EXACT_THRESHOLD
    early_stop: bool = True
    check_interval: int = 1
    patience: int | None = None
    restart_base: int = 32

    def __post_init__(self):
        if not (self.delta > 0 and self.max_iters >= 1 and self.step_size > 0):
            raise PreconditionError("delta, max_iters, step_size must be positive")
        if not (self.eps_inner > 0):
            raise PreconditionError("eps_inner must be positive")

    @property
    def effective_patience(self) -> int:
        return self.patience if self.patience is not None else max(1, math.ceil(self.max_iters / 20))

    @classmethod
    def from_assembly(
        cls,
        ga: GramAssembly,
        delta: float | None = None,
        seed: int = 0,
        **overrides,
    ) -> "SolverConfig":
        """Schedule derived from the instance's trace bound.

        ``delta`` defaults to 5% of the objective scale ``C``; pass an absolute
        value to certify a specific accuracy.
        """
        c = max(ga.c_bound, 1e-12)
        if delta is None:
            delta = 0.05 * c
        two_n = 2 * ga.n
        t = max(1, math.ceil(16.0 * c * c * math.log(two_n) / delta**2))
        if "max_iters" in overrides:
            t = overrides.pop("max_iters")
        gamma = overrides.pop("step_size", math.log(two_n) / (c * math.sqrt(t)))
        eps_inner = overrides.pop("eps_inner", delta / 4.0)
        return cls(
            delta=float(delta),
            max_iters=int(t),
            step_size=float(gamma),
            eps_inner=float(eps_inner),
            seed=int(seed),
            **overrides,
        )

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class SdrSolution:
    """Averaged iterate, its exactly evaluated objective, and the run trace."""

    s_avg: np.ndarray
    value: float
    trace_log: np.ndarray  # columns: iteration, inexact value, step norm
    iterations: int
    early_stopped: bool
    config: SolverConfig


def objective_F(
    s: np.ndarray,
    ga: GramAssembly,
    exact: bool = True,
    *,
    eps_inner: float | None = None,
    rng=None,
) -> tuple[float, np.ndarray]:
    """Inner OT value and plan at ``S``: cost entries are ``M_ij^T S M_ij``.

    ``exact=True`` solves the assignment problem; otherwise the entropic
    solver is run to ``eps_inner``.
    """
    cost = ga.costs(s)
    if exact:
        plan, _, value = solve_exact(cost)
        return value, plan
    if eps_inner is None or eps_inner <= 0:
        raise PreconditionError("inexact objective needs a positive eps_inner")
    plan = solve_entropic(cost, eps_inner, rng=rng)
    return float(np.sum(plan * cost)), plan


def plan_supgradient(plan: np.ndarray, ga: GramAssembly) -> np.ndarray:
    """``v = sum_ij pi_ij M_ij M_ij^T`` without materializing the M tensor.

    With ``M_ij = a_i + b_j`` the sum splits into marginal-weighted Gram terms
    plus a symmetrized cross term, all O(n (2n)^2).
    """
    r = plan.sum(axis=1)
    c = plan.sum(axis=0)
    v = (ga.m_x.T * r) @ ga.m_x + (ga.m_y.T * c) @ ga.m_y
    cross = ga.m_x.T @ (plan @ ga.m_y)
    v += cross + cross.T
    return (v + v.T) / 2.0


def supgradient(
    s: np.ndarray,
    ga: GramAssembly,
    eps_inner: float,
    *,
    exact: bool | None = None,
    exact_threshold: int = EXACT_THRESHOLD,
    rng=None,
) -> np.ndarray:
    """Supgradient of F at S from an ``eps_inner``-optimal inner plan.

    Symmetric PSD with trace bounded by ``max ||M_ij||^2``.
    """
    if exact is None:
        exact = ga.n <= exact_threshold
    _, plan = objective_F(s, ga, exact=exact, eps_inner=eps_inner, rng=rng)
    return plan_supgradient(plan, ga)


def mirror_step(s: np.ndarray, v: np.ndarray, gamma: float) -> np.ndarray:
    """Entropic mirror-ascent update ``exp(log S + gamma v)``, trace-normalized.

    Matrix log/exp via symmetric eigendecompositions; eigenvalues are clamped
    away from zero before the log, and the exponent is max-shifted so the
    normalization is a stable spectral softmax.
    """
    if gamma <= 0:
        raise PreconditionError("step size must be positive")
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.abs(v - v.T).max() > 1e-8 * (1.0 + np.abs(v).max()):
        raise PreconditionError("supgradient must be symmetric")
    w, q = np.linalg.eigh((s + s.T) / 2.0)
    log_s = (q * np.log(np.maximum(w, _LOG_CLAMP))) @ q.T
    h = log_s + gamma * (v + v.T) / 2.0
    h = (h + h.T) / 2.0
    theta, qh = np.linalg.eigh(h)
    theta = theta - theta.max()
    p = np.exp(theta)
    p /= p.sum()
    out = (qh * p) @ qh.T
    return (out + out.T) / 2.0


def solve_sdr(ga: GramAssembly, cfg: SolverConfig) -> SdrSolution:
    """Inexact mirror ascent from ``S_1 = I/(2n)`` with warm-restart averaging.

    The iterate average is restarted on a geometric schedule (each restart is
    a fresh run warm-started at the current iterate), which removes the O(1/k)
    transient a single uniform average drags along.  Every averaged iterate is
    exactly evaluated at the checks; the best one seen is returned, so the
    reported value is always an exact inner objective regardless of which
    inner oracle drove the iteration.
    """
    two_n = 2 * ga.n
    rng = substream(cfg.seed, "solver")
    use_exact = ga.n <= cfg.exact_threshold

    s = np.eye(two_n) / two_n
    s_avg = s.copy()
    avg_len = 1
    next_restart = max(2, cfg.restart_base)
    rows = []
    avg_checks: list[float] = []
    iter_checks: list[float] = []
    best_avg = -np.inf
    best_s = s_avg.copy()
    early = False
    iterations = cfg.max_iters
    window = cfg.effective_patience

    for k in range(1, cfg.max_iters + 1):
        value_k, plan = objective_F(
            s, ga, exact=use_exact, eps_inner=cfg.eps_inner, rng=rng
        )

        step_norm = 0.0
        if k < cfg.max_iters:
            v = plan_supgradient(plan, ga)
            s_next = mirror_step(s, v, cfg.step_size)
            step_norm = float(np.linalg.norm(s_next - s))
        rows.append((float(k), value_k, step_norm))

        if cfg.early_stop and k % cfg.check_interval == 0:
            avg_val, _ = objective_F(s_avg, ga, exact=True)
            if avg_val > best_avg:
                best_avg = avg_val
                best_s = s_avg.copy()
            # Prefix maxima make both plateau signals monotone.
            avg_checks.append(best_avg)
            iter_checks.append(max(value_k, iter_checks[-1]) if iter_checks else value_k)
            # Plateau: neither the best average nor the best iterate improved
            # by delta/10 over the last `window` consecutive checks (the
            # iterate signal guards against stopping mid-climb while an
            # average still lags its transient).
            if len(avg_checks) > window:
                if (
                    avg_checks[-1] - avg_checks[-1 - window] < cfg.delta / 10.0
                    and iter_checks[-1] - iter_checks[-1 - window] < cfg.delta / 10.0
                ):
                    iterations = k
                    early = True
                    break

        if k < cfg.max_iters:
            s = s_next
            if k == next_restart:
                s_avg = s.copy()
                avg_len = 1
                next_restart *= 2
            else:
                avg_len += 1
                s_avg += (s - s_avg) / avg_len

    final_val, _ = objective_F(s_avg, ga, exact=True)
    if final_val > best_avg:
        best_avg = final_val
        best_s = s_avg
    return SdrSolution(
        s_avg=best_s,
        value=best_avg,
        trace_log=np.asarray(rows, dtype=np.float64),
        iterations=iterations,
        early_stopped=early,
        config=cfg,
    )


def random_rank1_lower_bound(
    ga: GramAssembly, samples: int, rng=None, batch: int = 256
) -> float:
    """Best objective over ``samples`` random unit directions (rank-1 feasible S).

    A Monte-Carlo lower bound on the relaxation optimum, used by the sandwich
    checks.  Each direction costs one exact inner solve.
    """
    rng = as_generator(rng)
    two_n = 2 * ga.n
    best = -np.inf
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        w = rng.standard_normal((b, two_n))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        p = ga.m_x @ w.T  # (n, b)
        q = ga.m_y @ w.T
        for t in range(b):
            cost = (p[:, t][:, None] + q[:, t][None, :]) ** 2
            _, _, val = solve_exact(cost)
            if val > best:
                best = val
        done += b
    return float(best)
