"""Entropic-dual stochastic OT solver with Katyusha momentum, plus rounding.

The inner problem ``min_{pi in Gamma_n} <pi, c>`` is smoothed with entropic
regularization ``eta`` and attacked through its semi-dual

    G(v) = (1/n) sum_i h_i(v),
    h_i(v) = eta * logsumexp((v - c_i - eta) / eta) - mean(v) + eta (1 + log n),

whose component gradients are ``softmax((v - c_i)/eta) - 1/n``.  An epoch runs
``T = n`` variance-reduced inner steps against a snapshot full gradient; plan
candidates recovered from sampled dual iterates are averaged with weights
``1/tau_1,t`` and finally rounded onto the polytope.

The epoch loop itself lives in a compiled extension when available
(``kmsw.ot._katyusha``), with a numpy twin as fallback; set ``KMSW_BACKEND``
to ``cython`` or ``numpy`` to force one.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .._rng import as_generator
from ..errors import PreconditionError, SolverError

_FORCED = os.environ.get("KMSW_BACKEND", "auto").lower()
if _FORCED not in ("auto", "cython", "numpy"):
    raise SolverError(f"KMSW_BACKEND must be auto|cython|numpy, got {_FORCED!r}")

if _FORCED in ("auto", "cython"):
    try:
        from . import _katyusha as _impl

        BACKEND = "cython"
    except ImportError:
        if _FORCED == "cython":
            raise SolverError("KMSW_BACKEND=cython but the extension is not built")
        from . import _katyusha_np as _impl

        BACKEND = "numpy"
else:
    from . import _katyusha_np as _impl

    BACKEND = "numpy"

#: Outer-iteration constant in T_out = ceil(kappa * ||C||_inf * sqrt(log n) / eps);
#: the theory fixes only the order, the constant is a tuning choice.
DEFAULT_KAPPA = 4.0


def dual_to_plan(v: np.ndarray, cost: np.ndarray, eta: float) -> np.ndarray:
    """Primal plan recovered from dual variables: rows are scaled softmaxes.

    ``pi(v)_{i,:} = (1/n) softmax((v - c_i)/eta)``; each row sums to exactly
    1/n by construction.  Log-sum-exp shifted, so large cost scales are safe.
    """
    if eta <= 0:
        raise PreconditionError("eta must be positive")
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    zmat = (np.asarray(v, dtype=np.float64)[None, :] - cost) / eta
    zmat = zmat - zmat.max(axis=1, keepdims=True)
    np.exp(zmat, out=zmat)
    zmat /= zmat.sum(axis=1, keepdims=True) * n
    return zmat


def round_to_polytope(pi: np.ndarray) -> np.ndarray:
    """Round a nonnegative matrix onto the uniform transport polytope.

    Row-scale by min(1, 1/(n*rowsum)), column-scale likewise, then add the
    rank-one correction ``e_r e_c^T / ||e_r||_1``.  If the input is already
    feasible the correction is zero and the matrix is returned unchanged.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise PreconditionError("plan must be a square matrix")
    if pi.min() < 0:
        raise PreconditionError("plan must be nonnegative")
    n = pi.shape[0]
    target = 1.0 / n
    r = pi.sum(axis=1)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.minimum(1.0, target / np.where(r > 0, r, np.inf))
    pi1 = pi * x[:, None]
    c = pi1.sum(axis=0)
    with np.errstate(divide="ignore", over="ignore"):
        ycol = np.minimum(1.0, target / np.where(c > 0, c, np.inf))
    pi2 = pi1 * ycol[None, :]
    err_r = target - pi2.sum(axis=1)
    err_c = target - pi2.sum(axis=0)
    total = err_r.sum()
    if total <= 0.0:
        return pi2
    return pi2 + np.outer(err_r, err_c) / total


def solve_entropic(
    cost: np.ndarray,
    eps: float,
    *,
    rng: np.random.Generator | int | None = None,
    kappa: float = DEFAULT_KAPPA,
    t_out: int | None = None,
    early_exit: bool = True,
    return_info: bool = False,
):
    """Approximate the uniform-marginal OT to additive accuracy ``eps``.

    Parameters
    ----------
    cost : (n, n) ndarray
        Cost matrix, n >= 2.
    eps : float
        Target suboptimality; sets eta = eps/(8 log n) and the outer budget
        T_out = ceil(kappa ||C||_inf sqrt(log n) / eps).
    rng : Generator | int | None
        Source for the index sampling (seedable, owned per call).
    early_exit : bool
        Stop when the dual objective moves by less than eps/4 over an epoch.

    Returns
    -------
    pi : (n, n) ndarray in the polytope (rounded), or ``(pi, info)`` when
    ``return_info`` is set.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.ndim != 2 or cost.shape[1] != n:
        raise PreconditionError("cost matrix must be square")
    if n < 2:
        raise PreconditionError("entropic solver needs n >= 2")
    if not (eps > 0):
        raise PreconditionError("eps must be positive")
    rng = as_generator(rng)

    logn = math.log(n)
    eta = eps / (8.0 * logn)
    c_max = float(cost.max())
    eps_prime = eps / (6.0 * c_max) if c_max > 0 else math.inf  # recorded, unused
    t_inner = n
    if t_out is None:
        t_out = max(1, math.ceil(kappa * max(c_max, 1e-300) * math.sqrt(logn) / eps))

    lam_tilde = np.zeros(n)
    y = np.zeros(n)
    z = np.zeros(n)
    plan_acc = np.zeros((n, n))
    weight_acc = 0.0
    epochs = 0
    gap = math.inf
    # With the certificate enabled the budget may extend past t_out while the
    # gap stays above eps, up to a hard cap.
    budget = 10 * t_out if early_exit else t_out

    for t in range(budget):
        tau1 = 2.0 / (t + 4.0)
        gamma_t = eta / (9.0 * tau1)

        zmat = (lam_tilde[None, :] - cost) / eta
        emat = np.exp(zmat - zmat.max(axis=1)[:, None])
        grads_tilde = emat / emat.sum(axis=1)[:, None] - 1.0 / n
        u = grads_tilde.mean(axis=0)

        if early_exit and weight_acc > 0.0:
            # Duality-gap certificate for the unregularized problem: the
            # rounded average plan is primal feasible, and (f, g) with
            # g = lam_tilde, f_i = min_j (c_ij - g_j) is dual feasible.
            primal = float(np.sum(round_to_polytope(plan_acc / weight_acc) * cost))
            dual = float(np.min(cost - lam_tilde[None, :], axis=1).mean() + lam_tilde.mean())
            gap = primal - dual
            if gap <= 0.75 * eps or (t >= t_out and gap <= eps):
                break

        idx = rng.integers(0, n, size=t_inner, dtype=np.int64)
        jstar = int(rng.integers(t_inner))
        lam_hat = np.empty(n)
        y_sum = np.zeros(n)
        _impl.run_epoch(
            cost, lam_tilde, grads_tilde, u, y, z, eta, tau1, gamma_t, idx, jstar, lam_hat, y_sum
        )
        lam_tilde = y_sum / t_inner
        plan_acc += dual_to_plan(lam_hat, cost, eta) / tau1
        weight_acc += 1.0 / tau1
        epochs += 1

    pi = round_to_polytope(plan_acc / weight_acc)
    if not return_info:
        return pi
    info = {
        "backend": BACKEND,
        "epochs": epochs,
        "t_out": t_out,
        "t_inner": t_inner,
        "eta": eta,
        "eps_prime": eps_prime,
        "gap_certificate": gap,
        "early_exit": epochs < t_out,
        "extended": epochs > t_out,
    }
    return pi, info
