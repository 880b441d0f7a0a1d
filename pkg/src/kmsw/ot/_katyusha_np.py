"""Pure-numpy epoch kernel for the stochastic entropic-dual solver.

Semantics are identical to the Cython extension ``kmsw.ot._katyusha``; this
module is the import-time fallback and the reference the extension is tested
against.  The loop is inherently sequential in k, so only the per-iteration
O(n) work is vectorized.
"""

from __future__ import annotations

import numpy as np


def run_epoch(
    cost: np.ndarray,
    lam_tilde: np.ndarray,
    grads_tilde: np.ndarray,
    u: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    eta: float,
    tau1: float,
    gamma_t: float,
    idx: np.ndarray,
    jstar: int,
    lam_hat: np.ndarray,
    y_sum: np.ndarray,
) -> None:
    """Run one variance-reduced epoch of ``len(idx)`` inner iterations.

    Mutates ``y`` and ``z`` in place, accumulates the post-update iterates into
    ``y_sum``, and records the candidate iterate at inner step ``jstar`` into
    ``lam_hat``.
    """
    n = cost.shape[0]
    inv_n = 1.0 / n
    half_minus_tau = 0.5 - tau1
    for j, i in enumerate(idx):
        lam = tau1 * z + 0.5 * lam_tilde + half_minus_tau * y
        t = lam - cost[i]
        t -= t.max()
        np.exp(t / eta, out=t)
        t /= t.sum()
        h = u + (t - inv_n) - grads_tilde[i]
        z -= (0.5 * gamma_t) * h
        y[:] = lam - (eta / 9.0) * h
        y_sum += y
        if j == jstar:
            lam_hat[:] = lam
