# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython epoch kernel for the stochastic entropic-dual solver.

Mirrors kmsw.ot._katyusha_np.run_epoch; see that module for the contract.
"""

from libc.math cimport exp

import numpy as np
cimport numpy as cnp

cnp.import_array()


def run_epoch(
    double[:, ::1] cost,
    double[::1] lam_tilde,
    double[:, ::1] grads_tilde,
    double[::1] u,
    double[::1] y,
    double[::1] z,
    double eta,
    double tau1,
    double gamma_t,
    long long[::1] idx,
    Py_ssize_t jstar,
    double[::1] lam_hat,
    double[::1] y_sum,
):
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t t_inner = idx.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double inv_n = 1.0 / n
    cdef double half_minus_tau = 0.5 - tau1
    cdef double half_gamma = 0.5 * gamma_t
    cdef double eta_ninth = eta / 9.0
    cdef double m, s, lk, h

    lam_buf = np.empty(n, dtype=np.float64)
    p_buf = np.empty(n, dtype=np.float64)
    cdef double[::1] lam = lam_buf
    cdef double[::1] p = p_buf

    with nogil:
        for j in range(t_inner):
            i = idx[j]
            m = -1e308
            for k in range(n):
                lk = tau1 * z[k] + 0.5 * lam_tilde[k] + half_minus_tau * y[k]
                lam[k] = lk
                lk -= cost[i, k]
                p[k] = lk
                if lk > m:
                    m = lk
            s = 0.0
            for k in range(n):
                p[k] = exp((p[k] - m) / eta)
                s += p[k]
            for k in range(n):
                h = u[k] + (p[k] / s - inv_n) - grads_tilde[i, k]
                z[k] -= half_gamma * h
                y[k] = lam[k] - eta_ninth * h
                y_sum[k] += y[k]
            if j == jstar:
                for k in range(n):
                    lam_hat[k] = lam[k]
