"""Kernels, point clouds, and the feature-space difference geometry.

Two sample clouds ``x`` and ``y`` of equal size ``n`` are turned into the
signed block Gram matrix::

    G = [ K(x, x)  -K(x, y) ]
        [ -K(y, x)  K(y, y) ]   (2n x 2n)

whose inverse factor ``U`` (``G^{-1} = U U^T``) maps RKHS coefficient vectors
``s`` to unit-ball coordinates ``omega = U^{-1} s``.  The pair difference
vectors ``M_ij = U^T M'_ij`` carry all the geometry downstream solvers need:
``<omega, M_ij>`` equals ``f(x_i) - f(y_j)`` for the RKHS function with
coefficients ``s = U omega``.

``M'_ij`` stacks ``(K(x_i, x_l) - K(y_j, x_l))_l`` over
``(K(y_j, y_l) - K(x_i, y_l))_l``, which is exactly row ``i`` plus row
``n + j`` of ``G``.  Assembly therefore stores only the two ``n x 2n`` factor
blocks and synthesizes any ``M_ij`` on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, PreconditionError

GAUSSIAN = "gaussian"
DOT_PRODUCT = "dot_product"

#: Gaussian bandwidth conventions: "half" is exp(-||x-y||^2 / (2 sigma^2)),
#: "plain" is exp(-||x-y||^2 / sigma^2).  Both appear in the literature; "half"
#: is the default.
CONVENTIONS = ("half", "plain")

# Positive-definiteness screen: smallest eigenvalue threshold and the one-shot
# diagonal jitter, both relative to the mean diagonal trace(G)/(2n).
PD_TOL_REL = 1e-10
PD_JITTER_REL = 1e-8


@dataclass(frozen=True)
class Kernel:
    """A positive-definite kernel, one of ``gaussian`` or ``dot_product``.

    For the gaussian kernel ``K(x, x) = 1`` so the boundedness constant is
    ``A = 1``; for the dot-product kernel ``K(x, x) = ||x||^2`` so ``A`` is the
    largest point norm over the support.
    """

    kind: str
    bandwidth: float | None = None
    convention: str = "half"

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, DOT_PRODUCT):
            raise PreconditionError(f"unknown kernel kind {self.kind!r}")
        if self.kind == GAUSSIAN:
            if self.bandwidth is None or not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise PreconditionError("gaussian kernel requires a positive bandwidth")
            if self.convention not in CONVENTIONS:
                raise PreconditionError(f"unknown bandwidth convention {self.convention!r}")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Gram block ``K(a_i, b_j)`` for row-stacked inputs ``a`` (m x d), ``b`` (k x d)."""
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise PreconditionError(
                f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
            )
        if self.kind == DOT_PRODUCT:
            return a @ b.T
        na = np.sum(a * a, axis=1)
        nb = np.sum(b * b, axis=1)
        sq = na[:, None] + nb[None, :] - 2.0 * (a @ b.T)
        # squared distances below the cancellation resolution are exactly zero
        # (guarantees K(x, x) == 1 for identical points)
        resolution = 8.0 * np.finfo(np.float64).eps * (na[:, None] + nb[None, :])
        sq[sq <= resolution] = 0.0
        denom = 2.0 * self.bandwidth**2 if self.convention == "half" else self.bandwidth**2
        return np.exp(-sq / denom)

    def bound(self, *clouds: "PointCloud") -> float:
        """Boundedness constant ``A`` with ``sqrt(K(x, x)) <= A`` on the given support."""
        if self.kind == GAUSSIAN:
            return 1.0
        if not clouds:
            raise PreconditionError("dot-product kernel bound needs at least one cloud")
        return float(max(np.linalg.norm(c.points, axis=1).max() for c in clouds))


def gaussian(bandwidth: float, convention: str = "half") -> Kernel:
    return Kernel(GAUSSIAN, bandwidth=float(bandwidth), convention=convention)


def dot_product() -> Kernel:
    return Kernel(DOT_PRODUCT)


def eval_kernel(kernel: Kernel, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate ``K(x, y)`` for single points ``x``, ``y``."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(kernel.gram(x, y)[0, 0])


@dataclass(frozen=True)
class PointCloud:
    """``n`` sample points in ``R^d`` with uniform weights ``1/n``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise PreconditionError("point cloud must be a nonempty n x d array")
        if not np.all(np.isfinite(pts)):
            raise PreconditionError("point cloud contains non-finite entries")
        object.__setattr__(self, "points", np.ascontiguousarray(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx: np.ndarray) -> "PointCloud":
        return PointCloud(self.points[np.asarray(idx, dtype=np.intp)])


def median_bandwidth(x: PointCloud, y: PointCloud) -> float:
    """Median of pairwise Euclidean distances over the pooled points.

    Pools the 2n points of both clouds and takes the median over all unordered
    pairs (a per-class variant is conceivable but not implemented).  Raises if
    every pairwise distance is zero.
    """
    pooled = np.vstack([x.points, y.points])
    m = pooled.shape[0]
    if m < 2:
        raise PreconditionError("median bandwidth needs at least two pooled points")
    sq = (
        np.sum(pooled * pooled, axis=1)[:, None]
        + np.sum(pooled * pooled, axis=1)[None, :]
        - 2.0 * (pooled @ pooled.T)
    )
    iu = np.triu_indices(m, k=1)
    med = float(np.median(np.sqrt(np.maximum(sq[iu], 0.0))))
    if med <= 0.0:
        raise PreconditionError("all points identical: median pairwise distance is zero")
    return med


def check_pd(g: np.ndarray, tol: float) -> bool:
    """True iff the symmetric matrix ``g`` has smallest eigenvalue > ``tol``."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise PreconditionError("check_pd expects a square matrix")
    if not np.allclose(g, g.T, atol=1e-10 * (1.0 + np.abs(g).max())):
        raise PreconditionError("check_pd expects a symmetric matrix")
    w = np.linalg.eigvalsh((g + g.T) / 2.0)
    return bool(w[0] > tol)


@dataclass(frozen=True)
class GramAssembly:
    """Factorized difference geometry of an (x, y) sample pair.

    Attributes
    ----------
    gram : (2n, 2n) ndarray
        The signed block Gram matrix built from kernel evaluations (no jitter).
    u : (2n, 2n) ndarray
        Factor with ``(gram + jitter*I)^{-1} = u @ u.T``, computed from the
        eigendecomposition ``U = V diag(lambda^{-1/2})``.
    m_x, m_y : (n, 2n) ndarrays
        Additive factors of the difference vectors: ``M_ij = m_x[i] + m_y[j]``.
    c_bound : float
        ``max_ij ||M_ij||^2``, the trace bound used by the solver schedules.
    jitter : float
        Diagonal jitter that was required for factorization (0.0 if none).
    """

    kernel: Kernel
    x: PointCloud
    y: PointCloud
    gram: np.ndarray
    u: np.ndarray
    m_x: np.ndarray
    m_y: np.ndarray
    c_bound: float
    jitter: float
    pair_sq: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.x.n

    def m(self, i: int, j: int) -> np.ndarray:
        """The transformed difference vector ``M_ij = U^T M'_ij`` (length 2n)."""
        return self.m_x[i] + self.m_y[j]

    def m_prime(self, i: int, j: int) -> np.ndarray:
        """The raw difference vector ``M'_ij`` of kernel evaluations (length 2n)."""
        return self.gram[i] + self.gram[self.n + j]

    def m_tensor(self) -> np.ndarray:
        """All ``M_ij`` as an (n, n, 2n) array; for small-n tests only."""
        return self.m_x[:, None, :] + self.m_y[None, :, :]

    def costs(self, s: np.ndarray) -> np.ndarray:
        """Cost matrix ``c_ij = M_ij^T S M_ij`` for a symmetric PSD ``S``.

        Uses ``M_ij = a_i + b_j`` to stay O(n * (2n)^2) instead of O(n^2 (2n)^2).
        """
        sa = self.m_x @ s
        sb = self.m_y @ s
        pa = np.einsum("ik,ik->i", sa, self.m_x)
        pb = np.einsum("jk,jk->j", sb, self.m_y)
        cross = sa @ self.m_y.T
        return pa[:, None] + pb[None, :] + 2.0 * cross

    def costs_rank1(self, omega: np.ndarray) -> np.ndarray:
        """Cost matrix for ``S = omega omega^T``: ``(M_ij^T omega)^2``."""
        p = self.m_x @ omega
        q = self.m_y @ omega
        return (p[:, None] + q[None, :]) ** 2

    def pair_norms_sq(self) -> np.ndarray:
        """``||M_ij||^2`` for every pair, as an n x n matrix."""
        return self.pair_sq


def assemble(kernel: Kernel, x: PointCloud, y: PointCloud) -> GramAssembly:
    """Build the Gram block matrix, its inverse factor, and the M geometry.

    Raises
    ------
    PreconditionError
        If the clouds have different sizes or dimensions.
    AssemblyError
        If the pooled points are not pairwise distinct, or the matrix remains
        numerically singular after a single diagonal jitter.
    """
    if x.n != y.n:
        raise PreconditionError(f"sample sizes differ: {x.n} vs {y.n}")
    if x.d != y.d:
        raise PreconditionError(f"dimensions differ: {x.d} vs {y.d}")
    n = x.n
    pooled = np.vstack([x.points, y.points])
    if np.unique(pooled, axis=0).shape[0] < 2 * n:
        raise AssemblyError(
            "pooled sample points are not pairwise distinct; the Gram block "
            "matrix is singular for duplicated points (jitter the data first)"
        )

    kxx = kernel.gram(x.points, x.points)
    kxy = kernel.gram(x.points, y.points)
    kyy = kernel.gram(y.points, y.points)
    gram = np.block([[kxx, -kxy], [-kxy.T, kyy]])
    gram = (gram + gram.T) / 2.0

    scale = np.trace(gram) / (2 * n)
    tol = PD_TOL_REL * scale
    w, v = np.linalg.eigh(gram)
    jitter = 0.0
    if w[0] <= tol:
        jitter = PD_JITTER_REL * scale
        w, v = np.linalg.eigh(gram + jitter * np.eye(2 * n))
        if w[0] <= tol:
            raise AssemblyError(
                "Gram block matrix is not positive definite even after one "
                "diagonal jitter; sample points must be pairwise distinct"
            )

    u = v * (1.0 / np.sqrt(w))[None, :]
    m_x = gram[:n, :] @ u
    m_y = gram[n:, :] @ u

    pa = np.einsum("ik,ik->i", m_x, m_x)
    pb = np.einsum("jk,jk->j", m_y, m_y)
    pair_sq = pa[:, None] + pb[None, :] + 2.0 * (m_x @ m_y.T)
    c_bound = float(pair_sq.max())

    return GramAssembly(
        kernel=kernel,
        x=x,
        y=y,
        gram=gram,
        u=u,
        m_x=m_x,
        m_y=m_y,
        c_bound=c_bound,
        jitter=jitter,
        pair_sq=pair_sq,
    )
