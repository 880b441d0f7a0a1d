"""Seeded synthetic dataset generators.

Every generator is a pure function of ``(spec, seed)`` through the named
``datagen`` PRNG substream, so identical specs reproduce bitwise-identical
clouds.  The circulant family builds the adversarial cost structure whose
inner OT collapses to a minimum over shifted directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._rng import substream
from .errors import PreconditionError
from .kernels import PointCloud

KINDS = ("circle", "gauss_cov_shift", "gauss_mixture", "two_point_1d", "circulant_adversarial")

_DEFAULTS: dict[str, dict[str, float]] = {
    # Radii/noise are implementation choices; only the two-ring structure is
    # prescribed.
    "circle": {"r_in": 1.0, "r_out": 2.0, "noise": 0.1},
    "gauss_cov_shift": {"rho": 0.0},
    "gauss_mixture": {"rho": 0.0},
    "two_point_1d": {"jitter": 0.0},
    "circulant_adversarial": {},
}

_DEFAULT_DIM = {"circle": 2, "gauss_cov_shift": 200, "gauss_mixture": 40, "two_point_1d": 1}


@dataclass(frozen=True)
class DatasetSpec:
    """A dataset kind plus its sizes, seed, and kind-specific parameters."""

    kind: str
    n: int
    d: int | None = None
    seed: int = 0
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown dataset kind {self.kind!r}; choices: {KINDS}")
        if self.n < 1:
            raise PreconditionError("n must be >= 1")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise PreconditionError(f"unknown params for {self.kind}: {sorted(unknown)}")
        if self.d is None:
            object.__setattr__(self, "d", _DEFAULT_DIM.get(self.kind, 2))
        if self.kind == "circle" and self.d != 2:
            raise PreconditionError("circle data is 2-dimensional")
        if self.kind == "two_point_1d" and self.d != 1:
            raise PreconditionError("two_point_1d data is 1-dimensional")
        p = self.param_values()
        if self.kind == "circle" and (p["r_in"] <= 0 or p["r_out"] <= 0):
            raise PreconditionError("radii must be positive")
        if self.kind in ("gauss_cov_shift", "gauss_mixture") and p["rho"] < 0:
            raise PreconditionError("rho must be nonnegative")

    def param_values(self) -> dict[str, float]:
        merged = dict(_DEFAULTS[self.kind])
        merged.update(self.params)
        return merged

    def to_json(self) -> str:
        payload: dict[str, Any] = {
            "kind": self.kind,
            "n": self.n,
            "d": self.d,
            "seed": self.seed,
            "params": self.param_values(),
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetSpec":
        obj = json.loads(text)
        return cls(
            kind=obj["kind"],
            n=int(obj["n"]),
            d=int(obj["d"]) if obj.get("d") is not None else None,
            seed=int(obj.get("seed", 0)),
            params={k: float(v) for k, v in obj.get("params", {}).items()},
        )


def _ring(rng: np.random.Generator, n: int, radius: float, noise: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return pts + noise * rng.standard_normal((n, 2))


def _cov_shift(rng: np.random.Generator, n: int, d: int, rho: float) -> np.ndarray:
    # Cov = I + rho * ones: a standard normal plus sqrt(rho) * shared scalar.
    z = rng.standard_normal((n, d))
    if rho > 0:
        z += np.sqrt(rho) * rng.standard_normal((n, 1))
    return z


def _mixture(rng: np.random.Generator, n: int, d: int, rho: float) -> np.ndarray:
    comp = rng.integers(0, 2, size=n)
    z = _cov_shift(rng, n, d, rho)
    return z + 0.5 * comp[:, None]


def generate(spec: DatasetSpec) -> tuple[PointCloud, PointCloud]:
    """Draw the (x, y) cloud pair for ``spec``, reproducibly.

    circle: x on the inner ring, y on the outer, both with isotropic noise.
    gauss_cov_shift: x ~ N(0, I); y ~ N(0, I + rho * ones).
    gauss_mixture: balanced mixture of N(0, .) and N(0.5*1, .); rho shifts the
        component covariances of y only (rho = 0 gives identical laws).
    two_point_1d: i.i.d. fair draws from {0, 1}, optional additive jitter.
    circulant_adversarial: two independent standard-normal vector families,
        raw inputs for :func:`circulant_instance`.
    """
    rng = substream(spec.seed, "datagen")
    n, d = spec.n, spec.d
    p = spec.param_values()
    if spec.kind == "circle":
        x = _ring(rng, n, p["r_in"], p["noise"])
        y = _ring(rng, n, p["r_out"], p["noise"])
    elif spec.kind == "gauss_cov_shift":
        x = _cov_shift(rng, n, d, 0.0)
        y = _cov_shift(rng, n, d, p["rho"])
    elif spec.kind == "gauss_mixture":
        x = _mixture(rng, n, d, 0.0)
        y = _mixture(rng, n, d, p["rho"])
    elif spec.kind == "two_point_1d":
        x = rng.integers(0, 2, size=(n, 1)).astype(np.float64)
        y = rng.integers(0, 2, size=(n, 1)).astype(np.float64)
        if p["jitter"] > 0:
            x = x + p["jitter"] * rng.standard_normal((n, 1))
            y = y + p["jitter"] * rng.standard_normal((n, 1))
    else:  # circulant_adversarial
        x = rng.standard_normal((n, d))
        y = rng.standard_normal((n, d))
    return PointCloud(x), PointCloud(y)


def circulant_instance(a_vectors: np.ndarray) -> np.ndarray:
    """Circulant vector family: row i is row 1 shifted right by i - 1.

    Returns the (n, n, d) array ``M[i, j] = A[(j - i) mod n]``, so the induced
    costs ``(M[i, j] @ w)**2`` form a circulant matrix whose optimal transport
    value is ``min_i (A_i @ w)**2`` for every direction ``w``.
    """
    a = np.asarray(a_vectors, dtype=np.float64)
    if a.ndim != 2:
        raise PreconditionError("need a list of equal-length vectors (n x d array)")
    n = a.shape[0]
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return a[(j - i) % n]


def circulant_costs(a_vectors: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Cost matrix ``(M[i,j]^T omega)^2`` of the circulant family."""
    m = circulant_instance(a_vectors)
    return (m @ np.asarray(omega, dtype=np.float64)) ** 2
