"""Spherical-polar quadrature grids.

A grid is a direction set on S^(N-1) (unit vectors with positive weights
summing to the sphere area) times a radial partition of [0, r_max] into
cells.  All radial integrals use the exact cell moments of r^(N-1) dr, so
radially piecewise-constant data (indicators with per-direction chord
intervals) integrates exactly.

Direction sets: uniform angles for N = 2; for N >= 3 a product rule with
symmetric Gauss-Jacobi nodes in each polar cosine and a uniform azimuth.
Odd monomials vanish by node symmetry and even ones are polynomial in the
cosines, so the product rule integrates spherical polynomials exactly up to
degree ~ 2*resolution - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import ParameterError
from .geometry import unit_sphere_area

__all__ = ["DirectionSet", "RadialGrid", "SphericalGrid", "direction_set", "default_grid", "ipow"]


def ipow(x, n: int):
    """x**n for small positive integer n, as a multiply chain (fast for arrays)."""
    if n == 1:
        return x
    if n == 2:
        return x * x
    if n == 3:
        return x * x * x
    if n == 4:
        sq = x * x
        return sq * sq
    return x**n


@dataclass(frozen=True)
class DirectionSet:
    dim: int
    vectors: np.ndarray  # (P, dim), unit rows
    weights: np.ndarray  # (P,), positive, sums to |S^(dim-1)|

    def __post_init__(self):
        self.vectors.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _product_directions(dim: int, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    # polar angles theta_1..theta_(dim-2) in cosine variables, uniform azimuth
    n_az = 2 * resolution
    phis = 2.0 * math.pi * np.arange(n_az) / n_az
    coords = [np.cos(phis), np.sin(phis)]
    weights = np.full(n_az, 2.0 * math.pi / n_az)
    for k in range(dim - 2, 0, -1):
        # weight sin^(dim-1-k) theta_k -> Jacobi exponent (dim-k-2)/2 in u = cos theta_k
        expo = (dim - k - 2) / 2.0
        u, wu = roots_jacobi(resolution, expo, expo)
        s = np.sqrt(1.0 - u * u)
        new_coords = [np.repeat(u, weights.size)]
        for c in coords:
            new_coords.append(np.concatenate([si * c for si in s]))
        coords = new_coords
        weights = np.concatenate([wi * weights for wi in wu])
    vectors = np.stack(coords, axis=1)
    return vectors, weights


def direction_set(dim: int, resolution: int) -> DirectionSet:
    """Construct a direction quadrature set.

    resolution: number of angles for dim = 2; Gauss nodes per polar angle for
    dim >= 3 (azimuth gets 2*resolution).  dim = 1 ignores resolution.
    """
    if dim < 1:
        raise ParameterError(f"dimension must be positive, got {dim}")
    if dim == 1:
        vectors = np.array([[1.0], [-1.0]])
        weights = np.array([1.0, 1.0])
    elif dim == 2:
        if resolution < 4:
            raise ParameterError("need at least 4 angles on the circle")
        angles = 2.0 * math.pi * np.arange(resolution) / resolution
        vectors = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        weights = np.full(resolution, 2.0 * math.pi / resolution)
    else:
        if resolution < 2:
            raise ParameterError("need at least 2 polar nodes per angle")
        vectors, weights = _product_directions(dim, resolution)
    weights = weights * (unit_sphere_area(dim) / weights.sum())
    return DirectionSet(dim, np.ascontiguousarray(vectors), weights)


@dataclass(frozen=True)
class RadialGrid:
    """Partition of [0, r_max] into cells with exact moments of r^(N-1) dr."""

    dim: int
    edges: np.ndarray  # (J+1,), increasing, edges[0] == 0

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise ParameterError("radial edges must increase from 0")
        object.__setattr__(self, "edges", e)
        e.setflags(write=False)

    @classmethod
    def uniform(cls, dim: int, r_max: float, cells: int) -> "RadialGrid":
        return cls(dim, np.linspace(0.0, r_max, cells + 1))

    @property
    def cells(self) -> int:
        return self.edges.size - 1

    @property
    def r_max(self) -> float:
        return float(self.edges[-1])

    @property
    def uniform_step(self) -> float | None:
        """Cell width if the partition is uniform, else None."""
        steps = np.diff(self.edges)
        h = float(steps[0])
        return h if np.allclose(steps, h, rtol=1e-12, atol=0.0) else None

    def _cum(self, s):
        return ipow(s, self.dim) / self.dim

    @property
    def moments(self) -> np.ndarray:
        """Exact integrals of r^(N-1) over each cell."""
        c = self._cum(self.edges)
        return np.diff(c)

    @property
    def centroids(self) -> np.ndarray:
        """r^(N-1)-weighted centroid of each cell (exact)."""
        a, b = self.edges[:-1], self.edges[1:]
        num = (np.power(b, self.dim + 1) - np.power(a, self.dim + 1)) / (self.dim + 1)
        return num / self.moments

    def interval_moments(self, lo, hi) -> np.ndarray:
        """Exact moment of each cell intersected with [lo, hi].

        lo, hi broadcast against a trailing cell axis: inputs of shape (...,)
        produce output of shape (..., cells).
        """
        lo = np.asarray(lo, dtype=float)[..., None]
        hi = np.asarray(hi, dtype=float)[..., None]
        a, b = self.edges[:-1], self.edges[1:]
        lo_c = np.clip(lo, a, b)
        hi_c = np.clip(hi, a, b)
        return np.maximum(self._cum(hi_c) - self._cum(lo_c), 0.0)

    def interval_fractions(self, lo, hi) -> np.ndarray:
        """Fraction of each cell moment covered by [lo, hi] (values in [0, 1])."""
        return self.interval_moments(lo, hi) / self.moments

    def locate(self, s) -> np.ndarray:
        """Cell index containing radius s (clipped to valid cells)."""
        idx = np.searchsorted(self.edges, s, side="right") - 1
        return np.clip(idx, 0, self.cells - 1)


@dataclass(frozen=True)
class SphericalGrid:
    directions: DirectionSet
    radial: RadialGrid

    def __post_init__(self):
        if self.directions.dim != self.radial.dim:
            raise ParameterError("direction set and radial grid disagree on dimension")

    @property
    def dim(self) -> int:
        return self.directions.dim

    @property
    def shape(self) -> tuple[int, int]:
        return (self.directions.count, self.radial.cells)

    def integrate(self, values: np.ndarray) -> float:
        """Integral over R^N of node data given as (directions, cells) averages."""
        return float(self.directions.weights @ values @ self.radial.moments)


# grid profiles: (direction resolution, radial cells, r_max); cell counts keep
# r = 1 exactly on a cell edge
_DEFAULT_PROFILES = {1: (0, 768, 3.0), 2: (256, 768, 3.0), 3: (16, 384, 3.0), 4: (8, 264, 3.0)}
_AUDIT_PROFILES = {1: (0, 288, 2.25), 2: (128, 288, 2.25), 3: (8, 216, 2.25), 4: (6, 144, 2.25)}


@lru_cache(maxsize=None)
def default_grid(dim: int, profile: str = "default") -> SphericalGrid:
    """Grid profile for density work; 'audit' is the cheaper corpus profile."""
    table = _AUDIT_PROFILES if profile == "audit" else _DEFAULT_PROFILES
    res, cells, r_max = table.get(dim, table[max(table)])
    return SphericalGrid(direction_set(dim, res), RadialGrid.uniform(dim, r_max, cells))
