"""Independent brute-force references.

Monte Carlo volume and interaction estimators with standard errors, direct
Gauss-Jacobi integration of the zonal eigenvalue integral, and a harmonic
dimension count by linear algebra.  Nothing here depends on the closed forms
being validated; that independence is the point of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .density import Density
from .errors import ConvergenceError, ParameterError
from .geometry import BallPair, unit_sphere_area
from .spectral import SpectralParams, gegenbauer_ratio_sequence

__all__ = [
    "OracleEstimate",
    "mc_intersection_volume",
    "mc_interaction",
    "funk_hecke_direct",
    "harmonic_dimension_brute",
]


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    std_error: float  # 0 for deterministic oracles
    samples_or_nodes: int
    seed: int | None = None


def mc_intersection_volume(pair: BallPair, r: float, n_samples: int = 10**6,
                           seed: int = 0, chunk: int = 10**6) -> OracleEstimate:
    """Rejection sampling of |B_R(0) ∩ B_Rb(r e1)| in the boxes' intersection."""
    if r < 0:
        raise ParameterError("center distance must be nonnegative")
    R, Rb = pair.radius_e, pair.radius_b
    N = pair.dim
    if r >= R + Rb:
        return OracleEstimate(0.0, 0.0, n_samples, seed)
    lo = np.full(N, -min(R, Rb))
    hi = np.full(N, min(R, Rb))
    lo[0], hi[0] = max(-R, r - Rb), min(R, r + Rb)
    box_volume = float(np.prod(hi - lo))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB0)))
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        pts = rng.uniform(lo, hi, size=(m, N))
        inside_e = np.einsum("ij,ij->i", pts, pts) <= R * R
        pts[:, 0] -= r
        inside_b = np.einsum("ij,ij->i", pts, pts) <= Rb * Rb
        hits += int(np.count_nonzero(inside_e & inside_b))
        done += m
    p = hits / n_samples
    value = box_volume * p
    std = box_volume * math.sqrt(max(p * (1.0 - p), 0.0) / n_samples)
    return OracleEstimate(value, std, n_samples, seed)


def _sample_points(rho: Density, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sample points from a grid density (cell-weighted, radius continuous)."""
    grid = rho.grid
    probs = (grid.directions.weights[:, None] * grid.radial.moments[None, :]) * rho.values
    flat = probs.ravel()
    cdf = np.cumsum(flat)
    total = cdf[-1]
    picks = np.searchsorted(cdf, rng.uniform(0.0, total, size=count), side="right")
    picks = np.minimum(picks, flat.size - 1)
    dir_idx, cell_idx = np.unravel_index(picks, probs.shape)
    a = grid.radial.edges[cell_idx]
    b = grid.radial.edges[cell_idx + 1]
    u = rng.uniform(0.0, 1.0, size=count)
    radii = (a**grid.dim + u * (b**grid.dim - a**grid.dim)) ** (1.0 / grid.dim)
    if grid.dim == 2:
        # continuous angle within each angular cell
        base = np.arctan2(grid.directions.vectors[dir_idx, 1], grid.directions.vectors[dir_idx, 0])
        width = 2.0 * math.pi / grid.directions.count
        ang = base + rng.uniform(-0.5, 0.5, size=count) * width
        return radii[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return radii[:, None] * grid.directions.vectors[dir_idx]


def mc_interaction(g: Density, h: Density, pair: BallPair, n_samples: int = 10**6,
                   seed: int = 0) -> OracleEstimate:
    """Pair-sampling estimate of I[g, h]: X ~ g, Y ~ h, hit when |X-Y| <= Rb."""
    if g.dim != h.dim or g.dim != pair.dim:
        raise ParameterError("dimension mismatch")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x1A)))
    if g.mass == 0.0 or h.mass == 0.0:
        return OracleEstimate(0.0, 0.0, n_samples, seed)
    X = _sample_points(g, n_samples, rng)
    Y = _sample_points(h, n_samples, rng)
    d = X - Y
    hits = int(np.count_nonzero(np.einsum("ij,ij->i", d, d) <= pair.radius_b**2))
    p = hits / n_samples
    scale = 0.5 * g.mass * h.mass
    value = scale * p
    std = scale * math.sqrt(max(p * (1.0 - p), 0.0) / n_samples)
    return OracleEstimate(value, std, n_samples, seed)


def funk_hecke_direct(params: SpectralParams, ell: int, nodes: int = 256,
                      rel_tol: float = 1e-11) -> OracleEstimate:
    """Direct Gauss-Jacobi integration of the zonal eigenvalue integral in t.

    The weight (1-t)^((N-3)/2) at the endpoint t = 1 is absorbed into the
    Jacobi rule; the doubled-node estimate must agree or the oracle refuses.
    """
    N, a = params.dim, params.a
    alpha = (N - 3) / 2.0
    s2 = unit_sphere_area(N - 1)

    def estimate(n: int) -> float:
        u, w = roots_jacobi(n, alpha, 0.0)
        t = 1.0 - a + 0.5 * a * (1.0 + u)
        ratios = gegenbauer_ratio_sequence((N - 2) / 2.0, ell, t)[ell]
        g = ratios * (1.0 + t) ** alpha
        return 0.5 * s2 * (0.5 * a) ** (alpha + 1.0) * float(w @ g)

    coarse, fine = estimate(nodes), estimate(2 * nodes)
    # the 3e-11 floor is the float64 plateau of the degree-50 recurrence
    scale = 0.5 * s2 * max(a, 2.0 - a)
    if abs(fine - coarse) > max(rel_tol * abs(fine), 3e-11 * scale):
        raise ConvergenceError(
            f"direct eigenvalue quadrature unstable at {nodes}/{2*nodes} nodes",
            achieved=abs(fine - coarse), best=fine)
    return OracleEstimate(fine, 0.0, 2 * nodes)


def harmonic_dimension_brute(dim: int, ell: int) -> int:
    """Dimension of degree-ell harmonics by linear algebra on monomials.

    Builds the Laplacian as a matrix from degree-ell monomials to degree
    (ell-2) monomials and counts its kernel.  Exponential in ell; intended
    for small degrees as an independent check.
    """
    if dim < 1 or ell < 0:
        raise ParameterError("need dim >= 1 and ell >= 0")

    def monomials(total: int, n: int):
        if n == 1:
            yield (total,)
            return
        for k in range(total + 1):
            for rest in monomials(total - k, n - 1):
                yield (k,) + rest

    high = list(monomials(ell, dim))
    if ell < 2:
        return len(high)
    low = {m: i for i, m in enumerate(monomials(ell - 2, dim))}
    lap = np.zeros((len(low), len(high)))
    for j, expo in enumerate(high):
        for i in range(dim):
            if expo[i] >= 2:
                dropped = tuple(e - 2 if k == i else e for k, e in enumerate(expo))
                lap[low[dropped], j] = expo[i] * (expo[i] - 1)
    return len(high) - int(np.linalg.matrix_rank(lap))
