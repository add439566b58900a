"""Spectral analysis of the spherical interaction Hessian.

The quadratic form

    Q[F] = 1/2 ∬ F(w) 1_{|w - w'| < Rb/R} F(w') dw dw'      (w, w' on S^(N-1))

has a zonal kernel: the indicator depends only on t = w . w' through the
threshold t > 1 - a with a = Rb^2 / (2 R^2).  It is therefore diagonal on
spherical harmonics, with the degree-l eigenvalue given by a weighted
Gegenbauer integral over [1-a, 1].  This module evaluates those eigenvalues
in closed form and by quadrature, certifies the spectral gap constant
A < 1/2 together with its finite enumeration cutoff n0, and evaluates Q
directly on direction grids for property tests.

Gegenbauer conventions: C_0 = 1 for every order; for order 0 (N = 2) the
Chebyshev limit normalization with C_n(1) = 2/n for n >= 1 is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gammaln

from .errors import ConsistencyError, ConvergenceError, ParameterError
from .geometry import unit_sphere_area
from .grids import DirectionSet, direction_set

__all__ = [
    "SpectralParams",
    "Spectrum",
    "GapReport",
    "gegenbauer",
    "gegenbauer_ratio",
    "gegenbauer_ratio_sequence",
    "eigenvalue_closed_form",
    "eigenvalue_quadrature",
    "eigenvalues_quadrature",
    "harmonic_dimension",
    "gap_constant",
    "compute_spectrum",
    "HessianForm",
    "hessian_form_apply",
]


# ---------------------------------------------------------------------------
# Gegenbauer polynomials
# ---------------------------------------------------------------------------

def gegenbauer(alpha: float, n: int, t):
    """Evaluate C_n^(alpha)(t) by the three-term recurrence.

    alpha >= 0 and integer n >= 0; t scalar or array in [-1, 1].  The
    alpha = 0 case uses the Chebyshev limit C_n^(0) = (2/n) T_n for n >= 1.
    """
    if alpha < 0:
        raise ParameterError(f"order must be nonnegative, got {alpha}")
    if n < 0:
        raise ParameterError(f"degree must be nonnegative, got {n}")
    t = np.asarray(t, dtype=float)
    ones = np.ones_like(t)
    if n == 0:
        return ones if ones.shape else 1.0
    if alpha == 0:
        prev, cur = ones, t.copy()
        for _ in range(2, n + 1):
            prev, cur = cur, 2.0 * t * cur - prev
        out = (2.0 / n) * cur
        return out if out.shape else float(out)
    prev, cur = ones, 2.0 * alpha * t
    for k in range(2, n + 1):
        prev, cur = cur, (2.0 * (k + alpha - 1.0) * t * cur - (k + 2.0 * alpha - 2.0) * prev) / k
    return cur if cur.shape else float(cur)


def gegenbauer_ratio_sequence(alpha: float, n_max: int, t) -> np.ndarray:
    """All normalized values C_n^(alpha)(t) / C_n^(alpha)(1) for n = 0..n_max.

    The recurrence runs directly on the normalized sequence (bounded by 1 in
    magnitude on [-1, 1]), so it never overflows however large n gets.
    Output shape: (n_max + 1,) + shape(t).
    """
    if n_max < 0:
        raise ParameterError("n_max must be nonnegative")
    t = np.asarray(t, dtype=float)
    out = np.empty((n_max + 1,) + t.shape, dtype=float)
    out[0] = 1.0
    if n_max == 0:
        return out
    out[1] = t
    if alpha == 0:
        # T_n(t) / T_n(1) = T_n(t)
        for k in range(2, n_max + 1):
            out[k] = 2.0 * t * out[k - 1] - out[k - 2]
        return out
    for k in range(2, n_max + 1):
        r_k = (k + 2.0 * alpha - 1.0) / k
        r_km1 = (k - 1.0 + 2.0 * alpha - 1.0) / (k - 1.0)
        out[k] = (2.0 * (k + alpha - 1.0) * t * out[k - 1]
                  - (k + 2.0 * alpha - 2.0) * out[k - 2] / r_km1) / (k * r_k)
    return out


def gegenbauer_ratio(alpha: float, n: int, t):
    """C_n^(alpha)(t) / C_n^(alpha)(1), overflow-free for large n."""
    seq = gegenbauer_ratio_sequence(alpha, n, t)
    out = seq[n]
    return out if np.ndim(out) else float(out)


def gegenbauer_at_one(alpha: float, n: int) -> float:
    """C_n^(alpha)(1): binomial form for alpha > 0, 2/n (n >= 1) for alpha = 0."""
    if n == 0:
        return 1.0
    if alpha == 0:
        return 2.0 / n
    return math.exp(gammaln(n + 2.0 * alpha) - gammaln(n + 1.0) - gammaln(2.0 * alpha))


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralParams:
    """Dimension N >= 2, kernel parameter a in (0, 2), truncation degree."""

    dim: int
    a: float
    ell_max: int = 200

    def __post_init__(self):
        if self.dim < 2:
            raise ParameterError(f"spectral analysis requires dimension >= 2, got {self.dim}")
        if not (0.0 < self.a < 2.0):
            raise ParameterError(f"kernel parameter a must lie in (0, 2), got {self.a}")
        if self.ell_max < 1:
            raise ParameterError("ell_max must be at least 1")


def _cos_moment_tail(dim: int, x: float) -> float:
    """Integral of (1 - t^2)^((N-3)/2) over [x, 1] for x in [-1, 1]."""
    beta_idx = (dim - 1) / 2.0
    half = 0.5 * math.exp(gammaln(0.5) + gammaln(beta_idx) - gammaln(0.5 + beta_idx))
    inc = float(betainc(0.5, beta_idx, min(x * x, 1.0)))
    return half * (1.0 - inc) if x >= 0 else half * (1.0 + inc)


def eigenvalue_closed_form(params: SpectralParams, ell: int) -> float:
    """Closed-form eigenvalue of the zonal Hessian form on degree-ell harmonics.

    Degree 0 integrates the weight directly (incomplete beta); degree >= 1
    uses the normalized Gegenbauer ratio at 1 - a times the sine-power factor.
    """
    if ell < 0:
        raise ParameterError("degree must be nonnegative")
    N, a = params.dim, params.a
    s2 = unit_sphere_area(N - 1)
    x = 1.0 - a
    if ell == 0:
        return 0.5 * s2 * _cos_moment_tail(N, x)
    ratio = gegenbauer_ratio(N / 2.0, ell - 1, x)
    return s2 / (2.0 * (N - 1)) * ratio * (1.0 - x * x) ** ((N - 1) / 2.0)


def _leggauss_cached(n: int, _cache={}):
    if n not in _cache:
        _cache[n] = np.polynomial.legendre.leggauss(n)
    return _cache[n]


def eigenvalues_quadrature(params: SpectralParams, ells, rel_tol: float = 1e-12,
                           max_nodes: int = 8192) -> np.ndarray:
    """Quadrature oracle for eigenvalues at all requested degrees at once.

    Substituting t = cos(psi) turns the Gegenbauer integral into a smooth
    integral over [0, arccos(1-a)] for every N >= 2 (this removes the
    endpoint singularity of the weight in dimension 2).  Gauss-Legendre with
    doubled node counts runs until every requested degree is converged.
    """
    ells = np.asarray(ells, dtype=int)
    if np.any(ells < 0):
        raise ParameterError("degrees must be nonnegative")
    N, a = params.dim, params.a
    alpha = (N - 2) / 2.0
    psi_max = math.acos(1.0 - a)
    n_max = int(ells.max())
    s2 = unit_sphere_area(N - 1)

    def estimate(nodes: int) -> np.ndarray:
        u, w = _leggauss_cached(nodes)
        psi = 0.5 * psi_max * (u + 1.0)
        wts = 0.5 * psi_max * w * np.sin(psi) ** (N - 2)
        ratios = gegenbauer_ratio_sequence(alpha, n_max, np.cos(psi))
        return 0.5 * s2 * (ratios[ells] @ wts)

    nodes = 64
    while nodes < max(n_max, 48):
        nodes *= 2
    prev = estimate(nodes)
    # |integrand| <= 1, so scale bounds |I| exactly; the 2e-14 floor absorbs
    # the roundoff plateau of the recurrence-plus-dot-product evaluation
    scale = 0.5 * s2 * psi_max
    while nodes < max_nodes:
        nodes *= 2
        cur = estimate(nodes)
        err = np.abs(cur - prev)
        if np.all(err <= np.maximum(rel_tol * np.abs(cur), 2e-14 * scale)):
            return cur
        prev = cur
    raise ConvergenceError(
        f"eigenvalue quadrature did not converge at {max_nodes} nodes",
        achieved=float(np.max(np.abs(cur - prev))),
        best=cur,
    )


def eigenvalue_quadrature(params: SpectralParams, ell: int, rel_tol: float = 1e-12) -> float:
    """Adaptive quadrature of the zonal eigenvalue integral for one degree."""
    return float(eigenvalues_quadrature(params, [ell], rel_tol=rel_tol)[0])


def harmonic_dimension(dim: int, ell: int) -> int:
    """Dimension of the space of degree-ell spherical harmonics on S^(dim-1)."""
    if dim < 2 or ell < 0:
        raise ParameterError("need dim >= 2 and ell >= 0")
    if ell == 0:
        return 1
    num = (2 * ell + dim - 2) * math.comb(ell + dim - 2, ell)
    assert num % (ell + dim - 2) == 0
    return num // (ell + dim - 2)


# ---------------------------------------------------------------------------
# Gap constant and spectrum assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    gap_A: float
    cutoff_n0: float
    max_ratio: float
    max_ratio_degree: int
    enumerated_degree: int
    hs_total: float
    hs_partial: float
    rank_bound_ok: bool


def gap_constant(params: SpectralParams) -> tuple[float, float, GapReport]:
    """Certify the spectral gap constant A < 1/2 and the cutoff n0.

    2A = max(1/2, max over degrees >= 2 of lambda_l / lambda_1), where the
    enumeration runs by degree until the Hilbert-Schmidt residual forces all
    remaining eigenvalues below lambda_1 / 2 in absolute value.  Degrees 0
    and 1 are excluded: the form is only applied to profiles orthogonal to
    constants and linear coordinates.  Raises ConsistencyError if any
    eigenvalue of degree >= 2 reaches lambda_1 (that would contradict the
    strict decrease of normalized Gegenbauer values inside (-1, 1)).
    """
    N, a = params.dim, params.a
    x = 1.0 - a
    lam0 = eigenvalue_closed_form(params, 0)
    lam1 = eigenvalue_closed_form(params, 1)
    hs_total = 0.5 * unit_sphere_area(N) * lam0
    n0 = 2.0 * unit_sphere_area(N) * lam0 / lam1**2

    partial = lam0**2 + harmonic_dimension(N, 1) * lam1**2
    cum_rank = 1 + harmonic_dimension(N, 1)
    max_ratio = -np.inf
    max_degree = 2
    rank_ok = True
    abs_blocks = [(abs(lam0), 1), (abs(lam1), harmonic_dimension(N, 1))]

    alpha = N / 2.0
    d_prev, d_cur = 1.0, x  # normalized ratios at degrees l-1 = 0, 1
    ell = 2
    hard_cap = 200000
    while True:
        ratio = d_cur  # lambda_ell / lambda_1
        if ratio >= 1.0:
            raise ConsistencyError(
                f"eigenvalue certification failure: degree {ell} ratio {ratio} >= 1"
            )
        if ratio > max_ratio:
            max_ratio, max_degree = ratio, ell
        lam = lam1 * ratio
        mult = harmonic_dimension(N, ell)
        partial += mult * lam * lam
        cum_rank += mult
        abs_blocks.append((abs(lam), mult))
        residual = max(hs_total - partial, 0.0)
        next_mult = harmonic_dimension(N, ell + 1)
        tail_bound = math.sqrt(residual / next_mult)
        # stop once no unseen eigenvalue can reach lambda_1/2 in magnitude and
        # the enumeration covers every rank below the cutoff n0
        if tail_bound < 0.5 * lam1 and cum_rank >= n0 and ell >= min(params.ell_max, 50):
            break
        if ell >= hard_cap:
            raise ConvergenceError("gap enumeration exceeded the degree cap")
        # advance the normalized Gegenbauer recurrence (degree l-1 -> l)
        k = ell  # computing ratio index k = ell (for eigenvalue degree ell+1)
        r_k = (k + 2.0 * alpha - 1.0) / k
        r_km1 = (k - 1.0 + 2.0 * alpha - 1.0) / (k - 1.0) if k >= 2 else 1.0
        d_prev, d_cur = d_cur, (2.0 * (k + alpha - 1.0) * x * d_cur
                                - (k + 2.0 * alpha - 2.0) * d_prev / r_km1) / (k * r_k)
        ell += 1

    # rank bound mu_n <= sqrt(hs_total / n) on the enumerated eigenvalues
    abs_blocks.sort(key=lambda b: -b[0])
    rank = 0
    for value, mult in abs_blocks:
        rank += 1
        if value > math.sqrt(hs_total / rank) * (1.0 + 1e-12):
            rank_ok = False
        rank += mult - 1
    if not rank_ok:
        raise ConsistencyError("Hilbert-Schmidt rank bound violated by enumerated eigenvalues")

    gap_A = 0.5 * max(0.5, max_ratio)
    report = GapReport(
        gap_A=gap_A,
        cutoff_n0=n0,
        max_ratio=max_ratio,
        max_ratio_degree=max_degree,
        enumerated_degree=ell,
        hs_total=hs_total,
        hs_partial=partial,
        rank_bound_ok=rank_ok,
    )
    return gap_A, n0, report


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue table with multiplicities plus the certified gap data."""

    params: SpectralParams
    lambdas: np.ndarray        # degree 0..ell_max
    multiplicities: np.ndarray
    gap_A: float
    cutoff_n0: float
    hs_total: float
    hs_partial: np.ndarray     # running sums of mult * lambda^2
    report: GapReport = field(repr=False)

    @property
    def hs_residual_relative(self) -> float:
        return float((self.hs_total - self.hs_partial[-1]) / self.hs_total)

    def to_jsonable(self) -> dict:
        return {
            "dim": self.params.dim,
            "a": self.params.a,
            "ell_max": self.params.ell_max,
            "lambdas": [float(v) for v in self.lambdas],
            "multiplicities": [int(m) for m in self.multiplicities],
            "gap_A": float(self.gap_A),
            "cutoff_n0": float(self.cutoff_n0),
            "hs_total": float(self.hs_total),
            "hs_residual_relative": self.hs_residual_relative,
            "max_ratio_degree": int(self.report.max_ratio_degree),
        }


def compute_spectrum(params: SpectralParams) -> Spectrum:
    """Eigenvalues for degrees 0..ell_max together with the certified gap."""
    N, a = params.dim, params.a
    x = 1.0 - a
    lam0 = eigenvalue_closed_form(params, 0)
    lam1 = eigenvalue_closed_form(params, 1)
    ratios = gegenbauer_ratio_sequence(N / 2.0, max(params.ell_max - 1, 0), np.asarray(x))
    lambdas = np.empty(params.ell_max + 1)
    lambdas[0] = lam0
    lambdas[1:] = lam1 * ratios[: params.ell_max]
    mults = np.array([harmonic_dimension(N, l) for l in range(params.ell_max + 1)], dtype=float)
    gap_A, n0, report = gap_constant(params)
    partial = np.cumsum(mults * lambdas**2)
    if np.any(partial > report.hs_total * (1.0 + 1e-9)):
        raise ConsistencyError("Hilbert-Schmidt partial sums exceed the exact budget")
    return Spectrum(
        params=params,
        lambdas=lambdas,
        multiplicities=mults.astype(int),
        gap_A=gap_A,
        cutoff_n0=n0,
        hs_total=report.hs_total,
        hs_partial=partial,
        report=report,
    )


# ---------------------------------------------------------------------------
# Direct evaluation of the quadratic form on direction grids
# ---------------------------------------------------------------------------

_HESSIAN_RESOLUTION = {2: 1024, 3: 24, 4: 12, 5: 7, 6: 5}


class HessianForm:
    """Double-quadrature evaluation of Q[F] on a direction set.

    The kernel indicator 1_{w . w' > 1 - a} is applied blockwise against the
    Gram matrix of the direction set, so memory stays bounded for large sets.
    """

    def __init__(self, params: SpectralParams, directions: DirectionSet | None = None):
        self.params = params
        if directions is None:
            res = _HESSIAN_RESOLUTION.get(params.dim, 5)
            directions = direction_set(params.dim, res)
        if directions.dim != params.dim:
            raise ParameterError("direction set dimension does not match the parameters")
        self.directions = directions
        self.threshold = 1.0 - params.a

    def norm_sq(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        return float(self.directions.weights @ (values * values))

    def apply_batch(self, profiles: np.ndarray, block: int = 2048) -> np.ndarray:
        """Q[F] for each column of profiles (shape (P,) or (P, K))."""
        profiles = np.asarray(profiles, dtype=float)
        squeeze = profiles.ndim == 1
        if squeeze:
            profiles = profiles[:, None]
        if profiles.shape[0] != self.directions.count:
            raise ParameterError("profile length does not match the direction set")
        v = self.directions.weights[:, None] * profiles
        vec = self.directions.vectors
        acc = np.zeros(profiles.shape[1])
        for start in range(0, vec.shape[0], block):
            stop = min(start + block, vec.shape[0])
            mask = (vec[start:stop] @ vec.T) > self.threshold
            acc += np.einsum("ik,ik->k", v[start:stop], mask @ v)
        out = 0.5 * acc
        return out[0] if squeeze else out

    def apply(self, values: np.ndarray) -> float:
        return float(self.apply_batch(values))

    def rayleigh(self, values: np.ndarray) -> float:
        return self.apply(values) / self.norm_sq(values)

    def zonal_profile(self, ell: int, pole: np.ndarray) -> np.ndarray:
        """A degree-ell spherical harmonic: the normalized zonal kernel at a pole."""
        pole = np.asarray(pole, dtype=float)
        pole = pole / np.linalg.norm(pole)
        t = np.clip(self.directions.vectors @ pole, -1.0, 1.0)
        return np.asarray(gegenbauer_ratio((self.params.dim - 2) / 2.0, ell, t))

    def project_orthogonal(self, values: np.ndarray) -> np.ndarray:
        """Remove the components on constants and linear coordinates."""
        w = self.directions.weights
        vec = self.directions.vectors
        area = unit_sphere_area(self.params.dim)
        out = values - (w @ values) / area
        lin_norm = area / self.params.dim  # exact Gram of coordinates on the sphere
        for n in range(self.params.dim):
            out = out - (w @ (out * vec[:, n])) / lin_norm * vec[:, n]
        return out

    def random_profile(self, rng: np.random.Generator, degrees=range(2, 13),
                       poles_per_degree: int = 3) -> np.ndarray:
        """Random mean-zero profile built from harmonics of the given degrees,
        projected onto the orthogonality constraints."""
        total = np.zeros(self.directions.count)
        for ell in degrees:
            poles = rng.standard_normal((poles_per_degree, self.params.dim))
            coeffs = rng.standard_normal(poles_per_degree)
            for c, pole in zip(coeffs, poles):
                total += c * self.zonal_profile(ell, pole)
        return self.project_orthogonal(total)


def hessian_form_apply(params: SpectralParams, values: np.ndarray,
                       directions: DirectionSet | None = None) -> float:
    """Q[F] for per-direction values F on the module's quadrature set."""
    return HessianForm(params, directions).apply(values)
