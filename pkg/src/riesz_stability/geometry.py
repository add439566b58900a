"""Two-ball intersection geometry.

Everything here is about the radial overlap profile of a centered ball of
radius ``R`` (the rearranged ball) with a ball of radius ``Rb`` centered at
distance ``r`` from the origin:

    phi(r) = vol( B_R(0) ∩ B_Rb(x) ),   |x| = r.

phi is non-increasing in r and strictly decreasing on the open shell
``|R - Rb| < r < R + Rb``.  The slope constant

    Gamma = -R^(1-N) * phi'(R)

controls the linear response of the overlap to moving mass across the sphere
of radius R, and the two scanned bounds of ``certify_phi_bounds`` give a
certified piecewise-linear lower bound and quadratic Taylor control of
``phi(r) - phi(R)`` around r = R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln

from .errors import ConsistencyError, ParameterError

__all__ = [
    "BallPair",
    "PhiBoundCertificate",
    "unit_sphere_area",
    "ball_volume",
    "cap_volume",
    "phi",
    "phi_derivative",
    "gamma_constant",
    "certify_phi_bounds",
]


def unit_sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^(dim-1) in R^dim.

    dim=1 gives 2 (two points), dim=2 gives 2*pi, dim=3 gives 4*pi.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ParameterError(f"dimension must be a positive integer, got {dim!r}")
    return 2.0 * math.exp(0.5 * dim * math.log(math.pi) - gammaln(0.5 * dim))


def ball_volume(dim: int, radius: float = 1.0) -> float:
    """Volume of the dim-dimensional ball of the given radius."""
    if radius < 0:
        raise ParameterError(f"radius must be nonnegative, got {radius}")
    return unit_sphere_area(dim) * radius**dim / dim


@dataclass(frozen=True)
class BallPair:
    """A centered target ball (radius_e) and kernel ball (radius_b) in R^dim.

    ``delta`` pins the admissibility class: the pair must satisfy
    ``delta <= radius_b / (2 * radius_e) <= 1 - delta`` with 0 < delta <= 1/2.
    The derived spectral parameter is ``a = radius_b^2 / (2 radius_e^2)``,
    which then lies in [2 delta^2, 2 (1-delta)^2].
    """

    dim: int
    radius_e: float
    radius_b: float
    delta: float

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ParameterError(f"dimension must be a positive integer, got {self.dim!r}")
        if not (self.radius_e > 0 and self.radius_b > 0):
            raise ParameterError("both radii must be positive")
        if not (0 < self.delta <= 0.5):
            raise ParameterError(f"delta must lie in (0, 1/2], got {self.delta}")
        ratio = self.ratio
        tol = 1e-12
        if not (self.delta - tol <= ratio <= 1 - self.delta + tol):
            raise ParameterError(
                f"pair not delta-admissible: radius_b/(2 radius_e) = {ratio:.6g} "
                f"outside [{self.delta}, {1 - self.delta}]"
            )

    @property
    def ratio(self) -> float:
        return self.radius_b / (2.0 * self.radius_e)

    @property
    def spectral_a(self) -> float:
        return self.radius_b**2 / (2.0 * self.radius_e**2)

    @classmethod
    def from_spectral_a(cls, dim: int, a: float, delta: float, radius_e: float = 1.0) -> "BallPair":
        if not (0 < a < 2):
            raise ParameterError(f"spectral parameter a must lie in (0, 2), got {a}")
        return cls(dim, radius_e, radius_e * math.sqrt(2.0 * a), delta)

    @staticmethod
    def widest_delta(radius_e: float, radius_b: float) -> float:
        """Largest admissible delta for the given radii."""
        ratio = radius_b / (2.0 * radius_e)
        return min(ratio, 1.0 - ratio)


def cap_volume(dim: int, radius: float, cut) -> np.ndarray:
    """Volume of the cap {x in B_radius(0) : x_1 >= cut}, cut in [-radius, radius].

    Uses the regularized incomplete beta function; stable close to the
    degenerate cuts at +-radius, including dim = 2 where direct quadrature
    would see an endpoint singularity.
    """
    cut = np.asarray(cut, dtype=float)
    vol = ball_volume(dim, radius)
    c = np.clip(cut / radius, -1.0, 1.0)
    x = 1.0 - c * c
    half = 0.5 * vol * betainc((dim + 1) / 2.0, 0.5, x)
    return np.where(c >= 0, half, vol - half)


def _phi_dim1(pair: BallPair, r: np.ndarray) -> np.ndarray:
    # interval overlap |[-R, R] ∩ [r - Rb, r + Rb]|
    lo = np.maximum(-pair.radius_e, r - pair.radius_b)
    hi = np.minimum(pair.radius_e, r + pair.radius_b)
    return np.maximum(hi - lo, 0.0)


def phi(pair: BallPair, r) -> np.ndarray:
    """Overlap volume of B_R(0) and B_Rb(x) at center distance r = |x| >= 0.

    Scalar or array r.  Exactly 0 for r >= R + Rb, the smaller ball's volume
    for r <= |R - Rb|, and the two-cap lens volume in between.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ParameterError("radial distance must be nonnegative")
    if pair.dim == 1:
        out = _phi_dim1(pair, r)
        return out if out.shape else float(out)

    R, Rb = pair.radius_e, pair.radius_b
    vmin = ball_volume(pair.dim, min(R, Rb))
    out = np.zeros_like(r)
    out[r <= abs(R - Rb)] = vmin
    lens = (r > abs(R - Rb)) & (r < R + Rb)
    if np.any(lens):
        rl = r[lens]
        d1 = (rl * rl + R * R - Rb * Rb) / (2.0 * rl)
        d2 = rl - d1
        out[lens] = cap_volume(pair.dim, R, d1) + cap_volume(pair.dim, Rb, d2)
    return out if out.shape else float(out)


def phi_derivative(pair: BallPair, r) -> np.ndarray:
    """Radial derivative phi'(r) for r > 0.

    Reduction of the boundary-flux integral for grad phi to the cosine
    t = omega . omega' gives, for N >= 2,

        phi'(r) = -R^(N-1) |S^(N-2)| * (1 - t0^2)^((N-1)/2) / (N - 1),
        t0 = (r^2 + R^2 - Rb^2) / (2 r R),

    whenever t0 lies in (-1, 1), and 0 otherwise.  The t-integral has an
    elementary antiderivative, so this is exact, with no quadrature.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ParameterError("phi_derivative requires r > 0")
    R, Rb = pair.radius_e, pair.radius_b
    if pair.dim == 1:
        inside = (np.abs(R - Rb) < r) & (r < R + Rb)
        out = np.where(inside, -1.0, 0.0)
        return out if out.shape else float(out)

    t0 = (r * r + R * R - Rb * Rb) / (2.0 * r * R)
    area = unit_sphere_area(pair.dim - 1)
    active = np.abs(t0) < 1.0
    t0c = np.clip(t0, -1.0, 1.0)
    mag = R ** (pair.dim - 1) * area / (pair.dim - 1) * (1.0 - t0c * t0c) ** ((pair.dim - 1) / 2.0)
    out = np.where(active, -mag, 0.0)
    return out if out.shape else float(out)


def gamma_constant(pair: BallPair) -> float:
    """Slope constant Gamma = -R^(1-N) * phi'(R); positive for admissible pairs."""
    R = pair.radius_e
    return -float(phi_derivative(pair, R)) * R ** (1 - pair.dim)


@dataclass(frozen=True)
class PhiBoundCertificate:
    """Scanned constants for the two shell bounds on phi around r = R.

    With w(r) = R^(N-1)|r-R| for |r-R| <= R/2 and w(r) = R^N/2 otherwise:

        |phi(r) - phi(R)| >= c_lower * w(r)                    on [0, R+Rb],
        |phi(r) - phi(R) + Gamma R^(N-1)(r-R)|
                          <= c_taylor * R^(N-2) (r-R)^2        for |r-R| <= R/2.

    The stored constants already include the declared safety factors, so they
    remain valid between scan points for any sane off-grid behavior.
    """

    c_lower: float
    c_taylor: float
    gamma: float
    scan_resolution: float
    safety_lower: float
    safety_upper: float

    def check(self, pair: BallPair, r) -> bool:
        """Re-check both certified inequalities at the given radii."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        R = pair.radius_e
        ph = np.atleast_1d(phi(pair, r))
        phR = phi(pair, R)
        dev = np.abs(r - R)
        w = np.where(dev <= 0.5 * R, R ** (pair.dim - 1) * dev, 0.5 * R**pair.dim)
        ok_lower = bool(np.all(np.abs(ph - phR) >= self.c_lower * w - 1e-13 * phi(pair, 0.0)))
        near = dev <= 0.5 * R
        lhs = np.abs(ph - phR + self.gamma * R ** (pair.dim - 1) * (r - R))
        rhs = self.c_taylor * R ** (pair.dim - 2) * dev**2
        ok_taylor = bool(np.all(lhs[near] <= rhs[near] + 1e-13 * phi(pair, 0.0)))
        return ok_lower and ok_taylor


def certify_phi_bounds(
    pair: BallPair,
    scan_points: int = 4096,
    safety_lower: float = 0.9,
    safety_upper: float = 1.1,
) -> PhiBoundCertificate:
    """Scan r over [0, R+Rb] and certify the two shell bounds on phi.

    Returns the largest lower constant and smallest upper constant consistent
    with the scan, shrunk resp. inflated by the safety factors to absorb
    off-grid behavior.  Raises ConsistencyError if the scan sees phi increase
    (which would mean a bug in phi itself, not bad data).
    """
    if scan_points < 1000:
        raise ParameterError("scan_points must be at least 1000")
    R, Rb = pair.radius_e, pair.radius_b
    N = pair.dim
    rs = np.linspace(0.0, R + Rb, scan_points)
    ph = np.atleast_1d(phi(pair, rs))
    scale = ball_volume(N, min(R, Rb))
    if np.any(np.diff(ph) > 1e-12 * scale):
        raise ConsistencyError("phi increased along the scan; overlap volume is broken")

    phR = float(phi(pair, R))
    dev = np.abs(rs - R)
    step = rs[1] - rs[0]
    mask = dev > 0.5 * step
    w = np.where(dev <= 0.5 * R, R ** (N - 1) * dev, 0.5 * R**N)
    c_scan = float(np.min(np.abs(ph[mask] - phR) / w[mask]))

    near = mask & (dev <= 0.5 * R)
    lhs = np.abs(ph - phR + gamma_constant(pair) * R ** (N - 1) * (rs - R))
    quad = R ** (N - 2) * dev**2
    C_scan = float(np.max(lhs[near] / quad[near]))

    cert = PhiBoundCertificate(
        c_lower=safety_lower * c_scan,
        c_taylor=safety_upper * C_scan,
        gamma=gamma_constant(pair),
        scan_resolution=float(step),
        safety_lower=safety_lower,
        safety_upper=safety_upper,
    )
    if not cert.c_lower > 0:
        raise ConsistencyError("certified lower constant is not positive")
    return cert
