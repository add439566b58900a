"""Constant-tracking pipeline for the explicit stability constant.

Assembles, per (dimension, delta), every constant of the proof chain:

  1. shell bounds of the overlap profile (certified scan, uniform over the
     admissible kernel range);
  2. the spectral gap constant and the shell-regime deficit bound
     ("shell estimate": deficit controls the squared boundary profiles once
     the density is centered and sandwiched);
  3. the reduction step (competitor + centering turn small asymmetry into
     the shell regime), producing the asymmetry ceiling alpha and a constant
     for all densities with asymmetry below it;
  4. the closing chain through the rearranged radial profile (the
     one-dimensional bathtub estimate), valid for arbitrary admissible
     densities, giving the final constant as a minimum over the branches.

Every ledger entry carries a formula string and provenance; each chain step
rounds its result one ulp toward the conservative side, so the emitted
constant is a certified lower bound relative to the scanned inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .constructions import centering_constants
from .corpus import corpus_density
from .density import (
    asymmetry,
    asymmetry_upper_bound,
    deficit,
    deficit_quadrature_tolerance,
    mass_radius,
)
from .errors import ConsistencyError, ParameterError
from .geometry import BallPair, ball_volume, certify_phi_bounds, unit_sphere_area
from .grids import default_grid
from .spectral import harmonic_dimension

__all__ = [
    "LedgerEntry",
    "ConstantLedger",
    "AuditReport",
    "admissible_a_range",
    "assemble_ledger",
    "shell_estimate_constants",
    "reduction_constants",
    "stability_constant",
    "audit_stability",
]


def _dn(x: float) -> float:
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return math.nextafter(x, math.inf)


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    value: float
    direction: str  # 'lower' | 'upper' | 'exact'
    formula: str
    source: str


REQUIRED_ENTRIES = [
    "c_lower", "c_taylor", "gamma_min", "gamma_max", "gap_A_max", "cutoff_n0_max",
    "tau", "C1", "C2", "C2_prime", "theta_pre", "C_linear", "C_offdiag",
    "theta_cap", "c_shell", "C_shell", "centering_theta_max", "centering_shift",
    "centering_growth", "K", "K_eff", "alpha", "c_reduction", "c_sets",
    "c_prime", "k1", "c_dblprime", "c_final",
]


@dataclass
class ConstantLedger:
    """Per-(N, delta) record of every certified constant with provenance."""

    dim: int
    delta: float
    entries: dict[str, LedgerEntry] = field(default_factory=dict)

    def add(self, name: str, value: float, direction: str, formula: str, source: str) -> float:
        if not math.isfinite(value):
            raise ConsistencyError(f"constant {name} is not finite: {value}")
        if direction == "lower":
            value = _dn(value)
        elif direction == "upper":
            value = _up(value)
        self.entries[name] = LedgerEntry(name, value, direction, formula, source)
        return value

    def __getitem__(self, name: str) -> float:
        return self.entries[name].value

    def require_complete(self, names=None) -> None:
        missing = [n for n in (names or REQUIRED_ENTRIES) if n not in self.entries]
        if missing:
            raise ConsistencyError("ledger incomplete, missing: " + ", ".join(missing))

    @property
    def final_constant(self) -> float:
        self.require_complete()
        return self["c_final"]

    def to_jsonable(self) -> dict:
        return {
            "dim": self.dim,
            "delta": self.delta,
            "entries": [
                {"name": e.name, "value": e.value, "direction": e.direction,
                 "formula": e.formula, "source": e.source}
                for e in self.entries.values()
            ],
        }

    def to_text(self) -> str:
        lines = [f"constant ledger  N={self.dim}  delta={self.delta}"]
        width = max(len(n) for n in self.entries)
        for e in self.entries.values():
            lines.append(f"  {e.name:<{width}}  {e.value:.9e}  [{e.direction:<5}]  {e.formula}")
        return "\n".join(lines)


def admissible_a_range(delta: float) -> tuple[float, float]:
    """Kernel parameter range induced by delta-admissibility."""
    if not 0 < delta <= 0.5:
        raise ParameterError("delta must lie in (0, 1/2]")
    return 2.0 * delta**2, 2.0 * (1.0 - delta) ** 2


# ---------------------------------------------------------------------------
# scans over the admissible kernel range
# ---------------------------------------------------------------------------

def _overlap_scan(dim: int, delta: float, a_grid: np.ndarray, scan_points: int):
    """Certify the shell bounds of the overlap profile uniformly over ``a``."""
    c_min, C_max = math.inf, 0.0
    g_min, g_max = math.inf, 0.0
    for a in a_grid:
        pair = BallPair.from_spectral_a(dim, float(a), delta)
        cert = certify_phi_bounds(pair, scan_points)
        c_min = min(c_min, cert.c_lower)
        C_max = max(C_max, cert.c_taylor)
        g_min = min(g_min, cert.gamma)
        g_max = max(g_max, cert.gamma)
    return c_min, C_max, g_min, g_max


def _spectral_scan(dim: int, a_grid: np.ndarray):
    """Vectorized gap scan: A(a), n0(a), and tau = min (1/2 - A) Gamma."""
    N = dim
    x = 1.0 - a_grid
    s2 = unit_sphere_area(N - 1)
    area = unit_sphere_area(N)
    beta_idx = (N - 1) / 2.0
    half = 0.5 * math.exp(math.lgamma(0.5) + math.lgamma(beta_idx) - math.lgamma(0.5 + beta_idx))
    inc = betainc(0.5, beta_idx, np.minimum(x * x, 1.0))
    lam0 = 0.5 * s2 * np.where(x >= 0, half * (1.0 - inc), half * (1.0 + inc))
    lam1 = s2 / (2.0 * (N - 1)) * (1.0 - x * x) ** ((N - 1) / 2.0)
    hs = 0.5 * area * lam0
    n0 = 2.0 * area * lam0 / lam1**2

    partial = lam0**2 + harmonic_dimension(N, 1) * lam1**2
    max_ratio = x.copy()  # degree-2 ratio
    d_prev = np.ones_like(x)
    d_cur = x.copy()
    alpha = N / 2.0
    ell = 2
    cum_rank = 1 + harmonic_dimension(N, 1)
    while True:
        lam = lam1 * d_cur
        mult = harmonic_dimension(N, ell)
        partial = partial + mult * lam * lam
        cum_rank += mult
        if np.any(d_cur >= 1.0):
            raise ConsistencyError("eigenvalue ratio reached 1 in the admissible scan")
        np.maximum(max_ratio, d_cur, out=max_ratio)
        residual = np.maximum(hs - partial, 0.0)
        tail = np.sqrt(residual / harmonic_dimension(N, ell + 1))
        if np.all(tail < 0.5 * lam1) and cum_rank >= float(np.max(n0)) and ell >= 50:
            break
        if ell > 200000:
            raise ConsistencyError("spectral scan did not close the enumeration")
        k = ell
        r_k = (k + 2.0 * alpha - 1.0) / k
        r_km1 = (k - 1.0 + 2.0 * alpha - 1.0) / (k - 1.0)
        d_prev, d_cur = d_cur, (2.0 * (k + alpha - 1.0) * x * d_cur
                                - (k + 2.0 * alpha - 2.0) * d_prev / r_km1) / (k * r_k)
        ell += 1

    gap_A = 0.5 * np.maximum(0.5, max_ratio)
    gamma = 2.0 * lam1
    tau_grid = (0.5 - gap_A) * gamma
    return float(np.max(gap_A)), float(np.max(n0)), float(np.min(tau_grid))


# ---------------------------------------------------------------------------
# chain steps
# ---------------------------------------------------------------------------

def shell_estimate_constants(ledger: ConstantLedger) -> None:
    """Constants of the centered, sandwiched shell-regime deficit bound."""
    N, delta = ledger.dim, ledger.delta
    area = unit_sphere_area(N)
    s2 = unit_sphere_area(N - 1)
    two_pow = 2.0**N - 1.0

    ledger.add("C1", math.sqrt(area / 2.0), "upper",
               "sqrt(|S^(N-1)|/2)", "Cauchy-Schwarz on the sphere plus (x+y)^2 <= 2(x^2+y^2)")
    C2 = ledger.add("C2", two_pow / area, "upper",
                    "(2^N - 1)/|S^(N-1)|", "sup bound on boundary profiles under the sandwich")
    C2p = ledger.add("C2_prime", two_pow / N, "upper",
                     "(2^N - 1)/N", "C2 rescaled by mass/R^N = |S^(N-1)|/N")

    theta_shell = ((1.5**N) - 1.0) / two_pow
    theta_pre = ledger.add("theta_pre", min(delta / 2.0, 0.5 / two_pow, theta_shell), "lower",
                           "min(delta/2, 1/(2(2^N-1)), ((3/2)^N-1)/(2^N-1))",
                           "validity caps for the Taylor window and kernel-band bounds")

    C = ledger["c_taylor"]
    g_max = ledger["gamma_max"]
    x_max = two_pow * theta_pre
    plus_branch = 0.5 * g_max * (N - 1) + C / 3.0
    minus_branch = (C / 3.0) * (1.0 + 2.0 * x_max) ** 2
    ledger.add("C_linear", max(plus_branch, minus_branch), "upper",
               "max(Gamma_max (N-1)/2 + C/3, (C/3)(1 + 2(2^N-1) theta_pre)^2)",
               "cubic remainder of the bathtub expansion of the linear term")

    # kernel-band constant: pairs whose angle falls within 2 theta of the
    # kernel edge; band length in t plus the worst weight on the band
    a_lo, a_hi = admissible_a_range(delta)
    L_coef = 4.0 * (math.sqrt(2.0 * a_hi) + theta_pre)
    t_hi = 1.0 - max(math.sqrt(2.0 * a_lo) - 2.0 * theta_pre, 0.0) ** 2 / 2.0
    t_lo = max(1.0 - (math.sqrt(2.0 * a_hi) + 2.0 * theta_pre) ** 2 / 2.0, -1.0 + 1e-300)
    if N == 2:
        w_max = max((1.0 - t_hi * t_hi) ** -0.5, (1.0 - t_lo * t_lo) ** -0.5)
    else:
        w_max = 1.0
    ledger.add("C_offdiag", 2.0 * area * s2 * w_max * L_coef, "upper",
               "2 |S^(N-1)| |S^(N-2)| W_max L_coef",
               "measure of the kernel-edge band times the profile sup bound")

    tau = ledger["tau"]
    theta_cap = ledger.add("theta_cap", min(tau / (2.0 * ledger["C_linear"] * C2p), theta_pre),
                           "lower", "min(tau/(2 C_linear C2'), theta_pre)",
                           "shell width keeping half the spectral-gap coefficient")
    if not theta_cap > 0:
        raise ConsistencyError("shell width cap is not positive")
    ledger.add("c_shell", tau / area, "lower", "tau/|S^(N-1)|",
               "gap coefficient against the asymmetry lower bound for profiles")
    ledger.add("C_shell", ledger["C_offdiag"] * C2**2 * area / tau, "upper",
               "C_offdiag C2^2 |S^(N-1)| / tau",
               "theta^3 remainder normalized by the shell constant")


def reduction_constants(ledger: ConstantLedger) -> None:
    """Asymmetry ceiling alpha and the constant valid below it."""
    N = ledger.dim
    area = unit_sphere_area(N)
    cc = centering_constants(N)
    theta0 = ledger.add("centering_theta_max", cc.theta_max, "lower",
                        "min(1/(C' C0^2), 1/(2 C0)) / (2^N |B_1|)",
                        "certified centering threshold (unit ball scan)")
    ledger.add("centering_shift", cc.shift_coefficient, "upper",
               "C0 2^N |B_1|^(1-1/N)", "shift bound per unit sandwich width")
    growth = ledger.add("centering_growth", cc.sandwich_growth, "upper",
                        "1 + C0 2^N |B_1|", "sandwich width growth under recentering")

    c = ledger["c_lower"]
    K = ledger.add("K", 12.0 * area / (N * c), "upper", "12 |S^(N-1)|/(N c)",
                   "sandwich width of the competitor per unit asymmetry")
    K_eff = ledger.add("K_eff", growth * K, "upper", "centering_growth * K",
                       "sandwich width after recentering per unit asymmetry")

    cap1 = ledger.add("alpha_cap_dichotomy", N * c / (12.0 * area), "lower",
                      "N c/(12 |S^(N-1)|)", "keeps the competitor shell width below 1/2")
    cap2 = ledger.add("alpha_cap_centering", (2.0 / 3.0) * theta0 / K, "lower",
                      "(2/3) theta0 / K", "centering threshold for the competitor")
    cap3 = ledger.add("alpha_cap_shell", (2.0 / 3.0) * ledger["theta_cap"] / K_eff, "lower",
                      "(2/3) theta_cap / K_eff", "shell-estimate width cap after recentering")
    cap4 = ledger.add("alpha_cap_absorb", (2.0 / 3.0) / (2.0 * ledger["C_shell"] * K_eff**3),
                      "lower", "(2/3)/(2 C_shell K_eff^3)",
                      "absorbs the theta^3 remainder into half the quadratic term")
    alpha = ledger.add("alpha", min(cap1, cap2, cap3, cap4), "lower",
                       "min of the four ceilings", "asymmetry range of the reduction")
    if not alpha > 0:
        raise ConsistencyError("asymmetry ceiling is not positive")
    ledger.add("c_reduction", min(1.0, ledger["c_shell"] / 8.0), "lower",
               "min(1, c_shell/8)",
               "constant for all densities with asymmetry below alpha")


def stability_constant(ledger: ConstantLedger) -> float:
    """Close the chain for arbitrary asymmetry and emit the final constant."""
    N = ledger.dim
    area = unit_sphere_area(N)
    c = ledger["c_lower"]

    b_min = N * 1.5 ** (N - 1)
    if b_min < 2.0:
        raise ConsistencyError("radial bathtub constant lost its clean branch")
    c_prime = ledger.add("c_prime", c * (2.0 / 3.0) ** (N - 1) / (4.0 * area), "lower",
                         "c (2/3)^(N-1) / (4 |S^(N-1)|)",
                         "deficit controls the squared L1 distance to the matched level set")
    c_sets = ledger.add("c_sets", ledger["c_reduction"] * ledger["alpha"] ** 2, "lower",
                        "c_reduction alpha^2",
                        "stability for indicator densities at all asymmetries")
    k1 = ledger.add("k1", 0.5 / math.sqrt(c_prime)
                    + math.sqrt((1.0 + 1.0 / math.sqrt(c_prime)) / c_sets), "upper",
                    "1/(2 sqrt(c')) + sqrt((1 + 1/sqrt(c'))/c_sets)",
                    "asymmetry against deficit through the matched level set")
    c_dbl = ledger.add("c_dblprime", 1.0 / k1**2, "lower", "k1^-2",
                       "large-deficit branch constant")
    final = ledger.add("c_final", min(ledger["c_reduction"], c_dbl,
                                      ledger["alpha"] ** 2 * c_dbl**2), "lower",
                       "min(c_reduction, c_dblprime, alpha^2 c_dblprime^2)",
                       "uniform constant over all branches")
    if not final > 0:
        raise ConsistencyError("final constant is not positive")
    return final


def assemble_ledger(dim: int, delta: float, a_points: int = 1000,
                    scan_points: int = 2048, overrides: dict | None = None) -> ConstantLedger:
    """Run the full pipeline for one (dimension, delta) point.

    ``overrides`` replaces named scan outputs before the chain runs (used to
    test monotone dependence on upstream constants).
    """
    if dim < 2:
        raise ParameterError("the constant pipeline requires dimension >= 2")
    ledger = ConstantLedger(dim, delta)
    a_lo, a_hi = admissible_a_range(delta)
    ledger.add("a_min", a_lo, "exact", "2 delta^2", "admissibility")
    ledger.add("a_max", a_hi, "exact", "2 (1-delta)^2", "admissibility")
    a_grid = np.linspace(a_lo, a_hi, a_points)

    c_min, C_max, g_min, g_max = _overlap_scan(dim, delta, a_grid, scan_points)
    gap_A, n0_max, tau = _spectral_scan(dim, a_grid)

    values = {
        "c_lower": c_min, "c_taylor": C_max, "gamma_min": g_min, "gamma_max": g_max,
        "gap_A_max": gap_A, "cutoff_n0_max": n0_max, "tau": tau,
    }
    if overrides:
        unknown = set(overrides) - set(values)
        if unknown:
            raise ParameterError(f"unknown overrides: {sorted(unknown)}")
        values.update(overrides)

    ledger.add("c_lower", values["c_lower"], "lower",
               "0.9 min_a min_r |phi(r)-phi(R)| / w(r)", f"overlap scan, {a_points} x {scan_points}")
    ledger.add("c_taylor", values["c_taylor"], "upper",
               "1.1 max_a max_r |phi(r)-phi(R)+Gamma R^(N-1)(r-R)| / (R^(N-2)(r-R)^2)",
               f"overlap scan, {a_points} x {scan_points}")
    ledger.add("gamma_min", values["gamma_min"], "lower", "min_a Gamma(a)", "derivative path")
    ledger.add("gamma_max", values["gamma_max"], "upper", "max_a Gamma(a)", "derivative path")
    ledger.add("gap_A_max", values["gap_A_max"], "upper", "max_a A(a)", "spectral scan")
    ledger.add("cutoff_n0_max", values["cutoff_n0_max"], "upper", "max_a n0(a)", "spectral scan")
    tau = ledger.add("tau", values["tau"], "lower", "min_a (1/2 - A(a)) Gamma(a)", "spectral scan")
    if not tau > 0:
        raise ConsistencyError("spectral-gap coefficient tau is not positive")

    shell_estimate_constants(ledger)
    reduction_constants(ledger)
    stability_constant(ledger)
    ledger.require_complete()
    return ledger


# ---------------------------------------------------------------------------
# soundness audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditRow:
    index: int
    name: str
    mass: float
    asymmetry: float
    asymmetry_is_bound: bool
    deficit: float
    tolerance: float
    rhs: float
    riesz_ok: bool
    stability_ok: bool


@dataclass(frozen=True)
class AuditReport:
    dim: int
    delta: float
    c_final: float
    count: int
    kernel_ratio: float
    violations: int
    riesz_violations: int
    min_deficit_over_tolerance: float
    min_stability_ratio: float
    rows: tuple

    def to_jsonable(self, include_rows: bool = True) -> dict:
        doc = {
            "dim": self.dim,
            "delta": self.delta,
            "c_final": self.c_final,
            "count": self.count,
            "kernel_ratio": self.kernel_ratio,
            "violations": self.violations,
            "riesz_violations": self.riesz_violations,
            "min_deficit_over_tolerance": self.min_deficit_over_tolerance,
            "min_stability_ratio": self.min_stability_ratio,
        }
        if include_rows:
            doc["rows"] = [
                {"index": r.index, "name": r.name, "mass": r.mass,
                 "asymmetry": r.asymmetry, "asymmetry_is_bound": r.asymmetry_is_bound,
                 "deficit": r.deficit, "tolerance": r.tolerance, "rhs": r.rhs,
                 "riesz_ok": r.riesz_ok, "stability_ok": r.stability_ok}
                for r in self.rows
            ]
        return doc


def audit_stability(ledger: ConstantLedger, count: int = 1000, base_seed: int = 0,
                    profile: str = "audit", kernel_ratio: float = 0.5,
                    exact_asymmetry_every: int = 25) -> AuditReport:
    """Check deficit + tolerance >= c * mass^2 * asymmetry^2 over a corpus.

    The asymmetry enters through an upper bound (single-shift evaluation) on
    most densities, which only strengthens the audited inequality; every
    ``exact_asymmetry_every``-th density runs the full multi-start search.
    """
    ledger.require_complete()
    N = ledger.dim
    c_final = ledger["c_final"]
    ratio = min(max(kernel_ratio, ledger.delta), 1.0 - ledger.delta)
    grid = default_grid(N, profile=profile)

    rows = []
    violations = 0
    riesz_violations = 0
    min_ratio = math.inf
    min_def_tol = math.inf
    for index in range(count):
        name, rho = corpus_density(grid, index, base_seed)
        R = mass_radius(rho)
        pair = BallPair(N, R, 2.0 * ratio * R, ledger.delta)
        D = deficit(rho, pair)
        eps = deficit_quadrature_tolerance(rho, pair)
        exact = index % exact_asymmetry_every == 0
        if exact:
            A = asymmetry(rho, starts="fast").value
        else:
            A = asymmetry_upper_bound(rho)
        rhs = c_final * rho.mass**2 * A * A
        riesz_ok = D >= -eps
        stab_ok = D + eps >= rhs
        if not riesz_ok:
            riesz_violations += 1
        if not stab_ok:
            violations += 1
        if A > 1e-6:
            min_ratio = min(min_ratio, (D + eps) / (rho.mass**2 * A * A))
        min_def_tol = min(min_def_tol, D / eps)
        rows.append(AuditRow(index, name, rho.mass, A, not exact, D, eps, rhs,
                             riesz_ok, stab_ok))
    return AuditReport(
        dim=N, delta=ledger.delta, c_final=c_final, count=count, kernel_ratio=ratio,
        violations=violations, riesz_violations=riesz_violations,
        min_deficit_over_tolerance=min_def_tol, min_stability_ratio=min_ratio,
        rows=tuple(rows),
    )
