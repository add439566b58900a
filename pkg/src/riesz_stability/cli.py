"""Batch command-line front-end.

Four subcommands: ``phi`` (overlap profile table plus certificate),
``spectrum`` (eigenvalue report), ``constant`` (full ledger, single point or
sweep), and ``verify`` (corpus stress test of the stability inequality).

Reports are deterministic for a fixed seed and configuration: no timestamps,
sorted JSON keys, fixed float repr.  Exit codes: 0 success, 2 invalid
configuration, 3 certification or verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constants import assemble_ledger, audit_stability
from .corpus import corpus_density
from .density import (
    asymmetry,
    deficit,
    deficit_quadrature_tolerance,
    interaction,
    make_ball_density,
    mass_radius,
    pair_for,
)
from .errors import ConsistencyError, ConvergenceError, ParameterError
from .geometry import BallPair, certify_phi_bounds, phi, phi_derivative
from .grids import default_grid
from .oracles import mc_interaction
from .spectral import SpectralParams, compute_spectrum

OUTPUT_DIR_ENV = "RIESZ_STAB_OUTDIR"


def _resolve_output(path: str | None):
    if path is None or path == "-":
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(args, doc: dict, rows: list[dict], fieldnames: list[str]) -> None:
    out = _resolve_output(args.out)
    if args.format == "json":
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _pair_from_args(args) -> BallPair:
    if args.a is not None:
        delta = args.delta if args.delta is not None else min(
            (args.a / 2.0) ** 0.5, 1.0 - (args.a / 2.0) ** 0.5)
        return BallPair.from_spectral_a(args.dim, args.a, delta, args.R)
    Rb = args.Rb if args.Rb is not None else args.R
    delta = args.delta if args.delta is not None else BallPair.widest_delta(args.R, Rb)
    return BallPair(args.dim, args.R, Rb, delta)


def cmd_phi(args) -> int:
    pair = _pair_from_args(args)
    cert = certify_phi_bounds(pair, args.scan_points)
    rs = np.linspace(0.0, pair.radius_e + pair.radius_b, args.points)
    values = np.atleast_1d(phi(pair, rs))
    derivs = np.concatenate([[0.0], np.atleast_1d(phi_derivative(pair, rs[1:]))])
    rows = [{"r": float(r), "phi": float(v), "dphi": float(d)}
            for r, v, d in zip(rs, values, derivs)]
    doc = {
        "report": "phi",
        "version": __version__,
        "config": {"dim": pair.dim, "R": pair.radius_e, "Rb": pair.radius_b,
                   "delta": pair.delta, "points": args.points,
                   "scan_points": args.scan_points},
        "certificate": {
            "c_lower": cert.c_lower, "c_taylor": cert.c_taylor, "gamma": cert.gamma,
            "scan_resolution": cert.scan_resolution,
            "safety_lower": cert.safety_lower, "safety_upper": cert.safety_upper,
        },
        "rows": rows,
    }
    _emit(args, doc, rows, ["r", "phi", "dphi"])
    return 0


def cmd_spectrum(args) -> int:
    if args.dim < 2:
        raise ParameterError("the spectral analysis is defined for dimension >= 2")
    params = SpectralParams(args.dim, args.a, args.lmax)
    spec = compute_spectrum(params)
    lam1 = spec.lambdas[1]
    rows = [{"ell": int(l), "lambda": float(v), "multiplicity": int(m),
             "ratio_to_lambda1": float(v / lam1)}
            for l, (v, m) in enumerate(zip(spec.lambdas, spec.multiplicities))]
    doc = {
        "report": "spectrum",
        "version": __version__,
        "config": {"dim": args.dim, "a": args.a, "lmax": args.lmax},
        "gap_A": spec.gap_A,
        "cutoff_n0": spec.cutoff_n0,
        "hs_total": spec.hs_total,
        "hs_residual_relative": spec.hs_residual_relative,
        "max_ratio_degree": int(spec.report.max_ratio_degree),
        "rows": rows,
    }
    _emit(args, doc, rows, ["ell", "lambda", "multiplicity", "ratio_to_lambda1"])
    return 0


def cmd_constant(args) -> int:
    dims = [int(x) for x in args.dims.split(",")] if args.dims else [args.dim]
    deltas = [float(x) for x in args.deltas.split(",")] if args.deltas else [args.delta]
    ledgers = []
    rows = []
    for dim in dims:
        for delta in deltas:
            ledger = assemble_ledger(dim, delta, a_points=args.a_points,
                                     scan_points=args.scan_points)
            ledgers.append(ledger.to_jsonable())
            for e in ledger.entries.values():
                rows.append({"dim": dim, "delta": delta, "name": e.name,
                             "value": e.value, "direction": e.direction,
                             "formula": e.formula})
    doc = {
        "report": "constant",
        "version": __version__,
        "config": {"dims": dims, "deltas": deltas, "a_points": args.a_points,
                   "scan_points": args.scan_points},
        "ledgers": ledgers,
    }
    _emit(args, doc, rows, ["dim", "delta", "name", "value", "direction", "formula"])
    return 0


def cmd_verify(args) -> int:
    if args.rho == "ball":
        grid = default_grid(args.dim, profile=args.profile)
        rho = make_ball_density(grid)
        pair = pair_for(rho, args.ratio, args.delta)
        D = deficit(rho, pair)
        eps = deficit_quadrature_tolerance(rho, pair)
        A = asymmetry(rho, starts="fast").value
        applicable = A > 1e-9
        doc = {
            "report": "verify",
            "version": __version__,
            "config": {"dim": args.dim, "delta": args.delta, "rho": "ball",
                       "ratio": args.ratio, "profile": args.profile},
            "summary": {
                "deficit": D, "tolerance": eps, "asymmetry": A,
                "stability_ratio": (D + eps) / (rho.mass**2 * A * A) if applicable else None,
                "violations": 0 if D >= -eps else 1,
            },
        }
        rows = [{"index": 0, "name": "ball", "mass": rho.mass, "asymmetry": A,
                 "deficit": D, "tolerance": eps, "rhs": 0.0,
                 "riesz_ok": D >= -eps, "stability_ok": True}]
        _emit(args, doc, rows, list(rows[0].keys()))
        return 0 if D >= -eps else 3

    ledger = assemble_ledger(args.dim, args.delta, a_points=args.a_points,
                             scan_points=args.scan_points)
    report = audit_stability(ledger, count=args.count, base_seed=args.seed,
                             profile=args.profile, kernel_ratio=args.ratio)
    doc = {
        "report": "verify",
        "version": __version__,
        "config": {"dim": args.dim, "delta": args.delta, "count": args.count,
                   "seed": args.seed, "ratio": report.kernel_ratio,
                   "profile": args.profile, "a_points": args.a_points,
                   "scan_points": args.scan_points},
        "c_final": report.c_final,
        "summary": {
            "violations": report.violations,
            "riesz_violations": report.riesz_violations,
            "min_stability_ratio": report.min_stability_ratio,
            "min_deficit_over_tolerance": report.min_deficit_over_tolerance,
        },
        "rows": report.to_jsonable()["rows"],
    }
    rows = doc["rows"]
    if args.oracle:
        grid = default_grid(args.dim, profile=args.profile)
        checks = []
        for index in range(0, args.count, max(args.count // args.oracle_samples, 1))[: args.oracle_samples]:
            name, rho = corpus_density(grid, index, args.seed)
            pair = pair_for(rho, report.kernel_ratio, args.delta)
            quad = interaction(rho, rho, pair)
            est = mc_interaction(rho, rho, pair, args.oracle_points, seed=args.seed + index)
            z = (est.value - quad) / est.std_error if est.std_error > 0 else 0.0
            checks.append({"index": index, "name": name, "quadrature": quad,
                           "mc_value": est.value, "mc_std_error": est.std_error, "z": z})
        doc["oracle_checks"] = checks
        doc["summary"]["oracle_max_abs_z"] = max(abs(c["z"]) for c in checks)
    _emit(args, doc, rows, ["index", "name", "mass", "asymmetry", "asymmetry_is_bound",
                            "deficit", "tolerance", "rhs", "riesz_ok", "stability_ok"])
    return 3 if (report.violations or report.riesz_violations) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riesz-stab",
        description="Stability numerics for the Riesz rearrangement inequality "
                    "with ball kernels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None,
                        help="output path ('-' or omitted: stdout); relative paths "
                             f"resolve against ${OUTPUT_DIR_ENV} when set")

    p = sub.add_parser("phi", parents=[common],
                       help="overlap profile table and certified shell bounds")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--Rb", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--scan-points", dest="scan_points", type=int, default=4096)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("spectrum", parents=[common], help="zonal eigenvalue report")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--lmax", type=int, default=200)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("constant", parents=[common],
                       help="assemble the certified constant ledger")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--dims", default=None, help="sweep: comma-separated dimensions")
    p.add_argument("--deltas", default=None, help="sweep: comma-separated deltas")
    p.add_argument("--a-points", dest="a_points", type=int, default=1000)
    p.add_argument("--scan-points", dest="scan_points", type=int, default=2048)
    p.set_defaults(func=cmd_constant)

    p = sub.add_parser("verify", parents=[common],
                       help="stress-test the stability inequality on a corpus")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratio", type=float, default=0.5,
                   help="kernel radius as a fraction of the diameter bound")
    p.add_argument("--profile", choices=("default", "audit"), default="audit")
    p.add_argument("--rho", choices=("corpus", "ball"), default="corpus")
    p.add_argument("--a-points", dest="a_points", type=int, default=400)
    p.add_argument("--scan-points", dest="scan_points", type=int, default=2048)
    p.add_argument("--oracle", action="store_true",
                   help="cross-check quadrature against Monte Carlo on a subsample")
    p.add_argument("--oracle-samples", dest="oracle_samples", type=int, default=5)
    p.add_argument("--oracle-points", dest="oracle_points", type=int, default=200_000)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConsistencyError, ConvergenceError) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
