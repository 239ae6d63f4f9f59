"""Command-line front end.

Exit codes: 0 success, 1 a --check comparison failed, 2 bad config or usage,
3 runtime failure (fit failure, channel failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import rng as rngmod
from .adversary import EveStrategy
from .errors import ConfigError, FitError, QKDError
from .model import SpatialBasis, joint_outcome_distribution, MeasurementSetting, PolBasis
from .oracle import analytic_error_rates
from .protocols import ProtocolKind, ProtocolSpec
from .sampler import correlation_table, default_thetas, fit_visibility, interference_scan, tables_to_csv
from .session import SPEC_VERSION, run_session

SIGMAS = 3.0
TABLE_SIGMAS = 4.0
VISIBILITY_TOL = 0.02


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (fallback: config, then $QKD4_SEED)")
    common.add_argument("--pairs", type=int, help="pairs per run / samples per scan point / samples per table")
    common.add_argument("--protocol", choices=[k.value for k in ProtocolKind])
    common.add_argument("--eve-fraction", type=float, help="intercept-resend fraction in [0, 1]")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--check", action="store_true", help="exit 1 if any empirical value disagrees with its oracle")

    parser = argparse.ArgumentParser(prog="qkd4", description="Four-dimensional entanglement QKD simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate a full key-distribution session")
    scan = sub.add_parser("scan", parents=[common], help="polarization interference curve and fitted visibility")
    scan.add_argument("--analytic", action="store_true", help="use exact rates instead of sampling")
    scan.add_argument("--angles", type=float, nargs="+", help="analyzer B angles in degrees")
    sub.add_parser("table", parents=[common], help="spatial correlation tables for all basis pairs")
    sub.add_parser("oracle", parents=[common], help="exact rate and error rates by enumeration")
    return parser


def _load(args) -> dict:
    cfg = cfgmod.load(args.config)
    if args.protocol:
        cfg["protocol"] = args.protocol
    if args.eve_fraction is not None:
        if not 0.0 <= args.eve_fraction <= 1.0:
            raise ConfigError("--eve-fraction must lie in [0, 1]")
        cfg["eve"]["intercept_fraction"] = args.eve_fraction
    if args.format:
        cfg["output"]["format"] = args.format
    if args.out:
        cfg["output"]["dir"] = str(args.out)
    if args.pairs is not None and args.pairs < 1:
        raise ConfigError("--pairs must be at least 1")
    return cfg


def _seed(args, cfg) -> int:
    return rngmod.resolve_seed(args.seed, cfg.get("seed"))


def _out_dir(cfg) -> Path:
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, Fraction):
        return f"{x} ({float(x):.4f})"
    return f"{x:.4f}"


def _compare(name, empirical, oracle: Fraction | None, sigma: float) -> dict:
    ok = True
    if empirical is not None and oracle is not None:
        diff = abs(empirical - float(oracle))
        ok = diff <= SIGMAS * sigma + 1e-12
    return {
        "metric": name,
        "empirical": empirical,
        "oracle": None if oracle is None else str(oracle),
        "oracle_float": None if oracle is None else float(oracle),
        "sigma": sigma,
        "within_3sigma": ok,
    }


def _binomial_sigma(p: Fraction | None, n: int) -> float:
    if p is None or n == 0:
        return 0.0
    return math.sqrt(float(p) * (1 - float(p)) / n)


def _pooled_sigma(rep_a, rep_b, q: Fraction | None) -> float:
    """Standard error of the pooled QBER, clustering the (possibly correlated) bits of each round."""
    if q is None or not len(rep_a.sifted_slots):
        return 0.0
    rounds = rep_a.sifted_slots >> 1
    _, inv = np.unique(rounds, return_inverse=True)
    errors = np.bincount(inv, weights=(rep_a.sifted_values != rep_b.sifted_values))
    bits = np.bincount(inv)
    resid = errors - float(q) * bits
    return float(np.sqrt(np.sum(resid**2)) / bits.sum())


# --- run -----------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _load(args)
    if args.pairs is not None:
        cfg["n_pairs"] = args.pairs
    seed = _seed(args, cfg)
    session = cfgmod.build_session(cfg, seed)
    rep_a, rep_b = run_session(session, channel=cfg["transport"]["kind"])
    oracle = analytic_error_rates(session.protocol, session.eve, session.source)

    n = session.n_pairs
    dof_bits = {
        "pol": int(np.sum((rep_a.sifted_slots & 1) == 0)),
        "spa": int(np.sum((rep_a.sifted_slots & 1) == 1)),
    }
    rows = [_compare("bits_per_pair", rep_a.bits_per_pair, oracle.rate, math.sqrt(float(oracle.rate_variance) / n))]
    for dof, exact in (("pol", oracle.pol_qber), ("spa", oracle.spa_qber)):
        rows.append(_compare(f"qber_{dof}", rep_a.qber_true[dof], exact, _binomial_sigma(exact, dof_bits[dof])))
    rows.append(
        _compare("qber_overall", rep_a.qber_true["overall"], oracle.per_bit_qber, _pooled_sigma(rep_a, rep_b, oracle.per_bit_qber))
    )
    if session.protocol.kind is ProtocolKind.QUQUART:
        rows.append(
            _compare(
                "symbol_error",
                rep_a.symbol_error_true,
                oracle.symbol_error,
                _binomial_sigma(oracle.symbol_error, rep_a.sifted_rounds),
            )
        )

    print(f"protocol {session.protocol.kind.value}  pairs {n}  seed {seed}  eve f={session.eve.intercept_fraction}")
    print(f"{'metric':<14}{'estimated':>12}{'true':>12}   oracle")
    est = dict(rep_a.qber_estimated, symbol_error=rep_a.symbol_error_estimated, bits_per_pair=rep_a.bits_per_pair)
    exact = {
        "bits_per_pair": oracle.rate,
        "qber_pol": oracle.pol_qber,
        "qber_spa": oracle.spa_qber,
        "qber_overall": oracle.per_bit_qber,
        "symbol_error": oracle.symbol_error,
    }
    for row in rows:
        key = row["metric"].removeprefix("qber_")
        flag = "" if row["within_3sigma"] else "   <-- beyond 3 sigma"
        print(f"{row['metric']:<14}{_fmt(est.get(key)):>12}{_fmt(row['empirical']):>12}   {_fmt(exact[row['metric']])}{flag}")
    if rep_a.aborted:
        print("session aborted: estimated QBER above threshold")

    out = _out_dir(cfg)
    report = {
        "spec_version": SPEC_VERSION,
        "seed": seed,
        "config": {**{k: v for k, v in cfg.items() if k not in ("scan", "table")}, "seed": seed},
        "alice": rep_a.to_dict(),
        "bob": rep_b.to_dict(),
        "oracle": oracle.as_dict(),
        "summary": rows,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for rep in (rep_a, rep_b):
        (out / f"key_{rep.party}.txt").write_text("".join(map(str, rep.key.tolist())) + "\n", encoding="utf-8")
    if cfg["output"]["format"] == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "empirical", "oracle", "oracle_float", "sigma", "within_3sigma"])
        for row in rows:
            w.writerow([row[k] if row[k] is not None else "" for k in ("metric", "empirical", "oracle", "oracle_float", "sigma", "within_3sigma")])
        (out / "summary.csv").write_text(buf.getvalue(), encoding="utf-8")

    if args.check and not all(r["within_3sigma"] for r in rows):
        return 1
    return 0


# --- scan ----------------------------------------------------------------------


def cmd_scan(args) -> int:
    cfg = _load(args)
    sc = cfg["scan"]
    source = cfgmod.build_source(cfg)
    thetas = args.angles or sc.get("thetas") or default_thetas(sc["n_angles"])
    n = args.pairs or sc["n_per_point"]
    analytic = args.analytic or sc["analytic"]
    seed = _seed(args, cfg)
    rng = None if analytic else rngmod.stream(seed, "scan")
    curve = interference_scan(source, sc["fixed_theta"], thetas, n, rng)
    out = _out_dir(cfg)
    curve.to_csv(out / "scan.csv")
    try:
        v, theta0 = fit_visibility(curve)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 3
    expected = (1.0 - source.bg) * source.pol.v_pol
    with open(out / "scan_fit.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["visibility", "theta0_deg", "configured_visibility", "n_per_point", "analytic"])
        w.writerow([repr(float(v)), repr(float(theta0)), repr(float(expected)), n, analytic])
    print(f"fitted visibility {v:.4f}  (configured {expected:.4f})  minimum at {theta0:.2f} deg")
    if args.check and abs(v - expected) > VISIBILITY_TOL:
        return 1
    return 0


# --- table ---------------------------------------------------------------------


def cmd_table(args) -> int:
    cfg = _load(args)
    source = cfgmod.build_source(cfg)
    n = args.pairs or cfg["table"]["n"]
    rng = rngmod.stream(_seed(args, cfg), "table")
    tables, ok = {}, True
    for ba in (SpatialBasis.X, SpatialBasis.P):
        for bb in (SpatialBasis.X, SpatialBasis.P):
            counts = correlation_table(source, ba, bb, n, rng)
            tables[(ba, bb)] = counts
            probs = joint_outcome_distribution(
                source, MeasurementSetting(PolBasis.HV, ba), MeasurementSetting(PolBasis.HV, bb)
            ).spatial_table()
            sigma = np.sqrt(n * probs * (1 - probs))
            ok &= bool(np.all(np.abs(counts - n * probs) <= TABLE_SIGMAS * sigma + 1e-9))
            print(f"A={ba.value} B={bb.value}:  [[{counts[0, 0]}, {counts[0, 1]}], [{counts[1, 0]}, {counts[1, 1]}]]")
    tables_to_csv(tables, _out_dir(cfg) / "table.csv")
    if args.check and not ok:
        return 1
    return 0


# --- oracle --------------------------------------------------------------------


def cmd_oracle(args) -> int:
    """Exact values; defaults to full interception unless --eve-fraction is given."""
    cfg = _load(args)
    source = cfgmod.build_source(cfg) if args.config else None
    f = 1.0 if args.eve_fraction is None else args.eve_fraction
    eve = EveStrategy(f, cfg["eve"].get("basis_policy"))
    if args.protocol:
        specs = [ProtocolSpec.standard(args.protocol)]
    elif args.config:
        specs = [ProtocolSpec.from_dict(cfg["protocol"])]
    else:
        specs = [ProtocolSpec.standard(k) for k in ProtocolKind]
    results = {spec.kind.value: analytic_error_rates(spec, eve, source) for spec in specs}
    if (args.format or "") == "json":
        print(json.dumps({k: r.as_dict() for k, r in results.items()}, indent=2))
    else:
        for name, r in results.items():
            print(
                f"{name:<14} rate={r.rate}  qber={r.per_bit_qber}  qber_pol={r.pol_qber}  "
                f"qber_spa={r.spa_qber}  symbol_error={r.symbol_error}"
            )
    return 0


COMMANDS = {"run": cmd_run, "scan": cmd_scan, "table": cmd_table, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QKDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
