"""Command-line interface: ``loophole-lab {predict,simulate,test,scan,oracle}``.

Angles on the command line and in config files are degrees. Exit codes:
0 success, 2 bad arguments or config, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic, oracle, stats
from .config import load_config, manifest
from .engine import ConfigError, ScanResult, run_chsh, run_grid_ab, run_pair, run_scan
from .models import DetectorModel

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3


def fmt(x) -> str:
    """CSV cell: empty for undefined, ints verbatim, floats with 9 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if x == 0.0:
        x = 0.0  # drop the sign of -0.0
    return format(x, "#.9g")


def _degrees(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle in degrees: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"angle must be finite: {text!r}")
    return v


def _degree_list(text: str) -> list[float]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("expected a comma-separated list of angles")
    return [_degrees(p) for p in parts]


def _four_angles(text: str) -> list[float]:
    vals = _degree_list(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("--angles needs exactly four values: a,a',b,b'")
    return vals


def _grid(lo: float, hi: float, steps: int) -> list[float]:
    if steps < 1:
        raise ConfigError("--phi-steps must be at least 1")
    if steps == 1:
        return [lo]
    return [float(x) for x in np.linspace(lo, hi, steps)]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _emit_csv(text: str, output: str | None, man: dict) -> None:
    if output:
        Path(output).write_text(text)
        Path(output + ".manifest.json").write_text(json.dumps(man, indent=2) + "\n")
    else:
        sys.stdout.write(text)


def _emit_json(obj: dict, output: str | None) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _command(argv) -> str:
    return " ".join(["loophole-lab", *argv])


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "output")}


def cmd_predict(args, argv) -> int:
    if not 0.0 < args.beta <= 90.0:
        raise ConfigError("--beta must lie in (0, 90] degrees")
    if not 0.0 <= args.phi_min <= args.phi_max <= 180.0:
        raise ConfigError("need 0 <= --phi-min <= --phi-max <= 180")
    beta = math.radians(args.beta)
    same = not args.opposite_spins
    rows = []
    for phi_deg in _grid(args.phi_min, args.phi_max, args.phi_steps):
        phi = math.radians(phi_deg)
        rows.append((phi_deg, analytic.p_like(phi, beta, same), analytic.p_unlike(phi, beta, same),
                     analytic.total_rate(phi, beta, same),
                     analytic.correlation_normalised(phi, beta, same).value,
                     analytic.correlation_unnormalised(phi, beta, same),
                     analytic.qm_coincidence(phi), analytic.qm_correlation(phi)))
    header = ["phi_deg", "p_ss", "p_ns", "total_rate", "e_normalised", "e_unnormalised",
              "qm_coincidence", "qm_correlation"]
    _emit_csv(_csv_text(header, rows), args.output, manifest(_command(argv), _params(args), None))
    return EXIT_OK


def _load(args):
    config, raw = load_config(args.config)
    overrides = {}
    if args.n_pairs is not None:
        overrides["n_pairs"] = args.n_pairs
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = config.replace(**overrides)
        raw = {**raw, **{"nPairs": config.n_pairs, "seed": config.seed}}
    return config, raw


def cmd_simulate(args, argv) -> int:
    config, raw = _load(args)
    table = run_pair(config, math.radians(args.a), math.radians(args.b))
    out = table.to_dict()
    out["settings"] = {"aDeg": args.a, "bDeg": args.b}
    out["manifest"] = manifest(_command(argv), raw, int(config.seed))
    _emit_json(out, args.output)
    return EXIT_OK


def cmd_test(args, argv) -> int:
    config, raw = _load(args)
    angles = [math.radians(x) for x in args.angles]
    run = run_chsh(config, *angles)
    tables = list(run.tables)
    clipped = []
    if args.subtract_accidentals:
        results = [stats.subtract_accidentals(t) for t in tables]
        tables = [r.table for r in results]
        clipped = [list(r.clipped) for r in results]
    report = stats.chsh(tables, args.estimator)
    out = report.to_dict()
    out["settingsDeg"] = {"a": args.angles[0], "aPrime": args.angles[1],
                          "b": args.angles[2], "bPrime": args.angles[3]}
    out["tables"] = [t.to_dict() for t in tables]
    out["accidentalsSubtracted"] = bool(args.subtract_accidentals)
    if args.subtract_accidentals:
        out["clippedCells"] = clipped
    out["manifest"] = manifest(_command(argv), raw, int(config.seed))
    _emit_json(out, args.output)
    return EXIT_OK


def _scan_rows(scan: ScanResult):
    for e in scan:
        t = e.table
        n = t.emitted
        e_obs = stats.estimate_e(t, "observed").value
        e_emit = stats.estimate_e(t, "emitted").value
        yield (math.degrees(e.a), math.degrees(e.b), math.degrees(analytic.fold_angle(e.phi)),
               t.nn, t.ss, t.ns, t.sn, t.a_only_n, t.a_only_s, t.b_only_n, t.b_only_s,
               t.neither, t.invalid, n, t.nn / n, t.ss / n, t.ns / n, t.sn / n,
               t.coincidences / n, e_obs, e_emit)


SCAN_HEADER = ["a_deg", "b_deg", "phi_deg", "nn", "ss", "ns", "sn", "a_only_n", "a_only_s",
               "b_only_n", "b_only_s", "neither", "invalid", "emitted", "rate_nn", "rate_ss",
               "rate_ns", "rate_sn", "total_rate", "e_observed", "e_emitted"]


def cmd_scan(args, argv) -> int:
    config, raw = _load(args)
    if (args.a_grid is None) != (args.b_grid is None):
        raise ConfigError("--a-grid and --b-grid must be given together")
    if args.a_grid is not None:
        scan = run_grid_ab(config, [math.radians(x) for x in args.a_grid],
                           [math.radians(x) for x in args.b_grid])
    else:
        phis = _grid(args.phi_min, args.phi_max, args.phi_steps)
        scan = run_scan(config, [math.radians(x) for x in phis], math.radians(args.fixed_a))
    man = manifest(_command(argv), raw, int(config.seed))
    _emit_csv(_csv_text(SCAN_HEADER, _scan_rows(scan)), args.output, man)
    if args.diagnostics:
        diag = stats.fair_sampling_diagnostics(scan).to_dict()
        diag["minTotalRatePhiDeg"] = math.degrees(diag.pop("minTotalRatePhi"))
        try:
            diag["visibility"] = stats.visibility(scan, args.channel) if len(scan) >= 2 else None
        except ValueError:
            diag["visibility"] = None
        diag["visibilityChannel"] = args.channel
        diag["visibilityThresholds"] = stats.VISIBILITY_THRESHOLDS
        diag["manifest"] = man
        _emit_json(diag, args.diagnostics)
    return EXIT_OK


def oracle_rows(alphas_deg, betas_deg, spec: oracle.QuadratureSpec, mc_samples: int, seed: int):
    for beta_deg in betas_deg:
        for alpha_deg in alphas_deg:
            alpha, beta = math.radians(alpha_deg), math.radians(beta_deg)
            exact = analytic.cap_overlap_fraction(alpha, beta)
            det = DetectorModel.equal_caps(beta)
            da, db = det.at(-alpha), det.at(alpha)
            quad = oracle.quad_coincidence_prob(da, db, outcome_pair=("S", "S"), spec=spec)
            mc, se = oracle.mc_coincidence_prob(da, db, outcome_pair=("S", "S"),
                                                n_samples=mc_samples, seed=seed)
            z = (mc - exact) / se if se > 0 else (0.0 if mc == exact else None)
            yield (alpha_deg, beta_deg, exact, quad, mc, se, quad - exact, mc - exact, z)


ORACLE_HEADER = ["alpha_deg", "beta_deg", "analytic", "quadrature", "monte_carlo", "mc_stderr",
                 "quad_delta", "mc_delta", "mc_z"]


def cmd_oracle(args, argv) -> int:
    for a in args.alpha:
        if not 0.0 <= a <= 90.0:
            raise ConfigError(f"--alpha values must lie in [0, 90], got {a}")
    for b in args.beta:
        if not 0.0 < b <= 90.0:
            raise ConfigError(f"--beta values must lie in (0, 90], got {b}")
    if args.mc_samples < 1:
        raise ConfigError("--mc-samples must be positive")
    spec = oracle.QuadratureSpec(args.polar_steps, args.azimuth_steps)
    rows = list(oracle_rows(args.alpha, args.beta, spec, args.mc_samples, args.seed))
    _emit_csv(_csv_text(ORACLE_HEADER, rows), args.output,
              manifest(_command(argv), _params(args), args.seed))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loophole-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def grid_args(sp, steps):
        sp.add_argument("--phi-min", type=_degrees, default=0.0)
        sp.add_argument("--phi-max", type=_degrees, default=180.0)
        sp.add_argument("--phi-steps", type=int, default=steps)

    def config_args(sp):
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--n-pairs", type=int, default=None, help="override nPairs")
        sp.add_argument("--seed", type=int, default=None, help="override seed")
        sp.add_argument("--output", default=None)

    sp = sub.add_parser("predict", help="analytic curves as CSV")
    sp.add_argument("--beta", type=_degrees, required=True, help="cap half-angle, degrees")
    grid_args(sp, 37)
    sp.add_argument("--opposite-spins", action="store_true")
    sp.add_argument("--output", default=None)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("simulate", help="counts table for one setting pair")
    config_args(sp)
    sp.add_argument("--a", type=_degrees, default=0.0)
    sp.add_argument("--b", type=_degrees, default=0.0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("test", help="CHSH test from four simulated sub-experiments")
    config_args(sp)
    sp.add_argument("--angles", type=_four_angles, default=[0.0, 90.0, 45.0, 135.0],
                    help="a,a',b,b' in degrees (default: 0,90,45,135)")
    sp.add_argument("--estimator", choices=("observed", "emitted"), default="observed")
    sp.add_argument("--subtract-accidentals", action="store_true")
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("scan", help="simulated angle scan as CSV")
    config_args(sp)
    grid_args(sp, 13)
    sp.add_argument("--fixed-a", type=_degrees, default=0.0)
    sp.add_argument("--a-grid", type=_degree_list, default=None, help="Cartesian-grid mode")
    sp.add_argument("--b-grid", type=_degree_list, default=None)
    sp.add_argument("--diagnostics", default=None, help="write diagnostics JSON here")
    sp.add_argument("--channel", default="like", help="visibility channel (like, nn, ss, ...)")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("oracle", help="closed form vs quadrature vs Monte Carlo")
    sp.add_argument("--alpha", type=_degree_list, default=[0.0, 10.0, 22.5, 40.0, 80.0])
    sp.add_argument("--beta", type=_degree_list, default=[45.0, 75.0, 90.0])
    sp.add_argument("--polar-steps", type=int, default=2000)
    sp.add_argument("--azimuth-steps", type=int, default=4000)
    sp.add_argument("--mc-samples", type=int, default=200_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", default=None)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"loophole-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"loophole-lab: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"loophole-lab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
