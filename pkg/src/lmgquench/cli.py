"""Command-line interface.

Subcommands: spectrum | gaps | cycle | sweep | render-handoff.
Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O failure.  Set LMGQUENCH_CACHE_DIR to persist spectral
decompositions across runs.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, NumericalError
from .experiment import ExperimentConfig, manifest, run_cycle_command, run_gaps, \
    run_spectrum, run_sweep


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--n", type=int, help="particle count N (even)")
    parser.add_argument("--mu", type=float, help="coherent-state parameter in [-1, 1]")
    parser.add_argument("--lambda0", type=float, help="initial/final control parameter")
    parser.add_argument("--lambda1", type=float, help="turning-point control parameter")
    parser.add_argument("--t-r", dest="t_r", type=float, help="relaxation time")
    parser.add_argument("--time-units", choices=("tau_s", "absolute"),
                        help="units of --t-r")
    parser.add_argument("--step-tau-s", dest="step_tau_s", type=float,
                        help="ramp step as a fraction of tau_s")
    parser.add_argument("--grid-points", dest="gap_grid_points", type=int,
                        help="Lambda grid points for the gap scan")
    parser.add_argument("--workers", type=int, help="parallel cycles in a sweep")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                        help="override any config field, value parsed as JSON")


def _build_config(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in ("n", "mu", "lambda0", "lambda1", "t_r", "time_units",
                "step_tau_s", "gap_grid_points", "workers", "out_dir"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=JSON, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            overrides[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key.strip()] = raw  # bare strings allowed
    ratios = getattr(args, "tau_q_ratio", None)
    if ratios:
        overrides["tau_q_ratios"] = tuple(ratios)
    band = getattr(args, "band", None)
    if band:
        overrides["relaxation_band"] = tuple(band)
    merged = base.to_dict()
    merged.update(overrides)
    return ExperimentConfig.from_dict(merged)  # rejects unknown keys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmgquench",
        description="Closed quench cycles in the LMG collective-spin model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigenvalues vs Lambda per parity + E_c line")
    _add_common(p)

    p = sub.add_parser("gaps", help="same-parity gap scan; prints tau_s")
    _add_common(p)

    p = sub.add_parser("cycle", help="one closed cycle at a given tau_q/tau_s")
    _add_common(p)
    p.add_argument("--tau-q-ratio", dest="tau_q_ratio", type=float, action="append",
                   help="tau_q in units of tau_s (first value is used)")
    p.add_argument("--band", type=float, action="append", metavar="T_R",
                   help="extra relaxation times for the final-<Jx> band")

    p = sub.add_parser("sweep", help="cycles for every configured tau_q ratio")
    _add_common(p)
    p.add_argument("--tau-q-ratio", dest="tau_q_ratio", type=float, action="append",
                   help="tau_q/tau_s value (repeatable)")

    p = sub.add_parser("render-handoff", help="print the CSV manifest as JSON")
    p.add_argument("--out", dest="out_dir", default="results",
                   help="results directory to index")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "render-handoff":
            print(json.dumps(manifest(args.out_dir), indent=2))
            return 0
        config = _build_config(args)
        if args.command == "spectrum":
            path = run_spectrum(config)
            print(f"wrote {path}")
        elif args.command == "gaps":
            gaps_path, summary_path, tau_s = run_gaps(config)
            print(f"tau_s = {tau_s:.6e}")
            print(f"wrote {gaps_path}")
            print(f"wrote {summary_path}")
        elif args.command == "cycle":
            ratio = config.tau_q_ratios[0]
            path = run_cycle_command(config, ratio)
            print(f"wrote {path}")
        elif args.command == "sweep":
            sweep_path, failures = run_sweep(config)
            print(f"wrote {sweep_path}")
            for ratio, err in failures:
                print(f"FAILED tau_q/tau_s={ratio:g}: {err}", file=sys.stderr)
            if failures:
                return 2
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
