"""Command-line interface: ``run``, ``validate``, ``bounds`` and ``dispatch``."""

from __future__ import annotations

import argparse
import json
import sys

from .casefile import CaseFormatError, CaseValidationError, load_case
from .experiment import ExperimentConfig, _round12, simulate, write_artifacts
from .network import validate_network

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _add_run_flags(p, with_out=True):
    p.add_argument("--case", default=None, help="case JSON path or built-in name (default: ieee14)")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="experiment config JSON (or a summary.json to replay)")
    p.add_argument("--grad-variant", choices=("tilde", "raw"), default=None)
    p.add_argument("--convention", choices=("admittance", "reciprocal"), default=None)
    p.add_argument("--no-theta-bound", action="store_true", help="do not project angles onto [-pi, pi]")
    if with_out:
        p.add_argument("--out", default="results")
        p.add_argument("--stride", type=int, default=None, help="write trace.csv every N rounds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="online-dcopf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="simulate and write trace.csv, curves.csv, summary.json"))
    v = sub.add_parser("validate", help="check a case file")
    v.add_argument("--case", required=True)
    _add_run_flags(sub.add_parser("bounds", help="print the bound constants for a case and run"), with_out=False)
    _add_run_flags(sub.add_parser("dispatch", help="print the hindsight dispatch"), with_out=False)
    return parser


def _config(args) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    overrides = {
        "case": args.case,
        "horizon": args.horizon,
        "seed": args.seed,
        "grad_variant": args.grad_variant,
        "convention": args.convention,
        "stride": getattr(args, "stride", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_theta_bound:
        base["theta_bound"] = None
    return ExperimentConfig.from_dict(base)


def _print(obj):
    print(json.dumps(obj, indent=2))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    if args.command == "validate":
        try:
            network = load_case(args.case, validate=False)
        except CaseFormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except CaseValidationError as exc:
            print(exc.report)
            return EXIT_INVALID
        report = validate_network(network)
        print(report)
        return EXIT_OK if report.ok else EXIT_INVALID

    try:
        config = _config(args)
        result = simulate(config)
    except CaseValidationError as exc:
        print(exc.report, file=sys.stderr)
        return EXIT_INVALID
    except (CaseFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "run":
        paths = write_artifacts(result, args.out)
        summary = result.summary()["final"]
        print(f"wrote {', '.join(str(p) for p in paths.values())}")
        print(f"regret {summary['static_regret']:.6g}  violation {summary['constraint_violation']:.6g}  "
              f"({result.wall_time:.2f} s)")
    elif args.command == "bounds":
        _print(_round12({
            f"{form}_{mode}": result.constants(mode, form).to_dict()
            for form in ("derivation", "table")
            for mode in ("partial", "limit")
        }))
    elif args.command == "dispatch":
        comp = result.comparator
        net = result.network
        _print(_round12({
            "p_star_pu": {str(net.bus_ids[b]): float(v) for b, v in zip(comp.buses, comp.p_star)},
            "total_pu": float(comp.p_star.sum()),
            "marginal_price": comp.marginal_price,
            "theta_star_rad": {str(b): float(v) for b, v in zip(net.bus_ids, comp.theta_star)},
        }))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
