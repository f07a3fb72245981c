"""Command-line entry point.

Subcommands ``run``, ``figure``, ``convergence`` and ``validate``. Exit
codes: 0 on success, 2 on invalid input, 1 on numerical or I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .dyson import MODES
from .errors import PertThermoError, ValidationError
from .reports import (
    PHYSICAL,
    SCALED,
    convergence_report,
    figure_data,
    run_scenario,
    validation_report,
)
from .serialize import write_json

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


def _parser():
    p = argparse.ArgumentParser(
        prog="pertthermo",
        description="Order-by-order work, heat and coherence for driven quantum systems.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", required=True, type=Path, help="scenario JSON file")
        sp.add_argument("--out", type=Path, default=Path(out_default), help="output directory")
        sp.add_argument("--mode", choices=MODES + ("both",),
                        help="density-correction sign convention (overrides the config)")

    common(sub.add_parser("run", help="write the first-law ledger"), "out")
    fig = sub.add_parser("figure", help="write the three figure panels per drive frequency")
    common(fig, "figure")
    fig.add_argument("--reading", choices=(SCALED, PHYSICAL), default=SCALED,
                     help="how to read the upper level in the energy-weighted columns")
    fig.add_argument("--png", action="store_true", help="also render figure.png (matplotlib)")
    conv = sub.add_parser("convergence", help="fit residual scaling against the exact oracle")
    common(conv, "convergence")
    conv.add_argument("--epsilons", type=float, nargs="+", default=[0.04, 0.02, 0.01],
                      help="drive strengths, a geometric progression")
    common(sub.add_parser("validate", help="check identities, oracle and closed forms"),
           "validation")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.mode is not None:
            cfg = cfg.with_mode(args.mode)
        if args.command == "run":
            paths = run_scenario(cfg, args.out)
        elif args.command == "figure":
            paths = figure_data(cfg, args.out, reading=args.reading, png=args.png)
        elif args.command == "convergence":
            report = convergence_report(cfg, args.epsilons)
            paths = [write_json(args.out / "convergence.json", report)]
            for kind in ("rho", "energy"):
                for mode, x in report["exponents"][kind].items():
                    print(f"{kind} residual exponent [{mode}]: {x}")
            print(f"coherence residual exponent: {report['exponents']['coherence']}")
            print(f"favored mode: {report['favored_mode']}")
        else:
            report = validation_report(cfg)
            paths = [write_json(args.out / "validation.json", report)]
            for c in report["checks"]:
                flag = "PASS" if c["passed"] else "FAIL"
                print(f"{flag} {c['name']}: {c['value']:.3e} (tol {c['tol']:.1e})")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PertThermoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - any other failure is internal
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
