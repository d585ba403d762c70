"""Command-line front end.

    forchheimer-afem solve --preset example1 --alpha 1.0 --out runs/ex1
    forchheimer-afem verify --pair th --refinements 4

Exit status: 0 on success, 1 on usage errors, 2 on solver failure.
"""

import argparse
import logging
import sys
from dataclasses import replace

from .exceptions import AfemError, ConfigError, NonconvergenceError, SingularSystemError
from .experiments import PRESETS, format_table, parse_config, preset, run, verify_manufactured
from .spaces import PAIR_ALIASES, canonical_pair

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="forchheimer-afem",
                     description="Adaptive Taylor-Hood / mini solver for Brinkman-Darcy-"
                                 "Forchheimer flow driven by point forces.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run an adaptive experiment")
    s.add_argument("--preset", choices=sorted(p for p in PRESETS if p != "manufactured"))
    s.add_argument("--config", help="key = value configuration file")
    s.add_argument("--alpha", type=float)
    s.add_argument("--pair", choices=sorted(PAIR_ALIASES))
    s.add_argument("--iters", type=int)
    s.add_argument("--out")
    s.add_argument("--no-vtk", action="store_true", help="skip the VTK output")

    v = sub.add_parser("verify", help="manufactured-solution convergence table")
    v.add_argument("--pair", default="th", choices=sorted(PAIR_ALIASES))
    v.add_argument("--refinements", type=int, default=4)
    return parser


def _solve_config(args):
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = preset(args.preset or "example1")
    upd = {}
    if args.alpha is not None:
        upd["alpha"] = args.alpha
    if args.pair is not None:
        upd["pair"] = canonical_pair(args.pair)
    if args.iters is not None:
        upd["iterations"] = args.iters
    if args.out is not None:
        upd["outputs"] = args.out
    return replace(cfg, **upd).validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            status, _ = run(_solve_config(args), write_vtk=not args.no_vtk)
            return status
        if args.refinements < 3:
            raise ConfigError("refinements", "must be at least 3")
        rows = verify_manufactured(canonical_pair(args.pair), args.refinements)
        print(format_table(rows))
        return EXIT_OK
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonconvergenceError, SingularSystemError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AfemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
