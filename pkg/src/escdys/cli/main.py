"""Command-line entry point.

Exit status: 0 converged, 2 not converged, 1 usage or configuration error,
3 runtime failure (solver breakdown, I/O).
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import EmptyContourError, EscError, InstabilityError, SolverStalledError
from . import experiment, io
from .config import ExperimentConfig, load, with_output, with_seed

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="seed for random initial fields (u64)")
    common.add_argument("--quiet", action="store_true", help="only report warnings and errors")

    p = _Parser(prog="escdys", description="Equilibrium crystal shapes by three-operator splitting.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="run the splitting solver")
    sub.add_parser("gradflow", parents=[common], help="run the gradient-flow baseline")
    w = sub.add_parser("wulff", parents=[common], help="write the Wulff shape of the model")
    w.add_argument("--area", type=float, help="enclosed area (default: from the initial mass)")
    w.add_argument("--contour", help="contour CSV to measure against the Wulff shape")
    c = sub.add_parser("compare", parents=[common], help="run both solvers and compare")
    c.add_argument("--gf-config", help="separate configuration for the gradient-flow run")
    d = sub.add_parser("distance", parents=[common], help="manifold distance of two curves")
    d.add_argument("a", help="CSV with x,y columns")
    d.add_argument("b", help="CSV with x,y columns")
    return p


def _config(path, args) -> ExperimentConfig:
    cfg = load(path) if path else ExperimentConfig()
    if args.out:
        cfg = with_output(cfg, args.out)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _run(args) -> int:
    if args.verb == "distance":
        print(f"manifold_distance = {experiment.distance(args.a, args.b)!r}")
        return EXIT_OK
    cfg = _config(args.config, args)
    if args.verb == "solve":
        outcome = experiment.solve(cfg)
    elif args.verb == "gradflow":
        outcome = experiment.gradflow(cfg)
    elif args.verb == "compare":
        gf = _config(args.gf_config, args) if args.gf_config else None
        outcome = experiment.compare(cfg, gf)
    else:
        outcome = experiment.wulff(cfg, area=args.area, contour_path=args.contour)
    if not args.quiet:
        print(io.format_summary(outcome.summary), end="")
    return EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"escdys: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (SolverStalledError, InstabilityError, EmptyContourError, OSError) as exc:
        print(f"escdys: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (EscError, ValueError) as exc:
        # bad parameters, unsupported model/verb combinations, malformed input files
        print(f"escdys: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
