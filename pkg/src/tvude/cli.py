"""Command line interface.

    tvude estimate --data obs.csv --model multiplicative --window-n 10 \\
        --fit-mu logistic-decay --fit-sigma logistic-decay --out results/
    tvude simulate --model multiplicative --mu 0.02 --sigma 0.01 --x0 100 \\
        --t0 0 --dt 1 --steps 50 --seed 1 --out sim.csv
    tvude reproduce alcohol --out results/alcohol

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.  ``TVUDE_LOG_LEVEL`` sets log verbosity (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigError, TvudeError
from .model import Family, ModelSpec
from .pipeline import (
    PRESETS,
    FitAssignment,
    PipelineConfig,
    bundled_dataset,
    emit_report,
    ingest_csv,
    run_estimation,
    simulate_command,
)
from .regression import GaussNewtonConfig, Kind
from .uncertainty import TimeGrid
from .windows import WindowConfig

log = logging.getLogger("tvude")

FAMILIES = [f.value for f in Family]
KINDS = [k.value for k in Kind]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def _add_model_args(p):
    p.add_argument("--model", required=True, choices=FAMILIES)
    p.add_argument("--k0", type=float, help="absorption rate (scaled-affine)")
    p.add_argument("--k1", type=float, help="elimination rate (scaled-affine)")
    p.add_argument("--weights", type=float, nargs=2, metavar=("W1", "W2"),
                   help="diffusion split weights (affine-split)")


def _model_from(args) -> ModelSpec:
    consts = {}
    if args.k0 is not None:
        consts["k0"] = args.k0
    if args.k1 is not None:
        consts["k1"] = args.k1
    return ModelSpec(args.model, consts, tuple(args.weights) if args.weights else None)


def _constant(text):
    return text if text == "first" else float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tvude", description="Time-varying parameter estimation for "
                                               "uncertain differential equations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="estimate parameters from a CSV series")
    est.add_argument("--data", required=True, help="CSV file with a header row")
    est.add_argument("--t-column", default="t")
    est.add_argument("--x-column", default="x")
    _add_model_args(est)
    est.add_argument("--window-n", type=int, required=True)
    est.add_argument("--stride", type=int, default=1)
    est.add_argument("--anchor", choices=["start", "center"], default="start")
    est.add_argument("--fit-mu", nargs="+", choices=KINDS, required=True,
                     help="one family per drift component")
    est.add_argument("--fit-sigma", nargs="+", choices=KINDS, required=True,
                     help="one family per diffusion component")
    est.add_argument("--mu-constant", nargs="+", type=_constant,
                     help="logistic numerators for mu components (number or 'first')")
    est.add_argument("--sigma-constant", nargs="+", type=_constant,
                     help="logistic numerators for sigma components (number or 'first')")
    est.add_argument("--gn-eps", type=float, default=1e-8)
    est.add_argument("--gn-max-iter", type=int, default=100)
    est.add_argument("--gn-damping", action="store_true")
    est.add_argument("--fail-soft", action="store_true", help="skip failing windows")
    est.add_argument("--workers", type=int, default=None)
    est.add_argument("--out", required=True)
    est.add_argument("--format", choices=["csv", "json"], default="csv")

    sim = sub.add_parser("simulate", help="Euler-simulate a series with constant parameters")
    _add_model_args(sim)
    sim.add_argument("--mu", type=float, nargs="+", required=True)
    sim.add_argument("--sigma", type=float, nargs="+", required=True)
    sim.add_argument("--x0", type=float, required=True)
    sim.add_argument("--t0", type=float, default=0.0)
    sim.add_argument("--dt", type=float, default=1.0)
    sim.add_argument("--steps", type=int, required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", required=True, help="output CSV path")

    rep = sub.add_parser("reproduce", help="run a bundled case study")
    rep.add_argument("preset", choices=sorted(PRESETS))
    rep.add_argument("--out", required=True)
    rep.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _assignments(kinds, constants, gn, what):
    if constants is not None and len(constants) != len(kinds):
        raise ConfigError(f"--{what}-constant needs one value per --fit-{what} family")
    constants = constants or [None] * len(kinds)
    return [FitAssignment(k, c, gn) for k, c in zip(kinds, constants)]


def _estimate(args):
    gn = GaussNewtonConfig(epsilon=args.gn_eps, max_iter=args.gn_max_iter, damping=args.gn_damping)
    cfg = PipelineConfig(
        model=_model_from(args),
        window=WindowConfig(args.window_n, args.stride, args.anchor),
        mu_fits=_assignments(args.fit_mu, args.mu_constant, gn, "mu"),
        sigma_fits=_assignments(args.fit_sigma, args.sigma_constant, gn, "sigma"),
        output_format=args.format,
        fail_soft=args.fail_soft,
        max_workers=args.workers,
    )
    report = run_estimation(cfg, ingest_csv(args.data, args.t_column, args.x_column))
    emit_report(report, args.out)
    print(report.equation)


def _simulate(args):
    if args.steps < 1:
        raise ConfigError("--steps must be positive")
    if not args.dt > 0:
        raise ConfigError("--dt must be positive")
    grid = TimeGrid.uniform(args.t0, args.dt, args.steps)
    simulate_command(_model_from(args), args.mu, args.sigma, args.x0, grid,
                     seed=args.seed, path=args.out)


def _reproduce(args):
    cfg = PRESETS[args.preset]()
    report = run_estimation(cfg, bundled_dataset(args.preset))
    emit_report(report, args.out, args.format)
    print(report.equation)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("TVUDE_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"estimate": _estimate, "simulate": _simulate, "reproduce": _reproduce}[args.command]
    try:
        handler(args)
    except TvudeError as exc:
        print(f"tvude {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
