"""
Command-line front end.

Exit codes: 0 success, 1 validation or plan failure, 2 inconclusive verdicts,
3 no scale function, 4 explosive configuration refused.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .classifier import N0_CHOICES, classify_all
from .errors import (ConfigError, DomainError, ExplosiveConfigError, PlanError,
                     PreconditionError, ScaleUnavailableError)
from .ingest import dump_manifest, dump_report, load_config, load_layers
from .layered import build_layered, classify_layered, dispersion_stats, drift_table, simulate_xy
from .models import ManifestSchema, ReportSchema
from .scale import build_scale, phi_quadrature, scale_pipeline
from .series import K_MAX
from .simulation import Recording, Scheme, SimPlan, simulate_path, simulation_pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INCONCLUSIVE = 2
EXIT_NO_SCALE = 3
EXIT_EXPLOSIVE = 4
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FLOAT_FORMAT = "%.17g"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors map to the validation exit code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {path}")
    return path


def _add_plan_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.EULER.value)
    parser.add_argument("--x0", type=float, default=0.0)
    parser.add_argument("--t", type=float, default=1.0, dest="horizon")
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--paths", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=None, help="required for every simulation")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--x-max", type=float, default=None)
    parser.add_argument("--cluster-radius", type=float, default=None)
    parser.add_argument("--record", choices=[r.value for r in Recording],
                        default=Recording.ENDPOINTS.value)
    parser.add_argument("--record-every", type=int, default=1)
    parser.add_argument("--levels", type=float, nargs="+", default=[])
    parser.add_argument("--eps", type=float, default=0.02)
    parser.add_argument("--burn-in", type=float, default=0.0)
    parser.add_argument("--no-bridge", action="store_true")
    parser.add_argument("--allow-explosive", action="store_true")
    parser.add_argument("--out", default="out")


def build_argument_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skewdiff", description="Countably skewed Brownian motion toolkit")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    classify = commands.add_parser("classify", help="classify a configuration")
    classify.add_argument("config")
    classify.add_argument("--k-max", type=int, default=K_MAX)
    classify.add_argument("--n0", type=int, choices=N0_CHOICES, default=1)
    classify.add_argument("--json", action="store_true", help="also print the report")
    classify.add_argument("--out", default="out")

    scale = commands.add_parser("scale", help="scale-function queries")
    scale.add_argument("config")
    scale.add_argument("--eval", type=float, nargs="+", default=None)
    scale.add_argument("--phi", type=float, nargs="+", default=None)
    scale.add_argument("--hitting", type=float, nargs=3, action="append", default=None,
                       metavar=("X", "A", "B"))
    scale.add_argument("--exit", type=float, nargs=3, action="append", default=None,
                       metavar=("X", "A", "B"))
    scale.add_argument("--invariant", action="store_true")
    scale.add_argument("--verify", action="store_true",
                       help="compare Φ with adaptive quadrature")
    scale.add_argument("--out", default="out")

    simulate = commands.add_parser("simulate", help="simulate paths")
    simulate.add_argument("config")
    _add_plan_arguments(simulate)

    mc = commands.add_parser("mc", help="Monte Carlo estimators")
    mc.add_argument("estimator", choices=sorted(simulation_pipeline.estimators))
    mc.add_argument("config")
    mc.add_argument("--a", type=float, default=-1.0)
    mc.add_argument("--b", type=float, default=1.0)
    mc.add_argument("--level", type=float, default=0.0)
    mc.add_argument("--bins", type=int, default=50)
    _add_plan_arguments(mc)

    layered = commands.add_parser("layered", help="layered-media model")
    layered.add_argument("action", choices=["classify", "simulate", "dispersion"])
    layered.add_argument("layers")
    layered.add_argument("--y0", type=float, default=0.0)
    layered.add_argument("--times", type=float, nargs="+", default=None)
    _add_plan_arguments(layered)
    return parser


def plan_from_args(args: argparse.Namespace, **overrides) -> SimPlan:
    fields = dict(scheme=Scheme(args.scheme), x0=args.x0, horizon=args.horizon, dt=args.dt,
                  n_paths=args.paths, seed=args.seed, x_max=args.x_max,
                  cluster_radius=args.cluster_radius, record=Recording(args.record),
                  threads=args.threads, allow_explosive=args.allow_explosive,
                  levels=tuple(args.levels), eps=args.eps, bridge=not args.no_bridge,
                  burn_in=args.burn_in, record_every=args.record_every)
    fields.update(overrides)
    return SimPlan(**fields)


@dataclass
class CommandContext:
    args: argparse.Namespace
    argv: List[str]
    out: Path
    config_paths: List[str]
    censor_bounds: Optional[Tuple[float, float]] = None
    notes: List[str] = field(default_factory=list)


class CommandRunner:
    """Dispatches a parsed command and maps failures to exit codes."""

    def __init__(self):
        self.commands: Dict[str, Callable[[CommandContext], int]] = {
            'classify': self._cmd_classify,
            'scale': self._cmd_scale,
            'simulate': self._cmd_simulate,
            'mc': self._cmd_mc,
            'layered': self._cmd_layered,
        }

    def run(self, args: argparse.Namespace, argv: List[str]) -> int:
        if args.command not in self.commands:
            raise ValueError(f"Unknown command: {args.command}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.getLogger().addHandler(handler)
        paths = [getattr(args, "config", None) or getattr(args, "layers", None)]
        context = CommandContext(args, argv, out, [p for p in paths if p])
        logger.info(f"Starting command: {args.command}")
        try:
            code = self._dispatch(context)
        finally:
            logging.getLogger().removeHandler(handler)
            handler.close()
        self._write_manifest(context, code)
        return code

    def _dispatch(self, context: CommandContext) -> int:
        try:
            return self.commands[context.args.command](context)
        except ConfigError as e:
            logger.error(f"Validation failed: {e}")
            for diagnostic in e.diagnostics:
                print(diagnostic, file=sys.stderr)
            return EXIT_INVALID
        except ScaleUnavailableError as e:
            logger.error(f"Scale function unavailable: {e}")
            print(f"no scale function: {e}", file=sys.stderr)
            return EXIT_NO_SCALE
        except ExplosiveConfigError as e:
            logger.error(f"Simulation refused: {e}")
            print(str(e), file=sys.stderr)
            print(json.dumps(e.evidence, indent=2, default=str), file=sys.stderr)
            return EXIT_EXPLOSIVE
        except PreconditionError as e:
            logger.error(f"Layered build failed: {e}")
            print(f"{e} {json.dumps(e.evidence, default=str)}", file=sys.stderr)
            return EXIT_INVALID
        except (PlanError, DomainError) as e:
            logger.error(f"Invalid request: {e}")
            print(str(e), file=sys.stderr)
            return EXIT_INVALID

    def _write_manifest(self, context: CommandContext, code: int):
        args = context.args
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("command", "config", "layers", "out", "seed", "threads")}
        manifest = ManifestSchema(
            command=args.command, arguments=context.argv, config_paths=context.config_paths,
            overrides=overrides, seed=getattr(args, "seed", None),
            threads=getattr(args, "threads", 1), output_dir=str(context.out),
            tool_version=__version__, exit_code=code, created_at=datetime.now(timezone.utc),
            censor_bounds=context.censor_bounds, notes=context.notes)
        dump_manifest(manifest, context.out / "manifest.json")

    # commands

    def _cmd_classify(self, context: CommandContext) -> int:
        args = context.args
        config = load_config(args.config)
        report = classify_all(config, n0=args.n0, k_max=args.k_max)
        dump_report(report, context.out / "report.json")
        if args.json:
            print(ReportSchema.from_report(report).model_dump_json(by_alias=True, indent=2))
        if not report.conclusive:
            logger.warning(f"Inconclusive verdicts for {config.name}")
            return EXIT_INCONCLUSIVE
        return EXIT_OK

    def _cmd_scale(self, context: CommandContext) -> int:
        args = context.args
        config = load_config(args.config)
        sf = build_scale(config)
        queries = {
            'eval': [args.eval] if args.eval else [],
            'phi': [args.phi] if args.phi else [],
            'hitting': args.hitting or [],
            'exit': args.exit or [],
            'invariant': [[]] if args.invariant else [],
        }
        for query, calls in queries.items():
            if not calls:
                continue
            frame = pd.concat([scale_pipeline.run(sf, query, list(call)) for call in calls],
                              ignore_index=True)
            if query == 'phi' and args.verify:
                frame["phi_quadrature"] = [phi_quadrature(sf, float(x), "double")
                                           for x in frame["x"]]
                frame["abs_diff"] = (frame["phi"] - frame["phi_quadrature"]).abs()
            write_csv(frame, context.out / f"scale_{query}.csv")
        return EXIT_OK

    def _cmd_simulate(self, context: CommandContext) -> int:
        args = context.args
        config = load_config(args.config)
        sf = build_scale(config)
        ensemble = simulate_path(config, sf, plan_from_args(args))
        context.censor_bounds = ensemble.censor_bounds
        context.notes.extend(cut.describe() for cut in ensemble.censor_cuts)
        write_csv(ensemble.endpoint_frame(), context.out / "endpoints.csv")
        if ensemble.paths is not None:
            write_csv(ensemble.path_frame(), context.out / "paths.csv")
        if ensemble.qv is not None:
            write_csv(ensemble.functional_frame(), context.out / "functionals.csv")
        return EXIT_OK

    def _cmd_mc(self, context: CommandContext) -> int:
        args = context.args
        config = load_config(args.config)
        sf = build_scale(config)
        plan = plan_from_args(args)
        params = {
            'hit': dict(a=args.a, b=args.b),
            'exit': dict(a=args.a, b=args.b),
            'occupation': dict(bins=args.bins),
            'localtime': dict(level=args.level),
            'qv': {},
        }[args.estimator]
        frame = simulation_pipeline.estimate(args.estimator, config, sf, plan, **params)
        write_csv(frame, context.out / f"mc_{args.estimator}.csv")
        return EXIT_OK

    def _cmd_layered(self, context: CommandContext) -> int:
        args = context.args
        model = build_layered(load_layers(args.layers))
        if args.action == "classify":
            report = classify_layered(model)
            frame = pd.DataFrame([{
                "name": report.name, "recurrent": report.recurrent.value,
                "positive_recurrent": report.positive_recurrent.value,
                "psi_lo": report.psi_range[0], "psi_hi": report.psi_range[1],
                "effective_alpha": model.effective_alpha, "note": report.note}])
            write_csv(frame, context.out / "layered_report.csv")
            write_csv(drift_table(model), context.out / "layered_drift.csv")
            return EXIT_OK if report.recurrent.value != "unknown" else EXIT_INCONCLUSIVE
        record = Recording.FULL if args.action == "dispersion" else Recording(args.record)
        ensemble = simulate_xy(model, plan_from_args(args, record=record), y0=args.y0)
        x_bounds = model.psi(np.asarray(ensemble.z.censor_bounds))
        context.censor_bounds = (float(x_bounds[0]), float(x_bounds[1]))
        context.notes.extend(cut.describe() for cut in ensemble.z.censor_cuts)
        if args.action == "dispersion":
            write_csv(dispersion_stats(ensemble, args.times), context.out / "dispersion.csv")
            return EXIT_OK
        write_csv(pd.DataFrame({"path_id": range(ensemble.y_terminal.size),
                                "x": ensemble.x_terminal, "y": ensemble.y_terminal,
                                "censored": ensemble.z.censored}),
                  context.out / "xy_endpoints.csv")
        return EXIT_OK


# Singleton instance
command_runner = CommandRunner()


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_argument_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"skewdiff: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format=LOG_FORMAT)
    return command_runner.run(args, argv)


if __name__ == "__main__":
    sys.exit(main())
