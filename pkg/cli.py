"""
Command-line harness for the c.o.c. simulator and solvers.

    coc-meanfield --config cfg.json --seed 7 --out results/ ssai-left --n-list 100 1000

Exit code 0 when every declared assertion passes, 1 when one fails and 2
on any error (printed to stderr as a JSON document).
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from models.experiment import ExperimentKind, ExperimentSpec
from models.system_config import SystemConfig
from services.crossing import CrossingCalculator
from services.experiments import ExperimentRunner
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from services.operator_fp import StructureChecker
from services.particle_sim import ParticleSimulator
from services.report_writer import ReportWriter
from services.wave_solver import WaveSolver
from utils.errors import CocSimError, ExperimentError, ValidationError
from utils.logging import setup_logging
from utils.settings import Settings

logger = logging.getLogger(__name__)

EXPERIMENTS = {
    "vn-convergence": ExperimentKind.VN_CONVERGENCE,
    "ssai-left": ExperimentKind.SSAI_LEFT,
    "ssai-right": ExperimentKind.SSAI_RIGHT,
    "phi1-bound": ExperimentKind.PHI1_BOUND,
    "load-curve": ExperimentKind.LOAD_CURVE,
}


def _print_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_config(path: Optional[str]) -> SystemConfig:
    if not path:
        raise ValidationError("--config is required for this command", field="config")
    try:
        cfg = SystemConfig.load(path)
    except OSError as e:
        raise ExperimentError(f"cannot read config {path}: {e}", experiment="", error_code="IO_ERROR") from e
    ModelCore.validate_config(cfg)
    return cfg


def _csv_target(out: str, default_name: str) -> str:
    """`out` itself when it names a .csv file, else `default_name` inside the directory `out`."""
    if out.endswith(".csv"):
        parent = os.path.dirname(out)
        if parent:
            os.makedirs(parent, exist_ok=True)
        return out
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, default_name)


def _cmd_simulate(args, cfg: SystemConfig) -> int:
    rng = np.random.default_rng(args.seed)
    rows = ParticleSimulator.record_trajectory(
        cfg, args.n, args.horizon, args.record_every, rng, snapshot_dir=args.snapshot_dir
    )
    if args.out:
        path = _csv_target(args.out, f"simulate_{cfg.config_hash()}_{args.seed}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            ParticleSimulator.write_trajectory_csv(rows, fh)
        logger.info("Wrote trajectory to %s", path)
    else:
        ParticleSimulator.write_trajectory_csv(rows, sys.stdout)
    return 0


def _cmd_fixed_point(args, cfg: SystemConfig) -> int:
    fp = WaveSolver.fixed_point(cfg, v=args.v)
    if not args.out:
        _print_json(fp.to_dict())
        return 0
    base = _csv_target(args.out, f"fixed_point_{cfg.config_hash()}.csv")[: -len(".csv")]
    FieldCalculator.to_csv(fp.field, f"{base}.csv")
    with open(f"{base}.json", "w", encoding="utf-8") as fh:
        json.dump(fp.sidecar(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    logger.info("Wrote %s fixed point to %s", fp.classification.value, base)
    return 0


def _cmd_speed_range(args, cfg: SystemConfig) -> int:
    if not args.out:
        _print_json(WaveSolver.speed_range(cfg, tol_v=args.tol).to_dict())
        return 0
    spec = ExperimentSpec(
        kind=ExperimentKind.SPEED_RANGE_REPORT,
        config=cfg,
        seed=args.seed,
        out_dir=args.out,
        config_path=args.config,
        tol_v=args.tol,
    )
    report = ExperimentRunner.run(spec)
    ReportWriter.emit(report, args.out)
    _print_json(report.references["speed_range"])
    return 0 if report.passed else 1


def _cmd_experiment(args, cfg: SystemConfig) -> int:
    options = {
        "n_list": tuple(args.n_list) if args.n_list else None,
        "horizon": args.horizon,
        "burn_in": args.burn_in,
        "replicas": args.replicas,
        "speeds": tuple(args.speeds) if args.speeds else None,
        "nu": args.nu,
        "batches": args.batches,
        "stride": args.stride,
        "window": args.window,
        "tol_v": args.tol,
    }
    spec = ExperimentSpec(
        kind=EXPERIMENTS[args.command],
        config=cfg,
        seed=args.seed,
        out_dir=args.out,
        config_path=args.config,
        workers=args.workers,
        **{k: v for k, v in options.items() if v is not None},
    )
    report = ExperimentRunner.run(spec)
    if args.out:
        ReportWriter.emit(report, args.out)
    else:
        _print_json(report.to_dict())
    for assertion in report.assertions:
        if not assertion.passed:
            logger.warning("Assertion %s failed: %s", assertion.name, assertion.detail)
    return 0 if report.passed else 1


def _cmd_dmono_check(args, cfg: SystemConfig) -> int:
    if not 0 <= args.class_index < len(cfg.classes):
        raise ValidationError(
            f"class index {args.class_index} out of range", field="class_index", error_code="PARAM_RANGE"
        )
    rng = np.random.default_rng(args.seed)
    report = StructureChecker.d_monotonicity_check(cfg.classes[args.class_index], args.gaps, args.samples, rng)
    _print_json(report.to_dict())
    return 0 if report.is_d_monotone else 1


def _cmd_h_eval(args, cfg: SystemConfig) -> int:
    if args.field:
        x = FieldCalculator.from_csv(args.field)
    elif args.samples:
        x = FieldCalculator.from_samples(args.samples)
    else:
        raise ValidationError("h-eval needs --field or --samples", field="field")
    rng = np.random.default_rng(args.seed)
    h = CrossingCalculator.compute_h(x, args.w, cfg, method=args.method, rng=rng)
    _print_json({"w": args.w, "h": h, "lambda_h": cfg.lam * h, "method": args.method})
    return 0


def _cmd_uniqueness_probe(args, cfg: SystemConfig) -> int:
    probe = WaveSolver.uniqueness_probe(cfg, v=args.v, loads=args.loads)
    _print_json(probe.to_dict())
    return 0


def _global_flags(settings: Settings, suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand."""
    flags = argparse.ArgumentParser(add_help=False)
    # subcommand copies must not overwrite values given before the subcommand
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    flags.add_argument("--config", default=default(None), help="system config JSON")
    flags.add_argument("--seed", type=int, default=default(0), help="master seed")
    flags.add_argument(
        "--out",
        default=default(None),
        help="output directory, or a .csv file for simulate and fixed-point (stdout when omitted)",
    )
    flags.add_argument("--workers", type=int, default=default(settings.workers), help="replica worker processes")
    flags.add_argument("--log-level", default=default(None), help="DEBUG, INFO, WARNING or ERROR")
    return flags


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coc-meanfield",
        description="Simulator and mean-field solvers for cancel-on-completion particle systems",
        parents=[_global_flags(settings, suppress=False)],
    )
    common = _global_flags(settings, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="record a particle-system trajectory")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--record-every", type=float, default=1.0)
    p.add_argument("--snapshot-dir", default=None, help="dump a tail field per record")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("fixed-point", parents=[common], help="fixed point for the config's frame")
    p.add_argument("--v", type=float, default=None, help="drift speed (config speed when omitted)")
    p.set_defaults(handler=_cmd_fixed_point)

    p = sub.add_parser("speed-range", parents=[common], help="bracket [v_min, v_max] of the free system")
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(handler=_cmd_speed_range)

    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        p.add_argument("--n-list", type=int, nargs="+")
        p.add_argument("--horizon", type=float)
        p.add_argument("--burn-in", type=float)
        p.add_argument("--replicas", type=int)
        p.add_argument("--speeds", type=float, nargs="+")
        p.add_argument("--nu", type=float)
        p.add_argument("--batches", type=int)
        p.add_argument("--stride", type=float)
        p.add_argument("--window", type=float)
        p.add_argument("--tol", type=float)
        p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("dmono-check", parents=[common], help="D-monotonicity of one job class")
    p.add_argument("--class-index", type=int, default=0)
    p.add_argument("--gaps", type=float, nargs="+", default=[0.0, 0.5, 2.0])
    p.add_argument("--samples", type=int, default=20_000)
    p.set_defaults(handler=_cmd_dmono_check)

    p = sub.add_parser("h-eval", parents=[common], help="crossing intensity h at one level")
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--field", help="tail field CSV")
    p.add_argument("--samples", type=float, nargs="+", help="particle locations")
    p.add_argument("--method", choices=("auto", "exact", "mc"), default="auto")
    p.set_defaults(handler=_cmd_h_eval)

    p = sub.add_parser("uniqueness-probe", parents=[common], help="boundary-load scan of a left frame")
    p.add_argument("--v", type=float, default=None)
    p.add_argument("--loads", type=float, nargs="+", default=None)
    p.set_defaults(handler=_cmd_uniqueness_probe)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    settings = Settings.from_env()
    args = build_parser(settings).parse_args(argv)
    if not settings.is_testing:
        setup_logging(
            level=args.log_level or settings.log_level,
            sentry_dsn=settings.sentry_dsn,
            sentry_env=settings.environment,
            stream=sys.stderr,
        )

    try:
        cfg = _load_config(args.config)
        return args.handler(args, cfg)
    except CocSimError as e:
        logger.error("%s failed: %s", args.command, e)
        sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True, default=str) + "\n")
        return 2
    except OSError as e:
        logger.error("%s failed: %s", args.command, e)
        sys.stderr.write(json.dumps({"error": "OSError", "error_code": "IO_ERROR", "message": str(e)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
