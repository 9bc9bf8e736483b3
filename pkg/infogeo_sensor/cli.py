"""CLI entry point for infogeo_sensor."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .checks import divergence_check, fisher_check
from .config import Scenario, load_scenario, with_overrides
from .errors import InfogeoError
from .manifold import GeodesicState, SensorMetric, integrate_geodesic, spd_metric
from .output import emit_svg, write_geodesic_csv, write_trace_csv
from .planner import COMPLETE, CONTINUITY, DEGENERATE, SIGN_RULES, initial_direction, replan_loop
from .quadrature import build_grid
from .sensor_model import VonMisesModel

log = logging.getLogger(__name__)

DEFAULT_SCENARIO = "fig3.scenario"
SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def _find_scenario(name: str | None) -> Path:
    """Look for a scenario file as given, then in the shipped scenarios directory."""
    name = name or DEFAULT_SCENARIO
    candidates = [Path(name), SCENARIO_DIR / name, SCENARIO_DIR / f"{name}.scenario"]
    for p in candidates:
        if p.is_file():
            return p
    raise FileNotFoundError(f"scenario {name!r} not found")


def _load(args: argparse.Namespace) -> tuple[Path, Scenario]:
    path = _find_scenario(args.scenario)
    scenario = with_overrides(
        load_scenario(path),
        seed=args.seed,
        quadrature_order=args.quadrature_order,
        ridge=args.ridge,
    )
    return path, scenario


def _output_path(args: argparse.Namespace, configured: str | None, fallback: str) -> Path:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / (configured or fallback)


def _simulate(args: argparse.Namespace) -> int:
    path, scenario = _load(args)
    trace = replan_loop(scenario, sign_rule=args.sign_rule)
    csv_path = _output_path(args, args.csv or scenario.output.csv, f"{path.stem}.csv")
    write_trace_csv(trace, csv_path)
    print(f"Wrote: {csv_path} ({len(trace.records)} records, status {trace.status})")

    svg_name = args.svg or scenario.output.svg
    if svg_name:
        svg_path = _output_path(args, svg_name, f"{path.stem}.svg")
        emit_svg(
            trace,
            svg_path,
            prior=scenario.prior,
            target=scenario.target,
            extrapolation=scenario.extrapolation,
        )
        print(f"Wrote: {svg_path}")

    if trace.status == DEGENERATE:
        log.error("Plan ended early: %s", trace.message)
        return EXIT_ERROR
    if trace.status != COMPLETE:
        log.warning("Plan ended with status %s: %s", trace.status, trace.message)
    return EXIT_OK


def _geodesic(args: argparse.Namespace) -> int:
    path, scenario = _load(args)
    source = SensorMetric(scenario.model, build_grid(scenario.prior), ridge=scenario.ridge)
    sigma = scenario.initial_config
    velocity = initial_direction(
        sigma, np.asarray(spd_metric(source, sigma.coords)), scenario.speed,
        prior_mean=scenario.prior.mean,
    )
    horizon = args.horizon if args.horizon is not None else scenario.replan_period
    step = args.step if args.step is not None else scenario.ode_step
    geodesic = integrate_geodesic(source, GeodesicState(sigma, velocity), horizon, step)
    csv_path = _output_path(args, args.csv, f"{path.stem}-geodesic.csv")
    write_geodesic_csv(geodesic.states, source, csv_path)
    print(f"Wrote: {csv_path} ({len(geodesic.states)} states, status {geodesic.status})")
    if geodesic.status != COMPLETE:
        log.error("Geodesic ended early at t=%s: %s", geodesic.failed_at, geodesic.error)
        return EXIT_ERROR
    return EXIT_OK


def _fisher_check(args: argparse.Namespace) -> int:
    _, scenario = _load(args)
    model = VonMisesModel(args.kappa) if args.kappa is not None else scenario.model
    seed = args.seed if args.seed is not None else scenario.output.seed
    report = fisher_check(
        scenario.initial_config,
        {"prior mean": scenario.prior.mean, "target": scenario.target},
        model,
        samples=args.samples,
        seed=seed,
    )
    for label, err in report.errors.items():
        print(f"  {label:<12} relative error {err:.3e}")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: kappa={model.kappa:g}, max relative error {report.max_relative_error:.3e}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _divergence_check(args: argparse.Namespace) -> int:
    order = args.quadrature_order if args.quadrature_order is not None else 3
    report = divergence_check(seed=args.seed or 0, trials=args.trials, order=order)
    print(f"  KL    max relative error {max(report.kl_errors):.3e}")
    print(f"  MI    max relative error {max(report.mi_errors):.3e}")
    print(f"  KL-MI max relative error {max(report.cross_errors):.3e}")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {report.trials} trials")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Random seed (overrides the scenario)")
    common.add_argument(
        "--output", "-o",
        type=Path,
        default=Path("."),
        help="Directory for output files (default: current directory)",
    )
    common.add_argument(
        "--quadrature-order",
        type=_positive_int,
        default=None,
        help="Gauss-Hermite order per axis (overrides the scenario)",
    )
    common.add_argument("--ridge", action="store_true", help="Regularize Fisher matrices with a ridge")
    common.add_argument(
        "--verbose", "-v",
        action="count",
        default=1,
        help="Increase verbosity (default: INFO, -v for DEBUG)",
    )
    common.add_argument("--quiet", "-q", action="store_true", help="Only show warnings and errors")
    return common


def _log_level(args: argparse.Namespace) -> int:
    if args.quiet:
        return logging.WARNING
    if args.verbose >= 2:
        return logging.DEBUG
    if args.verbose >= 1:
        return logging.INFO
    return logging.WARNING


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="infogeo-sensor",
        description="Information-geometric sensor management for bearings-only localization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Run the replanning loop")
    p.add_argument("scenario", nargs="?", default=None, help=f"Scenario file (default: {DEFAULT_SCENARIO})")
    p.add_argument("--csv", default=None, help="Trace CSV file name")
    p.add_argument("--svg", default=None, help="Trajectory SVG file name")
    p.add_argument(
        "--sign-rule",
        choices=SIGN_RULES,
        default=CONTINUITY,
        help="How each replan orients the dominant eigenvector (default: %(default)s)",
    )
    p.set_defaults(handler=_simulate)

    p = sub.add_parser("geodesic", parents=[common], help="Integrate one geodesic from the initial configuration")
    p.add_argument("scenario", nargs="?", default=None, help=f"Scenario file (default: {DEFAULT_SCENARIO})")
    p.add_argument("--horizon", type=float, default=None, help="Integration horizon (default: replan period)")
    p.add_argument("--step", type=float, default=None, help="RK4 step (default: scenario ode_step)")
    p.add_argument("--csv", default=None, help="Geodesic CSV file name")
    p.set_defaults(handler=_geodesic)

    p = sub.add_parser("fisher-check", parents=[common], help="Analytic Fisher vs Monte-Carlo oracle")
    p.add_argument("--scenario", default=None, help=f"Scenario file (default: {DEFAULT_SCENARIO})")
    p.add_argument("--kappa", type=float, default=None, help="Override the scenario's kappa")
    p.add_argument("--samples", type=_positive_int, default=1_000_000, help="Monte-Carlo sample count")
    p.set_defaults(handler=_fisher_check)

    p = sub.add_parser("divergence-check", parents=[common], help="KL/MI Hessians vs the metric inner product")
    p.add_argument("--trials", type=_positive_int, default=50, help="Number of random field pairs")
    p.set_defaults(handler=_divergence_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=_log_level(args),
        format="%(levelname)-8s %(name)s: %(message)s",
    )

    try:
        return args.handler(args)
    except (InfogeoError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR
