"""Scenario files (TOML) → Scenario dataclass, and back."""

from __future__ import annotations

import dataclasses
import logging
import math
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfogeoError, ParseError, ValidationError
from .quadrature import GAUSS_HERMITE, Prior, QuadratureRule
from .sensor_model import ParameterPoint, SensorConfiguration, VonMisesModel
from .spd import SpdMatrix

log = logging.getLogger(__name__)

DEFAULT_GUARD_RADIUS = 0.05
DEFAULT_EXTRAPOLATION = 0.5


@dataclass(frozen=True)
class OutputSettings:
    csv: str | None = None
    svg: str | None = None
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    target: ParameterPoint
    prior: Prior
    model: VonMisesModel
    initial_config: SensorConfiguration
    speed: float
    replan_period: float
    iterations: int
    ode_step: float
    guard_radius: float = DEFAULT_GUARD_RADIUS
    ridge: bool = False
    extrapolation: float = DEFAULT_EXTRAPOLATION
    output: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self):
        if not self.speed > 0:
            raise ValidationError(f"speed must be > 0, got {self.speed}", key="plan.speed")
        if not self.ode_step > 0:
            raise ValidationError(f"ode_step must be > 0, got {self.ode_step}", key="plan.ode_step")
        if self.replan_period < self.ode_step:
            raise ValidationError(
                f"replan_period {self.replan_period} is shorter than ode_step {self.ode_step}",
                key="plan.replan_period",
            )
        if self.iterations < 1:
            raise ValidationError(
                f"iterations must be >= 1, got {self.iterations}", key="plan.iterations"
            )
        if self.guard_radius < 0:
            raise ValidationError("guard_radius must be >= 0", key="plan.guard_radius")
        if self.extrapolation < 0:
            raise ValidationError("extrapolation must be >= 0", key="plan.extrapolation")


_LINE_RE = re.compile(r"line (\d+)")


def _require(raw: dict, section: str, key: str):
    try:
        return raw[section][key]
    except (KeyError, TypeError):
        raise ValidationError(
            f"missing required key '{section}.{key}'", key=f"{section}.{key}"
        ) from None


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}", key=name)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite", key=name)
    return float(value)


def _integer(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer, got {value!r}", key=name)
    return value


def _matrix(value, name: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a numeric array", key=name) from None
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}", key=name)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite", key=name)
    return arr


def _parse_prior(raw: dict) -> Prior:
    section = raw.get("prior", {})
    mean = _matrix(_require(raw, "prior", "mean"), "prior.mean", (2,))
    cov_raw = _require(raw, "prior", "covariance")
    if isinstance(cov_raw, (int, float)) and not isinstance(cov_raw, bool):
        covariance = _number(cov_raw, "prior.covariance") * np.eye(2)
    else:
        covariance = _matrix(cov_raw, "prior.covariance", (2, 2))
    try:
        rule = QuadratureRule(
            kind=section.get("rule", GAUSS_HERMITE),
            order=_integer(section.get("order", 9), "prior.order"),
            samples=_integer(section.get("samples", 4096), "prior.samples"),
            seed=_integer(section.get("seed", 0), "prior.seed"),
        )
    except ValidationError:
        raise
    except InfogeoError as exc:
        raise ValidationError(str(exc), key="prior") from exc
    try:
        cov = SpdMatrix(covariance)
    except InfogeoError:
        raise ValidationError("covariance not SPD", key="prior.covariance") from None
    return Prior(mean=ParameterPoint(*mean), covariance=cov, rule=rule)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            match = _LINE_RE.search(str(exc))
            line = int(match.group(1)) if match else None
        raise ParseError(f"malformed scenario: {exc}", line=line) from exc

    target = ParameterPoint(
        _number(_require(raw, "target", "x"), "target.x"),
        _number(_require(raw, "target", "y"), "target.y"),
    )
    prior = _parse_prior(raw)
    try:
        model = VonMisesModel(_number(_require(raw, "model", "kappa"), "model.kappa"))
    except ValidationError:
        raise
    except InfogeoError as exc:
        raise ValidationError(str(exc), key="model.kappa") from exc

    positions = _matrix(_require(raw, "sensors", "positions"), "sensors.positions")
    if positions.ndim != 2 or positions.shape[1] != 2 or len(positions) < 1:
        raise ValidationError("sensors.positions must be a list of [x, y] pairs", key="sensors.positions")

    plan = raw.get("plan", {})
    output = raw.get("output", {})
    scenario = Scenario(
        target=target,
        prior=prior,
        model=model,
        initial_config=SensorConfiguration.from_positions(positions),
        speed=_number(_require(raw, "plan", "speed"), "plan.speed"),
        replan_period=_number(_require(raw, "plan", "replan_period"), "plan.replan_period"),
        iterations=_integer(_require(raw, "plan", "iterations"), "plan.iterations"),
        ode_step=_number(_require(raw, "plan", "ode_step"), "plan.ode_step"),
        guard_radius=_number(plan.get("guard_radius", DEFAULT_GUARD_RADIUS), "plan.guard_radius"),
        ridge=bool(plan.get("ridge", False)),
        extrapolation=_number(plan.get("extrapolation", DEFAULT_EXTRAPOLATION), "plan.extrapolation"),
        output=OutputSettings(
            csv=output.get("csv"),
            svg=output.get("svg"),
            seed=_integer(output.get("seed", 0), "output.seed"),
        ),
    )
    log.debug(
        "Loaded scenario: %d platforms, %d iterations", scenario.initial_config.num_platforms,
        scenario.iterations,
    )
    return scenario


def load_scenario(path: Path) -> Scenario:
    """Load a scenario file from disk."""
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _fmt(value: float) -> str:
    return repr(float(value))


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def _fmt_str(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_scenario(scenario: Scenario) -> str:
    """Serialize a scenario so that ``parse_scenario(dump_scenario(s)) == s``."""
    prior = scenario.prior
    cov = np.asarray(prior.covariance)
    lines = [
        "[target]",
        f"x = {_fmt(scenario.target.x)}",
        f"y = {_fmt(scenario.target.y)}",
        "",
        "[prior]",
        f"mean = {_fmt_list(prior.mean)}",
        "covariance = [" + ", ".join(_fmt_list(row) for row in cov) + "]",
        f'rule = "{prior.rule.kind}"',
        f"order = {prior.rule.order}",
        f"samples = {prior.rule.samples}",
        f"seed = {prior.rule.seed}",
        "",
        "[model]",
        f"kappa = {_fmt(scenario.model.kappa)}",
        "",
        "[sensors]",
        "positions = [" + ", ".join(_fmt_list(p) for p in scenario.initial_config.positions) + "]",
        "",
        "[plan]",
        f"speed = {_fmt(scenario.speed)}",
        f"replan_period = {_fmt(scenario.replan_period)}",
        f"iterations = {scenario.iterations}",
        f"ode_step = {_fmt(scenario.ode_step)}",
        f"guard_radius = {_fmt(scenario.guard_radius)}",
        f"ridge = {'true' if scenario.ridge else 'false'}",
        f"extrapolation = {_fmt(scenario.extrapolation)}",
        "",
        "[output]",
    ]
    if scenario.output.csv is not None:
        lines.append(f"csv = {_fmt_str(scenario.output.csv)}")
    if scenario.output.svg is not None:
        lines.append(f"svg = {_fmt_str(scenario.output.svg)}")
    lines.append(f"seed = {scenario.output.seed}")
    return "\n".join(lines) + "\n"


def with_overrides(
    scenario: Scenario,
    *,
    seed: int | None = None,
    quadrature_order: int | None = None,
    ridge: bool = False,
) -> Scenario:
    """Apply command-line overrides on top of a parsed scenario."""
    if quadrature_order is not None:
        rule = dataclasses.replace(scenario.prior.rule, order=quadrature_order)
        scenario = dataclasses.replace(
            scenario, prior=dataclasses.replace(scenario.prior, rule=rule)
        )
    if seed is not None:
        scenario = dataclasses.replace(
            scenario, output=dataclasses.replace(scenario.output, seed=seed)
        )
    if ridge:
        scenario = dataclasses.replace(scenario, ridge=True)
    return scenario
