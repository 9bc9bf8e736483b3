"""Replanning loop: assemble Q → choose direction → follow the geodesic → repeat."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .config import Scenario
from .errors import DegenerateGeometryError, DomainError, GeometryError, NonFiniteFieldError
from .manifold import (
    FAILED,
    STOPPED,
    GeodesicState,
    InducedMetric,
    MetricSource,
    SensorMetric,
    integrate_geodesic,
    spd_metric,
)
from .quadrature import Prior, build_grid
from .sensor_model import SensorConfiguration, VonMisesModel, bearing, fisher_information
from .spd import sym_eigen

log = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-9

COMPLETE = "complete"
GUARD = "guard"
DEGENERATE = "degenerate"

CONTINUITY = "continuity"
CLOSING = "closing"
SIGN_RULES = (CONTINUITY, CLOSING)

PriorUpdate = Callable[[Prior, SensorConfiguration, float], Prior]


@dataclass(frozen=True, eq=False)
class PlanRecord:
    time: float
    sigma: SensorConfiguration
    direction: np.ndarray | None
    q_eigenvalues: np.ndarray
    det_fisher: float
    bearing_separation: float


@dataclass
class PlanTrace:
    records: list[PlanRecord] = field(default_factory=list)
    samples: list[GeodesicState] = field(default_factory=list)
    status: str = COMPLETE
    message: str | None = None

    @property
    def last_direction(self) -> np.ndarray | None:
        for record in reversed(self.records):
            if record.direction is not None:
                return record.direction
        return None

    @property
    def final_sigma(self) -> SensorConfiguration:
        return self.records[-1].sigma


def keep_prior(prior: Prior, sigma: SensorConfiguration, time: float) -> Prior:
    """Open-loop planning: the prior is never updated between replans."""
    return prior


def _tie_break(vectors: np.ndarray) -> np.ndarray:
    """Project the first coordinate axis that is not orthogonal to the eigenspace."""
    for axis in range(vectors.shape[0]):
        v = vectors @ vectors[axis]
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm
    return vectors[:, 0]


def _lexicographic_sign(v: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(v) > 1e-15)
    if nonzero.size and v[nonzero[0]] < 0:
        return -v
    return v


def initial_direction(
    sigma: SensorConfiguration,
    q,
    speed: float,
    *,
    previous: np.ndarray | None = None,
    prior_mean=None,
) -> np.ndarray:
    """Dominant eigenvector of Q, scaled so the fastest platform moves at ``speed``.

    The sign follows ``previous`` when given, otherwise the sign that brings
    the platforms closer (in summed distance) to ``prior_mean``, otherwise the
    first nonzero component is made positive.
    """
    matrix = q.Q if isinstance(q, InducedMetric) else np.asarray(q, dtype=float)
    values, vectors = sym_eigen(matrix)
    if not values[0] > 0:
        raise DegenerateGeometryError("induced metric has no positive eigenvalue")
    cluster = values >= values[0] * (1.0 - TIE_TOLERANCE)
    if cluster.sum() > 1:
        log.debug("Dominant eigenvalue has multiplicity %d, breaking tie", cluster.sum())
        v = _tie_break(vectors[:, cluster])
    else:
        v = vectors[:, 0]

    signed = False
    if previous is not None:
        dot = float(v @ np.asarray(previous, dtype=float))
        if dot != 0.0:
            v = v if dot > 0 else -v
            signed = True
    if not signed and prior_mean is not None:
        offsets = sigma.positions - np.asarray(prior_mean, dtype=float)
        ranges = np.linalg.norm(offsets, axis=1)
        rate = float(np.sum(np.einsum("ja,ja->j", offsets, v.reshape(-1, 2)) / ranges))
        if abs(rate) > 1e-15:
            v = v if rate < 0 else -v
            signed = True
    if not signed:
        v = _lexicographic_sign(v)

    platform_speed = np.linalg.norm(v.reshape(-1, 2), axis=1).max()
    return v * (speed / platform_speed)


def bearing_separation(sigma: SensorConfiguration, point) -> float:
    """|φ₁ − φ₂| wrapped to [0, π]; zero for a single platform."""
    if sigma.num_platforms < 2:
        return 0.0
    p1, p2 = sigma.positions[:2]
    diff = abs(bearing(p1, point) - bearing(p2, point)) % (2.0 * math.pi)
    return 2.0 * math.pi - diff if diff > math.pi else diff


def diagnostics(sigma: SensorConfiguration, prior: Prior, model: VonMisesModel) -> tuple[float, float]:
    """det F and bearing separation at the prior mean."""
    det = float(np.linalg.det(np.asarray(fisher_information(sigma, prior.mean, model))))
    return det, bearing_separation(sigma, prior.mean)


def _guard(prior: Prior, radius: float) -> Callable[[GeodesicState], bool]:
    mean = np.asarray(prior.mean, dtype=float)

    def inside(state: GeodesicState) -> bool:
        return bool(np.any(np.linalg.norm(state.sigma.positions - mean, axis=1) < radius))

    return inside


def _record(
    source: MetricSource,
    sigma: SensorConfiguration,
    time: float,
    prior: Prior,
    model: VonMisesModel,
    direction: np.ndarray | None,
    eigenvalues: np.ndarray | None = None,
) -> PlanRecord:
    if eigenvalues is None:
        try:
            eigenvalues = sym_eigen(source.metric(sigma.coords))[0]
        except (GeometryError, NonFiniteFieldError) as exc:
            log.debug("No Q eigenvalues at t=%.6g: %s", time, exc)
            eigenvalues = np.full(sigma.dim, np.nan)
    det, sep = diagnostics(sigma, prior, model)
    return PlanRecord(time, sigma, direction, eigenvalues, det, sep)


def replan_loop(
    scenario: Scenario,
    *,
    prior_update: PriorUpdate = keep_prior,
    sign_rule: str = CONTINUITY,
) -> PlanTrace:
    """Run the iterated geodesic replanning loop for ``scenario``.

    ``sign_rule="continuity"`` keeps each new direction on the same side as
    the previous one. ``sign_rule="closing"`` re-picks the sign that brings
    the platforms closer to the prior mean at every replan; on the
    orthogonal two-platform start this raises det F monotonically but the
    direction reverses between replans.
    """
    if sign_rule not in SIGN_RULES:
        raise DomainError(f"unknown sign rule {sign_rule!r}, expected one of {SIGN_RULES}")
    prior = scenario.prior
    source = SensorMetric(scenario.model, build_grid(prior), ridge=scenario.ridge)
    sigma = scenario.initial_config
    time = 0.0
    previous = None
    trace = PlanTrace(samples=[GeodesicState(sigma, np.zeros(sigma.dim), time)])

    log.info(
        "Planning %d iterations for %d platforms", scenario.iterations, sigma.num_platforms
    )
    for it in range(scenario.iterations):
        try:
            q = spd_metric(source, sigma.coords)
            direction = initial_direction(
                sigma, np.asarray(q), scenario.speed, previous=previous, prior_mean=prior.mean
            )
        except (GeometryError, NonFiniteFieldError) as exc:
            log.warning("Iteration %d/%d: geometry degenerate: %s", it + 1, scenario.iterations, exc)
            trace.records.append(_record(source, sigma, time, prior, scenario.model, None))
            trace.status, trace.message = DEGENERATE, str(exc)
            return trace

        record = _record(
            source, sigma, time, prior, scenario.model, direction, sym_eigen(q)[0]
        )
        trace.records.append(record)
        log.info(
            "Iteration %d/%d: t=%.3f det F=%.6g separation=%.4f",
            it + 1, scenario.iterations, time, record.det_fisher, record.bearing_separation,
        )

        path = integrate_geodesic(
            source,
            GeodesicState(sigma, direction, time),
            scenario.replan_period,
            scenario.ode_step,
            stop_when=_guard(prior, scenario.guard_radius),
        )
        trace.samples.extend(path.states[1:])
        sigma, time = path.final.sigma, path.final.time
        if sign_rule == CONTINUITY:
            previous = direction

        if path.status == STOPPED:
            log.warning("Platform reached the guard radius at t=%.3f, stopping", time)
            trace.status = GUARD
            trace.message = f"guard radius {scenario.guard_radius} reached at t={time:.6g}"
            break
        if path.status == FAILED:
            trace.status, trace.message = DEGENERATE, path.error
            break

        updated = prior_update(prior, sigma, time)
        if updated is not prior:
            prior = updated
            source = SensorMetric(scenario.model, build_grid(prior), ridge=scenario.ridge)

    if time > trace.records[-1].time:
        trace.records.append(_record(source, sigma, time, prior, scenario.model, None))
    log.info("Plan %s after %d records, t=%.3f", trace.status, len(trace.records), time)
    return trace


def extrapolate(trace: PlanTrace, duration: float) -> SensorConfiguration:
    """Continue every platform in a straight line along the last chosen direction."""
    if not trace.records:
        raise ValueError("cannot extrapolate an empty trace")
    last = trace.final_sigma
    direction = trace.last_direction
    if duration == 0 or direction is None:
        return last
    return SensorConfiguration(last.coords + duration * direction)
