"""Induced Riemannian geometry on the sensor manifold S.

The metric-space inner product pulled back through σ ↦ F(σ) gives, in sensor
coordinates,

    Q_ij(σ) = ∫ Tr(F⁻¹ ∂_iF F⁻¹ ∂_jF) dF(θ).

Geodesics of Q are integrated with fixed-step RK4. Anything with a
``metric(coords)`` method can stand in for the sensor-derived Q, which is how
the flat and conformal reference metrics are plugged in.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.integrate

from . import spd
from .errors import (
    DegenerateGeometryError,
    DomainError,
    GeometryError,
    NonFiniteFieldError,
    PositiveDefinitenessError,
)
from .ode import rk4_step, step_count
from .parallel import ordered_map
from .quadrature import QuadratureGrid, weighted_sum
from .sensor_model import (
    RIDGE_EPSILON,
    SensorConfiguration,
    VonMisesModel,
    fisher_derivative_stack,
    fisher_stack,
    ridge_regularize,
)

log = logging.getLogger(__name__)

LEVI_CIVITA = "levi-civita"
EXPANDED_FORM = "expanded"

COMPLETE = "complete"
STOPPED = "stopped"
FAILED = "failed"


class MetricSource(Protocol):
    def metric(self, coords: np.ndarray) -> np.ndarray:
        """Symmetric n×n metric matrix at the flat sensor coordinates."""
        ...


class SensorMetric:
    """Q(σ) assembled from the bearings Fisher model over a quadrature grid."""

    def __init__(self, model: VonMisesModel, grid: QuadratureGrid, *, ridge: bool = False):
        self.model = model
        self.grid = grid
        self.ridge = ridge

    def metric(self, coords: np.ndarray) -> np.ndarray:
        positions = np.asarray(coords, dtype=float).reshape(-1, 2)
        nodes = self.grid.nodes
        fisher = fisher_stack(positions, nodes, self.model.strength)
        derivs = fisher_derivative_stack(positions, nodes, self.model.strength)
        if self.ridge:
            fisher = ridge_regularize(fisher)
            trace = np.trace(derivs, axis1=-2, axis2=-1)
            derivs = derivs + RIDGE_EPSILON * trace[..., None, None] * np.eye(2)
        spd.cholesky_batch(fisher, nodes)
        # (N, n, 2, 2): F⁻¹ ∂_k F at every node
        scaled = np.linalg.solve(fisher[:, None], derivs)
        integrand = np.einsum("niab,njba->nij", scaled, scaled)
        return spd.symmetrize(weighted_sum(integrand, self.grid))


@dataclass(frozen=True)
class FlatMetric:
    """A σ-independent metric."""

    matrix: np.ndarray

    def metric(self, coords: np.ndarray) -> np.ndarray:
        return spd.symmetrize(np.asarray(self.matrix, dtype=float))


@dataclass(frozen=True)
class ConformalMetric:
    """Q(σ) = exp(2 σ_axis) · I."""

    dim: int = 2
    axis: int = 0

    def metric(self, coords: np.ndarray) -> np.ndarray:
        return math.exp(2.0 * float(coords[self.axis])) * np.eye(self.dim)


@dataclass(frozen=True)
class InducedMetric:
    sigma: SensorConfiguration
    matrix: spd.SpdMatrix

    @property
    def Q(self) -> np.ndarray:
        return np.asarray(self.matrix)


def spd_metric(source: MetricSource, coords: np.ndarray) -> spd.SpdMatrix:
    """Q at ``coords``; a singular Q raises DegenerateGeometryError."""
    matrix = source.metric(coords)
    try:
        return spd.SpdMatrix(matrix)
    except PositiveDefinitenessError as exc:
        raise DegenerateGeometryError(
            f"induced metric is singular at σ = {np.asarray(coords).tolist()}"
        ) from exc


def induced_metric(
    sigma: SensorConfiguration,
    model: VonMisesModel,
    grid: QuadratureGrid,
    *,
    ridge: bool = False,
) -> InducedMetric:
    """The pulled-back metric Q at ``sigma``.

    Raises PositiveDefinitenessError (naming the node) when a Fisher matrix is
    singular, and DegenerateGeometryError when Q itself is.
    """
    source = SensorMetric(model, grid, ridge=ridge)
    return InducedMetric(sigma=sigma, matrix=spd_metric(source, sigma.coords))


def _fd_step(value: float, step: float | None) -> float:
    return step if step is not None else 1e-4 * (1.0 + abs(value))


def metric_jacobian(
    source: MetricSource, sigma, axis: int, *, step: float | None = None
) -> np.ndarray:
    """∂Q/∂σ_axis by a central difference."""
    coords = np.asarray(getattr(sigma, "coords", sigma), dtype=float)
    h = _fd_step(coords[axis], step)
    plus, minus = coords.copy(), coords.copy()
    plus[axis] += h
    minus[axis] -= h
    return spd.symmetrize((source.metric(plus) - source.metric(minus)) / (2.0 * h))


def metric_derivatives(source: MetricSource, sigma, *, step: float | None = None) -> np.ndarray:
    """Stack ``dQ[k] = ∂Q/∂σ_k`` of shape ``(n, n, n)``."""
    coords = np.asarray(getattr(sigma, "coords", sigma), dtype=float)
    n = coords.size
    shifted = []
    for k in range(n):
        h = _fd_step(coords[k], step)
        for sign in (1.0, -1.0):
            point = coords.copy()
            point[k] += sign * h
            shifted.append(point)
    values = ordered_map(source.metric, shifted)
    dQ = np.empty((n, n, n))
    for k in range(n):
        h = _fd_step(coords[k], step)
        dQ[k] = (values[2 * k] - values[2 * k + 1]) / (2.0 * h)
    return spd.symmetrize(dQ)


@dataclass(frozen=True, eq=False)
class ChristoffelTensor:
    """Γ[l, i, j] of the Levi-Civita connection, symmetric in (i, j)."""

    symbols: np.ndarray

    def acceleration(self, velocity) -> np.ndarray:
        """−Γ(u, u)."""
        u = np.asarray(velocity, dtype=float)
        return -np.einsum("lij,i,j->l", self.symbols, u, u)


def christoffel(
    source: MetricSource,
    sigma,
    *,
    form: str = LEVI_CIVITA,
    step: float | None = None,
) -> ChristoffelTensor:
    coords = np.asarray(getattr(sigma, "coords", sigma), dtype=float)
    Q = spd_metric(source, coords)
    dQ = metric_derivatives(source, coords, step=step)
    n = coords.size
    # first[k, i, j] = ∂_i Q_kj
    first = dQ.transpose(1, 0, 2)
    if form == LEVI_CIVITA:
        second = dQ.transpose(2, 1, 0)  # ∂_j Q_ik
        lowered = 0.5 * (first + second - dQ)
        gamma = spd.solve(Q, lowered.reshape(n, n * n)).reshape(n, n, n)
    elif form == EXPANDED_FORM:
        rhs = spd.solve(Q, (-first + 0.5 * dQ).reshape(n, n * n)).reshape(n, n, n)
        gamma = -0.5 * (rhs + rhs.transpose(0, 2, 1))
    else:
        raise DomainError(f"unknown Christoffel form {form!r}")
    return ChristoffelTensor(symbols=0.5 * (gamma + gamma.transpose(0, 2, 1)))


@dataclass(frozen=True, eq=False)
class GeodesicState:
    sigma: SensorConfiguration
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if not isinstance(self.sigma, SensorConfiguration):
            object.__setattr__(self, "sigma", SensorConfiguration(self.sigma))
        u = np.array(self.velocity, dtype=float).reshape(-1)
        if u.size != self.sigma.dim:
            raise DomainError(f"velocity has {u.size} entries, configuration has {self.sigma.dim}")
        if not np.all(np.isfinite(u)):
            raise NonFiniteFieldError("geodesic velocity is not finite")
        u.setflags(write=False)
        object.__setattr__(self, "velocity", u)


@dataclass
class GeodesicPath:
    states: list[GeodesicState]
    status: str = COMPLETE
    failed_at: float | None = None
    error: str | None = None

    @property
    def final(self) -> GeodesicState:
        return self.states[-1]


def metric_speed(source: MetricSource, state: GeodesicState) -> float:
    """Q(σ)(u, u)."""
    u = state.velocity
    return float(u @ source.metric(state.sigma.coords) @ u)


def integrate_geodesic(
    source: MetricSource,
    state0: GeodesicState,
    horizon: float,
    step: float,
    *,
    stop_when: Callable[[GeodesicState], bool] | None = None,
    fd_step: float | None = None,
) -> GeodesicPath:
    """RK4 on the first-order system σ̇ = u, u̇ = −Γ(u, u).

    Geometry failures end the path early with ``status="failed"``; a
    ``stop_when`` hit ends it with ``status="stopped"`` at the last state
    that did not trigger it.
    """
    if step <= 0 or horizon < step:
        raise DomainError(f"need 0 < step <= horizon, got step={step}, horizon={horizon}")
    n = state0.sigma.dim

    def rhs(_t, y):
        gamma = christoffel(source, y[:n], step=fd_step)
        return np.concatenate([y[n:], gamma.acceleration(y[n:])])

    steps = step_count(horizon, step)
    dt = horizon / steps
    path = GeodesicPath(states=[state0])
    y = np.concatenate([state0.sigma.coords, state0.velocity])
    for i in range(steps):
        t = state0.time + (i + 1) * dt
        try:
            y = rk4_step(rhs, t - dt, y, dt)
            state = GeodesicState(SensorConfiguration(y[:n]), y[n:], t)
        except (GeometryError, NonFiniteFieldError, DomainError) as exc:
            log.warning("Geodesic failed at t=%.6g: %s", t, exc)
            path.status, path.failed_at, path.error = FAILED, t, str(exc)
            break
        if stop_when is not None and stop_when(state):
            log.debug("Geodesic stopped at t=%.6g", t)
            path.status = STOPPED
            break
        path.states.append(state)
    log.debug("Geodesic: %d states, status %s", len(path.states), path.status)
    return path


def path_energy(source: MetricSource, times, sigmas, velocities) -> float:
    """½ ∫ Q(σ(t))(u(t), u(t)) dt by the trapezoidal rule."""
    density = [
        float(u @ source.metric(np.asarray(s, dtype=float)) @ u)
        for s, u in zip(sigmas, np.asarray(velocities, dtype=float))
    ]
    return 0.5 * float(scipy.integrate.trapezoid(density, np.asarray(times, dtype=float)))
