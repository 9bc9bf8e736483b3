"""The space of Riemannian metrics on the parameter plane.

A point of that space is a field θ ↦ g_θ of SPD matrices; tangent vectors are
fields of symmetric matrices. All integrals over θ are taken against the
informative prior dF(θ) through a ``QuadratureGrid``.
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable

import numpy as np

from . import spd
from .errors import DomainError, GeometryError, PositiveDefinitenessError, StepTooLargeError
from .ode import rk4_step, step_count
from .parallel import ordered_map
from .quadrature import QuadratureGrid, weighted_sum
from .sensor_model import SensorConfiguration, VonMisesModel, fisher_stack, ridge_regularize

log = logging.getLogger(__name__)

PRIOR_WEIGHTING = "prior"
VOLUME_WEIGHTING = "volume"
HESSIAN_STEP = 1e-3
ASYMMETRY_TOLERANCE = 1e-10


class MatrixField:
    """A map θ ↦ symmetric matrix, optionally with a vectorized evaluator."""

    def __init__(
        self,
        evaluate: Callable[[np.ndarray], np.ndarray],
        *,
        batch: Callable[[np.ndarray], np.ndarray] | None = None,
        descriptor: str = "explicit",
    ):
        self._evaluate = evaluate
        self._batch = batch
        self.descriptor = descriptor

    def __call__(self, theta) -> np.ndarray:
        return spd.symmetrize(self._evaluate(np.asarray(theta, dtype=float)))

    def at_nodes(self, grid: QuadratureGrid) -> np.ndarray:
        if self._batch is not None:
            return spd.symmetrize(self._batch(grid.nodes))
        return np.stack(ordered_map(self, grid.nodes))

    @classmethod
    def constant(cls, matrix, descriptor: str = "constant"):
        value = spd.symmetrize(np.array(matrix, dtype=float))
        return cls(
            lambda theta: value,
            batch=lambda nodes: np.broadcast_to(value, (len(nodes),) + value.shape),
            descriptor=descriptor,
        )

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor})"


class MetricField(MatrixField):
    """A point of the metric space: SPD at every node where it is evaluated."""

    @classmethod
    def from_sensors(
        cls, sigma: SensorConfiguration, model: VonMisesModel, *, ridge: bool = False
    ) -> MetricField:
        positions = sigma.positions.copy()

        def batch(nodes):
            stack = fisher_stack(positions, nodes, model.strength)
            return ridge_regularize(stack) if ridge else stack

        return cls(lambda theta: batch(theta[None])[0], batch=batch, descriptor="from-sensor")


class TangentField(MatrixField):
    """A tangent vector: a field of symmetric matrices."""


def _solve_stack(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.solve(a, b)


def ambient_inner(
    g: MetricField,
    h: TangentField,
    k: TangentField,
    grid: QuadratureGrid,
    *,
    weighting: str = PRIOR_WEIGHTING,
) -> float:
    """∫ Tr(g⁻¹ h g⁻¹ k) dF(θ).

    With ``weighting="volume"`` each node is additionally weighted by
    √det g_θ, the volume form of the metric itself.
    """
    G = g.at_nodes(grid)
    lower = spd.cholesky_batch(G, grid.nodes)
    A = _solve_stack(G, h.at_nodes(grid))
    B = _solve_stack(G, k.at_nodes(grid))
    values = np.einsum("nab,nba->n", A, B)
    if weighting == VOLUME_WEIGHTING:
        values = values * np.exp(0.5 * spd.logdet_batch(lower))
    elif weighting != PRIOR_WEIGHTING:
        raise DomainError(f"unknown weighting {weighting!r}")
    return float(weighted_sum(values, grid))


def ambient_geodesic_point(g0, gd0, t: float) -> np.ndarray:
    """γ(t) = γ(0) exp(γ(0)⁻¹ γ̇(0) t) for one node."""
    g0 = np.asarray(g0, dtype=float)
    generator = spd.solve(g0, gd0)
    value = g0 @ spd.mat_exp(generator * t)
    if not np.all(np.isfinite(value)):
        raise OverflowError(f"ambient geodesic overflowed at t={t}")
    scale = max(np.max(np.abs(value)), np.finfo(float).tiny)
    residual = np.max(np.abs(value - value.T)) / scale
    log.debug("geodesic asymmetry residual %.3e", residual)
    if residual > ASYMMETRY_TOLERANCE:
        raise GeometryError(f"ambient geodesic lost symmetry at t={t}: residual {residual:.3e}")
    return spd.symmetrize(value)


def ambient_geodesic_velocity(g0, gd0, t: float) -> np.ndarray:
    """γ̇(t) = γ(0) exp(Xt) X with X = γ(0)⁻¹ γ̇(0)."""
    g0 = np.asarray(g0, dtype=float)
    generator = spd.solve(g0, gd0)
    return spd.symmetrize(g0 @ spd.mat_exp(generator * t) @ generator)


def ambient_geodesic(gamma0: MetricField, gammadot0: TangentField, t: float) -> MetricField:
    """Closed-form geodesic of the metric space, evaluated pointwise in θ."""
    return MetricField(
        lambda theta: ambient_geodesic_point(gamma0(theta), gammadot0(theta), t),
        descriptor=f"geodesic(t={t:g})",
    )


def ambient_geodesic_acceleration(g: np.ndarray, gd: np.ndarray) -> np.ndarray:
    """Right-hand side of γ̈ = γ̇ γ⁻¹ γ̇."""
    return spd.symmetrize(gd @ spd.solve(spd.symmetrize(g), gd))


def integrate_ambient_geodesic(
    g0, gd0, horizon: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """RK4 solution of γ̈ = γ̇ γ⁻¹ γ̇ at one node; returns (times, γ stack)."""
    if dt <= 0 or horizon < dt:
        raise DomainError(f"need 0 < dt <= horizon, got dt={dt}, horizon={horizon}")
    g0 = np.asarray(g0, dtype=float)
    m = g0.shape[0]
    size = m * m

    def rhs(_t, y):
        g, gd = y[:size].reshape(m, m), y[size:].reshape(m, m)
        return np.concatenate([gd.ravel(), ambient_geodesic_acceleration(g, gd).ravel()])

    steps = step_count(horizon, dt)
    h = horizon / steps
    y = np.concatenate([g0.ravel(), np.asarray(gd0, dtype=float).ravel()])
    times = [0.0]
    gammas = [g0.copy()]
    for i in range(steps):
        y = rk4_step(rhs, i * h, y, h)
        times.append((i + 1) * h)
        gammas.append(y[:size].reshape(m, m).copy())
    return np.array(times), np.stack(gammas)


def ambient_energy_density(g, gd) -> float:
    """Tr((γ⁻¹ γ̇)²) at one node."""
    x = spd.solve(g, gd)
    return float(np.trace(x @ x))


# -- divergences ------------------------------------------------------------


class Divergence(str, enum.Enum):
    KL = "kl"
    MI = "mi"


def _same_nodes(G: np.ndarray, H: np.ndarray) -> np.ndarray:
    return np.all(G == H, axis=(-2, -1))


def _kl_nodes(G: np.ndarray, H: np.ndarray, points=None) -> np.ndarray:
    m = G.shape[-1]
    logdet_g = spd.logdet_batch(spd.cholesky_batch(G, points))
    logdet_h = spd.logdet_batch(spd.cholesky_batch(H, points))
    trace = np.trace(_solve_stack(H, G), axis1=-2, axis2=-1)
    values = 0.5 * (trace - m) + 0.5 * (logdet_h - logdet_g)
    return np.where(_same_nodes(G, H), 0.0, values)


def _mi_nodes(G: np.ndarray, H: np.ndarray, points=None, *, form: str = "symmetric") -> np.ndarray:
    eye = np.eye(G.shape[-1])
    logdet_g = spd.logdet_batch(spd.cholesky_batch(G, points))
    logdet_h = spd.logdet_batch(spd.cholesky_batch(H, points))
    _, forward = np.linalg.slogdet(0.5 * (eye + _solve_stack(G, H)))
    if form == "symmetric":
        _, backward = np.linalg.slogdet(0.5 * (eye + _solve_stack(H, G)))
        values = forward + backward
    elif form == "reduced":
        # log|½(I+h⁻¹g)| = log|½(I+g⁻¹h)| + log|g| − log|h|
        values = 2.0 * forward + (logdet_g - logdet_h)
    else:
        raise DomainError(f"unknown MI form {form!r}")
    return np.where(_same_nodes(G, H), 0.0, values)


_NODE_DIVERGENCES = {Divergence.KL: _kl_nodes, Divergence.MI: _mi_nodes}


def kl_divergence(g: MetricField, h: MetricField, grid: QuadratureGrid) -> float:
    """∫ [½ Tr(g h⁻¹ − I) + ½ log(|h|/|g|)] dF(θ)."""
    return float(weighted_sum(_kl_nodes(g.at_nodes(grid), h.at_nodes(grid), grid.nodes), grid))


def mi_divergence(
    g: MetricField, h: MetricField, grid: QuadratureGrid, *, form: str = "symmetric"
) -> float:
    """∫ [log|½(I + g⁻¹h)| + log|½(I + h⁻¹g)|] dF(θ).

    ``form="reduced"`` evaluates the same quantity as
    2·log|½(I + g⁻¹h)| + log(|g|/|h|).
    """
    values = _mi_nodes(g.at_nodes(grid), h.at_nodes(grid), grid.nodes, form=form)
    return float(weighted_sum(values, grid))


def _perturbed_sum(div: Divergence, G, Hp, grid, eps: float, sign: float) -> float:
    try:
        values = _NODE_DIVERGENCES[Divergence(div)](G, G + sign * eps * Hp, grid.nodes)
    except PositiveDefinitenessError as exc:
        raise StepTooLargeError(
            f"g {'+' if sign > 0 else '-'} {eps:.3e}·h' leaves the SPD cone at node {exc.node}"
        ) from exc
    return float(weighted_sum(values, grid))


def _default_step(G: np.ndarray, Hp: np.ndarray) -> float | None:
    h_norm = float(np.max(np.linalg.norm(Hp, axis=(-2, -1))))
    if h_norm == 0.0:
        return None
    g_norm = float(np.max(np.linalg.norm(G, axis=(-2, -1))))
    return HESSIAN_STEP * g_norm / h_norm


def divergence_hessian(
    div: Divergence | str,
    g: MetricField,
    hprime: TangentField,
    grid: QuadratureGrid,
    *,
    epsilon: float | None = None,
) -> float:
    """d²/dε² Δ(g, g + ε h′) at ε = 0 by Richardson-extrapolated second differences."""
    G, Hp = g.at_nodes(grid), hprime.at_nodes(grid)
    eps = epsilon if epsilon is not None else _default_step(G, Hp)
    if eps is None:
        return 0.0

    def second_difference(e):
        plus = _perturbed_sum(div, G, Hp, grid, e, 1.0)
        minus = _perturbed_sum(div, G, Hp, grid, e, -1.0)
        return (plus + minus) / e**2  # Δ(g, g) = 0

    coarse, fine = second_difference(eps), second_difference(0.5 * eps)
    log.debug("%s Hessian: eps=%.3e coarse=%.12g fine=%.12g", Divergence(div).value, eps, coarse, fine)
    return (4.0 * fine - coarse) / 3.0


def divergence_slope(
    div: Divergence | str,
    g: MetricField,
    hprime: TangentField,
    grid: QuadratureGrid,
    *,
    epsilon: float = 1e-5,
) -> float:
    """d/dε Δ(g, g + ε h′) at ε = 0 by a central difference."""
    G, Hp = g.at_nodes(grid), hprime.at_nodes(grid)
    plus = _perturbed_sum(div, G, Hp, grid, epsilon, 1.0)
    minus = _perturbed_sum(div, G, Hp, grid, epsilon, -1.0)
    return (plus - minus) / (2.0 * epsilon)
