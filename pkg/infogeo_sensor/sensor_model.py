"""Bearings-only von Mises sensor model and its Fisher information.

For sensor j at (x_j, y_j) and target θ = (x_e, y_e), with x̃ = x_j − x_e,
ỹ = y_j − y_e and R² = x̃² + ỹ², each sensor contributes the rank-one term

    κ A(κ) / R⁴ · n nᵀ,    n = (ỹ, −x̃)

to the Fisher matrix. Derivatives with respect to sensor coordinates are the
exact derivatives of this expression, including the part that flows through R.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.integrate
import scipy.special

from .errors import CoincidentError, DomainError
from .spd import SymMatrix

log = logging.getLogger(__name__)

COINCIDENT_DISTANCE = 1e-12
RIDGE_EPSILON = 1e-8


class ParameterPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class SensorConfiguration:
    """Platform positions, flattened to the chart (x1, y1, x2, y2, ...) on S."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if arr.size < 2 or arr.size % 2:
            raise DomainError(f"need an even number (>= 2) of coordinates, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("sensor coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_positions(cls, positions) -> SensorConfiguration:
        return cls(np.asarray(positions, dtype=float).reshape(-1))

    @property
    def positions(self) -> np.ndarray:
        return self.coords.reshape(-1, 2)

    @property
    def num_platforms(self) -> int:
        return self.coords.size // 2

    @property
    def dim(self) -> int:
        return self.coords.size

    def __eq__(self, other):
        if not isinstance(other, SensorConfiguration):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    __hash__ = None


def bessel_ratio(kappa: float) -> float:
    """A(κ) = I₁(κ)/I₀(κ), the mean resultant length of a von Mises law."""
    if not (math.isfinite(kappa) and kappa > 0):
        raise DomainError(f"kappa must be positive and finite, got {kappa!r}")
    # Exponentially scaled Bessel functions keep the ratio finite for large κ.
    return float(scipy.special.ive(1, kappa) / scipy.special.ive(0, kappa))


@dataclass(frozen=True)
class VonMisesModel:
    kappa: float
    bessel_ratio: float = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "bessel_ratio", bessel_ratio(self.kappa))

    @property
    def strength(self) -> float:
        """The κA(κ) prefactor."""
        return self.kappa * self.bessel_ratio


def bearing(sensor, target) -> float:
    """Bearing of ``target`` seen from ``sensor``, in (−π, π]."""
    dx = float(sensor[0]) - float(target[0])
    dy = float(sensor[1]) - float(target[1])
    if math.hypot(dx, dy) < COINCIDENT_DISTANCE:
        raise CoincidentError("sensor coincides with target; bearing undefined")
    phi = math.atan2(dy, dx)
    return math.pi if phi == -math.pi else phi


def _offsets(positions: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sensor-minus-node offsets ``(N, J, 2)`` and squared ranges ``(N, J)``."""
    diff = positions[None, :, :] - nodes[:, None, :]
    r2 = np.einsum("nja,nja->nj", diff, diff)
    if np.any(r2 < COINCIDENT_DISTANCE**2):
        node, sensor = np.argwhere(r2 < COINCIDENT_DISTANCE**2)[0]
        raise CoincidentError(
            f"sensor {sensor} coincides with evaluation point {nodes[node].tolist()}",
            sensor=int(sensor),
        )
    return diff, r2


def fisher_stack(positions, nodes, strength: float) -> np.ndarray:
    """Fisher matrices ``(N, 2, 2)`` for sensor ``positions (J, 2)`` at ``nodes (N, 2)``."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    diff, r2 = _offsets(positions, nodes)
    normal = np.stack([diff[..., 1], -diff[..., 0]], axis=-1)
    return strength * np.einsum("nja,njb,nj->nab", normal, normal, 1.0 / r2**2)


def fisher_derivative_stack(positions, nodes, strength: float) -> np.ndarray:
    """∂F/∂σ_k for every sensor coordinate k, shape ``(N, 2J, 2, 2)``."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    diff, r2 = _offsets(positions, nodes)
    xt, yt = diff[..., 0], diff[..., 1]
    zero = np.zeros_like(xt)
    normal = np.stack([yt, -xt], axis=-1)
    outer = normal[..., :, None] * normal[..., None, :]

    # symmetric part of dn nᵀ for dn = ∂n/∂x̃ = (0, −1) and ∂n/∂ỹ = (1, 0)
    sym_x = np.stack([np.stack([zero, -yt], -1), np.stack([-yt, 2 * xt], -1)], -2)
    sym_y = np.stack([np.stack([2 * yt, -xt], -1), np.stack([-xt, zero], -1)], -2)

    inv_r4 = (1.0 / r2**2)[..., None, None]
    inv_r6 = (1.0 / r2**3)[..., None, None]
    d_x = sym_x * inv_r4 - 4.0 * xt[..., None, None] * outer * inv_r6
    d_y = sym_y * inv_r4 - 4.0 * yt[..., None, None] * outer * inv_r6
    out = np.stack([d_x, d_y], axis=2)  # (N, J, 2 coords, 2, 2)
    n_nodes, n_sensors = r2.shape
    return strength * out.reshape(n_nodes, 2 * n_sensors, 2, 2)


def ridge_regularize(stack: np.ndarray, epsilon: float = RIDGE_EPSILON) -> np.ndarray:
    """F + ε·trace(F)·I over the trailing two axes."""
    trace = np.trace(stack, axis1=-2, axis2=-1)
    eye = np.eye(stack.shape[-1])
    return stack + epsilon * trace[..., None, None] * eye


def fisher_information(sigma: SensorConfiguration, theta, model: VonMisesModel) -> SymMatrix:
    """Analytic Fisher information of the bearings at ``theta``."""
    return SymMatrix(fisher_stack(sigma.positions, [theta], model.strength)[0])


def fisher_derivative(
    sigma: SensorConfiguration, theta, model: VonMisesModel, axis: int
) -> SymMatrix:
    """∂F/∂σ_axis, where axis 2j is x_j and 2j+1 is y_j."""
    if not 0 <= axis < sigma.dim:
        raise DomainError(f"axis {axis} outside 0..{sigma.dim - 1}")
    return SymMatrix(fisher_derivative_stack(sigma.positions, [theta], model.strength)[0, axis])


def bearing_gradients(sigma: SensorConfiguration, theta) -> tuple[np.ndarray, np.ndarray]:
    """Bearings ``(J,)`` and their gradients with respect to θ, ``(J, 2)``."""
    phis = np.array([bearing(p, theta) for p in sigma.positions])
    diff, r2 = _offsets(sigma.positions, np.atleast_2d(np.asarray(theta, dtype=float)))
    grads = np.stack([diff[0, :, 1], -diff[0, :, 0]], axis=-1) / r2[0][:, None]
    return phis, grads


def fisher_mc_oracle(
    sigma: SensorConfiguration,
    theta,
    model: VonMisesModel,
    sample_count: int,
    seed: int,
) -> SymMatrix:
    """Monte-Carlo estimate of E[dℓ ⊗ dℓ] from simulated von Mises bearings."""
    if sample_count < 1:
        raise DomainError(f"sample_count must be >= 1, got {sample_count}")
    phis, grads = bearing_gradients(sigma, theta)
    rng = np.random.default_rng(seed)
    # Generator.vonmises is the Best–Fisher rejection sampler.
    draws = rng.vonmises(phis, model.kappa, size=(sample_count, phis.size))
    score = (model.kappa * np.sin(draws - phis)) @ grads
    log.debug("MC Fisher oracle: %d samples, %d sensors", sample_count, phis.size)
    return SymMatrix(score.T @ score / sample_count)


def bearing_kl_divergence(sigma: SensorConfiguration, theta, theta2, model: VonMisesModel) -> float:
    """KL(p(·|θ) ‖ p(·|θ')) for the joint bearing likelihood, by quadrature."""
    kappa = model.kappa
    norm = 2.0 * math.pi * scipy.special.ive(0, kappa)
    total = 0.0
    for pos in sigma.positions:
        mu, mu2 = bearing(pos, theta), bearing(pos, theta2)

        def integrand(z, mu=mu, mu2=mu2):
            density = math.exp(kappa * (math.cos(z - mu) - 1.0)) / norm
            return density * kappa * (math.cos(z - mu) - math.cos(z - mu2))

        value, _ = scipy.integrate.quad(
            integrand, mu - math.pi, mu + math.pi, epsabs=1e-15, epsrel=1e-12, limit=200
        )
        total += value
    return total
