"""Informative Gaussian prior dF(θ) and quadrature over it."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import DomainError, NonFiniteFieldError
from .parallel import ordered_map
from .sensor_model import ParameterPoint
from .spd import SpdMatrix, SymMatrix, symmetrize

log = logging.getLogger(__name__)

GAUSS_HERMITE = "gauss-hermite"
MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class QuadratureRule:
    kind: str = GAUSS_HERMITE
    order: int = 9
    samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (GAUSS_HERMITE, MONTE_CARLO):
            raise DomainError(f"unknown quadrature rule {self.kind!r}")
        if self.order < 1:
            raise DomainError(f"Gauss-Hermite order must be >= 1, got {self.order}")
        if self.samples < 1:
            raise DomainError(f"sample count must be >= 1, got {self.samples}")


@dataclass(frozen=True)
class Prior:
    mean: ParameterPoint
    covariance: SpdMatrix
    rule: QuadratureRule = field(default_factory=QuadratureRule)

    def __post_init__(self):
        object.__setattr__(self, "mean", ParameterPoint(*map(float, self.mean)))
        if not isinstance(self.covariance, SpdMatrix):
            object.__setattr__(self, "covariance", SpdMatrix(self.covariance))
        if self.covariance.dim != len(self.mean):
            raise DomainError("prior covariance does not match the mean's dimension")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    nodes: np.ndarray  # (N, m)
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise DomainError("nodes and weights differ in length")
        if np.any(self.weights <= 0):
            raise DomainError("quadrature weights must be positive")

    def __len__(self) -> int:
        return len(self.weights)


def build_grid(prior: Prior) -> QuadratureGrid:
    """Nodes and weights for ∫ · dF(θ) under the prior's rule."""
    rule = prior.rule
    dim = len(prior.mean)
    lower = np.asarray(prior.covariance.factor)
    if rule.kind == GAUSS_HERMITE:
        points, weights = hermegauss(rule.order)
        weights = weights / weights.sum()
        mesh = np.meshgrid(*([points] * dim), indexing="ij")
        standard = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        node_weights = weights
        for _ in range(dim - 1):
            node_weights = np.kron(node_weights, weights)
    else:
        rng = np.random.default_rng(rule.seed)
        standard = rng.standard_normal((rule.samples, dim))
        node_weights = np.full(rule.samples, 1.0 / rule.samples)
    nodes = np.asarray(prior.mean) + standard @ lower.T
    log.debug("Built %s grid with %d nodes", rule.kind, len(node_weights))
    return QuadratureGrid(nodes=nodes, weights=node_weights)


def weighted_sum(values: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
    """Σ_i w_i · values[i], after checking every node value is finite."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values.reshape(len(grid), -1)).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise NonFiniteFieldError(
            f"field is not finite at node {bad} {grid.nodes[bad].tolist()}",
            node=bad,
            point=grid.nodes[bad],
        )
    return np.tensordot(grid.weights, values, axes=1)


def integrate_scalar(fn: Callable[[np.ndarray], float], grid: QuadratureGrid) -> float:
    values = ordered_map(lambda theta: float(fn(theta)), grid.nodes)
    return float(weighted_sum(np.array(values), grid))


def integrate_matrix(fn: Callable[[np.ndarray], object], grid: QuadratureGrid) -> SymMatrix:
    values = ordered_map(lambda theta: np.asarray(fn(theta), dtype=float), grid.nodes)
    return SymMatrix(symmetrize(weighted_sum(np.stack(values), grid)))
