"""Numerical self-checks behind the ``fisher-check`` and ``divergence-check`` commands."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ambient import Divergence, MetricField, TangentField, ambient_inner, divergence_hessian
from .quadrature import Prior, QuadratureRule, build_grid
from .sensor_model import SensorConfiguration, VonMisesModel, fisher_information, fisher_mc_oracle

log = logging.getLogger(__name__)

FISHER_TOLERANCE = 1e-2
DIVERGENCE_TOLERANCE = 1e-4


@dataclass
class FisherCheckReport:
    kappa: float
    samples: int
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_relative_error(self) -> float:
        return max(self.errors.values())

    @property
    def passed(self) -> bool:
        return self.max_relative_error < FISHER_TOLERANCE


def relative_frobenius(estimate, reference) -> float:
    reference = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(np.asarray(estimate) - reference) / np.linalg.norm(reference))


def fisher_check(
    sigma: SensorConfiguration,
    points: dict[str, object],
    model: VonMisesModel,
    *,
    samples: int = 1_000_000,
    seed: int = 0,
) -> FisherCheckReport:
    """Compare the analytic Fisher matrix with the Monte-Carlo score oracle at each point."""
    report = FisherCheckReport(kappa=model.kappa, samples=samples)
    for i, (label, theta) in enumerate(points.items()):
        analytic = fisher_information(sigma, theta, model)
        estimate = fisher_mc_oracle(sigma, theta, model, samples, seed + i)
        report.errors[label] = relative_frobenius(estimate, analytic)
        log.info("Fisher at %s: relative error %.3e", label, report.errors[label])
    return report


@dataclass
class DivergenceCheckReport:
    trials: int
    kl_errors: list[float] = field(default_factory=list)
    mi_errors: list[float] = field(default_factory=list)
    cross_errors: list[float] = field(default_factory=list)

    @property
    def max_relative_error(self) -> float:
        return max(self.kl_errors + self.mi_errors + self.cross_errors)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < DIVERGENCE_TOLERANCE


def random_field_pair(rng: np.random.Generator) -> tuple[MetricField, TangentField]:
    """A θ-dependent SPD field g and a θ-dependent symmetric direction h′."""
    a0, ax, ay = rng.normal(size=(3, 2, 2)) * np.array([1.0, 0.3, 0.3])[:, None, None]
    b0, bx, by = rng.normal(size=(3, 2, 2)) * np.array([1.0, 0.3, 0.3])[:, None, None]

    def metric(nodes):
        nodes = np.atleast_2d(nodes)
        lower = a0 + nodes[:, 0, None, None] * ax + nodes[:, 1, None, None] * ay
        return lower @ np.swapaxes(lower, -1, -2) + 0.5 * np.eye(2)

    def tangent(nodes):
        nodes = np.atleast_2d(nodes)
        return b0 + nodes[:, 0, None, None] * bx + nodes[:, 1, None, None] * by

    g = MetricField(lambda theta: metric(theta)[0], batch=metric, descriptor="random")
    h = TangentField(lambda theta: tangent(theta)[0], batch=tangent, descriptor="random")
    return g, h


def divergence_check(*, seed: int = 0, trials: int = 50, order: int = 3) -> DivergenceCheckReport:
    """Second-difference Hessians of Δ_KL and Δ_MI against ½∫Tr(g⁻¹h′g⁻¹h′)dF."""
    rng = np.random.default_rng(seed)
    grid = build_grid(Prior(mean=(0.0, 0.0), covariance=np.eye(2), rule=QuadratureRule(order=order)))
    report = DivergenceCheckReport(trials=trials)
    for _ in range(trials):
        g, h = random_field_pair(rng)
        expected = 0.5 * ambient_inner(g, h, h, grid)
        kl = divergence_hessian(Divergence.KL, g, h, grid)
        mi = divergence_hessian(Divergence.MI, g, h, grid)
        report.kl_errors.append(abs(kl - expected) / abs(expected))
        report.mi_errors.append(abs(mi - expected) / abs(expected))
        report.cross_errors.append(abs(kl - mi) / abs(expected))
    log.info(
        "Divergence Hessians over %d trials: max relative error %.3e",
        trials, report.max_relative_error,
    )
    return report
