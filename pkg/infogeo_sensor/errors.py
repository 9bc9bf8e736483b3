"""Exception hierarchy shared by every infogeo_sensor module."""

from __future__ import annotations

from typing import Any


class InfogeoError(Exception):
    """Base class for all library errors."""


class GeometryError(InfogeoError):
    """A sensor/target geometry makes a metric singular or undefined."""


class PositiveDefinitenessError(GeometryError):
    """A matrix that must be SPD failed factorization.

    ``node`` is the quadrature node index when the failure happened while
    evaluating a field over a grid, ``point`` the node coordinates.
    """

    def __init__(self, message: str, *, node: int | None = None, point: Any = None):
        super().__init__(message)
        self.node = node
        self.point = point


class DegenerateGeometryError(GeometryError):
    """The induced metric Q on the sensor manifold is singular."""


class CoincidentError(GeometryError):
    """A sensor sits on the target, so its bearing is undefined."""

    def __init__(self, message: str, *, sensor: int | None = None):
        super().__init__(message)
        self.sensor = sensor


class DomainError(InfogeoError, ValueError):
    """A scalar argument is outside its admissible range."""


class NonFiniteFieldError(InfogeoError):
    """A field evaluated to inf/nan at a quadrature node."""

    def __init__(self, message: str, *, node: int, point: Any = None):
        super().__init__(message)
        self.node = node
        self.point = point


class StepTooLargeError(InfogeoError):
    """A finite-difference perturbation left the SPD cone."""


class ScenarioError(InfogeoError):
    """Base class for scenario file problems."""


class ParseError(ScenarioError):
    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        super().__init__(message)
        self.line = line
        self.key = key


class ValidationError(ScenarioError):
    def __init__(self, message: str, *, key: str | None = None):
        super().__init__(message)
        self.key = key
