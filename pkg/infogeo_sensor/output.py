"""CSV traces and the SVG trajectory plot."""

from __future__ import annotations

import csv
import logging
import math
import xml.etree.ElementTree as ET
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .manifold import GeodesicState, MetricSource, metric_speed
from .planner import PlanTrace, extrapolate
from .quadrature import Prior

log = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
SVG_SIZE = 480.0
SVG_MARGIN = 0.08

_STYLE = {
    "trajectory": {"fill": "none", "stroke": "#1f4e9c", "stroke-width": "2"},
    "extrapolation": {"fill": "none", "stroke": "#1f4e9c", "stroke-width": "1.5", "stroke-dasharray": "4 3"},
    "platform": {"fill": "#1f4e9c", "r": "4"},
    "target": {"fill": "#c0392b", "r": "5"},
    "prior": {"fill": "none", "stroke": "#7f8c8d", "stroke-width": "1"},
}


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def trace_header(num_platforms: int, dim: int) -> list[str]:
    coords = [f"{axis}{j + 1}" for j in range(num_platforms) for axis in ("x", "y")]
    eigs = [f"q_eig{k + 1}" for k in range(dim)]
    return ["t", *coords, "det_F_mean", "bearing_sep", *eigs]


def write_trace_csv(trace: PlanTrace, path: Path) -> Path:
    """One row per plan record: time, σ, det F and bearing separation at the prior mean, Q eigenvalues."""
    if not trace.records:
        raise ValueError("cannot write an empty trace")
    path = Path(path)
    first = trace.records[0].sigma
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(trace_header(first.num_platforms, first.dim))
        for record in trace.records:
            writer.writerow(
                [
                    _fmt(record.time),
                    *(_fmt(c) for c in record.sigma.coords),
                    _fmt(record.det_fisher),
                    _fmt(record.bearing_separation),
                    *(_fmt(v) for v in record.q_eigenvalues),
                ]
            )
    log.info("Wrote %s (%d rows)", path, len(trace.records))
    return path


def write_geodesic_csv(states: Sequence[GeodesicState], source: MetricSource, path: Path) -> Path:
    """Rows of (t, σ, u, Q(σ)(u, u)) along one geodesic."""
    path = Path(path)
    dim = states[0].sigma.dim
    header = ["t", *(f"s{k + 1}" for k in range(dim)), *(f"u{k + 1}" for k in range(dim)), "q_speed"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for state in states:
            writer.writerow(
                [
                    _fmt(state.time),
                    *(_fmt(c) for c in state.sigma.coords),
                    *(_fmt(u) for u in state.velocity),
                    _fmt(metric_speed(source, state)),
                ]
            )
    log.info("Wrote %s (%d rows)", path, len(states))
    return path


class _Canvas:
    """World → pixel mapping with y pointing up."""

    def __init__(self, points: np.ndarray):
        lo, hi = points.min(axis=0), points.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
        pad = SVG_MARGIN * span
        self.x0, self.y1 = lo[0] - pad, hi[1] + pad
        self.scale = SVG_SIZE / (span + 2 * pad)

    def xy(self, point) -> tuple[str, str]:
        return (
            f"{(point[0] - self.x0) * self.scale:.3f}",
            f"{(self.y1 - point[1]) * self.scale:.3f}",
        )

    def path(self, points) -> str:
        head, *rest = (self.xy(p) for p in points)
        return "M {} {}".format(*head) + "".join(" L {} {}".format(*p) for p in rest)


def _element(parent: ET.Element, tag: str, cls: str, **attrs: str) -> ET.Element:
    el = ET.SubElement(parent, tag, {"class": cls})
    for key, value in _STYLE[cls].items():
        el.set(key, value)
    for key, value in attrs.items():
        el.set(key, value)
    return el


def emit_svg(
    trace: PlanTrace,
    path: Path,
    *,
    prior: Prior,
    target,
    extrapolation: float = 0.0,
) -> Path:
    """Platform paths, dashed extrapolations, target marker and the 1-σ prior ellipse."""
    if not trace.records:
        raise ValueError("cannot plot an empty trace")
    path = Path(path)
    tracks = np.stack([s.sigma.positions for s in trace.samples]) if trace.samples else None
    if tracks is None:
        tracks = np.stack([r.sigma.positions for r in trace.records])
    ahead = None
    if extrapolation > 0 and trace.last_direction is not None:
        ahead = extrapolate(trace, extrapolation).positions

    mean = np.asarray(prior.mean, dtype=float)
    values, vectors = np.linalg.eigh(np.asarray(prior.covariance))
    radii = np.sqrt(values)
    extent = mean + np.array([[-1, -1], [1, 1]]) * radii.max()
    points = [tracks.reshape(-1, 2), extent, np.atleast_2d(np.asarray(target, dtype=float))]
    if ahead is not None:
        points.append(ahead)
    canvas = _Canvas(np.concatenate(points))

    root = ET.Element(
        "svg",
        {
            "xmlns": SVG_NS,
            "version": "1.1",
            "width": f"{SVG_SIZE:g}",
            "height": f"{SVG_SIZE:g}",
            "viewBox": f"0 0 {SVG_SIZE:g} {SVG_SIZE:g}",
        },
    )
    cx, cy = canvas.xy(mean)
    angle = math.degrees(math.atan2(vectors[1, 1], vectors[0, 1]))
    _element(
        root, "ellipse", "prior",
        cx=cx, cy=cy,
        rx=f"{radii[1] * canvas.scale:.3f}", ry=f"{radii[0] * canvas.scale:.3f}",
        transform=f"rotate({-angle:.3f} {cx} {cy})",
    )
    tx, ty = canvas.xy(target)
    _element(root, "circle", "target", cx=tx, cy=ty)

    for j in range(tracks.shape[1]):
        track = tracks[:, j]
        distinct = np.any(np.abs(np.diff(track, axis=0)) > 0, axis=1).any() if len(track) > 1 else False
        if distinct:
            _element(root, "path", "trajectory", d=canvas.path(track))
        if ahead is not None:
            _element(root, "path", "extrapolation", d=canvas.path([track[-1], ahead[j]]))
        px, py = canvas.xy(track[0])
        _element(root, "circle", "platform", cx=px, cy=py)

    ET.indent(root)
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)
    log.info("Wrote %s", path)
    return path
