import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from infogeo_sensor.manifold import FlatMetric, GeodesicState, integrate_geodesic
from infogeo_sensor.output import emit_svg, trace_header, write_geodesic_csv, write_trace_csv
from infogeo_sensor.planner import PlanRecord, PlanTrace
from infogeo_sensor.sensor_model import SensorConfiguration

NS = {"svg": "http://www.w3.org/2000/svg"}


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def _paths(root, cls):
    return [p for p in root.findall("svg:path", NS) if p.get("class") == cls]


def test_trace_header():
    assert trace_header(2, 4) == [
        "t", "x1", "y1", "x2", "y2", "det_F_mean", "bearing_sep",
        "q_eig1", "q_eig2", "q_eig3", "q_eig4",
    ]


def test_trace_csv(fig3_trace, fig3_scenario, tmp_path):
    path = write_trace_csv(fig3_trace, tmp_path / "trace.csv")
    header, *rows = _read_rows(path)
    assert header == trace_header(2, 4)
    assert len(rows) == len(fig3_trace.records)
    assert rows[0][0] == "0"
    np.testing.assert_array_equal([float(v) for v in rows[0][1:5]], fig3_scenario.initial_config.coords)
    times = [float(r[0]) for r in rows]
    assert times == sorted(times)
    for row, record in zip(rows, fig3_trace.records):
        assert float(row[5]) == pytest.approx(record.det_fisher, rel=1e-11)


def test_trace_csv_is_byte_stable(fig3_trace, tmp_path):
    a = write_trace_csv(fig3_trace, tmp_path / "a.csv").read_bytes()
    b = write_trace_csv(fig3_trace, tmp_path / "b.csv").read_bytes()
    assert a == b
    assert b"\r" not in a


def test_empty_trace_is_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_trace_csv(PlanTrace(), tmp_path / "empty.csv")


def test_geodesic_csv(tmp_path):
    source = FlatMetric(2.0 * np.eye(2))
    path = integrate_geodesic(source, GeodesicState(np.zeros(2), [0.3, 0.4]), 0.5, 0.1)
    out = write_geodesic_csv(path.states, source, tmp_path / "geo.csv")
    header, *rows = _read_rows(out)
    assert header == ["t", "s1", "s2", "u1", "u2", "q_speed"]
    assert len(rows) == 6
    assert all(float(r[-1]) == pytest.approx(0.5) for r in rows)


def test_fig3_svg_structure(fig3_trace, fig3_scenario, tmp_path):
    path = emit_svg(
        fig3_trace,
        tmp_path / "fig3.svg",
        prior=fig3_scenario.prior,
        target=fig3_scenario.target,
        extrapolation=fig3_scenario.extrapolation,
    )
    root = ET.parse(path).getroot()
    assert root.tag == "{http://www.w3.org/2000/svg}svg"
    assert len(_paths(root, "trajectory")) == 2
    dashed = _paths(root, "extrapolation")
    assert len(dashed) == 2
    assert all(p.get("stroke-dasharray") for p in dashed)
    circles = root.findall("svg:circle", NS)
    assert [c.get("class") for c in circles].count("target") == 1
    assert len(root.findall("svg:ellipse", NS)) == 1


def test_svg_is_deterministic(fig3_trace, fig3_scenario, tmp_path):
    kwargs = dict(prior=fig3_scenario.prior, target=fig3_scenario.target, extrapolation=0.5)
    a = emit_svg(fig3_trace, tmp_path / "a.svg", **kwargs).read_bytes()
    b = emit_svg(fig3_trace, tmp_path / "b.svg", **kwargs).read_bytes()
    assert a == b


def test_single_point_trace_has_markers_only(fig3_scenario, tmp_path):
    sigma = fig3_scenario.initial_config
    record = PlanRecord(0.0, sigma, None, np.ones(4), 1.0, 1.0)
    trace = PlanTrace(records=[record], samples=[GeodesicState(sigma, np.zeros(4))])
    path = emit_svg(trace, tmp_path / "one.svg", prior=fig3_scenario.prior, target=(1.0, 1.0), extrapolation=0.5)
    root = ET.parse(path).getroot()
    assert root.findall("svg:path", NS) == []
    assert len(root.findall("svg:circle", NS)) == 3


def test_stationary_platform_gets_no_polyline(fig3_scenario, tmp_path):
    start = SensorConfiguration.from_positions([[0.0, 1.0], [1.0, 0.0]])
    moved = SensorConfiguration.from_positions([[0.1, 1.0], [1.0, 0.0]])
    records = [
        PlanRecord(0.0, start, np.array([0.1, 0.0, 0.0, 0.0]), np.ones(4), 1.0, 1.0),
        PlanRecord(1.0, moved, None, np.ones(4), 1.0, 1.0),
    ]
    samples = [GeodesicState(start, np.zeros(4), 0.0), GeodesicState(moved, np.zeros(4), 1.0)]
    trace = PlanTrace(records=records, samples=samples)
    path = emit_svg(trace, tmp_path / "two.svg", prior=fig3_scenario.prior, target=(1.0, 1.0))
    root = ET.parse(path).getroot()
    assert len(_paths(root, "trajectory")) == 1
    assert _paths(root, "extrapolation") == []
