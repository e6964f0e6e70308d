import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdfingerprint import shapes_io as sio
from qdfingerprint.lemniscate import poly_fingerprint
from qdfingerprint.polygon import (CartesianPolygon, cartesian_qds, solve_prevertices_exterior,
                                   solve_prevertices_interior)
from qdfingerprint.quaddiff import QuadDifferential, trace_from_critical
from qdfingerprint.riemannmap import Fingerprint, JordanCurve

TWO_PI = 2 * math.pi
GOLDEN = Path(__file__).parent / "golden"


def identity_fp():
    th = TWO_PI * np.arange(64) / 64
    return Fingerprint(th, th.copy(), {}, lambda t: np.asarray(t, dtype=float))


def test_polynomial_round_trip():
    d = sio.parse('{"kind": "polynomial", "payload": {"coeffs": [-0.1, 0, [1, 0]]}, '
                  '"metadata": {"name": "z2", "tolerances": {"residual": 1e-7}}}')
    assert d.kind == "polynomial"
    assert sio.build(d) == [-0.1, 0, 1]
    text = sio.serialize(d)
    again = sio.parse(text)
    assert again == d
    assert sio.serialize(again) == text


@pytest.mark.parametrize("doc, where", [
    ({"kind": "quad-differential", "payload": {"constant": 1, "divisor": [{"point": 0, "order": 1.5}]}},
     "order"),
    ({"kind": "cartesian-polygon", "payload": {"vertices": [[0, 0], [1, 0], [1, 1], [0, 1], [0, 2]]}},
     "vertices"),
    ({"kind": "cartesian-polygon", "payload": {"vertices": [[0, 0], [1, 0], [1, 1]]}}, "vertices"),
    ({"kind": "blob", "payload": {}}, "kind"),
    ({"kind": "polynomial", "payload": {"coeffs": [1, "x"]}}, "coeffs"),
])
def test_parse_errors(doc, where):
    with pytest.raises(sio.ParseError) as e:
        sio.from_json_object(doc)
    assert where in e.value.path


def test_bad_json_is_parse_error():
    with pytest.raises(sio.ParseError):
        sio.parse("{kind: polynomial")


def test_quad_differential_round_trip():
    Q = QuadDifferential.from_finite(2 - 1j, [(0.5j, 2), (-1, -1)])
    d = sio.ShapeDescriptor("quad-differential", sio.qd_payload(Q))
    Q2 = sio.build(sio.parse(sio.serialize(d)))
    assert Q2 == Q


def test_identity_csv():
    text = sio.export_fingerprint_csv(identity_fp(), 512)
    rows = np.loadtxt(text.splitlines()[1:], delimiter=",")
    assert text.splitlines()[0] == "theta,k_theta"
    assert rows.shape == (512, 2)
    assert np.array_equal(rows[:, 0], rows[:, 1])


@pytest.fixture(scope="module")
def z2_fp():
    return poly_fingerprint([-0.1, 0, 1]).fingerprint


def test_resolution_agreement(z2_fp):
    a = np.loadtxt(sio.export_fingerprint_csv(z2_fp, 512).splitlines()[1:], delimiter=",")
    b = np.loadtxt(sio.export_fingerprint_csv(z2_fp, 1024).splitlines()[1:], delimiter=",")
    assert np.array_equal(a[:, 0], b[::2, 0])
    assert np.max(np.abs(a[:, 1] - b[::2, 1])) < 1e-12


def test_csv_round_trip(z2_fp):
    text = sio.export_fingerprint_csv(z2_fp, 512)
    fp = sio.import_fingerprint_csv(text)
    assert np.all(np.diff(fp.psi) > 0) and fp.psi[-1] < fp.psi[0] + TWO_PI
    assert np.max(np.abs(fp.psi - z2_fp(fp.theta) + (z2_fp(0.0) - fp.psi[0]))) < 1e-12
    assert sio.export_fingerprint_csv(fp, 512) == text


def test_csv_rejects_non_monotone():
    text = "theta,k_theta\n0,0\n1,2\n2,1.5\n"
    with pytest.raises(sio.ParseError):
        sio.import_fingerprint_csv(text)
    with pytest.raises(sio.ParseError):
        sio.import_fingerprint_csv("t,k\n0,0\n1,1\n")


def test_svg_unit_circle():
    svg = sio.render_svg([JordanCurve.circle()])
    assert svg.count("<path") == 1
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert svg == sio.render_svg([JordanCurve.circle()])


def test_svg_double_zero_in_disk():
    # (z - 1)^2 / (z + 1)^6: three critical trajectories from z = 1 stay in the closed disk
    Q = QuadDifferential.from_finite(1.0, [(1.0, 2), (-1.0, -6)])
    from qdfingerprint.cli import critical_trajectories
    arcs = critical_trajectories(Q, region="disk")
    assert len(arcs) == 3
    assert all(a.end is not None and abs(a.end.location + 1) < 1e-9 for a in arcs)
    svg = sio.render_svg([], [(a.path.points, "critical-trajectory") for a in arcs], Q.finite)
    assert svg.count('class="critical-trajectory"') == 3
    assert 'data-order="2"' in svg and 'data-order="-6"' in svg


def test_svg_rejects_unknown_kind():
    Q = QuadDifferential.from_finite(1.0, [(1.0, 2), (-1.0, -6)])
    arc = trace_from_critical(Q, 1.0, 0.0)
    with pytest.raises(ValueError):
        sio.render_svg([], [(arc.path.points, "spiral")])


def square_q_minus_svg():
    sq = CartesianPolygon.centered_rectangle(2, 2)
    pm, pp = solve_prevertices_interior(sq), solve_prevertices_exterior(sq)
    Qm, _ = cartesian_qds(sq, pm, pp)
    return sio.render_svg([JordanCurve.circle()], [], Qm.finite, {"title": "square Q-"})


def test_square_golden():
    assert square_q_minus_svg() == (GOLDEN / "square_q_minus.svg").read_text()


def test_dumps_deterministic():
    obj = {"b": [1 + 2j, np.float64(0.1), math.inf], "a": np.arange(3)}
    s = sio.dumps(obj)
    assert s == sio.dumps(dict(reversed(list(obj.items()))))
    assert json.loads(s) == {"a": [0, 1, 2], "b": [[1.0, 2.0], 0.1, "inf"]}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10) | st.tuples(st.floats(-10, 10), st.floats(-10, 10)).map(list),
                min_size=1, max_size=6))
def test_polynomial_payload_property(coeffs):
    coeffs = coeffs + [1.0]
    d = sio.from_json_object({"kind": "polynomial", "payload": {"coeffs": coeffs}})
    again = sio.parse(sio.serialize(d))
    assert again == d
