import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from qdfingerprint.riemannmap import (Arc, CurveError, JordanCurve, MapperError,
                                      SurgeryError, check_homeomorphism, corner_surgery,
                                      exterior_map, fingerprint_distance, fingerprint_oracle,
                                      interior_map, mobius_fit, rado_sequence)

TH = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
SQUARE = [1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]


def wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def cardioid_like(c=0.2):
    # image of the disk under g(zeta) = zeta + c zeta^2; interior map is g itself
    f = lambda t: np.exp(2j * math.pi * t) + c * np.exp(4j * math.pi * t)
    df = lambda t: 2j * math.pi * np.exp(2j * math.pi * t) + 4j * math.pi * c * np.exp(4j * math.pi * t)
    return JordanCurve.smooth(f, df)


def test_unit_circle_identity():
    fp = fingerprint_oracle(JordanCurve.circle(), 0j, nodes=128)
    assert np.max(np.abs(fp(TH) - TH)) < 1e-8


def test_radius_two_maps():
    c = JordanCurve.circle(0j, 2.0)
    m = interior_map(c, 0j, nodes=128)
    assert np.max(np.abs(m.boundary(TH) - 2 * np.exp(1j * TH))) < 1e-10
    e = exterior_map(c, 0j, nodes=128)
    assert e.capacity == pytest.approx(2.0, abs=1e-12)
    assert abs(e.forward(np.array([3j]))[0] - 6j) < 1e-10


def test_interior_map_closed_form():
    cur = cardioid_like()
    m = interior_map(cur, 0j, nodes=256)
    assert m.derivative_at_base == pytest.approx(1.0, abs=1e-12)
    s = np.linspace(0, 1, 50, endpoint=False)
    assert np.max(np.abs(wrap(m.theta_of_s(s) - 2 * math.pi * s))) < 1e-12
    zeta = 0.3 + 0.4j
    assert abs(m.forward(np.array([zeta]))[0] - (zeta + 0.2 * zeta ** 2)) < 1e-12
    w = zeta + 0.2 * zeta ** 2
    assert abs(m.inverse(np.array([w]))[0] - zeta) < 1e-12


def test_exterior_map_joukowski():
    c = 0.3
    f = lambda t: np.exp(2j * math.pi * t) + c * np.exp(-2j * math.pi * t)
    df = lambda t: 2j * math.pi * (np.exp(2j * math.pi * t) - c * np.exp(-2j * math.pi * t))
    e = exterior_map(JordanCurve.smooth(f, df), 0.05j, nodes=256)
    assert e.capacity == pytest.approx(1.0, abs=1e-12)
    zeta = 1.5 * np.exp(0.7j)
    assert abs(e.forward(np.array([zeta]))[0] - (zeta + c / zeta)) < 1e-11


def test_square_capacity():
    e = exterior_map(JordanCurve.polygon(SQUARE), 0j, nodes=256, levels=20, max_doublings=0)
    assert e.capacity == pytest.approx(2 * gamma(0.25) ** 2 / (4 * math.pi ** 1.5), abs=1e-10)


def test_ellipse_self_convergence():
    fp = fingerprint_oracle(JordanCurve.ellipse(1.2, 0.8), 0j)
    assert fp.normalization["self_convergence"] < 1e-6
    assert check_homeomorphism(fp)[0]


def test_base_point_change_is_automorphism():
    cur = JordanCurve.ellipse(1.2, 0.8)
    f1 = fingerprint_oracle(cur, 0j, nodes=256)
    f2 = fingerprint_oracle(cur, 0.3 - 0.2j, nodes=256)
    assert fingerprint_distance(f1, f2) > 1e-2
    assert mobius_fit(f1, f2)["sup"] < 1e-5


def test_base_point_outside_rejected():
    with pytest.raises(MapperError):
        interior_map(JordanCurve.circle(), 2.0)


def test_clockwise_curve_rejected():
    with pytest.raises(CurveError):
        JordanCurve.polygon(SQUARE[::-1])


def test_corner_surgery_rounds_square():
    sq = JordanCurve.polygon(SQUARE)
    c = corner_surgery(sq, SQUARE, 0.1)
    arcs = [p for p in c.pieces if isinstance(p, Arc)]
    assert len(c.pieces) == 8 and len(arcs) == 4
    for a, v in zip(arcs, SQUARE[1:] + SQUARE[:1]):
        assert a.radius == 0.1 and abs(a.center - v) < 1e-12
        mid = complex(a.z(np.array([0.5]))[0])
        assert sq.contains(mid)[0]
    # each corner loses the quarter disk of radius eps
    assert c.signed_area() == pytest.approx(4 - math.pi * 0.01, abs=1e-12)


def test_corner_surgery_eps_too_large():
    with pytest.raises(SurgeryError):
        corner_surgery(JordanCurve.polygon(SQUARE), SQUARE, 1.0)


def test_rado_without_points_is_flat():
    r = rado_sequence(JordanCurve.polygon(SQUARE), [], [0.1, 0.05], 0j, nodes=128,
                      levels=12, max_doublings=0)
    assert max(r.gaps) < 1e-12


@settings(max_examples=6, deadline=None)
@given(st.floats(0.05, 0.25), st.integers(2, 5), st.floats(0, 2 * math.pi))
def test_fingerprint_is_homeomorphism(eps, k, phase):
    f = lambda t: (1 + eps * np.cos(2 * math.pi * k * t + phase)) * np.exp(2j * math.pi * t)
    df = lambda t: (-2 * math.pi * k * eps * np.sin(2 * math.pi * k * t + phase)
                    + 2j * math.pi * (1 + eps * np.cos(2 * math.pi * k * t + phase))) * np.exp(2j * math.pi * t)
    fp = fingerprint_oracle(JordanCurve.smooth(f, df), 0j, nodes=512)
    ok, step, gap = check_homeomorphism(fp)
    assert ok
    assert fp(np.array([2 * math.pi]))[0] - fp(np.array([0.0]))[0] == pytest.approx(2 * math.pi, abs=1e-10)


@settings(max_examples=5, deadline=None)
@given(st.floats(0.3, 3.0), st.complex_numbers(max_magnitude=5.0))
def test_affine_invariance(scale, shift):
    cur = JordanCurve.ellipse(1.2, 0.8)
    f1 = fingerprint_oracle(cur, 0.1j, nodes=256)
    f2 = fingerprint_oracle(cur.transformed(scale, shift), scale * 0.1j + shift, nodes=256)
    assert fingerprint_distance(f1, f2) < 1e-10


def test_rotation_conjugates_fingerprint():
    cur = JordanCurve.ellipse(1.2, 0.8)
    r = 0.7
    f1 = fingerprint_oracle(cur, 0.1j, nodes=256)
    f2 = fingerprint_oracle(cur.transformed(np.exp(1j * r), 0.0), np.exp(1j * r) * 0.1j, nodes=256)
    assert np.max(np.abs(wrap(f2(TH) - f1(TH - r) - r))) < 1e-10


def test_doubling_changes_little():
    cur = JordanCurve.ellipse(1.5, 0.7)
    a = fingerprint_oracle(cur, 0j, nodes=256, max_doublings=0)
    b = fingerprint_oracle(cur, 0j, nodes=512, max_doublings=0)
    assert fingerprint_distance(a, b) < 1e-7
