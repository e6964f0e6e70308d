import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdfingerprint.polygon import (CartesianPolygon, ConstraintError, PolarPolygon, PolygonError,
                                   Prevertices, cartesian_qds, coordination_residual,
                                   polar_qds, polygon_fingerprint, proposition_check,
                                   side_integrals, solve_prevertices_exterior,
                                   solve_prevertices_interior, zero_pole_angle_sums)
from qdfingerprint.quaddiff import divisor_check, eval_qd
from qdfingerprint.riemannmap import (JordanCurve, check_homeomorphism, exterior_map,
                                      fingerprint_oracle, mobius_fit)

TWO_PI = 2 * math.pi
SQUARE = CartesianPolygon.centered_rectangle(2, 2)
RECT = CartesianPolygon.centered_rectangle(2, 1)
ELL = CartesianPolygon.l_shape()
GEAR = PolarPolygon.gear(4, 1.0, 2.0)
STAIR = PolarPolygon([2, 2, 1, 1, 3, 3], [0, 2, 2, 4, 4, TWO_PI])
# samples between grid points: k is only Holder-1/3 at the vertices
HALF = (np.arange(512) + 0.5) * TWO_PI / 512


def wrap(x):
    return np.remainder(x + math.pi, TWO_PI) - math.pi


@pytest.fixture(scope="module")
def square_pair():
    return solve_prevertices_interior(SQUARE), solve_prevertices_exterior(SQUARE)


@pytest.fixture(scope="module")
def rect_pair():
    return solve_prevertices_interior(RECT), solve_prevertices_exterior(RECT)


def test_polygon_invariants():
    assert SQUARE.n == 2 and ELL.n == 3
    assert sorted(ELL.alphas.tolist()) == [0.5] * 5 + [1.5]
    with pytest.raises(PolygonError):
        CartesianPolygon([0, 1, 1 + 1j])
    with pytest.raises(PolygonError):
        # starts with a vertical side
        CartesianPolygon([0, 1j, -1 + 1j, -1])
    with pytest.raises(PolygonError):
        # self-intersecting
        CartesianPolygon([0, 3, 3 + 1j, 1 + 1j, 1 - 1j, 2 - 1j, 2 + 2j, 0 + 2j])


def test_polar_invariants():
    assert np.sum(GEAR.alphas == 0.5) == np.sum(GEAR.alphas == 1.5) == 8
    with pytest.raises(PolygonError):
        PolarPolygon([1, 1], [0, math.pi])
    with pytest.raises(PolygonError):
        # circle as a degenerate gear: no radial sides
        PolarPolygon([1, 1, 1, 1], [0, 1, 1, 2])


def test_square_prevertices(square_pair):
    pm, pp = square_pair
    quarter = np.arange(4) * math.pi / 2
    assert np.max(np.abs(pm.beta - quarter)) < 1e-10
    assert np.max(np.abs(pp.beta - quarter)) < 1e-10
    assert pm.residual < 1e-8 and pp.residual < 1e-8


@pytest.mark.parametrize("side", ["interior", "exterior"])
def test_rectangle_prevertices(side):
    pre = solve_prevertices_interior(RECT) if side == "interior" else solve_prevertices_exterior(RECT)
    d = np.diff(np.concatenate([pre.beta, [TWO_PI]]))
    # the two long sides and the two short sides subtend equal arcs
    assert abs(d[0] - d[2]) < 1e-8 and abs(d[1] - d[3]) < 1e-8
    # reflection symmetry of the prevertex set
    refl = np.sort(np.mod(pre.beta[1] - pre.beta, TWO_PI))
    assert np.max(np.abs(refl - pre.beta)) < 1e-8
    sides = np.abs(side_integrals(pre.beta, pre.alphas, side, "cartesian"))
    assert sides[0] / sides[1] == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("side", ["interior", "exterior"])
def test_l_shape_residual(side):
    pre = solve_prevertices_interior(ELL) if side == "interior" else solve_prevertices_exterior(ELL)
    assert pre.residual < 1e-8
    v = pre.scale * side_integrals(pre.beta, pre.alphas, side, "cartesian")
    assert np.max(np.abs(v - ELL.side_vectors)) < 1e-8


def test_square_qds(square_pair):
    pm, pp = square_pair
    Qm, Qp = cartesian_qds(SQUARE, pm, pp)
    pts = sorted((np.angle(p) % TWO_PI, m) for p, m in Qm.finite)
    assert [m for _, m in pts] == [-1] * 4
    assert np.max(np.abs(np.array([a for a, _ in pts]) - np.arange(4) * math.pi / 2)) < 1e-10
    # sum (1 - a_k) b_k with b = 0, pi/2, pi, 3pi/2; the constant formula then gives C > 0
    assert abs(math.remainder(pm.gamma - 1.5 * math.pi, TWO_PI)) < 1e-10
    assert pm.C > 0 and pp.C > 0
    assert abs(pm.info["C_complex"].imag) < 1e-10 * pm.C


@pytest.mark.parametrize("poly", [SQUARE, RECT, ELL], ids=["square", "rect", "ell"])
def test_degree_and_reality(poly):
    pm, pp = solve_prevertices_interior(poly), solve_prevertices_exterior(poly)
    Qm, Qp = cartesian_qds(poly, pm, pp)
    for Q in (Qm, Qp):
        rep = divisor_check(Q)
        assert rep.ok and rep.p - rep.q == 4
        th = (np.arange(720) + 0.37) * TWO_PI / 720
        v = eval_qd(Q, np.exp(1j * th)) * np.exp(2j * th) * -1
        # Q dz^2 real on the circle: Q(z) z^2 is real
        assert np.max(np.abs(v.imag) / np.abs(v)) < 1e-8


def test_coordination(square_pair, rect_pair):
    for pm, pp in (square_pair, rect_pair):
        c = coordination_residual(pm, pp)
        assert c.coordinated and c.residuals.max() < 1e-6
    pm, pp = square_pair
    bad = Prevertices(pp.beta + np.array([0, 0.01, 0, 0]), pp.side, pp.kind, pp.alphas, pp.scale,
                      pp.gamma, pp.C)
    c = coordination_residual(pm, bad)
    assert not c.coordinated
    # arcs 0 and 1 end or start at the moved prevertex
    assert c.residuals[0] > 1e-3 and c.residuals[1] > 1e-3


def test_exterior_map_cross_check(square_pair):
    _, pp = square_pair
    e = exterior_map(JordanCurve.polygon(SQUARE.vertices), 0j, nodes=256, levels=20, max_doublings=0)
    rot = float(e.theta_of_s(np.array([0.0]))[0]) - pp.beta[0]
    worst = 0.0
    for k in range(4):
        for t in (0.1, 0.35, 0.5, 0.8):
            th = pp.beta[k] + t * math.pi / 2
            beta = np.sort(np.concatenate([pp.beta, [th]]))
            j = int(np.searchsorted(beta, th))
            al = np.insert(pp.alphas, j, 1.0)
            part = pp.scale * side_integrals(beta, al, "exterior", "cartesian")[j - 1]
            sc = SQUARE.vertices[k] + part
            worst = max(worst, abs(sc - e.boundary(np.array([th + rot]))[0]))
    assert worst < 1e-5


def test_rectangle_fingerprint_vs_oracle():
    f = polygon_fingerprint(RECT)
    assert f.result.residual < 1e-6
    k = f.fingerprint
    assert np.max(np.abs(k(f.pre_minus.beta) - f.pre_plus.beta)) == 0.0
    assert f.fingerprint.normalization["single_equation_gap"] < 1e-6
    o = fingerprint_oracle(RECT.curve, f.pre_minus.center, nodes=256, levels=16, max_doublings=0)
    assert mobius_fit(o, f.oracle_convention())["sup"] < 1e-3


def test_gauge_change():
    f1 = polygon_fingerprint(ELL)
    f2 = polygon_fingerprint(ELL, center=f1.pre_minus.center + 0.2 + 0.1j)
    assert np.max(np.abs(wrap(f1.fingerprint(HALF) - f2.fingerprint(HALF)))) > 1e-2
    assert mobius_fit(f1.fingerprint, f2.fingerprint, offset=0.5)["sup"] < 1e-6


def test_fingerprint_is_homeomorphism():
    f = polygon_fingerprint(ELL)
    assert check_homeomorphism(f.fingerprint)[0]


@pytest.fixture(scope="module")
def gear_fp():
    return polygon_fingerprint(GEAR)


def test_gear_equal_spacing_and_constraint(gear_fp):
    pm = gear_fp.pre_minus
    assert np.max(np.abs(pm.beta[4:] - pm.beta[:-4] - math.pi / 2)) < 1e-8
    assert pm.C == 1.0
    assert pm.info["angle_sum_defect"] < 1e-8
    assert gear_fp.coordination.residuals.max() < 1e-6


def test_gear_equivariance(gear_fp):
    k = gear_fp.fingerprint
    assert np.max(np.abs(wrap(k(HALF + math.pi / 2) - k(HALF) - math.pi / 2))) < 1e-6


def test_polar_constraint_violation(gear_fp):
    pm, pp = gear_fp.pre_minus, gear_fp.pre_plus
    moved = pm.beta.copy()
    moved[1] += 0.05
    shifted = Prevertices(moved, pm.side, pm.kind, pm.alphas, pm.scale, pm.gamma, pm.C,
                          info=dict(pm.info))
    s = float(np.sum((1 - pm.alphas) * shifted.beta))
    shifted.info["angle_sum_defect"] = abs(math.remainder(s - math.pi, TWO_PI))
    with pytest.raises(ConstraintError):
        polar_qds(GEAR, shifted, pp)


def test_polar_residue_coefficient(gear_fp):
    # -z^2 Q_-(z) -> 1 at the origin: the -dzeta^2/zeta^2 term of the log map
    Q = gear_fp.Q_minus
    z = np.array([1e-7, 1e-7j])
    assert np.max(np.abs(-z ** 2 * eval_qd(Q, z) - 1)) < 1e-6


def test_staircase_zero_pole_sums():
    pm = solve_prevertices_interior(STAIR)
    pp = solve_prevertices_exterior(STAIR)
    for pre in (pm, pp):
        s = zero_pole_angle_sums(pre)
        assert abs(math.remainder(s - TWO_PI, 4 * math.pi)) < 1e-8
    Qm, Qp = polar_qds(STAIR, pm, pp)
    assert divisor_check(Qm).ok
    assert coordination_residual(pm, pp).coordinated


def test_proposition_square(square_pair):
    pm, pp = square_pair
    rep = proposition_check(pm.beta, pm.alphas, pp.beta)
    assert rep.holds and rep.simple and rep.C > 0


def test_proposition_violations(square_pair):
    pm, pp = square_pair
    rep = proposition_check(pm.beta, pm.alphas, pp.beta + np.array([0, 0.01, 0, 0]))
    assert not rep.holds
    al = np.array([0.5] * 7 + [1.5] * 3)
    beta = np.array([0.0, 0.447, 0.767, 1.133, 1.771, 2.005, 2.142, 3.419, 4.86, 4.869])
    rep = proposition_check(beta, al, beta)
    assert not rep.holds and not rep.simple
    rep = proposition_check(np.arange(6) * math.pi / 3, [0.5] * 6, np.arange(6) * math.pi / 3)
    assert not rep.holds and "angle sum" in rep.reason


@settings(max_examples=5, deadline=None)
@given(st.floats(0.5, 3.0))
def test_rectangles_solve_and_coordinate(w):
    poly = CartesianPolygon.centered_rectangle(w, 1.0)
    pm, pp = solve_prevertices_interior(poly), solve_prevertices_exterior(poly)
    assert coordination_residual(pm, pp).coordinated
    Qm, Qp = cartesian_qds(poly, pm, pp)
    assert divisor_check(Qm).p - divisor_check(Qm).q == 4
