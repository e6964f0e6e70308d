import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdfingerprint.blaschke import (BlaschkeProduct, RationalMap, log_derivative_qd,
                                    no_circle_critical_points, quotient_circle_critical,
                                    random_blaschke)
from qdfingerprint.quaddiff import INFINITY, PoleError, circle_q_length, divisor_check


def zeros_strategy(max_size=6):
    radius = st.one_of(st.just(0.0), st.floats(1e-3, 0.93))
    return st.lists(st.tuples(radius, st.floats(0.0, 2 * math.pi)),
                    min_size=1, max_size=max_size).map(
        lambda v: tuple(r * np.exp(1j * t) for r, t in v))


def test_power_on_circle():
    B = BlaschkeProduct(1, (0j,) * 4)
    th = np.linspace(0, 2 * math.pi, 9)
    assert np.allclose(B(np.exp(1j * th)), np.exp(4j * th), atol=1e-14)


def test_single_factor_vanishes_at_zero():
    assert B_factor(0.3 - 0.2j)(0.3 - 0.2j) == 0


def B_factor(a):
    return BlaschkeProduct(1, (a,))


def test_modulus_one_on_circle():
    rng = np.random.default_rng(5)
    B = random_blaschke(rng, 5)
    z = np.exp(1j * np.linspace(0, 2 * math.pi, 200))
    assert np.max(np.abs(np.abs(B(z)) - 1)) < 1e-10


def test_rejects_bad_data():
    with pytest.raises(ValueError):
        BlaschkeProduct(1.1, (0j,))
    with pytest.raises(ValueError):
        BlaschkeProduct(1, (1.0 + 0j,))
    with pytest.raises(PoleError):
        BlaschkeProduct(1, (0.5,))(2.0)


def test_exterior_form():
    A = BlaschkeProduct.exterior_form(1j, [INFINITY, 2.0, -3j])
    assert A.exterior and A.degree == 3
    assert A.zeros[0] == 0 and A.zeros[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        BlaschkeProduct.exterior_form(1, [0.5])


@settings(max_examples=30, deadline=None)
@given(zeros_strategy(), st.floats(0, 2 * math.pi))
def test_derivative_matches_difference_quotient(zs, ph):
    B = BlaschkeProduct(np.exp(1j * ph), zs)
    z = 0.1 + 0.2j
    h = 1e-6
    fd = (B(z + h) - B(z - h)) / (2 * h)
    assert abs(fd - B.derivative(z)) < 1e-6 * max(1, abs(fd))
    f = B.as_rational()
    assert abs(f(z) - B(z)) < 1e-12
    assert abs(f.derivative(z) - B.derivative(z)) < 1e-9 * max(1, abs(fd))


def test_log_derivative_of_identity():
    Q = log_derivative_qd(RationalMap.from_lists(1, [0]))
    assert Q.constant == pytest.approx(-1 / (4 * math.pi ** 2))
    assert dict(Q.divisor) == {0j: -2, INFINITY: -2}


def test_circle_length_of_power():
    for n in (1, 2, 5):
        Q = log_derivative_qd(RationalMap.from_lists(1, [0] * n))
        assert circle_q_length(Q) == pytest.approx(n, abs=1e-12)


def test_circle_length_of_cubic_product():
    B = BlaschkeProduct(1, (0.5, -0.3j, 0.7 + 0.1j))
    assert circle_q_length(log_derivative_qd(B)) == pytest.approx(3, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(zeros_strategy(7), st.floats(0, 2 * math.pi))
def test_circle_length_equals_degree(zs, ph):
    B = BlaschkeProduct(np.exp(1j * ph), zs)
    Q = log_derivative_qd(B)
    assert divisor_check(Q).ok
    assert circle_q_length(Q) == pytest.approx(B.degree, abs=1e-8)


def test_zeros_of_f_are_circular_poles():
    f = RationalMap.from_lists(2.0, [0.5, 0.5, -1j], [3.0])
    Q = log_derivative_qd(f)
    from qdfingerprint.quaddiff import classify_local_structure
    for p in (0.5, -1j, 3.0):
        assert Q.order_at(p) == -2
        assert classify_local_structure(Q, p).structure == "circular"


def test_no_circle_critical_examples():
    r = no_circle_critical_points(BlaschkeProduct(1, (0j,)))
    assert r.min_modulus == pytest.approx(1.0) and r.ok
    r = no_circle_critical_points(BlaschkeProduct(1, (0j, 0.5)))
    # oracle: dense sampling of |B'| on the circle
    th = np.linspace(0, 2 * math.pi, 200001)
    dense = np.min(np.abs(BlaschkeProduct(1, (0j, 0.5)).derivative(np.exp(1j * th))))
    assert r.ok and r.min_modulus == pytest.approx(dense, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_degree_six_has_none(seed):
    B = random_blaschke(np.random.default_rng(seed), 6, 0.97)
    r = no_circle_critical_points(B)
    assert r.ok and r.min_modulus >= r.lower_bound - 1e-12


def test_quotient_identical():
    A = BlaschkeProduct(1, (0.2, 0.1j))
    assert quotient_circle_critical(A, A).identically_critical


def test_quotient_closed_form():
    res = quotient_circle_critical(BlaschkeProduct(1, (0j,)), BlaschkeProduct(1, (0.3,)))
    c = math.acos(0.3)
    assert res.thetas == pytest.approx([c, 2 * math.pi - c], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_quotient_nonempty(seed):
    rng = np.random.default_rng(seed)
    A = random_blaschke(rng, 4)
    B = random_blaschke(rng, 4)
    res = quotient_circle_critical(A, B)
    assert res.thetas
    for t in res.thetas:
        z = np.exp(1j * t)
        # (A/B)' = (A'B - AB')/B^2
        d = (A.derivative(z) * B(z) - A(z) * B.derivative(z)) / B(z) ** 2
        assert abs(d) < 1e-7
