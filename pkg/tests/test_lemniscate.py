import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdfingerprint.blaschke import BlaschkeProduct, RationalMap, log_derivative_qd
from qdfingerprint.lemniscate import (HypothesisError, NotLogDerivativeError, count_balance,
                                      poly_fingerprint, rational_fingerprint,
                                      reconstruct_rational, trace_level_set)
from qdfingerprint.quaddiff import QuadDifferential
from qdfingerprint.riemannmap import check_homeomorphism, fingerprint_oracle, mobius_fit

TH = np.linspace(0.0, 2 * math.pi, 512, endpoint=False)


def wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def test_identity_level_is_unit_circle():
    rep = trace_level_set(RationalMap.from_lists(1.0, [0j]), 1.0)
    assert rep.valid
    pts = rep.curve.sample(64).points
    assert np.max(np.abs(np.abs(pts) - 1)) < 1e-12


def test_small_perturbation_one_component():
    R = RationalMap.from_lists(1.0, [math.sqrt(0.1), -math.sqrt(0.1)])
    rep = trace_level_set(R, 1.0)
    assert rep.valid and rep.winding == [2]
    assert min(d for _, _, d in rep.critical_values) == pytest.approx(0.9)
    pts = rep.curve.sample(256).points
    assert np.max(np.abs(np.abs(pts ** 2 - 0.1) - 1)) < 1e-12


def test_figure_eight_is_not_analytic():
    rep = trace_level_set(RationalMap.from_lists(1.0, [1.0, -1.0]), 1.0)
    assert not rep.analytic and not rep.valid


def test_two_components_disconnected():
    rep = trace_level_set(RationalMap.from_lists(1.0, [2.0, -2.0]), 1.0)
    assert rep.analytic and not rep.connected and len(rep.components) == 2


@pytest.mark.parametrize("n", [1, 2, 3])
def test_monomial_fingerprint_is_rotation(n):
    cert = poly_fingerprint([0] * n + [1], nodes=256)
    k = cert.fingerprint(TH)
    assert np.max(np.abs(wrap(k - TH - (k[0] - TH[0])))) < 1e-10
    assert cert.residual < 1e-12


@pytest.mark.parametrize("coeffs", [[-0.1, 0, 1], [0, 0.2, 0, 1]])
def test_polynomial_fingerprint_matches_oracle(coeffs):
    cert = poly_fingerprint(coeffs)
    assert cert.residual < 1e-6
    assert cert.consistency < 1e-8
    fo = fingerprint_oracle(cert.info["report"].curve, cert.fingerprint.normalization["base_point"])
    assert mobius_fit(fo, cert.fingerprint)["sup"] < 1e-4
    assert check_homeomorphism(cert.fingerprint)[0]


def test_negative_leading_coefficient_rejected():
    with pytest.raises(HypothesisError):
        poly_fingerprint([0.1, 0, -1])


@settings(max_examples=6, deadline=None)
@given(st.floats(0.01, 0.6), st.floats(-math.pi, math.pi))
def test_power_of_k_is_b(c0, rot):
    cf = [-c0 * np.exp(1j * rot), 0, 1]
    cert = poly_fingerprint(cf, nodes=512)
    k = cert.fingerprint(TH)
    assert np.max(np.abs(np.exp(2j * k) - cert.B(np.exp(1j * TH)))) < 1e-10
    assert cert.consistency < 1e-8


def test_rational_identity():
    cert = rational_fingerprint(RationalMap.from_lists(1.0, [0j]), nodes=256)
    k = cert.fingerprint(TH)
    assert np.max(np.abs(wrap(k - TH))) < 1e-10


def test_rational_with_finite_pole():
    R = RationalMap.from_lists(1.0, [0j, 0j], [3.0])
    cert = rational_fingerprint(R)
    assert cert.residual < 1e-6
    assert cert.consistency < 1e-8
    assert cert.info["lambda_A_modulus"] == pytest.approx(1.0, abs=1e-8)
    fo = fingerprint_oracle(cert.info["report"].curve, cert.fingerprint.normalization["base_point"])
    assert mobius_fit(fo, cert.fingerprint)["sup"] < 1e-4
    inside, outside = cert.info["counts"]
    assert inside == outside != 0


def test_blaschke_lemniscate_is_circle():
    B = BlaschkeProduct(1.0, (0j, 0.5, -0.3j))
    R = B.as_rational()
    cert = rational_fingerprint(R, z0=0j, nodes=256)
    k = cert.fingerprint(TH)
    assert np.max(np.abs(wrap(k - TH))) < 1e-8


def test_count_balance_polynomial():
    R = RationalMap.from_lists(1.0, [0.1, -0.2])
    rep = trace_level_set(R, 1.0)
    assert count_balance(R, rep.curve) == (2, 2)


def test_reconstruct_power():
    for n in (1, 2, 3):
        Q = QuadDifferential.from_finite(-n ** 2 / (4 * math.pi ** 2), [(0j, -2)])
        R = reconstruct_rational(Q, 1.5)
        z = np.array([0.3 + 0.2j, 2.0])
        assert np.allclose(R(z), (z / 1.5) ** n, atol=1e-12)


def test_reconstruct_round_trip_polynomial():
    f = RationalMap.from_lists(1.0, [math.sqrt(0.1), -math.sqrt(0.1)])
    R = reconstruct_rational(log_derivative_qd(f), 0.5 + 0.5j)
    # coefficients of f / f(zeta0)
    expect = np.array([1.0, 0, -0.1]) / complex(f(0.5 + 0.5j))
    assert np.max(np.abs(R.numerator() - expect)) < 1e-6


def test_reconstruct_rejects_odd_order():
    Q = QuadDifferential.from_finite(1.0, [(0j, -1), (1.0, -1), (2.0, -2)])
    with pytest.raises(NotLogDerivativeError):
        reconstruct_rational(Q, 0.5)


def test_reconstruct_rejects_non_integer_residue():
    Q = QuadDifferential.from_finite(-(1.5 ** 2) / (4 * math.pi ** 2), [(0j, -2)])
    with pytest.raises(NotLogDerivativeError):
        reconstruct_rational(Q, 1.0)
