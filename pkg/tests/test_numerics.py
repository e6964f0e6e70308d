import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdfingerprint.numerics import (BranchError, BranchedValue, IntegrationError, PathSample,
                                    RangeError, SingularityError, adaptive_integral,
                                    invert_monotone, sqrt_along, trace_ode)


def test_path_sample_validates():
    with pytest.raises(ValueError):
        PathSample(np.array([0j]), np.array([0.0]))
    with pytest.raises(ValueError):
        PathSample(np.array([0j, 1j]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        PathSample(np.array([0j, 1j, 2j]), np.array([0.0, 1.0]))
    p = PathSample.from_points([0, 1, 1 + 1j])
    assert p.params[-1] == pytest.approx(2.0)


def test_integral_closed_loop_vanishes():
    res = adaptive_integral(lambda t: np.exp(1j * t), (0.0, 2 * math.pi), tol=1e-13)
    assert abs(res.value) < 1e-12


def test_integral_of_one():
    assert adaptive_integral(lambda t: np.ones_like(t), (0.0, 1.0)).value == pytest.approx(1.0)


def test_integral_endpoint_singularity():
    res = adaptive_integral(lambda t: 1 / np.sqrt(t), (0.0, 1.0), left_exponent=0.5)
    assert abs(res.value - 2.0) < 1e-8


def test_integral_reversed_interval():
    res = adaptive_integral(lambda t: t, (1.0, 0.0))
    assert res.value == pytest.approx(-0.5)


def test_integral_failure_reports_interval():
    with pytest.raises(IntegrationError) as exc:
        adaptive_integral(lambda t: np.sin(1 / np.maximum(t, 1e-300)) / t, (0.0, 1.0),
                          tol=1e-14, max_intervals=50)
    assert exc.value.worst_interval is not None


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 20.0), st.floats(-3.0, 3.0))
def test_refinement_stays_within_estimate(freq, shift):
    f = lambda t: np.exp(1j * freq * t) * np.cos(t + shift)
    coarse = adaptive_integral(f, (0.0, 3.0), tol=1e-8)
    fine = adaptive_integral(f, (0.0, 3.0), tol=1e-9)
    assert abs(coarse.value - fine.value) <= max(coarse.error, 1e-15) + fine.error


def test_sqrt_constant():
    path = PathSample.from_points(np.linspace(0, 1 + 1j, 7))
    vals = sqrt_along(lambda z: np.ones_like(z), path, BranchedValue(1.0))
    assert all(v.value == pytest.approx(1.0) for v in vals)


def test_sqrt_of_square_on_semicircle():
    path = PathSample.circle_arc(0.0, math.pi, 9)
    vals = sqrt_along(lambda z: z * z, path, BranchedValue(1.0))
    assert abs(vals[-1].value + 1.0) < 1e-12


def test_sqrt_monodromy():
    path = PathSample.circle_arc(0.0, 2 * math.pi, 17)
    vals = sqrt_along(lambda z: z, path, BranchedValue(1.0, 0))
    assert abs(vals[-1].value + 1.0) < 1e-12
    assert vals[-1].branch_index == 1


def test_sqrt_through_zero_fails():
    path = PathSample.from_points(np.array([-1.0, 0.0, 1.0]))
    with pytest.raises(BranchError):
        sqrt_along(lambda z: z, path, BranchedValue(1j))


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(max_magnitude=0.8), st.integers(1, 3))
def test_sqrt_squares_back(a, k):
    path = PathSample.circle_arc(0.0, 2 * math.pi, 33)
    Q = lambda z: (z - a) ** k * (z - 3) / (z + 2.5)
    q0 = complex(Q(np.array([1.0 + 0j]))[0])
    vals = sqrt_along(Q, path, BranchedValue(np.sqrt(q0)))
    q = Q(path.points)
    v = np.array([b.value for b in vals])
    assert np.max(np.abs(v * v - q) / np.abs(q)) < 1e-12
    steps = np.abs(np.diff(v))
    assert np.all(steps < np.maximum(np.abs(v[1:]), np.abs(v[:-1])) * 1.5)


def test_invert_identity_and_cube():
    assert invert_monotone(lambda x: x, 0.5, (0.0, 1.0)) == pytest.approx(0.5, abs=1e-12)
    assert invert_monotone(lambda x: x ** 3, 1.0, (0.0, 2.0)) == pytest.approx(1.0, abs=1e-10)


def test_invert_vectorized():
    t = np.array([0.1, 1.0, 7.9])
    x = invert_monotone(lambda x: x ** 3, t, (0.0, 2.0))
    assert np.allclose(x ** 3, t, atol=1e-11)


def test_invert_out_of_range():
    with pytest.raises(RangeError):
        invert_monotone(lambda x: x, 2.0, (0.0, 1.0))


def test_invert_midpoint_of_cumulative_length():
    # cumulative length of the arc |z|=1 under density |z - 2|: bisection oracle
    F = lambda t: adaptive_integral(lambda s: np.abs(np.exp(1j * s) - 2), (0.0, t)).value.real
    total = F(math.pi)
    x = invert_monotone(F, 0.5 * total, (0.0, math.pi), tol=1e-11)
    lo, hi = 0.0, math.pi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if F(mid) < 0.5 * total else (lo, mid)
    assert x == pytest.approx(0.5 * (lo + hi), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.5, 4.0))
def test_invert_stable_under_refinement(target, power):
    F = lambda x: x ** power
    a = invert_monotone(F, target, (0.0, 1.0), tol=1e-10)
    b = invert_monotone(F, target, (0.0, 1.0), tol=5e-11)
    assert abs(F(a) - F(b)) <= 1e-10


def test_trace_constant_field_to_line():
    res = trace_ode(lambda z: 1.0, 0j, event=lambda z: z.real - 1.0)
    assert abs(res.path.points[-1] - 1.0) < 1e-12
    assert np.allclose(res.path.points.imag, 0.0)


def test_trace_circular_flow_closes():
    res = trace_ode(lambda z: 1j * z, 1 + 0j, max_length=2 * math.pi, rtol=1e-11, atol=1e-13)
    assert abs(res.path.points[-1] - 1.0) < 1e-8
    assert np.max(np.abs(np.abs(res.path.points) - 1)) < 1e-8


def test_trace_trajectory_field_of_inverse_square():
    # trajectories of -dz^2/z^2 are circles about the origin
    field = lambda z: 1.0 / np.sqrt(-1.0 / z ** 2)
    res = trace_ode(field, 1 + 0j, max_length=2 * math.pi, line_field=True,
                    initial_direction=1j, rtol=1e-11, atol=1e-13)
    assert np.max(np.abs(np.abs(res.path.points) - 1)) < 1e-9
    assert abs(res.path.points[-1] - 1) < 1e-9


def test_trace_guard_radius():
    with pytest.raises(SingularityError):
        trace_ode(lambda z: -z, 1 + 0j, singular=[0j], guard=1e-6, max_steps=5000)
    res = trace_ode(lambda z: -z, 1 + 0j, singular=[0j], guard=1e-6, stop_at_singular=True)
    assert res.status == "singular" and abs(res.path.points[-1]) < 1e-6
