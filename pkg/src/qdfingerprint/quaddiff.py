"""Rational quadratic differentials Q(z) dz^2 on the Riemann sphere.

A differential is stored as a leading constant and a divisor of
(point, order) pairs, with the point at infinity kept explicitly so that
the degree identity (total order -4) is an exact integer check.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .numerics import (INNER_TOL, PathSample, SingularityError, adaptive_integral,
                       trace_ode)

INFINITY = complex(math.inf, 0.0)
CIRCLE_TOL = 1e-12


def is_infinite(p) -> bool:
    return not cmath.isfinite(complex(p))


class QuadDiffError(Exception):
    pass


class PoleError(QuadDiffError):
    pass


class SymmetryError(QuadDiffError):
    pass


class ReflectionError(QuadDiffError):
    pass


class DomainError(QuadDiffError):
    pass


class StructureError(QuadDiffError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class QuadDifferential:
    """Q(z) dz^2 = constant * prod (z - a)^order dz^2 over finite points.

    The divisor lists every point with nonzero order, infinity included.
    """
    constant: complex
    divisor: tuple

    def __post_init__(self):
        c = complex(self.constant)
        if c == 0 or not cmath.isfinite(c):
            raise ValueError("constant must be finite and nonzero")
        div = []
        seen = []
        for p, m in self.divisor:
            m_int = int(m)
            if m_int != m:
                raise ValueError("orders must be integers")
            if m_int == 0:
                continue
            p = INFINITY if is_infinite(p) else complex(p)
            for q in seen:
                if (is_infinite(p) and is_infinite(q)) or (
                        not is_infinite(p) and not is_infinite(q) and p == q):
                    raise ValueError(f"repeated divisor point {p}")
            seen.append(p)
            div.append((p, m_int))
        if sum(m for _, m in div) != -4:
            raise ValueError("divisor total must be -4 on the sphere")
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "divisor", tuple(div))

    @classmethod
    def from_finite(cls, constant, finite_divisor) -> "QuadDifferential":
        """Build from finite points only; the order at infinity is computed."""
        fin = [(complex(p), int(m)) for p, m in finite_divisor if int(m) != 0]
        m_inf = -4 - sum(m for _, m in fin)
        div = list(fin)
        if m_inf != 0:
            div.append((INFINITY, m_inf))
        return cls(constant, tuple(div))

    @property
    def finite(self):
        return [(p, m) for p, m in self.divisor if not is_infinite(p)]

    @property
    def order_at_infinity(self) -> int:
        for p, m in self.divisor:
            if is_infinite(p):
                return m
        return 0

    def order_at(self, point) -> int:
        if is_infinite(point):
            return self.order_at_infinity
        for p, m in self.finite:
            if abs(p - point) <= 1e-14 * max(1.0, abs(p)):
                return m
        return 0

    def __call__(self, z):
        return eval_qd(self, z)

    def sqrt_abs(self, z):
        """|Q(z)|^(1/2), evaluated through logarithms of the factors."""
        z = np.asarray(z, dtype=complex)
        logm = np.full(z.shape, 0.5 * math.log(abs(self.constant)))
        for p, m in self.finite:
            with np.errstate(divide="ignore"):
                logm = logm + 0.5 * m * np.log(np.abs(z - p))
        return np.exp(logm)

    def scaled(self, factor) -> "QuadDifferential":
        return QuadDifferential(self.constant * factor, self.divisor)

    def leading_coefficient(self, point) -> complex:
        """Coefficient a in Q ~ a (z - point)^order (chart w = 1/z at infinity)."""
        if is_infinite(point):
            # Q(1/w) w^-4 = C prod (1 - a w)^m w^(-sum m - 4), so the coefficient is C
            return self.constant
        a = self.constant
        for p, m in self.finite:
            if abs(p - point) > 0:
                a *= (point - p) ** m
        return a

    def critical_points(self) -> list:
        return [CriticalPoint.from_order(p, m, self) for p, m in self.divisor]


def eval_qd(Q: QuadDifferential, z):
    """C * prod (z - a)^order over the finite divisor."""
    z_arr = np.asarray(z, dtype=complex)
    out = np.full(z_arr.shape, Q.constant, dtype=complex)
    for p, m in Q.finite:
        d = z_arr - p
        if m < 0 and np.any(d == 0):
            raise PoleError(f"evaluation at a pole {p}")
        out = out * d ** m
    if np.ndim(z) == 0:
        return complex(out)
    return out


class DegreeReport(NamedTuple):
    p: int
    q: int
    order_at_infinity: int
    ok: bool


def divisor_check(Q: QuadDifferential) -> DegreeReport:
    """Total pole order p, total zero order q; ok iff p - q = 4."""
    p = -sum(m for _, m in Q.divisor if m < 0)
    q = sum(m for _, m in Q.divisor if m > 0)
    return DegreeReport(p, q, Q.order_at_infinity, p - q == 4)


@dataclass(frozen=True)
class CriticalPoint:
    location: complex
    order: int
    kind: str
    structure: Optional[str] = None

    def __post_init__(self):
        if self.order == 0:
            raise ValueError("a critical point needs nonzero order")
        expect = "finite" if self.order >= -1 else "infinite"
        if self.kind != expect:
            raise ValueError(f"order {self.order} must be of kind {expect}")
        if (self.structure is not None) != (self.order == -2):
            raise ValueError("structure tag is required exactly for order -2")

    @classmethod
    def from_order(cls, location, order, Q=None):
        kind = "finite" if order >= -1 else "infinite"
        tag = None
        if order == -2:
            tag = pole2_structure(Q.leading_coefficient(location)) if Q is not None else "spiral"
        return cls(INFINITY if is_infinite(location) else complex(location), int(order), kind, tag)


def pole2_structure(coefficient, tol: float = 1e-9) -> str:
    """Q ~ b/z^2: b < 0 circular, b > 0 radial, otherwise spiral."""
    b = complex(coefficient)
    if abs(b.imag) <= tol * abs(b):
        return "circular" if b.real < 0 else "radial"
    return "spiral"


class LocalStructure(NamedTuple):
    order: int
    directions: tuple
    corner_angles: tuple
    structure: Optional[str]


def classify_local_structure(Q: QuadDifferential, c) -> LocalStructure:
    """Local trajectory picture at a point (regular, zero or pole).

    directions: angles of trajectory rays leaving the point (asymptotic
    directions for poles of order >= 3), in the chart w = 1/z at infinity.
    corner_angles: admissible openings between two boundary arcs meeting
    there, as Fractions of pi.
    """
    loc = c.location if isinstance(c, CriticalPoint) else c
    n = Q.order_at(loc)
    a = Q.leading_coefficient(loc)
    arg_a = cmath.phase(a)
    if n >= -1:
        m = n + 2
        dirs = tuple(((-arg_a + 2 * math.pi * k) / m) % (2 * math.pi) for k in range(m))
        if n == -1:
            angles = (Fraction(1),)
        else:
            angles = tuple(Fraction(k, m) for k in range(1, 2 * m))
        return LocalStructure(n, dirs, angles, None)
    if n == -2:
        return LocalStructure(n, (), (), pole2_structure(a))
    m = -n - 2
    dirs = tuple(((arg_a + 2 * math.pi * k) / m) % (2 * math.pi) for k in range(m))
    angles = tuple(Fraction(k, m) for k in range(0, 2 * m + 1))
    return LocalStructure(n, dirs, angles, None)


def boundary_order_map(zeta_order: int, corner_angle, side: str = "interior",
                       arcs: Optional[str] = None) -> int:
    """Order of the pulled-back differential at the circle preimage of a
    boundary point of the curve.

    corner_angle is the opening in units of pi measured in the interior
    domain; side='exterior' uses the complementary opening.  For poles of
    order two (and order >= 3 with zero opening) arcs must name the kind of
    the two boundary arcs: 'trajectory' or 'orthogonal'.
    """
    ang = Fraction(corner_angle).limit_denominator(1000)
    if side == "exterior":
        ang = 2 - ang
    elif side != "interior":
        raise DomainError("side must be interior or exterior")
    n = int(zeta_order)
    if n >= 0:
        k = ang * (n + 2)
        if k.denominator != 1 or not (1 <= k <= 2 * n + 3):
            raise DomainError(f"opening {ang} pi is not admissible at a zero of order {n}")
        k = int(k)
        if k == 1:
            return -1
        if k == 2:
            return 0
        return k - 2
    if n == -1:
        if ang != 1:
            raise DomainError("the curve is analytic through a simple pole")
        return -1
    if n == -2:
        if arcs not in ("trajectory", "orthogonal"):
            raise DomainError("order-two poles need the arc kind")
        return -2
    k = ang * (-n - 2)
    if k.denominator != 1 or not (0 <= k <= 2 * (-n - 2)):
        raise DomainError(f"opening {ang} pi is not admissible at a pole of order {-n}")
    return -(int(k) + 2)


def boundary_pole_structure(zeta_order: int, corner_angle, arcs: str) -> Optional[str]:
    """Structure tag of an order-two pullback pole: radial for trajectory
    arcs, circular for orthogonal arcs."""
    order = boundary_order_map(zeta_order, corner_angle, "interior", arcs)
    if order != -2:
        return None
    return "radial" if arcs == "trajectory" else "circular"


# circle bookkeeping

def circle_sign_values(Q: QuadDifferential, theta):
    """Q(z) (dz)^2 along the positively oriented circle, dz = i z dtheta."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    return -eval_qd(Q, z) * z * z


def _circle_points(Q):
    out = []
    for p, m in Q.finite:
        if abs(abs(p) - 1.0) <= 1e-10:
            out.append((float(np.angle(p)) % (2 * math.pi), m, p))
    out.sort()
    return out


def is_circle_symmetric(Q: QuadDifferential, tol: float = 1e-9, samples: int = 64) -> bool:
    try:
        _check_symmetric(Q, tol, samples)
    except SymmetryError:
        return False
    return True


def _check_symmetric(Q, tol=1e-9, samples=64):
    fin = Q.finite
    for p, m in fin:
        if abs(abs(p) - 1.0) <= 1e-10:
            continue
        if p == 0:
            if Q.order_at_infinity != m:
                raise SymmetryError("orders at 0 and infinity differ")
            continue
        r = 1.0 / np.conj(p)
        if not any(abs(q - r) <= tol * max(1, abs(r)) and mq == m for q, mq in fin):
            raise SymmetryError(f"point {p} has no reflected partner")
    if Q.order_at_infinity != 0 and Q.order_at(0) != Q.order_at_infinity:
        raise SymmetryError("orders at 0 and infinity differ")
    crit = _circle_points(Q)
    th = (np.arange(samples) + 0.5) * 2 * math.pi / samples + 0.0123
    for t, _, _ in crit:
        th = th[np.abs(np.angle(np.exp(1j * (th - t)))) > 1e-6]
    v = circle_sign_values(Q, th)
    if np.any(np.abs(v.imag) > tol * np.abs(v) + 1e-300):
        raise SymmetryError("Q dz^2 is not real on the unit circle")


@dataclass(frozen=True)
class CircleArc:
    start: float
    end: float
    sign: int
    start_order: Optional[int]
    end_order: Optional[int]
    interior_zeros: tuple = ()

    @property
    def whole_circle(self) -> bool:
        return self.start_order is None

    @property
    def start_type(self) -> Optional[str]:
        if self.start_order is None:
            return None
        return "finite" if self.start_order >= -1 else "infinite"

    @property
    def end_type(self) -> Optional[str]:
        if self.end_order is None:
            return None
        return "finite" if self.end_order >= -1 else "infinite"


@dataclass(frozen=True)
class CircleArcSystem:
    arcs: tuple

    def __len__(self):
        return len(self.arcs)

    def __getitem__(self, j):
        return self.arcs[j]


def circle_decomposition(Q: QuadDifferential) -> CircleArcSystem:
    """Split the unit circle into maximal arcs of constant sign of Q dz^2.

    Endpoints are odd-order critical points (sign change) and even-order
    poles (sign kept); even-order zeros stay inside their arc.
    """
    _check_symmetric(Q)
    crit = _circle_points(Q)
    ends = [(t, m) for t, m, _ in crit if m % 2 != 0 or m < 0]
    evens = [(t, m) for t, m, _ in crit if m % 2 == 0 and m > 0]
    if not ends:
        th0 = 0.0
        for t, _ in evens:
            if abs(t) < 1e-3:
                th0 = 0.5
        sgn = int(np.sign(circle_sign_values(Q, np.array([th0]))[0].real))
        return CircleArcSystem((CircleArc(0.0, 2 * math.pi, sgn, None, None,
                                          tuple(t for t, _ in evens)),))
    arcs = []
    k = len(ends)
    for j in range(k):
        t0, m0 = ends[j]
        t1, m1 = ends[(j + 1) % k]
        if j == k - 1:
            t1 = t1 + 2 * math.pi
        inner = []
        for t, _ in evens:
            tt = t if t > t0 else t + 2 * math.pi
            if t0 < tt < t1:
                inner.append(tt)
        cuts = sorted([t0] + inner + [t1])
        gaps = np.diff(cuts)
        g = int(np.argmax(gaps))
        mid = cuts[g] + 0.5 * gaps[g]
        sgn = int(np.sign(circle_sign_values(Q, np.array([mid]))[0].real))
        arcs.append(CircleArc(t0, t1, sgn, m0, m1, tuple(inner)))
    for j in range(k):
        prev = arcs[j - 1]
        cur = arcs[j]
        same = prev.sign == cur.sign
        m = cur.start_order
        if same != (m % 2 == 0):
            raise SymmetryError("endpoint typing contradicts the sign pattern")
    return CircleArcSystem(tuple(arcs))


def circle_q_length(Q: QuadDifferential, theta0: float = 0.0, theta1: float = 2 * math.pi,
                    tol: float = 1e-12) -> float:
    """Q-length of the circle arc from theta0 to theta1 (theta1 > theta0).

    Divisor points on the circle split the integral; their orders set the
    endpoint exponents. Poles of order >= 2 on the closed arc give +inf.
    """
    if theta1 <= theta0:
        raise ValueError("theta1 must exceed theta0")
    cuts = [theta0, theta1]
    orders = {}
    for t, m, _ in _circle_points(Q):
        for k in range(int(math.floor((theta0 - t) / (2 * math.pi))), int(math.ceil((theta1 - t) / (2 * math.pi))) + 1):
            tt = t + 2 * math.pi * k
            if theta0 - 1e-12 <= tt <= theta1 + 1e-12:
                if m <= -2:
                    return math.inf
                # snap roundoff-close points onto the ends (no sliver intervals)
                if abs(tt - theta0) <= 1e-12:
                    tt = theta0
                elif abs(tt - theta1) <= 1e-12:
                    tt = theta1
                cuts.append(tt)
                orders[tt] = m
    cuts = sorted(set(cuts))

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        le = orders[a] / 2 + 1 if a in orders else None
        re = orders[b] / 2 + 1 if b in orders else None
        # integrate in offsets from the singular end so nodes never round onto it
        m = 0.5 * (a + b)
        for base, lo, hi, lx, rx in ((a, 0.0, m - a, le, None), (b, a - m, 0.0, None, re)):
            f = lambda off, base=base: circle_sqrt_abs(Q, base, off)
            total += adaptive_integral(f, (lo, hi), tol=0.5 * tol, left_exponent=lx,
                                       right_exponent=rx).value.real
    return float(total)


def circle_sqrt_abs(Q: QuadDifferential, base: float, offset):
    """|Q(e^{it})|^(1/2) at t = base + offset; distances to divisor points on
    the circle use chords computed from (base - t_p) + offset, which keeps
    full relative precision for tiny offsets from a divisor point at base."""
    off = np.asarray(offset, dtype=float)
    base = np.asarray(base, dtype=float)
    shape = np.broadcast(base, off).shape
    logm = np.full(shape, 0.5 * math.log(abs(Q.constant)))
    z = None
    for p, m in Q.finite:
        if abs(abs(p) - 1.0) <= 1e-10:
            d = np.remainder(base - float(np.angle(p)) + math.pi, 2 * math.pi) - math.pi
            # a base within roundoff of the point is the point itself
            d = np.where(np.abs(d) < 1e-12, 0.0, d)
            chord = np.abs(2 * np.sin(0.5 * (d + off)))
            with np.errstate(divide="ignore"):
                logm = logm + 0.5 * m * np.log(chord)
        else:
            if z is None:
                z = np.exp(1j * (base + off))
            logm = logm + 0.5 * m * np.log(np.abs(z - p))
    return np.exp(logm)


def reflect_extend(constant, divisor, samples: int = 64, tol: float = 1e-8) -> QuadDifferential:
    """Continue a differential given in the closed disk by reflection in the circle.

    divisor lists points with |a| <= 1 (0 allowed); the result adds 1/conj(a)
    with equal order (0 goes to infinity) and rotates the constant so that
    Q dz^2 is real on the circle.
    """
    full = {}
    for p, m in divisor:
        p = complex(p)
        if abs(p) > 1 + 1e-12:
            raise ReflectionError("points must lie in the closed disk")
        full[p] = full.get(p, 0) + int(m)
    out = []
    m_inf = 0
    for p, m in full.items():
        out.append((p, m))
        if abs(abs(p) - 1) <= 1e-12:
            continue
        if p == 0:
            m_inf += m
        else:
            out.append((1.0 / np.conj(p), m))
    total = sum(m for _, m in out) + m_inf
    if total != -4:
        raise ReflectionError(
            f"reflected divisor has total order {total}; the data cannot be real on the circle")
    div = list(out)
    if m_inf:
        div.append((INFINITY, m_inf))
    Q = QuadDifferential(complex(constant), tuple(div))
    crit = [t for t, _, _ in _circle_points(Q)]
    th = (np.arange(samples) + 0.5) * 2 * math.pi / samples + 0.0123
    for t in crit:
        th = th[np.abs(np.angle(np.exp(1j * (th - t)))) > 1e-6]
    v = circle_sign_values(Q, th)
    ph = np.angle(v)
    # rotate by the smallest angle that makes the samples real
    rot = -np.angle(np.mean(np.exp(2j * ph))) / 2
    v2 = v * np.exp(1j * rot)
    if np.any(np.abs(v2.imag) > tol * np.abs(v2)):
        raise ReflectionError("boundary values cannot be made real by a constant rotation")
    return QuadDifferential(complex(constant) * np.exp(1j * rot), Q.divisor)


# trajectories

@dataclass(frozen=True)
class TrajectoryArc:
    path: PathSample
    kind: str
    start: Optional[CriticalPoint]
    end: Optional[CriticalPoint]
    q_length: float
    closed: bool = False
    complete: bool = True
    direction_out: Optional[float] = None
    direction_in: Optional[float] = None


def local_scale(Q: QuadDifferential, point=None) -> float:
    pts = [p for p, _ in Q.finite]
    if point is None:
        if len(pts) < 2:
            return 1.0 if not pts else max(1.0, abs(pts[0]))
        d = [abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]]
        return max(min(d), 1e-12)
    others = [abs(p - point) for p in pts if abs(p - point) > 0]
    return min(others) if others else max(1.0, abs(point))


def flat_increment(Q: QuadDifferential, z0, z1, tol: float = 1e-12) -> complex:
    """Integral of sqrt(Q) dz along the segment [z0, z1].

    The root is continued along the segment (branch fixed by the first
    interior sample) and each subinterval is integrated with the sign
    aligned to its continued root; divisor points at the ends are handled
    by exponent substitution.
    """
    z0 = complex(z0)
    z1 = complex(z1)
    dz = z1 - z0
    if dz == 0:
        return 0j
    le = re = None
    for p, m in Q.finite:
        if abs(p - z0) <= 1e-14 * max(1, abs(p)):
            le = m / 2 + 1
        if abs(p - z1) <= 1e-14 * max(1, abs(p)):
            re = m / 2 + 1
    n = 8
    while True:
        ts = np.linspace(0.0, 1.0, n + 1)
        q = eval_qd(Q, z0 + ts[1:-1] * dz)
        steps = np.angle(q[1:] / q[:-1])
        if n >= 4096 or np.all(np.abs(steps) < math.pi / 4):
            break
        n *= 2
    # continuous root at the interior samples
    theta = np.angle(q[0]) + np.concatenate([[0.0], np.cumsum(steps)])
    roots = np.sqrt(np.abs(q)) * np.exp(0.5j * theta)
    total = 0j
    for i in range(n):
        ref = roots[i - 1] if i > 0 else roots[0]

        def f(t, ref=ref):
            v = np.sqrt(np.asarray(eval_qd(Q, z0 + t * dz), dtype=complex))
            return np.where((v * np.conj(ref)).real < 0, -v, v) * dz

        total += adaptive_integral(f, (ts[i], ts[i + 1]), tol=tol / n,
                                   left_exponent=le if i == 0 else None,
                                   right_exponent=re if i == n - 1 else None).value
    return total


def _snap_target(Q, z, kind, finite_crit, capture, tol=1e-7, capture_rel=1e-3):
    """Index of a finite critical point the trace is running into: inside the
    capture radius with the flat coordinate from that point (nearly) real
    (trajectory) or imaginary (orthogonal)."""
    for i, (c, n) in enumerate(finite_crit):
        d = abs(z - c)
        if d > capture[i]:
            continue
        a = Q.leading_coefficient(c)
        w = a * (z - c) ** (n + 2)
        if kind == "orthogonal":
            w = -w
        # cheap leading-order screen, then the exact flat coordinate
        if abs(w) == 0 or abs(cmath.phase(w)) > 0.1:
            continue
        W = flat_increment(Q, c, z)
        if kind == "orthogonal":
            W = 1j * W
        # flat size of the whole neighbourhood sets the absolute tolerance
        wscale = 2 * abs(a) ** 0.5 * (capture[i] / capture_rel) ** ((n + 2) / 2) / (n + 2)
        if abs(W.imag) < tol * wscale and W.real != 0:
            return i
    return None


def trace_trajectory(Q: QuadDifferential, start, kind: str = "trajectory",
                     direction: int = 1, max_length: Optional[float] = None,
                     rtol: float = 1e-11, max_steps: int = 20000,
                     far: float = 1e3, capture_factor: float = 1e-3,
                     initial_direction: Optional[complex] = None) -> TrajectoryArc:
    """Trace a trajectory (Q dz^2 > 0) or orthogonal trajectory (< 0).

    The trace stops on reaching a finite critical point along a critical
    direction (snapped exactly), on entering the guard radius of a pole of
    order >= 2, on closing up, on escaping to infinity, or on exhausting the
    length/step budget (then the arc is flagged incomplete).
    """
    return _trace(Q, complex(start), kind, direction, max_length, rtol, max_steps,
                  far, capture_factor, initial_direction, None, 0.0)


def trace_from_critical(Q: QuadDifferential, point, angle: float, kind: str = "trajectory",
                        offset_factor: float = 1e-4, **kw) -> TrajectoryArc:
    """Trace the critical trajectory leaving a finite critical point at a
    given angle; the first short piece is a straight segment whose Q-length
    is integrated exactly."""
    point = complex(point)
    n = Q.order_at(point)
    if n < -1:
        raise ValueError("tracing starts only at finite critical points")
    r = offset_factor * local_scale(Q, point)
    z1 = point + r * cmath.exp(1j * angle)
    # rotate the start onto the critical trajectory: W(z1)^2 real, W ~ (z - point)^((n+2)/2)
    for _ in range(3):
        W2 = flat_increment(Q, point, z1) ** 2
        if kind == "orthogonal":
            W2 = -W2
        z1 = point + (z1 - point) * cmath.exp(-1j * cmath.phase(W2) / (n + 2))
    head = abs(flat_increment(Q, point, z1))
    cp = CriticalPoint.from_order(point, n, Q) if n != 0 else None
    return _trace(Q, z1, kind, 1, kw.get("max_length"), kw.get("rtol", 1e-11),
                  kw.get("max_steps", 20000), kw.get("far", 1e3),
                  kw.get("capture_factor", 1e-3), cmath.exp(1j * angle), cp, head,
                  origin=point)


def _trace(Q, start, kind, direction, max_length, rtol, max_steps, far, capture_factor,
           initial_direction, start_point, head, origin=None):
    if kind not in ("trajectory", "orthogonal"):
        raise ValueError("kind must be trajectory or orthogonal")
    rot = 1.0 if kind == "trajectory" else 1j

    def fieldf(z):
        return rot / np.sqrt(complex(eval_qd(Q, z)))

    d0 = fieldf(start)
    d0 = d0 / abs(d0)
    if initial_direction is not None:
        if (d0 * np.conj(initial_direction)).real < 0:
            d0 = -d0
    elif direction < 0:
        d0 = -d0
    scale = local_scale(Q)
    fin = [(p, m) for p, m in Q.finite if m >= -1]
    capture = [capture_factor * local_scale(Q, p) for p, _ in fin]
    sing = [p for p, _ in Q.finite]
    guards = 1e-6 * min([local_scale(Q, p) for p in sing] or [1.0])
    state = {"snap": None, "far": False, "left": False, "away": origin is None}
    hmax = 0.05 * max(scale, 1e-3) if scale < 1e3 else 50.0
    arm = 3 * hmax
    # escape radius, relative to the extent of the finite divisor
    extent = max([abs(p) for p in sing] + [abs(start), scale])
    r_far = far * extent
    if max_length is None:
        max_length = 10 * r_far

    def stop(z_old, z_new, s):
        if not state["away"]:
            j0 = [i for i, (p, _) in enumerate(fin) if p == origin]
            if not j0 or abs(z_new - origin) > capture[j0[0]]:
                state["away"] = True
        j = _snap_target(Q, z_new, kind, fin, capture, capture_rel=capture_factor)
        if j is not None and (state["away"] or fin[j][0] != origin):
            state["snap"] = j
            return True
        if not state["left"] and abs(z_new - start) > 2 * arm:
            state["left"] = True
        if abs(z_new) > r_far:
            state["far"] = True
            return True
        return False

    def closing(z):
        # signed distance past the normal line through the start, armed near the start
        if origin is not None or not state["left"] or abs(z - start) > arm:
            return -1.0
        return ((z - start) * np.conj(d0)).real

    pieces = []
    total = 0.0
    z_cur, dir_cur = start, d0
    closed = False
    budget = max_length
    while True:
        res = trace_ode(fieldf, z_cur, stop=stop, rtol=rtol, atol=rtol * 1e-2,
                        max_steps=max_steps, max_length=budget, h0=1e-3 * scale,
                        hmax=hmax, singular=sing, guard=guards, stop_at_singular=True,
                        integrand=lambda z: float(Q.sqrt_abs(z)), line_field=True,
                        initial_direction=dir_cur, event=closing, far_radius=extent)
        pieces.append(res.path.points if not pieces else res.path.points[1:])
        total += res.integral
        budget -= res.path.params[-1] - res.path.params[0]
        if res.status != "event":
            break
        z_end = res.path.points[-1]
        if abs(z_end - start) <= 1e-6 * max(scale, 1e-3):
            closed = True
            break
        # a near miss: keep going from the crossing
        state["left"] = False
        dir_cur = fieldf(z_end)
        tail = res.path.points[-1] - res.path.points[-2]
        if (dir_cur * np.conj(tail)).real < 0:
            dir_cur = -dir_cur
        z_cur = z_end
    pts = np.concatenate(pieces)
    if origin is not None:
        pts = np.concatenate([[origin], pts])
    length = total + head
    end = None
    complete = True
    if state["snap"] is not None:
        c, n = fin[state["snap"]]
        length += abs(flat_increment(Q, pts[-1], c))
        pts = np.concatenate([pts, [c]])
        end = CriticalPoint.from_order(c, n, Q)
    elif closed:
        pts[-1] = start
    elif res.status == "singular":
        p = sing[res.hit]
        m = Q.order_at(p)
        end = CriticalPoint.from_order(p, m, Q)
        if m <= -2:
            length = math.inf
    elif state["far"]:
        m = Q.order_at_infinity
        if m != 0:
            end = CriticalPoint.from_order(INFINITY, m, Q)
        if m <= -2:
            length = math.inf
        else:
            complete = False
    else:
        complete = False
    params = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts)))])
    keep = np.concatenate([[True], np.diff(params) > 0])
    path = PathSample(pts[keep], params[keep])
    return TrajectoryArc(path, kind, start_point, end, float(length), closed, complete)


def q_length(Q: QuadDifferential, arc, tol: float = 1e-10) -> float:
    """Q-length of a sampled arc; +inf when an endpoint is a pole of order >= 2.

    The polyline is smoothed by a cubic spline in its parameter (periodic
    when closed) and the length integrand is integrated on each sample
    interval; intervals touching a divisor point use exponent substitution.
    """
    path = arc.path if isinstance(arc, TrajectoryArc) else arc
    pts = path.points
    prm = path.params
    scale = max(np.ptp(pts.real), np.ptp(pts.imag), 1e-300)
    div = Q.finite
    for p, m in div:
        for e in (pts[0], pts[-1]):
            if m <= -2 and abs(e - p) <= 1e-6 * max(scale, 1.0):
                return math.inf
        inner = np.abs(pts[1:-1] - p)
        if m < 0 and inner.size and inner.min() <= 1e-12 * max(scale, 1.0):
            raise SingularityError("arc passes through a pole", point=p)
    closed = path.is_closed and pts.size > 3
    if closed:
        spl = CubicSpline(prm, np.concatenate([pts[:-1], [pts[0]]]), bc_type="periodic")
    elif pts.size >= 4:
        spl = CubicSpline(prm, pts)
    else:
        spl = None

    def endpoint_exp(e):
        for p, m in div:
            if abs(e - p) <= 1e-12 * max(scale, 1.0):
                return m / 2 + 1
        return None

    total = 0.0
    for i in range(prm.size - 1):
        a, b = prm[i], prm[i + 1]
        le = endpoint_exp(pts[i]) if i == 0 else None
        re = endpoint_exp(pts[i + 1]) if i == prm.size - 2 else None
        if spl is None:
            za, zb = pts[i], pts[i + 1]

            def f(t, za=za, zb=zb, a=a, b=b):
                z = za + (zb - za) * (t - a) / (b - a)
                return Q.sqrt_abs(z) * abs(zb - za) / (b - a)
        else:
            d = spl.derivative()

            def f(t, d=d):
                return Q.sqrt_abs(spl(t)) * np.abs(d(t))
        total += adaptive_integral(f, (a, b), tol=tol / prm.size,
                                   left_exponent=le, right_exponent=re).value.real
    return float(total)


# critical modulated graph

@dataclass(frozen=True)
class GraphEdge:
    start: int
    end: int
    start_dir: int
    end_dir: int
    weight: float
    path: PathSample


@dataclass(frozen=True)
class RingTwist:
    """Vertex angles on the two boundary circles of the canonical annulus,
    rotated so that the initial vertex of the first walk sits at angle 0."""
    angles: tuple
    initial_vertices: tuple
    tau: float


@dataclass(frozen=True)
class GraphFace:
    kind: str
    walks: tuple
    totals: tuple
    center: Optional[complex] = None
    height: Optional[float] = None
    twist: Optional[RingTwist] = None

    @property
    def module(self) -> Optional[float]:
        if self.kind != "ring":
            return None
        return self.height / self.totals[0]


@dataclass(frozen=True)
class ModulatedGraph:
    vertices: tuple
    edges: tuple
    faces: tuple

    def ring_faces(self):
        return [f for f in self.faces if f.kind == "ring"]

    def walk_vertices(self, walk) -> list:
        out = []
        for e, fwd in walk:
            ed = self.edges[e]
            out.append(ed.start if fwd else ed.end)
        return out


def _half_paths(edge: GraphEdge, forward: bool) -> np.ndarray:
    return edge.path.points if forward else edge.path.points[::-1]


def _cum_qlen(Q, pts, total):
    """Cumulative Q-length along a polyline, trapezoid rule rescaled to total."""
    w = Q.sqrt_abs(0.5 * (pts[1:] + pts[:-1])) * np.abs(np.diff(pts))
    w = np.where(np.isfinite(w), w, 0.0)
    c = np.concatenate([[0.0], np.cumsum(w)])
    return c * (total / c[-1]) if c[-1] > 0 else c


def _segment_hits(p, q, A, B):
    """Intersections of segment p->q with segments A->B; returns (s, u, index)."""
    d = q - p
    e = B - A
    den = (np.conj(d) * e).imag
    ok = np.abs(den) > 0
    r = A - p
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (np.conj(r) * e).imag / den
        u = (np.conj(r) * d).imag / den
    m = ok & (s >= 0) & (s <= 1) & (u >= 0) & (u <= 1)
    idx = np.nonzero(m)[0]
    return s[idx], u[idx], idx


def critical_modulated_graph(Q: QuadDifferential, rtol: float = 1e-11,
                             max_steps: int = 20000) -> ModulatedGraph:
    """Critical trajectories, their Q-lengths and the faces they bound.

    Faces are circle domains (around an order-two pole with circular
    structure) or ring domains (two boundary walks, with the height of an
    orthogonal crossing and the twist of the canonical annulus map).
    Raises StructureError when a critical trajectory does not end at a
    finite critical point within budget.
    """
    if Q.order_at_infinity >= -1:
        raise StructureError("infinity must be a pole of order >= 2; apply a Mobius map first")
    verts = [(p, m) for p, m in Q.finite if m >= -1]
    vcps = tuple(CriticalPoint.from_order(p, m, Q) for p, m in verts)
    poles2 = [p for p, m in Q.divisor if m == -2]
    for p, m in Q.divisor:
        if m <= -3:
            raise StructureError(f"pole of order {-m} at {p} has end domains")
        if m == -2 and pole2_structure(Q.leading_coefficient(p)) != "circular":
            raise StructureError(f"order-two pole at {p} is not circular")
    dirs = [classify_local_structure(Q, p).directions for p, _ in verts]
    # sort directions counterclockwise
    dirs = [tuple(sorted(d)) for d in dirs]
    twin = {}
    edges = []
    for vi, (p, m) in enumerate(verts):
        for k, ang in enumerate(dirs[vi]):
            if (vi, k) in twin:
                continue
            arc = trace_from_critical(Q, p, ang, rtol=rtol, max_steps=max_steps)
            if arc.end is None or arc.end.kind != "finite" or not arc.complete:
                raise StructureError(
                    f"critical trajectory from {p} at angle {ang:.6f} does not end at a finite critical point",
                    trajectory=arc)
            ui = next(i for i, (c, _) in enumerate(verts) if c == arc.end.location)
            back = arc.path.points[-2] - arc.end.location
            ph = np.angle(back) % (2 * math.pi)
            dd = np.abs(np.angle(np.exp(1j * (np.array(dirs[ui]) - ph))))
            j = int(np.argmin(dd))
            if (ui, j) in twin or (ui == vi and j == k):
                raise StructureError(f"critical trajectory from {p} arrives on a used direction",
                                     trajectory=arc)
            e = len(edges)
            edges.append(GraphEdge(vi, ui, k, j, arc.q_length, arc.path))
            twin[(vi, k)] = (e, True)
            twin[(ui, j)] = (e, False)
    # face walks: at the arrival vertex turn to the next direction clockwise
    used = set()
    walks = []
    for key in sorted(twin):
        if key in used:
            continue
        walk = []
        cur = key
        while cur not in used:
            used.add(cur)
            e, fwd = twin[cur]
            walk.append((e, fwd))
            ed = edges[e]
            u, j = (ed.end, ed.end_dir) if fwd else (ed.start, ed.start_dir)
            cur = (u, (j - 1) % len(dirs[u]))
        walks.append(tuple(walk))
    totals = [sum(edges[e].weight for e, _ in w) for w in walks]

    if not edges:
        faces = tuple(GraphFace("circle", (), (), center=c) for c in poles2)
        return ModulatedGraph(vcps, (), faces)

    A_list, B_list, owner = [], [], []
    for ei, ed in enumerate(edges):
        pts = ed.path.points
        A_list.append(pts[:-1])
        B_list.append(pts[1:])
        owner.extend((ei, si) for si in range(pts.size - 1))
    A = np.concatenate(A_list)
    B = np.concatenate(B_list)
    scale = local_scale(Q)
    extent = max([abs(p) for p, _ in Q.finite] + [scale])
    r_far = 1e3 * extent

    def cross_from(wi):
        """Orthogonal crossing from the longest edge of walk wi into its face."""
        w = walks[wi]
        e, fwd = max(w, key=lambda t: edges[t[0]].weight)
        ed = edges[e]
        pts = _half_paths(ed, fwd)
        cum = _cum_qlen(Q, pts, ed.weight)
        i = int(np.searchsorted(cum, 0.5 * ed.weight))
        i = min(max(i, 1), pts.size - 2)
        p1 = pts[i]
        tan = pts[i + 1] - pts[i - 1]
        tan /= abs(tan)
        pos1 = sum(edges[x].weight for x, _ in w[:w.index((e, fwd))]) + cum[i]
        hit = {}

        def stop(z_old, z_new, s):
            if abs(z_new) > r_far:
                hit["far"] = True
                return True
            ss, uu, idx = _segment_hits(z_old, z_new, A, B)
            keep = np.abs(z_old + ss * (z_new - z_old) - p1) > 1e-9 * scale
            if np.any(keep):
                ss, uu, idx = ss[keep], uu[keep], idx[keep]
                f = int(np.argmin(ss))
                hit.update(s=ss[f], u=uu[f], seg=int(idx[f]), z_old=z_old, z_new=z_new)
                return True
            return False

        sing = [p for p, _ in Q.finite]
        guard = 1e-6 * min(local_scale(Q, p) for p in sing)

        def fieldf(z):
            return 1j / np.sqrt(complex(eval_qd(Q, z)))

        res = trace_ode(fieldf, p1, stop=stop, rtol=rtol, atol=rtol * 1e-2,
                        max_steps=max_steps, h0=1e-3 * scale, hmax=0.05 * scale,
                        singular=sing, guard=guard, stop_at_singular=True,
                        integrand=lambda z: float(Q.sqrt_abs(z)), line_field=True,
                        initial_direction=1j * tan, far_radius=extent)
        if hit.get("far"):
            return ("circle", INFINITY, None)
        if res.status == "singular":
            c = sing[res.hit]
            if Q.order_at(c) != -2:
                raise StructureError(f"orthogonal trajectory from walk {wi} ends at {c}")
            return ("circle", c, None)
        if not hit:
            raise StructureError(f"orthogonal trajectory from walk {wi} did not return to the graph")
        ei2, si = owner[hit["seg"]]
        zh = A[hit["seg"]] + hit["u"] * (B[hit["seg"]] - A[hit["seg"]])
        z_old = hit["z_old"]
        n_before = res.path.points.size - 1
        # integral up to the step start plus the exact flat tail
        partial = res.integral - abs(flat_increment(Q, z_old, hit["z_new"]))
        u = np.sqrt(complex(eval_qd(Q, z_old))) * (hit["z_new"] - z_old)
        tail = abs((flat_increment(Q, z_old, zh) * np.conj(u / abs(u))).real)
        height = partial + tail
        ed2 = edges[ei2]
        t2 = B[hit["seg"]] - A[hit["seg"]]
        # the face lies on the side we came from
        left = ((z_old - zh) * np.conj(t2)).imag > 0
        fwd2 = bool(left)
        w2 = next(k for k, w in enumerate(walks) if (ei2, fwd2) in w)
        pts2 = ed2.path.points
        cum2 = _cum_qlen(Q, pts2, ed2.weight)
        c_on = cum2[si] + hit["u"] * (cum2[si + 1] - cum2[si])
        if not fwd2:
            c_on = ed2.weight - c_on
        w2walk = walks[w2]
        pos2 = sum(edges[x].weight for x, _ in w2walk[:w2walk.index((ei2, fwd2))]) + c_on
        t2o = t2 if fwd2 else -t2
        crossing = np.concatenate([res.path.points[:n_before], [zh]])
        return ("ring", w2, dict(height=height, pos1=pos1, pos2=pos2, p1=p1, tan1=tan,
                                 tan2=t2o / abs(t2o), crossing=crossing))

    faces = []
    done = set()
    for wi in range(len(walks)):
        if wi in done:
            continue
        kind, other, info = cross_from(wi)
        done.add(wi)
        if kind == "circle":
            faces.append(GraphFace("circle", (walks[wi],), (totals[wi],), center=other))
            continue
        done.add(other)
        twist = _ring_twist(Q, walks, totals, wi, other, info, edges)
        faces.append(GraphFace("ring", (walks[wi], walks[other]), (totals[wi], totals[other]),
                               height=info["height"], twist=twist))
    return ModulatedGraph(vcps, tuple(edges), tuple(faces))


def _ring_twist(Q, walks, totals, w1, w2, info, edges) -> RingTwist:
    from .numerics import BranchedValue, sqrt_along
    alpha = totals[w1]
    r1 = np.sqrt(complex(eval_qd(Q, info["p1"])))
    if (r1 * info["tan1"]).real < 0:
        r1 = -r1
    cr = info["crossing"]
    path = PathSample.from_points(cr)
    vals = sqrt_along(Q, path, BranchedValue(r1, 0))
    r2 = vals[-1].value
    s2 = 1.0 if (r2 * info["tan2"]).real > 0 else -1.0

    def vertex_positions(w):
        out, c = [], 0.0
        for e, fwd in walks[w]:
            ed = edges[e]
            out.append((ed.start if fwd else ed.end, c))
            c += ed.weight
        return out

    a1 = [(v, 2 * math.pi * (c - info["pos1"]) / alpha) for v, c in vertex_positions(w1)]
    a2 = [(v, 2 * math.pi * s2 * (c - info["pos2"]) / alpha) for v, c in vertex_positions(w2)]
    rot = a1[0][1]
    ang1 = tuple((v, (a - rot) % (2 * math.pi)) for v, a in a1)
    ang2 = tuple((v, (a - rot) % (2 * math.pi)) for v, a in a2)
    return RingTwist((ang1, ang2), (a1[0][0], a2[0][0]), ang2[0][1])
