"""Numerical foundation shared by every other module.

Contains path containers, branch-tracked square roots along paths, an
adaptive Gauss-Kronrod integrator with endpoint-singularity substitution,
a safeguarded monotone inverter and a Dormand-Prince tracer for unit-speed
direction fields (including line fields whose sign must be kept aligned).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

INNER_TOL = 1e-10
FINGERPRINT_TOL = 1e-8


class NumericsError(Exception):
    pass


class IntegrationError(NumericsError):
    def __init__(self, message, worst_interval=None, estimate=None):
        super().__init__(message)
        self.worst_interval = worst_interval
        self.estimate = estimate


class BranchError(NumericsError):
    def __init__(self, message, param=None):
        super().__init__(message)
        self.param = param


class RangeError(NumericsError):
    pass


class SingularityError(NumericsError):
    def __init__(self, message, point=None, index=None):
        super().__init__(message)
        self.point = point
        self.index = index


@dataclass(frozen=True)
class PathSample:
    points: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        prm = np.asarray(self.params, dtype=float).ravel()
        if pts.size != prm.size:
            raise ValueError("points and params must have equal length")
        if pts.size < 2:
            raise ValueError("a path needs at least 2 samples")
        if np.any(np.diff(prm) <= 0):
            raise ValueError("params must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", prm)

    def __len__(self):
        return self.points.size

    @classmethod
    def from_points(cls, points) -> "PathSample":
        """Parametrize by cumulative chord length."""
        pts = np.asarray(points, dtype=complex).ravel()
        steps = np.abs(np.diff(pts))
        keep = np.concatenate([[True], steps > 0])
        pts = pts[keep]
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts)))])
        return cls(pts, s)

    @classmethod
    def circle_arc(cls, theta0: float, theta1: float, n: int = 64,
                   center: complex = 0.0, radius: float = 1.0) -> "PathSample":
        t = np.linspace(theta0, theta1, n)
        if theta1 < theta0:
            t = t[::-1]
            pts = center + radius * np.exp(1j * t)
            return cls(pts[::-1], -t[::-1])
        return cls(center + radius * np.exp(1j * t), t)

    def interpolate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return (np.interp(s, self.params, self.points.real)
                + 1j * np.interp(s, self.params, self.points.imag))

    @property
    def is_closed(self) -> bool:
        scale = max(np.ptp(self.points.real), np.ptp(self.points.imag), 1e-300)
        return abs(self.points[-1] - self.points[0]) <= 1e-9 * scale


@dataclass(frozen=True)
class BranchedValue:
    value: complex
    branch_index: int = 0


class Quadrature(NamedTuple):
    value: complex
    error: float


# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1]
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes
_GW = np.zeros(15)
_GW[[1, 3, 5, 13, 11, 9]] = np.concatenate([_WG[:3], _WG[:3]])
_GW[7] = _WG[3]


def _substituted(f, a, b, left, right):
    """Return a list of (g, lo, hi) pieces with endpoint singularities removed.

    An exponent alpha means f ~ |t - endpoint|**(alpha - 1); the map
    t = endpoint + h * s**(1/alpha) makes the integrand smooth in s.
    """
    if left is None and right is None:
        return [(f, a, b)]
    pieces = []
    m = 0.5 * (a + b) if (left is not None and right is not None) else None

    def left_piece(lo, hi, alpha):
        h = hi - lo

        def g(s):
            t = lo + h * s ** (1.0 / alpha)
            return f(t) * h / alpha * s ** (1.0 / alpha - 1.0)
        return g

    def right_piece(lo, hi, alpha):
        h = hi - lo

        def g(s):
            t = hi - h * s ** (1.0 / alpha)
            return f(t) * h / alpha * s ** (1.0 / alpha - 1.0)
        return g

    if left is not None and right is not None:
        pieces.append((left_piece(a, m, left), 0.0, 1.0))
        pieces.append((right_piece(m, b, right), 0.0, 1.0))
    elif left is not None:
        pieces.append((left_piece(a, b, left), 0.0, 1.0))
    else:
        pieces.append((right_piece(a, b, right), 0.0, 1.0))
    return pieces


def _gk_batch(g, lo, hi):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    t = c[:, None] + h[:, None] * _NODES[None, :]
    vals = np.asarray(g(t.ravel()), dtype=complex).reshape(t.shape)
    k = (vals @ _KW) * h
    gs = (vals @ _GW) * h
    return k, np.abs(k - gs)


def _adaptive(g, a, b, tol, max_intervals):
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    val, err = _gk_batch(g, lo, hi)
    while True:
        total_err = err.sum()
        if total_err <= tol:
            return val.sum(), total_err
        if lo.size >= max_intervals:
            w = int(np.argmax(err))
            raise IntegrationError(
                f"no convergence: error {total_err:.3e} > tol {tol:.3e}",
                worst_interval=(lo[w], hi[w]), estimate=val.sum())
        if not np.all(np.isfinite(val)):
            w = int(np.argmax(~np.isfinite(val)))
            raise IntegrationError("non-finite integrand",
                                   worst_interval=(lo[w], hi[w]))
        split = err > max(tol / lo.size, 0.25 * err.max())
        mid = 0.5 * (lo[split] + hi[split])
        if np.any((mid <= lo[split]) | (mid >= hi[split])):
            w = int(np.argmax(err))
            raise IntegrationError("interval underflow",
                                   worst_interval=(lo[w], hi[w]),
                                   estimate=val.sum())
        nlo = np.concatenate([lo[split], mid])
        nhi = np.concatenate([mid, hi[split]])
        nval, nerr = _gk_batch(g, nlo, nhi)
        keep = ~split
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])


def adaptive_integral(f: Callable, interval: Sequence[float], tol: float = INNER_TOL,
                      left_exponent: Optional[float] = None,
                      right_exponent: Optional[float] = None,
                      max_intervals: int = 4000) -> Quadrature:
    """Integrate a vectorized complex function of a real parameter.

    Parameters
    ----------
    f : callable
        Accepts a float array and returns values of the same shape.
    interval : (a, b)
    tol : float
        Absolute tolerance on the returned error estimate.
    left_exponent, right_exponent : float, optional
        Declared behaviour f ~ |t - endpoint|**(alpha - 1) at an endpoint.

    Returns
    -------
    Quadrature
        (value, error estimate)
    """
    a, b = float(interval[0]), float(interval[1])
    if a == b:
        return Quadrature(0j, 0.0)
    sign = 1.0
    if b < a:
        a, b = b, a
        left_exponent, right_exponent = right_exponent, left_exponent
        sign = -1.0
    pieces = _substituted(f, a, b, left_exponent, right_exponent)
    total, err = 0j, 0.0
    for g, lo, hi in pieces:
        v, e = _adaptive(g, lo, hi, tol / len(pieces), max_intervals)
        total += v
        err += e
    return Quadrature(sign * total, err)


def _arg_steps_ok(q):
    ratio = q[1:] / q[:-1]
    return np.abs(np.angle(ratio)) < np.pi / 2


def sqrt_along(Q: Callable, path: PathSample, initial: BranchedValue,
               max_depth: int = 40) -> list:
    """Continue a square root of Q along a path.

    The path is refined (linearly between samples) until consecutive values
    of Q differ in argument by less than pi/2, then the sign of each root is
    chosen to stay closest to its predecessor.
    """
    pts = path.points
    q0 = complex(Q(np.array([pts[0]]))[0])
    v0 = complex(initial.value)
    if abs(v0 * v0 - q0) > 1e-10 * max(abs(q0), 1e-300):
        raise BranchError("initial value is not a square root of Q", path.params[0])
    theta = 2.0 * np.angle(v0) if v0 != 0 else np.angle(q0)
    theta0 = theta
    out = [BranchedValue(v0, initial.branch_index)]
    q_prev = q0
    for i in range(1, pts.size):
        za, zb = pts[i - 1], pts[i]
        sub = np.array([za, zb])
        qs = np.asarray(Q(sub), dtype=complex)
        depth = 0
        while not np.all(_arg_steps_ok(qs)) or not np.all(np.isfinite(qs)) or np.any(qs == 0):
            if not np.all(np.isfinite(qs)) or np.any(qs == 0):
                raise BranchError("path meets a zero or pole of Q",
                                  path.params[i - 1])
            depth += 1
            if depth > max_depth:
                raise BranchError("cannot resolve the branch near a critical point",
                                  path.params[i - 1])
            n = sub.size * 2 - 1
            sub = za + (zb - za) * np.linspace(0.0, 1.0, n)
            qs = np.asarray(Q(sub), dtype=complex)
        steps = np.angle(qs[1:] / qs[:-1])
        theta = theta + steps.sum()
        q_prev = qs[-1]
        val = np.sqrt(abs(q_prev)) * np.exp(0.5j * theta)
        branch = initial.branch_index + int(np.floor((theta - theta0) / (2 * np.pi) + 0.5))
        out.append(BranchedValue(complex(val), branch))
    return out


def invert_monotone(F: Callable, target, interval: Sequence[float], tol: float = 1e-12,
                    derivative: Optional[Callable] = None, max_iter: int = 200):
    """Solve F(x) = target for strictly increasing F on [a, b].

    Works on scalars or arrays of targets (F must then be vectorized).
    Newton steps with the supplied derivative are used when they stay
    inside the current bracket; otherwise the Illinois secant step or
    bisection takes over.
    """
    scalar = np.ndim(target) == 0
    tgt = np.atleast_1d(np.asarray(target, dtype=float))
    a, b = float(interval[0]), float(interval[1])

    def Fv(x):
        return np.asarray(F(x) if not scalar else F(float(x[0])), dtype=float).reshape(x.shape)

    lo = np.full(tgt.shape, a)
    hi = np.full(tgt.shape, b)
    flo = Fv(lo) - tgt if not scalar else np.atleast_1d(F(a) - tgt[0])
    fhi = Fv(hi) - tgt if not scalar else np.atleast_1d(F(b) - tgt[0])
    if np.any(flo > tol) or np.any(fhi < -tol):
        raise RangeError("target outside the range of F on the interval")
    x = np.where(np.abs(flo) <= np.abs(fhi), lo, hi)
    fx = np.where(np.abs(flo) <= np.abs(fhi), flo, fhi)
    done = np.abs(fx) <= tol
    side = np.zeros(tgt.shape, dtype=int)
    for _ in range(max_iter):
        if np.all(done):
            break
        width = hi - lo
        cand = 0.5 * (lo + hi)
        denom = fhi - flo
        sec = np.where(denom > 0, lo - flo * width / np.where(denom > 0, denom, 1.0), cand)
        ok = (sec > lo + 0.01 * width) & (sec < hi - 0.01 * width)
        cand = np.where(ok, sec, cand)
        if derivative is not None:
            d = np.asarray(derivative(x) if not scalar else [derivative(float(x[0]))], dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = x - fx / d
            nok = np.isfinite(newton) & (newton > lo) & (newton < hi) & (d > 0)
            cand = np.where(nok, newton, cand)
        cand = np.where(done, x, cand)
        fc = Fv(cand) - tgt if not scalar else np.atleast_1d(F(float(cand[0])) - tgt[0])
        x, fx = cand, fc
        newly = np.abs(fc) <= tol
        left = (fc < 0) & ~done
        right = (fc > 0) & ~done
        lo = np.where(left, cand, lo)
        flo = np.where(left, fc, flo)
        hi = np.where(right, cand, hi)
        fhi = np.where(right, fc, fhi)
        # Illinois: halve the stale endpoint value on repeated sides
        fhi = np.where(left & (side == -1), 0.5 * fhi, fhi)
        flo = np.where(right & (side == 1), 0.5 * flo, flo)
        side = np.where(left, -1, np.where(right, 1, side))
        tiny = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        done = done | newly | tiny
    return float(x[0]) if scalar else x


class TraceResult(NamedTuple):
    path: PathSample
    integral: float
    status: str
    hit: Optional[int]


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])


def trace_ode(field: Callable, start: complex,
              stop: Optional[Callable] = None,
              rtol: float = 1e-10, atol: float = 1e-12,
              max_steps: int = 20000, max_length: Optional[float] = None,
              h0: float = 1e-3, hmax: float = 0.05,
              singular: Sequence[complex] = (), guard: float = 1e-6,
              stop_at_singular: bool = False,
              integrand: Optional[Callable] = None,
              line_field: bool = False,
              initial_direction: Optional[complex] = None,
              max_step_fraction: float = 0.5,
              event: Optional[Callable] = None,
              far_radius: Optional[float] = None) -> TraceResult:
    """Trace dz/ds = field(z)/|field(z)| by an embedded 4(5) pair.

    stop(z_old, z_new, s) may return True to end the trace after an
    accepted step. With line_field=True the field is treated as defined up
    to sign and each stage is oriented along the previous direction.
    integrand(z), when given, is accumulated as an extra real component.
    event(z) is a real function; the trace ends exactly where it changes
    sign (located by secant refinement of the final step).
    Steps are capped at max_step_fraction times the distance to the nearest
    declared singular point; entering the guard radius either raises
    SingularityError or, with stop_at_singular, ends the trace.
    Beyond far_radius the step cap grows in proportion to |z|.
    """
    sing = np.asarray(list(singular), dtype=complex)
    z = complex(start)
    s = 0.0
    acc = 0.0
    pts = [z]
    prm = [0.0]
    ref = initial_direction

    def direction(w, ref_dir):
        v = complex(field(w))
        m = abs(v)
        if not np.isfinite(m) or m == 0:
            raise SingularityError("direction field degenerates", point=w)
        v /= m
        if line_field and ref_dir is not None and (v * np.conj(ref_dir)).real < 0:
            v = -v
        return v

    def dist_sing(w):
        if sing.size == 0:
            return np.inf, None
        d = np.abs(sing - w)
        i = int(np.argmin(d))
        return d[i], i

    d0, i0 = dist_sing(z)
    if d0 < guard:
        raise SingularityError("start lies inside the guard radius", point=sing[i0], index=i0)
    k1 = direction(z, ref)
    ref = k1
    h = h0

    def dp_step(z, acc, k1, h):
        ks = [k1]
        ls = [float(integrand(z)) if integrand else 0.0]
        for j in range(1, 7):
            zj = z + h * sum(_DP_A[j][m] * ks[m] for m in range(j))
            ks.append(direction(zj, ks[0]))
            ls.append(float(integrand(zj)) if integrand else 0.0)
        kz = np.array(ks)
        kl = np.array(ls, dtype=float)
        return (z + h * (kz @ _DP_B5), z + h * (kz @ _DP_B4),
                acc + h * (kl @ _DP_B5), acc + h * (kl @ _DP_B4), ks)
    status = "max_steps"
    hit = None
    for _ in range(max_steps):
        dmin, _ = dist_sing(z)
        hm = hmax if far_radius is None else hmax * max(1.0, abs(z) / far_radius)
        hcap = min(hm, max_step_fraction * dmin) if np.isfinite(dmin) else hm
        h = min(h, hcap)
        last = False
        if max_length is not None and s + h >= max_length:
            h = max_length - s
            last = True
        while True:
            z5, z4, l5, l4, ks = dp_step(z, acc, k1, h)
            sc = atol + rtol * max(abs(z), abs(z5), 1.0)
            err = abs(z5 - z4) / sc
            if integrand:
                err = max(err, abs(l5 - l4) / (atol + rtol * max(abs(l5), 1.0)))
            if err <= 1.0:
                break
            h *= max(0.2, 0.9 * err ** (-0.2))
            last = False
            if h < 1e-15:
                raise SingularityError("step size underflow", point=z)
        z_old = z
        if event is not None:
            e0, e1 = event(z), event(z5)
            if e0 != 0 and np.sign(e0) != np.sign(e1):
                ha, hb, ea, eb = 0.0, h, e0, e1
                hc = h
                for _ in range(60):
                    hc = ha + (hb - ha) * ea / (ea - eb)
                    zc, _, lc, _, _ = dp_step(z, acc, k1, hc)
                    ec = event(zc)
                    if abs(ec) < 1e-15 or (hb - ha) < 1e-15:
                        break
                    if np.sign(ec) == np.sign(ea):
                        ha, ea = hc, ec
                    else:
                        hb, eb = hc, ec
                pts.append(complex(zc))
                prm.append(s + hc)
                acc = float(lc)
                status = "event"
                break
        z = complex(z5)
        s += h
        acc = float(l5)
        pts.append(z)
        prm.append(s)
        k1 = direction(z, ks[-1])
        d, i = dist_sing(z)
        if d < guard:
            if stop_at_singular:
                status, hit = "singular", i
                break
            raise SingularityError("trace entered a guard radius", point=sing[i], index=i)
        if stop is not None and stop(z_old, z, s):
            status = "stopped"
            break
        if last:
            status = "max_length"
            break
        fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** (-0.2))
        h *= fac
    return TraceResult(PathSample(np.array(pts), np.array(prm)), acc, status, hit)
