"""Numerical Riemann maps of Jordan domains and the conformal fingerprint.

Interior map: the boundary values of the map Omega -> disk are obtained from
the Szego kernel, which solves a second-kind integral equation with the
skew-hermitian Kerzman-Stein kernel (discretized by Nystrom). The exterior
map is reduced to an interior one by the inversion w = 1/(z - z0).

Boundaries are lists of smooth pieces (segments, circular arcs, splines,
analytic parametrizations). Corners get geometrically graded Gauss panels;
smooth closed curves use the periodic trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, least_squares
from scipy.sparse.linalg import LinearOperator, gmres

from .numerics import PathSample, RangeError, invert_monotone


class MapperError(Exception):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SurgeryError(Exception):
    pass


class CurveError(ValueError):
    pass


# boundary pieces, each parametrized by t in [0, 1]

class Piece:
    straight = False
    circular = False

    def z(self, t):
        raise NotImplementedError

    def dz(self, t):
        raise NotImplementedError

    def length(self, n: int = 64) -> float:
        x, w = leggauss(n)
        t = 0.5 * (x + 1)
        return float(0.5 * np.sum(w * np.abs(self.dz(t))))

    def sub(self, t0: float, t1: float) -> "Piece":
        return SubPiece(self, t0, t1)

    def transformed(self, a, b) -> "Piece":
        return AffinePiece(self, a, b)


@dataclass(frozen=True)
class Segment(Piece):
    a: complex
    b: complex
    straight = True

    def z(self, t):
        return self.a + (self.b - self.a) * np.asarray(t, dtype=float)

    def dz(self, t):
        return np.full(np.shape(t), self.b - self.a, dtype=complex)

    def sub(self, t0, t1):
        return Segment(complex(self.z(t0)), complex(self.z(t1)))

    def transformed(self, a, b):
        return Segment(a * self.a + b, a * self.b + b)


@dataclass(frozen=True)
class Arc(Piece):
    """center + radius * exp(i (angle0 + (angle1 - angle0) t))."""
    center: complex
    radius: float
    angle0: float
    angle1: float
    circular = True

    def z(self, t):
        th = self.angle0 + (self.angle1 - self.angle0) * np.asarray(t, dtype=float)
        return self.center + self.radius * np.exp(1j * th)

    def dz(self, t):
        th = self.angle0 + (self.angle1 - self.angle0) * np.asarray(t, dtype=float)
        return 1j * (self.angle1 - self.angle0) * self.radius * np.exp(1j * th)

    def sub(self, t0, t1):
        d = self.angle1 - self.angle0
        return Arc(self.center, self.radius, self.angle0 + d * t0, self.angle0 + d * t1)

    def transformed(self, a, b):
        # a is a positive scale times a rotation
        rot = np.angle(a)
        return Arc(a * self.center + b, abs(a) * self.radius, self.angle0 + rot, self.angle1 + rot)


class SubPiece(Piece):
    def __init__(self, base: Piece, t0: float, t1: float):
        self.base, self.t0, self.t1 = base, float(t0), float(t1)

    def z(self, t):
        return self.base.z(self.t0 + (self.t1 - self.t0) * np.asarray(t, dtype=float))

    def dz(self, t):
        return (self.t1 - self.t0) * self.base.dz(self.t0 + (self.t1 - self.t0) * np.asarray(t, dtype=float))


class AffinePiece(Piece):
    def __init__(self, base: Piece, a, b):
        self.base, self.a, self.b = base, complex(a), complex(b)
        self.straight = base.straight
        self.circular = base.circular

    def z(self, t):
        return self.a * self.base.z(t) + self.b

    def dz(self, t):
        return self.a * self.base.dz(t)


class FunctionPiece(Piece):
    """Piece given by callables on [0, 1]."""

    def __init__(self, f: Callable, df: Callable):
        self.f, self.df = f, df

    def z(self, t):
        return np.asarray(self.f(np.asarray(t, dtype=float)), dtype=complex)

    def dz(self, t):
        return np.asarray(self.df(np.asarray(t, dtype=float)), dtype=complex)


class SplinePiece(Piece):
    """Cubic spline through points in chord-length parametrization."""

    def __init__(self, points, periodic: bool = False):
        pts = np.asarray(points, dtype=complex)
        if periodic and pts[0] != pts[-1]:
            pts = np.concatenate([pts, pts[:1]])
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts)))])
        s = s / s[-1]
        self.points = pts
        self.spline = CubicSpline(s, pts, bc_type="periodic" if periodic else "not-a-knot")
        self.deriv = self.spline.derivative()

    def z(self, t):
        return self.spline(np.asarray(t, dtype=float))

    def dz(self, t):
        return self.deriv(np.asarray(t, dtype=float))


# curves

def _turn(p_prev: Piece, p_next: Piece) -> float:
    t_in = complex(p_prev.dz(np.array([1.0]))[0])
    t_out = complex(p_next.dz(np.array([0.0]))[0])
    return float(np.angle(t_out / t_in))


@dataclass(frozen=True)
class JordanCurve:
    """Positively oriented Jordan curve made of smooth pieces.

    periodic marks a single smooth closed piece (t in [0, 1) wraps around).
    Interior angles at piece junctions are computed from the tangents;
    angles of pi are smooth junctions.
    """
    pieces: tuple
    periodic: bool = False

    def __post_init__(self):
        if not self.pieces:
            raise CurveError("a curve needs at least one piece")
        if not self.periodic:
            for j, p in enumerate(self.pieces):
                q = self.pieces[(j + 1) % len(self.pieces)]
                end = complex(p.z(np.array([1.0]))[0])
                start = complex(q.z(np.array([0.0]))[0])
                if abs(end - start) > 1e-9 * max(1.0, abs(end)):
                    raise CurveError("pieces do not join into a closed curve")
        if self.signed_area() <= 0:
            raise CurveError("curve must be positively oriented")

    # construction helpers
    @classmethod
    def polygon(cls, vertices) -> "JordanCurve":
        v = [complex(x) for x in vertices]
        return cls(tuple(Segment(v[j], v[(j + 1) % len(v)]) for j in range(len(v))))

    @classmethod
    def circle(cls, center=0j, radius: float = 1.0) -> "JordanCurve":
        c = complex(center)
        return cls.smooth(lambda t: c + radius * np.exp(2j * math.pi * t),
                          lambda t: 2j * math.pi * radius * np.exp(2j * math.pi * t))

    @classmethod
    def ellipse(cls, a: float, b: float, center=0j) -> "JordanCurve":
        c = complex(center)
        return cls.smooth(lambda t: c + a * np.cos(2 * math.pi * t) + 1j * b * np.sin(2 * math.pi * t),
                          lambda t: 2 * math.pi * (-a * np.sin(2 * math.pi * t) + 1j * b * np.cos(2 * math.pi * t)))

    @classmethod
    def smooth(cls, f: Callable, df: Callable) -> "JordanCurve":
        return cls((FunctionPiece(f, df),), periodic=True)

    @classmethod
    def from_polyline(cls, points, corners: Sequence[int] = ()) -> "JordanCurve":
        """Closed polyline samples; spline pieces between the corner indices
        (a periodic spline when there are none; straight segments between
        adjacent corners)."""
        pts = np.asarray(points, dtype=complex)
        if pts[0] == pts[-1]:
            pts = pts[:-1]
        n = pts.size
        if n < 3:
            raise CurveError("a polyline curve needs at least 3 distinct points")
        if not corners:
            return cls((SplinePiece(pts, periodic=True),), periodic=True)
        cs = sorted(set(int(c) % n for c in corners))
        pieces = []
        for j, c in enumerate(cs):
            d = cs[(j + 1) % len(cs)]
            idx = list(range(c, d + 1)) if d > c else list(range(c, n)) + list(range(0, d + 1))
            sub = pts[np.array(idx) % n]
            if sub.size == 2:
                pieces.append(Segment(sub[0], sub[1]))
            elif sub.size == 3:
                pieces.append(SplinePiece(np.array([sub[0], sub[1], sub[2]])))
            else:
                pieces.append(SplinePiece(sub))
        return cls(tuple(pieces))

    # geometry
    def sample(self, n: int = 512) -> PathSample:
        """Closed sample (last point repeats the first), parameter = piece index + t."""
        if self.periodic:
            t = np.linspace(0.0, 1.0, n + 1)
            return PathSample(self.pieces[0].z(t), t)
        per = max(2, n // len(self.pieces))
        pts, prm = [], []
        for j, p in enumerate(self.pieces):
            t = np.linspace(0.0, 1.0, per, endpoint=False)
            pts.append(p.z(t))
            prm.append(j + t)
        pts.append(self.pieces[0].z(np.array([0.0])))
        prm.append(np.array([float(len(self.pieces))]))
        return PathSample(np.concatenate(pts), np.concatenate(prm))

    def point(self, s):
        """Point at global parameter s (piece index + t)."""
        s = np.asarray(s, dtype=float)
        m = len(self.pieces)
        if self.periodic:
            return self.pieces[0].z(np.mod(s, 1.0))
        s = np.mod(s, m)
        j = np.minimum(np.floor(s).astype(int), m - 1)
        out = np.empty(s.shape, dtype=complex)
        for k in range(m):
            sel = j == k
            if np.any(sel):
                out[sel] = self.pieces[k].z(s[sel] - k)
        return out

    @property
    def period(self) -> float:
        return 1.0 if self.periodic else float(len(self.pieces))

    def signed_area(self) -> float:
        total = 0.0
        x, w = leggauss(48)
        t = 0.5 * (x + 1)
        for p in self.pieces:
            zz = p.z(t)
            dz = p.dz(t)
            total += 0.5 * float(np.sum(0.5 * w * (np.conj(zz) * dz).imag))
        return total

    def interior_angles(self) -> list:
        """Interior angle (radians) at the start of each piece."""
        if self.periodic:
            return [math.pi]
        m = len(self.pieces)
        return [math.pi - _turn(self.pieces[j - 1], self.pieces[j]) for j in range(m)]

    def corners(self, tol: float = 1e-9) -> list:
        return [j for j, a in enumerate(self.interior_angles()) if abs(a - math.pi) > tol]

    def contains(self, z) -> np.ndarray:
        """Point-in-curve test by winding number of a dense polygon."""
        poly = self.sample(2048).points[:-1]
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        d = poly[None, :] - z[:, None]
        ang = np.angle(np.roll(d, -1, axis=1) / d)
        return np.abs(ang.sum(axis=1)) > math.pi

    def is_simple(self, n: int = 512) -> bool:
        pts = self.sample(n).points
        a, b = pts[:-1], pts[1:]
        m = a.size
        d1 = b - a
        for i in range(m):
            r = a - a[i]
            den = (np.conj(d1[i]) * d1).imag
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (np.conj(r) * d1).imag / den
                u = (np.conj(r) * d1[i]).imag / den
            # collinear neighbours give a rounding-level den
            hit = (np.abs(den) > 1e-12 * np.abs(d1[i]) * np.abs(d1)) & (s > 1e-12) & (s < 1 - 1e-12) & (u > 1e-12) & (u < 1 - 1e-12)
            hit[max(i - 1, 0):i + 2] = False
            if i == 0:
                hit[-1] = False
            if i == m - 1:
                hit[0] = False
            if np.any(hit):
                return False
        return True

    def transformed(self, a, b) -> "JordanCurve":
        """Image under z -> a z + b (a nonzero complex)."""
        return JordanCurve(tuple(p.transformed(a, b) for p in self.pieces), self.periodic)

    def centroid(self) -> complex:
        """Area centroid when it lies inside, else the deepest point of a grid."""
        p = self.sample(4096).points
        x, y = p.real, p.imag
        cr = x[:-1] * y[1:] - x[1:] * y[:-1]
        A = 0.5 * cr.sum()
        c = complex(((x[:-1] + x[1:]) * cr).sum() / (6 * A), ((y[:-1] + y[1:]) * cr).sum() / (6 * A))
        if self.contains(c)[0]:
            return c
        lo = complex(x.min(), y.min())
        hi = complex(x.max(), y.max())
        g = np.linspace(0, 1, 60)
        grid = (lo.real + (hi.real - lo.real) * g)[None, :] + 1j * (lo.imag + (hi.imag - lo.imag) * g)[:, None]
        grid = grid.ravel()
        inside = grid[self.contains(grid)]
        depth = np.min(np.abs(inside[:, None] - p[None, :]), axis=1)
        return complex(inside[int(np.argmax(depth))])


# discretization

@dataclass
class Discretization:
    z: np.ndarray
    tangent: np.ndarray
    weight: np.ndarray
    s: np.ndarray
    piece: np.ndarray
    panels: list = field(default_factory=list)
    periodic: bool = False
    period: float = 1.0
    order: int = 16


def _panel_breaks(n_base: int, start_corner: bool, end_corner: bool, levels: int) -> np.ndarray:
    br = list(np.linspace(0.0, 1.0, n_base + 1))
    if start_corner:
        h = br[1]
        br = [0.0] + [h * 2.0 ** (-k) for k in range(levels, 0, -1)] + br[1:]
    if end_corner:
        h = 1.0 - br[-2]
        br = br[:-1] + [1.0 - h * 2.0 ** (-k) for k in range(1, levels + 1)] + [1.0]
    return np.array(sorted(set(br)))


def discretize(curve: JordanCurve, nodes: int = 1024, order: int = 16,
               levels: int = 20) -> Discretization:
    """Boundary quadrature: trapezoid for a smooth closed curve, Gauss
    panels (graded toward corners) otherwise.  nodes is the base count
    before corner grading."""
    if curve.periodic:
        t = np.arange(nodes) / nodes
        p = curve.pieces[0]
        z = p.z(t)
        dz = p.dz(t)
        sp = np.abs(dz)
        return Discretization(z, dz / sp, sp / nodes, t, np.zeros(nodes, dtype=int),
                              [], True, 1.0, order)
    x, wq = leggauss(order)
    lengths = np.array([p.length() for p in curve.pieces])
    total = lengths.sum()
    n_panels = max(len(curve.pieces), nodes // order)
    corners = set(curve.corners())
    m = len(curve.pieces)
    zs, ts, ws, ss, pc, panels = [], [], [], [], [], []
    for j, p in enumerate(curve.pieces):
        nb = max(1, int(round(n_panels * lengths[j] / total)))
        br = _panel_breaks(nb, j in corners, ((j + 1) % m) in corners, levels)
        for a, b in zip(br[:-1], br[1:]):
            t = a + (b - a) * 0.5 * (x + 1)
            zz = p.z(t)
            dz = p.dz(t)
            sp = np.abs(dz)
            zs.append(zz)
            ts.append(dz / sp)
            ws.append(sp * wq * 0.5 * (b - a))
            ss.append(j + t)
            pc.append(np.full(order, j))
            panels.append((j, a, b))
    return Discretization(np.concatenate(zs), np.concatenate(ts), np.concatenate(ws),
                          np.concatenate(ss), np.concatenate(pc), panels, False,
                          float(m), order)


def _same_circle_blocks(curve: JordanCurve, disc: Discretization) -> Optional[np.ndarray]:
    """Mask of node pairs on a common line or circle (where the kernel vanishes)."""
    if curve.periodic:
        return None
    flags = np.array([p.straight or p.circular for p in curve.pieces])
    if not np.any(flags):
        return None
    return flags[disc.piece]


def _ks_matrix(z, T, w, same_piece=None, piece=None):
    d = z[None, :] - z[:, None]           # z_j - z_i
    np.fill_diagonal(d, 1.0)
    c = 1.0 / (2j * math.pi)
    # A(z_i, z_j) = H(z_i, z_j) - conj(H(z_j, z_i)), H(a, z) = T(z) / (2 pi i (z - a))
    A = c * T[None, :] / d - np.conj(c * T[:, None] / (-d))
    np.fill_diagonal(A, 0.0)
    if same_piece is not None:
        mask = same_piece[:, None] & (piece[:, None] == piece[None, :])
        A[mask] = 0.0
    return np.eye(z.size) - A * w[None, :]


def _ks_solve(z, T, w, a, same_piece=None, piece=None, dense_limit: int = 5000):
    """Szego kernel S(., a) on the boundary: (I - A) S = conj(H(a, .)),
    A(z, w) = H(z, w) - conj(H(w, z)) with H(z, w) = T(w) / (2 pi i (w - z))."""
    rhs = np.conj(T / (2j * math.pi * (z - a)))
    n = z.size
    if n <= dense_limit:
        M = _ks_matrix(z, T, w, same_piece, piece)
        S = np.linalg.solve(M, rhs)
        res = np.linalg.norm(M @ S - rhs) / np.linalg.norm(rhs)
        return S, res
    c = 1.0 / (2j * math.pi)
    chunk = max(1, 4_000_000 // n)

    def mv(v):
        out = v.astype(complex).copy()
        wv = w * v
        for i0 in range(0, n, chunk):
            i1 = min(n, i0 + chunk)
            d = z[None, :] - z[i0:i1, None]
            idx = np.arange(i0, i1)
            d[idx - i0, idx] = 1.0
            A = c * T[None, :] / d - np.conj(c * T[i0:i1, None] / (-d))
            A[idx - i0, idx] = 0.0
            if same_piece is not None:
                mask = same_piece[i0:i1, None] & (piece[i0:i1, None] == piece[None, :])
                A[mask] = 0.0
            out[i0:i1] -= A @ wv
        return out

    op = LinearOperator((n, n), matvec=mv, dtype=complex)
    S, info = gmres(op, rhs, rtol=1e-14, atol=0.0, restart=200, maxiter=20)
    res = np.linalg.norm(mv(S) - rhs) / np.linalg.norm(rhs)
    if info != 0 and res > 1e-10:
        raise MapperError("iterative Szego solve did not converge", residual=res)
    return S, res


def _interp_panels(disc: Discretization, values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate nodal values at parameters s: trigonometric interpolation
    (periodic) or barycentric Lagrange on each Gauss panel."""
    s = np.asarray(s, dtype=float)
    if disc.periodic:
        n = values.size
        c = np.fft.fft(values) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            c[n // 2] *= 0.5
            c = np.concatenate([c, [c[n // 2]]])
            k = np.concatenate([k, [n // 2]])
        return (np.exp(2j * math.pi * np.outer(np.mod(s, 1.0), k)) @ c)
    x, _ = leggauss(disc.order)
    # barycentric weights for Gauss-Legendre nodes
    bw = np.array([1.0 / np.prod([x[i] - x[j] for j in range(x.size) if j != i]) for i in range(x.size)])
    starts = np.array([j + a for j, a, _ in disc.panels])
    ends = np.array([j + b for j, _, b in disc.panels])
    sm = np.mod(s, disc.period)
    pidx = np.clip(np.searchsorted(starts, sm, side="right") - 1, 0, len(disc.panels) - 1)
    out = np.empty(sm.shape, dtype=values.dtype)
    o = disc.order
    for p in np.unique(pidx):
        sel = pidx == p
        a, b = starts[p], ends[p]
        xx = 2 * (sm[sel] - a) / (b - a) - 1
        vals = values[p * o:(p + 1) * o]
        diff = xx[:, None] - x[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15)
        diff[exact] = 1.0
        q = bw[None, :] / diff
        r = (q @ vals) / q.sum(axis=1)
        hit = exact.any(axis=1)
        if np.any(hit):
            r[hit] = vals[np.argmax(exact[hit], axis=1)]
        out[sel] = r
    return out


def _upsampled_spline(values: np.ndarray, factor: int = 16):
    """Periodic cubic spline through the band-limited upsampling of
    equispaced samples on [0, 1)."""
    n = values.size
    c = np.fft.rfft(values)
    m = n * factor
    fine = np.fft.irfft(c, m) * factor
    t = np.arange(m + 1) / m
    return CubicSpline(t, np.concatenate([fine, fine[:1]]), bc_type="periodic")


@dataclass
class DiskMap:
    """Conformal map between the unit disk (interior side) or its exterior
    (exterior side) and the corresponding side of a Jordan curve.

    theta_nodes holds the unwrapped circle angle of the boundary point at
    each quadrature node; the table is strictly increasing in the boundary
    parameter.
    """
    side: str
    curve: JordanCurve
    base_point: complex
    disc: Discretization
    theta_nodes: np.ndarray
    speed_nodes: np.ndarray
    derivative_at_base: float
    residual: float
    normalization: dict
    _dual: Optional[Discretization] = None
    _spline: Optional[Callable] = None

    # boundary correspondence
    def theta_of_s(self, s):
        """Circle angle of the boundary point with parameter s (unwrapped)."""
        s = np.asarray(s, dtype=float)
        P = self.disc.period
        lin = self.theta_nodes - 2 * math.pi * self.disc.s / P
        k = np.floor(s / P)
        if self.disc.periodic:
            if self._spline is None:
                self._spline = _upsampled_spline(lin)
            base = self._spline(s - k * P)
        else:
            base = _interp_panels(self.disc, lin.astype(complex), s - k * P).real
        return base + 2 * math.pi * s / P

    def s_of_theta(self, theta):
        """Boundary parameter of the circle angle theta (inverse table)."""
        th = np.asarray(theta, dtype=float)
        P = self.disc.period
        t0 = self.theta_of_s(np.array([0.0]))[0]
        k = np.floor((th - t0) / (2 * math.pi))
        red = th - 2 * math.pi * k
        out = invert_monotone(self.theta_of_s, red.ravel(), (0.0, P), tol=1e-13)
        return np.asarray(out).reshape(th.shape) + k * P

    def boundary(self, theta):
        """phi(e^{i theta}) for the map from the circle onto the curve."""
        return self.curve.point(self.s_of_theta(theta))

    def boundary_angle(self, z_s):
        return self.theta_of_s(z_s)

    def inverse(self, z):
        """phi^{-1}(z) for points strictly on this map's side of the curve."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.side == "interior":
            d = self.disc
            f = np.exp(1j * self.theta_nodes)
            dz = d.tangent * d.weight
            K = dz[None, :] / (d.z[None, :] - z[:, None])
            return (K @ f) / K.sum(axis=1)
        d = self._dual
        w = 1.0 / (z - self.base_point)
        # inverted domain boundary values: g = 1/phi_plus^{-1} = exp(-i psi)
        f = np.exp(-1j * self.theta_nodes)
        dz = d.tangent * d.weight
        K = dz[None, :] / (d.z[None, :] - w[:, None])
        g = (K @ f) / K.sum(axis=1)
        return 1.0 / g

    def forward(self, zeta):
        """phi(zeta) for |zeta| < 1 (interior) or |zeta| > 1 (exterior)."""
        zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
        d = self.disc
        e = np.exp(1j * self.theta_nodes)
        dth = self.speed_nodes * d.weight
        if self.side == "interior":
            K = (e * dth)[None, :] / (e[None, :] - zeta[:, None])
            return (K @ d.z) / K.sum(axis=1)
        # exterior: work with the inverted domain and the reflected circle point
        u = 1.0 / zeta
        e2 = np.conj(e)
        K = (e2 * dth)[None, :] / (e2[None, :] - u[:, None])
        wvals = 1.0 / (d.z - self.base_point)
        return self.base_point + 1.0 / ((K @ wvals) / K.sum(axis=1))

    @property
    def capacity(self) -> float:
        """phi_plus'(infinity) for the exterior side."""
        if self.side != "exterior":
            raise ValueError("capacity is defined for the exterior map")
        return self.derivative_at_base


def _unwrap_increasing(th: np.ndarray, s: np.ndarray, period: float) -> np.ndarray:
    u = np.unwrap(th)
    if u[-1] < u[0]:
        raise MapperError("boundary correspondence is not increasing")
    # shift so that the table starts in [-pi, pi)
    return u


def interior_map(curve: JordanCurve, z0=None, nodes: int = 1024, tol: float = 1e-8,
                 max_doublings: int = 2, order: int = 16, levels: int = 20) -> DiskMap:
    """phi_minus: disk -> interior with phi(0) = z0 and phi'(0) > 0.

    The base resolution is doubled until the boundary table changes by less
    than tol (or max_doublings is reached; the last change is recorded).
    """
    z0 = curve.centroid() if z0 is None else complex(z0)
    if not curve.contains(z0)[0]:
        raise MapperError("base point is not inside the curve")
    prev = None
    n = nodes
    change = None
    for it in range(max_doublings + 1):
        m = _interior_once(curve, z0, n, order, levels)
        if prev is not None:
            probe = np.linspace(0.0, curve.period, 397, endpoint=False) + 1e-3
            change = float(np.max(np.abs(m.theta_of_s(probe) - prev.theta_of_s(probe))))
            m.normalization["self_convergence"] = change
            if change < tol:
                return m
        prev = m
        n *= 2
    return prev


def _interior_once(curve, z0, nodes, order, levels) -> DiskMap:
    d = discretize(curve, nodes, order, levels)
    same = _same_circle_blocks(curve, d)
    S, res = _ks_solve(d.z, d.tangent, d.weight, z0, same, d.piece)
    Saa = float(np.sum(np.abs(S) ** 2 * d.weight))
    f = -1j * d.tangent * S ** 2 / np.abs(S) ** 2
    th = np.unwrap(np.angle(f))
    speed = 2 * math.pi * np.abs(S) ** 2 / Saa
    if th[-1] < th[0]:
        raise MapperError("boundary correspondence is not increasing", residual=res)
    # f(z0) = 0 and f'(z0) = 2 pi S(z0, z0) > 0 by construction
    return DiskMap("interior", curve, z0, d, th, speed, 2 * math.pi * Saa, res,
                   {"side": "interior", "base_point": z0, "derivative_at_base": 2 * math.pi * Saa,
                    "nodes": d.z.size})


def _inverted(d: Discretization, z0) -> Discretization:
    u = d.z - z0
    w = 1.0 / u
    # dw = -dz/u^2; the inverted boundary is traversed clockwise, so flip the tangent
    t = d.tangent / u ** 2
    sp = np.abs(t)
    return Discretization(w, t / sp, d.weight * sp, d.s, d.piece, d.panels, d.periodic,
                          d.period, d.order)


def exterior_map(curve: JordanCurve, z0=None, nodes: int = 1024, tol: float = 1e-8,
                 max_doublings: int = 2, order: int = 16, levels: int = 20) -> DiskMap:
    """phi_plus: exterior of the disk -> exterior of the curve, phi(inf) = inf,
    phi'(inf) > 0.  z0 is an interior point used for the inversion only."""
    z0 = curve.centroid() if z0 is None else complex(z0)
    if not curve.contains(z0)[0]:
        raise MapperError("inversion center is not inside the curve")
    prev = None
    n = nodes
    for it in range(max_doublings + 1):
        m = _exterior_once(curve, z0, n, order, levels)
        if prev is not None:
            probe = np.linspace(0.0, curve.period, 397, endpoint=False) + 1e-3
            change = float(np.max(np.abs(m.theta_of_s(probe) - prev.theta_of_s(probe))))
            m.normalization["self_convergence"] = change
            if change < tol:
                return m
        prev = m
        n *= 2
    return prev


def _exterior_once(curve, z0, nodes, order, levels) -> DiskMap:
    d = discretize(curve, nodes, order, levels)
    dd = _inverted(d, z0)
    # segments and arcs stay on lines or circles under inversion
    same = _same_circle_blocks(curve, d)
    S, res = _ks_solve(dd.z, dd.tangent, dd.weight, 0.0, same, dd.piece)
    Saa = float(np.sum(np.abs(S) ** 2 * dd.weight))
    g = -1j * dd.tangent * S ** 2 / np.abs(S) ** 2
    psi = np.unwrap(-np.angle(g))
    if psi[-1] < psi[0]:
        raise MapperError("exterior correspondence is not increasing", residual=res)
    # d psi / d(arc length of the original curve)
    speed = 2 * math.pi * np.abs(S) ** 2 / Saa * (dd.weight / d.weight)
    cap = 2 * math.pi * Saa
    return DiskMap("exterior", curve, z0, d, psi, speed, cap, res,
                   {"side": "exterior", "inversion_center": z0, "capacity": cap,
                    "nodes": d.z.size}, dd)


# fingerprints

@dataclass
class Fingerprint:
    """Samples of an orientation-preserving circle homeomorphism theta -> psi.

    psi is unwrapped and strictly increasing over one period of theta;
    evaluator, when present, evaluates the homeomorphism at any angle.
    """
    theta: np.ndarray
    psi: np.ndarray
    normalization: dict
    evaluator: Optional[Callable] = None
    knots: Optional[np.ndarray] = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        if self.theta.size != self.psi.size or self.theta.size < 2:
            raise ValueError("theta and psi must be equal-length tables")

    def __call__(self, theta):
        if self.evaluator is not None:
            return self.evaluator(np.asarray(theta, dtype=float))
        return self.interpolate(theta)

    def interpolate(self, theta):
        th = np.asarray(theta, dtype=float)
        t0 = self.theta[0]
        k = np.floor((th - t0) / (2 * math.pi))
        red = th - 2 * math.pi * k
        tt = np.concatenate([self.theta, [self.theta[0] + 2 * math.pi]])
        pp = np.concatenate([self.psi, [self.psi[0] + 2 * math.pi]])
        return np.interp(red, tt, pp) + 2 * math.pi * k

    def is_homeomorphism(self) -> bool:
        return check_homeomorphism(self)[0]


def check_homeomorphism(fp: Fingerprint):
    """(ok, min step, wrap gap): strictly increasing with increment 2 pi."""
    th, ps = fp.theta, fp.psi
    dth = np.diff(th)
    dps = np.diff(ps)
    gap = ps[0] + 2 * math.pi - ps[-1]
    ok = bool(np.all(dth > 0) and np.all(dps > 0) and gap > 0
              and th[-1] - th[0] < 2 * math.pi)
    return ok, float(min(dps.min(), gap)), float(gap)


def fingerprint_from_maps(inner: DiskMap, outer: DiskMap, samples: int = 2048) -> Fingerprint:
    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)

    def ev(t):
        return outer.theta_of_s(inner.s_of_theta(t))

    psi = ev(theta)
    psi = np.unwrap(psi)
    # graded boundary nodes resolve the corner regions, where k varies fastest
    knots = np.mod(inner.theta_nodes, 2 * math.pi)
    return Fingerprint(theta, psi, {"base_point": inner.base_point,
                                    "convention": "phi_minus(0)=z0, phi_minus'(0)>0; "
                                                  "phi_plus(inf)=inf, phi_plus'(inf)>0"}, ev,
                       knots)


def fingerprint_oracle(curve: JordanCurve, z0=None, samples: int = 2048,
                       nodes: int = 1024, tol: float = 1e-8, **kw) -> Fingerprint:
    """k = phi_plus^{-1} o phi_minus from two independent Riemann map solves."""
    inner = interior_map(curve, z0, nodes=nodes, tol=tol, **kw)
    outer = exterior_map(curve, inner.base_point, nodes=nodes, tol=tol, **kw)
    fp = fingerprint_from_maps(inner, outer, samples)
    fp.normalization["self_convergence"] = max(inner.normalization.get("self_convergence", 0.0),
                                              outer.normalization.get("self_convergence", 0.0))
    fp.normalization["maps"] = (inner, outer)
    return fp


def disk_automorphism(a: complex, rotation: float):
    """M(zeta) = e^{i rotation} (zeta - a)/(1 - conj(a) zeta) on circle angles."""
    def M(theta):
        z = np.exp(1j * np.asarray(theta, dtype=float))
        return np.angle(np.exp(1j * rotation) * (z - a) / (1 - np.conj(a) * z))
    return M


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


class MobiusFit(dict):
    pass


def mobius_fit(target: Fingerprint, model: Fingerprint, samples: int = 512,
               start=(0j, 0.0), offset: float = 0.0) -> MobiusFit:
    """Fit model o M to target over disk automorphisms M.

    Returns a, rotation and the sup distance (radians, wrapped) at the
    samples theta_j = (j + offset) 2 pi / samples.  The model must be
    evaluable at arbitrary angles.
    """
    theta = (np.arange(samples) + offset) * (2 * math.pi / samples)
    tv = target(theta)

    def resid(p):
        a = p[0] + 1j * p[1]
        if abs(a) >= 0.999:
            return np.full(theta.size, 10.0)
        M = disk_automorphism(a, p[2])
        return _wrap(model(M(theta)) - tv)

    rots = [start[1]] + list(np.linspace(-math.pi, math.pi, 8, endpoint=False))
    starts = [np.array([start[0].real, start[0].imag, r0]) for r0 in rots]
    # refine only the most promising rotations
    starts.sort(key=lambda p0: float(np.sum(resid(p0) ** 2)))
    best = None
    for p0 in starts[:3]:
        sol = least_squares(resid, p0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
        if best is None or sol.cost < best.cost:
            best = sol
        if best.cost < 1e-20:
            break
    r = resid(best.x)
    return MobiusFit(a=best.x[0] + 1j * best.x[1], rotation=float(best.x[2]),
                     sup=float(np.max(np.abs(r))))


def fingerprint_distance(f1: Fingerprint, f2: Fingerprint, samples: int = 512) -> float:
    """sup |f1 - f2| over a uniform grid plus the knots of both fingerprints,
    differences wrapped to (-pi, pi]."""
    th = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    extra = [k for k in (f1.knots, f2.knots) if k is not None]
    if extra and f1.evaluator is not None and f2.evaluator is not None:
        th = np.concatenate([th] + extra)
    return float(np.max(np.abs(_wrap(f1(th) - f2(th)))))


# Rado surgery

def _crossings(piece: Piece, center: complex, eps: float, n: int = 400):
    t = np.linspace(0.0, 1.0, n + 1)
    g = np.abs(piece.z(t) - center) - eps
    out = []
    for i in range(n):
        if g[i] == 0:
            out.append(t[i])
        elif g[i] * g[i + 1] < 0:
            out.append(brentq(lambda x: abs(complex(piece.z(np.array([x]))[0]) - center) - eps,
                              t[i], t[i + 1], xtol=1e-15))
    return out


def corner_surgery(curve: JordanCurve, points: Sequence, eps: float) -> JordanCurve:
    """Replace, for each point a on the curve, the sub-arc inside |z - a| = eps
    by the arc of that circle lying inside the curve."""
    pts = [complex(p) for p in points]
    if not pts:
        return curve
    if curve.periodic:
        raise SurgeryError("surgery works on piecewise curves; convert smooth curves to pieces first")
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            if abs(p - q) <= 2 * eps:
                raise SurgeryError("eps must be below half the distance between surgery points")
    pieces = list(curve.pieces)
    m = len(pieces)
    # locate the point as a piece junction or inside a piece
    cuts = []
    for a in pts:
        loc = None
        for j, p in enumerate(pieces):
            if abs(complex(p.z(np.array([0.0]))[0]) - a) < 1e-9 * max(1, abs(a)):
                loc = (j, 0.0)
                break
        if loc is None:
            for j, p in enumerate(pieces):
                t = np.linspace(0, 1, 2001)
                dd = np.abs(p.z(t) - a)
                k = int(np.argmin(dd))
                if dd[k] < 1e-6:
                    loc = (j, float(t[k]))
                    break
        if loc is None:
            raise SurgeryError(f"point {a} is not on the curve")
        j, t0 = loc
        # exit crossing going forward, entry crossing going backward
        fwd = None
        for step in range(m):
            jj = (j + step) % m
            cs = [c for c in _crossings(pieces[jj], a, eps) if step > 0 or c > t0]
            if cs:
                fwd = (jj, min(cs), step)
                break
        bwd = None
        for step in range(m):
            jj = (j - 1 - step) % m if t0 == 0.0 else (j - step) % m
            cs = [c for c in _crossings(pieces[jj], a, eps)
                  if not (t0 > 0 and step == 0) or c < t0]
            if cs:
                bwd = (jj, max(cs), step)
                break
        if fwd is None or bwd is None:
            raise SurgeryError("the circle around the point does not cross the curve")
        cuts.append((a, bwd, fwd))
    # rebuild: walk the pieces, skipping removed parameter ranges
    removed = []
    for a, (jb, tb, _), (jf, tf, _) in cuts:
        removed.append((jb + tb, jf + tf if (jf + tf) > (jb + tb) else jf + tf + m, a))
    removed.sort()
    for i in range(len(removed) - 1):
        if removed[i][1] >= removed[i + 1][0]:
            raise SurgeryError("surgery arcs overlap; eps is too large")
    if removed and removed[-1][1] - m >= removed[0][0]:
        raise SurgeryError("surgery arcs overlap; eps is too large")
    new = []
    start = removed[-1][1] - m if removed[-1][1] > m else 0.0
    pos = removed[-1][1] % m if removed[-1][1] > m else 0.0
    segs = []
    cur = pos
    for lo, hi, a in removed:
        segs.append((cur, lo, None))
        segs.append((lo, hi, a))
        cur = hi
    if not (removed[-1][1] > m):
        segs.append((cur, float(m), None))
    for lo, hi, a in segs:
        if a is None:
            new.extend(_pieces_between(pieces, lo, hi))
        else:
            z_in = curve.point(np.array([lo]))[0]
            z_out = curve.point(np.array([hi]))[0]
            t_in = np.angle(z_in - a)
            t_out = np.angle(z_out - a)
            cands = []
            for sgn in (1, -1):
                d = (sgn * (t_out - t_in)) % (2 * math.pi)
                arc = Arc(a, eps, t_in, t_in + sgn * d)
                mid = complex(arc.z(np.array([0.5]))[0])
                cands.append((arc, bool(curve.contains(mid)[0])))
            inside = [c for c, ok in cands if ok]
            if len(inside) != 1:
                raise SurgeryError("cannot decide the interior side of the surgery arc")
            new.append(inside[0])
    out = JordanCurve(tuple(p for p in new if p is not None))
    if not out.is_simple():
        raise SurgeryError("surgered curve is not simple")
    return out


def _pieces_between(pieces, lo, hi):
    """Pieces covering global parameters [lo, hi] (hi may exceed the period)."""
    m = len(pieces)
    out = []
    x = lo
    while x < hi - 1e-14:
        j = int(math.floor(x + 1e-14)) % m
        base = math.floor(x + 1e-14)
        t0 = x - base
        t1 = min(1.0, hi - base)
        if t1 - t0 > 1e-14:
            p = pieces[j]
            out.append(p if (t0 == 0.0 and t1 == 1.0) else p.sub(t0, t1))
        x = base + 1.0
    return out


@dataclass
class RadoReport:
    fingerprints: list
    eps: list
    gaps: list

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.gaps[:-1], self.gaps[1:]))

    @property
    def final_gap(self) -> float:
        return self.gaps[-1]


def rado_sequence(curve: JordanCurve, points: Sequence, eps_schedule: Sequence[float],
                  z0=None, samples: int = 2048, gap_samples: int = 8192, **kw) -> RadoReport:
    """Fingerprints of the surgered curves for a decreasing eps schedule, all
    with the same interior base point, and sup gaps between neighbours."""
    eps = [float(e) for e in eps_schedule]
    if any(b >= a for a, b in zip(eps[:-1], eps[1:])) or eps[-1] <= 0:
        raise ValueError("eps schedule must decrease to a positive final value")
    z0 = curve.centroid() if z0 is None else complex(z0)
    fps = []
    for e in eps:
        c = corner_surgery(curve, points, e)
        fps.append(fingerprint_oracle(c, z0, samples=samples, **kw))
    gaps = [fingerprint_distance(a, b, gap_samples) for a, b in zip(fps[:-1], fps[1:])]
    return RadoReport(fps, eps, gaps)
