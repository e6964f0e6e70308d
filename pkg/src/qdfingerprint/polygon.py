"""Cartesian and polar (gearlike) polygons: Schwarz-Christoffel prevertices,
their quadratic differentials, coordination residuals and fingerprints.

Integrands are boundary values of analytic branches.  For a prevertex
z_j = e^{i b_j} and a circle point e^{i t},

    log(1 - e^{i x}) = log(2 sin(x/2)) + i (x/2 - pi/2),   x = (t - b_j) mod 2 pi,

is the principal branch, so products of such factors raised to real powers
need no branch bookkeeping along the circle.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import least_squares

from .quaddiff import QuadDifferential, is_circle_symmetric
from .riemannmap import Arc, Fingerprint, JordanCurve, Segment
from .welding import (CoordinationError, WeldingResult, check_coordinated, choose_representatives,
                      qd_welding_functions, welding_fingerprint)

TWO_PI = 2 * math.pi
_GX, _GW = leggauss(24)
_UPANELS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])


class PolygonError(ValueError):
    pass


class ParameterProblemError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(ValueError):
    pass


class ConstraintError(ValueError):
    pass


def _turn_alphas(w: np.ndarray) -> np.ndarray:
    """Interior angles (units of pi) of a rectilinear closed polyline given
    counterclockwise; left turns are convex corners."""
    d = np.roll(w, -1) - w
    prev = np.roll(d, 1)
    turn = np.angle(d / prev)
    if np.any(np.abs(np.abs(turn) - math.pi / 2) > 1e-9):
        raise PolygonError("consecutive sides must be perpendicular")
    return np.where(turn > 0, 0.5, 1.5)


class CartesianPolygon:
    """Counterclockwise polygon with alternating horizontal and vertical
    sides, the first side [v1, v2] horizontal."""

    kind = "cartesian"

    def __init__(self, vertices: Sequence[complex]):
        v = np.asarray([complex(x) for x in vertices])
        if v.size < 4 or v.size % 2:
            raise PolygonError("need an even number (>= 4) of vertices")
        d = np.roll(v, -1) - v
        if np.any(np.abs(d) == 0):
            raise PolygonError("repeated vertex")
        horiz = np.abs(d.imag) <= 1e-12 * np.abs(d)
        vert = np.abs(d.real) <= 1e-12 * np.abs(d)
        if not (np.all(horiz[0::2]) and np.all(vert[1::2])):
            raise PolygonError("sides must alternate horizontal / vertical, starting horizontal")
        self.vertices = v
        self.alphas = _turn_alphas(v)
        self.n = v.size // 2
        if int(np.sum(self.alphas == 0.5)) != self.n + 2 or int(np.sum(self.alphas == 1.5)) != self.n - 2:
            raise PolygonError("angle count must be n+2 right angles and n-2 reflex ones "
                               "(is the polygon counterclockwise?)")
        self.curve = JordanCurve.polygon(v)
        if not self.curve.is_simple():
            raise PolygonError("polygon is not simple")

    @classmethod
    def rectangle(cls, width: float, height: float, corner: complex = 0j):
        c = complex(corner)
        return cls([c, c + width, c + width + 1j * height, c + 1j * height])

    @classmethod
    def centered_rectangle(cls, width: float, height: float):
        return cls.rectangle(width, height, complex(-width / 2, -height / 2))

    @classmethod
    def l_shape(cls, a: float = 2.0, b: float = 1.0):
        """a x a square with the upper right b x b square removed."""
        return cls([0, a, a + 1j * (a - b), (a - b) + 1j * (a - b), (a - b) + 1j * a, 1j * a])

    @property
    def side_vectors(self) -> np.ndarray:
        return np.roll(self.vertices, -1) - self.vertices

    @property
    def targets(self) -> np.ndarray:
        return self.side_vectors


class PolarPolygon:
    """Polar polygon in polar coordinates: vertex k is r_k e^{i t_k} with t
    unwrapped, so a circular side may turn either way.  Sides alternate
    circular and radial, the first side [v1, v2] circular; the origin is
    inside."""

    kind = "polar"

    def __init__(self, radii: Sequence[float], angles: Sequence[float]):
        r = np.asarray(radii, dtype=float)
        t = np.asarray(angles, dtype=float)
        if r.size != t.size or r.size < 4 or r.size % 2:
            raise PolygonError("need an even number (>= 4) of vertices")
        if np.any(r <= 0):
            raise PolygonError("radii must be positive")
        t = t - t[0]
        w = np.log(r) + 1j * t
        d = np.roll(w, -1) - w
        d[-1] += TWO_PI * 1j
        if abs(np.sum(d) - TWO_PI * 1j) > 1e-9:
            raise PolygonError("the curve must wind once around the origin")
        circ = np.abs(d.real) <= 1e-12 * np.abs(d)
        rad = np.abs(d.imag) <= 1e-12 * np.abs(d)
        if not (np.all(circ[0::2]) and np.all(rad[1::2])) or np.any(np.abs(d) == 0):
            raise PolygonError("sides must alternate circular / radial, starting circular")
        self.radii, self.angles = r, t
        self.log_vertices = w
        self._steps = d
        self.alphas = self._alphas_from_steps(d)
        self.n = r.size // 2
        if int(np.sum(self.alphas == 0.5)) != self.n or int(np.sum(self.alphas == 1.5)) != self.n:
            raise PolygonError("a polar polygon has equally many right and reflex corners")
        self.vertices = r * np.exp(1j * t)
        pieces = []
        for k in range(r.size):
            k1 = (k + 1) % r.size
            if k % 2 == 0:
                pieces.append(Arc(0j, float(r[k]), float(t[k]), float(t[k] + d[k].imag)))
            else:
                pieces.append(Segment(self.vertices[k], self.vertices[k1]))
        self.curve = JordanCurve(tuple(pieces))
        if not self.curve.is_simple():
            raise PolygonError("polygon is not simple")

    @staticmethod
    def _alphas_from_steps(d):
        prev = np.roll(d, 1)
        turn = np.angle(d / prev)
        if np.any(np.abs(np.abs(turn) - math.pi / 2) > 1e-9):
            raise PolygonError("consecutive sides must be perpendicular")
        return np.where(turn > 0, 0.5, 1.5)

    @classmethod
    def gear(cls, teeth: int, r_in: float, r_out: float, duty: float = 0.5):
        """Rotationally symmetric gear; each tooth spans duty of its sector."""
        rs, ts = [], []
        sector = TWO_PI / teeth
        for j in range(teeth):
            t0 = j * sector
            rs += [r_out, r_out, r_in, r_in]
            ts += [t0, t0 + duty * sector, t0 + duty * sector, t0 + sector]
        return cls(rs, ts)

    @property
    def targets(self) -> np.ndarray:
        # side increments of log(phi)
        return self._steps


@dataclass
class Prevertices:
    beta: np.ndarray
    side: str
    kind: str
    alphas: np.ndarray
    scale: complex                 # SC constant: A (Cartesian) or c (polar)
    gamma: float = 0.0
    C: float = 1.0
    center: Optional[complex] = None
    residual: float = 0.0
    info: dict = field(default_factory=dict)


# boundary integrals

def _log_one_minus(x):
    """Principal log(1 - e^{ix}) for real x."""
    x = np.mod(x, TWO_PI)
    return np.log(2 * np.sin(0.5 * x)) + 1j * (0.5 * x - 0.5 * math.pi)


def _log_factor(theta, beta, expo, side):
    """log of prod_j (1 - e^{i(theta - b_j)})^{e_j} (interior) or
    prod_j (1 - e^{i(b_j - theta)})^{e_j} (exterior)."""
    th = np.asarray(theta, dtype=float)[..., None]
    x = th - beta if side == "interior" else beta - th
    return np.sum(expo * _log_one_minus(x), axis=-1)


def _expo(alphas, side):
    return alphas - 1.0 if side == "interior" else 1.0 - alphas


def _arc_nodes(a, b):
    """Nodes/weights for an arc with algebraic endpoint behaviour at both
    ends: split at the midpoint, t = end -+ h u^2 on each half."""
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    h = 0.5 * (b - a)
    lo, hi = _UPANELS[:-1], _UPANELS[1:]
    u = (0.5 * (hi - lo)[:, None] * (_GX[None, :] + 1) + lo[:, None]).ravel()
    wu = (0.5 * (hi - lo)[:, None] * _GW[None, :]).ravel()
    left = a + h * u ** 2
    right = b - h * u ** 2
    jac = 2 * h * u * wu
    return np.concatenate([left, right], axis=1), np.concatenate([jac, jac], axis=1)


def side_integrals(beta, alphas, side: str, kind: str) -> np.ndarray:
    """Boundary increments of the SC map over arcs [b_k, b_{k+1}] with unit
    constant: Cartesian sides of phi, polar sides of log phi."""
    beta = np.asarray(beta, dtype=float)
    ends = np.concatenate([beta[1:], [beta[0] + TWO_PI]])
    th, wt = _arc_nodes(beta, ends)
    lf = _log_factor(th, beta, _expo(np.asarray(alphas), side), side)
    f = np.exp(lf) * 1j
    if kind == "cartesian":
        f = f * np.exp(1j * th)
    return np.sum(f * wt, axis=1)


def _radial_integral(beta, alphas, side, kind, j: int = 0) -> complex:
    """Cartesian interior: int_0^{z_j} f(t) dt along the ray.
    Polar interior: int_0^{z_j} (g(t) - 1)/t dt.  Polar exterior:
    int_inf^{z_j} (h(t) - 1)/t dt along the ray."""
    beta = np.asarray(beta, dtype=float)
    alphas = np.asarray(alphas)
    e = _expo(alphas, side)
    zj = cmath.exp(1j * beta[j])
    zk = np.exp(1j * beta)
    # s in [0, 1]; the singular end s = 1 gets s = 1 - h u^2
    lo, hi = _UPANELS[:-1], _UPANELS[1:]
    u = (0.5 * (hi - lo)[:, None] * (_GX[None, :] + 1) + lo[:, None]).ravel()
    wu = (0.5 * (hi - lo)[:, None] * _GW[None, :]).ravel()
    s1 = 0.5 * u
    w1 = 0.5 * wu
    s2 = 1 - 0.5 * u ** 2
    w2 = u * wu
    s = np.concatenate([s1, s2])
    w = np.concatenate([w1, w2])
    if side == "interior":
        t = s * zj
        fac = 1 - t[:, None] / zk[None, :]
    else:
        t = zj / np.where(s == 0, 1e-300, s)
        fac = 1 - s[:, None] * zk[None, :] / zj
    # principal powers are the analytic branch here: every factor has positive real part
    val = np.exp(np.sum(e[None, :] * np.log(fac), axis=1))
    if kind == "cartesian":
        if side != "interior":
            raise ValueError("no radial integral for the Cartesian exterior")
        return complex(np.sum(val * zj * w))
    # (F - 1)/t dt, with dt/t = ds/s on the ray
    g = (val - 1) / s
    g = np.where(s == 0, 0.0, g)
    sign = 1.0 if side == "interior" else -1.0
    return complex(sign * np.sum(g * w))


def _betas_from_params(x):
    z = np.concatenate([x, [0.0]])
    z = z - z.max()
    d = np.exp(z)
    d = TWO_PI * d / d.sum()
    return np.concatenate([[0.0], np.cumsum(d[:-1])])


def _params_from_spacing(d):
    d = np.asarray(d, dtype=float)
    return np.log(d[:-1] / d[-1])


def _solve(poly, side: str, center=None, tol: float = 1e-8, x0=None) -> Prevertices:
    targets = poly.targets
    alphas = poly.alphas
    kind = poly.kind
    scale_len = float(np.sum(np.abs(targets)))
    if kind == "cartesian" and side == "interior" and center is None:
        center = poly.curve.centroid()
    v1 = poly.vertices[0]

    def resid(x):
        beta = _betas_from_params(x)
        I = side_integrals(beta, alphas, side, kind)
        if kind == "cartesian":
            A = targets[0] / I[0]
            r = (A * I[1:] - targets[1:]) / scale_len
            out = [r.real, r.imag]
            if side == "interior":
                c = v1 - A * _radial_integral(beta, alphas, side, kind)
                out += [np.array([(c - center).real, (c - center).imag]) / scale_len]
        else:
            r = (I - targets) / scale_len
            out = [r.real, r.imag]
        return np.concatenate(out)

    if x0 is None:
        lens = np.abs(targets)
        x0 = _params_from_spacing(lens / lens.sum())
    best = None
    for attempt in range(3):
        start = x0 if attempt == 0 else _params_from_spacing(np.full(alphas.size, 1.0)) + 0.3 * (attempt - 1)
        try:
            sol = least_squares(resid, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=4000)
        except ValueError:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
        if np.max(np.abs(sol.fun)) < 1e-12:
            break
    if best is None:
        raise ParameterProblemError("prevertex solver failed to start")
    # LM's forward-difference Jacobian stalls near 1e-9; central differences finish the job
    try:
        pol = least_squares(resid, best.x, method="trf", jac="3-point", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=200)
        if pol.cost < best.cost:
            best = pol
    except ValueError:
        pass
    beta = _betas_from_params(best.x)
    I = side_integrals(beta, alphas, side, kind)
    res = float(np.max(np.abs(best.fun)))
    lens = np.abs(targets)
    ratio_res = float(np.max(np.abs(np.abs(I) / abs(I[0]) - lens / lens[0])))
    if max(res, ratio_res) > tol:
        raise ParameterProblemError(f"prevertex solve did not converge (residual {max(res, ratio_res):.3e})",
                                    max(res, ratio_res))
    if kind == "cartesian":
        A = complex(targets[0] / I[0])
        pre = Prevertices(beta, side, kind, alphas, A, center=center, residual=max(res, ratio_res))
        _cartesian_constants(pre, poly)
    else:
        # phi(1) = v1 fixes the remaining constant of log phi
        c = v1 * cmath.exp(-_radial_integral(beta, alphas, side, kind))
        pre = Prevertices(beta, side, kind, alphas, complex(c), center=0j if side == "interior" else None,
                          residual=res)
        _polar_constants(pre)
    pre.info["params"] = best.x
    return pre


def solve_prevertices_interior(poly, center=None, tol: float = 1e-8) -> Prevertices:
    """Prevertices of the interior SC map with b_1 = 0; a Cartesian polygon
    also fixes phi(0) = center (default: the polygon's centroid), a polar
    one has phi(0) = 0."""
    return _solve(poly, "interior", center, tol)


def solve_prevertices_exterior(poly, tol: float = 1e-8) -> Prevertices:
    """Prevertices of the exterior SC map (infinity to infinity), b_1 = 0."""
    return _solve(poly, "exterior", None, tol)


def _paper_integral(pre: Prevertices, k: int = 0) -> complex:
    """Squared-branch-free pieces of the constant formulas: the integral of
    prod (e^{it} - e^{ib_j})^{+-(a_j - 1)} e^{+-it} over arc k, up to sign."""
    I = side_integrals(pre.beta, pre.alphas, pre.side, pre.kind)[k] / 1j
    zk = np.exp(1j * pre.beta)
    e = _expo(pre.alphas, pre.side)
    if pre.side == "interior":
        # prod (z - z_j)^{e_j} = prod (-z_j)^{e_j} prod (1 - z/z_j)^{e_j}
        P = np.exp(np.sum(e * np.log(-zk)))
        return complex(P * I)
    # prod (z - z_j)^{e_j} = z^{sum e} prod (1 - z_j/z)^{e_j}; the extra e^{-it} (Cartesian)
    # and z^{sum e} = z^2 combine into the e^{it} already present
    return complex(I)


def _cartesian_constants(pre: Prevertices, poly):
    L2 = abs(poly.vertices[1] - poly.vertices[0]) ** 2
    if pre.side == "interior":
        gamma = float(np.sum((1 - pre.alphas) * pre.beta))
    else:
        gamma = float(np.sum((pre.alphas - 1) * pre.beta))
    Ip = _paper_integral(pre)
    Cc = -cmath.exp(-1j * gamma) * L2 / Ip ** 2
    pre.gamma = gamma
    pre.info["C_complex"] = Cc
    if abs(Cc.imag) > 1e-8 * abs(Cc) or Cc.real <= 0:
        raise ConsistencyError(f"constant formula gives a non-positive C ({Cc})")
    pre.C = float(Cc.real)


def _polar_constants(pre: Prevertices):
    if pre.side == "interior":
        s = float(np.sum((1 - pre.alphas) * pre.beta))
        pre.gamma = 2 * s
    else:
        s = float(np.sum((pre.alphas - 1) * pre.beta))
        pre.gamma = 0.0
    pre.C = 1.0
    pre.info["angle_sum"] = s
    pre.info["angle_sum_defect"] = float(abs(math.remainder(s - math.pi, TWO_PI)))


def zero_pole_angle_sums(pre: Prevertices):
    """Sum of prevertex angles at zeros of Q minus the sum at poles."""
    order = 2 * _expo(pre.alphas, pre.side)
    return float(np.sum(pre.beta[order > 0]) - np.sum(pre.beta[order < 0]))


def cartesian_qds(poly, pre_minus: Prevertices, pre_plus: Prevertices):
    """Q_- = C_- e^{i gamma_-} prod (z - z_k)^{2(a_k - 1)},
    Q_+ = C_+ e^{i gamma_+} z^{-4} prod (z - z_k)^{2(1 - a_k)}."""
    zm = np.exp(1j * pre_minus.beta)
    zp = np.exp(1j * pre_plus.beta)
    am = pre_minus.alphas
    Qm = QuadDifferential.from_finite(pre_minus.C * cmath.exp(1j * pre_minus.gamma),
                                      [(complex(z), int(round(2 * (a - 1)))) for z, a in zip(zm, am)])
    Qp = QuadDifferential.from_finite(pre_plus.C * cmath.exp(1j * pre_plus.gamma),
                                      [(complex(z), int(round(2 * (1 - a)))) for z, a in zip(zp, am)]
                                      + [(0j, -4)])
    for Q in (Qm, Qp):
        if not is_circle_symmetric(Q, tol=1e-8):
            raise ConsistencyError("differential is not real on the circle")
    return Qm, Qp


def polar_qds(poly, pre_minus: Prevertices, pre_plus: Prevertices, tol: float = 1e-8):
    """Q_- = -z^{-2} prod (z - z_k)^{2(a_k - 1)}, Q_+ = -z^{-2} prod (z - z_k)^{2(1 - a_k)}
    once both angle-sum constraints hold."""
    for pre in (pre_minus, pre_plus):
        if pre.info["angle_sum_defect"] > tol:
            raise ConstraintError(f"{pre.side} prevertices violate the angle-sum constraint "
                                  f"(defect {pre.info['angle_sum_defect']:.3e})")
    am = pre_minus.alphas
    zm = np.exp(1j * pre_minus.beta)
    zp = np.exp(1j * pre_plus.beta)
    Qm = QuadDifferential.from_finite(-cmath.exp(1j * pre_minus.gamma),
                                      [(complex(z), int(round(2 * (a - 1)))) for z, a in zip(zm, am)]
                                      + [(0j, -2)])
    Qp = QuadDifferential.from_finite(-1.0, [(complex(z), int(round(2 * (1 - a)))) for z, a in zip(zp, am)]
                                      + [(0j, -2)])
    for Q in (Qm, Qp):
        if not is_circle_symmetric(Q, tol=1e-8):
            raise ConsistencyError("differential is not real on the circle")
    return Qm, Qp


@dataclass
class CoordinationResiduals:
    residuals: np.ndarray
    ratios: np.ndarray
    target: complex
    coordinated: bool


def coordination_residual(pre_minus: Prevertices, pre_plus: Prevertices,
                          tol: float = 1e-6) -> CoordinationResiduals:
    """|ratio_k - target| per arc, ratio_k = (exterior SC arc integral) /
    (interior SC arc integral).  Target: C e^{i gamma}, C = sqrt(C_-/C_+),
    gamma = (gamma_- - gamma_+)/2 (Cartesian) or 1 (polar).  The radicals
    fix the ratio only up to one global sign, chosen once for all arcs."""
    Im = np.array([_paper_integral(pre_minus, k) for k in range(pre_minus.beta.size)])
    Ip = np.array([_paper_integral(pre_plus, k) for k in range(pre_plus.beta.size)])
    ratios = Ip / Im
    if pre_minus.kind == "cartesian":
        target = math.sqrt(pre_minus.C / pre_plus.C) * cmath.exp(0.5j * (pre_minus.gamma - pre_plus.gamma))
    else:
        target = 1.0 + 0j
    sign = 1.0 if np.sum(np.abs(ratios - target)) <= np.sum(np.abs(ratios + target)) else -1.0
    res = np.abs(ratios - sign * target)
    return CoordinationResiduals(res, ratios, sign * target, bool(np.all(res < tol)))


@dataclass
class PolygonFingerprint:
    result: WeldingResult
    pre_minus: Prevertices
    pre_plus: Prevertices
    Q_minus: QuadDifferential
    Q_plus: QuadDifferential
    coordination: CoordinationResiduals

    @property
    def fingerprint(self) -> Fingerprint:
        return self.result.fingerprint

    def oracle_convention(self) -> Fingerprint:
        """The same homeomorphism for maps normalized by phi_-'(center) > 0
        and phi_+'(inf) > 0 (rotations on both sides)."""
        a = np.angle(self.pre_minus.scale)
        b = np.angle(self.pre_plus.scale)
        k = self.result.fingerprint

        def ev(t):
            return k(np.asarray(t, dtype=float) - a) + b

        th = np.linspace(0.0, TWO_PI, k.theta.size, endpoint=False)
        knots = np.mod(self.pre_minus.beta + a, TWO_PI)
        return Fingerprint(th, ev(th), {"base_point": self.pre_minus.center, "route": "polygon"}, ev, knots)


def polygon_fingerprint(poly, center=None, tol: float = 1e-6) -> PolygonFingerprint:
    """Welding of the polygon's two SC differentials from the first vertex;
    prevertex k of the interior side goes to prevertex k of the exterior."""
    pm = solve_prevertices_interior(poly, center)
    pp = solve_prevertices_exterior(poly)
    if poly.kind == "cartesian":
        Qm, Qp = cartesian_qds(poly, pm, pp)
    else:
        Qm, Qp = polar_qds(poly, pm, pp)
    coord = coordination_residual(pm, pp, tol)
    if not coord.coordinated:
        raise CoordinationError(f"polygon differentials are not coordinated "
                                f"(max residual {coord.residuals.max():.3e})")
    rep = check_coordinated(Qm, Qp, shift=0)
    if not rep.ok:
        raise CoordinationError(rep.message)
    # arc by arc from the prevertices, so vertex k goes exactly to vertex k
    result = welding_fingerprint(choose_representatives(rep.pair))
    fp = result.fingerprint
    # second route: the single-equation form A(k) = B from the first vertex
    wf = qd_welding_functions(Qm, Qp, 0.0, 0.0)
    th = np.linspace(0.0, TWO_PI, 512, endpoint=False)
    fp.normalization.update({"route": "polygon", "prevertices_minus": pm.beta,
                             "prevertices_plus": pp.beta,
                             "single_equation_gap": float(np.max(np.abs(wf.fingerprint(th) - fp(th))))})
    fp.knots = np.mod(pm.beta, TWO_PI)
    result.tables = list(coord.residuals)
    return PolygonFingerprint(result, pm, pp, Qm, Qp, coord)


@dataclass
class PropositionReport:
    holds: bool
    residuals: np.ndarray
    C: float
    gamma: float
    simple: bool
    reason: str = ""


def _segments_cross(p):
    n = p.size
    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            c, d = p[j], p[(j + 1) % n]
            d1 = ((b - a).conjugate() * (c - a)).imag
            d2 = ((b - a).conjugate() * (d - a)).imag
            d3 = ((d - c).conjugate() * (a - c)).imag
            d4 = ((d - c).conjugate() * (b - c)).imag
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


def sc_image_vertices(beta, alphas) -> np.ndarray:
    """Vertices of F(z) = int_0^z prod (t - z_k)^{a_k - 1} dt up to a rotation."""
    I = side_integrals(beta, alphas, "interior", "cartesian")
    v0 = _radial_integral(beta, alphas, "interior", "cartesian", 0)
    return v0 + np.concatenate([[0j], np.cumsum(I[:-1])])


def proposition_check(beta_minus, alphas, beta_plus, tol: float = 1e-6) -> PropositionReport:
    """Is there C > 0 and real gamma such that the side-integral ratios match on
    every arc?  C and gamma are fitted on the first arc and the others are
    checked; the SC image polyline is tested for self-intersection."""
    alphas = np.asarray(alphas, dtype=float)
    bm = np.asarray(beta_minus, dtype=float)
    bp = np.asarray(beta_plus, dtype=float)
    n = alphas.size
    if abs(alphas.sum() - (n - 2)) > 1e-10:
        return PropositionReport(False, np.full(n, np.inf), math.nan, math.nan, False,
                                 "angle sum is not n - 2")
    if np.any(np.diff(bm) <= 0) or np.any(np.diff(bp) <= 0) or bm[-1] >= bm[0] + TWO_PI \
            or bp[-1] >= bp[0] + TWO_PI:
        return PropositionReport(False, np.full(n, np.inf), math.nan, math.nan, False,
                                 "prevertices are not strictly ordered")
    pm = Prevertices(bm, "interior", "cartesian", alphas, 1.0)
    pp = Prevertices(bp, "exterior", "cartesian", alphas, 1.0)
    Im = np.array([_paper_integral(pm, k) for k in range(n)])
    Ip = np.array([_paper_integral(pp, k) for k in range(n)])
    ratios = Ip / Im
    fit = ratios[0]
    res = np.abs(ratios - fit)
    verts = sc_image_vertices(bm, alphas)
    simple = not _segments_cross(verts)
    holds = bool(np.all(res < tol * max(1.0, abs(fit))))
    reason = "" if holds else "ratio conditions fail on some arc"
    return PropositionReport(holds, res, float(abs(fit)), float(np.angle(fit)), simple, reason)
