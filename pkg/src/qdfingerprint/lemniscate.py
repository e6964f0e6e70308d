"""Lemniscates |R| = c of rational maps and their fingerprints through
Blaschke equations.

A component of a regular level set is traced by continuation in the phase
of R (R(z) = c e^{i phi}), which is the flat coordinate of the quadratic
differential -(R'/R)^2/(4 pi^2) dz^2 along that trajectory.  The traced
table also provides an analytic parametrization for the Riemann-map
solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .blaschke import BlaschkeProduct, RationalMap, log_derivative_qd
from .quaddiff import QuadDifferential
from .riemannmap import (Fingerprint, JordanCurve, MapperError, exterior_map,
                         interior_map)


class HypothesisError(ValueError):
    pass


class NotLogDerivativeError(ValueError):
    pass


class TracingError(RuntimeError):
    pass


@dataclass
class LemniscateReport:
    level: float
    components: list
    polylines: list
    critical_values: list        # (critical point, |R| there, distance to the level)
    connected: bool
    analytic: bool
    winding: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.analytic and self.connected and len(self.components) == 1

    @property
    def curve(self) -> JordanCurve:
        if not self.valid:
            raise HypothesisError("lemniscate is not a single analytic Jordan curve")
        return self.components[0]


def critical_points(R: RationalMap) -> list:
    """Finite critical points of R off its poles (multiple zeros included)."""
    Q = log_derivative_qd(R)
    pts = [c for c, m in Q.finite if m > 0]
    pts += [a for a, p in R.zeros if p > 1]
    return pts


def _newton_level(R: RationalMap, z, target, iters: int = 8):
    for _ in range(iters):
        f = R(z)
        d = R.derivative(z) if np.ndim(z) == 0 else np.asarray(R(z) * R.log_derivative(z))
        z = z - (f - target) / d
    return z


def _seed(R: RationalMap, start: complex, c: float, direction: complex, rising: bool) -> complex:
    """First crossing of |R| = c along a ray leaving a zero (rising) or a pole."""
    scale = 1.0 + max([abs(a) for a, _ in R.zeros + R.poles] + [0.0])
    r = 1e-6 * scale
    prev = 0.0
    while r < 1e4 * scale:
        v = abs(R(start + r * direction))
        if (v > c) == rising:
            lo, hi = prev, r
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if (abs(R(start + mid * direction)) > c) == rising:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-15 * scale:
                    break
            return start + 0.5 * (lo + hi) * direction
        prev = r
        r *= 1.05
    raise TracingError("no level crossing along the seed ray")


def _trace_phase(R: RationalMap, seed: complex, c: float, max_steps: int = 200000):
    """Follow R(z) = c e^{i phi} with phi increasing until the start recurs."""
    phi0 = float(np.angle(R(seed)))
    z = _newton_level(R, seed, c * np.exp(1j * phi0))
    scale = 1.0 + abs(z)
    pts, phis = [z], [phi0]
    phi = phi0
    h = 0.02
    for _ in range(max_steps):
        lr = complex(R.log_derivative(z))
        # dz/dphi = i R / R'
        v = 1j / lr
        h_eff = min(h, 0.02 * scale / max(abs(v), 1e-300))
        turns = math.floor((phi - phi0) / (2 * math.pi) + 1e-12)
        next_turn = phi0 + 2 * math.pi * (turns + 1)
        land = phi + h_eff >= next_turn - 1e-14
        if land:
            h_eff = next_turn - phi
        zn = z + v * h_eff
        target = c * np.exp(1j * (phi + h_eff))
        ok = False
        for it in range(12):
            f = complex(R(zn))
            d = f * complex(R.log_derivative(zn))
            dz = (f - target) / d
            zn -= dz
            if abs(dz) < 1e-14 * scale:
                ok = True
                break
        if not ok or abs(zn - z) > 0.1 * scale:
            h *= 0.5
            if h < 1e-12:
                raise TracingError("phase continuation stalled (critical point on the level?)")
            continue
        z = zn
        phi = phi + h_eff
        pts.append(z)
        phis.append(phi)
        h = min(0.05, h * 1.3)
        if land and abs(z - seed) < 1e-9 * scale:
            pts[-1] = pts[0]
            return np.array(pts), np.array(phis), turns + 1
    raise TracingError("phase continuation did not close")


def _phase_curve(R: RationalMap, pts, phis, turns: int, c: float) -> JordanCurve:
    """Analytic parametrization t -> z with arg R = phi0 + 2 pi turns t."""
    phi0 = phis[0]
    span = 2 * math.pi * turns
    t_tab = (phis - phi0) / span
    guess = CubicSpline(t_tab, pts, bc_type="periodic")
    sign = 1.0

    def f(t):
        t = np.mod(sign * np.asarray(t, dtype=float), 1.0)
        z = guess(t)
        target = c * np.exp(1j * (phi0 + span * t))
        for _ in range(4):
            fz = R(z)
            z = z - (fz - target) / (fz * R.log_derivative(z))
        return z

    def df(t):
        z = f(t)
        return sign * span * 1j / R.log_derivative(z)

    area = 0.5 * np.sum((np.conj(pts[:-1]) * np.diff(pts)).imag)
    if area < 0:
        sign = -1.0
    curve = JordanCurve.smooth(f, df)

    def same_phase_points(z):
        # the points of this component where arg R equals arg R(z)
        t = (np.angle(R(z)) - phi0) / span
        tj = np.mod(t + np.arange(turns) / turns, 1.0)
        return f(sign * tj)

    return curve, same_phase_points


def trace_level_set(R: RationalMap, c: float, crit_tol: float = 1e-8,
                    trace_tol: float = 1e-9) -> LemniscateReport:
    """Components of |R| = c seeded from every zero and finite pole of R."""
    if not (0 < c < math.inf):
        raise ValueError("level must be positive and finite")
    crit = []
    for p in critical_points(R):
        v = abs(R(p))
        crit.append((p, v, abs(v - c)))
    scale = max(1.0, c)
    analytic = all(d > crit_tol * scale for _, _, d in crit)
    if not analytic:
        return LemniscateReport(c, [], [], crit, False, False)
    pts_all = [a for a, _ in R.zeros] + [b for b, _ in R.poles]
    cen = np.mean(pts_all) if pts_all else 0j
    comps, polys, winds, members = [], [], [], []
    seeds = [(a, True) for a, _ in R.zeros] + [(b, False) for b, _ in R.poles]
    for start, rising in seeds:
        dvec = start - cen
        direction = dvec / abs(dvec) if abs(dvec) > 1e-12 else 1.0 + 0j
        try:
            s = _seed(R, start, c, direction, rising)
        except TracingError:
            # the point lies in an unbounded region of the complement
            continue
        tol = 10 * trace_tol * (1 + abs(s))
        if any(np.min(np.abs(m(s) - s)) < tol for m in members):
            continue
        pts, phis, turns = _trace_phase(R, s, c)
        curve, member = _phase_curve(R, pts, phis, turns, c)
        comps.append(curve)
        polys.append(curve.sample(max(2048, 64 * turns)).points)
        members.append(member)
        winds.append(turns)
    return LemniscateReport(c, comps, polys, crit, len(comps) == 1, True, winds)


@dataclass
class FingerprintCertificate:
    fingerprint: Fingerprint
    A: BlaschkeProduct
    B: BlaschkeProduct
    residual: float
    base_pair: tuple
    consistency: float
    info: dict = field(default_factory=dict)


def _exterior_phase_of_point(P_eval, lead: complex, n: int, curve: JordanCurve,
                             s_point: float) -> float:
    """arg of P(z)^{1/n} at the boundary point with parameter s_point,
    continued from infinity: inward along the ray through the boundary point
    of maximal modulus (outside the curve), then along the curve."""
    samp = curve.sample(8192)
    pts, prm = samp.points[:-1], samp.params[:-1]
    jb = int(np.argmax(np.abs(pts)))
    zb = pts[jb]
    u = zb / abs(zb)
    extent = abs(zb)
    radii = np.geomspace(1e6 * extent, extent, 20001)
    uw = np.unwrap(np.angle(P_eval(u * radii)))
    # at the far end arg P = arg(lead) + n arg(u) up to O(1e-6)
    start = np.angle(lead) + n * np.angle(u)
    uw += 2 * math.pi * np.round((start - uw[0]) / (2 * math.pi))
    # along the curve from zb forward to the target parameter
    P = curve.period
    s_b = prm[jb]
    s_t = s_b + np.mod(s_point - s_b, P)
    path = np.concatenate([np.linspace(s_b, s_t, 8193)])
    zs = curve.point(path)
    zs[0] = zb
    along = np.unwrap(np.angle(P_eval(zs)))
    along += uw[-1] - along[0]
    return float(along[-1] / n)


def poly_fingerprint(coeffs, report: Optional[LemniscateReport] = None, z0=None,
                     samples: int = 2048, nodes: int = 1024) -> FingerprintCertificate:
    """Fingerprint of the lemniscate |P| = 1 from k^n = B.

    coeffs are lowest degree first; the leading coefficient must be
    positive.  The zeros of B are the preimages of the roots of P under the
    interior map; its unimodular factor matches P(phi_minus(1)).
    """
    cf = np.asarray(coeffs, dtype=complex)
    while cf.size > 1 and cf[-1] == 0:
        cf = cf[:-1]
    n = cf.size - 1
    if n < 1:
        raise HypothesisError("polynomial must be nonconstant")
    lead = cf[-1]
    if abs(lead.imag) > 1e-14 * abs(lead) or lead.real <= 0:
        raise HypothesisError("leading coefficient must be positive")
    roots = np.roots(cf[::-1]) if n > 0 else np.array([])
    P = RationalMap.from_lists(lead.real, list(roots), [])
    if report is None:
        report = trace_level_set(P, 1.0)
    curve = report.curve
    Pv = lambda z: np.polyval(cf[::-1], z)
    inner = interior_map(curve, z0, nodes=nodes)
    a = inner.inverse(roots)
    if np.any(np.abs(a) >= 1):
        raise MapperError("a root preimage left the disk")
    B0 = BlaschkeProduct(1.0, tuple(a))
    z1 = complex(inner.boundary(np.array([0.0]))[0])
    target = Pv(z1)
    lam = target / complex(B0(1.0))
    lam /= abs(lam)
    B = BlaschkeProduct(lam, tuple(a))
    s1 = float(inner.s_of_theta(np.array([0.0]))[0])
    psi0 = _exterior_phase_of_point(Pv, lead, n, curve, s1)
    c0 = n * psi0 - float(B.circle_phase(0.0))
    shift = 2 * math.pi * np.round(c0 / (2 * math.pi))

    def k(theta):
        return (B.circle_phase(np.asarray(theta, dtype=float)) + shift) / n

    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    psi = k(theta)
    fp = Fingerprint(theta, psi, {"base_point": inner.base_point, "alpha": float(np.angle(lam)),
                                  "route": "k^n = B"}, k)
    resid = float(np.max(np.abs(np.exp(1j * n * psi) - B(np.exp(1j * theta)))))
    # independent consistency: B = P o phi_minus on the circle
    zs = inner.boundary(theta[::8])
    cons = float(np.max(np.abs(B(np.exp(1j * theta[::8])) - Pv(zs))))
    A = BlaschkeProduct(1.0, (0j,) * n, exterior=True)
    return FingerprintCertificate(fp, A, B, resid, (0.0, psi0), cons,
                                  {"preimages": a, "interior_map": inner, "report": report})


def _rational_from_coeffs(num, den) -> RationalMap:
    num = np.trim_zeros(np.asarray(num, dtype=complex), "b")
    den = np.trim_zeros(np.asarray(den, dtype=complex), "b")
    zeros = np.roots(num[::-1]) if num.size > 1 else []
    poles = np.roots(den[::-1]) if den.size > 1 else []
    return RationalMap.from_lists(num[-1] / den[-1], list(zeros), list(poles))


def rational_fingerprint(R: RationalMap, report: Optional[LemniscateReport] = None, z0=None,
                         samples: int = 2048, nodes: int = 1024) -> FingerprintCertificate:
    """Fingerprint of |R| = 1 (pole at infinity) from A(k) = B.

    A_1 = R o phi_plus is an exterior Blaschke product with poles at
    phi_plus^{-1}(poles of R) and infinity; B_1 = R o phi_minus has zeros at
    phi_minus^{-1}(zeros of R).  The base pair theta = 0 is matched through
    the two boundary correspondences, then k follows by phase inversion.
    """
    m = R.order_at_infinity
    if m <= 0:
        raise HypothesisError("R must have a pole at infinity")
    if report is None:
        report = trace_level_set(R, 1.0)
    curve = report.curve
    inner = interior_map(curve, z0, nodes=nodes)
    outer = exterior_map(curve, inner.base_point, nodes=nodes)
    zin = [(a, p) for a, p in R.zeros]
    pin = [(b, q) for b, q in R.poles]
    if not all(curve.contains(a)[0] for a, _ in zin):
        raise HypothesisError("a zero of R lies outside the lemniscate")
    if any(curve.contains(b)[0] for b, _ in pin):
        raise HypothesisError("a finite pole of R lies inside the lemniscate")
    a_pts = []
    for a, p in zin:
        a_pts += [complex(inner.inverse(np.array([a]))[0])] * p
    b_pts = []
    for b, q in pin:
        b_pts += [complex(outer.inverse(np.array([b]))[0])] * q
    B1 = BlaschkeProduct(1.0, tuple(a_pts))
    ext_zeros = [0j] * m + [1 / np.conj(b) for b in b_pts]
    A1 = BlaschkeProduct(1.0, tuple(ext_zeros), exterior=True)
    # unimodular constants from the values at the base points and the leading term
    z0v = inner.base_point
    mu = complex(R(z0v)) / complex(B1(0.0)) if min(abs(a) for a in a_pts) > 1e-12 else None
    lead = R.constant
    lam_A = lead * outer.capacity ** m / np.prod([-b for b in b_pts]) if b_pts else lead * outer.capacity ** m
    # base pair
    z1 = complex(inner.boundary(np.array([0.0]))[0])
    s1 = inner.s_of_theta(np.array([0.0]))
    psi0 = float(outer.theta_of_s(s1)[0])
    A = BlaschkeProduct(np.conj(A1(np.exp(1j * psi0))) / abs(A1(np.exp(1j * psi0))), A1.zeros, True)
    B = BlaschkeProduct(np.conj(B1(1.0)) / abs(B1(1.0)), B1.zeros)
    # A(k(1)) = 1 = B(1)
    shift = float(A.circle_phase(psi0) - B.circle_phase(0.0))

    def k(theta):
        return A.solve_phase(B.circle_phase(np.asarray(theta, dtype=float)) + shift, psi0)

    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    psi = k(theta)
    fp = Fingerprint(theta, psi, {"base_point": z0v, "route": "A(k) = B"}, k)
    resid = float(np.max(np.abs(A(np.exp(1j * psi)) - B(np.exp(1j * theta)))))
    # independent checks: unimodularity of the derived constants and B1 = R o phi_minus
    zs = inner.boundary(theta[::8])
    lam_B = float(np.angle(complex(R(z1)) / complex(B1(1.0))))
    B_full = BlaschkeProduct(np.exp(1j * lam_B), B1.zeros)
    cons = float(np.max(np.abs(B_full(np.exp(1j * theta[::8])) - R(zs))))
    info = {"lambda_A_modulus": abs(lam_A), "mu_modulus": None if mu is None else abs(mu),
            "interior_map": inner, "exterior_map": outer, "report": report,
            "counts": count_balance(R, curve)}
    return FingerprintCertificate(fp, A, B, resid, (0.0, psi0), cons, info)


def count_balance(R: RationalMap, curve: JordanCurve):
    """(|N_P - N_Z| inside, |N_P - N_Z| outside with infinity)."""
    zi = sum(p for a, p in R.zeros if curve.contains(a)[0])
    pi_ = sum(q for b, q in R.poles if curve.contains(b)[0])
    zo = sum(p for a, p in R.zeros) - zi
    po = sum(q for b, q in R.poles) - pi_ + max(R.order_at_infinity, 0)
    zo += max(-R.order_at_infinity, 0)
    return abs(pi_ - zi), abs(po - zo)


def reconstruct_rational(Q: QuadDifferential, zeta0, tol: float = 1e-6) -> RationalMap:
    """R with -(R'/R)^2/(4 pi^2) = Q and R(zeta0) = 1.

    R'/R = sqrt(-4 pi^2 Q) must have simple poles with integer residues and
    a simple zero at infinity with zeta R'/R -> positive integer.
    """
    for p, m in Q.finite:
        if m % 2:
            raise NotLogDerivativeError("an odd-order point has no single-valued square root")
    if Q.order_at_infinity != -2:
        raise NotLogDerivativeError("R'/R must have a simple zero at infinity")
    poles = [p for p, m in Q.finite if m < 0]
    if any(m != -2 for p, m in Q.finite if m < 0):
        raise NotLogDerivativeError("R'/R must have simple poles only")
    root = np.sqrt(-4 * math.pi ** 2 * complex(Q.constant))

    def r1(z):
        out = root
        for p, m in Q.finite:
            out = out * (z - p) ** (m // 2)
        return out

    # zeta R1(zeta) -> root (total finite half-order is -1)
    lim = root
    if abs(lim.imag) > tol * max(1.0, abs(lim)):
        raise NotLogDerivativeError("limit of zeta R'/R at infinity is not real")
    sgn = 1.0 if lim.real > 0 else -1.0
    n_inf = sgn * lim.real
    if abs(n_inf - round(n_inf)) > tol or round(n_inf) == 0:
        raise NotLogDerivativeError("limit at infinity is not a positive integer")
    zeros, pls = [], []
    for p in poles:
        res = sgn * root
        for q, m in Q.finite:
            if q != p:
                res = res * (p - q) ** (m // 2)
        if abs(res.imag) > tol or abs(res.real - round(res.real)) > tol or round(res.real) == 0:
            raise NotLogDerivativeError(f"residue {res} at {p} is not a nonzero integer")
        r = int(round(res.real))
        (zeros if r > 0 else pls).append((p, abs(r)))
    base = RationalMap(1.0, tuple(zeros), tuple(pls))
    R = RationalMap(1.0 / complex(base(zeta0)), tuple(zeros), tuple(pls))
    # verification of the round trip
    zs = np.asarray(zeta0) + np.exp(2j * math.pi * np.arange(16) / 16) * (0.37 + abs(zeta0) * 0.1)
    QR = -(R.log_derivative(zs)) ** 2 / (4 * math.pi ** 2)
    Qv = Q(zs)
    if np.max(np.abs(QR - Qv) / (1 + np.abs(Qv))) > 1e-8:
        raise NotLogDerivativeError("reconstruction does not reproduce Q")
    return R
