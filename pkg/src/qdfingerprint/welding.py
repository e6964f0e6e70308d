"""Fingerprint-level welding of two circle-symmetric quadratic differentials.

Q_minus lives on the disk side, Q_plus on the exterior side.  Along each
maximal circle arc the welding identifies points with equal Q-length
measured from the arc's representative; the result is the circle
homeomorphism k with Q_minus = Q_plus(k) k'^2 on the circle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .numerics import BranchedValue, PathSample, sqrt_along
from .quaddiff import (CircleArc, QuadDifferential, _circle_points, circle_decomposition,
                       circle_q_length, circle_sign_values, circle_sqrt_abs, eval_qd,
                       is_circle_symmetric)
from .riemannmap import Fingerprint

TWO_PI = 2 * math.pi
_X, _W = leggauss(20)


class CoordinationError(ValueError):
    pass


class PlacementError(ValueError):
    pass


class ArcSplitRequired(ValueError):
    pass


def _qabs_sqrt(Q: QuadDifferential, t):
    return Q.sqrt_abs(np.exp(1j * np.asarray(t, dtype=float)))


class ArcLength:
    """Cumulative Q-length along the circle on the unwrapped interval [a, b].

    Singular points (arc endpoints and even zeros inside) split the interval.
    Integrable endpoint behaviour |t - c|^{m/2} (m >= -1) is removed by the
    substitution t = c + h u^2; ends at poles of order >= 2 are approached by
    dyadic panels down to a relative distance of 1e-14 (the length diverges).
    Each panel stores offsets from a reference angle (its singular end when
    it has one), so quadrature nodes never round onto a divisor point.
    """

    def __init__(self, Q: QuadDifferential, a: float, b: float, a_order=None, b_order=None,
                 interior=(), base_panels: int = 8, anchor: Optional[float] = None):
        self.Q, self.a, self.b = Q, float(a), float(b)
        self.a_inf = a_order is not None and a_order <= -2
        self.b_inf = b_order is not None and b_order <= -2
        cuts = [self.a] + sorted(float(t) for t in interior if self.a < t < self.b) + [self.b]
        sing = [a_order is not None] + [True] * (len(cuts) - 2) + [b_order is not None]
        infs = [self.a_inf] + [False] * (len(cuts) - 2) + [self.b_inf]
        panels = []   # (lo, hi, kind, ref, lo_off, hi_off); kind: 0 plain, 1 singular at lo, 2 at hi
        for i in range(len(cuts) - 1):
            lo, hi = cuts[i], cuts[i + 1]
            width = hi - lo
            offs = [width * j / base_panels for j in range(base_panels + 1)]
            # breakpoints as offsets from lo, or from hi for the upper half
            for j in range(base_panels):
                o0, o1 = offs[j], offs[j + 1]
                near_hi = j >= base_panels // 2
                ref = hi if near_hi else lo
                l_off = o0 - width if near_hi else o0
                h_off = o1 - width if near_hi else o1
                if j == base_panels - 1:
                    h_off = 0.0
                kind = 0
                if j == 0 and sing[i] and not infs[i]:
                    kind = 1
                if j == base_panels - 1 and sing[i + 1] and not infs[i + 1]:
                    kind = 2
                if j == 0 and infs[i]:
                    for k in range(46, 0, -1):
                        panels.append((lo + o1 * 2.0 ** (-k), lo + o1 * 2.0 ** (1 - k), 0, lo,
                                       o1 * 2.0 ** (-k), o1 * 2.0 ** (1 - k)))
                    continue
                if j == base_panels - 1 and infs[i + 1]:
                    for k in range(1, 47):
                        panels.append((hi + l_off * 2.0 ** (1 - k), hi + l_off * 2.0 ** (-k), 0, hi,
                                       l_off * 2.0 ** (1 - k), l_off * 2.0 ** (-k)))
                    continue
                panels.append((ref + l_off, ref + h_off, kind, ref, l_off, h_off))
        self.lo = np.array([p[0] for p in panels])
        self.hi = np.array([p[1] for p in panels])
        self.kind = np.array([p[2] for p in panels])
        self.ref = np.array([p[3] for p in panels])
        self.lo_off = np.array([p[4] for p in panels])
        self.hi_off = np.array([p[5] for p in panels])
        self.lo[0], self.hi[-1] = self.a if not self.a_inf else self.lo[0], \
            self.b if not self.b_inf else self.hi[-1]
        vals = self._partial(np.arange(len(panels)), self.hi, offsets=self.hi_off)
        # sum outward from the anchor panel so values near it keep full precision
        # even when an end of the table sits next to a high-order pole
        i0 = 0 if anchor is None else int(np.clip(np.searchsorted(self.lo, anchor, side="right") - 1,
                                                  0, len(panels) - 1))
        right = np.concatenate([[0.0], np.cumsum(vals[i0:])])
        left = -np.cumsum(vals[:i0][::-1])[::-1]
        self.cum = np.concatenate([left, right])
        self.t_min = self.lo[0]
        self.t_max = self.hi[-1]

    @property
    def total(self) -> float:
        if self.a_inf or self.b_inf:
            return math.inf
        return float(self.cum[-1] - self.cum[0])

    def _density_off(self, ref, off):
        return circle_sqrt_abs(self.Q, ref, off)

    def _partial(self, idx, t, offsets=None):
        """Integral of |Q|^{1/2} over [lo_idx, t] (t inside the panel)."""
        ref, kind = self.ref[idx], self.kind[idx]
        lo, hi = self.lo_off[idx], self.hi_off[idx]
        t = np.asarray(t, dtype=float)
        to = np.asarray(offsets, dtype=float) if offsets is not None else t - ref
        to = np.clip(to, lo, hi)
        out = np.empty(t.shape)
        x = 0.5 * (_X[None, :] + 1)
        m0 = kind == 0
        if np.any(m0):
            L = (to[m0] - lo[m0])[:, None]
            o = lo[m0][:, None] + L * x
            out[m0] = (0.5 * L[:, 0]) * (self._density_off(ref[m0][:, None], o) @ _W)
        m1 = kind == 1
        if np.any(m1):
            # offset h u^2 from the singular lower end, u in [0, sqrt(to/h)]
            h = hi[m1][:, None]
            U = np.sqrt(np.maximum(to[m1], 0.0)[:, None] / h)
            u = U * x
            with np.errstate(invalid="ignore"):
                v = 0.5 * U[:, 0] * ((self._density_off(ref[m1][:, None], h * u ** 2) * 2 * h * u) @ _W)
            # an empty interval sits on the singular end itself
            out[m1] = np.where(U[:, 0] == 0, 0.0, v)
        m2 = kind == 2
        if np.any(m2):
            # offset -h u^2 from the singular upper end; [lo, t] is u in [u_t, 1]
            h = -lo[m2][:, None]
            u_t = np.sqrt(np.maximum(-to[m2], 0.0)[:, None] / h)
            span = 1.0 - u_t
            u = u_t + span * x
            with np.errstate(invalid="ignore"):
                v = 0.5 * span[:, 0] * ((self._density_off(ref[m2][:, None], -h * u ** 2) * 2 * h * u) @ _W)
            out[m2] = np.where(span[:, 0] == 0, 0.0, v)
        return out

    def __call__(self, t):
        """Q-length from the anchor panel's start to t."""
        t = np.clip(np.asarray(t, dtype=float), self.t_min, self.t_max)
        idx = np.clip(np.searchsorted(self.lo, t, side="right") - 1, 0, self.lo.size - 1)
        return self.cum[idx] + self._partial(idx, t)

    def density(self, t):
        return _qabs_sqrt(self.Q, t)

    def inverse(self, ell):
        ell = np.asarray(ell, dtype=float)
        lo_v, hi_v = self.cum[0], self.cum[-1]
        if np.any(ell < lo_v - 1e-9 * max(1, abs(hi_v))) or np.any(ell > hi_v + 1e-9 * max(1, abs(hi_v))):
            raise CoordinationError("Q-length outside the arc's range")
        e = np.clip(ell, lo_v, hi_v).ravel()
        idx = np.clip(np.searchsorted(self.cum, e, side="right") - 1, 0, self.lo.size - 1)
        target = e - self.cum[idx]
        span = self.cum[idx + 1] - self.cum[idx]
        ref = self.ref[idx]
        # safeguarded Newton in offsets from the panel reference, all queries at once
        a = self.lo_off[idx].copy()
        b = self.hi_off[idx].copy()
        frac = np.where(span > 0, target / np.where(span > 0, span, 1.0), 0.0)
        x = a + (b - a) * frac
        tol = 1e-15 * np.maximum(1.0, np.abs(self.cum[idx]) + span)
        for _ in range(100):
            g = self._partial(idx, ref + x, offsets=x) - target
            done = np.abs(g) <= tol
            a = np.where(g < 0, x, a)
            b = np.where(g > 0, x, b)
            d = self._density_off(ref, x)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = x - g / d
            bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
            xn = np.where(bad, 0.5 * (a + b), xn)
            tiny = (b - a) <= 4 * np.finfo(float).eps * np.maximum(np.abs(ref + x), 1.0)
            if np.all(done | tiny):
                break
            x = np.where(done | tiny, x, xn)
        return (ref + x).reshape(ell.shape)


@dataclass
class CoordinationReport:
    ok: bool
    condition: Optional[str] = None
    arc_index: Optional[int] = None
    message: str = ""
    pair: Optional["CoordinatedPair"] = None


@dataclass
class CoordinatedPair:
    Q_minus: QuadDifferential
    Q_plus: QuadDifferential
    arcs_minus: tuple
    arcs_plus: tuple
    shift: int = 0
    reps_minus: Optional[tuple] = None
    reps_plus: Optional[tuple] = None
    lengths: tuple = ()

    def paired(self, j: int):
        k = len(self.arcs_minus)
        return self.arcs_minus[j], self.arcs_plus[(j + self.shift) % k]


def _arc_length_of(Q, arc: CircleArc) -> float:
    if arc.whole_circle:
        return circle_q_length(Q, 0.0, TWO_PI)
    if arc.start_type == "infinite" or arc.end_type == "infinite":
        return math.inf
    return circle_q_length(Q, arc.start, arc.end)


def _compare(arcs_m, arcs_p, lm, lp, shift, tol):
    k = len(arcs_m)
    for j in range(k):
        am, ap = arcs_m[j], arcs_p[(j + shift) % k]
        if am.sign != ap.sign:
            return "a", j, f"arc {j}: sign {am.sign} vs {ap.sign}"
        if (am.start_type, am.end_type) != (ap.start_type, ap.end_type):
            return "b", j, f"arc {j}: endpoint types differ"
        x, y = lm[j], lp[(j + shift) % k]
        if math.isinf(x) != math.isinf(y) or (not math.isinf(x) and abs(x - y) > tol * max(1.0, x)):
            return "c", j, f"arc {j}: Q-lengths {x} vs {y}"
    return None


def check_coordinated(Q_minus: QuadDifferential, Q_plus: QuadDifferential, shift: Optional[int] = None,
                      tol: float = 1e-8) -> CoordinationReport:
    """Definition-style check: equal arc counts, and per arc matching sign,
    endpoint types and finite Q-lengths.  shift pairs arc j of Q_minus with
    arc j + shift of Q_plus; by default the first shift that works."""
    for Q in (Q_minus, Q_plus):
        if not is_circle_symmetric(Q):
            return CoordinationReport(False, "symmetry", None, "differential is not real on the circle")
    am = circle_decomposition(Q_minus).arcs
    ap = circle_decomposition(Q_plus).arcs
    if len(am) != len(ap):
        return CoordinationReport(False, "count", None, f"{len(am)} arcs vs {len(ap)}")
    lm = [_arc_length_of(Q_minus, a) for a in am]
    lp = [_arc_length_of(Q_plus, a) for a in ap]
    shifts = [shift] if shift is not None else list(range(len(am)))
    first = None
    for s in shifts:
        bad = _compare(am, ap, lm, lp, s, tol)
        if bad is None:
            pair = CoordinatedPair(Q_minus, Q_plus, am, ap, s, lengths=tuple(lm))
            return CoordinationReport(True, None, None, "coordinated", pair)
        first = first or bad
    cond, j, msg = first
    return CoordinationReport(False, cond, j, msg)


def _in_arc(arc: CircleArc, t: float) -> bool:
    if arc.whole_circle:
        return True
    tt = arc.start + (t - arc.start) % TWO_PI
    return arc.start < tt < arc.end


def _default_rep(arc: CircleArc) -> float:
    if arc.whole_circle:
        return 0.0
    if arc.start_type == "finite":
        return arc.start
    if arc.end_type == "finite":
        return arc.end
    return 0.5 * (arc.start + arc.end)


def choose_representatives(pair: CoordinatedPair, overrides_minus: Optional[dict] = None,
                           overrides_plus: Optional[dict] = None) -> CoordinatedPair:
    """Representatives per arc: the finite-critical start, else the finite end,
    else (both ends infinite, or the whole circle) a free choice that
    defaults to the midpoint (angle 0 for the whole circle).  Overrides are
    used only for free choices and must lie inside their arc."""
    om = overrides_minus or {}
    op = overrides_plus or {}
    rm, rp = [], []
    k = len(pair.arcs_minus)
    for j in range(k):
        am, ap = pair.paired(j)
        for arc, ov, out in ((am, om.get(j), rm), (ap, op.get(j), rp)):
            free = arc.whole_circle or (arc.start_type == "infinite" and arc.end_type == "infinite")
            if free and ov is not None:
                if not _in_arc(arc, ov):
                    raise PlacementError(f"representative {ov} is outside arc {j}")
                if not arc.whole_circle:
                    ov = arc.start + (ov - arc.start) % TWO_PI
                out.append(float(ov))
            else:
                out.append(_default_rep(arc))
    return replace(pair, reps_minus=tuple(rm), reps_plus=tuple(rp))


def _arc_table(Q, arc: CircleArc, rep: float, panels: int = 8) -> ArcLength:
    if arc.whole_circle:
        inner = []
        for z in arc.interior_zeros:
            t = rep + (z - rep) % TWO_PI
            inner += [t]
        return ArcLength(Q, rep, rep + TWO_PI, None, None, inner, panels, anchor=rep)
    return ArcLength(Q, arc.start, arc.end, arc.start_order, arc.end_order, arc.interior_zeros,
                     panels, anchor=rep)


@dataclass
class WeldingResult:
    fingerprint: Fingerprint
    residual: float
    representatives: tuple
    tables: list = field(default_factory=list)


class _Welder:
    def __init__(self, pair: CoordinatedPair, panels: int = 8):
        if pair.reps_minus is None:
            pair = choose_representatives(pair)
        self.pair = pair
        k = len(pair.arcs_minus)
        self.k = k
        self.tab_m, self.tab_p, self.off_m, self.off_p = [], [], [], []
        for j in range(k):
            am, ap = pair.paired(j)
            tm = _arc_table(pair.Q_minus, am, pair.reps_minus[j], panels)
            tp = _arc_table(pair.Q_plus, ap, pair.reps_plus[j], panels)
            self.tab_m.append(tm)
            self.tab_p.append(tp)
            self.off_m.append(float(tm(np.array([pair.reps_minus[j]]))[0]))
            self.off_p.append(float(tp(np.array([pair.reps_plus[j]]))[0]))
        # Finite stretches on either side of a representative are matched
        # proportionally: coordinated lengths agree only to solver accuracy,
        # and near a zero of Q a length defect eps moves the image by about
        # eps^(2/3); the scale factors are 1 up to that defect.
        self.scale_lo, self.scale_hi = [], []
        for j in range(k):
            tm, tp = self.tab_m[j], self.tab_p[j]
            below_m, below_p = self.off_m[j] - tm.cum[0], self.off_p[j] - tp.cum[0]
            above_m, above_p = tm.cum[-1] - self.off_m[j], tp.cum[-1] - self.off_p[j]
            am, _ = pair.paired(j)
            lo_fin = am.whole_circle or am.start_type == "finite"
            hi_fin = am.whole_circle or am.end_type == "finite"
            self.scale_lo.append(below_p / below_m if lo_fin and below_m > 0 else 1.0)
            self.scale_hi.append(above_p / above_m if hi_fin and above_m > 0 else 1.0)
        # unwrapped starts on both sides, arc 0 first
        a0 = pair.arcs_minus[0]
        self.start_m = pair.reps_minus[0] if a0.whole_circle else a0.start
        p0 = pair.arcs_plus[pair.shift % k]
        self.start_p = pair.reps_plus[0] if p0.whole_circle else p0.start
        self.bounds_m = []
        self.bounds_p = []
        for j in range(k):
            am, ap = pair.paired(j)
            if am.whole_circle:
                self.bounds_m.append((self.start_m, self.start_m + TWO_PI))
                self.bounds_p.append((self.start_p, self.start_p + TWO_PI))
            else:
                s = self.start_m + (am.start - self.start_m) % TWO_PI
                self.bounds_m.append((s, s + (am.end - am.start)))
                s = self.start_p + (ap.start - self.start_p) % TWO_PI
                self.bounds_p.append((s, s + (ap.end - ap.start)))

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        flat = th.ravel()
        turns = np.floor((flat - self.start_m) / TWO_PI)
        red = flat - TWO_PI * turns
        out = np.empty(flat.shape)
        done = np.zeros(flat.shape, dtype=bool)
        for j in range(self.k):
            lo, hi = self.bounds_m[j]
            sel = (red >= lo) & (red < hi) & ~done
            if not np.any(sel):
                continue
            am, ap = self.pair.paired(j)
            tm, tp = self.tab_m[j], self.tab_p[j]
            # position inside the arc's own unwrapped frame
            rs = red[sel]
            if not am.whole_circle:
                # k is only Holder at divisor points: land ulp-level misses on the ends
                rs = np.where(rs - lo < 4e-15, lo, rs)
                rs = np.where(hi - rs < 4e-15, hi, rs)
            loc_m = rs - lo + (am.start if not am.whole_circle else tm.a)
            ell = tm(loc_m) - self.off_m[j]
            ell = ell * np.where(ell >= 0, self.scale_hi[j], self.scale_lo[j])
            at_start = loc_m <= tm.a
            psi_loc = tp.inverse(np.clip(ell + self.off_p[j], tp.cum[0], tp.cum[-1]))
            if not am.whole_circle:
                psi_loc = np.where(at_start, ap.start, psi_loc)
                psi_loc = np.where(rs >= hi, ap.end, psi_loc)
            base = ap.start if not ap.whole_circle else tp.a
            out[sel] = psi_loc - base + self.bounds_p[j][0]
            done |= sel
        return (out + TWO_PI * turns).reshape(th.shape)


def welding_fingerprint(pair: CoordinatedPair, samples: int = 2048, panels: int = 8) -> WeldingResult:
    """k matched arc by arc from the representatives; endpoints map to
    endpoints and representatives to representatives.  panels sets the
    number of quadrature panels per arc piece."""
    w = _Welder(pair, panels)
    # infinite-length sides must face infinite-length sides from the representative
    for j in range(w.k):
        am, ap = w.pair.paired(j)
        for side_m, side_p in ((am.start_type, ap.start_type), (am.end_type, ap.end_type)):
            if side_m != side_p:
                raise CoordinationError(f"arc {j}: endpoint types differ")
        if not am.whole_circle:
            tm, tp = w.tab_m[j], w.tab_p[j]
            sides = []
            if am.start_type == "finite":
                sides.append((w.off_m[j] - tm.cum[0], w.off_p[j] - tp.cum[0]))
            if am.end_type == "finite":
                sides.append((tm.cum[-1] - w.off_m[j], tp.cum[-1] - w.off_p[j]))
            for x, y in sides:
                if abs(x - y) > 1e-7 * max(1.0, abs(x)):
                    raise CoordinationError(f"arc {j}: finite length on one side of the representative "
                                            f"faces an unequal length ({x} vs {y})")
    theta = np.linspace(0.0, TWO_PI, samples, endpoint=False) + w.start_m
    theta = np.mod(theta, TWO_PI)
    theta.sort()
    psi = w(theta)
    fp = Fingerprint(theta, psi, {"route": "welding", "representatives_minus": w.pair.reps_minus,
                                  "representatives_plus": w.pair.reps_plus, "shift": w.pair.shift}, w)
    res = residual_2_4_2(fp, pair.Q_minus, pair.Q_plus)
    return WeldingResult(fp, res, (w.pair.reps_minus, w.pair.reps_plus),
                         [(tm.total, tp.total) for tm, tp in zip(w.tab_m, w.tab_p)])


def residual_2_4_2(k: Fingerprint, Q_minus: QuadDifferential, Q_plus: QuadDifferential,
                   samples: int = 512, h: float = 1e-5, exclusion: float = 1e-2) -> float:
    """sup |Q_minus(z) - Q_plus(k(z)) k'(z)^2| / (1 + |Q_minus(z)|) over circle
    samples away from critical angles, k' by central differences."""
    theta = (np.arange(samples) + 0.5) * TWO_PI / samples
    crit = [float(np.angle(p)) for p, m in Q_minus.finite if abs(abs(p) - 1) < 1e-10]
    for c in crit:
        theta = theta[np.abs(np.angle(np.exp(1j * (theta - c)))) > exclusion]
    psi = k(theta)
    # also stay away from the images of critical points on the other side
    crit_p = [float(np.angle(p)) for p, m in Q_plus.finite if abs(abs(p) - 1) < 1e-10]
    keep = np.ones(theta.shape, dtype=bool)
    for c in crit_p:
        keep &= np.abs(np.angle(np.exp(1j * (psi - c)))) > exclusion
    theta, psi = theta[keep], psi[keep]
    dpsi = (k(theta + h) - k(theta - h)) / (2 * h)
    z = np.exp(1j * theta)
    w = np.exp(1j * psi)
    kprime = dpsi * w / z
    qm = eval_qd(Q_minus, z)
    qp = eval_qd(Q_plus, w)
    r = np.abs(qm - qp * kprime ** 2) / (1 + np.abs(qm))
    return float(np.max(r)) if r.size else 0.0


@dataclass
class WeldingFunctions:
    """Cumulative integrals A (of sqrt Q_plus from k(z0)) and B (of sqrt Q_minus
    from z0) along the circle, real-increasing on trajectory arcs and
    imaginary-increasing on orthogonal arcs."""
    A: callable
    B: callable
    fingerprint: Fingerprint


def _circle_table(Q, start):
    crit = [start + (t - start) % TWO_PI for t, _, _ in _circle_points(Q)]
    crit = [t for t in crit if t > start]
    at_start = any(abs(np.angle(np.exp(1j * (t - start)))) < 1e-12 for t, _, _ in _circle_points(Q))
    order = 0 if at_start else None
    return ArcLength(Q, start, start + TWO_PI, order, order, crit, anchor=start)


def qd_welding_functions(Q_minus: QuadDifferential, Q_plus: QuadDifferential, z0: float,
                         k0: float) -> WeldingFunctions:
    """Single-equation form A(k(z)) = B(z); needs the circle to be free of
    poles of order >= 2 (otherwise use the arc-by-arc welding).

    z0 and k0 are angles.  Each cumulative integral picks up real increments
    on trajectory arcs and imaginary increments on orthogonal arcs, so its
    real plus imaginary part is the plain cumulative Q-length; k matches
    those lengths.
    """
    for Q in (Q_minus, Q_plus):
        for p, m in Q.finite:
            if abs(abs(p) - 1) < 1e-10 and m <= -2:
                raise ArcSplitRequired("an infinite critical point lies on the circle")
    tb = _circle_table(Q_minus, float(z0))
    ta = _circle_table(Q_plus, float(k0))
    if abs(ta.total - tb.total) > 1e-8 * max(1.0, tb.total):
        raise CoordinationError(f"total Q-lengths differ: {tb.total} vs {ta.total}")

    def signed(Q, tab):
        cuts = np.concatenate([tab.lo, [tab.hi[-1]]])
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        sg = np.sign(circle_sign_values(Q, mids).real)
        fac = np.where(sg > 0, 1.0 + 0j, 1j)
        # cumulative value at each panel start
        inc = np.diff(tab.cum) * fac
        base = np.concatenate([[0j], np.cumsum(inc)])

        def F(t):
            t = np.asarray(t, dtype=float)
            turns = np.floor((t - tab.a) / TWO_PI)
            red = t - TWO_PI * turns
            idx = np.clip(np.searchsorted(tab.lo, red, side="right") - 1, 0, tab.lo.size - 1)
            part = tab._partial(idx.ravel(), red.ravel()).reshape(red.shape)
            return base[idx] + fac[idx] * part + turns * base[-1]
        return F

    A = signed(Q_plus, ta)
    B = signed(Q_minus, tb)

    def k(theta):
        th = np.asarray(theta, dtype=float)
        turns = np.floor((th - tb.a) / TWO_PI)
        red = th - TWO_PI * turns
        psi = ta.inverse(np.clip(tb(red), ta.cum[0], ta.cum[-1]))
        return psi + TWO_PI * turns

    theta = np.linspace(0.0, TWO_PI, 512, endpoint=False)
    fp = Fingerprint(theta, k(theta), {"route": "welding-functions", "z0": z0, "k0": k0}, k)
    return WeldingFunctions(A, B, fp)


def twist_rotation(rho: float, beta: float, samples: int = 4096):
    """alpha = -arg(i I), I = int_0^{2 pi} sqrt((e^{it} - rho)(e^{it} - e^{i beta}/rho)) e^{it/2} dt,
    with the square root continued along the circle.  Returns (alpha, I)."""
    t = np.linspace(0.0, TWO_PI, samples + 1)
    path = PathSample(np.exp(1j * t), t)
    g = lambda z: (z - rho) * (z - np.exp(1j * beta) / rho)
    g0 = complex(g(np.array([1.0 + 0j]))[0])
    vals = sqrt_along(g, path, BranchedValue(np.sqrt(g0)))
    root = np.array([v.value for v in vals])
    f = root * np.exp(0.5j * t)
    # periodic integrand: trapezoid rule is spectrally accurate
    I = complex(np.sum(f[:-1]) * TWO_PI / samples)
    alpha = -float(np.angle(1j * I))
    return alpha, I
