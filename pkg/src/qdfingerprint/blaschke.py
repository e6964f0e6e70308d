"""Finite Blaschke products, rational maps and their logarithmic-derivative
differentials Q_f = -(f'/f)^2 / (4 pi^2) dz^2."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .numerics import invert_monotone
from .quaddiff import INFINITY, PoleError, QuadDifferential, is_infinite


class ContractViolation(Exception):
    pass


def _group(points) -> tuple:
    """(point, multiplicity) pairs; repeats must be exact."""
    out = {}
    for p in points:
        out[complex(p)] = out.get(complex(p), 0) + 1
    return tuple(out.items())


@dataclass(frozen=True)
class RationalMap:
    """f(z) = constant * prod (z - a)^p / prod (z - b)^q."""
    constant: complex
    zeros: tuple = ()
    poles: tuple = ()

    def __post_init__(self):
        c = complex(self.constant)
        if c == 0:
            raise ValueError("constant must be nonzero")
        zs = tuple((complex(a), int(p)) for a, p in self.zeros)
        ps = tuple((complex(b), int(q)) for b, q in self.poles)
        pts = [a for a, _ in zs] + [b for b, _ in ps]
        if len(set(pts)) != len(pts):
            raise ValueError("zeros and poles must be distinct points")
        if any(m <= 0 for _, m in zs + ps):
            raise ValueError("multiplicities must be positive")
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "poles", ps)

    @classmethod
    def from_lists(cls, constant, zeros=(), poles=()) -> "RationalMap":
        return cls(constant, _group(zeros), _group(poles))

    @property
    def numerator_degree(self) -> int:
        return sum(p for _, p in self.zeros)

    @property
    def denominator_degree(self) -> int:
        return sum(q for _, q in self.poles)

    @property
    def degree(self) -> int:
        return max(self.numerator_degree, self.denominator_degree)

    @property
    def order_at_infinity(self) -> int:
        """Positive for a pole at infinity."""
        return self.numerator_degree - self.denominator_degree

    def __call__(self, z):
        return rational_eval(self, z)

    def log_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a, p in self.zeros:
            out = out + p / (z - a)
        for b, q in self.poles:
            out = out - q / (z - b)
        return out

    def derivative(self, z):
        return rational_derivative(self, z)

    def signed_points(self) -> list:
        return [(a, p) for a, p in self.zeros] + [(b, -q) for b, q in self.poles]

    def numerator(self) -> np.ndarray:
        c = np.array([1.0 + 0j])
        for a, p in self.zeros:
            for _ in range(p):
                c = np.polymul(c, [1.0, -a])
        return self.constant * c

    def denominator(self) -> np.ndarray:
        c = np.array([1.0 + 0j])
        for b, q in self.poles:
            for _ in range(q):
                c = np.polymul(c, [1.0, -b])
        return c


def rational_eval(f: RationalMap, z):
    z_arr = np.asarray(z, dtype=complex)
    out = np.full(z_arr.shape, f.constant, dtype=complex)
    for a, p in f.zeros:
        out = out * (z_arr - a) ** p
    for b, q in f.poles:
        d = z_arr - b
        if np.any(d == 0):
            raise PoleError(f"evaluation at a pole {b}")
        out = out / d ** q
    return complex(out) if np.ndim(z) == 0 else out


def rational_derivative(f: RationalMap, z):
    """f' = f * (f'/f), with the zero-of-f points handled by the product rule."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty(z_arr.shape, dtype=complex)
    for i, w in enumerate(z_arr.ravel()):
        hit = [(a, p) for a, p in f.zeros if w == a]
        if hit:
            a, p = hit[0]
            if p > 1:
                out.flat[i] = 0.0
            else:
                rest = RationalMap(f.constant, tuple(x for x in f.zeros if x[0] != a), f.poles)
                out.flat[i] = rational_eval(rest, w)
        else:
            out.flat[i] = rational_eval(f, w) * complex(f.log_derivative(w))
    return complex(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


@dataclass(frozen=True)
class BlaschkeProduct:
    """B(z) = lam * prod (z - a)/(1 - conj(a) z) with |a| < 1.

    exterior marks products built from pole data outside the disk (pole at
    infinity meaning a zero at the origin), which map the exterior of the
    disk onto itself.
    """
    lam: complex
    zeros: tuple
    exterior: bool = False

    def __post_init__(self):
        lam = complex(self.lam)
        if abs(abs(lam) - 1) > 1e-12:
            raise ValueError("the constant must be unimodular")
        zs = tuple(complex(a) for a in self.zeros)
        if not zs:
            raise ValueError("degree must be at least 1")
        if any(abs(a) >= 1 for a in zs):
            raise ValueError("zeros must lie strictly inside the unit disk")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "zeros", zs)

    @classmethod
    def exterior_form(cls, lam, poles: Sequence) -> "BlaschkeProduct":
        """Product with the given poles outside the closed disk (infinity allowed)."""
        zs = []
        for p in poles:
            if is_infinite(p):
                zs.append(0j)
            else:
                p = complex(p)
                if abs(p) <= 1:
                    raise ValueError("poles must lie strictly outside the unit disk")
                zs.append(1 / np.conj(p))
        return cls(lam, tuple(zs), exterior=True)

    @property
    def degree(self) -> int:
        return len(self.zeros)

    @property
    def poles(self) -> tuple:
        return tuple(INFINITY if a == 0 else 1 / np.conj(a) for a in self.zeros)

    def __call__(self, z):
        return blaschke_eval(self, z)

    def derivative(self, z):
        return blaschke_derivative(self, z)

    def log_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a in self.zeros:
            out = out + 1 / (z - a) + np.conj(a) / (1 - np.conj(a) * z)
        return out

    def phase_derivative(self, theta):
        """d/dtheta arg B(e^{i theta}) = sum (1 - |a|^2)/|e^{i theta} - a|^2."""
        z = np.exp(1j * np.asarray(theta, dtype=float))
        out = np.zeros(z.shape)
        for a in self.zeros:
            out = out + (1 - abs(a) ** 2) / np.abs(z - a) ** 2
        return out

    def circle_phase(self, theta):
        """Continuous arg B(e^{i theta}); increases by 2 pi deg per turn."""
        th = np.asarray(theta, dtype=float)
        z = np.exp(1j * th)
        out = np.full(th.shape, np.angle(self.lam))
        for a in self.zeros:
            # both correction terms have positive real part inside the Arg
            out = out + th + np.angle(1 - a / z) - np.angle(1 - np.conj(a) * z)
        return out

    def solve_phase(self, target, theta_start: float = 0.0):
        """theta with circle_phase(theta) = target (vectorized, any real target)."""
        tgt = np.asarray(target, dtype=float)
        n = self.degree
        f0 = float(self.circle_phase(theta_start))
        k = np.floor((tgt - f0) / (2 * math.pi * n))
        red = tgt - 2 * math.pi * n * k
        th = invert_monotone(self.circle_phase, red.ravel(), (theta_start, theta_start + 2 * math.pi),
                             tol=1e-14, derivative=self.phase_derivative)
        return np.asarray(th).reshape(tgt.shape) + 2 * math.pi * k

    def as_rational(self) -> RationalMap:
        const = self.lam
        zeros, poles = [], []
        for a in self.zeros:
            # zeros this close to the origin would put a pole near the float limit
            a = 0j if abs(a) < 1e-12 else a
            zeros.append(a)
            if a != 0:
                # (z - a)/(1 - conj(a) z) = (-1/conj(a)) (z - a)/(z - 1/conj(a))
                const = const * (-1 / np.conj(a))
                poles.append(1 / np.conj(a))
        return RationalMap.from_lists(const, zeros, poles)


def blaschke_eval(B: BlaschkeProduct, z):
    z_arr = np.asarray(z, dtype=complex)
    out = np.full(z_arr.shape, B.lam, dtype=complex)
    for a in B.zeros:
        den = 1 - np.conj(a) * z_arr
        if np.any(den == 0):
            raise PoleError(f"evaluation at a pole {1 / np.conj(a)}")
        out = out * (z_arr - a) / den
    return complex(out) if np.ndim(z) == 0 else out


def blaschke_derivative(B: BlaschkeProduct, z):
    """Sum over factors of the product rule, valid at the zeros as well."""
    z_arr = np.asarray(z, dtype=complex)
    facs = []
    ders = []
    for a in B.zeros:
        den = 1 - np.conj(a) * z_arr
        if np.any(den == 0):
            raise PoleError(f"evaluation at a pole {1 / np.conj(a)}")
        facs.append((z_arr - a) / den)
        ders.append((1 - abs(a) ** 2) / den ** 2)
    total = np.zeros(z_arr.shape, dtype=complex)
    for i in range(len(facs)):
        term = ders[i]
        for j in range(len(facs)):
            if j != i:
                term = term * facs[j]
        total = total + term
    out = B.lam * total
    return complex(out) if np.ndim(z) == 0 else out


def _polish(poly, r, iters=4):
    dp = np.polyder(poly)
    for _ in range(iters):
        d = np.polyval(dp, r)
        if d == 0:
            break
        r = r - np.polyval(poly, r) / d
    return r


def log_derivative_qd(f) -> QuadDifferential:
    """Q_f = -(1/4 pi^2) (f'/f)^2 dz^2.

    Zeros and poles of f become order-two poles; zeros of f'/f (critical
    points of f off its zeros and poles) become zeros of even order.
    """
    if isinstance(f, BlaschkeProduct):
        f = f.as_rational()
    pts = f.signed_points()
    if not pts:
        raise ValueError("f must be nonconstant")
    # f'/f = N / prod (z - c), N = sum s_k prod_{j != k} (z - c_j)
    N = np.zeros(len(pts), dtype=complex)
    for k, (_, s) in enumerate(pts):
        term = np.array([1.0 + 0j])
        for j, (c, _) in enumerate(pts):
            if j != k:
                term = np.polymul(term, [1.0, -c])
        N = N + s * np.concatenate([np.zeros(len(pts) - term.size), term])
    # the top coefficient is the exact integer sum of orders
    if sum(s for _, s in pts) == 0:
        N = N[1:]
    scale = np.max(np.abs(N)) if N.size else 0.0
    while N.size > 1 and abs(N[0]) <= 1e-13 * scale:
        N = N[1:]
    roots = np.roots(N) if N.size > 1 else np.array([])
    roots = np.array([_polish(N, r) for r in roots])
    groups = []
    for r in roots:
        for g in groups:
            if abs(g[0] - r) <= 1e-7 * max(1.0, abs(r)):
                g[1] += 1
                break
        else:
            groups.append([r, 1])
    div = [(c, -2) for c, _ in pts] + [(r, 2 * m) for r, m in groups]
    return QuadDifferential.from_finite(-(N[0] ** 2) / (4 * math.pi ** 2), div)


class CircleDerivativeReport(NamedTuple):
    min_modulus: float
    theta_at_min: float
    lower_bound: float
    ok: bool


def no_circle_critical_points(B: BlaschkeProduct, samples: int = 4096) -> CircleDerivativeReport:
    """Minimum of |B'| on the circle by dense sampling and local refinement,
    with the analytic bound sum (1 - |a|)/(1 + |a|) as a certificate."""
    th = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    g = B.phase_derivative(th)
    i = int(np.argmin(g))
    h = 2 * math.pi / samples
    res = minimize_scalar(lambda t: float(B.phase_derivative(np.array([t]))[0]),
                          bounds=(th[i] - h, th[i] + h), method="bounded",
                          options={"xatol": 1e-12})
    m = min(float(res.fun), float(g[i]))
    t = float(res.x) if res.fun <= g[i] else float(th[i])
    bound = float(sum((1 - abs(a)) / (1 + abs(a)) for a in B.zeros))
    return CircleDerivativeReport(m, t % (2 * math.pi), bound, m > 0 and bound > 0)


class QuotientCritical(NamedTuple):
    thetas: tuple
    identically_critical: bool


def quotient_circle_critical(A: BlaschkeProduct, B: BlaschkeProduct,
                             samples: int = 4096) -> QuotientCritical:
    """Circle zeros of (A/B)', i.e. zeros of the phase-derivative difference."""
    if A.degree != B.degree:
        raise ValueError("A and B must have the same degree")
    if sorted(A.zeros, key=lambda c: (c.real, c.imag)) == sorted(B.zeros, key=lambda c: (c.real, c.imag)):
        return QuotientCritical((), True)

    def h(t):
        return A.phase_derivative(np.asarray(t)) - B.phase_derivative(np.asarray(t))

    th = np.linspace(0.0, 2 * math.pi, samples + 1)
    v = h(th)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if scale < 1e-13:
        return QuotientCritical((), True)
    roots = []
    for i in range(samples):
        a, b = th[i], th[i + 1]
        if v[i] == 0:
            roots.append(a)
        elif v[i] * v[i + 1] < 0:
            roots.append(brentq(lambda t: float(h(np.array([t]))[0]), a, b, xtol=1e-14))
    # touching roots: local minima of |h| that reach zero
    for i in range(1, samples):
        if abs(v[i]) < abs(v[i - 1]) and abs(v[i]) <= abs(v[i + 1]) and v[i - 1] * v[i + 1] > 0:
            r = minimize_scalar(lambda t: abs(float(h(np.array([t]))[0])),
                                bounds=(th[i - 1], th[i + 1]), method="bounded",
                                options={"xatol": 1e-13})
            if r.fun < 1e-10 * scale:
                roots.append(float(r.x))
    uniq = []
    for r in sorted(r % (2 * math.pi) for r in roots):
        if not uniq or r - uniq[-1] > 1e-10:
            uniq.append(r)
    if len(uniq) > 1 and uniq[0] + 2 * math.pi - uniq[-1] <= 1e-10:
        uniq.pop()
    roots = uniq
    if not roots:
        raise ContractViolation("no circle critical point found for a same-degree quotient")
    return QuotientCritical(tuple(roots), False)


def random_blaschke(rng: np.random.Generator, degree: int, radius: float = 0.9) -> BlaschkeProduct:
    """Zeros uniform in the disk of the given radius, random unimodular constant."""
    r = radius * np.sqrt(rng.random(degree))
    t = 2 * math.pi * rng.random(degree)
    lam = np.exp(2j * math.pi * rng.random())
    return BlaschkeProduct(lam, tuple(r * np.exp(1j * t)))
