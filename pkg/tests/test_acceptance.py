"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math

import numpy as np
import pytest

from qdfingerprint import shapes_io as sio
from qdfingerprint.blaschke import (BlaschkeProduct, RationalMap, log_derivative_qd,
                                    no_circle_critical_points, quotient_circle_critical,
                                    random_blaschke)
from qdfingerprint.lemniscate import poly_fingerprint, rational_fingerprint
from qdfingerprint.polygon import (CartesianPolygon, PolarPolygon, Prevertices, cartesian_qds,
                                   coordination_residual, polar_qds, polygon_fingerprint,
                                   solve_prevertices_exterior, solve_prevertices_interior)
from qdfingerprint.quaddiff import (QuadDifferential, circle_q_length, critical_modulated_graph,
                                    divisor_check, reflect_extend)
from qdfingerprint.riemannmap import (JordanCurve, check_homeomorphism, corner_surgery,
                                      fingerprint_oracle, mobius_fit,
                                      rado_sequence)
from qdfingerprint.welding import (check_coordinated, choose_representatives, residual_2_4_2,
                                   twist_rotation, welding_fingerprint)

TWO_PI = 2 * math.pi
TH = np.linspace(0.0, TWO_PI, 512, endpoint=False)
ONE = np.array([1.0 + 0j])
SQUARE = CartesianPolygon.centered_rectangle(2, 2)
RECT = CartesianPolygon.centered_rectangle(2, 1)
GRADED = dict(nodes=256, levels=16, max_doublings=0)


def report(record, n, ok, detail):
    line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    record(n, line)
    assert ok, line


def wrap(x):
    return np.remainder(x + math.pi, TWO_PI) - math.pi


def weld(Qm, Qp, om=None, op=None):
    rep = check_coordinated(Qm, Qp)
    assert rep.ok, rep.message
    return welding_fingerprint(choose_representatives(rep.pair, om, op))


def blaschke_qd(B):
    return log_derivative_qd(B.as_rational())


def qf_polynomial(roots):
    """Q_f = -(f'/f)^2 / (4 pi^2) for f = prod (z - r)."""
    roots = np.asarray(roots, dtype=complex)
    crit = np.roots(np.polyder(np.poly(roots)))
    div = [(r, -2) for r in roots] + [(c, 2) for c in crit]
    return QuadDifferential.from_finite(-len(roots) ** 2 / (4 * math.pi ** 2), div)


@pytest.fixture(scope="module")
def square_fp():
    return polygon_fingerprint(SQUARE)


@pytest.fixture(scope="module")
def rect_fp():
    return polygon_fingerprint(RECT)


@pytest.fixture(scope="module")
def lemniscate_certs():
    return [poly_fingerprint([-0.1, 0, 1]), poly_fingerprint([0, 0.2, 0, 1])]


@pytest.fixture(scope="module")
def blaschke_pairs():
    rng = np.random.default_rng(2024)
    out = []
    for i in range(20):
        n = 2 + i % 3
        A = random_blaschke(rng, n, 0.8)
        B = random_blaschke(rng, n, 0.8)
        # equal values at 1, so the default representatives 0 <-> 0 match
        A = BlaschkeProduct(A.lam * B(ONE)[0] / A(ONE)[0], A.zeros)
        out.append((A, B))
    return out


def test_criterion_01_circle_q_length(acceptance):
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(50):
        n = 1 + i % 6
        B = random_blaschke(rng, n)
        worst = max(worst, abs(circle_q_length(blaschke_qd(B)) - n))
    report(acceptance, 1, worst < 1e-8, f"50 Blaschke products, max |L - n| = {worst:.2e} (tol 1e-8)")


def test_criterion_02_divisor_degree(acceptance, square_fp, rect_fp, blaschke_pairs):
    qds = [blaschke_qd(B) for pair in blaschke_pairs for B in pair]
    qds += [square_fp.Q_minus, square_fp.Q_plus, rect_fp.Q_minus, rect_fp.Q_plus]
    ell = CartesianPolygon.l_shape()
    qds += list(cartesian_qds(ell, solve_prevertices_interior(ell), solve_prevertices_exterior(ell)))
    stair = PolarPolygon([2, 2, 1, 1, 3, 3], [0, 2, 2, 4, 4, TWO_PI])
    qds += list(polar_qds(stair, solve_prevertices_interior(stair), solve_prevertices_exterior(stair)))
    qds += [qf_polynomial([0, 1, 3]), reflect_extend(1, [(0.5, 1), (0, -3)]),
            QuadDifferential.from_finite(1.0, [(1.0, 2), (-1.0, -6)])]
    qds += [log_derivative_qd(RationalMap.from_lists(1.0, [0j, 0j], [3.0]))]
    bad = [Q for Q in qds if not (divisor_check(Q).ok and divisor_check(Q).p - divisor_check(Q).q == 4)]
    report(acceptance, 2, not bad, f"{len(qds)} differentials from every constructor, {len(bad)} with p - q != 4")


def test_criterion_03_circle_critical_points(acceptance):
    rng = np.random.default_rng(3)
    none_ok = sum(no_circle_critical_points(random_blaschke(rng, 1 + i % 6)).ok for i in range(100))
    nonempty = 0
    for i in range(100):
        n = 1 + i % 6
        q = quotient_circle_critical(random_blaschke(rng, n), random_blaschke(rng, n))
        nonempty += bool(q.thetas) and not q.identically_critical
    report(acceptance, 3, none_ok == 100 and nonempty == 100,
           f"products without circle critical points {none_ok}/100, quotients with some {nonempty}/100")


def test_criterion_04_polynomial_round_trip(acceptance, lemniscate_certs):
    details, ok = [], True
    for name, n, cert in zip(("z^2-0.1", "z^3+0.2z"), (2, 3), lemniscate_certs):
        k = cert.fingerprint(TH)
        res = float(np.max(np.abs(np.exp(1j * n * k) - cert.B(np.exp(1j * TH)))))
        fo = fingerprint_oracle(cert.info["report"].curve, cert.fingerprint.normalization["base_point"])
        sup = mobius_fit(fo, cert.fingerprint, samples=512)["sup"]
        ok &= res < 1e-6 and sup < 1e-4
        details.append(f"{name}: |k^n - B| = {res:.1e}, oracle {sup:.1e}")
    report(acceptance, 4, ok, "; ".join(details) + " (tol 1e-6, 1e-4)")


def test_criterion_05_rational_equation(acceptance):
    cases = [("z^2-0.1", RationalMap.from_lists(1.0, [math.sqrt(0.1), -math.sqrt(0.1)])),
             ("z^3+0.2z", RationalMap.from_lists(1.0, [0j, 1j * math.sqrt(0.2), -1j * math.sqrt(0.2)])),
             ("z^2/(z-3)", RationalMap.from_lists(1.0, [0j, 0j], [3.0]))]
    details, ok = [], True
    for name, R in cases:
        cert = rational_fingerprint(R)
        k = cert.fingerprint(TH)
        res = float(np.max(np.abs(cert.A(np.exp(1j * k)) - cert.B(np.exp(1j * TH)))))
        ok &= res < 1e-6
        details.append(f"{name}: {res:.1e}")
    report(acceptance, 5, ok, "|A(k) - B|: " + ", ".join(details) + " (tol 1e-6)")


def test_criterion_06_converse_engine(acceptance, blaschke_pairs):
    worst = 0.0
    for A, B in blaschke_pairs:
        r = weld(blaschke_qd(B), blaschke_qd(A))
        k = r.fingerprint(TH)
        worst = max(worst, float(np.max(np.abs(A(np.exp(1j * k)) - B(np.exp(1j * TH))))))
    report(acceptance, 6, worst < 1e-6, f"20 coordinated pairs, max |A(k) - B| = {worst:.2e} (tol 1e-6)")


def test_criterion_07_welding_identity(acceptance):
    quartic = QuadDifferential.from_finite(-1.0, [(-1 + 0j, -4)])
    qs = [QuadDifferential.from_finite(1.0, [(1 + 0j, -2), (-1 + 0j, -2)]),
          QuadDifferential.from_finite(-1j, [(1 + 0j, 1), (-1 + 0j, 1), (0j, -3)]),
          blaschke_qd(BlaschkeProduct(1.0, (0.3, -0.5j, 0.2 + 0.4j))), quartic]
    ident = max(float(np.max(np.abs(wrap(weld(Q, Q).fingerprint(TH) - TH)))) for Q in qs)
    # flat coordinate of -dz^2/(z+1)^4 along the circle: tan(theta/2)/2
    th = np.linspace(-3.0, 3.0, 101)
    spread, resid = 0.0, 0.0
    for rm, rp in ((0.5, -0.3), (0.0, 1.2), (-2.0, 2.5)):
        r = weld(quartic, quartic, {0: rm}, {0: rp})
        d = 0.5 * np.tan(r.fingerprint(th) / 2) - 0.5 * np.tan(th / 2)
        spread = max(spread, float(np.ptp(d)))
        resid = max(resid, residual_2_4_2(r.fingerprint, quartic, quartic))
    ok = ident < 1e-8 and spread < 1e-8 and resid < 1e-6
    report(acceptance, 7, ok, f"identity {ident:.1e} (tol 1e-8); -dz^2/(z+1)^4 translation spread {spread:.1e}, "
                  f"residual {resid:.1e} (tol 1e-6)")


def test_criterion_08_alpha_identity(acceptance):
    worst, positive = 0.0, True
    for beta in (0.0, math.pi / 4, math.pi / 2):
        alpha, I = twist_rotation(1 / 3, beta)
        v = np.exp(1j * alpha) * I * 1j
        worst = max(worst, abs(v.imag))
        positive &= v.real > 0
    report(acceptance, 8, worst < 1e-8 and positive, f"max |Im e^(i alpha) I i| = {worst:.1e}, real parts positive: {positive}")


def test_criterion_09_polygon_vs_oracle(acceptance, square_fp, rect_fp):
    sups = []
    for f in (square_fp, rect_fp):
        poly = SQUARE if f is square_fp else RECT
        o = fingerprint_oracle(poly.curve, f.pre_minus.center, **GRADED)
        sups.append(mobius_fit(o, f.oracle_convention())["sup"])
    quarter = np.exp(1j * np.arange(4) * math.pi / 2)
    pre = max(float(np.max(np.abs(np.exp(1j * p.beta) - quarter)))
              for p in (square_fp.pre_minus, square_fp.pre_plus))
    # for information: the finest surgered member of the Rado sequence
    surg = corner_surgery(SQUARE.curve, list(SQUARE.vertices), 2.0 ** -6)
    so = fingerprint_oracle(surg, square_fp.pre_minus.center, **GRADED)
    sdist = mobius_fit(so, square_fp.oracle_convention())["sup"]
    ok = max(sups) < 1e-3 and pre < 1e-10
    report(acceptance, 9, ok, f"square {sups[0]:.1e}, rectangle {sups[1]:.1e} (tol 1e-3); prevertices {pre:.1e} "
                  f"(tol 1e-10); [info] eps=2^-6 surgered oracle {sdist:.1e}")


def test_criterion_10_coordination_iff(acceptance, square_fp):
    pm, pp = square_fp.pre_minus, square_fp.pre_plus
    base = float(np.max(coordination_residual(pm, pp).residuals))
    moved = Prevertices(pp.beta + np.array([0, 0.01, 0, 0]), pp.side, pp.kind, pp.alphas, pp.scale,
                        pp.gamma, pp.C)
    pert = float(np.max(coordination_residual(pm, moved).residuals))
    report(acceptance, 10, base < 1e-6 and pert > 1e-3, f"unperturbed {base:.1e} (tol 1e-6), perturbed {pert:.1e} (> 1e-3)")


def test_criterion_11_rado_convergence(acceptance):
    eps = [2.0 ** -n for n in range(2, 7)]
    r = rado_sequence(SQUARE.curve, list(SQUARE.vertices), eps, 0j, **GRADED)
    gaps = ", ".join(f"{g:.3g}" for g in r.gaps)
    report(acceptance, 11, r.monotone and r.final_gap < 1e-3,
           f"gaps {gaps}; monotone {r.monotone}, final {r.final_gap:.3g} (tol 1e-3)")


def test_criterion_12_homeomorphisms(acceptance, square_fp, rect_fp, lemniscate_certs, blaschke_pairs):
    fps = [square_fp.fingerprint, rect_fp.fingerprint] + [c.fingerprint for c in lemniscate_certs]
    A, B = blaschke_pairs[0]
    fps.append(weld(blaschke_qd(B), blaschke_qd(A)).fingerprint)
    fps.append(rational_fingerprint(RationalMap.from_lists(1.0, [0j, 0j], [3.0])).fingerprint)
    fps.append(fingerprint_oracle(JordanCurve.ellipse(1.5, 0.7), 0j, nodes=256))
    fps.append(sio.import_fingerprint_csv(sio.export_fingerprint_csv(fps[0], 512)))
    bad = 0
    for fp in fps:
        inc = float(fp(np.array([TWO_PI]))[0] - fp(np.array([0.0]))[0])
        sampled = fp(TH)
        bad += not (check_homeomorphism(fp)[0] and abs(inc - TWO_PI) < 1e-12
                    and np.all(np.diff(sampled) > 0) and sampled[-1] < sampled[0] + TWO_PI)
    worst = 0.0
    ell = CartesianPolygon.l_shape()
    for cur, kw in ((JordanCurve.ellipse(1.2, 0.8), dict(nodes=256)), (ell.curve, GRADED)):
        f1 = fingerprint_oracle(cur, cur.centroid(), **kw)
        for a, b in ((2.5, 1 - 3j), (0.4, 0.25 + 2j)):
            moved = cur.transformed(a, b)
            # the base point is not carried along: the Mobius fit absorbs it
            f2 = fingerprint_oracle(moved, moved.centroid() + 0.05 * a, **kw)
            worst = max(worst, mobius_fit(f1, f2, offset=0.5)["sup"])
    report(acceptance, 12, bad == 0 and worst < 1e-5,
           f"{len(fps)} fingerprints, {bad} not monotone with increment 2 pi; affine change {worst:.1e} (tol 1e-5)")


def test_criterion_13_modulated_graphs(acceptance):
    rng = np.random.default_rng(13)
    walk_gap, mod_gap, rings, done = 0.0, 0.0, 0, 0
    while done < 10:
        n = 3 + done % 2
        roots = rng.uniform(-2, 2, n) + 1j * rng.uniform(-1, 1, n) * (done % 3 == 2)
        f = np.poly(roots)
        crit = np.roots(np.polyder(f))
        levels = np.abs(np.polyval(f, crit))
        if min(np.min(np.abs(np.subtract.outer(roots, roots)) + np.eye(n)),
               np.min(np.abs(np.subtract.outer(levels, levels)) + np.eye(n - 1))) < 0.05:
            continue
        G = critical_modulated_graph(qf_polynomial(roots))
        for ring in G.ring_faces():
            walk_gap = max(walk_gap, abs(ring.totals[0] - ring.totals[1]))
            # boundary levels of the ring from |f| at the critical points on each walk
            c = [float(np.abs(np.polyval(f, G.vertices[G.walk_vertices(w)[0]].location))) for w in ring.walks]
            log_r = abs(math.log(c[1] / c[0])) / ring.totals[0]
            mod_gap = max(mod_gap, abs(ring.module - log_r / TWO_PI))
            rings += 1
        done += 1
    ok = rings > 0 and walk_gap < 1e-6 and mod_gap < 1e-4
    report(acceptance, 13, ok, f"10 differentials, {rings} ring faces; walk totals {walk_gap:.1e} (tol 1e-6), "
                   f"modules {mod_gap:.1e} (tol 1e-4)")
