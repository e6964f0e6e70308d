"""Command-line front end: fingerprint, trace, weld, rado, verify."""
import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import shapes_io as sio
from .lemniscate import poly_fingerprint, rational_fingerprint
from .polygon import polygon_fingerprint
from .quaddiff import (QuadDiffError, QuadDifferential, classify_local_structure,
                       critical_modulated_graph, divisor_check, is_infinite, local_scale,
                       trace_from_critical, trace_trajectory)
from .riemannmap import (JordanCurve, check_homeomorphism, fingerprint_oracle, mobius_fit,
                         rado_sequence)
from .welding import (CoordinationError, PlacementError, check_coordinated, choose_representatives,
                      qd_welding_functions, welding_fingerprint)

log = logging.getLogger("qdfingerprint")

TWO_PI = 2 * math.pi
TOL_ENV = "QDFINGERPRINT_TOL"
DEFAULTS = {"residual": 1e-6, "oracle": 1e-3, "coordination": 1e-6, "table": 1e-9, "rado": 1e-3}
CERT_FORMAT = "qdfingerprint-certificate"


class UsageError(Exception):
    pass


def _check(value, tol, ok=None):
    value = float(value)
    passed = bool(value < tol) if ok is None else bool(ok)
    return {"value": value, "tol": float(tol), "pass": passed}


def _flag(ok: bool):
    return _check(0.0 if ok else 1.0, 0.5)


def resolve_tolerances(meta: dict, tol=None, oracle_tol=None) -> dict:
    """Flag beats descriptor metadata beats the environment beats the default."""
    out = dict(DEFAULTS)
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            out["residual"] = float(env)
        except ValueError:
            raise UsageError(f"{TOL_ENV} must be a number") from None
    out.update(meta.get("tolerances", {}))
    if tol is not None:
        out["residual"] = float(tol)
    if oracle_tol is not None:
        out["oracle"] = float(oracle_tol)
    return out


def _wrap(x):
    return np.remainder(np.asarray(x) + math.pi, TWO_PI) - math.pi


# computations shared by fingerprint, weld and verify

class Computed:
    def __init__(self, fp, checks, curve=None, equation=None, info=None):
        self.fp = fp
        self.checks = checks
        self.curve = curve
        # equation(theta, psi) -> sup residual of a derivative-free identity
        self.equation = equation
        self.info = info or {}


def _divisor_checks(checks, **qds):
    for name, Q in qds.items():
        r = divisor_check(Q)
        checks[f"divisor_{name}"] = _check(abs(r.p - r.q - 4), 0.5, r.ok and r.p - r.q == 4)


def _blaschke_equation(A, B):
    def eq(theta, psi):
        return float(np.max(np.abs(A(np.exp(1j * np.asarray(psi))) - B(np.exp(1j * np.asarray(theta))))))
    return eq


def _pair_equation(Qm, Qp, theta0, psi0):
    try:
        wf = qd_welding_functions(Qm, Qp, theta0, psi0)
    except (QuadDiffError, CoordinationError, ValueError):
        return None

    def eq(theta, psi):
        b = wf.B(np.asarray(theta))
        return float(np.max(np.abs(wf.A(np.asarray(psi)) - b) / (1 + np.abs(b))))
    return eq


def compute_fingerprint(desc: sio.ShapeDescriptor, tols: dict, samples: int = 512,
                        oracle: bool = False, representatives=None) -> Computed:
    obj = sio.build(desc)
    kind = desc.kind
    checks = {}
    if kind in ("polynomial", "rational"):
        cert = poly_fingerprint(obj) if kind == "polynomial" else rational_fingerprint(obj)
        fp = cert.fingerprint
        curve = cert.info["report"].curve
        checks["residual"] = _check(cert.residual, tols["residual"])
        checks["consistency"] = _check(cert.consistency, tols["residual"])
        if oracle:
            fo = fingerprint_oracle(curve, fp.normalization["base_point"])
            checks["oracle_sup"] = _check(mobius_fit(fo, fp)["sup"], tols["oracle"])
        out = Computed(fp, checks, curve, _blaschke_equation(cert.A, cert.B))
    elif kind == "polyline-curve":
        fp = fingerprint_oracle(obj)
        sc = fp.normalization.get("self_convergence")
        if sc is not None:
            checks["self_convergence"] = _check(sc, tols["residual"])
        out = Computed(fp, checks, obj)
    elif kind in ("cartesian-polygon", "polar-polygon"):
        f = polygon_fingerprint(obj, tol=tols["coordination"])
        fp = f.fingerprint
        checks["welding_residual"] = _check(f.result.residual, tols["residual"])
        checks["coordination"] = _check(float(np.max(f.coordination.residuals)), tols["coordination"])
        checks["single_equation_gap"] = _check(fp.normalization["single_equation_gap"], tols["residual"])
        _divisor_checks(checks, minus=f.Q_minus, plus=f.Q_plus)
        if oracle:
            fo = fingerprint_oracle(obj.curve, f.pre_minus.center, nodes=256, levels=16, max_doublings=0)
            checks["oracle_sup"] = _check(mobius_fit(fo, f.oracle_convention())["sup"], tols["oracle"])
        out = Computed(fp, checks, obj.curve, _pair_equation(f.Q_minus, f.Q_plus, 0.0, 0.0))
    elif kind == "quad-differential-pair":
        return compute_weld(desc, tols, samples, representatives)
    else:
        raise UsageError(f"no fingerprint for kind {kind!r}; use trace")
    ok, step, _ = check_homeomorphism(out.fp)
    checks["homeomorphism"] = _flag(ok)
    return out


def compute_weld(desc: sio.ShapeDescriptor, tols: dict, samples: int = 512, representatives=None) -> Computed:
    if desc.kind != "quad-differential-pair":
        raise UsageError("weld needs a quad-differential-pair descriptor")
    obj = sio.build(desc)
    Qm, Qp = obj["Q_minus"], obj["Q_plus"]
    checks = {}
    _divisor_checks(checks, minus=Qm, plus=Qp)
    rep = check_coordinated(Qm, Qp, shift=obj["shift"])
    checks["coordinated"] = _flag(rep.ok)
    if not rep.ok:
        return Computed(None, checks, info={"coordination": {"condition": rep.condition,
                                                             "arc": rep.arc_index,
                                                             "message": rep.message}})
    reps = dict(obj["representatives"])
    reps.update(representatives or {})
    # lists per arc, None for the default choice
    over = {s: {j: v for j, v in enumerate(reps.get(s) or []) if v is not None} for s in ("minus", "plus")}
    whole = len(rep.pair.arcs_minus) == 1 and rep.pair.arcs_minus[0].whole_circle
    if "A" in obj and whole and 0 not in over["plus"]:
        # free representative on the plus side: the angle where A takes the value B has at the minus one
        t0 = float(over["minus"].get(0, 0.0))
        psi0 = float(obj["A"].solve_phase(float(obj["B"].circle_phase(t0))))
        over["plus"][0] = math.remainder(psi0, TWO_PI)
    try:
        pair = choose_representatives(rep.pair, over["minus"], over["plus"])
    except PlacementError as e:
        raise UsageError(str(e)) from None
    res = welding_fingerprint(pair)
    fp = res.fingerprint
    checks["welding_residual"] = _check(res.residual, tols["residual"])
    ok, _, _ = check_homeomorphism(fp)
    checks["homeomorphism"] = _flag(ok)
    equation = None
    if "A" in obj:
        equation = _blaschke_equation(obj["A"], obj["B"])
        th = TWO_PI * np.arange(samples) / samples
        checks["equation"] = _check(equation(th, fp(th)), tols["residual"])
    else:
        th0 = 0.0
        equation = _pair_equation(Qm, Qp, th0, float(fp(np.array([th0]))[0]))
    info = {"representatives": {"minus": list(pair.reps_minus), "plus": list(pair.reps_plus)},
            "shift": pair.shift, "arcs": len(pair.arcs_minus)}
    return Computed(fp, checks, None, equation, info)


def _certificate(command, desc, comp: Computed, samples, csv_name, tols):
    checks = dict(comp.checks)
    cert = {"format": CERT_FORMAT, "version": 1, "command": command,
            "shape": sio.to_json_object(desc), "samples": samples, "csv": csv_name,
            "tolerances": tols, "checks": checks,
            "pass": all(c["pass"] for c in checks.values())}
    if comp.info:
        cert["info"] = comp.info
    return cert


def _prefix(args, input_path: str) -> Path:
    if args.out:
        return Path(args.out)
    p = Path(input_path)
    return p.with_suffix("") if p.suffix else p


def _read_descriptor(path: str) -> sio.ShapeDescriptor:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    return sio.parse(text)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _emit(command, args, desc, comp, tols) -> int:
    prefix = _prefix(args, args.input)
    csv_path = prefix.with_name(prefix.name + ".csv")
    cert_path = prefix.with_name(prefix.name + ".cert.json")
    if comp.fp is not None:
        _write(csv_path, sio.export_fingerprint_csv(comp.fp, args.samples))
        name = csv_path.name
    else:
        name = None
    cert = _certificate(command, desc, comp, args.samples, name, tols)
    _write(cert_path, sio.dumps(cert))
    if args.svg and comp.curve is not None:
        _write(Path(args.svg), sio.render_svg([comp.curve], options={"title": desc.metadata.get("name")}))
    for k in sorted(cert["checks"]):
        c = cert["checks"][k]
        print(f"{k}: {c['value']:.3e} (tol {c['tol']:.1e}) {'pass' if c['pass'] else 'FAIL'}")
    print(f"{'PASS' if cert['pass'] else 'FAIL'} {cert_path}")
    return 0 if cert["pass"] else 1


def cmd_fingerprint(args) -> int:
    desc = _read_descriptor(args.input)
    tols = resolve_tolerances(desc.metadata, args.tol, args.oracle_tol)
    log.info("fingerprint of a %s", desc.kind)
    comp = compute_fingerprint(desc, tols, args.samples, args.oracle)
    return _emit("fingerprint", args, desc, comp, tols)


def _parse_reps(text):
    if text is None:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(None if tok in ("", "auto") else float(tok))
    return out


def cmd_weld(args) -> int:
    desc = _read_descriptor(args.input)
    tols = resolve_tolerances(desc.metadata, args.tol)
    reps = {}
    for side, text in (("minus", args.rep_minus), ("plus", args.rep_plus)):
        r = _parse_reps(text)
        if r is not None:
            reps[side] = r
    comp = compute_weld(desc, tols, args.samples, reps)
    if comp.fp is None:
        c = comp.info["coordination"]
        print(f"not coordinated: condition {c['condition']} on arc {c['arc']}: {c['message']}")
    return _emit("weld", args, desc, comp, tols)


# trace

def _same_arc(a, b, scale):
    pa, pb = a.path.points, b.path.points
    mid = pa[pa.size // 2]
    return float(np.min(np.abs(pb - mid))) < 1e-4 * scale


def critical_trajectories(Q: QuadDifferential, kinds=("trajectory",), region: str = "all"):
    """Critical trajectories leaving the zeros and simple poles of Q, each
    traced once (an arc joining two critical points is found from both
    ends and kept once)."""
    arcs = []
    scale = local_scale(Q)
    for p, m in Q.finite:
        if m < -1:
            continue
        base = classify_local_structure(Q, p).directions
        for kind in kinds:
            # orthogonal directions are the trajectory directions turned by pi/(m+2)
            shift = 0.0 if kind == "trajectory" else math.pi / (m + 2)
            for d in base:
                arc = trace_from_critical(Q, p, d + shift, kind=kind)
                if region == "disk" and np.any(np.abs(arc.path.points) > 1 + 1e-6):
                    continue
                if any(o.kind == kind and _same_arc(arc, o, scale) for o in arcs):
                    continue
                arcs.append(arc)
    return arcs


def seeded_trajectories(Q: QuadDifferential, angles, radii, kind="trajectory"):
    out = []
    for t in angles:
        for r in radii:
            z = r * complex(math.cos(t), math.sin(t))
            a = trace_trajectory(Q, z, kind, direction=1)
            if not a.closed:
                b = trace_trajectory(Q, z, kind, direction=-1)
                pts = np.concatenate([b.path.points[::-1], a.path.points[1:]])
                a.path.points = pts
            out.append(a)
    return out


def _point_json(cp):
    if cp is None:
        return None
    return "inf" if is_infinite(cp.location) else cp.location


def trace_report(Q: QuadDifferential, crit_arcs, seeded) -> dict:
    cps = [{"point": "inf" if is_infinite(p) else p, "order": m} for p, m in Q.divisor]
    trajs = []
    for cls, arcs in (("critical", crit_arcs), ("seeded", seeded)):
        for a in arcs:
            trajs.append({"class": cls, "kind": a.kind, "start": _point_json(a.start),
                          "end": _point_json(a.end), "q_length": a.q_length, "closed": a.closed,
                          "complete": a.complete, "points": int(a.path.points.size)})
    out = {"critical_points": cps, "trajectories": trajs}
    try:
        g = critical_modulated_graph(Q)
        out["graph"] = {"vertices": len(g.vertices), "edges": [e.weight for e in g.edges],
                        "faces": [{"kind": f.kind, "totals": list(f.totals), "height": f.height,
                                   "module": f.module} for f in g.faces]}
    except (QuadDiffError, ValueError) as e:
        out["graph"] = {"error": str(e)}
    return out


def cmd_trace(args) -> int:
    desc = _read_descriptor(args.input)
    obj = sio.build(desc)
    if desc.kind == "quad-differential":
        Q = obj
    elif desc.kind == "quad-differential-pair":
        Q = obj["Q_minus"] if args.side == "minus" else obj["Q_plus"]
    else:
        raise UsageError("trace needs a quad-differential or a quad-differential-pair")
    kinds = ("trajectory", "orthogonal") if args.orthogonal else ("trajectory",)
    crit = critical_trajectories(Q, kinds, args.region)
    radii = [float(x) for x in args.seed_radii.split(",")] if args.seed_angle else []
    seeded = seeded_trajectories(Q, args.seed_angle or [], radii)
    rep = trace_report(Q, crit, seeded)
    text = sio.dumps(rep)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.svg:
        trajs = [(a.path.points, "critical-trajectory" if a.kind == "trajectory" else "orthogonal")
                 for a in crit] + [(a.path.points, a.kind) for a in seeded]
        view = None
        if args.view:
            view = [float(x) for x in args.view.split(",")]
        _write(Path(args.svg), sio.render_svg([], trajs, Q.finite, {"view": view}))
    return 0


# rado

def _corner_points(curve: JordanCurve):
    return [complex(curve.pieces[j].z(np.array([0.0]))[0]) for j in curve.corners()]


def cmd_rado(args) -> int:
    desc = _read_descriptor(args.input)
    obj = sio.build(desc)
    if desc.kind == "polyline-curve":
        curve = obj
    elif desc.kind in ("cartesian-polygon", "polar-polygon"):
        curve = obj.curve
    else:
        raise UsageError("rado needs a curve or polygon descriptor")
    tols = resolve_tolerances(desc.metadata, args.tol)
    ns = [int(x) for x in args.schedule.split(",")]
    eps = [2.0 ** -n for n in ns]
    points = [] if curve.periodic else _corner_points(curve)
    r = rado_sequence(curve, points, eps, nodes=args.nodes, levels=args.levels, max_doublings=0)
    lines = ["eps,gap"] + [f"{sio._g17(e)},{sio._g17(g)}" for e, g in zip(r.eps[1:], r.gaps)]
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(Path(args.out), text)
    sys.stdout.write(text)
    flat = all(g < tols["rado"] for g in r.gaps)
    ok = (flat or r.monotone) and r.final_gap < tols["rado"]
    print(f"{'PASS' if ok else 'FAIL'} monotone={r.monotone} final_gap={r.final_gap:.3e} "
          f"(tol {tols['rado']:.1e})", file=sys.stderr)
    return 0 if ok else 1


# verify

def verify_certificate(path: Path, tol=None) -> dict:
    try:
        cert = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read certificate {path}: {e}") from None
    if cert.get("format") != CERT_FORMAT:
        raise UsageError("not a certificate")
    desc = sio.from_json_object(cert["shape"])
    tols = dict(DEFAULTS)
    tols.update(cert.get("tolerances", {}))
    if tol is not None:
        tols["residual"] = float(tol)
    samples = int(cert["samples"])
    reps = cert.get("info", {}).get("representatives")
    if cert["command"] == "weld" or desc.kind == "quad-differential-pair":
        comp = compute_weld(desc, tols, samples, reps)
    else:
        oracle = "oracle_sup" in cert["checks"]
        comp = compute_fingerprint(desc, tols, samples, oracle)
    checks = dict(comp.checks)
    if cert.get("csv"):
        table = sio.import_fingerprint_csv((Path(path).parent / cert["csv"]).read_text())
        if table.theta.size != samples:
            checks["table_rows"] = _flag(False)
        if comp.fp is None:
            checks["table"] = _flag(False)
        else:
            gap = float(np.max(np.abs(_wrap(table.psi - comp.fp(table.theta)))))
            checks["table"] = _check(gap, tols["table"])
            if comp.equation is not None:
                checks["table_equation"] = _check(comp.equation(table.theta, table.psi), tols["residual"])
    elif comp.fp is not None:
        checks["table"] = _flag(False)
    return {"certificate": Path(path).name, "checks": checks,
            "pass": all(c["pass"] for c in checks.values())}


def cmd_verify(args) -> int:
    ok = True
    for p in args.certificates:
        rep = verify_certificate(Path(p), args.tol)
        sys.stdout.write(sio.dumps(rep))
        ok &= rep["pass"]
    return 0 if ok else 1


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdfingerprint",
                                 description="Fingerprints of Jordan curves from quadratic differentials.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, oracle=True):
        p.add_argument("input", help="shape descriptor (JSON)")
        p.add_argument("-o", "--out", help="output prefix (default: input path without extension)")
        p.add_argument("--samples", type=int, default=512, help="rows of the fingerprint CSV (default 512)")
        p.add_argument("--tol", type=float, default=None,
                       help=f"residual tolerance (default 1e-6 or ${TOL_ENV})")
        p.add_argument("--svg", help="also render the curve to this SVG file")
        if oracle:
            p.add_argument("--oracle", action="store_true",
                           help="cross-check against the Riemann map oracle after a Mobius fit")
            p.add_argument("--oracle-tol", type=float, default=None, help="oracle tolerance (default 1e-3)")

    p = sub.add_parser("fingerprint", help="fingerprint CSV and JSON certificate for a shape")
    common(p)
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("weld", help="weld a coordinated pair of differentials")
    common(p, oracle=False)
    p.add_argument("--rep-minus", help="comma list of representative angles per arc (auto for default)")
    p.add_argument("--rep-plus", help="comma list of representative angles per arc (auto for default)")
    p.set_defaults(func=cmd_weld)

    p = sub.add_parser("trace", help="critical trajectories and critical graph of a differential")
    p.add_argument("input", help="quad-differential descriptor (JSON)")
    p.add_argument("-o", "--out", help="graph JSON file (default: standard output)")
    p.add_argument("--svg", help="render trajectories to this SVG file")
    p.add_argument("--side", choices=("minus", "plus"), default="minus", help="which differential of a pair")
    p.add_argument("--region", choices=("all", "disk"), default="all",
                   help="disk keeps critical trajectories inside the closed unit disk")
    p.add_argument("--orthogonal", action="store_true", help="also trace critical orthogonal trajectories")
    p.add_argument("--seed-angle", type=float, action="append",
                   help="seed regular trajectories on the ray at this angle (repeatable)")
    p.add_argument("--seed-radii", default="0.5,1,1.5", help="radii of the seeds on each ray")
    p.add_argument("--view", help="xmin,xmax,ymin,ymax of the SVG")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("rado", help="convergence table of corner-surgered fingerprints")
    p.add_argument("input", help="curve or polygon descriptor (JSON)")
    p.add_argument("-o", "--out", help="also write the table to this CSV file")
    p.add_argument("--schedule", default="2,3,4,5,6", help="exponents n of eps = 2^-n (default 2..6)")
    p.add_argument("--tol", type=float, default=None, help="final gap tolerance (default 1e-3)")
    p.add_argument("--nodes", type=int, default=256)
    p.add_argument("--levels", type=int, default=16)
    p.set_defaults(func=cmd_rado)

    p = sub.add_parser("verify", help="re-run the checks of certificates")
    p.add_argument("certificates", nargs="+", help="certificate JSON files")
    p.add_argument("--tol", type=float, default=None, help="override the residual tolerance")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if getattr(args, "samples", 2) < 2:
        print("error: --samples must be at least 2", file=sys.stderr)
        return 2
    if getattr(args, "tol", None) is not None and args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, sio.ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (QuadDiffError, ValueError, RuntimeError) as e:
        # the shape parsed but the pipeline cannot handle it (not analytic, not simple, ...)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
