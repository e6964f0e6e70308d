"""Shape descriptors, fingerprint tables and SVG renders as text.

Everything here is a pure text transform: identical inputs give
byte-identical outputs.
"""
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

from .blaschke import BlaschkeProduct, RationalMap
from .polygon import CartesianPolygon, PolarPolygon
from .quaddiff import QuadDifferential, TrajectoryArc, is_infinite
from .riemannmap import Fingerprint, JordanCurve

TWO_PI = 2 * math.pi

KINDS = ("polyline-curve", "polynomial", "rational", "cartesian-polygon", "polar-polygon",
         "quad-differential", "quad-differential-pair")


class ParseError(ValueError):
    def __init__(self, message, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ShapeDescriptor:
    kind: str
    payload: dict
    metadata: dict = field(default_factory=dict)


# scalar codecs

def _finite(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError("expected a number", path)
    if not math.isfinite(x):
        raise ParseError("numbers must be finite", path)
    return float(x)


def _complex(x, path) -> complex:
    """A real number or a [re, im] pair."""
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ParseError("complex numbers are [re, im] pairs", path)
        return complex(_finite(x[0], path + "[0]"), _finite(x[1], path + "[1]"))
    return complex(_finite(x, path), 0.0)


def _int(x, path) -> int:
    if isinstance(x, bool):
        raise ParseError("expected an integer", path)
    if isinstance(x, int):
        return x
    if isinstance(x, float) and math.isfinite(x) and x == int(x):
        return int(x)
    raise ParseError("expected an integer", path)


def _list(x, path, min_len=0):
    if not isinstance(x, list):
        raise ParseError("expected a list", path)
    if len(x) < min_len:
        raise ParseError(f"need at least {min_len} entries", path)
    return x


def _obj(x, path):
    if not isinstance(x, dict):
        raise ParseError("expected an object", path)
    return x


def _only(d, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ParseError(f"unknown field {extra[0]!r}", path)


def _enc(z):
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def _num(x):
    x = float(x)
    return 0.0 if x == 0 else x


# per-kind schemas: parse -> normalized payload, encode -> JSON object

def _parse_qd(d, path):
    d = _obj(d, path)
    _only(d, ("constant", "divisor"), path)
    if "constant" not in d or "divisor" not in d:
        raise ParseError("a differential needs constant and divisor", path)
    c = _complex(d["constant"], path + ".constant")
    if c == 0:
        raise ParseError("constant must be nonzero", path + ".constant")
    div = []
    for i, e in enumerate(_list(d["divisor"], path + ".divisor")):
        p = f"{path}.divisor[{i}]"
        e = _obj(e, p)
        _only(e, ("point", "order"), p)
        div.append((_complex(e.get("point"), p + ".point"), _int(e.get("order"), p + ".order")))
    return {"constant": c, "divisor": div}


def _enc_qd(q):
    return {"constant": _enc(q["constant"]),
            "divisor": [{"point": _enc(p), "order": int(m)} for p, m in q["divisor"]]}


def _parse_blaschke(d, path):
    d = _obj(d, path)
    _only(d, ("lam", "zeros"), path)
    lam = _complex(d.get("lam", 1.0), path + ".lam")
    zs = [_complex(z, f"{path}.zeros[{i}]") for i, z in enumerate(_list(d.get("zeros"), path + ".zeros", 1))]
    if abs(abs(lam) - 1) > 1e-12:
        raise ParseError("lam must be unimodular", path + ".lam")
    if any(abs(z) >= 1 for z in zs):
        raise ParseError("zeros must lie inside the unit disk", path + ".zeros")
    return {"lam": lam, "zeros": zs}


def _enc_blaschke(b):
    return {"lam": _enc(b["lam"]), "zeros": [_enc(z) for z in b["zeros"]]}


def _parse_payload(kind, d, path):
    d = _obj(d, path)
    if kind == "polyline-curve":
        _only(d, ("points", "corners"), path)
        pts = [_complex(z, f"{path}.points[{i}]") for i, z in enumerate(_list(d.get("points"), path + ".points", 3))]
        corners = [_int(c, f"{path}.corners[{i}]") for i, c in enumerate(_list(d.get("corners", []), path + ".corners"))]
        if any(c < 0 or c >= len(pts) for c in corners):
            raise ParseError("corner index out of range", path + ".corners")
        return {"points": pts, "corners": corners}
    if kind == "polynomial":
        _only(d, ("coeffs",), path)
        cf = [_complex(z, f"{path}.coeffs[{i}]") for i, z in enumerate(_list(d.get("coeffs"), path + ".coeffs", 2))]
        if cf[-1] == 0:
            raise ParseError("leading coefficient must be nonzero", path + ".coeffs")
        return {"coeffs": cf}
    if kind == "rational":
        _only(d, ("constant", "zeros", "poles"), path)
        return {"constant": _complex(d.get("constant", 1.0), path + ".constant"),
                "zeros": [_complex(z, f"{path}.zeros[{i}]") for i, z in enumerate(_list(d.get("zeros", []), path + ".zeros"))],
                "poles": [_complex(z, f"{path}.poles[{i}]") for i, z in enumerate(_list(d.get("poles", []), path + ".poles"))]}
    if kind == "cartesian-polygon":
        _only(d, ("vertices",), path)
        v = [_complex(z, f"{path}.vertices[{i}]") for i, z in enumerate(_list(d.get("vertices"), path + ".vertices", 4))]
        if len(v) % 2:
            raise ParseError("a right-angled polygon has an even number of vertices", path + ".vertices")
        return {"vertices": v}
    if kind == "polar-polygon":
        _only(d, ("radii", "angles"), path)
        r = [_finite(x, f"{path}.radii[{i}]") for i, x in enumerate(_list(d.get("radii"), path + ".radii", 4))]
        t = [_finite(x, f"{path}.angles[{i}]") for i, x in enumerate(_list(d.get("angles"), path + ".angles", 4))]
        if len(r) != len(t):
            raise ParseError("radii and angles differ in length", path)
        if len(r) % 2:
            raise ParseError("a polar polygon has an even number of vertices", path + ".radii")
        if any(x <= 0 for x in r):
            raise ParseError("radii must be positive", path + ".radii")
        return {"radii": r, "angles": t}
    if kind == "quad-differential":
        return _parse_qd(d, path)
    if kind == "quad-differential-pair":
        _only(d, ("minus", "plus", "A", "B", "shift", "representatives"), path)
        out = {}
        if "minus" in d or "plus" in d:
            if "A" in d or "B" in d:
                raise ParseError("give either minus/plus or A/B", path)
            out["minus"] = _parse_qd(d.get("minus"), path + ".minus")
            out["plus"] = _parse_qd(d.get("plus"), path + ".plus")
        elif "A" in d and "B" in d:
            out["A"] = _parse_blaschke(d["A"], path + ".A")
            out["B"] = _parse_blaschke(d["B"], path + ".B")
        else:
            raise ParseError("a pair needs minus and plus (or Blaschke A and B)", path)
        if d.get("shift") is not None:
            out["shift"] = _int(d["shift"], path + ".shift")
        if d.get("representatives") is not None:
            reps = _obj(d["representatives"], path + ".representatives")
            _only(reps, ("minus", "plus"), path + ".representatives")
            for side in ("minus", "plus"):
                if reps.get(side) is not None:
                    p = f"{path}.representatives.{side}"
                    out.setdefault("representatives", {})[side] = [
                        None if x is None else _finite(x, f"{p}[{i}]") for i, x in enumerate(_list(reps[side], p))]
        return out
    raise ParseError(f"unknown kind {kind!r}", "$.kind")


def _encode_payload(kind, p):
    if kind == "polyline-curve":
        return {"points": [_enc(z) for z in p["points"]], "corners": [int(c) for c in p["corners"]]}
    if kind == "polynomial":
        return {"coeffs": [_enc(z) for z in p["coeffs"]]}
    if kind == "rational":
        return {"constant": _enc(p["constant"]), "zeros": [_enc(z) for z in p["zeros"]],
                "poles": [_enc(z) for z in p["poles"]]}
    if kind == "cartesian-polygon":
        return {"vertices": [_enc(z) for z in p["vertices"]]}
    if kind == "polar-polygon":
        return {"radii": [_num(x) for x in p["radii"]], "angles": [_num(x) for x in p["angles"]]}
    if kind == "quad-differential":
        return _enc_qd(p)
    out = {}
    if "minus" in p:
        out["minus"] = _enc_qd(p["minus"])
        out["plus"] = _enc_qd(p["plus"])
    else:
        out["A"] = _enc_blaschke(p["A"])
        out["B"] = _enc_blaschke(p["B"])
    if "shift" in p:
        out["shift"] = int(p["shift"])
    if "representatives" in p:
        out["representatives"] = {s: [None if x is None else _num(x) for x in v]
                                  for s, v in p["representatives"].items()}
    return out


def _parse_metadata(d, path="$.metadata"):
    d = _obj(d, path)
    _only(d, ("name", "tolerances"), path)
    out = {}
    if "name" in d:
        if not isinstance(d["name"], str):
            raise ParseError("name must be a string", path + ".name")
        out["name"] = d["name"]
    if "tolerances" in d:
        tol = _obj(d["tolerances"], path + ".tolerances")
        out["tolerances"] = {}
        for k in sorted(tol):
            v = _finite(tol[k], f"{path}.tolerances.{k}")
            if v <= 0:
                raise ParseError("tolerances must be positive", f"{path}.tolerances.{k}")
            out["tolerances"][k] = v
    return out


def parse(text: str) -> ShapeDescriptor:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON ({e.msg} at line {e.lineno})") from None
    return from_json_object(d)


def from_json_object(d) -> ShapeDescriptor:
    d = _obj(d, "$")
    _only(d, ("kind", "payload", "metadata"), "$")
    kind = d.get("kind")
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}", "$.kind")
    payload = _parse_payload(kind, d.get("payload"), "$.payload")
    meta = _parse_metadata(d.get("metadata", {}))
    return ShapeDescriptor(kind, payload, meta)


def to_json_object(desc: ShapeDescriptor) -> dict:
    out = {"kind": desc.kind, "payload": _encode_payload(desc.kind, desc.payload)}
    if desc.metadata:
        out["metadata"] = dict(desc.metadata)
    return out


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, shortest round-trip floats."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def serialize(desc: ShapeDescriptor) -> str:
    return dumps(to_json_object(desc))


def _plain(x):
    """JSON-ready copy: numpy scalars unwrapped, complex as [re, im], non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        if is_infinite(x):
            return "inf"
        return _enc(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return _num(x)
    return x


# descriptors <-> domain objects

def qd_payload(Q: QuadDifferential) -> dict:
    return {"constant": complex(Q.constant), "divisor": [(complex(p), int(m)) for p, m in Q.finite]}


def qd_from_payload(p) -> QuadDifferential:
    return QuadDifferential.from_finite(p["constant"], p["divisor"])


def blaschke_from_payload(p) -> BlaschkeProduct:
    return BlaschkeProduct(p["lam"], tuple(p["zeros"]))


def build(desc: ShapeDescriptor):
    """Domain object for a descriptor: JordanCurve, coefficient list,
    RationalMap, polygon, QuadDifferential or a dict for pairs."""
    p = desc.payload
    k = desc.kind
    if k == "polyline-curve":
        return JordanCurve.from_polyline(p["points"], p["corners"])
    if k == "polynomial":
        return list(p["coeffs"])
    if k == "rational":
        return RationalMap.from_lists(p["constant"], p["zeros"], p["poles"])
    if k == "cartesian-polygon":
        return CartesianPolygon(p["vertices"])
    if k == "polar-polygon":
        return PolarPolygon(p["radii"], p["angles"])
    if k == "quad-differential":
        return qd_from_payload(p)
    out = {"shift": p.get("shift"), "representatives": p.get("representatives", {})}
    if "minus" in p:
        out["Q_minus"] = qd_from_payload(p["minus"])
        out["Q_plus"] = qd_from_payload(p["plus"])
    else:
        from .blaschke import log_derivative_qd
        A = blaschke_from_payload(p["A"])
        B = blaschke_from_payload(p["B"])
        # A o k = B: Q_- comes from B, Q_+ from A
        out.update(A=A, B=B, Q_minus=log_derivative_qd(B.as_rational()),
                   Q_plus=log_derivative_qd(A.as_rational()))
    return out


# fingerprint tables

CSV_HEADER = "theta,k_theta"


def _g17(x) -> str:
    s = format(float(x), ".17g")
    return "0" if s in ("0", "-0") else s


def export_fingerprint_csv(fp: Fingerprint, n: int = 512) -> str:
    """n rows, theta_j = 2 pi j / n, k unwrapped so the second column increases."""
    if n < 2:
        raise ValueError("need at least two samples")
    theta = TWO_PI * np.arange(n) / n
    k = np.asarray(fp(theta), dtype=float)
    # add whole turns only, so the sampled values pass through unchanged
    k = k + TWO_PI * np.round((np.unwrap(k) - k) / TWO_PI)
    if not np.all(np.diff(k) > 0) or k[-1] >= k[0] + TWO_PI:
        raise ValueError("fingerprint is not strictly increasing at the requested samples")
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for t, v in zip(theta, k):
        buf.write(f"{_g17(t)},{_g17(v)}\n")
    return buf.getvalue()


def import_fingerprint_csv(text: str) -> Fingerprint:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if not lines or lines[0] != CSV_HEADER:
        raise ParseError(f"header must be {CSV_HEADER!r}", "line 1")
    th, ps = [], []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise ParseError("expected two columns", f"line {i}")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError("not a number", f"line {i}") from None
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ParseError("numbers must be finite", f"line {i}")
        th.append(a)
        ps.append(b)
    th, ps = np.array(th), np.array(ps)
    if th.size < 2:
        raise ParseError("need at least two rows", "line 2")
    if not (np.all(np.diff(th) > 0) and th[-1] - th[0] < TWO_PI):
        raise ParseError("theta must increase within one period", "column theta")
    if not (np.all(np.diff(ps) > 0) and ps[-1] < ps[0] + TWO_PI):
        raise ParseError("k_theta must increase strictly (mod 2 pi)", "column k_theta")
    return Fingerprint(th, ps, {"source": "csv"})


# SVG

_STYLES = {
    "curve": 'fill="none" stroke="#000000" stroke-width="1.5"',
    "trajectory": 'fill="none" stroke="#1f5fbf" stroke-width="1"',
    "orthogonal": 'fill="none" stroke="#bf3f1f" stroke-width="1" stroke-dasharray="4 2"',
    "critical-trajectory": 'fill="none" stroke="#7f1fbf" stroke-width="1.5"',
}


def _points_of(item):
    if isinstance(item, JordanCurve):
        return item.sample(512).points
    if isinstance(item, TrajectoryArc):
        return item.path.points
    return np.asarray(item, dtype=complex)


def render_svg(curves: Iterable = (), trajectories: Iterable = (), critical_points: Iterable = (),
               options: Optional[dict] = None) -> str:
    """SVG 1.1 picture.

    curves: JordanCurve or closed point arrays.  trajectories: TrajectoryArc
    or (points, kind) with kind trajectory | orthogonal | critical-trajectory.
    critical_points: (z, order) pairs; zeros are discs, poles squares, with
    the order in data-order.  options: width (px), margin (px), view
    (xmin, xmax, ymin, ymax), digits, title.
    """
    opt = {"width": 480, "margin": 12, "digits": 3, "title": None, "view": None}
    opt.update(options or {})
    curves = [np.asarray(_points_of(c), dtype=complex) for c in curves]
    trajs = []
    for t in trajectories:
        if isinstance(t, TrajectoryArc):
            trajs.append((t.path.points, t.kind))
        else:
            pts, kind = t
            trajs.append((np.asarray(_points_of(pts), dtype=complex), kind))
    crits = [(complex(z), int(m)) for z, m in critical_points if not is_infinite(z)]
    for _, kind in trajs:
        if kind not in _STYLES or kind == "curve":
            raise ValueError(f"unknown trajectory kind {kind!r}")
    if opt["view"] is not None:
        x0, x1, y0, y1 = (float(v) for v in opt["view"])
    else:
        allp = [c for c in curves] + [p for p, _ in trajs] + [np.array([z for z, _ in crits])]
        allp = np.concatenate([a[np.isfinite(a)] for a in allp if a.size] or [np.array([0j])])
        x0, x1 = float(allp.real.min()), float(allp.real.max())
        y0, y1 = float(allp.imag.min()), float(allp.imag.max())
        pad = 0.05 * max(x1 - x0, y1 - y0, 1e-9)
        x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    span = max(x1 - x0, y1 - y0)
    w = float(opt["width"])
    m = float(opt["margin"])
    s = (w - 2 * m) / span
    h = m * 2 + (y1 - y0) * s
    wd = m * 2 + (x1 - x0) * s
    dg = int(opt["digits"])

    def f(v):
        r = f"{v:.{dg}f}"
        return "0" if float(r) == 0 else r.rstrip("0").rstrip(".")

    def xy(z):
        return f((z.real - x0) * s + m), f((y1 - z.imag) * s + m)

    def path_d(pts, closed):
        pts = pts[np.isfinite(pts)]
        if pts.size == 0:
            return ""
        cmds = []
        last = None
        for i, z in enumerate(pts):
            a, b = xy(z)
            if (a, b) == last:
                continue
            cmds.append(("M" if not cmds else "L") + a + " " + b)
            last = (a, b)
        return " ".join(cmds) + (" Z" if closed else "")

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{f(wd)}" height="{f(h)}" '
           f'viewBox="0 0 {f(wd)} {f(h)}">']
    if opt["title"]:
        t = str(opt["title"]).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        out.append(f"<title>{t}</title>")
    for c in curves:
        closed = c.size > 1 and c[0] == c[-1]
        out.append(f'<path class="curve" {_STYLES["curve"]} d="{path_d(c[:-1] if closed else c, True)}"/>')
    for pts, kind in trajs:
        out.append(f'<path class="{kind}" {_STYLES[kind]} d="{path_d(pts, False)}"/>')
    for z, order in crits:
        a, b = xy(z)
        r = 2 + min(abs(order), 6)
        if order > 0:
            out.append(f'<circle class="zero" data-order="{order}" cx="{a}" cy="{b}" r="{r}" '
                       f'fill="#000000"/>')
        else:
            out.append(f'<rect class="pole" data-order="{order}" x="{f(float(a) - r)}" y="{f(float(b) - r)}" '
                       f'width="{2 * r}" height="{2 * r}" fill="none" stroke="#000000"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
