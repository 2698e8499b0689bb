"""Command line: analyze, verify, reconstruct, deform, align.

Exit codes: 0 pass, 2 input-invariant failure, 3 GCR-residual (or check)
failure, 4 integrability refusal.  Machine-readable JSON goes to stdout,
the human table to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import jsonschema
import numpy as np

from . import bonnet as bn
from . import families as fam
from . import minkowski as mk
from . import zoo
from .chart import Chart, GridField, merge_margins, valid_slices
from .errors import IntegrabilityRefused, MoebiusLabError, PointAtInfinity, SchemaError
from .gcr import GCRData, assemble_connection, gcr_data_from_lift, gcr_residuals, residual_sweep
from .immersion import LightConeLift, lift_from_values

EXIT_OK, EXIT_INPUT, EXIT_RESIDUAL, EXIT_REFUSED = 0, 2, 3, 4
TOL_FACTOR = 50.0
FILE_VERSION = 1

# ---------------------------------------------------------------------------
# GcrFile

_NAME = (r"^(u|qM|ns|H|q20|schouten|II0|metric|sigma"
         r"|kappa_[1-9][0-9]*|A_[1-9][0-9]*|beta_[1-3]_[1-9][1-9])$")

_FIELD = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["real", "complex", "matrix"]},
        "dims": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "margins": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "data": {"type": "array", "items": {"type": ["number", "null"]}},
        "hex": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["kind", "dims", "data", "hex"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": FILE_VERSION},
        "type": {"enum": ["gcr", "lift"]},
        "m": {"type": "integer", "minimum": 1, "maximum": 3},
        "n": {"type": "integer", "minimum": 1},
        "order": {"enum": [2, 4]},
        "chart": {
            "type": "object",
            "properties": {
                "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "spacing": {"type": "array", "items": {"type": "number"}},
                "spacing_hex": {"type": "array", "items": {"type": "string"}},
                "periodic": {"type": "array", "items": {"type": "boolean"}},
                "origin": {"type": "array", "items": {"type": "number"}},
                "origin_hex": {"type": "array", "items": {"type": "string"}},
            },
            "required": ["shape", "spacing", "periodic", "origin"],
            "additionalProperties": False,
        },
        "fields": {
            "type": "object",
            "patternProperties": {_NAME: _FIELD},
            "additionalProperties": False,
        },
    },
    "required": ["version", "m", "n", "chart", "fields"],
    "additionalProperties": False,
}


def _dec(x: float):
    return float(x) if math.isfinite(x) else None


def _encode_floats(a) -> tuple:
    flat = np.ascontiguousarray(a, dtype=float).ravel()
    return [_dec(x) for x in flat.tolist()], [float.hex(x) for x in flat.tolist()]


def _decode_floats(dec, hx, what: str) -> np.ndarray:
    if len(dec) != len(hx):
        raise SchemaError(f"{what}: decimal and hex arrays differ in length")
    try:
        vals = [float.fromhex(h) for h in hx]
    except ValueError as e:
        raise SchemaError(f"{what}: bad hex number ({e})") from None
    for d, v in zip(dec, vals):
        if d is not None and d != v:
            raise SchemaError(f"{what}: decimal {d!r} disagrees with hex {float.hex(v)}")
    return np.array(vals, dtype=float)


def _field_entry(f: GridField, kind: str, m: int) -> dict:
    v = f.values
    dims = list(v.shape[m:])
    if kind == "complex":
        v = np.stack([v.real, v.imag], axis=-1)
    dec, hx = _encode_floats(v)
    return {"kind": kind, "dims": dims, "margins": [int(x) for x in f.margins], "data": dec, "hex": hx}


def _chart_doc(ch: Chart) -> dict:
    return {"shape": list(ch.shape), "spacing": list(ch.spacing), "spacing_hex": [float.hex(h) for h in ch.spacing],
            "periodic": list(ch.periodic), "origin": list(ch.origin),
            "origin_hex": [float.hex(o) for o in ch.origin]}


def _chart_from_doc(c: dict) -> Chart:
    sp = _decode_floats(c["spacing"], c.get("spacing_hex", [float.hex(float(x)) for x in c["spacing"]]), "spacing")
    og = _decode_floats(c["origin"], c.get("origin_hex", [float.hex(float(x)) for x in c["origin"]]), "origin")
    return Chart(tuple(c["shape"]), tuple(sp), tuple(c["periodic"]), tuple(og))


def data_to_doc(data: GCRData) -> dict:
    m, k = data.m, data.k
    fields = {}

    def put(name, f, kind):
        if f is not None:
            fields[name] = _field_entry(f, kind, m)

    put("u", data.u, "real")
    put("qM", data.qM, "complex")
    put("ns", data.ns, "real")
    if data.kappa is not None:
        for a in range(k):
            put(f"kappa_{a + 1}", data.kappa.with_values(data.kappa.values[..., a]), "complex")
    if data.A is not None:
        for a in range(k):
            put(f"A_{a + 1}", data.A.with_values(data.A.values[..., a]), "real")
    b = data.beta
    for i in range(m):
        for a in range(k):
            for c in range(a + 1, k):
                put(f"beta_{i + 1}_{a + 1}{c + 1}", b.with_values(b.values[..., i, a, c]), "real")
    put("H", data.H, "real")
    put("q20", data.q20, "complex")
    put("metric", data.metric, "matrix")
    put("schouten", data.schouten, "matrix")
    put("II0", data.II0, "matrix")
    return {"version": FILE_VERSION, "type": "gcr", "m": m, "n": data.n, "order": data.order,
            "chart": _chart_doc(data.chart), "fields": fields}


def lift_to_doc(lift: LightConeLift) -> dict:
    return {"version": FILE_VERSION, "type": "lift", "m": lift.m, "n": lift.n,
            "chart": _chart_doc(lift.chart), "fields": {"sigma": _field_entry(lift.sigma, "real", lift.m)}}


def _skeleton(doc):
    """The document with the bulk arrays emptied (jsonschema is slow on millions of items)."""
    if not (isinstance(doc, dict) and isinstance(doc.get("fields"), dict)):
        return doc, []
    fields, bulk = {}, []
    for name, e in doc["fields"].items():
        if isinstance(e, dict):
            e = dict(e)
            for key in ("data", "hex"):
                if isinstance(e.get(key), list):
                    bulk.append((f"fields/{name}/{key}", key, e[key]))
                    e[key] = []
        fields[name] = e
    return {**doc, "fields": fields}, bulk


def validate_doc(doc) -> None:
    skel, bulk = _skeleton(doc)
    try:
        jsonschema.validate(skel, SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path)
        raise SchemaError(f"schema violation at '{path}': {e.message}") from None
    for path, key, items in bulk:
        if key == "hex":
            ok = all(type(x) is str for x in items)
        else:
            ok = all(x is None or (type(x) in (int, float)) for x in items)
        if not ok:
            raise SchemaError(f"schema violation at '{path}': items must be {'strings' if key == 'hex' else 'numbers'}")


def _read_fields(doc: dict, ch: Chart) -> dict:
    out = {}
    for name, e in doc["fields"].items():
        v = _decode_floats(e["data"], e["hex"], name)
        dims = tuple(e["dims"])
        shp = ch.shape + dims + ((2,) if e["kind"] == "complex" else ())
        if v.size != int(np.prod(shp)):
            raise SchemaError(f"{name}: {v.size} numbers for shape {shp}")
        v = v.reshape(shp)
        if e["kind"] == "complex":
            c = np.empty(shp[:-1], dtype=complex)
            c.real, c.imag = v[..., 0], v[..., 1]
            v = c
        out[name] = GridField(ch, v, e.get("margins"))
    return out


def doc_to_data(doc: dict) -> GCRData:
    validate_doc(doc)
    if doc.get("type", "gcr") != "gcr":
        raise SchemaError("expected a GCR data file")
    m, n = doc["m"], doc["n"]
    k = n - m
    ch = _chart_from_doc(doc["chart"])
    if ch.m != m:
        raise SchemaError("chart dimension does not match m")
    f = _read_fields(doc, ch)
    if "sigma" in f:
        raise SchemaError("field 'sigma' belongs to lift files")
    beta = np.zeros(ch.shape + (m, k, k))
    mgb = [(0,) * m]
    for i in range(m):
        for a in range(k):
            for c in range(a + 1, k):
                name = f"beta_{i + 1}_{a + 1}{c + 1}"
                if name in f:
                    beta[..., i, a, c] = f[name].values
                    beta[..., i, c, a] = -f[name].values
                    mgb.append(f.pop(name).margins)
    known = {f"beta_{i + 1}_{a + 1}{c + 1}" for i in range(m) for a in range(k) for c in range(a + 1, k)}
    stray = [x for x in f if x.startswith("beta_") and x not in known]
    if stray:
        raise SchemaError(f"beta fields {stray} do not fit m = {m}, k = {k}")
    kw = {}
    for name in ("u", "qM", "ns", "H", "q20", "metric", "schouten", "II0"):
        if name in f:
            kw[name] = f.pop(name)
    for stem, key in (("kappa", "kappa"), ("A", "A")):
        parts = [f.pop(f"{stem}_{a + 1}") for a in range(k) if f"{stem}_{a + 1}" in f]
        if parts:
            if len(parts) != k:
                raise SchemaError(f"{stem} needs {k} components")
            kw[key] = GridField(ch, np.stack([p.values for p in parts], axis=-1), merge_margins(*parts))
    if f:
        raise SchemaError(f"fields {sorted(f)} do not fit m = {m}, k = {k}")
    try:
        return GCRData(m, n, ch, GridField(ch, beta, merge_margins(*mgb)), order=doc.get("order", 2), **kw)
    except MoebiusLabError as e:
        raise SchemaError(str(e)) from None


def doc_to_lift(doc: dict) -> LightConeLift:
    validate_doc(doc)
    if doc.get("type") != "lift":
        raise SchemaError("expected a lift file (type 'lift')")
    ch = _chart_from_doc(doc["chart"])
    f = _read_fields(doc, ch)
    if set(f) != {"sigma"}:
        raise SchemaError("a lift file holds exactly the field 'sigma'")
    s = f["sigma"]
    if s.values.shape != ch.shape + (doc["n"] + 2,):
        raise SchemaError("sigma has the wrong number of components")
    return LightConeLift(mk.MinkowskiSpace(doc["n"]), ch, s)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def save_gcr(path: str, data: GCRData) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(data_to_doc(data)))


def load_doc(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not JSON ({e})") from None


def load_gcr(path: str) -> GCRData:
    return doc_to_data(load_doc(path))


def save_lift(path: str, lift: LightConeLift) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(lift_to_doc(lift)))


def load_lift(path: str) -> LightConeLift:
    return doc_to_lift(load_doc(path))


# ---------------------------------------------------------------------------
# meshes

def _valid_chart_and_values(lift: LightConeLift):
    sl = lift.sigma.valid_slices()
    return lift.chart.crop(lift.sigma.margins), lift.sigma.values[sl]


def _header(ch: Chart, n: int) -> str:
    return "# moebius_lab " + json.dumps({"n": n, "chart": _chart_doc(ch)}, separators=(",", ":"))


def _fmt(x: float) -> str:
    return repr(float(x))


def obj_text(lift: LightConeLift, pre=None) -> str:
    """Vertices stereo-projected to R^3 (n = 3) and quad faces (lines for curves)."""
    if lift.n != 3:
        raise SchemaError(f"OBJ export needs n = 3 (got n = {lift.n}); use csv")
    if lift.m == 3:
        raise SchemaError("OBJ export is for curves and surfaces; use csv")
    ch, s = _valid_chart_and_values(lift)
    if pre is not None:
        s = pre.apply(s)
    X = mk.stereo_project(s)
    lines = [_header(ch, lift.n)]
    for p in X.reshape(-1, 3):
        lines.append("v " + " ".join(_fmt(c) for c in p))
    idx = np.arange(ch.size).reshape(ch.shape) + 1
    if ch.m == 1:
        ring = list(idx) + ([idx[0]] if ch.periodic[0] else [])
        lines.append("l " + " ".join(str(int(i)) for i in ring))
    else:
        A, B = ch.shape
        ia = range(A if ch.periodic[0] else A - 1)
        ib = range(B if ch.periodic[1] else B - 1)
        for i in ia:
            for j in ib:
                i1, j1 = (i + 1) % A, (j + 1) % B
                lines.append(f"f {idx[i, j]} {idx[i1, j]} {idx[i1, j1]} {idx[i, j1]}")
    return "\n".join(lines) + "\n"


def csv_text(lift: LightConeLift) -> str:
    ch, s = _valid_chart_and_values(lift)
    N = s.shape[-1]
    lines = [_header(ch, lift.n)]
    lines.append(",".join([f"i{a}" for a in range(ch.m)] + [f"x{c}" for c in range(N)]))
    for node in np.ndindex(*ch.shape):
        lines.append(",".join([str(i) for i in node] + [_fmt(c) for c in s[node]]))
    return "\n".join(lines) + "\n"


def read_mesh(path: str) -> LightConeLift:
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text or not text[0].startswith("# moebius_lab "):
        raise SchemaError(f"{path}: missing moebius_lab chart header")
    head = json.loads(text[0][len("# moebius_lab "):])
    ch = _chart_from_doc(head["chart"])
    n = int(head["n"])
    if path.endswith(".obj"):
        pts = np.array([[float(c) for c in ln.split()[1:4]] for ln in text if ln.startswith("v ")])
        s = mk.stereo_lift(pts)
    else:
        rows = [ln.split(",") for ln in text[2:] if ln.strip()]
        s = np.array([[float(c) for c in r[ch.m:]] for r in rows])
    if s.shape[0] != ch.size:
        raise SchemaError(f"{path}: {s.shape[0]} vertices for a chart of {ch.size} nodes")
    return lift_from_values(s.reshape(ch.shape + (n + 2,)), ch)


# ---------------------------------------------------------------------------
# helpers

def default_tol(chart: Chart, order: int) -> float:
    return TOL_FACTOR * max(chart.spacing) ** order


def subsample(data: GCRData, stride: int) -> GCRData:
    """Every stride-th node; the grid must be compatible with the stride."""
    ch = data.chart
    if stride == 1:
        return data
    shape = []
    for s, p in zip(ch.shape, ch.periodic):
        if (s if p else s - 1) % stride:
            raise SchemaError(f"grid of {s} nodes cannot be subsampled by {stride}")
        shape.append(s // stride if p else (s - 1) // stride + 1)
    ch2 = Chart(tuple(shape), tuple(h * stride for h in ch.spacing), ch.periodic, ch.origin)
    sl = tuple(slice(None, None, stride) for _ in range(ch.m))
    kw = {}
    for name in ("beta", "u", "metric", "qM", "ns", "schouten", "kappa", "II0", "A", "H", "q20"):
        f = getattr(data, name)
        if f is not None:
            kw[name] = GridField(ch2, f.values[sl], tuple(-(-x // stride) for x in f.margins))
    return data.replace(chart=ch2, **kw)


def _parse_convergence(spec: str) -> list:
    """'h,h/2,h/4' -> strides [4, 2, 1] relative to the file's grid."""
    divs = []
    for tok in spec.split(","):
        tok = tok.strip()
        if tok == "h":
            divs.append(1)
        elif tok.startswith("h/") and tok[2:].isdigit() and int(tok[2:]) > 0:
            divs.append(int(tok[2:]))
        else:
            raise SchemaError(f"bad --convergence entry {tok!r} (use h, h/2, h/4, ...)")
    top = max(divs)
    if any(top % d for d in divs) or divs != sorted(divs) or len(set(divs)) != len(divs):
        raise SchemaError("--convergence needs increasing divisors of the finest level, e.g. h,h/2,h/4")
    return [top // d for d in divs]


def _parse_seed(spec: str | None):
    if spec is None or spec == "identity":
        return None
    if spec.startswith("random:"):
        try:
            return int(spec.split(":", 1)[1])
        except ValueError:
            pass
    raise SchemaError(f"bad frame spec {spec!r} (use identity or random:SEED)")


def _table(rows, title) -> str:
    out = [title]
    for name, val, ok in rows:
        out.append(f"  {name:<24s} {val:>12.4e}  {'PASS' if ok else 'FAIL'}")
    return "\n".join(out)


def _emit(report: dict, table: str | None = None) -> None:
    if table:
        print(table, file=sys.stderr)
    print(json.dumps(report, indent=1, sort_keys=True))


def _number(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _extra_params(extra: list) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise SchemaError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise SchemaError(f"parameter {tok} needs a value")
            val = extra[i + 1]
            i += 2
        out[key] = _number(val)
    return out


def _grid(spec: str | None):
    if spec is None:
        return None
    try:
        parts = [int(p) for p in spec.lower().split("x")]
    except ValueError:
        raise SchemaError(f"bad --grid {spec!r} (use N or NxN)") from None
    if len(set(parts)) != 1:
        raise SchemaError("generators use one resolution per axis; pass NxN")
    return parts[0]


# ---------------------------------------------------------------------------
# commands

def _residual_report(data: GCRData, order: int, tol: float) -> tuple:
    rep = gcr_residuals(data, order)
    rows = [(k, v, v <= tol) for k, v in rep.norms.items()]
    failing = rep.failing(tol)
    return rep, rows, failing


def cmd_analyze(args, extra) -> int:
    params = _extra_params(extra)
    N = _grid(args.grid)
    if N is not None:
        params["N"] = N
    fixture = None
    if args.zoo:
        fixture = zoo.generate(args.zoo, **params)
        lift = fixture.lift
    elif args.input:
        if params:
            raise SchemaError("generator parameters need --zoo")
        lift = load_lift(args.input)
    else:
        raise SchemaError("analyze needs --zoo NAME or --input LIFTFILE")
    order = args.order
    checks = []
    if lift is not None:
        lift.check()
        if args.lift_out:
            save_lift(args.lift_out, lift)
        data = gcr_data_from_lift(lift, order)
    else:
        data = fixture.data.replace(order=order)
    tol = args.tol if args.tol is not None else default_tol(data.chart, order)
    rep, rows, failing = _residual_report(data, order, tol)
    checks += rows
    info = {}
    sl = valid_slices(data.chart, data.margins)
    if data.m == 2:
        kap = data.kappa0().values[sl]
        info["II0_max"] = float(2 * np.sqrt(2) * np.max(np.linalg.norm(kap, axis=-1)))
        if data.k == 1:
            iso = fam.isothermic_detect(data)
            info["isothermic"] = "inconclusive" if iso.inconclusive else bool(iso.is_isothermic)
            if iso.is_isothermic and data.q20 is None:
                data = data.replace(q20=iso.q20)
    elif data.m == 3:
        from .congruence import sym_inv_sqrt

        E = sym_inv_sqrt(data.metric.values[sl])
        IIf = np.einsum("...pi,...pqa,...qj->...ija", E, data.II0.values[sl], E)
        info["II0_max"] = float(np.max(np.sqrt(np.sum(IIf**2, axis=(-3, -2, -1))))) if IIf.size else 0.0
    if fixture is not None and fixture.data is not None and lift is not None and data.m == 2:
        ref = fixture.data
        sl2 = valid_slices(data.chart, merge_margins(data.kappa, data.qM))
        k1, k2 = data.kappa0().values[sl2], ref.kappa0().values[sl2]
        dk = min(float(np.max(np.abs(k1 - k2))), float(np.max(np.abs(k1 + k2))))
        dq = float(np.max(np.abs(data.qM.values[sl2] - ref.qM.values[sl2])))
        checks += [("kappa_closed_form", dk, dk <= tol), ("qM_closed_form", dq, dq <= tol)]
    ok = all(c[2] for c in checks)
    if args.out:
        save_gcr(args.out, data)
    report = {"command": "analyze", "source": args.zoo or args.input, "m": data.m, "n": data.n,
              "order": order, "tol": tol, "checks": {c[0]: {"value": c[1], "pass": bool(c[2])} for c in checks},
              "info": info, "status": "PASS" if ok else "FAIL"}
    if failing:
        report["failing"] = failing
    _emit(report, _table(checks, f"analyze {report['source']}: {report['status']}"))
    return EXIT_OK if ok else EXIT_RESIDUAL


def cmd_verify(args, extra) -> int:
    if extra:
        raise SchemaError(f"unexpected arguments {extra}")
    data = load_gcr(args.file)
    order = args.order if args.order is not None else data.order
    tol = args.tol if args.tol is not None else default_tol(data.chart, order)
    rep, rows, failing = _residual_report(data, order, tol)
    report = {"command": "verify", "file": args.file, "order": order, "tol": tol,
              "residuals": {k: float(v) for k, v in rep.norms.items()}, "failing": failing,
              "status": "PASS" if not failing else "FAIL"}
    table = _table(rows, f"verify {args.file}: {report['status']}")
    if args.convergence:
        strides = _parse_convergence(args.convergence)
        subs = [subsample(data, s) for s in strides]
        reps = [gcr_residuals(d, order) for d in subs]
        hs = [max(d.chart.spacing) for d in subs]
        sw = residual_sweep(reps, hs)
        report["convergence"] = {"h": hs, **{k: {"norms": v["norms"],
                                                 "order": v["order"] if math.isfinite(v["order"]) else "exact"}
                                             for k, v in sw.items()}}
        table += "\n  measured orders: " + ", ".join(
            f"{k} {v['order']:.2f}" if math.isfinite(v["order"]) else f"{k} exact" for k, v in sw.items())
    _emit(report, table)
    return EXIT_OK if not failing else EXIT_RESIDUAL


def _reconstruct(data: GCRData, order: int, tol: float, base_frame):
    conn = assemble_connection(data, order)
    F0 = bn.standard_frame(data.n, data.m)
    seed = _parse_seed(base_frame)
    if seed is not None:
        F0 = mk.random_mobius(seed, 0.5, data.n).matrix @ F0
    fr = bn.integrate_frame(conn, F0=F0, threshold=tol, order=order)
    return bn.extract_immersion(fr, data)


def _export(lift, fmt: str, path: str, frame) -> None:
    seed = _parse_seed(frame)
    pre = mk.random_mobius(seed, 0.5, lift.n) if seed is not None else None
    if fmt == "obj":
        try:
            text = obj_text(lift, pre)
        except PointAtInfinity:
            raise SchemaError("the surface meets the projection point; pass --frame random:SEED") from None
    else:
        text = csv_text(lift)
    with open(path, "w") as fh:
        fh.write(text)


def _refused(e: IntegrabilityRefused, data, order, tol) -> int:
    rep = gcr_residuals(data, order)
    report = {"command": "reconstruct", "status": "REFUSED", "message": str(e), "curvature": e.report,
              "residuals": {k: float(v) for k, v in rep.norms.items()}, "failing": rep.failing(tol)}
    _emit(report, f"refused: {e}")
    return EXIT_REFUSED


def cmd_reconstruct(args, extra) -> int:
    if extra:
        raise SchemaError(f"unexpected arguments {extra}")
    data = load_gcr(args.file)
    order = args.order if args.order is not None else data.order
    tol = args.tol if args.tol is not None else default_tol(data.chart, order)
    try:
        lift = _reconstruct(data, order, tol, args.base_frame)
    except IntegrabilityRefused as e:
        return _refused(e, data, order, tol)
    out = args.out or os.path.splitext(args.file)[0] + "." + args.export
    _export(lift, args.export, out, args.frame)
    _emit({"command": "reconstruct", "file": args.file, "mesh": out, "status": "PASS"})
    return EXIT_OK


FAMILIES = {"isothermic": fam.t_transform, "willmore": fam.willmore_family, "mobiusflat": fam.mobius_flat_family}


def cmd_deform(args, extra) -> int:
    if extra:
        raise SchemaError(f"unexpected arguments {extra}")
    data = load_gcr(args.file)
    order = args.order if args.order is not None else data.order
    tol = args.tol if args.tol is not None else default_tol(data.chart, order)
    params = [float(p) for p in args.params.split(",") if p.strip()]
    os.makedirs(args.out, exist_ok=True)
    results, code = [], EXIT_OK
    for i, p in enumerate(params):
        d = FAMILIES[args.family](data, p)
        rep, rows, failing = _residual_report(d, order, tol)
        stem = os.path.join(args.out, f"{args.family}_{i:02d}")
        save_gcr(stem + ".json", d)
        entry = {"param": p, "file": stem + ".json", "residuals": {k: float(v) for k, v in rep.norms.items()},
                 "failing": failing}
        if failing:
            code = max(code, EXIT_RESIDUAL)
        elif args.export:
            try:
                lift = _reconstruct(d, order, tol, args.base_frame)
                _export(lift, args.export, stem + "." + args.export, args.frame)
                entry["mesh"] = stem + "." + args.export
            except IntegrabilityRefused as e:
                entry["refused"] = str(e)
                code = max(code, EXIT_REFUSED)
        results.append(entry)
    status = "PASS" if code == EXIT_OK else "FAIL"
    rows = [(f"{args.family}({r['param']:g})", max(r["residuals"].values(), default=0.0), not r["failing"])
            for r in results]
    _emit({"command": "deform", "family": args.family, "tol": tol, "results": results, "status": status},
          _table(rows, f"deform {args.file}: {status}"))
    return code


def cmd_align(args, extra) -> int:
    if extra:
        raise SchemaError(f"unexpected arguments {extra}")
    l1, l2 = read_mesh(args.mesh1), read_mesh(args.mesh2)
    if l1.chart != l2.chart:
        raise SchemaError("meshes live on different charts")
    order = args.order if args.order is not None else 2
    tol = args.tol if args.tol is not None else default_tol(l1.chart, order)
    T, dist = bn.align_mobius(l1, l2, order=order)
    ok = dist <= tol
    _emit({"command": "align", "distance": dist, "tol": tol, "matrix": T.matrix.tolist(),
           "status": "PASS" if ok else "FAIL"}, _table([("projective distance", dist, ok)], "align"))
    return EXIT_OK if ok else EXIT_RESIDUAL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moebius-lab", description="Moebius geometry of sampled submanifolds.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, order_default=None):
        sp.add_argument("--tol", type=float, default=None, help="residual tolerance (default 50 h^order)")
        sp.add_argument("--order", type=int, choices=(2, 4), default=order_default)

    a = sub.add_parser("analyze", help="extract GCR data from a lift file or a zoo generator")
    a.add_argument("--zoo", help="generator name; further --key value pairs are its parameters")
    a.add_argument("--input", help="lift file")
    a.add_argument("--grid", help="NxN resolution for generators")
    a.add_argument("-o", "--out", help="write the GcrFile here")
    a.add_argument("--lift-out", help="also write the sampled lift")
    common(a, 2)
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="GCR residual report")
    v.add_argument("file")
    v.add_argument("--convergence", help="levels such as h,h/2,h/4 (subsampled from the file)")
    common(v)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("reconstruct", help="integrate the frame and export a mesh")
    r.add_argument("file")
    r.add_argument("--export", choices=("obj", "csv"), default="obj")
    r.add_argument("-o", "--out")
    r.add_argument("--base-frame", default="identity", help="identity or random:SEED")
    r.add_argument("--frame", default=None, help="pre-rotation before projection: random:SEED")
    common(r)
    r.set_defaults(func=cmd_reconstruct)

    d = sub.add_parser("deform", help="spectral deformation over a parameter list")
    d.add_argument("file")
    d.add_argument("--family", choices=sorted(FAMILIES), required=True)
    d.add_argument("--params", required=True, help="comma separated parameter values")
    d.add_argument("-o", "--out", required=True, help="output directory")
    d.add_argument("--export", choices=("obj", "csv"), default=None)
    d.add_argument("--base-frame", default="identity")
    d.add_argument("--frame", default=None)
    common(d)
    d.set_defaults(func=cmd_deform)

    al = sub.add_parser("align", help="Moebius alignment of two meshes on the same chart")
    al.add_argument("mesh1")
    al.add_argument("mesh2")
    common(al)
    al.set_defaults(func=cmd_align)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra and args.command != "analyze":
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return args.func(args, extra)
    except IntegrabilityRefused as e:
        _emit({"error": type(e).__name__, "message": str(e), "report": e.report, "exit_code": EXIT_REFUSED})
        return EXIT_REFUSED
    except (MoebiusLabError, OSError) as e:
        _emit({"error": type(e).__name__, "message": str(e), "exit_code": EXIT_INPUT})
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
