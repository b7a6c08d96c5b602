"""Batch front end: run named analyses on map and polyline files.

One subcommand per task; every parameter can also come from a JSON config
file whose keys mirror the flags.  Machine-readable outputs are JSON with
sorted keys, plot data is tabular text plus a small SVG, and nothing embeds
timestamps or absolute paths, so reruns on identical inputs are
byte-identical.  Exit codes: 0 success, 2 when any verification came back
Uncertain or a descent was blocked, 1 on errors.
"""

import argparse
import json
import os
import sys
from fractions import Fraction
from math import ceil, floor, gcd, hypot

import numpy as np

from torusdyn import gl2z, lines, periodic, rotset
from torusdyn._kernels import backend
from torusdyn.lift import MapLift, load_map
from torusdyn.lines import (DescentError, DescentReport, MapImageError,
                            PqPolyline, load_line, save_line)
from torusdyn.periodic import RationalVector

__all__ = ["main", "TaskConfig", "execute"]


class CliError(Exception):
    """Bad invocation or bad input file; maps to exit status 1."""


_CONFIG_KEYS = {"task", "map", "line", "n", "grid", "chord-tol", "tol-width",
                "denominator-bound", "min-box", "workers", "out"}

_TASKS = ("estimate-rot", "classify", "normalize", "free-curve-check",
          "wedge", "brouwer-descend", "descend-free-curve", "find-periodic",
          "report")


class TaskConfig:
    """One resolved invocation: task name plus every parameter it may use."""

    def __init__(self, task, map_path=None, line_paths=(), n=None, grid=None,
                 chord_tol=1e-6, tol_width=None, denominator_bound=50,
                 min_box=1e-3, workers=1, out="."):
        if task not in _TASKS:
            raise CliError(f"unknown task {task!r}; choose from "
                           + ", ".join(_TASKS))
        self.task = task
        self.map_path = map_path
        self.line_paths = tuple(line_paths)
        self.n = n
        self.grid = grid
        self.chord_tol = float(chord_tol)
        self.tol_width = None if tol_width is None else float(tol_width)
        self.denominator_bound = int(denominator_bound)
        self.min_box = float(min_box)
        self.workers = int(workers)
        self.out = out


def _read_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"{path}: not found") from None
    except json.JSONDecodeError as err:
        raise CliError(f"{path}:{err.lineno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise CliError(f"{path}: unknown config fields: "
                       + ", ".join(unknown))
    # path entries are relative to the config file, not the working dir
    base = os.path.dirname(os.path.abspath(path))
    for key in ("map", "out"):
        if key in data:
            data[key] = os.path.join(base, data[key])
    if "line" in data:
        entries = data["line"]
        if isinstance(entries, str):
            entries = [entries]
        data["line"] = [os.path.join(base, e) for e in entries]
    return data


def _build_config(args) -> TaskConfig:
    cfg = _read_config(args.config) if args.config else {}
    task = args.task if args.task is not None else cfg.get("task")
    if task is None:
        raise CliError("no task given; pass a subcommand or a config file "
                       "with a \"task\" field")

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        if key in cfg:
            return cfg[key]
        return default

    line = pick(args.line or None, "line", ())
    if isinstance(line, str):
        line = (line,)
    return TaskConfig(
        task,
        map_path=pick(args.map, "map", None),
        line_paths=line,
        n=pick(args.n, "n", None),
        grid=pick(args.grid, "grid", None),
        chord_tol=pick(args.chord_tol, "chord-tol", 1e-6),
        tol_width=pick(args.tol_width, "tol-width", None),
        denominator_bound=pick(args.denominator_bound,
                               "denominator-bound", 50),
        min_box=pick(args.min_box, "min-box", 1e-3),
        workers=pick(args.workers, "workers", 1),
        out=pick(args.out, "out", "."),
    )


# ---------------------------------------------------------------------------
# input loading with file context

def _load_map_file(cfg) -> MapLift:
    if cfg.map_path is None:
        raise CliError(f"task {cfg.task} needs --map")
    path = cfg.map_path
    try:
        return load_map(path)
    except FileNotFoundError:
        raise CliError(f"{path}: not found") from None
    except json.JSONDecodeError as err:
        raise CliError(f"{path}:{err.lineno}: {err.msg}") from None
    except (KeyError, TypeError, ValueError) as err:
        raise CliError(f"{path}: {err}") from None


def _load_line_file(path) -> PqPolyline:
    try:
        l = load_line(path)
    except FileNotFoundError:
        raise CliError(f"{path}: not found") from None
    except json.JSONDecodeError as err:
        raise CliError(f"{path}:{err.lineno}: {err.msg}") from None
    except (KeyError, TypeError, ValueError) as err:
        raise CliError(f"{path}: {err}") from None
    diag = lines.validate(l)
    if not diag.valid:
        raise CliError(f"{path}: line fails validation: "
                       + "; ".join(diag.issues))
    return l


def _need_lines(cfg, count):
    if len(cfg.line_paths) != count:
        word = "file" if count == 1 else "files"
        raise CliError(f"task {cfg.task} needs exactly {count} --line {word}")
    return [_load_line_file(p) for p in cfg.line_paths]


# ---------------------------------------------------------------------------
# deterministic writers

def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _write_tsv(path, header, rows):
    out = ["\t".join(header)]
    for row in rows:
        out.append("\t".join(repr(v) if isinstance(v, float) else str(v)
                             for v in row))
    _write_text(path, "\n".join(out) + "\n")


_PALETTE = ("#1f5fa8", "#c24b2e", "#3c8a4e", "#8858a8", "#946f1f")


def _svg(path, elements):
    """elements: (kind, points, color) with kind polyline|polygon|rect."""
    pts = [p for _, ps, _ in elements for p in ps]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-9)
    pad = 0.05 * span
    x0, x1 = x0 - pad, x1 + pad
    y0, y1 = y0 - pad, y1 + pad
    w = 2.0 * 10.0 ** -3 * span

    def fx(v):
        return format(v, ".6f")

    rows = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{fx(x0)} '
            f'{fx(-y1)} {fx(x1 - x0)} {fx(y1 - y0)}" width="480">']
    for kind, ps, color in elements:
        if kind == "rect":
            (ax, ay), (bx, by) = ps
            rows.append(f'<rect x="{fx(ax)}" y="{fx(-by)}" '
                        f'width="{fx(bx - ax)}" height="{fx(by - ay)}" '
                        f'fill="{color}" fill-opacity="0.35" '
                        f'stroke="{color}" stroke-width="{fx(w)}"/>')
            continue
        coords = " ".join(f"{fx(px)},{fx(-py)}" for px, py in ps)
        fill = color if kind == "polygon" else "none"
        opacity = ' fill-opacity="0.25"' if kind == "polygon" else ""
        rows.append(f'<{kind} points="{coords}" fill="{fill}"{opacity} '
                    f'stroke="{color}" stroke-width="{fx(w)}"/>')
    rows.append("</svg>")
    _write_text(path, "\n".join(rows) + "\n")


def _line_points(l: PqPolyline):
    return [(float(x), float(y)) for x, y in l.vertices]


# ---------------------------------------------------------------------------
# tasks

def _estimate(cfg, f):
    n = cfg.n if cfg.n is not None else 1000
    grid = cfg.grid if cfg.grid is not None else 64
    return rotset.estimate_rotation_set(f, grid, n, workers=cfg.workers)


def _task_estimate_rot(cfg):
    f = _load_map_file(cfg)
    e = _estimate(cfg, f)
    out = cfg.out
    _write_json(os.path.join(out, "estimate-rot.json"),
                {"task": "estimate-rot",
                 "map": os.path.basename(cfg.map_path),
                 "estimate": e.as_dict()})
    rows = [("outer", x, y) for x, y in e.outer_hull]
    rows += [("inner", x, y) for x, y in e.inner_hull]
    _write_tsv(os.path.join(out, "hull.tsv"), ("region", "x", "y"), rows)
    _svg(os.path.join(out, "estimate-rot.svg"),
         [("polygon", list(e.outer_hull), _PALETTE[0]),
          ("polygon", list(e.inner_hull), _PALETTE[2])])
    summary = [f"rotation-set estimate for {os.path.basename(cfg.map_path)}",
               f"  n={e.n} grid={e.grid}",
               f"  outer hull: {len(e.outer_hull)} vertices",
               f"  inner hull: {len(e.inner_hull)} vertices",
               f"  gap: {e.gap!r}"]
    return 0, summary


def _classify(cfg, e):
    kwargs = {"slope_denominator_bound": cfg.denominator_bound}
    if cfg.tol_width is not None:
        kwargs["tol_width"] = cfg.tol_width
    return rotset.classify_rotation_set(e, **kwargs)


def _task_classify(cfg):
    f = _load_map_file(cfg)
    e = _estimate(cfg, f)
    c = _classify(cfg, e)
    crits = [rotset.free_curve_criterion(e, axis) for axis in (1, 2)]
    _write_json(os.path.join(cfg.out, "classify.json"),
                {"task": "classify",
                 "map": os.path.basename(cfg.map_path),
                 "estimate": e.as_dict(),
                 "class": c.as_dict(),
                 "criteria": [r.as_dict() for r in crits]})
    summary = [f"classification: {c.kind}"]
    if c.detail:
        summary.append(f"  {c.detail}")
    for r in crits:
        if r.farey_interval is not None:
            summary.append(f"  axis {r.axis}: {r.disjoint_iterates} disjoint "
                           f"iterates from Farey interval "
                           f"[{r.farey_interval.lo}, {r.farey_interval.hi}]")
        else:
            summary.append(f"  axis {r.axis}: criterion not satisfied "
                           f"(margin {r.margin!r})")
    return (2 if c.kind == "Undecided" else 0), summary


def _matrix_dict(m):
    return [[m.a, m.b], [m.c, m.d]]


def _snap_rational(x, y, bound, tol):
    for q in range(1, bound + 1):
        p1 = round(x * q)
        p2 = round(y * q)
        if gcd(gcd(p1, p2), q) != 1:
            continue
        if hypot(p1 / q - x, p2 / q - y) <= tol:
            return p1, p2, q
    return None


def _task_normalize(cfg):
    f = _load_map_file(cfg)
    e = _estimate(cfg, f)
    c = _classify(cfg, e)
    out = {"task": "normalize", "map": os.path.basename(cfg.map_path),
           "class": c.as_dict()}
    path = os.path.join(cfg.out, "normalize.json")
    if c.kind == "Undecided":
        out["mode"] = "undecided"
        _write_json(path, out)
        return 2, ["classification undecided; nothing to normalize",
                   f"  {c.detail}"]
    if c.kind == "FullDimensional":
        out["mode"] = "not-applicable"
        _write_json(path, out)
        return 0, ["full-dimensional rotation set; no direction to normalize"]
    if c.kind == "SegmentRationalSlope":
        dx, dy = c.direction
        mat = gl2z.vertical_normalizer(dy, dx)
        image = mat.apply((dx, dy))
        out["mode"] = "vertical"
        out["direction"] = [dx, dy]
        out["matrix"] = _matrix_dict(mat)
        out["image"] = list(image)
        _write_json(path, out)
        return 0, [f"segment direction ({dx}, {dy}) mapped to {image}",
                   f"  matrix {_matrix_dict(mat)}"]
    if c.kind == "SegmentIrrationalSlope":
        hull = e.inner_hull if len(e.inner_hull) >= 2 else e.outer_hull
        best = None
        for i, a in enumerate(hull):
            for b in hull[i + 1:]:
                d2 = (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
                if best is None or d2 > best[0]:
                    best = (d2, a, b)
        seg = (tuple(map(Fraction, best[1])), tuple(map(Fraction, best[2])))
        res = gl2z.integer_avoiding_normalizer(seg)
        if isinstance(res, gl2z.Inconclusive):
            out["mode"] = "inconclusive"
            out["reason"] = res.reason
            _write_json(path, out)
            return 2, [f"integer-avoiding normalization inconclusive: "
                       f"{res.reason}"]
        out["mode"] = "integer-avoiding"
        out["matrix"] = _matrix_dict(res.matrix)
        out["axis"] = res.axis
        out["shift"] = [str(s) for s in res.shift]
        out["margin"] = str(res.margin)
        _write_json(path, out)
        return 0, [f"integer-avoiding normalizer found, axis {res.axis}, "
                   f"margin {res.margin}",
                   f"  matrix {_matrix_dict(res.matrix)}"]
    # Point
    cx = sum(v[0] for v in e.outer_hull) / len(e.outer_hull)
    cy = sum(v[1] for v in e.outer_hull) / len(e.outer_hull)
    snap = _snap_rational(cx, cy, cfg.denominator_bound,
                          max(e.gap, 1e-9))
    if snap is not None:
        p1, p2, q = snap
        out["mode"] = "rational-point"
        out["vector"] = {"p1": p1, "p2": p2, "q": q}
        if (p1, p2) == (0, 0):
            out["matrix"] = _matrix_dict(gl2z.IDENT)
            _write_json(path, out)
            return 0, ["rotation vector is zero; identity normalization"]
        g = gcd(p1, p2)
        dx, dy = p1 // g, p2 // g
        mat = gl2z.vertical_normalizer(dy, dx)
        out["direction"] = [dx, dy]
        out["matrix"] = _matrix_dict(mat)
        out["image"] = list(mat.apply((dx, dy)))
        _write_json(path, out)
        return 0, [f"rational point ({Fraction(p1, q)}, {Fraction(p2, q)}); "
                   f"direction ({dx}, {dy}) mapped to {out['image']}"]
    eps = cfg.tol_width if cfg.tol_width is not None else 0.1
    mat = gl2z.shrink_irrational((cx, cy), eps)
    ix, iy = mat.apply((Fraction(cx), Fraction(cy)))
    out["mode"] = "shrink"
    out["epsilon"] = eps
    out["matrix"] = _matrix_dict(mat)
    out["norm"] = float(hypot(ix, iy))
    _write_json(path, out)
    return 0, [f"no rational snap below denominator "
               f"{cfg.denominator_bound}; shrink matrix reaches norm "
               f"{out['norm']!r} < {eps}"]


def _task_free_curve_check(cfg):
    f = _load_map_file(cfg)
    (l,) = _need_lines(cfg, 1)
    res = lines.free_curve_check(f, l, cfg.chord_tol)
    _write_json(os.path.join(cfg.out, "free-curve-check.json"),
                {"task": "free-curve-check",
                 "map": os.path.basename(cfg.map_path),
                 "line": os.path.basename(cfg.line_paths[0]),
                 "chord_tol": cfg.chord_tol,
                 "kind": res.kind,
                 "margin": res.margin,
                 "detail": res.detail})
    summary = [f"free-curve check: {res.kind}"]
    if res.margin is not None:
        summary.append(f"  margin {res.margin!r}")
    if res.detail:
        summary.append(f"  {res.detail}")
    return (0 if res.kind in ("Yes", "No") else 2), summary


def _task_wedge(cfg):
    a, b = _need_lines(cfg, 2)
    if a.pq != b.pq:
        raise CliError("wedge needs two lines of the same (p, q) type, got "
                       f"{a.pq} and {b.pq}")
    w = lines.wedge(a, b)
    save_line(w, os.path.join(cfg.out, "wedge.json"))
    _svg(os.path.join(cfg.out, "wedge.svg"),
         [("polyline", _line_points(a), _PALETTE[0]),
          ("polyline", _line_points(b), _PALETTE[1]),
          ("polyline", _line_points(w), _PALETTE[2])])
    return 0, [f"wedge of {os.path.basename(cfg.line_paths[0])} and "
               f"{os.path.basename(cfg.line_paths[1])}: "
               f"{len(w.vertices)} vertices"]


def _require_n(cfg, minimum):
    if cfg.n is None or cfg.n < minimum:
        raise CliError(f"task {cfg.task} needs --n at least {minimum}")
    return cfg.n


def _task_brouwer_descend(cfg):
    f = _load_map_file(cfg)
    (l,) = _need_lines(cfg, 1)
    n = _require_n(cfg, 2)
    path = os.path.join(cfg.out, "brouwer-descend.json")
    try:
        res = lines.brouwer_descend(f, l, n, cfg.chord_tol)
    except DescentError as err:
        _write_json(path, {"task": "brouwer-descend", "n": n,
                           "chord_tol": cfg.chord_tol,
                           "map": os.path.basename(cfg.map_path),
                           "line": os.path.basename(cfg.line_paths[0]),
                           "outcome": "failed", "detail": str(err)})
        return 2, [f"descent failed: {err}"]
    final = lines.brouwer_check(f, res, cfg.chord_tol)
    save_line(res, os.path.join(cfg.out, "descended-line.json"))
    _write_json(path, {"task": "brouwer-descend", "n": n,
                       "chord_tol": cfg.chord_tol,
                       "map": os.path.basename(cfg.map_path),
                       "line": os.path.basename(cfg.line_paths[0]),
                       "outcome": "descended",
                       "final_check": {"kind": final.kind,
                                       "margin": final.margin,
                                       "detail": final.detail},
                       "vertices": len(res.vertices)})
    _svg(os.path.join(cfg.out, "brouwer-descend.svg"),
         [("polyline", _line_points(l), _PALETTE[0]),
          ("polyline", _line_points(res), _PALETTE[2])])
    code = 0 if final.kind == "Yes" else 2
    return code, [f"descended line: {len(res.vertices)} vertices",
                  f"  final check {final.kind}, margin {final.margin!r}"]


def _task_descend_free_curve(cfg):
    f = _load_map_file(cfg)
    (l,) = _need_lines(cfg, 1)
    n = _require_n(cfg, 2)
    path = os.path.join(cfg.out, "descend-free-curve.json")
    base = {"task": "descend-free-curve", "n": n,
            "chord_tol": cfg.chord_tol,
            "map": os.path.basename(cfg.map_path),
            "line": os.path.basename(cfg.line_paths[0])}
    try:
        res = lines.descend_to_base(f, l, n, cfg.chord_tol)
    except DescentError as err:
        _write_json(path, dict(base, outcome="failed", detail=str(err)))
        return 2, [f"descent failed: {err}"]
    if isinstance(res, DescentReport):
        _write_json(path, dict(base, outcome="blocked",
                               blocked_at=res.blocked_at,
                               detail=res.detail,
                               witnesses=[{"n": w.n,
                                           "start": list(w.start),
                                           "image": list(w.image)}
                                          for w in res.witnesses]))
        return 2, [f"descent blocked at {res.blocked_at}: {res.detail}"]
    final = lines.free_curve_check(f, res, cfg.chord_tol)
    save_line(res, os.path.join(cfg.out, "free-curve.json"))
    _write_json(path, dict(base, outcome="free-curve",
                           final_check={"kind": final.kind,
                                        "margin": final.margin,
                                        "detail": final.detail},
                           vertices=len(res.vertices)))
    _svg(os.path.join(cfg.out, "descend-free-curve.svg"),
         [("polyline", _line_points(l), _PALETTE[0]),
          ("polyline", _line_points(res), _PALETTE[2])])
    code = 0 if final.kind == "Yes" else 2
    return code, [f"free curve with {len(res.vertices)} vertices",
                  f"  final check {final.kind}, margin {final.margin!r}"]


def _rational_in_hull(e, bound):
    xs = [v[0] for v in e.outer_hull]
    ys = [v[1] for v in e.outer_hull]
    for q in range(1, bound + 1):
        for p1 in range(ceil(min(xs) * q), floor(max(xs) * q) + 1):
            for p2 in range(ceil(min(ys) * q), floor(max(ys) * q) + 1):
                if gcd(gcd(p1, p2), q) != 1:
                    continue
                if rotset.hull_distance((p1 / q, p2 / q),
                                        e.outer_hull) == 0.0:
                    return RationalVector(p1, p2, q)
    return None


def _task_find_periodic(cfg):
    f = _load_map_file(cfg)
    e = rotset.estimate_rotation_set(
        f, 64, cfg.n if cfg.n is not None else 1000, workers=cfg.workers)
    v = _rational_in_hull(e, cfg.denominator_bound)
    out = cfg.out
    path = os.path.join(out, "find-periodic.json")
    base = {"task": "find-periodic",
            "map": os.path.basename(cfg.map_path),
            "estimate": e.as_dict(),
            "denominator_bound": cfg.denominator_bound}
    if v is None:
        _write_json(path, dict(base, vector=None))
        return 0, ["no rational vector inside the estimate at denominator "
                   f"bound {cfg.denominator_bound}"]
    grid = cfg.grid if cfg.grid is not None else 16
    rep = periodic.find_periodic(f, v, grid, cfg.min_box,
                                 workers=cfg.workers)
    _write_json(path, dict(base, **rep.as_dict()))
    d = periodic.displacement_field(f, v)
    ticks = np.arange(32) / 32.0
    gx, gy = np.meshgrid(ticks, ticks)
    dx, dy = d(gx.ravel(), gy.ravel())
    _write_tsv(os.path.join(out, "displacement.tsv"),
               ("x", "y", "dx", "dy"),
               [(float(a), float(b), float(c2), float(d2))
                for a, b, c2, d2 in zip(gx.ravel(), gy.ravel(), dx, dy)])
    if rep.certificates:
        _write_text(os.path.join(out, "certificates.txt"),
                    "\n".join(periodic.export_certificate(c, d)
                              for c in rep.certificates))
    elements = [("polyline", [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0),
                              (0.0, 1.0), (0.0, 0.0)], "#888888")]
    for c in rep.certificates:
        elements.append(("rect", [(float(c.box.x0), float(c.box.y0)),
                                  (float(c.box.x1), float(c.box.y1))],
                         _PALETTE[2]))
    for b in rep.candidates:
        elements.append(("rect", [(float(b.x0), float(b.y0)),
                                  (float(b.x1), float(b.y1))], _PALETTE[1]))
    _svg(os.path.join(out, "find-periodic.svg"), elements)
    summary = [f"vector {v}: {len(rep.certificates)} certificate(s), "
               f"{len(rep.candidates)} candidate box(es)"]
    if rep.identity_displacement:
        summary = [f"vector {v}: identity displacement, residual "
                   f"{rep.residual!r}; every point realizes it"]
        return 0, summary
    if rep.certificates:
        return 0, summary
    if rep.candidates:
        summary.append("  uncertified candidates only; inconclusive at "
                       "this resolution")
        return 2, summary
    summary.append("  not found at this resolution")
    return 0, summary


# ---------------------------------------------------------------------------
# report

def _vec_str(v):
    return f"({Fraction(v['p1'], v['q'])}, {Fraction(v['p2'], v['q'])})"


def _maybe(dirpath, name):
    p = os.path.join(dirpath, name)
    if not os.path.exists(p):
        return None
    with open(p) as fh:
        return json.load(fh)


def _task_report(cfg):
    d = cfg.out
    classify = _maybe(d, "classify.json")
    estimate = _maybe(d, "estimate-rot.json")
    normalize = _maybe(d, "normalize.json")
    fcc = _maybe(d, "free-curve-check.json")
    descend = _maybe(d, "descend-free-curve.json")
    brouwer = _maybe(d, "brouwer-descend.json")
    findp = _maybe(d, "find-periodic.json")
    present = [x for x in (classify, estimate, fcc, descend, brouwer, findp)
               if x is not None]
    if not present:
        raise CliError(
            f"{d}: no task outputs found; run some of estimate-rot, "
            "classify, free-curve-check, descend-free-curve, find-periodic "
            "first")
    missing = [name for name, val in
               (("classify", classify),
                ("free-curve-check or descend-free-curve",
                 fcc if fcc is not None else descend),
                ("find-periodic", findp))
               if val is None]
    inconclusive = []
    md = ["# analysis report", ""]
    sections = {}

    est = (classify or {}).get("estimate") or (estimate or {}).get("estimate")
    if est is not None:
        md += ["## rotation set (heuristic)",
               f"outer hull with {len(est['outer_hull'])} vertices, inner "
               f"hull with {len(est['inner_hull'])} vertices, gap "
               f"{est['gap']!r} (n={est['n']}, grid={est['grid']}).", ""]
        sections["estimate"] = {"gap": est["gap"], "n": est["n"],
                                "grid": est["grid"]}
    if classify is not None:
        c = classify["class"]
        md += ["## classification (heuristic)",
               f"kind: {c['kind']}" + (f"; direction {c['direction']}"
                                       if c.get("direction") else ""),
               ""]
        if c["kind"] == "Undecided":
            inconclusive.append("classification undecided")
        sections["class"] = c
        crits = classify.get("criteria", [])
        if crits:
            md.append("## free-curve criterion (heuristic)")
            for r in crits:
                if r["farey_interval"] is not None:
                    lo, hi = r["farey_interval"]
                    md.append(f"- axis {r['axis']}: projection inside Farey "
                              f"interval [{lo[0]}/{lo[1]}, {hi[0]}/{hi[1]}]; "
                              f"{r['disjoint_iterates']} pairwise disjoint "
                              "iterates guaranteed for a free curve")
                else:
                    md.append(f"- axis {r['axis']}: not satisfied (margin "
                              f"{r['margin']!r})")
            md.append("")
            sections["criteria"] = crits
    if normalize is not None:
        md += ["## normalization",
               f"mode: {normalize.get('mode')}" +
               (f", matrix {normalize['matrix']}"
                if normalize.get("matrix") else ""),
               ""]
        sections["normalize"] = {"mode": normalize.get("mode")}
        if normalize.get("mode") in ("undecided", "inconclusive"):
            inconclusive.append("normalization " + normalize["mode"])
    if fcc is not None:
        verdict = fcc["kind"]
        label = "certified" if verdict in ("Yes", "No") else "heuristic"
        md += ["## free-curve check",
               f"{verdict} ({label}), margin {fcc['margin']!r}", ""]
        if verdict == "Uncertain":
            inconclusive.append("free-curve check uncertain")
        sections["free_curve_check"] = {"kind": verdict,
                                        "margin": fcc["margin"]}
    if brouwer is not None:
        md += ["## Brouwer-line descent",
               f"outcome: {brouwer['outcome']}" +
               (f", final check {brouwer['final_check']['kind']} (certified)"
                if brouwer.get("final_check") else ""),
               ""]
        if brouwer["outcome"] != "descended":
            inconclusive.append("brouwer descent " + brouwer["outcome"])
        sections["brouwer_descend"] = {"outcome": brouwer["outcome"]}
    if descend is not None:
        md += ["## free-curve descent",
               f"outcome: {descend['outcome']}" +
               (f", final check {descend['final_check']['kind']} (certified)"
                if descend.get("final_check") else ""),
               ""]
        if descend["outcome"] != "free-curve":
            inconclusive.append("free-curve descent " + descend["outcome"])
        sections["descend_free_curve"] = {"outcome": descend["outcome"]}
    if findp is not None:
        md.append("## periodic points")
        if findp.get("vector") is None:
            md.append("no rational vector inside the estimate at bound "
                      f"{findp['denominator_bound']}")
            sections["find_periodic"] = {"vector": None}
        else:
            v = findp["vector"]
            ncert = len(findp["certificates"])
            ncand = len(findp["candidates"])
            if findp.get("identity_displacement"):
                md.append(f"vector {_vec_str(v)}: identity displacement "
                          "(certified); every point realizes it")
            else:
                md.append(f"vector {_vec_str(v)}: {ncert} certificate(s) "
                          f"(certified), {ncand} candidate box(es) "
                          "(uncertified)")
                if ncert == 0 and ncand > 0:
                    inconclusive.append("periodic search produced only "
                                        "uncertified candidates")
                elif ncert == 0:
                    md.append("not found at this resolution; absence is not "
                              "claimed")
            sections["find_periodic"] = {
                "vector": v,
                "certificates": len(findp["certificates"]),
                "candidates": len(findp["candidates"]),
                "identity_displacement":
                    bool(findp.get("identity_displacement"))}
        md.append("")
    if missing:
        md.append("## missing inputs")
        for m in missing:
            md.append(f"- {m}: not run")
        md.append("")
    md.append("## conclusion")
    md.append(_conclusion(sections, inconclusive))
    md.append("")
    text = "\n".join(md)
    _write_text(os.path.join(d, "report.md"), text)
    _write_json(os.path.join(d, "report.json"),
                {"task": "report", "sections": sections,
                 "missing": missing, "inconclusive": inconclusive})
    code = 2 if inconclusive else 0
    return code, ["report written to report.md"] + [
        f"  inconclusive: {msg}" for msg in inconclusive] + [
        f"  missing: {m}" for m in missing]


def _conclusion(sections, inconclusive):
    parts = []
    c = sections.get("class")
    if c is not None:
        names = {"Point": "a single point",
                 "SegmentRationalSlope": "a segment of rational slope",
                 "SegmentIrrationalSlope": "a segment of irrational slope",
                 "FullDimensional": "full-dimensional",
                 "Undecided": "undecided"}
        parts.append("the rotation-set estimate looks like "
                     + names.get(c["kind"], c["kind"])
                     + " (heuristic)")
    fp = sections.get("find_periodic")
    if fp is not None and fp.get("vector") is not None:
        vec = _vec_str(fp["vector"])
        if fp.get("identity_displacement"):
            parts.append(f"every point realizes {vec} (certified)")
        elif fp["certificates"]:
            parts.append(f"a periodic point realizing {vec} is certified "
                         "by nonzero degree")
        elif fp["candidates"]:
            parts.append(f"the search for {vec} is inconclusive at this "
                         "resolution")
        else:
            parts.append(f"no periodic point realizing {vec} was found at "
                         "this resolution (absence not claimed)")
    fc = sections.get("free_curve_check")
    if fc is not None:
        if fc["kind"] == "Yes":
            parts.append("a free curve is exhibited (certified)")
        elif fc["kind"] == "No":
            parts.append("the tested curve is certified not free")
    dc = sections.get("descend_free_curve")
    if dc is not None and dc["outcome"] == "free-curve":
        parts.append("the descent produced a certified free curve")
    if not parts:
        parts.append("no analyses to combine")
    return "; ".join(parts) + "."


_HANDLERS = {
    "estimate-rot": _task_estimate_rot,
    "classify": _task_classify,
    "normalize": _task_normalize,
    "free-curve-check": _task_free_curve_check,
    "wedge": _task_wedge,
    "brouwer-descend": _task_brouwer_descend,
    "descend-free-curve": _task_descend_free_curve,
    "find-periodic": _task_find_periodic,
    "report": _task_report,
}


def execute(cfg: TaskConfig) -> int:
    """Run one task; returns the exit status and prints the summary."""
    if cfg.task != "report":
        os.makedirs(cfg.out, exist_ok=True)
    code, summary = _HANDLERS[cfg.task](cfg)
    for row in summary:
        print(row)
    _write_text(os.path.join(cfg.out, f"{cfg.task}.txt"),
                "\n".join(summary) + "\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusdyn",
        description="rotation sets, free curves and certified periodic "
                    "points for lifts of torus homeomorphisms")
    parser.add_argument("task", nargs="?", choices=_TASKS,
                        help="analysis to run")
    parser.add_argument("--config", help="JSON file with the same fields "
                                         "as the flags")
    parser.add_argument("--map", help="map lift JSON file")
    parser.add_argument("--line", action="append",
                        help="polyline JSON file (repeat for tasks that "
                             "take two)")
    parser.add_argument("--n", type=int, help="iterations or descent power")
    parser.add_argument("--grid", type=int, help="sampling or box grid")
    parser.add_argument("--chord-tol", type=float, dest="chord_tol",
                        help="curve image tolerance (default 1e-6)")
    parser.add_argument("--tol-width", type=float, dest="tol_width",
                        help="classification width tolerance")
    parser.add_argument("--denominator-bound", type=int,
                        dest="denominator_bound",
                        help="largest denominator considered (default 50)")
    parser.add_argument("--min-box", type=float, dest="min_box",
                        help="smallest periodic-search box (default 1e-3)")
    parser.add_argument("--workers", type=int, help="parallel workers")
    parser.add_argument("--out", help="output directory (default .)")
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
        return execute(cfg)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (DescentError, MapImageError) as err:
        print(f"inconclusive: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
