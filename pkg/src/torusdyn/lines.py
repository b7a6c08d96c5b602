"""Periodic polylines on the torus: exact order, wedges, and certified descents.

A ``PqPolyline`` is one period of a piecewise-linear line in the plane whose
endpoint is the start shifted by the period vector ``(p, q)``.  All vertex
coordinates are ``Fraction``s, and every geometric predicate in this module
(incidence, ordering, intersection, the wedge) is decided in exact rational
arithmetic.  The only approximate quantity anywhere is the image of a line
under a lift with trigonometric terms; ``map_line`` returns such images as
snapped rational polylines together with an explicit error budget, and every
certificate built on top of them keeps its safety margin above that budget.

Everything is computed in a frame where the period is ``(0, 1)``: a general
``(p, q)`` line is sheared upright first and the answer sheared back, so the
orientation conventions below ("left of the line" is the side containing
``x = -inf``) are stated for vertical periods only.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, gcd
from typing import Optional, Sequence

import numpy as np

from ._kernels import backend
from .gl2z import IDENT, IntMatrix2, vertical_normalizer
from .lift import ConjugateBy, MapLift, Power, Translate, derive

__all__ = [
    "PqPolyline", "LineDiagnostics", "OrderResult", "MappedLine", "TriState",
    "NotApplicable", "DescentReport", "MapImageError", "DescentError",
    "validate", "order_compare", "map_line", "wedge", "side_of_point",
    "brouwer_check", "brouwer_descend", "free_curve_from_shift",
    "free_curve_check", "descend_to_base", "translate_line", "transform_line",
    "line_from_dict", "line_to_dict", "load_line", "save_line",
]

_SNAP = 1 << 40           # images are rounded onto this dyadic grid
_FLOAT_SLACK = 1e-12      # generic allowance for float evaluation noise
_F0 = Fraction(0)
_F1 = Fraction(1)


class MapImageError(RuntimeError):
    """The mapped polyline failed validation; retry with a smaller chord_tol."""


class DescentError(RuntimeError):
    """A descent step could not be certified."""


def _fr(v) -> Fraction:
    # floats are exact binary rationals, so accepting them loses nothing
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class PqPolyline:
    """One period of a piecewise-linear (p, q)-periodic line.

    ``vertices[-1] - vertices[0]`` must equal ``pq`` exactly and gcd(p, q)
    must be 1.  Construction checks only these cheap invariants; simplicity
    of the full line and of its torus projection is the job of `validate`.
    """

    pq: tuple
    vertices: tuple

    def __post_init__(self):
        p, q = self.pq
        if not (isinstance(p, int) and isinstance(q, int)):
            raise ValueError("period vector must be a pair of integers")
        if gcd(p, q) != 1:
            raise ValueError(f"period vector {(p, q)} is not primitive")
        object.__setattr__(self, "pq", (p, q))
        verts = tuple((_fr(x), _fr(y)) for x, y in self.vertices)
        if len(verts) < 2:
            raise ValueError("a polyline needs at least two vertices")
        for i in range(len(verts) - 1):
            if verts[i] == verts[i + 1]:
                raise ValueError(f"repeated vertex at index {i}")
        dx = verts[-1][0] - verts[0][0]
        dy = verts[-1][1] - verts[0][1]
        if (dx, dy) != (p, q):
            raise ValueError(
                f"endpoints differ by {(str(dx), str(dy))}, expected {(p, q)}")
        object.__setattr__(self, "vertices", verts)

    def edges(self):
        v = self.vertices
        return [(v[i], v[i + 1]) for i in range(len(v) - 1)]

    def as_dict(self) -> dict:
        return line_to_dict(self)


@dataclass(frozen=True)
class LineDiagnostics:
    valid: bool
    strip_width: Fraction
    issues: tuple = ()
    crossing: Optional[tuple] = None


@dataclass(frozen=True)
class OrderResult:
    """Outcome of comparing two lines with the same period.

    kind is one of "Less", "Greater", "Intersects", "Touching".  Touching
    carries ``side``: "left" means the first line stays weakly left of the
    second (contact without crossing), "right" the mirror image, and None
    that the two lines are equal as point sets.
    """

    kind: str
    witness: Optional[tuple] = None
    side: Optional[str] = None


@dataclass(frozen=True)
class MappedLine:
    line: PqPolyline
    error: float


@dataclass(frozen=True)
class TriState:
    """Yes / No / Uncertain with the margin that justified the verdict."""

    kind: str
    margin: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class ShiftWitness:
    n: int
    start: tuple
    image: tuple

    @property
    def pr1_rate(self) -> float:
        return (self.image[0] - self.start[0]) / self.n


@dataclass(frozen=True)
class NotApplicable:
    """The shift criterion never certified within the scan bound.

    Carries, for each power, the sampled point on the line whose image made
    the most horizontal progress; these feed the complementary rotation
    estimate max pr1 >= 1.
    """

    witnesses: tuple
    detail: str = ""

    @property
    def max_pr1_rate(self) -> float:
        return max(w.pr1_rate for w in self.witnesses)


@dataclass(frozen=True)
class DescentReport:
    """Structured account of where a certified pipeline stopped."""

    blocked_at: str
    detail: str
    witnesses: tuple = ()


# ---------------------------------------------------------------------------
# exact segment primitives


def _cross3(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


_BOX_PAD = 1e-9


def _float_boxes(edges):
    """Padded float bounding boxes, one per edge.

    The padding absorbs the rounding of exact coordinates to floats, so a
    box test can only err on the inclusive side; anything it lets through
    is re-examined exactly.
    """
    out = []
    for a, b in edges:
        ax, ay, bx, by = float(a[0]), float(a[1]), float(b[0]), float(b[1])
        out.append((min(ax, bx) - _BOX_PAD, max(ax, bx) + _BOX_PAD,
                    min(ay, by) - _BOX_PAD, max(ay, by) + _BOX_PAD))
    return out


def _seg_meet(a, b, c, d):
    """Exact meet of closed segments [a,b], [c,d].

    Returns None, ("point", z) or ("overlap", (z1, z2)); overlap endpoints
    are ordered along [a, b] and distinct.
    """
    rx, ry = b[0] - a[0], b[1] - a[1]
    sx, sy = d[0] - c[0], d[1] - c[1]
    denom = rx * sy - ry * sx
    acx, acy = c[0] - a[0], c[1] - a[1]
    if denom != 0:
        t = (acx * sy - acy * sx) / denom
        u = (acx * ry - acy * rx) / denom
        if 0 <= t <= 1 and 0 <= u <= 1:
            return ("point", (a[0] + t * rx, a[1] + t * ry))
        return None
    if acx * ry - acy * rx != 0:
        return None
    # collinear: parametrize [c, d] along [a, b]
    rr = rx * rx + ry * ry
    tc = ((c[0] - a[0]) * rx + (c[1] - a[1]) * ry) / rr
    td = ((d[0] - a[0]) * rx + (d[1] - a[1]) * ry) / rr
    lo, hi = min(tc, td), max(tc, td)
    lo, hi = max(lo, _F0), min(hi, _F1)
    if lo > hi:
        return None
    z1 = (a[0] + lo * rx, a[1] + lo * ry)
    z2 = (a[0] + hi * rx, a[1] + hi * ry)
    if z1 == z2:
        return ("point", z1)
    return ("overlap", (z1, z2))


def _param_on(a, b, z) -> Fraction:
    if b[0] != a[0]:
        return (z[0] - a[0]) / (b[0] - a[0])
    return (z[1] - a[1]) / (b[1] - a[1])


def _pt_seg_dist2(p, a, b) -> Fraction:
    rx, ry = b[0] - a[0], b[1] - a[1]
    rr = rx * rx + ry * ry
    t = ((p[0] - a[0]) * rx + (p[1] - a[1]) * ry) / rr
    t = min(max(t, _F0), _F1)
    dx = p[0] - (a[0] + t * rx)
    dy = p[1] - (a[1] + t * ry)
    return dx * dx + dy * dy


def _seg_dist2(a, b, c, d) -> Fraction:
    if _seg_meet(a, b, c, d) is not None:
        return _F0
    return min(_pt_seg_dist2(a, c, d), _pt_seg_dist2(b, c, d),
               _pt_seg_dist2(c, a, b), _pt_seg_dist2(d, a, b))


# ---------------------------------------------------------------------------
# the vertical frame


def _frame_matrix(pq) -> IntMatrix2:
    # vertical_normalizer(a, b) sends (b, a) to (0, 1); we need pq -> (0, 1)
    p, q = pq
    return vertical_normalizer(q, p)


def transform_line(l: PqPolyline, mat: IntMatrix2) -> PqPolyline:
    np_, nq = mat.apply(l.pq)
    return PqPolyline((int(np_), int(nq)),
                      tuple(mat.apply(v) for v in l.vertices))


def translate_line(l: PqPolyline, m: int, n: int) -> PqPolyline:
    mf, nf = _fr(m), _fr(n)
    return PqPolyline(l.pq, tuple((x + mf, y + nf) for x, y in l.vertices))


def _framed(l: PqPolyline) -> PqPolyline:
    if l.pq == (0, 1):
        return l
    return transform_line(l, _frame_matrix(l.pq))


def _yspan(edge):
    (ax, ay), (bx, by) = edge
    return (min(ay, by), max(ay, by))


def _k_range(e1, e2):
    """Integer shifts k for which e2 + (0, k) can touch e1."""
    lo1, hi1 = _yspan(e1)
    lo2, hi2 = _yspan(e2)
    return range(ceil(lo1 - hi2), floor(hi1 - lo2) + 1)


# ---------------------------------------------------------------------------
# membership and parity against a full framed line


def _on_line(z, l: PqPolyline) -> bool:
    for a, b in l.edges():
        lo, hi = _yspan((a, b))
        for k in range(ceil(z[1] - hi), floor(z[1] - lo) + 1):
            ak = (a[0], a[1] + k)
            bk = (b[0], b[1] + k)
            if _cross3(ak, bk, z) == 0:
                if min(ak[0], bk[0]) <= z[0] <= max(ak[0], bk[0]) and \
                        min(ak[1], bk[1]) <= z[1] <= max(ak[1], bk[1]):
                    return True
    return False


def _point_side(z, l: PqPolyline) -> str:
    """'left', 'right' or 'on' for a point against the full framed line.

    Parity of crossings of the leftward ray from z, with the half-open rule
    (an edge counts when exactly one endpoint is strictly above the ray) so
    vertex hits and horizontal edges need no perturbation.
    """
    if _on_line(z, l):
        return "on"
    cnt = 0
    zx, zy = z
    for a, b in l.edges():
        if a[1] == b[1]:
            continue
        lo, hi = _yspan((a, b))
        for k in range(floor(zy - hi) - 1, ceil(zy - lo) + 2):
            ya, yb = a[1] + k, b[1] + k
            if (ya > zy) != (yb > zy):
                xc = a[0] + (zy - ya) * (b[0] - a[0]) / (yb - ya)
                if xc < zx:
                    cnt ^= 1
    return "right" if cnt else "left"


def side_of_point(l: PqPolyline, z) -> str:
    """Which side of the full line the point is on, in original coordinates."""
    zf = (_fr(z[0]), _fr(z[1]))
    if l.pq == (0, 1):
        return _point_side(zf, l)
    mat = _frame_matrix(l.pq)
    return _point_side(mat.apply(zf), _framed(l))


# ---------------------------------------------------------------------------
# intersections between two framed lines, and the arc decomposition


def _meets(l1: PqPolyline, l2: PqPolyline):
    """All contacts between the two full framed lines.

    Returns (points, cuts1, cuts2) where points are contact points in l1's
    period coordinates and cuts are {edge index: set of exact params}.
    """
    e1s, e2s = l1.edges(), l2.edges()
    fb1, fb2 = _float_boxes(e1s), _float_boxes(e2s)
    points, cuts1, cuts2 = [], defaultdict(set), defaultdict(set)
    for i, (a, b) in enumerate(e1s):
        b1 = fb1[i]
        for j, (c, d) in enumerate(e2s):
            b2 = fb2[j]
            if b2[0] > b1[1] or b1[0] > b2[1]:
                continue
            if math.floor(b1[3] - b2[2]) < math.ceil(b1[2] - b2[3]):
                continue
            for k in _k_range((a, b), (c, d)):
                ck = (c[0], c[1] + k)
                dk = (d[0], d[1] + k)
                m = _seg_meet(a, b, ck, dk)
                if m is None:
                    continue
                zs = [m[1]] if m[0] == "point" else list(m[1])
                for z in zs:
                    points.append(z)
                    cuts1[i].add(_param_on(a, b, z))
                    cuts2[j].add(_param_on(ck, dk, z))
    return points, cuts1, cuts2


def _qkey(z):
    return (z[0], z[1] - floor(z[1]))


def _pt_at(a, b, t):
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


@dataclass
class _Arc:
    curve: int
    seq: int
    pts: tuple          # plane geometry, >= 2 points, node to node
    skey: tuple
    ekey: tuple

    @property
    def germ(self):
        return (self.pts[1][0] - self.pts[0][0], self.pts[1][1] - self.pts[0][1])


def _arcs_of(l: PqPolyline, cuts, curve_id: int):
    """Cut the period loop at the given params; None when there are no cuts."""
    m = len(l.vertices) - 1
    vflag = [False] * m
    inner = [set() for _ in range(m)]
    for i, ts in cuts.items():
        for t in ts:
            if t == 0:
                vflag[i] = True
            elif t == 1:
                vflag[(i + 1) % m] = True
            else:
                inner[i].add(t)
    seq = []
    for i in range(m):
        a, b = l.vertices[i], l.vertices[i + 1]
        seq.append((a, vflag[i]))
        for t in sorted(inner[i]):
            seq.append((_pt_at(a, b, t), True))
    n = len(seq)
    first = next((i for i, (_, f) in enumerate(seq) if f), None)
    if first is None:
        return None
    arcs, cur = [], [seq[first][0]]
    for off in range(1, n + 1):
        i = (first + off) % n
        shift = 1 if first + off >= n else 0
        p = (seq[i][0][0], seq[i][0][1] + shift)
        if p != cur[-1]:
            cur.append(p)
        if seq[i][1]:
            if len(cur) >= 2:
                arcs.append(_Arc(curve_id, len(arcs), tuple(cur),
                                 _qkey(cur[0]), _qkey(cur[-1])))
            cur = [p]
    return arcs


def _cw_key(base, g):
    """Sort key: clockwise angle from `base` to `g`, exactly, in (0, 2pi].

    Used to pick the next boundary arc: the region being traced sits in the
    clockwise gap after the reversed incoming direction, so the first germ
    in clockwise order continues its boundary.
    """
    cr = base[0] * g[1] - base[1] * g[0]
    dt = base[0] * g[0] + base[1] * g[1]
    if cr == 0:
        return (4, _F0) if dt > 0 else (2, _F0)
    return (1 if cr < 0 else 3, Fraction(dt) / cr)


def _walk_region_boundary(arcs, seed_key):
    """Trace the boundary of the unbounded-left region through the seed.

    The seed is the leftmost point of the union, so points just west of it
    lie in the region; the fake incoming direction (1, 0) makes the first
    clockwise candidate from due west the correct departure.
    """
    outgoing = defaultdict(list)
    for arc in arcs:
        outgoing[arc.skey].append(arc)
    seed_pt = seed_key
    base = (Fraction(-1), _F0)
    cur_key, cur_pt = seed_key, seed_pt
    out = [seed_pt]
    for _ in range(4 * len(arcs) + 8):
        cands = outgoing.get(cur_key)
        if not cands:
            raise RuntimeError("boundary walk reached a dead end")
        arc = min(cands, key=lambda a: (_cw_key(base, a.germ), a.curve, a.seq))
        dy = cur_pt[1] - arc.pts[0][1]
        if dy.denominator != 1:
            raise RuntimeError("boundary walk lost the periodic lift")
        for p in arc.pts[1:]:
            out.append((p[0], p[1] + dy))
        cur_pt, cur_key = out[-1], arc.ekey
        u = (arc.pts[-1][0] - arc.pts[-2][0], arc.pts[-1][1] - arc.pts[-2][1])
        base = (-u[0], -u[1])
        if cur_key == seed_key:
            if cur_pt != (seed_pt[0], seed_pt[1] + 1):
                raise RuntimeError("boundary walk closed with wrong winding")
            return out
    raise RuntimeError("boundary walk failed to close")


def _canonical_cycle(pts):
    """Merge collinear runs and start the period at min (y mod 1, x)."""
    core = [pts[i] for i in range(len(pts) - 1)]
    changed = True
    while changed and len(core) > 1:
        changed = False
        n = len(core)
        for i in range(n):
            prv = core[i - 1] if i > 0 else (core[-1][0], core[-1][1] - 1)
            cur = core[i]
            nxt = core[(i + 1) % n]
            if i + 1 == n:
                nxt = (nxt[0], nxt[1] + 1)
            d1 = (cur[0] - prv[0], cur[1] - prv[1])
            d2 = (nxt[0] - cur[0], nxt[1] - cur[1])
            if d1[0] * d2[1] - d1[1] * d2[0] == 0 and \
                    d1[0] * d2[0] + d1[1] * d2[1] > 0:
                core.pop(i)
                changed = True
                break
    n = len(core)
    i0 = min(range(n), key=lambda i: (core[i][1] - floor(core[i][1]), core[i][0]))
    start = (core[i0][0], core[i0][1] - floor(core[i0][1]))
    out = [start]
    for off in range(n):
        i = (i0 + off) % n
        j = (i + 1) % n
        d = (core[j][0] - core[i][0], core[j][1] - core[i][1])
        if i + 1 == n:
            d = (d[0], d[1] + 1)
        out.append((out[-1][0] + d[0], out[-1][1] + d[1]))
    return out


# ---------------------------------------------------------------------------
# validation


def validate(l: PqPolyline) -> LineDiagnostics:
    """Check simplicity of the full line and of its torus projection.

    Also reports the strip width M: the horizontal spread of one period in
    the sheared frame where the period vector is (0, 1).
    """
    f = _framed(l)
    xs = [v[0] for v in f.vertices]
    width = max(xs) - min(xs)
    issues, crossing = [], None

    def note(msg, z):
        nonlocal crossing
        issues.append(msg)
        if crossing is None:
            crossing = z

    edges = f.edges()
    m = len(edges)
    # cusps: an edge folding straight back onto its predecessor
    for i in range(m):
        j = (i + 1) % m
        d1 = (edges[i][1][0] - edges[i][0][0], edges[i][1][1] - edges[i][0][1])
        d2 = (edges[j][1][0] - edges[j][0][0], edges[j][1][1] - edges[j][0][1])
        if d1[0] * d2[1] - d1[1] * d2[0] == 0 and d1[0] * d2[0] + d1[1] * d2[1] < 0:
            note(f"edge {i} folds back onto edge {j}", edges[i][1])
    # sampled images can run to thousands of edges, so pair enumeration is
    # pruned with padded float boxes sorted by ymin; survivors go through
    # the exact predicate as before
    fb = _float_boxes(edges)
    order = sorted(range(m), key=lambda i: fb[i][2])
    ymin_sorted = [fb[i][2] for i in order]
    span_f = max(fb[i][3] - fb[i][2] for i in range(m))

    def y_window(lo, hi):
        left = bisect_left(ymin_sorted, lo - span_f)
        right = bisect_right(ymin_sorted, hi)
        return order[left:right]

    # simplicity within one period
    for pos, i in enumerate(order):
        bi = fb[i]
        for j in order[pos + 1:]:
            bj = fb[j]
            if bj[2] > bi[3]:
                break
            if bj[0] > bi[1] or bi[0] > bj[1]:
                continue
            ii, jj = (i, j) if i < j else (j, i)
            meet = _seg_meet(*edges[ii], *edges[jj])
            if meet is None:
                continue
            if jj == ii + 1 and meet[0] == "point" and meet[1] == edges[ii][1]:
                continue
            z = meet[1] if meet[0] == "point" else meet[1][0]
            note(f"edges {ii} and {jj} cross near ({z[0]}, {z[1]})", z)
    # simplicity against shifts along the period
    ys = [v[1] for v in f.vertices]
    for k in range(1, ceil(max(ys) - min(ys)) + 1):
        for i in range(m):
            bi = fb[i]
            for j in y_window(bi[2] - k, bi[3] - k):
                bj = fb[j]
                if bj[2] + k > bi[3] or bi[2] > bj[3] + k:
                    continue
                if bj[0] > bi[1] or bi[0] > bj[1]:
                    continue
                c, d = edges[j]
                meet = _seg_meet(*edges[i], (c[0], c[1] + k), (d[0], d[1] + k))
                if meet is None:
                    continue
                if k == 1 and meet[0] == "point" and \
                        meet[1] == f.vertices[-1] and i == m - 1 and j == 0:
                    continue
                z = meet[1] if meet[0] == "point" else meet[1][0]
                note(f"period copies {k} apart meet near ({z[0]}, {z[1]})", z)
    # torus projection: transversal integer translates must stay clear
    for t in range(1, floor(width) + 1):
        for i in range(m):
            a, b = edges[i]
            bi = fb[i]
            for j in range(m):
                bj = fb[j]
                if bj[0] + t > bi[1] or bi[0] > bj[1] + t:
                    continue
                c, d = edges[j]
                for k in _k_range((a, b), (c, d)):
                    ck = (c[0] + t, c[1] + k)
                    dk = (d[0] + t, d[1] + k)
                    meet = _seg_meet(a, b, ck, dk)
                    if meet is not None:
                        z = meet[1] if meet[0] == "point" else meet[1][0]
                        note(f"translate ({t},{k}) meets the line near "
                             f"({z[0]}, {z[1]})", z)
    return LineDiagnostics(not issues, width, tuple(issues), crossing)


# ---------------------------------------------------------------------------
# order


def _require_same_pq(l1, l2):
    if l1.pq != l2.pq:
        raise ValueError(f"period vectors differ: {l1.pq} vs {l2.pq}")


def order_compare(l1: PqPolyline, l2: PqPolyline) -> OrderResult:
    """Exact order of two lines with the same period vector.

    Less/Greater are strict (disjoint full lines); Intersects carries a
    contact point as witness; Touching means contact without crossing.
    """
    _require_same_pq(l1, l2)
    back = IDENT if l1.pq == (0, 1) else _frame_matrix(l1.pq).inverse()
    f1, f2 = _framed(l1), _framed(l2)
    points, cuts1, _ = _meets(f1, f2)
    if not points:
        side = _point_side(f1.vertices[0], f2)
        return OrderResult("Less" if side == "left" else "Greater")
    witness = back.apply(points[0])
    arcs = _arcs_of(f1, cuts1, 1)
    sides = set()
    for arc in arcs:
        mid = ((arc.pts[0][0] + arc.pts[1][0]) / 2,
               (arc.pts[0][1] + arc.pts[1][1]) / 2)
        s = _point_side(mid, f2)
        if s != "on":
            sides.add(s)
    if sides == {"left", "right"}:
        return OrderResult("Intersects", witness=witness)
    if sides == {"left"}:
        return OrderResult("Touching", witness=witness, side="left")
    if sides == {"right"}:
        return OrderResult("Touching", witness=witness, side="right")
    return OrderResult("Touching", witness=witness, side=None)


def _is_weak_leq(res: OrderResult) -> bool:
    return res.kind == "Less" or (res.kind == "Touching" and
                                  res.side in ("left", None))


# ---------------------------------------------------------------------------
# wedge


def wedge(l1: PqPolyline, l2: PqPolyline) -> PqPolyline:
    """Largest line weakly left of both inputs.

    Boundary of the unbounded component of the intersection of the two left
    regions, traced exactly.  Output is canonical: collinear runs merged and
    the period started at the vertex minimizing (y mod 1, x) in the sheared
    frame, so equal point sets come back as equal vertex tuples.
    """
    _require_same_pq(l1, l2)
    pq = l1.pq
    back = IDENT if pq == (0, 1) else _frame_matrix(pq).inverse()
    f1, f2 = _framed(l1), _framed(l2)
    points, cuts1, cuts2 = _meets(f1, f2)
    if not points:
        side = _point_side(f1.vertices[0], f2)
        winner = f1 if side == "left" else f2
        cyc = _canonical_cycle(list(winner.vertices))
    else:
        verts = [(v, 1, i) for i, v in enumerate(f1.vertices[:-1])] + \
                [(v, 2, i) for i, v in enumerate(f2.vertices[:-1])]
        seed_v, seed_curve, seed_idx = min(
            verts, key=lambda e: (e[0][0], e[0][1] - floor(e[0][1])))
        # a contact of the two curves at the seed is already a node from
        # _meets; this only marks the seed on the curve that owns it
        if seed_curve == 1:
            cuts1[seed_idx].add(_F0)
        else:
            cuts2[seed_idx].add(_F0)
        arcs = (_arcs_of(f1, cuts1, 1) or []) + (_arcs_of(f2, cuts2, 2) or [])
        walk = _walk_region_boundary(arcs, _qkey(seed_v))
        cyc = _canonical_cycle(walk)
    out = PqPolyline((0, 1), cyc)
    if pq != (0, 1):
        out = transform_line(out, back)
    return out


# ---------------------------------------------------------------------------
# minimal gap between two full framed lines


def _min_gap2(f1: PqPolyline, f2: PqPolyline) -> Fraction:
    e1s, e2s = f1.edges(), f2.edges()
    fb1, fb2 = _float_boxes(e1s), _float_boxes(e2s)
    y1 = [v[1] for v in f1.vertices]
    y2 = [v[1] for v in f2.vertices]
    k_lo = floor(min(y1) - max(y2)) - 1
    k_hi = ceil(max(y1) - min(y2)) + 1
    best = None
    cap = math.inf

    def scan(k):
        nonlocal best, cap
        for i, (a, b) in enumerate(e1s):
            b1 = fb1[i]
            for j, (c, d) in enumerate(e2s):
                b2 = fb2[j]
                # padded boxes under-estimate the true separation, so this
                # reject can only drop pairs that cannot improve on best
                dx = max(b1[0] - b2[1], b2[0] - b1[1], 0.0)
                dy = max(b1[2] - (b2[3] + k), (b2[2] + k) - b1[3], 0.0)
                if dx * dx + dy * dy >= cap:
                    continue
                d2 = _seg_dist2(a, b, (c[0], c[1] + k), (d[0], d[1] + k))
                if best is None or d2 < best:
                    best = d2
                    cap = float(best) * (1.0 + 1e-9)

    for k in range(k_lo, k_hi + 1):
        scan(k)
    # widen until the vertical gap alone beats the best found
    k = k_lo - 1
    while best > 0:
        vgap = (min(y1) - max(y2)) - k
        if vgap > 0 and vgap * vgap >= best:
            break
        scan(k)
        k -= 1
    k = k_hi + 1
    while best > 0:
        vgap = k - (max(y1) - min(y2))
        if vgap > 0 and vgap * vgap >= best:
            break
        scan(k)
        k += 1
    return best


def _pt_line_dist2(z, l: PqPolyline) -> Fraction:
    """Distance^2 from a point to a full framed line (valid when < 1)."""
    best = None
    for a, b in l.edges():
        lo, hi = _yspan((a, b))
        for k in range(floor(z[1] - hi) - 1, ceil(z[1] - lo) + 2):
            d2 = _pt_seg_dist2(z, (a[0], a[1] + k), (b[0], b[1] + k))
            if best is None or d2 < best:
                best = d2
    return best


def _certified_less(a: PqPolyline, b: PqPolyline, slack: float):
    """Exact Less plus a gap exceeding `slack`; returns (ok, gap2)."""
    rel = order_compare(a, b)
    if rel.kind != "Less":
        return False, _F0
    g2 = _min_gap2(_framed(a), _framed(b))
    return g2 > _fr(slack) * _fr(slack), g2


# ---------------------------------------------------------------------------
# mapping a line with an explicit error budget


def _linear_part(f: MapLift) -> IntMatrix2:
    m = IDENT
    for s in f.program.steps:
        if s.kind == 1:
            m = IntMatrix2(*s.mat) * m
    return m


def _affine_total(f: MapLift):
    m = IDENT
    tx, ty = _F0, _F0
    for s in f.program.steps:
        if s.kind == 1:
            sm = IntMatrix2(*s.mat)
            tx, ty = sm.apply((tx, ty))
            m = sm * m
            tx, ty = tx + _fr(s.trans[0]), ty + _fr(s.trans[1])
        elif s.kind == 0:
            tx, ty = tx + _fr(s.trans[0]), ty + _fr(s.trans[1])
        else:
            tx, ty = tx - _fr(s.trans[0]), ty - _fr(s.trans[1])
    return m, (tx, ty)


def _snap(v: float) -> Fraction:
    return Fraction(round(v * _SNAP), _SNAP)


def _pdist_f(p, a, b) -> float:
    rx, ry = b[0] - a[0], b[1] - a[1]
    rr = rx * rx + ry * ry
    if rr == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = ((p[0] - a[0]) * rx + (p[1] - a[1]) * ry) / rr
    t = min(max(t, 0.0), 1.0)
    return math.hypot(p[0] - a[0] - t * rx, p[1] - a[1] - t * ry)


def map_line(f: MapLift, l: PqPolyline, chord_tol: float = 1e-6) -> MappedLine:
    """Image of a line under a lift, as a rational polyline plus error bound.

    Purely affine lifts map vertices exactly (error 0).  Otherwise each edge
    is refined until sampled midpoints sit within chord_tol of their chord,
    images are rounded onto a fixed dyadic grid, and the returned error is
    chord_tol plus the rounding and float-evaluation allowances.  The image
    is revalidated; failure raises MapImageError.
    """
    if chord_tol <= 0:
        raise ValueError("chord_tol must be positive")
    lin = _linear_part(f)
    ip, iq = lin.apply(l.pq)
    pq_img = (int(ip), int(iq))
    if f.program.is_affine():
        m, (tx, ty) = _affine_total(f)
        verts = []
        for v in l.vertices:
            x, y = m.apply(v)
            verts.append((x + tx, y + ty))
        out = PqPolyline(pq_img, verts)
        diag = validate(out)
        if not diag.valid:
            raise MapImageError(f"affine image failed validation: {diag.issues[0]}")
        return MappedLine(out, 0.0)

    prog = f.program
    verts = []
    for a, b in l.edges():
        ts, images = _sample_edge(prog, a, b, chord_tol)
        pts = [_snap_pt(images[t]) for t in ts]
        if verts:
            pts = pts[1:]
        verts.extend(pts)
    # enforce exact periodicity: the closing vertex is the first one shifted
    verts[-1] = (verts[0][0] + pq_img[0], verts[0][1] + pq_img[1])
    dedup = [verts[0]]
    for p in verts[1:]:
        if p != dedup[-1]:
            dedup.append(p)
    out = PqPolyline(pq_img, dedup)
    diag = validate(out)
    if not diag.valid:
        raise MapImageError(
            f"mapped line failed validation ({diag.issues[0]}); "
            "retry with a smaller chord_tol")
    return MappedLine(out, chord_tol + 1.0 / _SNAP + _FLOAT_SLACK)


def _snap_pt(p):
    return (_snap(p[0]), _snap(p[1]))


def _sample_edge(prog, a, b, tol):
    """Refine params on [a, b] until image midpoints hug their chords."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    images = {}

    def ev(ts):
        fresh = [t for t in ts if t not in images]
        if not fresh:
            return
        xs = np.array([ax + t * (bx - ax) for t in fresh])
        ys = np.array([ay + t * (by - ay) for t in fresh])
        ix, iy = backend.apply_program(prog, xs, ys)
        for t, x, y in zip(fresh, ix, iy):
            images[t] = (float(x), float(y))

    knots = [i / 4 for i in range(5)]
    ev(knots)
    pending = list(zip(knots[:-1], knots[1:]))
    accepted = set()
    for _ in range(26):
        if not pending:
            break
        mids = [(t0 + t1) / 2 for t0, t1 in pending]
        ev(mids)
        nxt = []
        for (t0, t1), tm in zip(pending, mids):
            if _pdist_f(images[tm], images[t0], images[t1]) < tol:
                accepted.add((t0, t1))
            else:
                nxt.extend([(t0, tm), (tm, t1)])
        pending = nxt
    if pending:
        raise MapImageError(
            "chord refinement stalled; retry with a smaller chord_tol")
    ts = sorted({t for pair in accepted for t in pair})
    return ts, images


# ---------------------------------------------------------------------------
# certified checks


def brouwer_check(f: MapLift, l: PqPolyline, chord_tol: float = 1e-6) -> TriState:
    """Is the line strictly left of its image, beyond the error budget?

    Yes and No both demand a separation larger than twice the budget
    (max of the image error and chord_tol); anything tighter is Uncertain.
    """
    img = map_line(f, l, chord_tol)
    g, err = img.line, img.error
    if g.pq != l.pq:
        return TriState("No", None, f"image period {g.pq} differs from {l.pq}")
    budget = max(err, chord_tol)
    rel = order_compare(l, g)
    if rel.kind in ("Less", "Greater"):
        g2 = _min_gap2(_framed(l), _framed(g))
        gap = math.sqrt(float(g2))
        if g2 > _fr(2 * budget) ** 2:
            if rel.kind == "Less":
                return TriState("Yes", gap, "line strictly left of its image")
            return TriState("No", gap, "image strictly left of the line")
        return TriState("Uncertain", gap,
                        f"separation {gap:.3g} within budget {2 * budget:.3g}")
    if err == 0.0:
        return TriState("No", 0.0, "exact image meets the line")
    return TriState("Uncertain", 0.0, f"image {rel.kind.lower()} the line "
                    "at this resolution")


def _offset_snap(l: PqPolyline, delta: float) -> Optional[PqPolyline]:
    """Mitred parallel offset (positive = rightward), snapped to rationals.

    Purely a candidate generator: callers must verify every order relation
    they need on the snapped result, and retry with a smaller delta if the
    verification fails.
    """
    v = [(float(x), float(y)) for x, y in l.vertices[:-1]]
    m = len(v)
    dirs = []
    for i in range(m):
        a = v[i]
        b = (float(l.vertices[i + 1][0]), float(l.vertices[i + 1][1]))
        dx, dy = b[0] - a[0], b[1] - a[1]
        h = math.hypot(dx, dy)
        dirs.append((dx / h, dy / h))
    out = []
    for i in range(m):
        d_in = dirs[i - 1]
        d_out = dirs[i]
        n1 = (d_in[1], -d_in[0])
        n2 = (d_out[1], -d_out[0])
        mx, my = n1[0] + n2[0], n1[1] + n2[1]
        mm = mx * mx + my * my
        if mm < 1e-12:
            mx, my, mm = n2[0], n2[1], 1.0
        ox = v[i][0] + 2.0 * delta * mx / mm
        oy = v[i][1] + 2.0 * delta * my / mm
        out.append((_snap(ox), _snap(oy)))
    out.append((out[0][0] + l.pq[0], out[0][1] + l.pq[1]))
    try:
        cand = PqPolyline(l.pq, out)
    except ValueError:
        return None
    if not validate(cand).valid:
        return None
    return cand


def brouwer_descend(f: MapLift, l: PqPolyline, n: int,
                    chord_tol: float = 1e-6) -> PqPolyline:
    """From a verified line for the n-th power, build one for power n-1.

    Wedges the image chain f(l), ..., f^{n-1}(l) with an auxiliary line xi
    squeezed between l and f^n(l); the result is re-verified for the power
    n-1 before being returned, never trusted.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if l.pq != (0, 1):
        raise ValueError("descent works on (0, 1)-lines; shear first")
    pre = brouwer_check(derive(f, Power(n)), l, chord_tol)
    if pre.kind != "Yes":
        raise DescentError(
            f"precondition failed: line not certified left of its power-{n} "
            f"image ({pre.kind}: {pre.detail})")
    img_n = map_line(derive(f, Power(n)), l, chord_tol)
    gap2 = _min_gap2(_framed(l), _framed(img_n.line))
    eta = max((math.sqrt(float(gap2)) - img_n.error) / 2, 0.0)
    if eta <= 0:
        raise DescentError("no certified room between the line and its image")
    pieces = []
    for i in range(1, n):
        im = map_line(derive(f, Power(i)), l, chord_tol)
        if im.line.pq != (0, 1):
            raise DescentError("an intermediate image changed the period")
        pieces.append(im.line)
    last_err = None
    for _ in range(20):
        xi = _offset_snap(l, eta)
        eta /= 2
        if xi is None:
            last_err = "offset candidate failed validation"
            continue
        if order_compare(l, xi).kind != "Less":
            last_err = "offset candidate not strictly right of the line"
            continue
        ok, _ = _certified_less(xi, img_n.line, img_n.error)
        if not ok:
            last_err = "offset candidate not certified left of the image"
            continue
        cur = xi
        for piece in pieces:
            cur = wedge(cur, piece)
        post = brouwer_check(derive(f, Power(n - 1)), cur, chord_tol)
        if post.kind == "Yes":
            return cur
        last_err = f"descended line not certified ({post.kind}: {post.detail})"
    raise DescentError(f"descent from power {n} failed after 20 attempts: "
                       f"{last_err}")


def free_curve_from_shift(f: MapLift, l: PqPolyline, n: int,
                          chord_tol: float = 1e-6):
    """Turn a translate-bounded image into a curve pushed strictly right.

    Scans powers up to n for a certified f^k(l) < T1^k l; on success builds
    (recursively, via wedges with an auxiliary line near the top image) a
    line l* with l* < f(l*) < T1 l* certified, whose torus projection is
    free.  Otherwise returns NotApplicable with the sampled points whose
    images made the most horizontal progress.
    """
    if l.pq != (0, 1):
        raise ValueError("the shift criterion works on (0, 1)-lines")
    pre = brouwer_check(f, l, chord_tol)
    if pre.kind != "Yes":
        raise ValueError(f"line is not certified left of its image "
                         f"({pre.kind}: {pre.detail})")
    witnesses = []
    for k in range(1, n + 1):
        fk = derive(f, Power(k))
        img = map_line(fk, l, chord_tol)
        budget = max(img.error, chord_tol)
        target = translate_line(l, k, 0)
        ok, _ = _certified_less(img.line, target, 2 * budget)
        if ok:
            return _shift_descend(f, l, k, chord_tol)
        witnesses.append(_best_progress_witness(fk, l, k))
    return NotApplicable(tuple(witnesses),
                         f"no certified shift for any power up to {n}")


def _best_progress_witness(fk: MapLift, l: PqPolyline, k: int) -> ShiftWitness:
    samples = []
    for a, b in l.edges():
        for t in (0.0, 0.25, 0.5, 0.75):
            samples.append((float(a[0]) + t * (float(b[0]) - float(a[0])),
                            float(a[1]) + t * (float(b[1]) - float(a[1]))))
    xs = np.array([s[0] for s in samples])
    ys = np.array([s[1] for s in samples])
    ix, iy = backend.apply_program(fk.program, xs, ys)
    best = max(range(len(samples)), key=lambda i: float(ix[i]) - samples[i][0])
    return ShiftWitness(k, samples[best], (float(ix[best]), float(iy[best])))


def _shift_descend(f: MapLift, l: PqPolyline, k: int,
                   chord_tol: float) -> PqPolyline:
    """Certified f^k(l) < T1^k l and l left of f(l): descend to k = 1."""
    img1 = map_line(f, l, chord_tol)
    budget1 = max(img1.error, chord_tol)
    if k == 1:
        ok, _ = _certified_less(l, img1.line, 2 * budget1)
        if not ok:
            raise DescentError("base case lost its certificate")
        return l
    # The descended line is l wedged with the pulled-back images T1^-i f^i(l)
    # and, in place of the top piece, a right offset xi of f^{k-1}(l).  The
    # offset is what makes f^{k-1} of the wedge beat the T1^{k-1} translate
    # strictly: every translated piece is cleared by the image of the piece
    # one level up (that is the k-shift hypothesis), and xi itself is cleared
    # by the image of l, which lands on f^{k-1}(l), strictly left of xi.
    imgk1 = map_line(derive(f, Power(k - 1)), l, chord_tol)
    imgk = map_line(derive(f, Power(k)), l, chord_tol)
    room = math.sqrt(float(_min_gap2(_framed(imgk1.line), _framed(imgk.line))))
    eta = max((room - imgk1.error - imgk.error) / 2, 4.0 / _SNAP)
    pieces = [translate_line(map_line(derive(f, Power(i)), l, chord_tol).line,
                             -i, 0) for i in range(1, k - 1)]
    last_err = None
    for _ in range(20):
        xi = _offset_snap(imgk1.line, eta)
        eta /= 2
        if xi is None:
            last_err = "offset candidate failed validation"
            continue
        ok, _ = _certified_less(imgk1.line, xi,
                                2 * max(imgk1.error, chord_tol))
        if not ok:
            last_err = "offset candidate not certified right of the top image"
            continue
        fxi = map_line(f, xi, chord_tol)
        ok, _ = _certified_less(xi, fxi.line, 2 * max(fxi.error, chord_tol))
        if not ok:
            last_err = "auxiliary line not certified left of its image"
            continue
        beta = l
        for piece in pieces:
            beta = wedge(beta, piece)
        beta = wedge(beta, translate_line(xi, -(k - 1), 0))
        chk = brouwer_check(f, beta, chord_tol)
        if chk.kind != "Yes":
            last_err = f"wedged line not certified against its image ({chk.kind})"
            continue
        imgb = map_line(derive(f, Power(k - 1)), beta, chord_tol)
        okb, _ = _certified_less(imgb.line, translate_line(beta, k - 1, 0),
                                 2 * max(imgb.error, chord_tol))
        if not okb:
            last_err = "wedged line lost the shifted-image certificate"
            continue
        return _shift_descend(f, beta, k - 1, chord_tol)
    raise DescentError(f"shift descent at power {k} failed after 20 attempts: "
                       f"{last_err}")


def free_curve_check(f: MapLift, gamma: PqPolyline,
                     chord_tol: float = 1e-6) -> TriState:
    """Is the image of the curve disjoint from it on the torus?

    Compares the image polyline against the curve and every integer
    translate that comes near it; Yes needs clearance above twice the
    budget everywhere, No needs a forced crossing of the true image.
    """
    img = map_line(f, gamma, chord_tol)
    g, err = img.line, img.error
    budget = max(err, chord_tol)
    if g.pq not in (gamma.pq, (-gamma.pq[0], -gamma.pq[1])):
        return TriState("No", None,
                        f"image period {g.pq} is transverse to {gamma.pq}, "
                        "so some translate is crossed")
    mat = IDENT if gamma.pq == (0, 1) else _frame_matrix(gamma.pq)
    fg = _framed(gamma)
    fi = g if gamma.pq == (0, 1) else transform_line(g, mat)
    gx = [v[0] for v in fi.vertices]
    cx = [v[0] for v in fg.vertices]
    reach = 2 * budget + 1
    t_lo = floor(min(gx) - max(cx) - reach)
    t_hi = ceil(max(gx) - min(cx) + reach)
    worst = None
    all_clear = True
    for t in range(t_lo, t_hi + 1):
        h = translate_line(fg, t, 0)
        points, cutsg, _ = _meets(fi, h)
        if points:
            all_clear = False
            worst = 0.0
            if err == 0.0:
                return TriState("No", 0.0,
                                f"exact image meets translate ({t}, 0)")
            have = {"left": False, "right": False}
            for arc in _arcs_of(fi, cutsg, 1):
                mid = ((arc.pts[0][0] + arc.pts[1][0]) / 2,
                       (arc.pts[0][1] + arc.pts[1][1]) / 2)
                s = _point_side(mid, h)
                if s != "on" and _pt_line_dist2(mid, h) > _fr(err) ** 2:
                    have[s] = True
            if have["left"] and have["right"]:
                return TriState("No", 0.0,
                                f"image forced across translate ({t}, 0)")
            continue
        g2 = _min_gap2(fi, h)
        gap = math.sqrt(float(g2))
        if worst is None or gap < worst:
            worst = gap
        if not g2 > _fr(2 * budget) ** 2:
            all_clear = False
    if all_clear and worst is not None:
        return TriState("Yes", worst, "image clear of the curve and its "
                        "nearby translates")
    return TriState("Uncertain", worst if worst is not None else 0.0,
                    f"clearance {worst if worst is not None else 0:.3g} "
                    f"within budget {2 * budget:.3g}")


def descend_to_base(f: MapLift, gamma: PqPolyline, n: int,
                    chord_tol: float = 1e-6):
    """From a curve free for the n-th power to one free for the map itself.

    Shears the period upright, finds the pair of horizontal translates
    bracketing the image, re-bases the lift by the matching deck translation,
    runs the power descent down to 1 and then the shift construction.
    Returns the certified free curve in the original coordinates, or a
    DescentReport naming the branch that blocked.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    mat = IDENT if gamma.pq == (0, 1) else _frame_matrix(gamma.pq)
    if gamma.pq == (0, 1):
        fB, gB = f, gamma
    else:
        fB = derive(f, ConjugateBy(mat))
        gB = transform_line(gamma, mat)
    fn = derive(fB, Power(n))
    pre = free_curve_check(fn, gB, chord_tol)
    if pre.kind != "Yes":
        raise DescentError(f"precondition failed: curve not certified free "
                           f"for the power-{n} map ({pre.kind}: {pre.detail})")
    img = map_line(fn, gB, chord_tol)
    if img.line.pq != (0, 1):
        return DescentReport(
            "orientation",
            f"the power-{n} lift turns the period into {img.line.pq}; no "
            "comparable translate bracket exists")
    budget = max(img.error, chord_tol)
    gx = [v[0] for v in _framed(img.line).vertices]
    cx = [v[0] for v in gB.vertices]
    k_found = None
    for k in range(floor(min(gx) - max(cx)) - 1, ceil(max(gx) - min(cx)) + 2):
        lo_ok, _ = _certified_less(translate_line(gB, k, 0), img.line,
                                   2 * budget)
        hi_ok, _ = _certified_less(img.line, translate_line(gB, k + 1, 0),
                                   2 * budget)
        if lo_ok and hi_ok:
            k_found = k
            break
    if k_found is None:
        return DescentReport(
            "translate_interval",
            "power image not certified between consecutive translates of "
            "the curve")
    j = k_found // n
    f0 = derive(fB, Translate(-j, 0)) if j else fB
    chk = brouwer_check(derive(f0, Power(n)), gB, chord_tol)
    if chk.kind != "Yes":
        return DescentReport(
            "power_brouwer",
            f"re-based lift not certified to push the curve right "
            f"({chk.kind}: {chk.detail})")
    cur = gB
    for m in range(n, 1, -1):
        try:
            cur = brouwer_descend(f0, cur, m, chord_tol)
        except DescentError as e:
            return DescentReport("power_descent", str(e))
    res = free_curve_from_shift(f0, cur, n, chord_tol)
    if isinstance(res, NotApplicable):
        return DescentReport("shift_scan", res.detail, res.witnesses)
    fin = free_curve_check(f0, res, chord_tol)
    if fin.kind != "Yes":
        raise DescentError(f"final verification failed ({fin.kind}: "
                           f"{fin.detail})")
    if gamma.pq != (0, 1):
        res = transform_line(res, mat.inverse())
    return res


# ---------------------------------------------------------------------------
# serialization


def line_to_dict(l: PqPolyline) -> dict:
    return {"pq": [l.pq[0], l.pq[1]],
            "vertices": [[v[0].numerator, v[0].denominator,
                          v[1].numerator, v[1].denominator]
                         for v in l.vertices]}


def line_from_dict(d: dict) -> PqPolyline:
    unknown = set(d) - {"pq", "vertices"}
    if unknown:
        raise ValueError(f"unknown line fields: {sorted(unknown)}")
    pq = d["pq"]
    if len(pq) != 2:
        raise ValueError("pq must be a pair")
    verts = []
    for row in d["vertices"]:
        if len(row) != 4 or not all(isinstance(v, int) for v in row):
            raise ValueError(f"vertex rows are [xn, xd, yn, yd] ints: {row}")
        xn, xd, yn, yd = row
        if xd <= 0 or yd <= 0 or gcd(xn, xd) != 1 or gcd(yn, yd) != 1:
            raise ValueError(f"vertex not in canonical lowest terms: {row}")
        verts.append((Fraction(xn, xd), Fraction(yn, yd)))
    return PqPolyline((int(pq[0]), int(pq[1])), verts)


def load_line(path) -> PqPolyline:
    with open(path, "r", encoding="utf-8") as fh:
        return line_from_dict(json.load(fh))


def save_line(l: PqPolyline, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(line_to_dict(l), fh, indent=2, sort_keys=True)
        fh.write("\n")
