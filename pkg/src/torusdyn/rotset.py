"""Finite-time estimation and shape classification of rotation sets.

The rotation set of a torus lift collects the accumulation points of the
averages (f^n(x) - x)/n.  No finite computation exhausts that definition,
so this module reports a pair of convex hulls instead: an outer hull built
from grid orbits and padded by a measured slack, and an inner hull built
from tail-window averages of the same orbits with no padding.  The gap
between the two is the honest error indicator.  Poor convergence widens
the gap; it never silently produces a tighter claim.

Classification of the estimate (single point, segment of rational or
irrational slope, full dimensional) follows the same philosophy: every
threshold comparison has an undecided band of width given by the hull
gap, and the safe outcome is always available.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._kernels import backend
from .gl2z import FareyInterval, PlaneVector, cf_expand, convergents, smallest_farey_containing

__all__ = [
    "RotSetEstimate",
    "RotSetClass",
    "CriterionReport",
    "SemiplaneCheck",
    "finite_time_displacement",
    "estimate_rotation_set",
    "classify_rotation_set",
    "free_curve_criterion",
    "semiplane_bound_check",
    "convex_hull",
    "hull_distance",
    "hausdorff_distance",
]

# Orbits are integrated in fixed-size blocks so the reduction order, and
# with it every output bit, is independent of the worker count.
_CHUNK_POINTS = 4096


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Convex hull vertices in counterclockwise order (monotone chain).

    Degenerate clouds collapse honestly: a single vertex when all points
    coincide, two vertices for a collinear cloud.  Points interior to an
    edge are dropped, so every consecutive vertex triple of the result
    turns strictly left.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if not pts:
        raise ValueError("empty point cloud")
    if len(pts) == 1:
        return (pts[0],)

    def chain(seq):
        out = []
        for p in seq:
            while len(out) > 1 and _cross(out[-2], out[-1], p) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    return tuple(lower[:-1] + upper[:-1])


def _segment_distance(px, py, a, b):
    ax, ay = a
    vx, vy = b[0] - ax, b[1] - ay
    den = vx * vx + vy * vy
    if den > 0.0:
        t = ((px - ax) * vx + (py - ay) * vy) / den
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    else:
        t = 0.0
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def hull_distance(point, hull):
    """Euclidean distance from a point to the convex region spanned by a hull.

    Zero when the point lies inside.  The hull may be degenerate (one or
    two vertices).
    """
    px, py = float(point[0]), float(point[1])
    if len(hull) == 1:
        return math.hypot(px - hull[0][0], py - hull[0][1])
    if len(hull) == 2:
        return _segment_distance(px, py, hull[0], hull[1])
    inside = True
    best = math.inf
    for i, a in enumerate(hull):
        b = hull[(i + 1) % len(hull)]
        if _cross(a, b, (px, py)) < 0.0:
            inside = False
        d = _segment_distance(px, py, a, b)
        if d < best:
            best = d
    return 0.0 if inside else best


def hausdorff_distance(hull_a, hull_b):
    """Hausdorff distance between two convex regions given by hull vertices.

    For convex sets the supremum of the distance function is attained at a
    vertex, so checking vertices in both directions is exact.
    """
    d = 0.0
    for v in hull_a:
        d = max(d, hull_distance(v, hull_b))
    for v in hull_b:
        d = max(d, hull_distance(v, hull_a))
    return d


def _polygon_area(hull):
    if len(hull) < 3:
        return 0.0
    s = 0.0
    for i, (ax, ay) in enumerate(hull):
        bx, by = hull[(i + 1) % len(hull)]
        s += ax * by - bx * ay
    return abs(s) / 2.0


def _farthest_pair(hull):
    best = 0.0
    pair = (hull[0], hull[0])
    for i, a in enumerate(hull):
        for b in hull[i + 1:]:
            d = math.hypot(b[0] - a[0], b[1] - a[1])
            if d > best:
                best = d
                pair = (a, b)
    return best, pair


@dataclass(frozen=True)
class RotSetEstimate:
    """Two-sided finite-time picture of a rotation set.

    outer_hull contains every observed finite-time displacement average,
    padded by the measured per-step slack; inner_hull is the unpadded hull
    of the tail-window averages alone.  gap is the Hausdorff distance
    between the two regions and inflation the padding radius that was
    applied to the outer one.
    """

    outer_hull: tuple
    inner_hull: tuple
    n: int
    grid: int
    gap: float
    inflation: float = 0.0
    samples: object = field(default=None, compare=False, repr=False)

    def as_dict(self):
        return {
            "outer_hull": [[x, y] for x, y in self.outer_hull],
            "inner_hull": [[x, y] for x, y in self.inner_hull],
            "n": self.n,
            "grid": self.grid,
            "gap": self.gap,
            "inflation": self.inflation,
        }


@dataclass(frozen=True)
class RotSetClass:
    """Shape verdict for an estimate, together with the tolerances used.

    kind is one of Point, SegmentRationalSlope, SegmentIrrationalSlope,
    FullDimensional, Undecided.  For rational-slope segments, direction is
    a primitive integer vector and slope its rise over run as a Fraction,
    with None meaning vertical.  Whenever the deciding quantity falls
    within the estimate's own uncertainty of a threshold the verdict is
    Undecided and detail says which comparison was too close to call.
    """

    kind: str
    direction: tuple = None
    slope: object = None
    tol_width: float = 0.0
    tol_dir: float = None
    slope_denominator_bound: int = None
    detail: str = ""

    def as_dict(self):
        return {
            "kind": self.kind,
            "direction": list(self.direction) if self.direction else None,
            "slope": str(self.slope) if self.slope is not None else None,
            "tol_width": self.tol_width,
            "tol_dir": self.tol_dir,
            "slope_denominator_bound": self.slope_denominator_bound,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of the free-curve hypothesis check on one axis.

    When the projection of the outer hull sits strictly inside an
    integer-free unit window, farey_interval is the smallest Farey
    interval strictly containing it and disjoint_iterates the guaranteed
    count q + q' - 1 of pairwise disjoint curve iterates.  Otherwise the
    interval is absent and the count zero.
    """

    farey_interval: object
    disjoint_iterates: int
    axis: int
    margin: float
    semiplane_checks: tuple = ()

    def as_dict(self):
        iv = self.farey_interval
        return {
            "farey_interval": None if iv is None else [
                [iv.lo.numerator, iv.lo.denominator],
                [iv.hi.numerator, iv.hi.denominator],
            ],
            "disjoint_iterates": self.disjoint_iterates,
            "axis": self.axis,
            "margin": self.margin,
            "semiplane_checks": [c.as_dict() for c in self.semiplane_checks],
        }


@dataclass(frozen=True)
class SemiplaneCheck:
    pq: tuple
    side: str
    passed: bool
    margin: float
    tol: float

    def as_dict(self):
        return {
            "pq": list(self.pq),
            "side": self.side,
            "passed": self.passed,
            "margin": self.margin,
            "tol": self.tol,
        }


def finite_time_displacement(f, x, n):
    """Average displacement (f^n(x) - x)/n of a single lift point."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x0 = np.array([float(x[0])])
    y0 = np.array([float(x[1])])
    _, _, xf, yf, _ = backend.run_orbits(f.program, x0, y0, int(n), 0)
    return PlaneVector((xf[0] - x0[0]) / n, (yf[0] - y0[0]) / n)


def _orbit_chunks(program, x0, y0, n, nmid, workers):
    spans = [(s, min(s + _CHUNK_POINTS, x0.size))
             for s in range(0, x0.size, _CHUNK_POINTS)]

    def run(span):
        a, b = span
        return backend.run_orbits(program, x0[a:b], y0[a:b], n, nmid)

    if workers <= 1 or len(spans) == 1:
        return [run(s) for s in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, spans))


def estimate_rotation_set(f, grid, n, *, workers=1, keep_samples=False):
    """Outer and inner hull estimate of the rotation set of a lift.

    Orbits of length n are started on the uniform grid {(i/grid, j/grid)}.
    The outer hull collects the full-horizon averages (f^n(x) - x)/n and
    the tail-window averages over steps n//2..n, then grows by a padding
    derived from the data itself: any true rotation vector realized along
    an orbit differs from the orbit's finite average by at most 2*D/n by
    the usual telescoping bound, where D is the diameter of the observed
    one-step displacement cloud.  A lift translating every point by the
    same vector therefore earns essentially zero padding, as it should,
    since its finite averages are already exact.  Padding is applied as a
    Minkowski sum with a regular 16-gon circumscribing the 2*D/n disc.

    The inner hull spans the tail-window averages alone, with no padding;
    the window means are genuine finite-time observations, which is also
    why they may join the outer cloud, and keeping them there makes the
    containment of inner in outer structural rather than numerical.

    Work is split into fixed 4096-point blocks merged in grid order, so
    the result is bit-for-bit reproducible for any worker count.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    ticks = np.arange(grid, dtype=np.float64) / grid
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    x0 = np.ascontiguousarray(gx.ravel())
    y0 = np.ascontiguousarray(gy.ravel())

    nmid = n // 2
    wlen = n - nmid
    parts = _orbit_chunks(f.program, x0, y0, n, nmid, workers)

    xm = np.concatenate([p[0] for p in parts])
    ym = np.concatenate([p[1] for p in parts])
    xf = np.concatenate([p[2] for p in parts])
    yf = np.concatenate([p[3] for p in parts])
    dxmin = min(p[4][0] for p in parts)
    dxmax = max(p[4][1] for p in parts)
    dymin = min(p[4][2] for p in parts)
    dymax = max(p[4][3] for p in parts)

    full_dx = (xf - x0) / n
    full_dy = (yf - y0) / n
    tail_dx = (xf - xm) / wlen
    tail_dy = (yf - ym) / wlen

    spread = math.hypot(dxmax - dxmin, dymax - dymin)
    pad = 2.0 * spread / n

    cloud = zip(np.concatenate([full_dx, tail_dx]),
                np.concatenate([full_dy, tail_dy]))
    core = convex_hull(cloud)
    if pad > 0.0:
        radius = pad / math.cos(math.pi / 16.0)
        ring = [(radius * math.cos((2 * k + 1) * math.pi / 16.0),
                 radius * math.sin((2 * k + 1) * math.pi / 16.0))
                for k in range(16)]
        outer = convex_hull((vx + wx, vy + wy)
                            for vx, vy in core for wx, wy in ring)
    else:
        outer = core
    inner = convex_hull(zip(tail_dx, tail_dy))

    gap = hausdorff_distance(outer, inner)
    samples = np.column_stack([full_dx, full_dy]) if keep_samples else None
    return RotSetEstimate(outer_hull=outer, inner_hull=inner, n=n, grid=grid,
                          gap=gap, inflation=pad, samples=samples)


def _canonical_direction(ux, uy):
    if uy < 0.0 or (uy == 0.0 and ux < 0.0):
        return -ux, -uy
    return ux, uy


def classify_rotation_set(e, tol_width=None, slope_denominator_bound=50):
    """Decide the shape of an estimated rotation set, conservatively.

    The outer hull diameter against tol_width separates points from
    extended sets, the inner hull area against tol_width^2 separates
    genuinely two-dimensional sets, and anything in between is treated as
    a segment whose direction comes from the outer hull's farthest vertex
    pair.  That direction is matched to a primitive rational direction
    with slope denominator at most the bound, through the continued
    fraction convergents of the measured slope.  Each comparison carries
    an undecided band sized by the estimate's gap, so a verdict is only
    issued when the data actually supports it.  tol_width defaults to
    five times the gap with a 1e-9 floor.
    """
    gap = e.gap
    if tol_width is None:
        tol_width = max(5.0 * gap, 1e-9)
    common = {"tol_width": tol_width,
              "slope_denominator_bound": slope_denominator_bound}

    diam, pair = _farthest_pair(e.outer_hull)
    if diam < tol_width - gap:
        return RotSetClass("Point", **common)
    if diam <= tol_width + gap:
        return RotSetClass("Undecided", detail="outer hull diameter within "
                           "the gap of the width threshold", **common)

    area = _polygon_area(e.inner_hull)
    if area > tol_width ** 2 + gap ** 2:
        return RotSetClass("FullDimensional", **common)
    if area > tol_width ** 2 - gap ** 2:
        return RotSetClass("Undecided", detail="inner hull area within the "
                           "squared gap of the area threshold", **common)

    (ax, ay), (bx, by) = pair
    ux, uy = _canonical_direction(bx - ax, by - ay)
    tol_dir = max(2.0 * gap / diam, 1e-12)
    common["tol_dir"] = tol_dir

    off_vertical = abs(ux) / diam
    if off_vertical <= tol_dir:
        return RotSetClass("SegmentRationalSlope", direction=(0, 1),
                           slope=None, **common)
    if off_vertical <= 2.0 * tol_dir:
        return RotSetClass("Undecided", detail="direction too close to "
                           "vertical to separate from finite slopes", **common)

    slope = Fraction(uy) / Fraction(ux)
    best = None
    best_sin = math.inf
    for c in convergents(cf_expand(slope, 64)):
        if c.denominator > slope_denominator_bound:
            break
        w = (float(c.denominator), float(c.numerator))
        s = abs(ux * w[1] - uy * w[0]) / (diam * math.hypot(*w))
        if s < best_sin:
            best, best_sin = c, s
    if best_sin <= tol_dir:
        dx, dy = _canonical_direction(best.denominator, best.numerator)
        return RotSetClass("SegmentRationalSlope", direction=(int(dx), int(dy)),
                           slope=best, **common)
    if best_sin > 2.0 * tol_dir:
        return RotSetClass("SegmentIrrationalSlope",
                           direction=(ux / diam, uy / diam), **common)
    return RotSetClass("Undecided", detail="segment direction within the "
                       "gap of the best rational slope", **common)


def free_curve_criterion(e, axis):
    """Check the disjoint-iterates hypothesis on one coordinate projection.

    Projects the outer hull to the chosen axis (1 or 2).  If the projected
    interval avoids the integers strictly, with margin exceeding the hull
    gap, the smallest Farey interval strictly containing it is reported
    together with the guaranteed number q + q' - 1 of pairwise disjoint
    iterates of a free curve.  A projection touching or containing an
    integer, or one whose clearance is not larger than the gap, yields no
    interval and a count of zero; strict inclusion is never asserted from
    data that cannot support it.
    """
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    coords = [v[axis - 1] for v in e.outer_hull]
    lo, hi = min(coords), max(coords)
    k = math.floor(lo)
    margin = min(lo - k, (k + 1) - hi)
    if hi >= k + 1 or margin <= e.gap or margin <= 0.0:
        return CriterionReport(None, 0, axis, margin)
    interval = smallest_farey_containing(Fraction(lo), Fraction(hi))
    return CriterionReport(interval, interval.denominator_sum - 1, axis, margin)


def semiplane_bound_check(e, pq, side, tol=None):
    """Test whether the outer hull sits in a closed semiplane, with margin.

    The semiplane is bounded by the line through the origin with direction
    (p, q); "left" and "right" are taken facing along that direction.  The
    margin is the smallest signed distance of an outer hull vertex to the
    line, positive inside the semiplane, and the check passes when the
    margin is at least -tol.  tol defaults to the estimate's gap.
    """
    p, q = pq
    if math.gcd(p, q) != 1:
        raise ValueError("(p, q) must be coprime")
    if side == "left":
        nx, ny = -q, p
    elif side == "right":
        nx, ny = q, -p
    else:
        raise ValueError("side must be 'left' or 'right'")
    if tol is None:
        tol = e.gap
    scale = math.hypot(nx, ny)
    margin = min((nx * vx + ny * vy) / scale for vx, vy in e.outer_hull)
    return SemiplaneCheck(pq=(p, q), side=side, passed=margin >= -tol,
                          margin=margin, tol=tol)
