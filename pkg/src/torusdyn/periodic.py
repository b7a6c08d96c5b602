"""Certified search for periodic points realizing rational rotation vectors.

A vector (p1/q, p2/q) is realized by a periodic point when the derived lift
g = T1^{-p1} T2^{-p2} f^q fixes some point of the plane, so the search comes
down to locating zeros of the displacement d(x) = g(x) - x.  Zeros are
certified by the topological degree of d along box boundaries: when the
sampled field never comes close to zero and consecutive samples turn by less
than a right angle, the sampled winding number equals the true degree.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
import json

import numpy as np

from torusdyn._kernels import backend
from torusdyn.lift import MapLift, Power, Translate, derive, map_to_dict

__all__ = [
    "RationalVector", "Box", "DegreeCertificate", "Uncertain",
    "DisplacementField", "FindReport",
    "displacement_field", "winding_degree", "find_periodic",
    "shrink_certificate", "export_certificate",
]

NEAR_ZERO_FLOOR = 1e-10
IDENTITY_RESIDUAL = 1e-12


@dataclass(frozen=True)
class RationalVector:
    """Rotation vector (p1/q, p2/q) with p1, p2, q mutually coprime."""

    p1: int
    p2: int
    q: int

    def __post_init__(self):
        for name in ("p1", "p2", "q"):
            if not isinstance(getattr(self, name), int):
                raise TypeError(f"{name} must be an integer")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if gcd(gcd(self.p1, self.p2), self.q) != 1:
            raise ValueError("p1, p2, q must be mutually coprime")

    def as_pair(self):
        return (Fraction(self.p1, self.q), Fraction(self.p2, self.q))

    def __str__(self):
        return f"({Fraction(self.p1, self.q)}, {Fraction(self.p2, self.q)})"


def _fr(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(v).limit_denominator(1 << 52)
    return Fraction(v)


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle with rational corners.

    Boxes may stick out of [0, 1)^2; the displacement field is periodic, so
    everything is read modulo Z^2.
    """

    x0: Fraction
    y0: Fraction
    x1: Fraction
    y1: Fraction

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            object.__setattr__(self, name, _fr(getattr(self, name)))
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("box must have positive width and height")

    @property
    def width(self) -> Fraction:
        return self.x1 - self.x0

    @property
    def height(self) -> Fraction:
        return self.y1 - self.y0

    @property
    def diameter(self) -> Fraction:
        """Longest side.  Shrinking targets compare against this."""
        return max(self.width, self.height)

    def center(self):
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def split(self, ratio=Fraction(5, 11)):
        """Four children cut at the given off-center ratio of each side."""
        xm = self.x0 + self.width * ratio
        ym = self.y0 + self.height * ratio
        return (Box(self.x0, self.y0, xm, ym), Box(xm, self.y0, self.x1, ym),
                Box(self.x0, ym, xm, self.y1), Box(xm, ym, self.x1, self.y1))

    def as_dict(self):
        return {"x0": str(self.x0), "y0": str(self.y0),
                "x1": str(self.x1), "y1": str(self.y1)}


@dataclass(frozen=True)
class Uncertain:
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class DegreeCertificate:
    """A box on whose boundary the displacement certifiably winds.

    degree is the winding number of d along the counterclockwise boundary;
    a nonzero value forces a zero of d, hence a realizing periodic point,
    inside the box.  boundary_min is the smallest sampled displacement norm
    and refinement the number of boundary samples that the certification
    used; tightening the sampling can only confirm the certificate.
    """

    box: Box
    degree: int
    boundary_min: float
    refinement: int

    def __post_init__(self):
        if self.degree == 0:
            raise ValueError("certificate degree must be nonzero")
        if not self.boundary_min > 0:
            raise ValueError("boundary_min must be positive")

    def as_dict(self):
        return {"box": self.box.as_dict(), "degree": self.degree,
                "boundary_min": self.boundary_min,
                "refinement": self.refinement}


@dataclass(frozen=True)
class DisplacementField:
    """Evaluates d(x) = g(x) - x for the derived lift g = T^{-p} f^q."""

    lift: MapLift
    vector: RationalVector

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx, gy = backend.apply_program(self.lift.program, x, y)
        return gx - x, gy - y


def _total_linear_part(f: MapLift):
    a, b, c, d = 1, 0, 0, 1
    for s in f.program.steps:
        if s.kind == 1:
            m = s.mat
            a, b, c, d = (m[0] * a + m[1] * c, m[0] * b + m[1] * d,
                          m[2] * a + m[3] * c, m[2] * b + m[3] * d)
    return (a, b, c, d)


def displacement_field(f: MapLift, v: RationalVector) -> DisplacementField:
    """Displacement of the derived lift whose fixed points realize v.

    The zeros of the returned field are exactly the points x with
    f^q(x) = x + (p1, p2).
    """
    g = derive(derive(f, Power(v.q)), Translate(-v.p1, -v.p2))
    if _total_linear_part(g) != (1, 0, 0, 1):
        raise ValueError("displacement is only doubly periodic for lifts "
                         "with identity linear part")
    return DisplacementField(g, v)


def _boundary_points(box: Box, params):
    """Map loop parameters in [0, 1) to boundary points, counterclockwise."""
    x0, y0 = float(box.x0), float(box.y0)
    x1, y1 = float(box.x1), float(box.y1)
    t = np.asarray(params, dtype=float)
    s = 4.0 * t
    xs = np.empty_like(s)
    ys = np.empty_like(s)
    m = s < 1.0
    xs[m] = x0 + (x1 - x0) * s[m]
    ys[m] = y0
    m = (s >= 1.0) & (s < 2.0)
    xs[m] = x1
    ys[m] = y0 + (y1 - y0) * (s[m] - 1.0)
    m = (s >= 2.0) & (s < 3.0)
    xs[m] = x1 - (x1 - x0) * (s[m] - 2.0)
    ys[m] = y1
    m = s >= 3.0
    xs[m] = x0
    ys[m] = y1 - (y1 - y0) * (s[m] - 3.0)
    return xs, ys


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _winding(d, box, max_refine, floor):
    """(status, degree, boundary_min, samples); status in {"ok", reason}."""
    params = [i / 32.0 for i in range(32)]
    xs, ys = _boundary_points(box, params)
    dx, dy = d(xs, ys)
    norms = np.hypot(dx, dy)
    angles = np.arctan2(dy, dx)
    for _ in range(max_refine + 1):
        if float(norms.min()) <= floor:
            return ("boundary sample too close to zero", None,
                    float(norms.min()), len(params))
        turns = _wrap_angle(np.diff(np.concatenate([angles, angles[:1]])))
        bad = np.abs(turns) >= np.pi / 2
        if not bad.any():
            total = float(turns.sum())
            deg = round(total / (2.0 * np.pi))
            if abs(total - 2.0 * np.pi * deg) > 0.5:
                return ("winding sum far from an integer", None,
                        float(norms.min()), len(params))
            return ("ok", deg, float(norms.min()), len(params))
        new = []
        n = len(params)
        for i in np.nonzero(bad)[0]:
            a = params[i]
            b = params[(i + 1) % n] + (1.0 if i + 1 == n else 0.0)
            new.append(((a + b) / 2.0) % 1.0)
        xs, ys = _boundary_points(box, new)
        ndx, ndy = d(xs, ys)
        params = params + new
        order = np.argsort(params)
        params = [params[i] for i in order]
        dx = np.concatenate([dx, ndx])[order]
        dy = np.concatenate([dy, ndy])[order]
        norms = np.hypot(dx, dy)
        angles = np.arctan2(dy, dx)
    return ("sampling budget exhausted", None, float(norms.min()),
            len(params))


def winding_degree(d: DisplacementField, box: Box, max_refine: int = 12):
    """Winding number of the field along the box boundary, or Uncertain.

    Certification rule: every sampled norm stays above the near-zero floor
    and consecutive samples turn by less than pi/2, so the polygonal field
    loop cannot cross zero between samples unless the field wiggles below
    the reported sampling scale.
    """
    status, deg, _, _ = _winding(d, box, max_refine, NEAR_ZERO_FLOOR)
    if status != "ok":
        return Uncertain(status)
    return deg


@dataclass(frozen=True)
class FindReport:
    """Outcome of a periodic-point search for one rotation vector."""

    vector: RationalVector
    certificates: tuple = ()
    candidates: tuple = ()
    identity_displacement: bool = False
    residual: float = float("nan")

    def as_dict(self):
        return {"vector": {"p1": self.vector.p1, "p2": self.vector.p2,
                           "q": self.vector.q},
                "certificates": [c.as_dict() for c in self.certificates],
                "candidates": [b.as_dict() for b in self.candidates],
                "identity_displacement": self.identity_displacement,
                "residual": self.residual}


def _identity_residual(d) -> float:
    ticks = np.arange(64) / 64.0
    gx, gy = np.meshgrid(ticks, ticks)
    off = 1.0 / 128.0
    xs = np.concatenate([gx.ravel(), gx.ravel() + off])
    ys = np.concatenate([gy.ravel(), gy.ravel() + off])
    dx, dy = d(xs, ys)
    return float(np.max(np.hypot(dx, dy)))


def _search_box(d, box, min_box, max_refine):
    """Depth-first refinement of one box; deterministic child order."""
    certs = []
    cands = []
    stack = [box]
    while stack:
        b = stack.pop()
        status, deg, bmin, samples = _winding(d, b, max_refine,
                                              NEAR_ZERO_FLOOR)
        if status == "ok":
            if deg != 0:
                certs.append(DegreeCertificate(b, deg, bmin, samples))
            continue
        if b.diameter <= min_box:
            cands.append(b)
            continue
        stack.extend(reversed(b.split()))
    return certs, cands


def find_periodic(f: MapLift, v: RationalVector, grid: int = 16,
                  min_box: float = 1e-3, *, max_refine: int = 12,
                  workers: int = 1) -> FindReport:
    """Search the fundamental domain for points realizing v.

    The domain is covered by grid x grid boxes centered on the lattice
    points (i/grid, j/grid), where displacement zeros land for the maps
    built from sine lattices.  Boxes whose boundary certifies a nonzero
    degree become certificates; boxes that resist certification are split
    at 5/11 of each side until min_box and then reported as uncertified
    candidates.  If the displacement is numerically the zero field the
    report says so instead: every point realizes v.

    Certificates prove presence.  An empty report means nothing was found
    at this resolution, never that no periodic point exists.
    """
    if grid < 4:
        raise ValueError("grid must be at least 4")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    d = displacement_field(f, v)
    residual = _identity_residual(d)
    if residual < IDENTITY_RESIDUAL:
        return FindReport(v, identity_displacement=True, residual=residual)
    half = Fraction(1, 2 * grid)
    boxes = [Box(Fraction(i, grid) - half, Fraction(j, grid) - half,
                 Fraction(i, grid) + half, Fraction(j, grid) + half)
             for j in range(grid) for i in range(grid)]
    mb = _fr(min_box)
    if workers == 1:
        results = [_search_box(d, b, mb, max_refine) for b in boxes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda b: _search_box(d, b, mb, max_refine), boxes))
    certs = []
    cands = []
    for cs, bs in results:
        certs.extend(cs)
        cands.extend(bs)
    return FindReport(v, tuple(certs), tuple(cands), False, residual)


def shrink_certificate(d: DisplacementField, cert: DegreeCertificate,
                       target: float, max_refine: int = 12):
    """Shrink the certified box around its zero to the target diameter.

    Repeatedly splits the box off-center and keeps a child certifying the
    same degree; the uneven 5/11 cut keeps split lines from landing on the
    zero when it sits at a round coordinate.  Raises if no child certifies.
    """
    box = cert.box
    best = cert
    ratios = (Fraction(5, 11), Fraction(1, 2), Fraction(6, 13))
    while best.box.diameter > _fr(target):
        found = None
        for ratio in ratios:
            for child in best.box.split(ratio):
                status, deg, bmin, samples = _winding(
                    d, child, max_refine, NEAR_ZERO_FLOOR)
                if status == "ok" and deg == best.degree:
                    found = DegreeCertificate(child, deg, bmin, samples)
                    break
            if found is not None:
                break
        if found is None:
            raise RuntimeError(
                f"no child of {best.box.as_dict()} certifies degree "
                f"{best.degree}")
        best = found
    return best


def export_certificate(cert: DegreeCertificate, d: DisplacementField) -> str:
    """Structured text for a certificate, with the derived-lift recipe."""
    lines = ["periodic point certificate",
             f"vector: {d.vector}",
             f"degree: {cert.degree}",
             f"boundary_min: {cert.boundary_min!r}",
             f"refinement: {cert.refinement}",
             "box:"]
    b = cert.box
    for name, val in (("x0", b.x0), ("y0", b.y0), ("x1", b.x1),
                      ("y1", b.y1)):
        lines.append(f"  {name}: {val}")
    lines.append("derived lift:")
    recipe = json.dumps(map_to_dict(d.lift), sort_keys=True, indent=2)
    lines.extend("  " + row for row in recipe.splitlines())
    return "\n".join(lines) + "\n"
