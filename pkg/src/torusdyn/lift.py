"""Lifts of torus homeomorphisms homotopic to the identity.

A lift is represented as

    f(x, y) = (x + alpha + P(x, y), y + beta + Q(x, y))

with P, Q trigonometric polynomials over integer frequency vectors, so
commutation with the deck translations T1, T2 holds by construction.
Derived maps (powers, deck translations, conjugation by a unimodular
matrix, inverses, compositions) are kept as a derivation chain over the
base data and compiled to a flat step program executed by the kernel
backends in :mod:`torusdyn._kernels`.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from torusdyn._kernels import Program, Step, backend
from torusdyn.gl2z import IntMatrix2

__all__ = [
    "Term", "MapLift", "Power", "Translate", "ConjugateBy", "Inverse",
    "ComposeWith", "JacobianScreen",
    "evaluate", "orbit", "derive", "compose", "commutation_residual",
    "jacobian_screen",
    "rigid_lift", "skew_lift", "half_shift_lift", "sine_product_lift",
    "two_rest_points_lift",
    "map_from_dict", "map_to_dict", "load_map", "save_map",
]


@dataclass(frozen=True)
class Term:
    """One Fourier term amp_sin*sin(2pi(kx x + ky y)) + amp_cos*cos(...)."""

    kx: int
    ky: int
    amp_sin: float = 0.0
    amp_cos: float = 0.0

    def __post_init__(self):
        for k in (self.kx, self.ky):
            if not isinstance(k, int) or isinstance(k, bool):
                raise ValueError(f"frequency {k!r} is not an integer")
        for a in (self.amp_sin, self.amp_cos):
            if not math.isfinite(a):
                raise ValueError("amplitudes must be finite")

    def row(self):
        return (self.kx, self.ky, self.amp_sin, self.amp_cos)


@dataclass(frozen=True)
class Power:
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("power must be >= 1")


@dataclass(frozen=True)
class Translate:
    m: int
    n: int

    def __post_init__(self):
        if self.m != int(self.m) or self.n != int(self.n):
            raise ValueError("deck translations need integer components")


@dataclass(frozen=True)
class ConjugateBy:
    matrix: IntMatrix2


@dataclass(frozen=True)
class Inverse:
    pass


@dataclass(frozen=True)
class ComposeWith:
    """Precompose: derive(f, ComposeWith(g)) evaluates x -> f(g(x))."""

    inner: "MapLift"


def _affine_step(mat: IntMatrix2, tx=0.0, ty=0.0) -> Step:
    return Step(1, mat=(mat.a, mat.b, mat.c, mat.d), trans=(tx, ty))


def _invert_step(s: Step) -> Step:
    if s.kind == 0:
        return Step(2, trans=s.trans, pterms=s.pterms, qterms=s.qterms)
    if s.kind == 2:
        return Step(0, trans=s.trans, pterms=s.pterms, qterms=s.qterms)
    m = IntMatrix2(*s.mat).inverse()
    tx, ty = s.trans
    return _affine_step(m, -(m.a * tx + m.b * ty), -(m.c * tx + m.d * ty))


@dataclass(frozen=True)
class MapLift:
    """Immutable lift; the compiled program is built once at construction."""

    alpha: float
    beta: float
    p_terms: tuple = ()
    q_terms: tuple = ()
    derivation: tuple = ()
    name: str = ""
    program: Program = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("translation constants must be finite")
        for t in (*self.p_terms, *self.q_terms):
            if not isinstance(t, Term):
                raise TypeError("p_terms/q_terms must hold Term values")
        object.__setattr__(self, "p_terms", tuple(self.p_terms))
        object.__setattr__(self, "q_terms", tuple(self.q_terms))
        object.__setattr__(self, "derivation", tuple(self.derivation))
        object.__setattr__(self, "program", _compile(self))

    def __eq__(self, other):
        if not isinstance(other, MapLift):
            return NotImplemented
        return (self.alpha, self.beta, self.p_terms, self.q_terms,
                self.derivation) == (other.alpha, other.beta, other.p_terms,
                                     other.q_terms, other.derivation)

    def __hash__(self):
        return hash((self.alpha, self.beta, self.p_terms, self.q_terms,
                     self.derivation))


def _compile(f: MapLift) -> Program:
    steps = [Step(0, trans=(f.alpha, f.beta),
                  pterms=[t.row() for t in f.p_terms],
                  qterms=[t.row() for t in f.q_terms])]
    for node in f.derivation:
        if isinstance(node, Power):
            steps = steps * node.q
        elif isinstance(node, Translate):
            steps = steps + [Step(1, trans=(node.m, node.n))]
        elif isinstance(node, ConjugateBy):
            a = node.matrix
            steps = [_affine_step(a.inverse())] + steps + [_affine_step(a)]
        elif isinstance(node, Inverse):
            steps = [_invert_step(s) for s in reversed(steps)]
        elif isinstance(node, ComposeWith):
            steps = list(node.inner.program.steps) + steps
        else:
            raise TypeError(f"unknown derivation node {node!r}")
    return Program(steps)


def _raw_lift(alpha, beta, p_terms, q_terms):
    """Test-only constructor that skips frequency validation.

    Lets tests inject a non-integer frequency to show the commutation
    residual catches it; never used by library code.
    """
    f = object.__new__(MapLift)
    object.__setattr__(f, "alpha", float(alpha))
    object.__setattr__(f, "beta", float(beta))
    terms = lambda rows: tuple(rows)
    object.__setattr__(f, "p_terms", terms(p_terms))
    object.__setattr__(f, "q_terms", terms(q_terms))
    object.__setattr__(f, "derivation", ())
    object.__setattr__(f, "name", "raw")
    steps = [Step(0, trans=(alpha, beta), pterms=p_terms, qterms=q_terms)]
    object.__setattr__(f, "program", Program(steps))
    return f


def evaluate(f: MapLift, p):
    """Image of the point p = (x, y) under the lift."""
    x, y = backend.apply_program(f.program, np.array([p[0]], dtype=np.float64),
                                 np.array([p[1]], dtype=np.float64))
    out = (float(x[0]), float(y[0]))
    if not (math.isfinite(out[0]) and math.isfinite(out[1])):
        raise ArithmeticError(f"evaluation produced a non-finite point {out}")
    return out


def orbit(f: MapLift, p, n: int):
    """The list p, f(p), ..., f^n(p)."""
    if n < 1:
        raise ValueError("need n >= 1")
    pts = [(float(p[0]), float(p[1]))]
    for _ in range(n):
        pts.append(evaluate(f, pts[-1]))
    return pts


def derive(f: MapLift, op) -> MapLift:
    """New lift evaluating as the indicated composition over f."""
    if not isinstance(op, (Power, Translate, ConjugateBy, Inverse, ComposeWith)):
        raise TypeError(f"unsupported derivation {op!r}")
    return MapLift(f.alpha, f.beta, f.p_terms, f.q_terms,
                   f.derivation + (op,), f.name)


def compose(outer: MapLift, inner: MapLift) -> MapLift:
    """Lift evaluating x -> outer(inner(x))."""
    return derive(outer, ComposeWith(inner))


def commutation_residual(f: MapLift, sample_count: int, seed: int = 0) -> float:
    """Largest deviation from f(x + e_i) = f(x) + e_i over random samples."""
    if sample_count < 1:
        raise ValueError("need at least one sample")
    rng = random.Random(seed)
    x = np.array([rng.uniform(-3.0, 3.0) for _ in range(sample_count)])
    y = np.array([rng.uniform(-3.0, 3.0) for _ in range(sample_count)])
    fx, fy = backend.apply_program(f.program, x, y)
    worst = 0.0
    for dx, dy in ((1.0, 0.0), (0.0, 1.0)):
        gx, gy = backend.apply_program(f.program, x + dx, y + dy)
        err = np.hypot(gx - fx - dx, gy - fy - dy)
        worst = max(worst, float(err.max()))
    return worst


@dataclass(frozen=True)
class JacobianScreen:
    """Result of the injectivity screen; a failing lift is usable but flagged."""

    min_det: float
    passed: bool


def _scalar_trig_jac(terms, x, y):
    v = dvx = dvy = 0.0
    for kx, ky, a_sin, a_cos in terms:
        t = kx * x + ky * y
        r = 2.0 * math.pi * (t - round(t))
        s, c = math.sin(r), math.cos(r)
        v += a_sin * s + a_cos * c
        d = 2.0 * math.pi * (a_sin * c - a_cos * s)
        dvx += kx * d
        dvy += ky * d
    return v, dvx, dvy


def _step_jacobian(step: Step, x: float, y: float):
    """Image point and 2x2 differential of one program step at (x, y)."""
    if step.kind == 1:
        a, b, c, d = step.mat
        tx, ty = step.trans
        return (a * x + b * y + tx, c * x + d * y + ty), (float(a), float(b), float(c), float(d))
    if step.kind == 0:
        alpha, beta = step.trans
        p, px, py = _scalar_trig_jac(step.pterms, x, y)
        q, qx, qy = _scalar_trig_jac(step.qterms, x, y)
        return (x + alpha + p, y + beta + q), (1.0 + px, py, qx, 1.0 + qy)
    # inverse of a base step: differential is the inverse matrix at the preimage
    zx, zy = backend.apply_program(Program([step]), np.array([x]), np.array([y]))
    z = (float(zx[0]), float(zy[0]))
    _, (a, b, c, d) = _step_jacobian(Step(0, trans=step.trans, pterms=step.pterms,
                                          qterms=step.qterms), *z)
    det = a * d - b * c
    return z, (d / det, -b / det, -c / det, a / det)


def jacobian_screen(f: MapLift, grid: int = 32) -> JacobianScreen:
    """Sample det Df on a grid over one fundamental domain.

    A positive lower bound supports (does not prove) the caller's claim
    that the lift is a homeomorphism; the screen can only flag failures.
    """
    if grid < 1:
        raise ValueError("grid must be positive")
    min_det = math.inf
    for i in range(grid):
        for j in range(grid):
            x, y = (i + 0.5) / grid, (j + 0.5) / grid
            jac = (1.0, 0.0, 0.0, 1.0)
            for step in f.program.steps:
                (x, y), (a, b, c, d) = _step_jacobian(step, x, y)
                ja, jb, jc, jd = jac
                jac = (a * ja + b * jc, a * jb + b * jd,
                       c * ja + d * jc, c * jb + d * jd)
            det = jac[0] * jac[3] - jac[1] * jac[2]
            min_det = min(min_det, det)
    return JacobianScreen(min_det=min_det, passed=min_det > 0.0)


# --- shipped example maps -------------------------------------------------

def rigid_lift(alpha: float, beta: float) -> MapLift:
    """Plane translation by (alpha, beta); rotation set is one point."""
    return MapLift(alpha, beta, name=f"rigid({alpha},{beta})")


def skew_lift(c: float = 0.25, a: float = 0.1) -> MapLift:
    """f(x, y) = (x, y + c + a sin 2pi x).

    Every vertical line is invariant and the rotation set is the vertical
    segment {0} x [c - a, c + a].
    """
    return MapLift(0.0, c, q_terms=(Term(1, 0, amp_sin=a),),
                   name=f"skew({c},{a})")


def half_shift_lift(a: float = 0.2) -> MapLift:
    """f(x, y) = (x + 1/2, y + a sin 2pi x), whose square is exactly T1."""
    return MapLift(0.5, 0.0, q_terms=(Term(1, 0, amp_sin=a),),
                   name=f"half_shift({a})")


def sine_product_lift(a: float = 0.1) -> MapLift:
    """f(x, y) = (x + a sin 2pi y, y + a sin 2pi x).

    Displacement vanishes exactly at the four half-integer grid points;
    the induced torus map has four fixed points.
    """
    return MapLift(0.0, 0.0, p_terms=(Term(0, 1, amp_sin=a),),
                   q_terms=(Term(1, 0, amp_sin=a),),
                   name=f"sine_product({a})")


def two_rest_points_lift(a: float = 0.05) -> MapLift:
    """Time-one Euler step x -> x + a V(x) of a field with two zeros.

    V1 = sin 2pi x and V2 = cos 2pi x - 1 + sin(2pi y)(1 + cos 2pi x)/2
    vanish together exactly at (0, 0) and (0, 1/2) mod Z^2: the second
    factor of V2 is -2 on the line x = 1/2, so only x = 0 contributes.
    The flow it approximates is gradient-like; the time-one map is only
    an approximation of such a flow, which is all the constructions here
    need (two isolated fixed points with opposite indices).
    """
    return MapLift(
        0.0, 0.0,
        p_terms=(Term(1, 0, amp_sin=a),),
        q_terms=(Term(1, 0, amp_cos=a), Term(0, 0, amp_cos=-a),
                 Term(0, 1, amp_sin=a / 2),
                 Term(1, 1, amp_sin=a / 4), Term(-1, 1, amp_sin=a / 4)),
        name=f"two_rest_points({a})",
    )


NAMED_EXAMPLES = {
    "rigid": rigid_lift,
    "skew": skew_lift,
    "half_shift": half_shift_lift,
    "sine_product": sine_product_lift,
    "two_rest_points": two_rest_points_lift,
}


# --- map definition files -------------------------------------------------

_TERM_KEYS = {"kx", "ky", "amp_sin", "amp_cos"}
_MAP_KEYS = {"name", "alpha", "beta", "p_terms", "q_terms", "derive"}
_DERIVE_KEYS = {"power", "translate", "conjugate"}


def _term_from_dict(d: dict) -> Term:
    unknown = set(d) - _TERM_KEYS
    if unknown:
        raise ValueError(f"unknown term fields: {sorted(unknown)}")
    if "kx" not in d or "ky" not in d:
        raise ValueError("term needs kx and ky")
    return Term(int(d["kx"]), int(d["ky"]),
                float(d.get("amp_sin", 0.0)), float(d.get("amp_cos", 0.0)))


def _derive_from_dict(d: dict):
    if len(d) != 1:
        raise ValueError(f"derive entry must have exactly one key, got {sorted(d)}")
    (key, val), = d.items()
    if key == "power":
        return Power(int(val))
    if key == "translate":
        m, n = val
        return Translate(int(m), int(n))
    if key == "conjugate":
        a, b, c, e = val
        return ConjugateBy(IntMatrix2(int(a), int(b), int(c), int(e)))
    raise ValueError(f"unknown derive entry {key!r}")


def map_from_dict(d: dict) -> MapLift:
    unknown = set(d) - _MAP_KEYS
    if unknown:
        raise ValueError(f"unknown map fields: {sorted(unknown)}")
    f = MapLift(
        float(d.get("alpha", 0.0)), float(d.get("beta", 0.0)),
        tuple(_term_from_dict(t) for t in d.get("p_terms", [])),
        tuple(_term_from_dict(t) for t in d.get("q_terms", [])),
        tuple(_derive_from_dict(e) for e in d.get("derive", [])),
        str(d.get("name", "")),
    )
    return f


def map_to_dict(f: MapLift) -> dict:
    out = {"name": f.name, "alpha": f.alpha, "beta": f.beta,
           "p_terms": [], "q_terms": [], "derive": []}
    for key, terms in (("p_terms", f.p_terms), ("q_terms", f.q_terms)):
        for t in terms:
            out[key].append({"kx": t.kx, "ky": t.ky,
                             "amp_sin": t.amp_sin, "amp_cos": t.amp_cos})
    for node in f.derivation:
        if isinstance(node, Power):
            out["derive"].append({"power": node.q})
        elif isinstance(node, Translate):
            out["derive"].append({"translate": [node.m, node.n]})
        elif isinstance(node, ConjugateBy):
            m = node.matrix
            out["derive"].append({"conjugate": [m.a, m.b, m.c, m.d]})
        else:
            raise ValueError(
                f"{type(node).__name__} chains are runtime constructions "
                "with no file representation")
    return out


def load_map(path) -> MapLift:
    with open(path, "r", encoding="utf-8") as fh:
        return map_from_dict(json.load(fh))


def save_map(f: MapLift, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(map_to_dict(f), fh, indent=2, sort_keys=True)
        fh.write("\n")
