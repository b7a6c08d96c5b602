"""Exact integer and rational arithmetic for slope normalization.

Everything in here is decided with arbitrary-precision integers:
continued fractions and their convergents, Farey intervals via
Stern-Brocot descent, and the three unimodular normalization routines
(diagonal positioning, norm shrinking along convergents, and the
integer-avoiding transform for short segments of irrational slope).
Float inputs are converted to exact rationals at the boundary; all
comparisons afterwards are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, gcd, isqrt

__all__ = [
    "IntMatrix2", "CFExpansion", "FareyInterval", "PlaneVector",
    "QuadraticSurd", "Inconclusive", "NormalizerResult",
    "D1", "D2", "SWAP", "ROT", "IDENT",
    "cf_expand", "convergents", "smallest_farey_containing",
    "diag_normalize", "shrink_irrational", "vertical_normalizer",
    "integer_avoiding_normalizer",
]


def exact(value):
    """Convert a scalar to an exact representation (Fraction or surd)."""
    if isinstance(value, (Fraction, int, QuadraticSurd)):
        return value
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot represent {type(value).__name__} exactly")


def _ext_gcd(a: int, b: int):
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    return old_r, old_x, old_y


@dataclass(frozen=True)
class IntMatrix2:
    """Unimodular integer 2x2 matrix, row major."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c, self.d):
            if v != int(v):
                raise ValueError("matrix entries must be integers")
        if abs(self.det) != 1:
            raise ValueError(f"determinant {self.det} is not +-1")

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def __mul__(self, other: "IntMatrix2") -> "IntMatrix2":
        return IntMatrix2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "IntMatrix2":
        return IntMatrix2(-self.a, -self.b, -self.c, -self.d)

    def __pow__(self, n: int) -> "IntMatrix2":
        m = self if n >= 0 else self.inverse()
        out = IDENT
        for _ in range(abs(n)):
            out = m * out
        return out

    def inverse(self) -> "IntMatrix2":
        s = self.det  # +-1, so the adjugate divided by det stays integral
        return IntMatrix2(s * self.d, -s * self.b, -s * self.c, s * self.a)

    def apply(self, v):
        x, y = v
        return (self.a * x + self.b * y, self.c * x + self.d * y)

    def rows(self):
        return [[self.a, self.b], [self.c, self.d]]


IDENT = IntMatrix2(1, 0, 0, 1)
D1 = IntMatrix2(1, -1, 0, 1)    # (x, y) -> (x - y, y)
D2 = IntMatrix2(1, 0, -1, 1)    # (x, y) -> (x, y - x)
SWAP = IntMatrix2(0, 1, 1, 0)   # (x, y) -> (y, x)
ROT = IntMatrix2(0, -1, 1, 0)   # quarter turn


@dataclass(frozen=True)
class PlaneVector:
    x: object
    y: object

    def slope(self):
        if self.x == 0:
            raise ZeroDivisionError("slope undefined for x = 0")
        return _div(self.y, self.x)


def _as_pair(v):
    if isinstance(v, PlaneVector):
        return (exact(v.x), exact(v.y))
    x, y = v
    return (exact(x), exact(y))


class QuadraticSurd:
    """Exact real of the form (p + s*sqrt(d)) / q with integer p, s, q and d >= 0.

    Supports just enough arithmetic for continued-fraction expansion and
    exact sign comparison against rationals and same-field surds.
    """

    __slots__ = ("p", "s", "d", "q")

    def __init__(self, p: int, s: int, d: int, q: int):
        if q == 0:
            raise ZeroDivisionError("zero denominator")
        if d < 0:
            raise ValueError("negative radicand")
        if q < 0:
            p, s, q = -p, -s, -q
        r = isqrt(d)
        if r * r == d:  # the radical collapses, keep the rational normal form
            p, s, d = p + s * r, 0, 0
        g = gcd(gcd(abs(p), abs(s)), q)
        if g > 1:
            p, s, q = p // g, s // g, q // g
        self.p, self.s, self.d, self.q = p, s, d, q

    @classmethod
    def sqrt(cls, d: int) -> "QuadraticSurd":
        return cls(0, 1, d, 1)

    @classmethod
    def from_rational(cls, r) -> "QuadraticSurd":
        r = Fraction(r)
        return cls(r.numerator, 0, 0, r.denominator)

    def is_rational(self) -> bool:
        return self.s == 0

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("not rational")
        return Fraction(self.p, self.q)

    def sign(self) -> int:
        """Exact sign, via squaring when p and s*sqrt(d) compete."""
        p, s, d = self.p, self.s, self.d
        if s == 0 or d == 0:
            return (p > 0) - (p < 0)
        if s > 0 and p >= 0:
            return 1
        if s < 0 and p <= 0:
            return -1
        if p * p == s * s * d:
            return 0
        if p * p > s * s * d:
            return 1 if p > 0 else -1
        return 1 if s > 0 else -1

    def _coerce(self, other) -> "QuadraticSurd":
        if isinstance(other, QuadraticSurd):
            if self.s and other.s and self.d != other.d:
                raise ValueError("mixed radicands")
            return other
        return QuadraticSurd.from_rational(other)

    def __neg__(self):
        return QuadraticSurd(-self.p, -self.s, self.d, self.q)

    def __sub__(self, other):
        o = self._coerce(other)
        d = self.d if self.s else o.d
        return QuadraticSurd(self.p * o.q - o.p * self.q,
                             self.s * o.q - o.s * self.q, d, self.q * o.q)

    def __rsub__(self, other):
        return -(self - other)

    def __add__(self, other):
        return self - (-self._coerce(other))

    __radd__ = __add__

    def __mul__(self, other):
        o = self._coerce(other)
        d = self.d if self.s else o.d
        return QuadraticSurd(self.p * o.p + self.s * o.s * d,
                             self.p * o.s + self.s * o.p, d, self.q * o.q)

    __rmul__ = __mul__

    def reciprocal(self) -> "QuadraticSurd":
        # q / (p + s*sqrt(d)), rationalized
        denom = self.p * self.p - self.s * self.s * self.d
        if denom == 0:
            raise ZeroDivisionError("reciprocal of zero")
        return QuadraticSurd(self.q * self.p, -self.q * self.s, self.d, denom)

    def __float__(self) -> float:
        return (self.p + self.s * self.d ** 0.5) / self.q

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __eq__(self, other):
        if isinstance(other, (QuadraticSurd, int, Fraction)):
            return (self - other).sign() == 0
        return NotImplemented

    def __hash__(self):
        return hash((self.p, self.s, self.d, self.q))

    def __repr__(self):
        if self.s == 0:
            return f"({self.p}/{self.q})"
        return f"(({self.p}+{self.s}*sqrt({self.d}))/{self.q})"

    def floor(self) -> int:
        k = floor(float(self))
        # float seeding can be off by one near integers; settle it exactly
        while (self - k).sign() < 0:
            k -= 1
        while (self - (k + 1)).sign() >= 0:
            k += 1
        return k


def _div(y, x):
    y, x = exact(y), exact(x)
    if isinstance(y, QuadraticSurd) or isinstance(x, QuadraticSurd):
        ys = y if isinstance(y, QuadraticSurd) else QuadraticSurd.from_rational(y)
        xs = x if isinstance(x, QuadraticSurd) else QuadraticSurd.from_rational(x)
        return ys * xs.reciprocal()
    return Fraction(y) / Fraction(x)


@dataclass(frozen=True)
class CFExpansion:
    """Continued fraction [a0; a1, a2, ...]; exact means it terminated."""

    terms: tuple
    exact: bool

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least a0")
        if any(t < 1 for t in self.terms[1:]):
            raise ValueError("partial quotients a1.. must be >= 1")

    def value(self) -> Fraction:
        """Evaluate the expansion back to a rational."""
        acc = Fraction(self.terms[-1])
        for a in reversed(self.terms[:-1]):
            acc = a + 1 / acc
        return acc


def cf_expand(alpha, max_terms: int) -> CFExpansion:
    """Continued-fraction coefficients of alpha, at most max_terms of them.

    Accepts int, Fraction, float (converted exactly to a rational) or
    QuadraticSurd; the surd case runs the recursion in exact quadratic
    arithmetic and never terminates on its own.
    """
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    alpha = exact(alpha)
    terms = []
    if isinstance(alpha, QuadraticSurd) and not alpha.is_rational():
        cur = alpha
        for _ in range(max_terms):
            a = cur.floor()
            terms.append(a)
            cur = (cur - a).reciprocal()
        return CFExpansion(tuple(terms), exact=False)
    r = alpha.as_fraction() if isinstance(alpha, QuadraticSurd) else Fraction(alpha)
    for _ in range(max_terms):
        a = r.numerator // r.denominator
        terms.append(a)
        frac = r - a
        if frac == 0:
            return CFExpansion(tuple(terms), exact=True)
        r = 1 / frac
    return CFExpansion(tuple(terms), exact=False)


def convergents(cf: CFExpansion):
    """Convergents p_n/q_n of the expansion, by the three-term recurrence."""
    out = []
    p_prev, q_prev = 1, 0
    p, q = cf.terms[0], 1
    out.append(Fraction(p, q))
    for a in cf.terms[1:]:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append(Fraction(p, q))
    return out


@dataclass(frozen=True)
class FareyInterval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        p, q = self.lo.numerator, self.lo.denominator
        pp, qq = self.hi.numerator, self.hi.denominator
        if pp * q - p * qq != 1:
            raise ValueError(f"[{self.lo}, {self.hi}] is not a Farey interval")

    @property
    def mediant(self) -> Fraction:
        return Fraction(self.lo.numerator + self.hi.numerator,
                        self.lo.denominator + self.hi.denominator)

    @property
    def denominator_sum(self) -> int:
        return self.lo.denominator + self.hi.denominator


def smallest_farey_containing(lo, hi) -> FareyInterval:
    """Smallest Farey interval containing [lo, hi], by Stern-Brocot descent.

    Requires [lo, hi] inside [k, k+1] for some integer k; the descent runs
    modulo that shift and the result is returned in absolute coordinates.
    A degenerate query [r, r] stops when r first appears as a mediant and
    resolves to the child interval with r as its left endpoint (past that
    point the width would shrink forever with r stuck on the boundary).
    """
    lo, hi = Fraction(exact(lo)), Fraction(exact(hi))
    if lo > hi:
        raise ValueError("lo > hi")
    k = lo.numerator // lo.denominator
    if hi > k + 1:
        raise ValueError(f"[{lo}, {hi}] spans more than one integer window")
    lo -= k
    hi -= k
    cur = FareyInterval(Fraction(0), Fraction(1))
    while True:
        m = cur.mediant
        if hi < m:
            cur = FareyInterval(cur.lo, m)
        elif lo > m:
            cur = FareyInterval(m, cur.hi)
        elif lo == hi == m:
            cur = FareyInterval(m, cur.hi)
            break
        else:
            break
    return FareyInterval(cur.lo + k, cur.hi + k)


def _sector(v):
    """1 for slope < 1, 2 for slope > 1, 0 on the diagonal (positive vectors)."""
    x, y = v
    if y < x:
        return 1
    if y > x:
        return 2
    return 0


def _twist_count(v, i: int) -> int:
    """Smallest k >= 1 with D_i^k v outside the open sector Q_i.

    For v strictly inside Q1 this is ceil((x - y)/y); landing exactly on
    the diagonal counts as leaving.  Q2 is the mirror image.
    """
    x, y = v
    t = Fraction(x - y, y) if i == 1 else Fraction(y - x, x)
    return ceil(t)


class Inconclusive:
    """Marker result: a decision fell below the configured margin."""

    def __init__(self, reason: str):
        self.reason = reason

    def __repr__(self):
        return f"Inconclusive({self.reason!r})"

    def __bool__(self):
        return False


def diag_normalize(u, v):
    """Unimodular A with ||Au|| <= ||u||, ||Av|| <= ||v||, both images with
    positive coordinates, and one image on the diagonal or the two strictly
    on opposite sides of it.

    Runs synchronized Dehn twists: while the continued fractions of the two
    slopes agree, both vectors receive the same twist power; the first
    disagreement pushes exactly one of them out of the current sector.
    Returns Inconclusive only in the (theoretically impossible) case that
    both vectors land on the diagonal at the same step.
    """
    try:
        u = tuple(Fraction(c) for c in _as_pair(u))
        v = tuple(Fraction(c) for c in _as_pair(v))
    except TypeError as err:
        raise TypeError(f"need rational-representable coordinates: {err}") from err
    for w in (u, v):
        if w[0] <= 0 or w[1] <= 0:
            raise ValueError("vectors must have strictly positive coordinates")
    if u[1] * v[0] == v[1] * u[0]:
        raise ValueError("slopes must be distinct")

    su, sv = _sector(u), _sector(v)
    if su == 0 or sv == 0 or su != sv:
        return IDENT
    acc = IDENT
    if su == 2:  # mirror across the diagonal and work in Q1
        acc = SWAP
        u, v = acc.apply(u), acc.apply(v)

    wu, wv = u, v
    parity = 0
    while True:
        secu, secv = _sector(wu), _sector(wv)
        if secu == 0 and secv == 0:
            return Inconclusive("both vectors reached the diagonal together")
        if secu == 0 or secv == 0 or secu != secv:
            return acc
        i = 1 if parity == 0 else 2
        twist = D1 if i == 1 else D2
        ku, kv = _twist_count(wu, i), _twist_count(wv, i)
        step = twist ** min(ku, kv)
        wu, wv = step.apply(wu), step.apply(wv)
        acc = step * acc
        if ku != kv:
            return acc
        parity ^= 1


def _norm_sq(v):
    x, y = v
    if isinstance(x, QuadraticSurd) or isinstance(y, QuadraticSurd):
        xs = x if isinstance(x, QuadraticSurd) else QuadraticSurd.from_rational(x)
        ys = y if isinstance(y, QuadraticSurd) else QuadraticSurd.from_rational(y)
        return xs * xs + ys * ys
    return Fraction(x) ** 2 + Fraction(y) ** 2


def _lt(a, b) -> bool:
    """Exact a < b across Fraction and QuadraticSurd operands."""
    if isinstance(a, QuadraticSurd):
        return (a - b).sign() < 0
    if isinstance(b, QuadraticSurd):
        return (b - a).sign() > 0
    return a < b


def _convergent_matrices(w, max_terms):
    """Candidate matrices A_k built from consecutive convergents of slo(w)."""
    cf = cf_expand(_div(w[1], w[0]), max_terms)
    conv = convergents(cf)
    for k in range(len(conv) - 1):
        pk, qk = conv[k].numerator, conv[k].denominator
        pk1, qk1 = conv[k + 1].numerator, conv[k + 1].denominator
        sign = 1 if k % 2 == 0 else -1
        yield IntMatrix2(sign * pk, -sign * qk, pk1, -qk1)


def shrink_irrational(w, epsilon, max_terms: int = 64) -> IntMatrix2:
    """Determinant-one A with ||A w|| < epsilon, for w of irrational slope.

    Candidates come from consecutive convergents p_k/q_k of the slope,

        A_k = [[(-1)^k p_k, (-1)^(k+1) q_k], [p_{k+1}, -q_{k+1}]],

    and the first k whose image norm verifies below epsilon is returned
    (growing q_{k+1} forces this once q_{k+1} exceeds sqrt(2)|x|/epsilon).
    Irrationality of the slope is the caller's assertion; a float input
    behaves like a deep rational and simply bounds how far k can go.
    """
    w = _as_pair(w)
    if w[0] == 0:
        raise ValueError("slope undefined for x = 0")
    eps_sq = Fraction(exact(epsilon)) ** 2
    if eps_sq == 0:
        raise ValueError("epsilon must be positive")
    for cand in _convergent_matrices(w, max_terms):
        if _lt(_norm_sq(cand.apply(w)), eps_sq):
            return cand
    raise ArithmeticError(
        "convergent supply exhausted before reaching the target norm; "
        "the slope is rational at this resolution or max_terms is too small"
    )


def vertical_normalizer(p: int, q: int) -> IntMatrix2:
    """Determinant-one A with A (q, p) = (0, 1), for coprime p, q."""
    g, x, y = _ext_gcd(p, q)
    if g < 0:
        g, x, y = -g, -x, -y
    if g != 1:
        raise ValueError(f"p, q must be coprime, got gcd {g}")
    return IntMatrix2(p, -q, y, x)


@dataclass(frozen=True)
class NormalizerResult:
    matrix: IntMatrix2
    axis: int
    shift: tuple
    margin: Fraction


_CACHED_ISOMETRIES = None


def _isometries():
    global _CACHED_ISOMETRIES
    if _CACHED_ISOMETRIES is None:
        rots = [ROT ** j for j in range(4)]
        _CACHED_ISOMETRIES = tuple(rots + [SWAP * r for r in rots])
    return _CACHED_ISOMETRIES


def _axis_margin(e1, e2, axis) -> Fraction:
    """Distance of the closed projection interval to the nearest integer.

    Returns -1 when an integer lies inside (or on) the projection.
    """
    i = axis - 1
    lo, hi = min(e1[i], e2[i]), max(e1[i], e2[i])
    k = floor(lo)
    if lo == k or hi >= k + 1:
        return Fraction(-1)
    return min(lo - k, (k + 1) - hi)


def _case1(e1, e2, delta):
    """Fold a segment with one endpoint on an axis into pr1 range (-1, 0).

    Searches the eight lattice isometries for the position (-a, 0) with the
    other endpoint at positive height, then applies the twist power
    D1^(k+1), k = floor((a + b)/c), and verifies the image exactly.
    """
    for g in _isometries():
        for first, second in ((e1, e2), (e2, e1)):
            ga = g.apply(first)
            gb = g.apply(second)
            if ga[1] != 0 or ga[0] >= 0 or -ga[0] < delta:
                continue
            if gb[1] < delta:
                continue
            a, (b, c) = -ga[0], gb
            t = Fraction(a + b, c)
            k = floor(t)
            if min(t - k, k + 1 - t) < delta:
                return Inconclusive("twist count sits at an integer boundary")
            mat = (D1 ** (k + 1)) * g
            f1, f2 = mat.apply(first), mat.apply(second)
            lo, hi = min(f1[0], f2[0]), max(f1[0], f2[0])
            margin = min(-hi, lo + 1)
            if margin < delta:
                return Inconclusive("projection too close to an integer after twisting")
            return mat, 1, margin
    return Inconclusive("no admissible axis position for the zero-coordinate case")


def _case2(e1, e2, delta):
    """Both endpoints strictly inside opposite open quadrants."""
    neg = e1 if e1[0] < 0 else e2
    pos = e2 if neg is e1 else e1
    try:
        a = diag_normalize((-neg[0], -neg[1]), pos)
    except ValueError as err:
        return Inconclusive(f"diagonal positioning rejected the segment: {err}")
    if isinstance(a, Inconclusive):
        return a
    for mat in (a, -a):
        f1, f2 = mat.apply(e1), mat.apply(e2)
        if f1[1] - f1[0] >= 0 and f2[1] - f2[0] >= 0:
            full = D2 * mat
            g1, g2 = full.apply(e1), full.apply(e2)
            lo, hi = min(g1[1], g2[1]), max(g1[1], g2[1])
            if lo == 0:
                # an image endpoint landed on the axis; fold as in the zero case
                sub = _case1(g1, g2, delta)
                if isinstance(sub, Inconclusive):
                    return sub
                m, axis, margin = sub
                return m * full, axis, margin
            margin = min(lo, 1 - hi)
            if margin < delta:
                return Inconclusive("second projection margin below the decision threshold")
            return full, 2, margin
    return Inconclusive("diagonal positioning did not separate the endpoints")


def _attempt_cases(e1, e2, delta):
    """Dispatch a segment straddling the origin: axis case or quadrant case."""
    for j in (0, 1):
        r = ROT ** j
        a, b = r.apply(e1), r.apply(e2)
        for lo_pt, hi_pt in ((a, b), (b, a)):
            if lo_pt[0] <= 0 and lo_pt[1] <= 0 and hi_pt[0] >= 0 and hi_pt[1] >= 0:
                coords = (*lo_pt, *hi_pt)
                if any(v != 0 and abs(v) < delta for v in coords):
                    return Inconclusive("endpoint coordinate indistinguishable from zero")
                if any(v == 0 for v in coords):
                    out = _case1(lo_pt, hi_pt, delta)
                else:
                    out = _case2(lo_pt, hi_pt, delta)
                if isinstance(out, Inconclusive):
                    return out
                mat, axis, margin = out
                return mat * r, axis, margin
    return Inconclusive("endpoints do not straddle the origin in opposite quadrants")


def integer_avoiding_normalizer(segment, delta=Fraction(1, 10 ** 9),
                                max_terms: int = 64):
    """Unimodular matrix, axis and integer shift making one coordinate
    projection of the segment integer-free, or Inconclusive when a decision
    margin fails.

    The segment is assumed to have irrational slope and carry no rational
    points (caller's assertion, typically from rotation-set estimates).
    Fast paths: a projection already integer-free, or endpoints already
    straddling the origin so the quadrant case split applies directly.
    Otherwise: shrink the difference vector below 1/(2*sqrt(5)) along
    convergents, remove one integer from each projection by a lattice
    shift, rotate the endpoints into opposite quadrants, and fold with
    Dehn twists.  Every sign, floor and margin decision is exact and must
    hold with slack at least delta; otherwise Inconclusive, never a guess.
    """
    a_raw, b_raw = segment
    try:
        e1 = tuple(Fraction(v) for v in _as_pair(a_raw))
        e2 = tuple(Fraction(v) for v in _as_pair(b_raw))
    except TypeError as err:
        raise TypeError(f"need rational-representable endpoints: {err}") from err
    delta = Fraction(delta)

    for axis in (1, 2):
        margin = _axis_margin(e1, e2, axis)
        if margin >= delta:
            return NormalizerResult(IDENT, axis, (0, 0), margin)

    direct = _attempt_cases(e1, e2, delta)
    if not isinstance(direct, Inconclusive):
        mat, axis, margin = direct
        return NormalizerResult(mat, axis, (0, 0), margin)

    w = (e2[0] - e1[0], e2[1] - e1[1])
    b = IDENT
    if _norm_sq(w) >= Fraction(1, 20):  # diameter >= 1/(2*sqrt(5))
        if w[0] == 0:
            return Inconclusive("difference vector is vertical; slope undefined")
        try:
            b = next(m for m in _convergent_matrices(w, max_terms)
                     if _norm_sq(m.apply(w)) < Fraction(1, 20))
        except StopIteration:
            return Inconclusive("could not shrink the segment below the twist bound")
    f1, f2 = b.apply(e1), b.apply(e2)

    for axis in (1, 2):
        margin = _axis_margin(f1, f2, axis)
        if margin >= delta:
            return NormalizerResult(b, axis, (0, 0), margin)

    shift = []
    for i in (0, 1):
        lo, hi = min(f1[i], f2[i]), max(f1[i], f2[i])
        if hi - lo >= 1:
            return Inconclusive("projection spans a full unit after shrinking")
        m = ceil(lo)
        if m > hi:
            # _axis_margin said an integer is within delta of the projection,
            # but none lies inside: too close to call
            return Inconclusive("projection endpoint indistinguishable from an integer")
        shift.append(-m)
    s = (shift[0], shift[1])
    g1 = (f1[0] + s[0], f1[1] + s[1])
    g2 = (f2[0] + s[0], f2[1] + s[1])

    out = _attempt_cases(g1, g2, delta)
    if isinstance(out, Inconclusive):
        return out
    mat, axis, margin = out
    total = mat * b
    pre_shift = b.inverse().apply(s)
    return NormalizerResult(total, axis, (int(pre_shift[0]), int(pre_shift[1])), margin)
