"""End-to-end acceptance checks, one per shipped guarantee.

Each test prints a single PASS/FAIL line with its runtime so the whole
gate can be read off a plain pytest run.  Expected values come from the
closed-form oracles in oracles.py or from exact arithmetic; time budgets
are enforced inside the tests themselves.
"""

import json
import math
import os
import random
import time
from fractions import Fraction
from math import floor

import oracles
from torusdyn.gl2z import (
    D2,
    Inconclusive,
    QuadraticSurd,
    cf_expand,
    convergents,
    diag_normalize,
    integer_avoiding_normalizer,
    shrink_irrational,
)
from torusdyn.lift import (
    ConjugateBy,
    MapLift,
    Power,
    Term,
    derive,
    half_shift_lift,
    rigid_lift,
    save_map,
    sine_product_lift,
    skew_lift,
)
from torusdyn.lines import (
    NotApplicable,
    PqPolyline,
    brouwer_check,
    brouwer_descend,
    free_curve_check,
    free_curve_from_shift,
    map_line,
    order_compare,
    transform_line,
    translate_line,
    wedge,
)
from torusdyn.rotset import (
    RotSetEstimate,
    convex_hull,
    estimate_rotation_set,
    free_curve_criterion,
)
from torusdyn.periodic import RationalVector, find_periodic
from torusdyn.cli import main as cli_main
from torusdyn.gl2z import IntMatrix2

D1 = IntMatrix2(1, -1, 0, 1)

VERTICAL0 = PqPolyline((0, 1), ((Fraction(0), Fraction(0)),
                                (Fraction(0), Fraction(1))))
WOBBLE = MapLift(0.3, 0.0, p_terms=(Term(0, 1, amp_sin=0.05),))


def _report(num, label, problems, elapsed, budget=None):
    if budget is not None and elapsed > budget:
        problems.append(f"took {elapsed:.1f}s against a {budget:.0f}s budget")
    status = "PASS" if not problems else "FAIL"
    print(f"acceptance {num:02d} {label}: {status} ({elapsed:.2f}s)",
          flush=True)
    assert not problems, "; ".join(problems)


def _weak_left(a, b):
    r = order_compare(a, b)
    return r.kind == "Less" or (r.kind == "Touching" and r.side in (None, "left"))


# -- 01 ---------------------------------------------------------------------

def test_a01_convergent_identities():
    t0 = time.monotonic()
    problems = []
    rng = random.Random(2011)

    def check_identity(cs, tag):
        for n in range(len(cs) - 1):
            det = (cs[n + 1].numerator * cs[n].denominator
                   - cs[n].numerator * cs[n + 1].denominator)
            if det != (-1) ** n:
                problems.append(f"determinant identity failed at n={n} ({tag})")
                return False
        return True

    for i in range(1000):
        alpha = Fraction(rng.randint(-10 ** 6, 10 ** 6),
                         rng.randint(1, 10 ** 6))
        cs = convergents(cf_expand(alpha, 64))
        check_identity(cs, f"rational #{i}")

    surds = ([QuadraticSurd.sqrt(d) for d in (2, 3, 5, 7, 11, 13)]
             + [QuadraticSurd(1, 1, 5, 2), QuadraticSurd(3, -1, 2, 4),
                QuadraticSurd(-2, 1, 7, 3), QuadraticSurd(5, 2, 3, 7)])
    for alpha in surds:
        cs = convergents(cf_expand(alpha, 18))
        if not check_identity(cs, repr(alpha)):
            continue
        # two-sided error bound, settled in exact quadratic-field arithmetic
        # (stronger than the interval version it certifies)
        for n in range(len(cs) - 1):
            p, q = cs[n].numerator, cs[n].denominator
            q1 = cs[n + 1].denominator
            err = (alpha * q - p) * ((-1) ** n)
            if not (Fraction(1, q + q1) < err < Fraction(1, q1)):
                problems.append(f"error bound failed at n={n} for {alpha!r}")
                break

    _report(1, "convergent identities", problems, time.monotonic() - t0, 5.0)


# -- 02 ---------------------------------------------------------------------

def test_a02_norm_shrinking():
    t0 = time.monotonic()
    problems = []
    targets = [("sqrt2", QuadraticSurd.sqrt(2)),
               ("sqrt3", QuadraticSurd.sqrt(3)),
               ("golden", QuadraticSurd(1, 1, 5, 2))]
    one = QuadraticSurd.from_rational(1)
    for name, y in targets:
        w = (one, y)
        for eps in (Fraction(1, 2), Fraction(1, 10), Fraction(1, 100)):
            a = shrink_irrational(w, eps)
            if a.det != 1:
                problems.append(f"{name}, eps={eps}: determinant {a.det}")
                continue
            ix, iy = a.apply(w)
            n2 = ix * ix + iy * iy
            if not n2 < eps * eps:
                problems.append(f"{name}, eps={eps}: image norm not below eps")
            if eps == Fraction(1, 10):
                best = oracles.min_image_norm((1.0, float(y)), 50)
                ours = math.sqrt(float(n2))
                if ours > 10.0 * best * (1 + 1e-9):
                    problems.append(
                        f"{name}: {ours:.3e} exceeds 10x brute optimum "
                        f"{best:.3e}")
    _report(2, "norm shrinking", problems, time.monotonic() - t0, 30.0)


# -- 03 ---------------------------------------------------------------------

def test_a03_diagonal_positioning():
    t0 = time.monotonic()
    problems = []
    rng = random.Random(3033)

    def positive():
        return Fraction(rng.randint(1, 400), rng.randint(1, 40))

    checked = 0
    while checked < 500:
        u = (positive(), positive())
        v = (positive(), positive())
        if u[1] * v[0] == v[1] * u[0]:
            continue
        m = diag_normalize(u, v)
        checked += 1
        if isinstance(m, Inconclusive):
            problems.append(f"inconclusive on pair #{checked}: {u}, {v}")
            continue
        iu, iv = m.apply(u), m.apply(v)
        if m.det not in (1, -1):
            problems.append(f"pair #{checked}: determinant {m.det}")
        if not (iu[0] > 0 and iu[1] > 0 and iv[0] > 0 and iv[1] > 0):
            problems.append(f"pair #{checked}: image left the open quadrant")
        if (iu[0] ** 2 + iu[1] ** 2 > u[0] ** 2 + u[1] ** 2
                or iv[0] ** 2 + iv[1] ** 2 > v[0] ** 2 + v[1] ** 2):
            problems.append(f"pair #{checked}: a norm increased")
        su, sv = iu[1] - iu[0], iv[1] - iv[0]
        if not (su == 0 or sv == 0 or (su > 0) != (sv > 0)):
            problems.append(f"pair #{checked}: images on the same side "
                            "of the diagonal")
        if checked <= 50:
            entries = max(abs(t) for t in (m.a, m.b, m.c, m.d))
            found = oracles.exists_diag_matrix(u, v, 20)
            if entries <= 20 and not found:
                problems.append(f"pair #{checked}: brute search missed the "
                                "returned small witness")
    _report(3, "diagonal positioning", problems, time.monotonic() - t0, 60.0)


# -- 04 ---------------------------------------------------------------------

def _random_zigzag(rng):
    breaks = sorted({Fraction(rng.randint(1, 15), 16)
                     for _ in range(rng.randint(0, 3))})
    ys = [Fraction(0)] + breaks + [Fraction(1)]
    x0 = Fraction(rng.randint(-16, 16), 16)
    xs = [x0] + [Fraction(rng.randint(-16, 16), 16)
                 for _ in breaks] + [x0]
    return PqPolyline((0, 1), tuple(zip(xs, ys)))


def test_a04_wedge_laws():
    t0 = time.monotonic()
    problems = []
    rng = random.Random(4044)
    for i in range(100):
        a, b, c = (_random_zigzag(rng) for _ in range(3))
        w = wedge(a, b)
        if wedge(b, a).vertices != w.vertices:
            problems.append(f"#{i}: commutativity failed")
        if wedge(wedge(a, b), c).vertices != wedge(a, wedge(b, c)).vertices:
            problems.append(f"#{i}: associativity failed")
        if wedge(w, w).vertices != w.vertices:
            problems.append(f"#{i}: idempotence failed")
        if not (_weak_left(w, a) and _weak_left(w, b)):
            problems.append(f"#{i}: wedge not a lower bound")
        # monotonicity against translates, which are comparable by design
        a2 = translate_line(a, rng.randint(0, 2), 0)
        b2 = translate_line(b, rng.randint(0, 2), 0)
        if not _weak_left(w, wedge(a2, b2)):
            problems.append(f"#{i}: monotonicity failed")
        # translation equivariance: (m, n) acts as (m, 0) on canonical forms
        m, n = rng.randint(-3, 3), rng.randint(-3, 3)
        lhs = wedge(translate_line(a, m, n), translate_line(b, m, n))
        if lhs.vertices != translate_line(w, m, 0).vertices:
            problems.append(f"#{i}: translation equivariance failed")
        # shear-power equivariance; equality as lines, since a featureless
        # vertical output anchors its canonical walk at an arbitrary seam
        k = rng.choice((1, 2, -1))
        u = D2 ** k
        sheared = wedge(transform_line(a, u), transform_line(b, u))
        transported = transform_line(w, u)
        r = order_compare(sheared, wedge(transported, transported))
        if not (r.kind == "Touching" and r.side is None):
            problems.append(f"#{i}: shear equivariance failed for k={k}")
    _report(4, "wedge laws", problems, time.monotonic() - t0, 30.0)


# -- 05 ---------------------------------------------------------------------

def test_a05_descent_chains():
    t0 = time.monotonic()
    problems = []
    tol = 1e-4
    for n in (2, 3):
        pre = brouwer_check(derive(WOBBLE, Power(n)), VERTICAL0, tol)
        if pre.kind != "Yes":
            problems.append(f"power {n} not certified on x=0: {pre.kind}")
    g2 = brouwer_descend(WOBBLE, VERTICAL0, 2, tol)
    if brouwer_check(WOBBLE, g2, tol).kind != "Yes":
        problems.append("descent from power 2 lost the certificate")
    g3 = brouwer_descend(WOBBLE, VERTICAL0, 3, tol)
    if brouwer_check(derive(WOBBLE, Power(2)), g3, tol).kind != "Yes":
        problems.append("descent from power 3 not certified for the square")
    g32 = brouwer_descend(WOBBLE, g3, 2, tol)
    if brouwer_check(WOBBLE, g32, tol).kind != "Yes":
        problems.append("chained descent 3 -> 2 -> 1 lost the certificate")
    _report(5, "descent chains", problems, time.monotonic() - t0, 30.0)


# -- 06 ---------------------------------------------------------------------

def test_a06_free_curve_construction():
    t0 = time.monotonic()
    problems = []
    tol = 1e-4
    gamma = free_curve_from_shift(WOBBLE, VERTICAL0, 2, tol)
    if not isinstance(gamma, PqPolyline):
        problems.append(f"shift construction returned {gamma!r}")
    else:
        if gamma.pq != (0, 1):
            problems.append(f"curve period {gamma.pq}, expected (0, 1)")
        verdict = free_curve_check(WOBBLE, gamma, tol)
        if verdict.kind != "Yes":
            problems.append(f"freeness not certified: {verdict.kind} "
                            f"({verdict.detail})")
    drift = rigid_lift(1.2, 0.0)
    na = free_curve_from_shift(drift, VERTICAL0, 2, tol)
    if not isinstance(na, NotApplicable):
        problems.append("fast drift unexpectedly produced a curve")
    elif na.max_pr1_rate < 1.0 - 0.01:
        problems.append(f"witness rate {na.max_pr1_rate} below 0.99")
    est = estimate_rotation_set(drift, grid=16, n=50)
    if max(x for x, _ in est.outer_hull) < 1.0 - 0.01:
        problems.append("drift estimate lost the unit horizontal speed")
    _report(6, "free curve construction", problems, time.monotonic() - t0,
            30.0)


# -- 07 ---------------------------------------------------------------------

def test_a07_rotation_set_estimates():
    t0 = time.monotonic()
    problems = []
    e = estimate_rotation_set(rigid_lift(0.3, 0.7), grid=64, n=100)
    worst = max(math.hypot(x - 0.3, y - 0.7)
                for x, y in e.outer_hull + e.inner_hull)
    if worst > 1e-12:
        problems.append(f"rigid estimate off by {worst:.2e}")
    skew = skew_lift(0.25, 0.1)
    e = estimate_rotation_set(skew, grid=200, n=1000)
    for hull, tag in ((e.outer_hull, "outer"), (e.inner_hull, "inner")):
        d = oracles.hausdorff_to_segment(hull, (0.0, 0.15), (0.0, 0.35))
        if d > 0.01:
            problems.append(f"skew {tag} hull {d:.4f} from the true segment")
    e = estimate_rotation_set(derive(skew, ConjugateBy(D1)), grid=200, n=1000)
    d = oracles.hausdorff_to_segment(e.outer_hull, (-0.15, 0.15),
                                     (-0.35, 0.35))
    if d > 0.02:
        problems.append(f"conjugated hull {d:.4f} from the sheared segment")
    _report(7, "rotation set estimates", problems, time.monotonic() - t0,
            60.0)


# -- 08 ---------------------------------------------------------------------

def test_a08_free_curve_vs_estimate():
    t0 = time.monotonic()
    problems = []
    gamma = free_curve_from_shift(WOBBLE, VERTICAL0, 2, 1e-4)
    if not isinstance(gamma, PqPolyline):
        problems.append("no certified free curve to compare against")
    e = estimate_rotation_set(WOBBLE, grid=64, n=400)
    xs = [x for x, _ in e.outer_hull]
    lo, hi = min(xs), max(xs)
    ks = [k for k in range(floor(lo) - 1, floor(hi) + 2)
          if k - e.gap <= lo and hi <= k + 1 + e.gap]
    if not ks:
        problems.append(f"projection [{lo:.4f}, {hi:.4f}] not inside any "
                        f"unit window at gap {e.gap:.2e}")
    _report(8, "free curve vs estimate", problems, time.monotonic() - t0,
            10.0)


# -- 09 ---------------------------------------------------------------------

def test_a09_periodic_reports():
    t0 = time.monotonic()
    problems = []
    rep = find_periodic(sine_product_lift(0.1), RationalVector(0, 0, 1),
                        grid=16)
    if len(rep.certificates) != 4:
        problems.append(f"{len(rep.certificates)} certificates, expected 4")
    degrees = sorted(c.degree for c in rep.certificates)
    if degrees != [-1, -1, 1, 1]:
        problems.append(f"certificate degrees {degrees}")
    if any(c.boundary_min <= 0 for c in rep.certificates):
        problems.append("a certificate carries no boundary margin")

    rep = find_periodic(half_shift_lift(0.2), RationalVector(1, 0, 2))
    if not rep.identity_displacement:
        problems.append("half shift squared not reported as the translation")
    elif rep.residual > 1e-12:
        problems.append(f"identity residual {rep.residual:.2e}")

    rep = find_periodic(rigid_lift(0.3, 0.7), RationalVector(0, 0, 1),
                        grid=16)
    if rep.certificates or rep.candidates:
        problems.append("irrational rotation produced periodic evidence")
    _report(9, "periodic reports", problems, time.monotonic() - t0, 30.0)


# -- 10 ---------------------------------------------------------------------

def _exact_avoidance(res, e1, e2):
    """Distance of the mapped, shifted projection to the nearest integer,
    recomputed from the endpoints alone; -1 when an integer intrudes."""
    g1 = res.matrix.apply((e1[0] + res.shift[0], e1[1] + res.shift[1]))
    g2 = res.matrix.apply((e2[0] + res.shift[0], e2[1] + res.shift[1]))
    i = res.axis - 1
    lo, hi = min(g1[i], g2[i]), max(g1[i], g2[i])
    k = floor(lo)
    if lo == k or hi >= k + 1:
        return Fraction(-1)
    return min(lo - k, k + 1 - hi)


def test_a10_integer_avoidance():
    t0 = time.monotonic()
    problems = []
    rng = random.Random(1010)
    slopes = [QuadraticSurd.sqrt(2), QuadraticSurd.sqrt(3),
              QuadraticSurd.sqrt(5), QuadraticSurd(1, 1, 5, 2),
              QuadraticSurd(-1, 1, 2, 3)]
    deep = 0
    for i in range(100):
        s = rng.choice(slopes)
        if rng.random() < 0.5:
            s = -s
        sf = float(s)
        span = 0.2 / math.hypot(1.0, sf) * rng.uniform(0.25, 0.95)
        dx = Fraction(span).limit_denominator(10 ** 5)
        dy = Fraction(span * sf).limit_denominator(10 ** 5)
        if not dx * dx + dy * dy < Fraction(1, 20):
            problems.append(f"#{i}: segment too long for the twist bound")
            continue
        if i % 2:
            # straddle an integer in both projections (but keep the lattice
            # point itself off the segment) so the twist path has to run
            cx = rng.randint(-2, 2) + dx / 7
            cy = rng.randint(-2, 2) + dy / 6
            deep += 1
        else:
            cx = Fraction(rng.randint(-50, 50), 20)
            cy = Fraction(rng.randint(-50, 50), 20)
        e1 = (cx - dx / 2, cy - dy / 2)
        e2 = (cx + dx / 2, cy + dy / 2)
        res = integer_avoiding_normalizer((e1, e2))
        if isinstance(res, Inconclusive):
            problems.append(f"#{i}: inconclusive for {e1}, {e2}: {res}")
            continue
        if res.matrix.det not in (1, -1):
            problems.append(f"#{i}: non-unimodular matrix")
        if res.axis not in (1, 2):
            problems.append(f"#{i}: axis {res.axis}")
        if res.margin <= 0:
            problems.append(f"#{i}: margin {res.margin} not positive")
        exact = _exact_avoidance(res, e1, e2)
        if exact != res.margin:
            problems.append(f"#{i}: reported margin {res.margin} vs exact "
                            f"{exact}")
        if i % 2 and res.matrix == IntMatrix2(1, 0, 0, 1) and \
                res.shift == (0, 0):
            problems.append(f"#{i}: straddling segment certified without "
                            "any normalization")
    if deep < 50:
        problems.append(f"only {deep} straddling segments were generated")
    _report(10, "integer avoidance", problems, time.monotonic() - t0, 30.0)


# -- 11 ---------------------------------------------------------------------

def test_a11_disjoint_iterates():
    t0 = time.monotonic()
    problems = []
    e = RotSetEstimate(
        outer_hull=convex_hull([(0.31, 0.50), (0.39, 0.50),
                                (0.39, 0.62), (0.31, 0.62)]),
        inner_hull=convex_hull([(0.32, 0.51), (0.38, 0.51),
                                (0.38, 0.61), (0.32, 0.61)]),
        n=1000, grid=100, gap=0.002)
    rep = free_curve_criterion(e, 1)
    iv = rep.farey_interval
    if iv is None or (iv.lo, iv.hi) != (Fraction(0), Fraction(1, 2)):
        problems.append(f"interval {iv}, expected [0, 1/2]")
    if rep.disjoint_iterates != 2:
        problems.append(f"{rep.disjoint_iterates} disjoint iterates, "
                        "expected 2")
    # direct construction: two exact images of x=0 under the matching
    # rigid rotation stay pairwise disjoint on the torus
    f = rigid_lift(0.35, 0.7)
    m1 = map_line(f, VERTICAL0)
    m2 = map_line(derive(f, Power(2)), VERTICAL0)
    if m1.error != 0.0 or m2.error != 0.0:
        problems.append("rigid images were not exact")
    trio = (VERTICAL0, m1.line, m2.line)
    for a in range(3):
        for b in range(a + 1, 3):
            for m in range(-2, 3):
                r = order_compare(trio[a], translate_line(trio[b], m, 0))
                if r.kind not in ("Less", "Greater"):
                    problems.append(f"curves {a}, {b} meet at shift {m}")
    _report(11, "disjoint iterates", problems, time.monotonic() - t0, 10.0)


# -- 12 ---------------------------------------------------------------------

def test_a12_worker_independence(tmp_path):
    t0 = time.monotonic()
    problems = []

    def as_bytes(d):
        return json.dumps(d, sort_keys=True).encode()

    skew = skew_lift(0.25, 0.1)
    e1 = estimate_rotation_set(skew, grid=100, n=200, workers=1)
    e4 = estimate_rotation_set(skew, grid=100, n=200, workers=4)
    if as_bytes(e1.as_dict()) != as_bytes(e4.as_dict()):
        problems.append("estimate differs between 1 and 4 workers")

    sine = sine_product_lift(0.1)
    p1 = find_periodic(sine, RationalVector(0, 0, 1), grid=16, workers=1)
    p5 = find_periodic(sine, RationalVector(0, 0, 1), grid=16, workers=5)
    if as_bytes(p1.as_dict()) != as_bytes(p5.as_dict()):
        problems.append("periodic report differs between 1 and 5 workers")

    skew_path = tmp_path / "skew.json"
    sine_path = tmp_path / "sine.json"
    save_map(skew, skew_path)
    save_map(sine, sine_path)
    jobs = (("estimate-rot", skew_path, ["--grid", "50", "--n", "100"]),
            ("find-periodic", sine_path, ["--grid", "16", "--n", "50"]))
    for task, map_path, extra in jobs:
        dirs = []
        for w in (1, 4):
            out = tmp_path / f"{task}-w{w}"
            out.mkdir()
            rc = cli_main([task, "--map", str(map_path), "--out", str(out),
                           "--workers", str(w)] + extra)
            if rc != 0:
                problems.append(f"{task} exited {rc} with {w} workers")
            dirs.append(out)
        names = sorted(os.listdir(dirs[0]))
        if names != sorted(os.listdir(dirs[1])):
            problems.append(f"{task}: file sets differ across worker counts")
            continue
        for name in names:
            if ((dirs[0] / name).read_bytes()
                    != (dirs[1] / name).read_bytes()):
                problems.append(f"{task}: {name} differs across worker "
                                "counts")
    _report(12, "worker independence", problems, time.monotonic() - t0)
