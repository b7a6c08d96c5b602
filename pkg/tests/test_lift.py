"""Lift representation: evaluation, derived maps, deck commutation, the
injectivity screen, and the map file format."""

import json
import math
import random
import types

import pytest

from torusdyn._kernels import Program, Step
from torusdyn.gl2z import D1
from torusdyn.lift import (ConjugateBy, Inverse, MapLift, Power, Term,
                           Translate, commutation_residual, compose, derive,
                           evaluate, half_shift_lift, jacobian_screen,
                           load_map, map_from_dict, map_to_dict, orbit,
                           rigid_lift, save_map, sine_product_lift, skew_lift,
                           two_rest_points_lift)


def close(p, q, tol=1e-12):
    return math.hypot(p[0] - q[0], p[1] - q[1]) <= tol


def test_evaluate_rigid():
    assert evaluate(rigid_lift(0.3, 0.7), (0.0, 0.0)) == (0.3, 0.7)


def test_evaluate_skew_quarter_point():
    # sin(2 pi / 4) = 1 lands exactly on the amplitude
    f = skew_lift(0.25, 0.1)
    assert close(evaluate(f, (0.25, 0.0)), (0.25, 0.35))


def test_half_shift_square_is_deck_translation():
    f = half_shift_lift(0.2)
    g = derive(derive(f, Power(2)), Translate(-1, 0))
    rng = random.Random(5)
    for _ in range(50):
        p = (rng.uniform(-3, 3), rng.uniform(-3, 3))
        assert close(evaluate(g, p), p)
    pts = orbit(g, (0.0, 0.0), 4)
    assert all(close(p, (0.0, 0.0)) for p in pts)


def test_derive_translate_and_conjugate():
    f = rigid_lift(0.3, 0.7)
    t = derive(f, Translate(1, 0))
    assert close(evaluate(t, (0.0, 0.0)), (1.3, 0.7))
    c = derive(f, ConjugateBy(D1))
    # conjugating a translation moves it by the matrix image (-0.4, 0.7)
    assert close(evaluate(c, (2.0, -1.0)), (1.6, -0.3))
    p2 = derive(f, Power(2))
    assert close(evaluate(p2, (0.0, 0.0)), (0.6, 1.4))


def test_power_replays_the_same_float_sequence():
    f = skew_lift(0.25, 0.1)
    for q in (2, 3, 7):
        g = derive(f, Power(q))
        p = (0.1234, -0.777)
        assert evaluate(g, p) == orbit(f, p, q)[-1]


def test_orbit_pins():
    pts = orbit(rigid_lift(0.3, 0.7), (0.0, 0.0), 3)
    want = [(0.0, 0.0), (0.3, 0.7), (0.6, 1.4), (0.9, 2.1)]
    assert all(close(a, b) for a, b in zip(pts, want))
    # a skew orbit never leaves its vertical line
    pts = orbit(skew_lift(0.25, 0.1), (0.3, 0.0), 20)
    assert all(p[0] == 0.3 for p in pts)


def test_orbit_rejects_bad_n():
    with pytest.raises(ValueError):
        orbit(rigid_lift(0.1, 0.2), (0, 0), 0)


def test_commutation_residual_base_and_derived():
    assert commutation_residual(skew_lift(0.25, 0.1), 200) < 1e-12
    conj = derive(skew_lift(0.25, 0.1), ConjugateBy(D1))
    assert commutation_residual(conj, 200) < 1e-9


def test_commutation_residual_detects_corruption():
    # a fractional frequency cannot come from the public constructors; build
    # the raw program directly
    bad = types.SimpleNamespace(program=Program(
        [Step(0, trans=(0.3, 0.0), pterms=((0.5, 0.0, 0.3, 0.0),))]))
    assert commutation_residual(bad, 200) > 0.1


def test_conjugation_roundtrip():
    f = sine_product_lift(0.1)
    g = derive(derive(f, ConjugateBy(D1)), ConjugateBy(D1.inverse()))
    rng = random.Random(9)
    for _ in range(1000):
        p = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        assert close(evaluate(g, p), evaluate(f, p), 1e-9)


def test_inverse_evaluation():
    f = sine_product_lift(0.1)
    inv = derive(f, Inverse())
    rng = random.Random(13)
    for _ in range(100):
        p = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        assert close(evaluate(inv, evaluate(f, p)), p, 1e-10)
        assert close(evaluate(f, evaluate(inv, p)), p, 1e-10)


def test_inverse_diverges_with_diagnostic():
    f = MapLift(0.0, 0.0, p_terms=(Term(1, 0, amp_sin=5.0),))
    inv = derive(f, Inverse())
    with pytest.raises(ArithmeticError):
        for t in range(200):
            evaluate(inv, (t / 31.0, 0.0))


def test_compose():
    f = rigid_lift(0.25, 0.0)
    g = skew_lift(0.25, 0.1)
    h = compose(g, f)
    p = (0.0, 0.0)
    assert evaluate(h, p) == evaluate(g, evaluate(f, p))


def test_jacobian_screen():
    assert jacobian_screen(rigid_lift(0.3, 0.7)).min_det == 1.0
    scr = jacobian_screen(sine_product_lift(0.1))
    assert scr.passed and 0.5 < scr.min_det < 1.0
    # amplitude large enough to fold: flagged, still usable
    scr = jacobian_screen(MapLift(0.0, 0.0, p_terms=(Term(1, 0, amp_sin=1.0),)))
    assert not scr.passed and scr.min_det < 0.0


def test_shipped_examples_commute():
    for f in (rigid_lift(0.3, 0.7), skew_lift(), half_shift_lift(),
              sine_product_lift(), two_rest_points_lift()):
        assert commutation_residual(f, 100) < 1e-9


def test_term_rejects_non_integer_frequency():
    with pytest.raises((TypeError, ValueError)):
        Term(0.5, 1, amp_sin=0.1)


def test_map_dict_roundtrip():
    f = derive(derive(skew_lift(0.25, 0.1), Power(2)), Translate(-1, 0))
    assert map_from_dict(map_to_dict(f)) == f


def test_map_dict_rejects_unknown_fields():
    d = map_to_dict(skew_lift())
    d["extra"] = 1
    with pytest.raises((KeyError, ValueError)):
        map_from_dict(d)


def test_save_load_roundtrip(tmp_path):
    f = sine_product_lift(0.1)
    path = tmp_path / "m.json"
    save_map(f, path)
    assert load_map(path) == f
    # writer output is canonical: a second save is byte-identical
    first = path.read_bytes()
    save_map(load_map(path), path)
    assert path.read_bytes() == first


def test_power_requires_positive_exponent():
    with pytest.raises(ValueError):
        Power(0)
