from fractions import Fraction

import numpy as np
import pytest

from floquetnf.interval import (ComplexInterval, DimensionMismatch, Interval, abs_sup, iv_arith,
                                mat_ops, parse_decimal, rowsum_norm)


def dyadic(rng, size=None, scale=64):
    return rng.integers(-8 * scale, 8 * scale, size=size) / scale


def contains_fraction(iv, q):
    return Fraction(float(iv.lo)) <= q <= Fraction(float(iv.hi))


def test_add_basic():
    r = iv_arith(Interval(1, 2), Interval(3, 4), "add")
    assert r.lo <= 4 and r.hi >= 6


def test_mul_sign_cases():
    r = iv_arith(Interval(-1, 2), Interval(3, 4), "mul")
    assert r.lo <= -4 and r.hi >= 8


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
def test_ops_enclose_rational_result(op):
    rng = np.random.default_rng(11)
    for _ in range(300):
        a0, a1 = sorted(dyadic(rng, 2))
        b0, b1 = sorted(dyadic(rng, 2))
        if op == "div" and b0 <= 0 <= b1:
            b0, b1 = abs(b1) + 0.25, abs(b1) + 1.0
        A, B = Interval(a0, a1), Interval(b0, b1)
        R = iv_arith(A, B, op)
        fa = [Fraction(a0), Fraction(a1)]
        fb = [Fraction(b0), Fraction(b1)]
        f = {"add": lambda x, y: x + y, "sub": lambda x, y: x - y,
             "mul": lambda x, y: x * y, "div": lambda x, y: x / y}[op]
        for x in fa:
            for y in fb:
                assert contains_fraction(R, f(x, y))


def test_division_by_zero_interval():
    with pytest.raises(ZeroDivisionError):
        Interval(1, 2) / Interval(-1, 1)


def test_outward_rounding_of_inexact_sum():
    r = Interval(0.1) + Interval(0.2)
    q = Fraction(0.1) + Fraction(0.2)
    assert contains_fraction(r, q)
    assert r.lo < r.hi


def test_parse_decimal_encloses_text():
    lo, hi = parse_decimal("0.1")
    assert Fraction(lo) <= Fraction(1, 10) <= Fraction(hi)
    assert parse_decimal("0.5") == (0.5, 0.5)
    lo, hi = parse_decimal("8/3")
    assert Fraction(lo) <= Fraction(8, 3) <= Fraction(hi)


def test_identity_product():
    rng = np.random.default_rng(2)
    A = Interval(rng.normal(size=(3, 3)))
    P = mat_ops(Interval(np.eye(3)), A, "mul")
    assert np.all(P.contains(A.mid))
    assert np.max(P.width) < 1e-14


def test_zero_product():
    A = Interval(np.arange(9.0).reshape(3, 3))
    P = mat_ops(A, Interval(np.zeros((3, 3))), "mul")
    assert np.all(P.contains(0.0))
    assert np.max(P.mag()) < 1e-300


def test_matmul_encloses_rational_product():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = dyadic(rng, (3, 3), 1024) / 7
        b = dyadic(rng, (3, 3), 1024) / 3
        P = mat_ops(Interval(a), Interval(b), "mul")
        for i in range(3):
            for j in range(3):
                q = sum(Fraction(a[i, k]) * Fraction(b[k, j]) for k in range(3))
                assert contains_fraction(P[i, j], q)


def test_matmul_with_radius_encloses_corners():
    rng = np.random.default_rng(9)
    a = Interval.from_midrad(rng.normal(size=(2, 2)), 1e-3)
    b = Interval.from_midrad(rng.normal(size=(2, 2)), 1e-3)
    P = a @ b
    for _ in range(200):
        x = rng.uniform(a.lo, a.hi)
        y = rng.uniform(b.lo, b.hi)
        assert np.all(P.contains(x @ y))


def test_mat_ops_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        mat_ops(Interval(np.zeros((2, 2))), Interval(np.zeros((3, 3))), "add")
    with pytest.raises(DimensionMismatch):
        mat_ops(Interval(np.zeros((2, 3))), Interval(np.zeros((2, 3))), "mul")


def test_abs_sup():
    assert abs_sup(Interval(np.array([[1.0, -2.0], [3.0, -4.0]]))) == 4
    assert abs_sup(Interval(np.zeros((2, 2)))) == 0
    assert abs_sup(Interval(-np.ones((2, 2)), np.ones((2, 2)))) == 1


def test_rowsum_norm():
    # upper bounds, tight to a few ulps
    assert 1 <= rowsum_norm(Interval(np.eye(3))) <= 1 + 1e-14
    assert 7 <= rowsum_norm(Interval(np.array([[1.0, -2.0], [3.0, -4.0]]))) <= 7 * (1 + 1e-14)
    rng = np.random.default_rng(4)
    a = dyadic(rng, (4, 4))
    direct = max(sum(abs(Fraction(v)) for v in row) for row in a)
    got = rowsum_norm(Interval(a))
    assert direct <= Fraction(got) <= direct * (1 + Fraction(1, 10**14))


def test_transcendentals_enclose_mpmath():
    import mpmath as mp
    x = Interval(0.3, 0.31)
    for name in ("exp", "log", "cos", "sin"):
        y = getattr(x, name)()
        for t in (0.3, 0.305, 0.31):
            v = float(getattr(mp, name)(mp.mpf(t)))
            assert y.lo <= v <= y.hi


def test_complex_interval_product():
    z = ComplexInterval(Interval(1.0), Interval(2.0))
    w = ComplexInterval(Interval(-0.5), Interval(0.25))
    p = z * w
    assert p.contains((1 + 2j) * (-0.5 + 0.25j))


def test_json_round_trip():
    x = Interval.from_midrad(np.array([0.1, -3.7]), 1e-9)
    y = Interval.from_json(x.to_json())
    assert np.all(y.lo <= x.lo) and np.all(y.hi >= x.hi)
    assert np.max(y.width - x.width) < 1e-14


def test_invalid_interval_rejected():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
