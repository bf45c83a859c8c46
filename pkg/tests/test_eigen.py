import itertools

import numpy as np
import pytest

from floquetnf.eigen import AmbiguousTrivial, DegenerateSpectrum, classify, verified_eigenpairs
from floquetnf.interval import ComplexInterval, Interval

# real roots of det(M - x I), mpmath bisection at 40 digits
CHAR_MATRIX = np.array([[0.5, 1.25, -0.75], [0.25, -1.5, 0.5], [1.0, 0.125, 2.25]])
CHAR_ROOTS = [-1.5831699165444192703, 1.034062326691684261, 1.7991075898527350093]

# eigenvalues of ROT_MATRIX (entries taken as exact binary floats), mpmath at 40 digits
ROT_MATRIX = np.array([[0.0, -2.0, 0.1], [2.0, 0.0, 0.0], [0.0, 0.3, -1.0]])
ROT_EIGS = [-0.98794219434764576917, complex(-0.0060289028261771154163, 1.997010575173679001),
            complex(-0.0060289028261771154163, -1.997010575173679001)]

# reference exponents for Lorenz sol #4
SOL4_STABLE = (-13.7210150091049, 2.544262339e-6)
SOL4_UNSTABLE = (0.0543483424385, 5.248456341e-5)


def test_diagonal_point_matrix():
    pairs = verified_eigenpairs(Interval(np.diag([1.0, 2.0, 3.0])))
    for j, p in enumerate(pairs):
        assert p.kind == "real"
        assert p.mu.contains(j + 1.0)
        e = np.zeros(3)
        e[j] = 1.0
        assert np.all(p.v.contains(e)) or np.all(p.v.contains(-e))
        assert float(np.max(p.mu.re.width)) < 1e-12


def test_identity_is_degenerate():
    with pytest.raises(DegenerateSpectrum):
        verified_eigenpairs(Interval(np.eye(3)))


def test_characteristic_polynomial_roots():
    R = Interval.from_midrad(CHAR_MATRIX, 1e-10)
    pairs = verified_eigenpairs(R)
    assert len(pairs) == 3
    for p, root in zip(pairs, CHAR_ROOTS):
        assert p.mu.contains(root)
        assert float(p.mu.re.width) < 1e-8


def test_complex_pair():
    pairs = verified_eigenpairs(Interval(ROT_MATRIX))
    kinds = sorted(p.kind for p in pairs)
    assert kinds == ["complex", "complex", "real"]
    # the floating eigenvalues from LAPACK sit a few ulps outside; use the oracle
    for lam in ROT_EIGS:
        assert sum(bool(p.mu.contains(lam)) for p in pairs) == 1


def test_labels_diag():
    pairs = verified_eigenpairs(Interval(np.diag([-1.0, 0.0, 1.0])))
    cls = classify(pairs, Interval(1.0))
    assert cls.labels() == ["stable", "trivial", "unstable"]
    assert cls.lyapunov[1].contains(0.0)


def test_no_trivial_exponent():
    pairs = verified_eigenpairs(Interval(np.diag([-1.0, -2.0])))
    with pytest.raises(AmbiguousTrivial):
        classify(pairs, Interval(1.0))
    cls = classify(pairs, Interval(1.0), expect_trivial=False)
    assert cls.labels() == ["stable", "stable"]


def test_two_trivial_candidates():
    pairs = verified_eigenpairs(Interval(np.diag([-1e-7, 1e-7, 2.0])))
    with pytest.raises(AmbiguousTrivial):
        classify(pairs, Interval(1.0))
    # a narrower band separates them
    cls = classify(pairs, Interval(1.0), trivial_tol=1e-8, expect_trivial=False)
    assert cls.labels() == ["stable", "unstable", "unstable"]


def samples(R, count, rng):
    lo, hi = np.asarray(R.lo), np.asarray(R.hi)
    n = lo.shape[0]
    # all 2^(n^2) corners would be 512 for n=3; take a fixed subset plus extremes
    yield lo
    yield hi
    for bits in itertools.islice(itertools.product([0, 1], repeat=n * n), 0, 512, 8):
        b = np.array(bits, dtype=float).reshape(n, n)
        yield lo + b * (hi - lo)
    for _ in range(count):
        yield rng.uniform(lo, hi)


def check_sampled(R, pairs, rng):
    for S in samples(R, 100, rng):
        for lam in np.linalg.eigvals(S):
            assert sum(bool(p.mu.contains(lam)) for p in pairs) == 1


def test_sampled_matrices_random():
    rng = np.random.default_rng(8)
    R = Interval.from_midrad(CHAR_MATRIX, 1e-6)
    check_sampled(R, verified_eigenpairs(R), rng)


def test_sampled_matrices_sol4(sol4_run):
    R = sol4_run.form.R
    check_sampled(R, verified_eigenpairs(R), np.random.default_rng(3))


def test_residual_containment():
    R = Interval.from_midrad(CHAR_MATRIX, 1e-9)
    for p in verified_eigenpairs(R):
        RC = ComplexInterval(R)
        res = RC @ p.v - p.v * p.mu
        assert np.all(res.contains(np.zeros(3)))
        assert p.v.abs2().sum().contains(1.0)


def test_sol4_classification(sol4_run):
    pairs = verified_eigenpairs(sol4_run.form.R)
    cls = classify(pairs, sol4_run.form.tau)
    assert cls.labels() == ["stable", "trivial", "unstable"]
    st, tr, un = cls.lyapunov
    assert abs(float(st.mid) - SOL4_STABLE[0]) < 1e-3
    assert abs(float(un.mid) - SOL4_UNSTABLE[0]) < 1e-3
    assert bool(tr.contains(0.0))
    assert float(st.hi) < 0 < float(un.lo)


def test_labels_survive_shrinking(sol4_run):
    R = sol4_run.form.R
    tight = Interval.from_midrad(np.asarray(R.mid), 1e-9)
    wide = classify(verified_eigenpairs(R), sol4_run.form.tau).labels()
    assert classify(verified_eigenpairs(tight), sol4_run.form.tau).labels() == wide


def test_json_layout():
    pairs = verified_eigenpairs(Interval(np.diag([-1.0, 0.0, 1.0])))
    obj = classify(pairs, Interval(1.0)).to_json()
    assert [e["label"] for e in obj] == ["stable", "trivial", "unstable"]
    assert set(obj[0]) >= {"mu", "v", "label", "lyapunov"}
