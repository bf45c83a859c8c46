import numpy as np
import pytest

from floquetnf.galerkin import (FloquetCandidate, GalerkinProblem, build_operator, apply_A, apply_Adag,
                                f_eval, f_vector, init_guess, jacobian_assemble, jacobian_enclosure,
                                lambda_k, lambda_k_inverse, newton_refine)
from floquetnf.interval import Interval
from floquetnf.sequence import MatrixFourierSeq
from floquetnf.systems import jacobian_coeffs

# Fourier data of exp(sin(2 pi t) / (2 pi)) in the basis exp(i k pi t), mpmath at 40 digits
BESSEL = {
    0: 1.0063426064077807499,
    2: -0.079829702730373333552j,
    4: -0.0031729758637890557765,
    6: 0.000084121420793924914922j,
    8: 1.6730128802935571524e-6,
    10: -2.6621208463485836144e-8j,
    12: -3.5302152216654538213e-10,
    14: 4.0127691457084235145e-12j,
}

# reference R for Lorenz sol #4
SOL4_R = np.array([
    [-10.103827000749006, 5.011512150268070, -4.181592133228406],
    [2.108771563239242, -0.623931925418962, 0.486619976897008],
    [-6.292527840128125, 3.486887629270139, -2.938907740498710],
])


def bessel_candidate(m, a=-0.5):
    Qre = np.zeros((m, 1, 1))
    Qim = np.zeros((m, 1, 1))
    for k, v in BESSEL.items():
        if k < m:
            Qre[k] = complex(v).real
            Qim[k] = complex(v).imag
    return FloquetCandidate(1, m, Interval(1.0), np.array([[a]]), Qre, Qim)


def constant_problem(m=6):
    A0 = np.array([[-1.0, 0.5], [0.25, -2.0]])
    A = MatrixFourierSeq.from_point(1.0, A0[None])
    prob = GalerkinProblem(A, m)
    Qre = np.zeros((m, 2, 2))
    Qre[0] = np.eye(2)
    x = FloquetCandidate(2, m, Interval(1.0), A0.copy(), Qre, np.zeros((m, 2, 2)))
    return prob, x


def test_constant_exact_solution():
    prob, x = constant_problem()
    F = f_eval(x, prob, 10)
    assert np.all(F.contains(0.0))
    assert np.max(F.mag()) < 1e-13


def test_initial_condition_equation_exact():
    prob, x = constant_problem()
    x.R[:] = 7.0               # wrong R, but f_star only sees Q
    F = f_eval(x, prob)
    n2 = 4
    assert np.all(F[0, :n2].lo == 0) and np.all(F[0, :n2].hi == 0)


def test_cosine_bessel_residual(cosine_seq):
    prob = GalerkinProblem(cosine_seq, 30)
    x = bessel_candidate(30)
    F = f_eval(x, prob, 20)
    assert np.max(F.mag()) < 1e-10


def test_jacobian_finite_differences(sol4_orbit):
    prob = GalerkinProblem(jacobian_coeffs(sol4_orbit), 8)
    x = init_guess(prob, 8)
    v = x.to_vector()
    D = jacobian_assemble(x, prob)
    rng = np.random.default_rng(0)
    h0 = rng.normal(size=v.size)
    errs = []
    for eps in (1e-2, 1e-3):
        h = eps * h0
        f1 = f_vector(FloquetCandidate.from_vector(v + h, 3, 8, x.tau), prob)
        f0 = f_vector(x, prob)
        errs.append(np.max(np.abs(D @ h - (f1 - f0))))
    # the map is quadratic: error scales with |h|^2
    assert errs[1] < errs[0] * 2e-2
    assert errs[1] < 1e-3


def test_jacobian_block_structure():
    prob, x = constant_problem(5)
    D = jacobian_assemble(x, prob)
    n2 = 4
    d = 2 * n2
    # df_star / dQ_k1 is 2 I, df_star / dR is 0
    for k in range(1, 5):
        assert np.array_equal(D[:n2, k * d:k * d + n2], 2 * np.eye(n2))
    assert np.all(D[:n2, :n2] == 0)
    # constant A: no coupling between different modes outside the R column
    for i in range(1, 5):
        for j in range(1, 5):
            if i != j:
                assert np.all(D[i * d:(i + 1) * d, j * d:(j + 1) * d] == 0)
    E = jacobian_enclosure(x, prob)
    assert np.all(E.contains(D))


def test_newton_from_exact_start():
    prob, x = constant_problem()
    y = newton_refine(x, prob)
    assert np.array_equal(y.to_vector(), x.to_vector())


def test_newton_cosine_from_perturbed_start(cosine_seq):
    prob = GalerkinProblem(cosine_seq, 30)
    x = bessel_candidate(30)
    rng = np.random.default_rng(5)
    v = x.to_vector() + 1e-3 * rng.normal(size=x.to_vector().size)
    y = newton_refine(FloquetCandidate.from_vector(v, 1, 30, x.tau), prob)
    assert y.R[0, 0] == pytest.approx(-0.5, abs=1e-12)
    for k, ref in BESSEL.items():
        assert abs(complex(y.Qre[k, 0, 0], y.Qim[k, 0, 0]) - ref) < 1e-12


def test_newton_sol4(sol4_run):
    prob, x = sol4_run.prob, sol4_run.x
    assert np.max(np.abs(f_vector(x, prob))) < 1e-12
    assert np.max(np.abs(x.R - SOL4_R)) < 1e-3


def test_init_guess_constant():
    prob, _ = constant_problem(6)
    x = init_guess(prob, 6)
    assert np.allclose(x.R, prob.A_seq.mid_complex(0)[0].real, atol=1e-8)
    assert np.max(np.abs(x.Qre[1:])) < 1e-8 and np.max(np.abs(x.Qim[1:])) < 1e-8


def test_init_guess_cosine(cosine_seq):
    x = init_guess(GalerkinProblem(cosine_seq, 30), 30)
    assert x.R[0, 0] == pytest.approx(-0.5, abs=1e-6)
    for k, ref in BESSEL.items():
        assert abs(complex(x.Qre[k, 0, 0], x.Qim[k, 0, 0]) - ref) < 1e-6


def test_init_guess_sol1_captures(sol1_orbit):
    prob = GalerkinProblem(jacobian_coeffs(sol1_orbit), 60)
    x = init_guess(prob, 60)
    assert np.max(np.abs(f_vector(x, prob))) < 1e-3


def test_lambda_rotation_block():
    n, k, tau = 2, 3, 1.7
    A = MatrixFourierSeq.from_point(tau, np.zeros((1, n, n)))
    L = lambda_k(k, np.zeros((n, n)), A)
    w = k * np.pi / tau
    d = n * n
    ref = np.block([[np.zeros((d, d)), -w * np.eye(d)], [w * np.eye(d), np.zeros((d, d))]])
    assert np.all(L.contains(ref))
    Li = lambda_k_inverse(L)
    assert np.all(Li.contains(np.linalg.inv(ref)))
    norm = np.max(np.sum(Li.mag(), axis=1))
    assert norm == pytest.approx(tau / (k * np.pi), rel=1e-12)


def test_inverse_of_diagonal_intervals():
    L = Interval(np.diag([2.0, 4.0]), np.diag([2.1, 4.1]))
    Li = lambda_k_inverse(L)
    for a in (2.0, 2.05, 2.1):
        for b in (4.0, 4.1):
            assert np.all(Li.contains(np.diag([1 / a, 1 / b])))
    assert Li[0, 0].hi < 0.51 and Li[0, 0].lo > 1 / 2.1 - 0.01


def test_inverse_random_diagonally_dominant():
    rng = np.random.default_rng(6)
    for _ in range(20):
        M = rng.normal(size=(6, 6))
        M += np.diag(np.sum(np.abs(M), axis=1) + 1)
        L = Interval.from_midrad(M, 1e-9)
        Li = lambda_k_inverse(L)
        P = Li @ L
        assert np.all(P.contains(np.eye(6)))
        assert np.all(Li.contains(np.linalg.inv(M)))


def test_lambda_inverses_sol4(sol4_run):
    x, A = sol4_run.x, sol4_run.A
    for k in range(x.m, x.m + 51):
        L = lambda_k(k, x.R, A)
        Li = lambda_k_inverse(L)
        assert np.all(Li.contains(np.linalg.inv(np.asarray(L.mid))))


def test_operator_defect_and_zero(sol4_run):
    op = build_operator(sol4_run.x, sol4_run.prob, sol4_run.x.m + 6)
    d = 2 * 9
    size = d * op.M
    rng = np.random.default_rng(2)
    v = rng.normal(size=size)
    defect = apply_A(op, apply_Adag(op, v)) - v
    assert np.max(np.abs(defect)) < 1e-8 * np.max(np.abs(v)) * 1e3
    assert np.all(apply_A(op, np.zeros(size)) == 0)
    # A applied to f reproduces the Newton step
    F = f_vector(sol4_run.x, sol4_run.prob)
    step = apply_A(op, np.concatenate([F, np.zeros(d * 6)]))[:F.size]
    assert np.allclose(step, np.linalg.solve(jacobian_assemble(sol4_run.x, sol4_run.prob), F), atol=1e-12)
