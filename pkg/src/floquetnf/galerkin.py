"""
Fourier-Galerkin formulation of the Floquet normal form.

Unknowns ``x = (R, Q_0, Q_1, ...)`` with ``Q_k = Q_{k,1} + i Q_{k,2}``
solve ``f(x) = 0`` where, with ``w = pi / tau``,

    f_star = Q_0 + 2 sum_{k>=1} Q_{k,1} - I
    f_0    = Q_0 R - (A*Q)_0
    f_k,1  = -k w Q_{k,2} + Q_{k,1} R - (A*Q)_{k,1}
    f_k,2  =  k w Q_{k,1} + Q_{k,2} R - (A*Q)_{k,2}

Vectors are stored as blocks of length ``2 n^2``: block 0 holds
``(R, Q_0)`` (equations ``(f_star, f_0)``), block ``k`` holds
``(Q_{k,1}, Q_{k,2})``.  Matrices are flattened row-major, so left
multiplication by ``X`` is ``kron(X, I)`` and right multiplication by
``R`` is ``kron(I, R.T)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, logm

from .interval import U, Interval, IntervalMatrix, fmt_float, matmul_up, sum_up, up, down
from .sequence import MatrixFourierSeq, convolve_many
from .systems import NoConvergence

__all__ = [
    "SingularJacobian",
    "LogBranchFailure",
    "NotCertifiablyInvertible",
    "FloquetCandidate",
    "GalerkinProblem",
    "BlockOperator",
    "f_eval",
    "f_vector",
    "jacobian_assemble",
    "jacobian_enclosure",
    "newton_refine",
    "init_guess",
    "lambda_k",
    "lambda_blocks",
    "lambda_k_inverse",
    "build_operator",
    "apply_A",
    "apply_Adag",
]

log = logging.getLogger(__name__)


class SingularJacobian(RuntimeError):
    """Newton matrix is numerically singular."""


class LogBranchFailure(RuntimeError):
    """Monodromy has an eigenvalue on the closed negative real axis."""


class NotCertifiablyInvertible(RuntimeError):
    """Neumann defect of an approximate inverse is not below one."""


@dataclass
class FloquetCandidate:
    """Point data ``(R, Q_0, ..., Q_{m-1})``; ``Qim[0]`` is zero."""

    n: int
    m: int
    tau: Interval
    R: np.ndarray
    Qre: np.ndarray
    Qim: np.ndarray

    def copy(self):
        return FloquetCandidate(self.n, self.m, self.tau, self.R.copy(), self.Qre.copy(), self.Qim.copy())

    def to_vector(self) -> np.ndarray:
        n2 = self.n * self.n
        v = np.empty((self.m, 2, n2))
        v[0, 0] = self.R.ravel()
        v[0, 1] = self.Qre[0].ravel()
        v[1:, 0] = self.Qre[1:].reshape(self.m - 1, n2)
        v[1:, 1] = self.Qim[1:].reshape(self.m - 1, n2)
        return v.ravel()

    @classmethod
    def from_vector(cls, v, n, m, tau):
        v = np.asarray(v, dtype=float).reshape(m, 2, n, n)
        Qre = np.empty((m, n, n))
        Qim = np.zeros((m, n, n))
        R = v[0, 0].copy()
        Qre[0] = v[0, 1]
        Qre[1:] = v[1:, 0]
        Qim[1:] = v[1:, 1]
        return cls(n, m, tau, R, Qre, Qim)

    def resized(self, m):
        """Zero-padded or truncated copy with ``m`` modes."""
        Qre = np.zeros((m, self.n, self.n))
        Qim = np.zeros((m, self.n, self.n))
        k = min(m, self.m)
        Qre[:k] = self.Qre[:k]
        Qim[:k] = self.Qim[:k]
        return FloquetCandidate(self.n, m, self.tau, self.R.copy(), Qre, Qim)

    def as_sequence(self, tail_C=0.0, tail_s=2.0) -> MatrixFourierSeq:
        return MatrixFourierSeq(self.n, self.tau, Interval(self.Qre), Interval(self.Qim), tail_C, tail_s)

    def to_json(self):
        Q = []
        for k in range(self.m):
            e = {"k": k, "re": [[fmt_float(x) for x in row] for row in self.Qre[k]]}
            if k > 0:
                e["im"] = [[fmt_float(x) for x in row] for row in self.Qim[k]]
            Q.append(e)
        return {"n": self.n, "m": self.m, "tau": self.tau.to_json(),
                "R": [[fmt_float(x) for x in row] for row in self.R], "Q": Q}

    @classmethod
    def from_json(cls, obj):
        try:
            n = int(obj["n"])
            m = int(obj["m"])
            tau = Interval.from_json(obj["tau"])
            R = np.array(obj["R"], dtype=float).reshape(n, n)
            Qre = np.zeros((m, n, n))
            Qim = np.zeros((m, n, n))
            for e in obj["Q"]:
                k = int(e["k"])
                Qre[k] = np.array(e["re"], dtype=float)
                if k > 0:
                    Qim[k] = np.array(e["im"], dtype=float)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"malformed candidate: {exc!r}") from None
        return cls(n, m, tau, R, Qre, Qim)


@dataclass
class GalerkinProblem:
    A_seq: MatrixFourierSeq
    m: int
    s: float = 2.0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if not 2 <= self.s <= self.A_seq.tail_s:
            raise ValueError(f"s must lie in [2, {self.A_seq.tail_s}]")

    @property
    def n(self):
        return self.A_seq.n

    @property
    def tau(self) -> Interval:
        return self.A_seq.half_period


# ---------------------------------------------------------------------------
# floating point map

def _omega_mid(prob):
    return np.pi / float(prob.tau.mid)


def f_vector(x: FloquetCandidate, prob: GalerkinProblem, k_out=None) -> np.ndarray:
    """Floating-point ``f`` for blocks ``0..k_out-1`` (midpoint data)."""
    n, m = x.n, x.m
    K = m if k_out is None else int(k_out)
    om = _omega_mid(prob)
    Qc = x.Qre + 1j * x.Qim
    ls = np.arange(-(m - 1), m)
    Ql = np.where((ls < 0)[:, None, None], np.conj(Qc[np.abs(ls)]), Qc[np.abs(ls)])
    jmax = K - 1 + m - 1
    Aall = prob.A_seq.mid_complex(jmax)
    ks = np.arange(K)
    idx = ks[:, None] - ls[None, :] + jmax
    conv = np.einsum("klab,lbc->kac", Aall[idx], Ql)
    out = np.zeros((K, 2, n, n))
    I = np.eye(n)
    out[0, 0] = x.Qre[0] + 2 * x.Qre[1:].sum(axis=0) - I
    out[0, 1] = x.Qre[0] @ x.R - conv[0].real
    kk = min(K, m)
    k = np.arange(1, kk)[:, None, None]
    out[1:kk, 0] = -k * om * x.Qim[1:kk] + x.Qre[1:kk] @ x.R - conv[1:kk].real
    out[1:kk, 1] = k * om * x.Qre[1:kk] + x.Qim[1:kk] @ x.R - conv[1:kk].imag
    if K > m:
        out[m:, 0] = -conv[m:].real
        out[m:, 1] = -conv[m:].imag
    return out.reshape(K, 2 * n * n).ravel()


# ---------------------------------------------------------------------------
# Jacobian blocks

def _left(X):
    n = X.shape[-1]
    return np.einsum("...ab,cd->...acbd", X, np.eye(n)).reshape(X.shape[:-2] + (n * n, n * n))


def _right(R):
    n = R.shape[-1]
    return np.kron(np.eye(n), R.T)


def _coupling_blocks(ks, ls, getA, R, om, absmode):
    """Blocks d f_k / d Q_l for k, l >= 1 (arrays of equal shape).

    ``getA(js)`` returns real and imaginary parts (float arrays).  In
    ``absmode`` every parameter is assumed nonnegative and all signs are
    replaced by ``+``.
    """
    ks = np.asarray(ks)
    ls = np.asarray(ls)
    n = R.shape[-1]
    n2 = n * n
    are, aim = getA(ks - ls)
    bre, bim = getA(ks + ls)
    if absmode:
        rr = _left(are + bre)
        ri = _left(aim + bim)
        ir = _left(aim + bim)
        ii = _left(are + bre)
    else:
        rr = -_left(are + bre)
        ri = _left(aim - bim)
        ir = -_left(aim + bim)
        ii = -_left(are - bre)
    diag = ks == ls
    if np.any(diag):
        Rr = _right(R)
        eye = np.eye(n2)
        kw = (ks * om)[..., None, None]
        d = diag[..., None, None]
        rr = rr + np.where(d, Rr, 0.0)
        ii = ii + np.where(d, Rr, 0.0)
        if absmode:
            ri = ri + np.where(d, kw * eye, 0.0)
            ir = ir + np.where(d, kw * eye, 0.0)
        else:
            ri = ri - np.where(d, kw * eye, 0.0)
            ir = ir + np.where(d, kw * eye, 0.0)
    top = np.concatenate([rr, ri], axis=-1)
    bot = np.concatenate([ir, ii], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _assemble(R, Qre, Qim, getA, om, absmode, const=1.0):
    m, n = Qre.shape[0], R.shape[0]
    n2 = n * n
    d = 2 * n2
    D = np.zeros((m, d, m, d))
    I2 = np.eye(n2)
    sg = 1.0 if absmode else -1.0
    a0re, _ = getA(np.array([0]))
    # row 0, column 0: (f_star, f_0) wrt (R, Q_0)
    D[0, :n2, 0, n2:] = const * I2
    D[0, n2:, 0, :n2] = _left(Qre[0])
    D[0, n2:, 0, n2:] = _right(R) + sg * _left(a0re[0])
    if m > 1:
        ls = np.arange(1, m)
        are, aim = getA(ls)
        # row 0, columns l >= 1
        for j, l in enumerate(ls):
            D[0, :n2, l, :n2] = 2 * const * I2
        D[0, n2:, 1:, :n2] = (2 * sg * _left(are)).transpose(1, 0, 2)
        D[0, n2:, 1:, n2:] = (2 * sg * _left(aim)).transpose(1, 0, 2)
        # rows k >= 1, column 0
        D[1:, :n2, 0, :n2] = _left(Qre[1:])
        D[1:, n2:, 0, :n2] = _left(Qim[1:])
        D[1:, :n2, 0, n2:] = sg * _left(are)
        D[1:, n2:, 0, n2:] = sg * _left(aim)
        # rows k >= 1, columns l >= 1
        kk, ll = np.meshgrid(ls, ls, indexing="ij")
        D[1:, :, 1:, :] = _coupling_blocks(kk, ll, getA, R, om, absmode).transpose(0, 2, 1, 3)
    return D.reshape(m * d, m * d)


def _getter_mid(A_seq, jmax):
    re, im = A_seq.coef(np.arange(-jmax, jmax + 1))
    rm, rr = re.midrad()
    im_m, im_r = im.midrad()

    def mid(js):
        js = np.asarray(js) + jmax
        return rm[js], im_m[js]

    def rad(js):
        js = np.asarray(js) + jmax
        return rr[js], im_r[js]

    def absmid(js):
        js = np.asarray(js) + jmax
        return np.abs(rm[js]), np.abs(im_m[js])

    return mid, rad, absmid


def jacobian_assemble(x: FloquetCandidate, prob: GalerkinProblem) -> np.ndarray:
    """Point Jacobian of the truncated map at ``x`` (midpoint data)."""
    mid, _, _ = _getter_mid(prob.A_seq, 2 * x.m)
    return _assemble(x.R, x.Qre, x.Qim, mid, _omega_mid(prob), False)


def jacobian_enclosure(x: FloquetCandidate, prob: GalerkinProblem) -> IntervalMatrix:
    """Interval Jacobian of the truncated map over the uncertainty in ``A`` and ``tau``."""
    mid, rad, absmid = _getter_mid(prob.A_seq, 2 * x.m)
    om_m, om_r = prob.A_seq.omega.midrad()
    om_m, om_r = float(om_m), float(om_r)
    Dm = _assemble(x.R, x.Qre, x.Qim, mid, om_m, False)
    z = np.zeros_like(x.R)
    Dr = _assemble(z, np.zeros_like(x.Qre), np.zeros_like(x.Qim), rad, om_r, True, const=0.0)
    Da = _assemble(np.abs(x.R), np.abs(x.Qre), np.abs(x.Qim), absmid, abs(om_m), True)
    rad_tot = up(up(Dr + up(8 * U * Da)) * (1 + 8 * U))
    return Interval.from_midrad(Dm, rad_tot)


# ---------------------------------------------------------------------------
# rigorous evaluation of f

def f_eval(x: FloquetCandidate, prob: GalerkinProblem, k_max=None) -> Interval:
    """Enclosures of ``f`` on blocks ``0..k_max-1``, shape ``(k_max, 2 n^2)``.

    Block 0 is ``(f_star, f_0)``, block ``k`` is ``(f_k1, f_k2)``.  For
    ``k >= m`` the candidate coefficients vanish and only the
    convolution contributes.
    """
    n, m = x.n, x.m
    K = m if k_max is None else int(k_max)
    n2 = n * n
    Q = x.as_sequence()
    cre, cim = convolve_many(prob.A_seq, Q, np.arange(K), cutoff=m - 1)
    om = prob.A_seq.omega
    R = Interval(x.R)
    I = Interval(np.eye(n))
    blocks = []
    f_star = Interval(x.Qre[0]) + Interval(x.Qre[1:]).sum(axis=0) * 2.0 - I
    f0 = Interval(x.Qre[0]) @ R - cre[0]
    blocks.append(Interval.concat([f_star.reshape(n2), f0.reshape(n2)]))
    kk = min(K, m)
    if kk > 1:
        ks = Interval(np.arange(1, kk, dtype=float)).reshape(-1, 1, 1)
        kw = ks * om
        Qr = Interval(x.Qre[1:kk])
        Qi = Interval(x.Qim[1:kk])
        f1 = Qr @ R - kw * Qi - cre[1:kk]
        f2 = Qi @ R + kw * Qr - cim[1:kk]
        blocks.append(Interval.concat([f1.reshape(kk - 1, n2), f2.reshape(kk - 1, n2)], axis=1))
    if K > m:
        blocks.append(Interval.concat([(-cre[m:]).reshape(K - m, n2), (-cim[m:]).reshape(K - m, n2)], axis=1))
    out = [blocks[0].reshape(1, 2 * n2)] + blocks[1:]
    return Interval.concat(out, axis=0)


# ---------------------------------------------------------------------------
# Newton and initial guess

def newton_refine(x0: FloquetCandidate, prob: GalerkinProblem, tol=1e-12, max_iter=30) -> FloquetCandidate:
    """Newton iteration on the truncated system."""
    x = x0.copy()
    n, m = x.n, x.m
    v = x.to_vector()
    prev = np.inf
    for it in range(max_iter + 1):
        F = f_vector(FloquetCandidate.from_vector(v, n, m, x.tau), prob)
        res = float(np.abs(F).max())
        log.info("newton iter %d residual %.3e", it, res)
        if res <= tol:
            return FloquetCandidate.from_vector(v, n, m, x.tau)
        if it == max_iter:
            break
        if res >= prev and res < 1e3 * tol:
            # rounding floor reached just above tol
            break
        prev = res
        D = jacobian_assemble(FloquetCandidate.from_vector(v, n, m, x.tau), prob)
        try:
            dv = np.linalg.solve(D, F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from None
        if not np.all(np.isfinite(dv)):
            raise SingularJacobian("non-finite Newton step")
        v = v - dv
    raise NoConvergence(f"Newton residual {res:.3e} above tol {tol:.1e}")


def _A_of_t(A_seq, jmax):
    coeffs = A_seq.mid_complex(jmax)
    js = np.arange(-jmax, jmax + 1)
    om = np.pi / float(A_seq.half_period.mid)

    def A(t):
        ph = np.exp(1j * js * om * t)
        return np.real(np.tensordot(ph, coeffs, axes=(0, 0)))

    return A


def _real_blocks(R):
    """Real basis ``W`` with ``W^-1 R W`` block diagonal (1x1 and 2x2 blocks)."""
    lam, V = np.linalg.eig(R)
    n = R.shape[0]
    if np.linalg.cond(V) > 1e8:
        return None
    W = np.zeros((n, n))
    groups = []
    used = np.zeros(n, bool)
    col = 0
    for i in np.argsort(lam.real):
        if used[i]:
            continue
        if abs(lam[i].imag) <= 1e-12 * max(1.0, abs(lam[i])):
            W[:, col] = V[:, i].real
            groups.append((slice(col, col + 1), np.array([[lam[i].real]]), lam[i].real))
            used[i] = True
            col += 1
        else:
            j = int(np.argmin(np.where(used, np.inf, np.abs(lam - np.conj(lam[i])))))
            a, b = lam[i].real, lam[i].imag
            W[:, col], W[:, col + 1] = V[:, i].real, V[:, i].imag
            groups.append((slice(col, col + 2), np.array([[a, b], [-b, a]]), a))
            used[i] = used[j] = True
            col += 2
    return W, groups


def _Q_by_blocks(A, R, n, T2, ts):
    """``Q(t)`` on the grid ``ts`` by stable integration of each block of ``Q W``.

    ``P_g = Q W_g`` solves ``P' = A P - P B_g`` and is ``2 tau``-periodic, so
    it can be started from ``W_g`` at either end.  The direction is chosen
    so the other exponents, shifted by ``Re B_g``, do not grow.
    """
    blk = _real_blocks(R)
    if blk is None:
        return None
    W, groups = blk
    a_all = np.array([g[2] for g in groups])
    P = np.zeros((ts.size, n, n))
    for sl, B, a in groups:
        k = B.shape[0]
        fwd = np.max(a_all - a)          # growth rate forward in time
        bwd = np.max(a - a_all)
        span = (0.0, T2) if fwd <= bwd else (T2, 0.0)

        def rhs(t, y, B=B, k=k):
            Y = y.reshape(n, k)
            return (A(t) @ Y - Y @ B).ravel()

        sol = solve_ivp(rhs, span, W[:, sl].ravel(), method="DOP853", rtol=1e-12, atol=1e-13,
                        dense_output=True)
        if not sol.success:
            return None
        P[:, :, sl] = sol.sol(ts).T.reshape(ts.size, n, k)
    return P @ np.linalg.inv(W)


def _liouville_fix(R, mono_ev, trace_A0, ratio=1e-6):
    """Repair the exponent of a monodromy eigenvalue lost in rounding.

    A strongly contracting direction gives a multiplier far below the
    others, and its logarithm is then dominated by integration error.
    The sum of all exponents equals ``tr A_0`` exactly, which pins the
    lost one down when it is the only such eigenvalue and is real.
    """
    a = np.abs(mono_ev)
    small = a < ratio * a.max()
    if R.shape[0] < 2 or np.count_nonzero(small) != 1:
        return R
    lam, V = np.linalg.eig(R)
    i = int(np.argmin(lam.real))
    if abs(lam[i].imag) > 1e-12 * max(1.0, abs(lam[i])):
        return R
    lam = lam.copy()
    lam[i] = trace_A0 - (lam.sum() - lam[i]).real
    out = V @ np.diag(lam) @ np.linalg.inv(V)
    log.debug("liouville fix: exponent %.6g", lam[i].real)
    return out.real


def init_guess(source, m: int, grid=None) -> FloquetCandidate:
    """Non-rigorous starting point for Newton.

    Integrates the fundamental matrix over ``[0, 2 tau]``, takes the real
    part of the principal logarithm of ``Phi(2 tau)`` divided by
    ``2 tau`` as ``R`` (one strongly contracting exponent is taken from
    the trace identity instead).  ``Q`` solves ``Q' = A Q - Q R``; it is
    integrated one invariant block of ``R`` at a time, in whichever time
    direction keeps that block stable, and projected on ``m`` Fourier
    modes.

    Parameters
    ----------
    source : GalerkinProblem, MatrixFourierSeq or OrbitEnclosure
    m : int
    """
    from .systems import OrbitEnclosure, jacobian_coeffs

    if isinstance(source, GalerkinProblem):
        A_seq = source.A_seq
    elif isinstance(source, OrbitEnclosure):
        A_seq = jacobian_coeffs(source)
    else:
        A_seq = source
    n = A_seq.n
    tau = float(A_seq.half_period.mid)
    A = _A_of_t(A_seq, A_seq.N - 1)
    Ng = grid or max(8 * m, 256)
    T2 = 2 * tau
    ts = np.arange(Ng) * T2 / Ng

    def rhs(t, y):
        return (A(t) @ y.reshape(n, n)).ravel()

    sol = solve_ivp(rhs, (0.0, T2), np.eye(n).ravel(), method="DOP853", rtol=1e-12, atol=1e-12,
                    t_eval=np.append(ts, T2))
    if not sol.success:
        raise NoConvergence(f"fundamental matrix integration failed: {sol.message}")
    Phi = sol.y.T.reshape(-1, n, n)
    mono = Phi[-1]
    ev = np.linalg.eigvals(mono)
    bad = (ev.real <= 0) & (np.abs(ev.imag) <= 1e-10 * np.maximum(1.0, np.abs(ev)))
    if np.any(bad):
        raise LogBranchFailure(f"eigenvalue {ev[bad][0]} of Phi(2 tau) on the negative real axis")
    L = logm(mono)
    if np.iscomplexobj(L):
        L = L.real
    R = _liouville_fix(L / T2, ev, np.trace(np.asarray(A_seq.re.mid)[0]))
    Qt = _Q_by_blocks(A, R, n, T2, ts)
    if Qt is None:
        Qt = np.einsum("tab,tbc->tac", Phi[:-1], np.array([expm(-R * t) for t in ts]))
    c = np.fft.fft(Qt, axis=0) / Ng
    Qre = c[:m].real.copy()
    Qim = c[:m].imag.copy()
    Qim[0] = 0.0
    return FloquetCandidate(n, m, A_seq.half_period, R, Qre, Qim)


# ---------------------------------------------------------------------------
# diagonal blocks and their inverses

def lambda_blocks(ks, R, A_seq: MatrixFourierSeq) -> Interval:
    """Enclosures of ``Lambda_k = d f_k / d Q_k`` for ``k`` in ``ks``, shape ``(K, 2n^2, 2n^2)``."""
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    if np.any(ks < 1):
        raise ValueError("Lambda_k needs k >= 1")
    R = np.asarray(R, dtype=float)
    jmax = 2 * int(ks.max())
    re, im = A_seq.coef(np.arange(-jmax, jmax + 1))
    rm, rr = re.midrad()
    imm, imr = im.midrad()

    def mk(a, b):
        def get(js):
            js = np.asarray(js) + jmax
            return a[js], b[js]
        return get

    om_m, om_r = A_seq.omega.midrad()
    om_m, om_r = float(om_m), float(om_r)
    Lm = _coupling_blocks(ks, ks, mk(rm, imm), R, om_m, False)
    Lr = _coupling_blocks(ks, ks, mk(rr, imr), np.zeros_like(R), om_r, True)
    La = _coupling_blocks(ks, ks, mk(np.abs(rm), np.abs(imm)), np.abs(R), abs(om_m), True)
    rad = up(up(Lr + up(8 * U * La)) * (1 + 8 * U))
    return Interval.from_midrad(Lm, rad)


def lambda_k(k: int, R, A_seq: MatrixFourierSeq) -> IntervalMatrix:
    return lambda_blocks([k], R, A_seq)[0]


def lambda_k_inverse(Lam: Interval) -> Interval:
    """Certified enclosure of the inverse of every matrix in ``Lam``.

    Works on a single matrix or a stack ``(K, d, d)``.  With ``B`` an
    approximate inverse and ``E = I - B Lam``, ``||E|| <= delta < 1``
    gives ``Lam^-1 = B + E B + E^2 Lam^-1`` with the last term bounded by
    ``delta^2 ||B|| / (1 - delta)``.
    """
    single = Lam.ndim == 2
    L = Lam.reshape(1, *Lam.shape) if single else Lam
    d = L.shape[-1]
    B = np.linalg.inv(np.asarray(L.mid))
    Bi = Interval(B)
    E = Interval(np.broadcast_to(np.eye(d), L.shape).copy()) - Bi @ L
    delta = np.max(sum_up(E.mag(), axis=-1), axis=-1)
    if np.any(delta >= 1) or not np.all(np.isfinite(delta)):
        raise NotCertifiablyInvertible(f"Neumann defect {float(np.max(delta)):.3e} >= 1")
    nB = np.max(sum_up(np.abs(B), axis=-1), axis=-1)
    rem = up(up(up(delta * delta) * nB) / down(1.0 - delta))
    out = (Bi + E @ Bi).inflate(rem[:, None, None])
    return out[0] if single else out


# ---------------------------------------------------------------------------
# the operators A and A-dagger

@dataclass
class BlockOperator:
    """``A``: ``A_m`` on the first ``m`` blocks, ``Lambda_k^-1`` on ``k = m..M-1``."""

    A_m: np.ndarray
    lambda_inv: Interval       # (M - m, 2n^2, 2n^2)
    Df: IntervalMatrix
    lam: Interval              # (M - m, 2n^2, 2n^2)
    m: int
    M: int
    n: int


def build_operator(x: FloquetCandidate, prob: GalerkinProblem, M: int) -> BlockOperator:
    Df = jacobian_enclosure(x, prob)
    try:
        A_m = np.linalg.inv(np.asarray(Df.mid))
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from None
    ks = np.arange(x.m, M)
    if ks.size:
        lam = lambda_blocks(ks, x.R, prob.A_seq)
        lam_inv = lambda_k_inverse(lam)
    else:
        d = 2 * x.n * x.n
        lam = lam_inv = Interval.zeros((0, d, d))
    return BlockOperator(A_m, lam_inv, Df, lam, x.m, M, x.n)


def _split(op, v):
    d = 2 * op.n * op.n
    v = np.asarray(v, dtype=float).ravel()
    head = v[: d * op.m]
    tail = v[d * op.m:].reshape(-1, d)
    return head, tail


def apply_A(op: BlockOperator, v) -> np.ndarray:
    """Floating application of ``A`` to a block vector (midpoints)."""
    head, tail = _split(op, v)
    out = [op.A_m @ head]
    if tail.size:
        Li = np.asarray(op.lambda_inv.mid)[: tail.shape[0]]
        out.append(np.einsum("kij,kj->ki", Li, tail).ravel())
    return np.concatenate(out)


def apply_Adag(op: BlockOperator, v) -> np.ndarray:
    """Floating application of ``A_dagger`` (``Df^(m)`` and ``Lambda_k``)."""
    head, tail = _split(op, v)
    out = [np.asarray(op.Df.mid) @ head]
    if tail.size:
        L = np.asarray(op.lam.mid)[: tail.shape[0]]
        out.append(np.einsum("kij,kj->ki", L, tail).ravel())
    return np.concatenate(out)
