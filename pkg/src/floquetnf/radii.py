"""
Radii-polynomial verification of a Floquet normal form candidate.

With ``T(x) = x - A f(x)`` and the ball ``|x_k - xbar_k| <= r w_k^-s``
(entrywise, both real components), every block ``k < M`` gets a vector
of quadratics

    p_k(r) = Y_k + Z_k(r) - r w_k^-s

and all ``k >= M`` share the scalar ``p_M(r) = Y_M + Z_M(r) - r / M^s``.
If every entry is negative at some ``r > 0`` the map ``T`` is a
contraction on the ball and the exact normal form lies inside it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .galerkin import (FloquetCandidate, GalerkinProblem, build_operator, f_eval)
from .interval import Interval, IntervalMatrix, fmt_float, matmul_up, sum_up, up, down
from .sequence import MatrixFourierSeq
from .tails import c1_constant, eta, inv_pow, pow_up, zeta

__all__ = [
    "NoDominanceBelowCutoff",
    "VerificationFailed",
    "VerifierParams",
    "RadiiCoefficients",
    "VerificationReport",
    "VerifiedFloquetForm",
    "compute_K_CLambda",
    "a_norm",
    "y_bounds",
    "z_bounds",
    "assemble_and_solve",
    "verify",
    "zeta",
    "eta",
]

log = logging.getLogger(__name__)

K_CAP = 10 ** 6


class NoDominanceBelowCutoff(RuntimeError):
    """The diagonal blocks never become diagonally dominant below the cap."""


class VerificationFailed(RuntimeError):
    def __init__(self, report):
        super().__init__(report.reason or "radii polynomials have no common negative interval")
        self.report = report


@dataclass
class VerifierParams:
    s: float = 2.0
    m: int = 60
    M: int = 66
    l_policy: str = "paper"
    sharp: str = "auto"        # auto | on | off

    def __post_init__(self):
        if self.s < 2:
            raise ValueError("s must be at least 2")
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.M <= self.m:
            raise ValueError("M must exceed m")
        if self.M < 3:
            raise ValueError("M must be at least 3")
        if self.sharp not in ("auto", "on", "off"):
            raise ValueError(f"sharp must be auto, on or off, not {self.sharp!r}")
        if self.l_policy != "paper":
            if not self.l_policy.startswith("fixed:") or int(self.l_policy[6:]) < 1:
                raise ValueError(f"bad L policy {self.l_policy!r}")

    def L(self, ks, n_A: int) -> np.ndarray:
        """Truncation ``L_k`` of the explicit convolution sums.

        ``paper``: ``M + N_A + k``; ``fixed:N``: ``max(k, m) + N``.
        """
        ks = np.asarray(ks, dtype=np.int64)
        if self.l_policy == "paper":
            return self.M + n_A + ks
        return np.maximum(ks, self.m) + int(self.l_policy[6:])

    def to_json(self):
        return {"s": fmt_float(self.s), "m": self.m, "M": self.M,
                "l_policy": self.l_policy, "sharp": self.sharp}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj["s"]), int(obj["m"]), int(obj["M"]), obj.get("l_policy", "paper"),
                   obj.get("sharp", "auto"))


@dataclass
class RadiiCoefficients:
    """Upper bounds of the polynomial coefficients.

    ``Y``, ``Z0``, ``Z1``, ``Z2`` have shape ``(M, 2 n^2)``; ``Z1`` and
    ``Z2`` already include the action of ``A``.  ``weights`` holds lower
    bounds of ``w_k^-s``.
    """

    Y: np.ndarray
    Z0: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    weights: np.ndarray
    Y_M: float
    Z_M1: float
    Z_M2: float
    w_M: float
    K: int = 0
    C_Lambda: float = 0.0
    C1: float = 0.0
    a_norm: float = 0.0
    sharp: bool = False


@dataclass
class VerificationReport:
    params: VerifierParams
    r_min: float
    r_max: float
    success: bool
    margins: list = field(default_factory=list)
    conditional: bool = False
    reason: str = ""
    constants: dict = field(default_factory=dict)

    @property
    def r_interval(self):
        return (self.r_min, self.r_max) if self.success else None

    @property
    def r(self):
        return math.nextafter(self.r_min, math.inf) if self.success else math.nan

    def to_json(self):
        return {
            "params": self.params.to_json(),
            "success": self.success,
            "r_interval": [fmt_float(self.r_min), fmt_float(self.r_max)] if self.success else None,
            "r": fmt_float(self.r) if self.success else None,
            "conditional": self.conditional,
            "reason": self.reason,
            "constants": {k: (fmt_float(v) if isinstance(v, float) else v)
                          for k, v in sorted(self.constants.items())},
            "margins": self.margins,
        }


# ---------------------------------------------------------------------------
# norms of the coefficient sequence

def a_norm(A_seq: MatrixFourierSeq, s: float, start: int = 0) -> float:
    """Upper bound of ``sup_{k >= start} |A_k| w_k^s`` (entrywise modulus)."""
    ks = np.arange(start, A_seq.N)
    if ks.size == 0:
        return A_seq.tail_C
    mods = A_seq.coef_abs_up(ks).reshape(ks.size, -1).max(axis=1)
    val = float(np.max(up(mods * pow_up(ks, s))))
    return max(val, A_seq.tail_C)


def _rowsums(A_seq, js):
    """Row sums of ``|Re A_j| + |Im A_j|``, shape ``(len(js), n)``."""
    re, im = A_seq.coef(js)
    return sum_up(up(re.mag() + im.mag()), axis=-1)


def compute_K_CLambda(R, A_seq: MatrixFourierSeq, tau=None, m: int = 2):
    """Cutoff ``K`` and constant ``C_Lambda`` with ``||Lambda_k^-1|| <= C_Lambda / k`` for ``k >= m``.

    After swapping the two block rows, ``Lambda_k`` has ``+- k w`` on the
    diagonal and every row of the remaining part sums to at most

        rho = ||R||_1 + rowsum(|Re A_0| + |Im A_0|) + sup_{j >= 2m} rowsum(|Re A_j| + |Im A_j|).

    Diagonal dominance then gives ``||Lambda_k^-1|| <= 1 / (k w - rho)``.
    Returns ``C_Lambda = inf`` when ``m <= K``.
    """
    R = np.asarray(R.mag() if isinstance(R, Interval) else np.abs(R), dtype=float)
    rho_R = float(np.max(sum_up(R, axis=0)))
    rs0 = float(np.max(_rowsums(A_seq, [0])))
    start = 2 * m
    top = max(A_seq.N, start + 1)
    rs_far = float(np.max(_rowsums(A_seq, np.arange(start, top))))
    if A_seq.tail_C > 0:
        n = A_seq.n
        rs_far = max(rs_far, float(up(2 * n * A_seq.tail_bound(max(start, A_seq.N)))))
    rho = float(up(up(rho_R + rs0) + rs_far))
    om = A_seq.omega if tau is None else Interval(math.pi) / tau
    om_lo = float(down(np.asarray(om.lo)))
    K = int(math.floor(rho / om_lo)) + 1
    if K > K_CAP:
        raise NoDominanceBelowCutoff(f"K = {K} exceeds the cap {K_CAP}")
    if m <= K:
        return K, math.inf
    den = down(om_lo - up(rho / m))
    C = float(up(1.0 / den))
    return K, C


# ---------------------------------------------------------------------------
# Y

def y_bounds(x: FloquetCandidate, prob: GalerkinProblem, op, params: VerifierParams, C_Lambda: float,
             anorm: float, sharp: bool = False):
    """``Y_k`` for ``k < M`` (shape ``(M, 2n^2)``) and the scalar ``Y_M``.

    For ``k >= M`` only ``A_j`` with ``|j| > M - m`` enter ``f_k``; in
    sharp mode ``||A||`` is replaced by the weighted sup over those
    indices.
    """
    n, m, M = x.n, x.m, params.M
    d = 2 * n * n
    s = params.s
    A_seq = prob.A_seq
    K2 = m - 1 + A_seq.N
    kmax = max(M, K2) if sharp else M
    fe = f_eval(x, prob, kmax)
    head = Interval(op.A_m) @ fe[:m].reshape(m * d)
    Y = np.empty((M, d))
    Y[:m] = head.mag().reshape(m, d)
    if M > m:
        tail = op.lambda_inv @ fe[m:M].reshape(M - m, d, 1)
        Y[m:] = tail.mag().reshape(M - m, d)
    wM = down(float(M) ** s)
    if not sharp:
        W = _w_norm(x, M, s)
        return Y, float(up(up(up(anorm * C_Lambda) * W) / up(float(M) * wM)))
    # k in [M, K2): explicit enclosure of f_k
    yhat = 0.0
    if K2 > M:
        ks = np.arange(M, K2)
        fk = np.max(fe[M:K2].mag(), axis=1)
        yhat = float(np.max(up(up(C_Lambda * fk) * pow_up(ks, s - 1))))
    # k >= max(M, K2): only tail coefficients of A enter
    Kp = max(M, K2)
    W = _w_norm(x, Kp, s)
    yhat = max(yhat, float(up(up(up(C_Lambda * A_seq.tail_C) * W) / Kp)))
    return Y, float(up(yhat / wM))


def _w_norm(x, M, s):
    """Max entry of ``W = 1_n |Q_0| + sum_l (1 + (1 - l/M)^-s) 1_n |Q_l|``."""
    m = x.m
    Qabs = up(np.sqrt(up(x.Qre ** 2 + x.Qim ** 2)))
    colsum = sum_up(Qabs, axis=1)
    fac = np.ones(m)
    if m > 1:
        fac[1:] = up(1.0 + _neg_pow_up(down(1.0 - up(np.arange(1, m) / M)), s))
    W = sum_up(up(colsum * fac[:, None]), axis=0)
    return float(np.max(W))


def _neg_pow_up(base, s):
    """Upper bound of ``base^-s`` for positive ``base``."""
    p = Interval(np.asarray(base, dtype=float)) ** (int(s) if float(s).is_integer() else float(s))
    return up(1.0 / np.asarray(p.lo))


# ---------------------------------------------------------------------------
# Z

def _sharp_ok(A_seq, params):
    """Whether explicit coefficients cover every index the sharp bounds touch."""
    n_A = A_seq.N
    ks = np.arange(params.M)
    L = params.L(ks, n_A)
    return bool(np.all(L + 1 - ks >= n_A)) and n_A - 1 < params.M


def use_sharp(A_seq, params) -> bool:
    ok = _sharp_ok(A_seq, params)
    if params.sharp == "on" and not ok:
        raise ValueError("sharp tail mode needs L_k >= N_A + k - 1 and N_A <= M")
    return params.sharp == "on" or (params.sharp == "auto" and ok)


def z_bounds(x: FloquetCandidate, prob: GalerkinProblem, op, params: VerifierParams, C_Lambda: float,
             anorm: float, sharp: bool = False):
    """Return ``(Z0, Z1, Z2, Z_M1, Z_M2, C1, sharp)`` with ``A`` already applied."""
    A_seq = prob.A_seq
    n, m, M, s = x.n, x.m, params.M, params.s
    n2 = n * n
    d = 2 * n2
    s_star = A_seq.tail_s
    n_A = A_seq.N
    ks = np.arange(M)
    L = params.L(ks, n_A)
    if np.any(L <= np.maximum(ks, m)):
        raise ValueError("L_k must exceed max(k, m)")

    Lmax = int(L.max())
    wl_hi = np.asarray(inv_pow(np.arange(-Lmax, Lmax + 1), s).hi)   # index l + Lmax
    jmax = int((ks + L).max())
    rs = _rowsums(A_seq, np.arange(-jmax, jmax + 1))                  # index j + jmax

    # Z0 = |I - A_m Df| w
    wvec = np.repeat(np.asarray(inv_pow(np.arange(m), s).hi), d)
    Dm = op.Df
    E = Interval(np.eye(m * d)) - Interval(op.A_m) @ Dm
    Z0 = matmul_up(E.mag(), wvec).reshape(m, d)

    # explicit part of the c_{k,1} series
    coef_tail = A_seq.tail_C if sharp else anorm
    sq2n = up(math.sqrt(2) * (1 + 2 ** -52) * n)
    Z1raw = np.zeros((M, d))
    for k in range(M):
        Lk = int(L[k])
        ls = np.arange(-Lk, Lk + 1)
        if k < m:
            keep = np.abs(ls) >= m
        else:
            keep = np.abs(ls) != k
        ls = ls[keep]
        terms = up(rs[k - ls + jmax] * wl_hi[ls + Lmax][:, None])
        row = sum_up(terms, axis=0)                               # (n,)
        h = up(up(sq2n * coef_tail) / down(float(Lk + 1 - k) ** (s_star - s)))
        h = up(h * up(zeta(Lk - k, 2 * s) + zeta(Lk, 2 * s)))
        vals = np.repeat(up(row + h), n)
        Z1raw[k, :n2] = vals
        Z1raw[k, n2:] = vals
    # f_star row: 2 sum_{l >= m} c_{l,1}
    l0 = np.arange(m, int(L[0]) + 1)
    fs = up(2 * up(sum_up(wl_hi[l0 + Lmax]) + zeta(int(L[0]), s)))
    Z1raw[0, :n2] = fs

    Z2raw = np.empty((M, d))
    Z2raw[0, :n2] = 0.0
    Z2raw[0, n2:] = 2 * n
    w_hi = np.asarray(inv_pow(np.arange(1, M), s).hi)
    Z2raw[1:] = up(2 * n * w_hi)[:, None]

    Z1 = np.empty((M, d))
    Z2 = np.empty((M, d))
    Aabs = np.abs(op.A_m)
    Z1[:m] = matmul_up(Aabs, Z1raw[:m].ravel()).reshape(m, d)
    Z2[:m] = matmul_up(Aabs, Z2raw[:m].ravel()).reshape(m, d)
    if M > m:
        Li = op.lambda_inv.mag()
        Z1[m:] = matmul_up(Li, Z1raw[m:, :, None])[..., 0]
        Z2[m:] = matmul_up(Li, Z2raw[m:, :, None])[..., 0]

    # k >= M
    C1 = c1_constant(M, s)
    if sharp:
        js = np.arange(1, n_A)
        rho = np.max(_rowsums(A_seq, js), axis=1)
        fac = up(1.0 + _neg_pow_up(down(1.0 - up(js / M)), s))
        lin = up(sum_up(up(rho * fac)) + up(up(sq2n * A_seq.tail_C) * C1))
    else:
        lin = up(up(sq2n * anorm) * C1)
    scale = up(C_Lambda / down(float(M) ** (s + 1)))
    Z_M1 = float(up(scale * lin))
    Z_M2 = float(up(scale * 2 * n))
    return Z0, Z1, Z2, Z_M1, Z_M2, C1, sharp


# ---------------------------------------------------------------------------
# radii polynomials

def _neg_interval(a, b, c):
    """Per-entry interval of ``r > 0`` where ``a + b r + c r^2 < 0``.

    Coefficients are upper bounds (``a, c >= 0``).  Returns arrays
    ``lo`` (upper bound of the small root) and ``hi`` (lower bound of the
    large root); entries with no negativity get ``lo = inf``, ``hi = 0``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    lo = np.full(a.shape, np.inf)
    hi = np.zeros(a.shape)
    A = Interval(a)
    B = Interval(b)
    C = Interval(c)
    disc = B.sqr() - A * C * 4.0
    ok = (b < 0) & (np.asarray(disc.lo) > 0)
    if not np.any(ok):
        return lo, hi
    A, B, C, disc = A[ok], B[ok], C[ok], disc[ok]
    sq = disc.sqrt()
    nb = -B + sq
    r1 = A * 2.0 / nb
    lo[ok] = np.asarray(r1.hi)
    cpos = np.asarray(C.hi) > 0
    r2 = np.full(r1.shape, np.inf)
    if np.any(cpos):
        r2[cpos] = np.asarray((nb[cpos] / (C[cpos] * 2.0)).lo)
    hi[ok] = r2
    return lo, hi


def assemble_and_solve(coeffs: RadiiCoefficients, params: VerifierParams, conditional=False):
    """Intersect the negativity intervals of every polynomial entry."""
    M = params.M
    w = coeffs.weights                                   # (M,) lower bounds of w_k^-s
    a = coeffs.Y
    b = up(coeffs.Z0 + coeffs.Z1 - w[:, None])
    c = coeffs.Z2
    lo, hi = _neg_interval(a, b, c)
    bM = float(up(coeffs.Z_M1 - coeffs.w_M))
    loM, hiM = _neg_interval([coeffs.Y_M], [bM], [coeffs.Z_M2])
    r_min = float(max(lo.max(), loM[0]))
    r_max = float(min(hi.min(), hiM[0]))
    success = bool(r_min < r_max and math.nextafter(r_min, math.inf) < r_max)
    probe = r_min if math.isfinite(r_min) else float(np.nanmin(np.where(np.isfinite(lo), lo, np.nan))) \
        if np.any(np.isfinite(lo)) else 1e-6

    def val(ai, bi, ci, r):
        return float(up(ai + up(bi * r) + up(ci * up(r * r))))

    margins = []
    for k in range(M):
        pv = up(a[k] + up(b[k] * probe) + up(c[k] * up(probe * probe)))
        j = int(np.argmax(pv))
        margins.append({"k": k, "worst_entry": j, "value_at_rmin": fmt_float(float(pv[j])),
                        "root_interval": [fmt_float(lo[k, j]), fmt_float(hi[k, j])]})
    margins.append({"k": "tail", "worst_entry": 0,
                    "value_at_rmin": fmt_float(val(coeffs.Y_M, bM, coeffs.Z_M2, probe)),
                    "root_interval": [fmt_float(loM[0]), fmt_float(hiM[0])]})
    reason = "" if success else "radii polynomials have no common negative interval"
    consts = {"K": coeffs.K, "C_Lambda": coeffs.C_Lambda, "C1": coeffs.C1, "A_norm": coeffs.a_norm,
              "Y_M": coeffs.Y_M, "Z_M1": coeffs.Z_M1, "Z_M2": coeffs.Z_M2, "sharp_tails": coeffs.sharp,
              "Y_max": float(a.max()), "Z0_max": float(coeffs.Z0.max()) if coeffs.Z0.size else 0.0}
    return VerificationReport(params, r_min, r_max, success, margins, conditional, reason, consts)


# ---------------------------------------------------------------------------
# end to end

@dataclass
class VerifiedFloquetForm:
    """Rigorous enclosure of ``Phi(t) = Q(t) exp(R t)``.

    ``Q`` carries ``+- r w_k^-s`` on every stored coefficient and the
    tail ``|Q_k| <= sqrt(2) r w_k^-s`` for ``k >= m``.
    """

    R: IntervalMatrix
    Q: MatrixFourierSeq
    r: float
    candidate: FloquetCandidate
    conditional: bool = False

    @property
    def n(self):
        return self.Q.n

    @property
    def tau(self) -> Interval:
        return self.Q.half_period

    @classmethod
    def from_candidate(cls, x: FloquetCandidate, r: float, s: float, tau: Interval, conditional=False):
        R = Interval(x.R).inflate(r)
        b = np.asarray(up(r * np.asarray(inv_pow(np.arange(x.m), s).hi)))[:, None, None]
        Qre = Interval(x.Qre).inflate(b)
        Qim = Interval(x.Qim).inflate(b)
        tail = float(up(r * math.sqrt(2) * (1 + 2 ** -52)))
        Q = MatrixFourierSeq(x.n, tau, Qre, Qim, tail_C=tail, tail_s=max(s, 2.0))
        return cls(R, Q, r, x, conditional)

    def to_json(self):
        return {"kind": "verified_floquet_form", "r": fmt_float(self.r), "s": fmt_float(self.Q.tail_s),
                "conditional": self.conditional, "tau": self.tau.to_json(),
                "candidate": self.candidate.to_json()}

    @classmethod
    def from_json(cls, obj):
        x = FloquetCandidate.from_json(obj["candidate"])
        return cls.from_candidate(x, float(obj["r"]), float(obj["s"]), Interval.from_json(obj["tau"]),
                                  bool(obj.get("conditional", False)))


def _problem_from(source, m, s):
    from .systems import OrbitEnclosure, jacobian_coeffs
    if isinstance(source, GalerkinProblem):
        return source, False
    if isinstance(source, OrbitEnclosure):
        return GalerkinProblem(jacobian_coeffs(source), m, s), source.conditional
    return GalerkinProblem(source, m, s), False


def verify(source, x: FloquetCandidate, params: VerifierParams):
    """Prove a true Floquet normal form near ``x``.

    Parameters
    ----------
    source : OrbitEnclosure, MatrixFourierSeq or GalerkinProblem
        Supplies the coefficients of ``A(t)``.
    x : FloquetCandidate
        Point data with ``x.m == params.m``.
    params : VerifierParams

    Returns
    -------
    (VerifiedFloquetForm, VerificationReport)

    Raises
    ------
    VerificationFailed
        Carries the report with per-block diagnostics.
    """
    if x.m != params.m:
        raise ValueError(f"candidate has m={x.m}, params m={params.m}")
    prob, conditional = _problem_from(source, params.m, params.s)
    A_seq = prob.A_seq
    K, C_L = compute_K_CLambda(x.R, A_seq, m=params.m)
    log.info("K = %d, C_Lambda = %.6g", K, C_L)
    if not math.isfinite(C_L):
        rep = VerificationReport(params, math.inf, 0.0, False, [], conditional,
                                 f"m = {params.m} does not exceed K = {K}", {"K": K})
        raise VerificationFailed(rep)
    anorm = a_norm(A_seq, A_seq.tail_s)
    op = build_operator(x, prob, params.M)
    sharp = use_sharp(A_seq, params)
    Y, Y_M = y_bounds(x, prob, op, params, C_L, anorm, sharp)
    Z0, Z1, Z2, ZM1, ZM2, C1, sharp = z_bounds(x, prob, op, params, C_L, anorm, sharp)
    Z0full = np.zeros_like(Y)
    Z0full[: params.m] = Z0
    weights = np.asarray(inv_pow(np.arange(params.M), params.s).lo)
    w_M = float(np.asarray(inv_pow([params.M], params.s).lo)[0])
    coeffs = RadiiCoefficients(Y, Z0full, Z1, Z2, weights, Y_M, ZM1, ZM2, w_M, K, C_L, C1, anorm, sharp)
    rep = assemble_and_solve(coeffs, params, conditional)
    log.info("r interval [%.6g, %.6g] success=%s", rep.r_min, rep.r_max, rep.success)
    if not rep.success:
        raise VerificationFailed(rep)
    form = VerifiedFloquetForm.from_candidate(x, rep.r, params.s, A_seq.half_period, conditional)
    return form, rep
