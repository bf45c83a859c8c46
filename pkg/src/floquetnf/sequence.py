"""
Matrix Fourier sequences with algebraic tail bounds.

A :class:`MatrixFourierSeq` over half period ``tau`` stores coefficients
of

    X(t) = X_0 + sum_{k != 0} (X_{k,1} + i X_{k,2}) exp(i k (pi/tau) t)

for ``k = 0..N-1``.  Negative indices follow from conjugate symmetry,
``X_{-k,1} = X_{k,1}`` and ``X_{-k,2} = -X_{k,2}``.  Beyond ``N`` the
entrywise modulus of the coefficients is bounded by ``C w_k^-s`` where
``w_k = max(|k|, 1)``.
"""
from __future__ import annotations

import numpy as np
from mpmath import iv

from .interval import (
    ComplexInterval,
    DimensionMismatch,
    Interval,
    PI,
    fmt_float,
    mul_up,
    parse_decimal,
    sum_up,
    up,
)
from .tails import inv_pow, pow_up, zeta

__all__ = [
    "DecayTooWeak",
    "MatrixFourierSeq",
    "weight",
    "s_norm_bound",
    "convolve",
    "convolve_many",
    "eval_at",
    "ball_tail_bound",
]


class DecayTooWeak(ValueError):
    """Requested norm weight exceeds the decay rate of the tail."""


def weight(k):
    k = np.abs(np.asarray(k))
    return np.maximum(k, 1)


class MatrixFourierSeq:
    """Finite list of Fourier coefficient matrices plus a decay tail.

    Parameters
    ----------
    n : int
        Matrix dimension.
    half_period : Interval
        ``tau``; the basis frequency is ``pi / tau``.
    re, im : Interval
        Arrays of shape ``(N, n, n)``.  ``im[0]`` is forced to zero.
    tail_C, tail_s : float
        ``|X_k|_inf <= tail_C * w_k^-tail_s`` (entrywise modulus) for
        ``k >= N``.
    odd_zero : bool
        All odd-index coefficients (stored or not) vanish exactly.
    """

    def __init__(self, n, half_period, re, im=None, tail_C=0.0, tail_s=2.0,
                 odd_zero=False):
        re = re if isinstance(re, Interval) else Interval(re)
        if im is None:
            im = Interval.zeros(re.shape)
        im = im if isinstance(im, Interval) else Interval(im)
        if re.ndim != 3 or re.shape[1:] != (n, n) or im.shape != re.shape:
            raise DimensionMismatch(f"coefficients must have shape (N, {n}, {n})")
        if tail_C < 0 or tail_s < 2:
            raise ValueError("tail needs C >= 0 and s >= 2")
        lo = np.array(im.lo)
        hi = np.array(im.hi)
        lo[0] = 0.0
        hi[0] = 0.0
        self.n = int(n)
        self.half_period = half_period if isinstance(half_period, Interval) else Interval(half_period)
        self.re = re
        self.im = Interval(lo, hi)
        self.tail_C = float(tail_C)
        self.tail_s = float(tail_s)
        self.odd_zero = bool(odd_zero)

    @property
    def N(self):
        return self.re.shape[0]

    @classmethod
    def from_point(cls, half_period, coeffs, tail_C=0.0, tail_s=2.0, odd_zero=False):
        """Build from a complex array of shape ``(N, n, n)``."""
        c = np.asarray(coeffs, dtype=complex)
        return cls(c.shape[1], half_period, Interval(c.real), Interval(c.imag),
                   tail_C, tail_s, odd_zero)

    @property
    def omega(self) -> Interval:
        return PI / self.half_period

    def coef(self, js):
        """Enclosures ``(re, im)`` of coefficients at integer indices ``js``."""
        js = np.asarray(js, dtype=np.int64)
        a = np.abs(js)
        N = self.N
        inside = a < N
        ai = np.where(inside, a, 0)
        sg = np.sign(js).astype(float)[..., None, None]
        re_lo = self.re.lo[ai]
        re_hi = self.re.hi[ai]
        im_lo = np.where(sg >= 0, self.im.lo[ai], -self.im.hi[ai])
        im_hi = np.where(sg >= 0, self.im.hi[ai], -self.im.lo[ai])
        if not np.all(inside):
            b = self.tail_bound(a)[..., None, None]
            out = ~inside[..., None, None]
            re_lo = np.where(out, -b, re_lo)
            re_hi = np.where(out, b, re_hi)
            im_lo = np.where(out, -b, im_lo)
            im_hi = np.where(out, b, im_hi)
        if self.odd_zero:
            odd = (a % 2 == 1)[..., None, None]
            re_lo = np.where(odd, 0.0, re_lo)
            re_hi = np.where(odd, 0.0, re_hi)
            im_lo = np.where(odd, 0.0, im_lo)
            im_hi = np.where(odd, 0.0, im_hi)
        return Interval(re_lo, re_hi), Interval(im_lo, im_hi)

    def tail_bound(self, k):
        """Upper bound of ``tail_C * w_k^-tail_s`` (entrywise modulus)."""
        k = np.asarray(k)
        if self.tail_C == 0.0:
            return np.zeros(k.shape)
        return up(self.tail_C * np.asarray(inv_pow(k, self.tail_s).hi))

    def coef_abs_up(self, js):
        """Upper bound of the entrywise modulus of coefficients at ``js``."""
        re, im = self.coef(js)
        return ComplexInterval(re, im).abs_up()

    def mid_complex(self, kmax):
        """Midpoint coefficients for indices ``-kmax..kmax`` (tail taken as 0)."""
        js = np.arange(-kmax, kmax + 1)
        a = np.abs(js)
        out = np.zeros((js.size, self.n, self.n), dtype=complex)
        inside = a < self.N
        rm = np.asarray(self.re.mid)
        im = np.asarray(self.im.mid)
        out[inside] = rm[a[inside]] + 1j * np.sign(js[inside])[:, None, None] * im[a[inside]]
        if self.odd_zero:
            out[a % 2 == 1] = 0
        return out

    def eval_point(self, t):
        """Non-rigorous evaluation at real times ``t`` (midpoints, no tail)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        om = np.pi / float(self.half_period.mid)
        k = np.arange(1, self.N)
        ph = np.outer(t, k) * om
        rm = np.asarray(self.re.mid)
        im = np.asarray(self.im.mid)
        val = rm[0][None] + 2 * (np.einsum("tk,kab->tab", np.cos(ph), rm[1:])
                                 - np.einsum("tk,kab->tab", np.sin(ph), im[1:]))
        return val

    def to_json(self):
        coeffs = []
        for k in range(self.N):
            entry = {"k": k, "re": self.re[k].to_json()}
            if k > 0:
                entry["im"] = self.im[k].to_json()
            coeffs.append(entry)
        return {
            "n": self.n,
            "half_period": self.half_period.to_json(),
            "s_tail": fmt_float(self.tail_s),
            "C_tail": fmt_float(self.tail_C),
            "odd_zero": self.odd_zero,
            "coeffs": coeffs,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            n = int(obj["n"])
            tau = Interval.from_json(obj["half_period"])
            s_tail = parse_decimal(obj.get("s_tail", "2"))[0]
            C_tail = parse_decimal(obj.get("C_tail", "0"))[1]
            entries = sorted(obj["coeffs"], key=lambda e: int(e["k"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed sequence object: missing {exc}") from exc
        N = int(entries[-1]["k"]) + 1 if entries else 1
        lo = np.zeros((2, N, n, n))
        hi = np.zeros((2, N, n, n))
        for e in entries:
            k = int(e["k"])
            re = Interval.from_json(e["re"])
            lo[0, k], hi[0, k] = re.lo, re.hi
            if k > 0 and "im" in e:
                im = Interval.from_json(e["im"])
                lo[1, k], hi[1, k] = im.lo, im.hi
            elif k == 0 and "im" in e:
                im = Interval.from_json(e["im"])
                if np.any(im.lo != 0) or np.any(im.hi != 0):
                    raise ValueError("k=0 coefficient must be real")
        return cls(n, tau, Interval(lo[0], hi[0]), Interval(lo[1], hi[1]), C_tail,
                   s_tail, bool(obj.get("odd_zero", False)))


def s_norm_bound(x: MatrixFourierSeq, s: float) -> float:
    """Upper bound of ``sup_k |x_k|_inf w_k^s`` (entrywise modulus)."""
    if s > x.tail_s:
        raise DecayTooWeak(f"s={s} exceeds tail decay {x.tail_s}")
    ks = np.arange(x.N)
    mods = ComplexInterval(x.re, x.im).abs_up().reshape(x.N, -1).max(axis=1)
    vals = mul_up(mods, pow_up(ks, s))
    if x.odd_zero:
        vals = np.where(ks % 2 == 1, 0.0, vals)
    return float(max(vals.max() if vals.size else 0.0, x.tail_C))


def _check_pair(A: MatrixFourierSeq, Q: MatrixFourierSeq):
    if A.n != Q.n:
        raise DimensionMismatch(f"dimensions {A.n} and {Q.n} differ")
    if not (A.half_period.intersects(Q.half_period)):
        raise DimensionMismatch("half periods differ")


def convolve_many(A: MatrixFourierSeq, Q: MatrixFourierSeq, ks, cutoff=None):
    """Enclosures of ``(A*Q)_k`` for every ``k`` in ``ks``.

    Terms with ``|k2| <= min(cutoff, N_Q - 1)`` are summed explicitly;
    the rest is bounded through the stored moduli of ``Q`` and its tail.

    Returns
    -------
    re, im : Interval
        Arrays of shape ``(len(ks), n, n)``.
    """
    _check_pair(A, Q)
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    n = A.n
    if cutoff is None:
        cutoff = Q.N - 1
    L = int(min(cutoff, Q.N - 1))
    ls = np.arange(-L, L + 1)
    qre, qim = Q.coef(ls)                       # (2L+1, n, n)
    are, aim = A.coef(ks[:, None] - ls[None, :])  # (K, 2L+1, n, n)
    K = ks.size
    nl = ls.size
    # real part: sum_l Re(A) Qre - Im(A) Qim ; imag: Im(A) Qre + Re(A) Qim
    left_re = Interval.concat([are, -aim], axis=3)  # (K, nl, n, 2n)
    left_im = Interval.concat([aim, are], axis=3)
    right = Interval.concat([qre, qim], axis=1)     # (nl, 2n, n)
    left_re = left_re.transpose(0, 2, 1, 3).reshape(K, n, nl * 2 * n)
    left_im = left_im.transpose(0, 2, 1, 3).reshape(K, n, nl * 2 * n)
    right = right.reshape(nl * 2 * n, n)
    out_re = left_re @ right
    out_im = left_im @ right
    rem = _conv_remainder(A, Q, L, ks)
    if np.any(rem):
        b = rem[:, None, None]
        out_re = out_re.inflate(b)
        out_im = out_im.inflate(b)
    return out_re, out_im


def _a_sup(A: MatrixFourierSeq) -> float:
    """Upper bound of sup_j |A_j|_inf."""
    mods = ComplexInterval(A.re, A.im).abs_up()
    return float(max(mods.max() if mods.size else 0.0, A.tail_C))


def _conv_remainder(A, Q, L, ks):
    """Bound on the modulus of the terms with |k2| > L, per k."""
    n = A.n
    rem = np.zeros(ks.size)
    # stored Q coefficients beyond the explicit range
    if Q.N - 1 > L:
        ls = np.concatenate([np.arange(L + 1, Q.N), -np.arange(L + 1, Q.N)])
        qa = Q.coef_abs_up(ls).reshape(ls.size, -1).max(axis=1)
        for i, k in enumerate(ks):
            aa = A.coef_abs_up(k - ls).reshape(ls.size, -1).max(axis=1)
            rem[i] = up(n * float(sum_up(up(aa * qa))))
    if Q.tail_C > 0:
        start = max(L, Q.N - 1)
        t = up(up(n * _a_sup(A)) * up(Q.tail_C * 2 * zeta(start, Q.tail_s)))
        rem = up(rem + t)
    return rem


def convolve(A: MatrixFourierSeq, Q: MatrixFourierSeq, k: int, cutoff=None):
    """Enclosure ``(re, im)`` of ``(A*Q)_k = sum A_k1 (Q_k2,1 + i Q_k2,2)``."""
    re, im = convolve_many(A, Q, [k], cutoff)
    return re[0], im[0]


def _trig(kmax: int, arg: Interval):
    """cos(k*arg), sin(k*arg) enclosures for k=1..kmax."""
    c_lo = np.empty(kmax)
    c_hi = np.empty(kmax)
    s_lo = np.empty(kmax)
    s_hi = np.empty(kmax)
    a = iv.mpf([float(arg.lo), float(arg.hi)])
    for k in range(1, kmax + 1):
        x = a * k
        c = iv.cos(x)
        s = iv.sin(x)
        c_lo[k - 1], c_hi[k - 1] = float(c.a), float(c.b)
        s_lo[k - 1], s_hi[k - 1] = float(s.a), float(s.b)
    return Interval(c_lo, c_hi), Interval(s_lo, s_hi)


def eval_at(Q: MatrixFourierSeq, theta) -> Interval:
    """Enclosure of ``Q(theta)`` including the tail."""
    th = theta if isinstance(theta, Interval) else Interval(theta)
    n = Q.n
    out = Q.re[0]
    if Q.N > 1:
        arg = Q.omega * th
        c, s = _trig(Q.N - 1, arg)
        terms = Q.re[1:] * c.reshape(-1, 1, 1) - Q.im[1:] * s.reshape(-1, 1, 1)
        out = out + 2.0 * terms.sum(axis=0)
    if Q.tail_C > 0:
        t = up(2 * up(Q.tail_C * zeta(Q.N - 1, Q.tail_s)))
        out = out.inflate(t)
    return out.reshape(n, n)


def ball_tail_bound(r: float, s: float, k: int) -> float:
    """``r w_k^-s`` rounded up."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return 0.0
    return float(mul_up(r, float(inv_pow(np.array([k]), s).hi[0])))
