"""Rigorous scalar constants for algebraically decaying tails."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from mpmath import iv

from .interval import Interval

__all__ = ["DomainError", "zeta", "eta", "c1_constant", "inv_pow", "pow_up"]


class DomainError(ValueError):
    """Argument outside the domain of a tail formula."""


def _ivs(s):
    return iv.mpf(s) if not isinstance(s, Interval) else iv.mpf([float(s.lo), float(s.hi)])


@lru_cache(maxsize=None)
def _zeta_iv(M: int, s: float):
    s_ = iv.mpf(s)
    a = iv.mpf(M + 1) ** (-s_)
    b = iv.mpf(M + 2) ** (-s_)
    c = iv.mpf(M + 2) ** (1 - s_) / (s_ - 1)
    return a + b + c


def zeta(M: int, s: float) -> float:
    """Upper bound of ``sum_{k>M} k^-s``.

    Uses ``1/(M+1)^s + 1/(M+2)^s + (M+2)^(1-s)/(s-1)``.
    """
    if M < 0 or s <= 1:
        raise DomainError(f"zeta needs M >= 0 and s > 1, got M={M}, s={s}")
    return float(_zeta_iv(int(M), float(s)).b)


@lru_cache(maxsize=None)
def _eta_iv(k: int, s: float):
    s_ = iv.mpf(s)
    kk = iv.mpf(k)
    first = 2 * (kk / (kk - 1)) ** s_
    second = (4 * iv.log(kk - 2) / kk + (iv.pi ** 2 - 6) / 3) * (2 / kk + iv.mpf(1) / 2) ** (s_ - 2)
    return first + second


def eta(k: int, s: float) -> float:
    """Upper bound of the constant ``eta_k`` in the convolution estimate

    ``2 (k/(k-1))^s + (4 log(k-2)/k + (pi^2-6)/3) (2/k + 1/2)^(s-2)``.
    """
    if k < 3 or s < 2:
        raise DomainError(f"eta needs k >= 3 and s >= 2, got k={k}, s={s}")
    return float(_eta_iv(int(k), float(s)).b)


@lru_cache(maxsize=None)
def c1_constant(M: int, s: float) -> float:
    """Upper bound of ``w_k^s sum_{k1+k2=k, |k1|!=k} w_k1^-s w_k2^-s`` for k >= M.

    ``2 + 2 sum_{l=1}^M l^-s + 2/(M^(s-1)(s-1)) + eta_M - 1``; the
    ``-1/w_2k^s`` refinement is dropped.
    """
    if M < 3 or s < 2:
        raise DomainError(f"C1 needs M >= 3 and s >= 2, got M={M}, s={s}")
    s_ = iv.mpf(s)
    tot = iv.mpf(0)
    for l in range(1, M + 1):
        tot += iv.mpf(l) ** (-s_)
    val = 2 + 2 * tot + 2 / (iv.mpf(M) ** (s_ - 1) * (s_ - 1)) + _eta_iv(int(M), float(s)) - 1
    return float(val.b)


def _is_int(s) -> bool:
    return float(s).is_integer() and 0 <= float(s) <= 8


@lru_cache(maxsize=64)
def _inv_pow_table(nmax: int, s: float):
    k = np.arange(1, nmax + 1, dtype=float)
    if _is_int(s):
        kk = Interval(k) ** int(s)
        r = 1.0 / kk
        return np.array(r.lo), np.array(r.hi)
    lo = np.empty(nmax)
    hi = np.empty(nmax)
    s_ = iv.mpf(s)
    for i in range(nmax):
        y = iv.mpf(i + 1) ** (-s_)
        lo[i], hi[i] = float(y.a), float(y.b)
    return lo, hi


def inv_pow(k, s: float) -> Interval:
    """Enclosure of ``w_k^-s`` for integer array ``k`` (``w_0 = 1``)."""
    k = np.abs(np.asarray(k, dtype=np.int64))
    w = np.maximum(k, 1)
    nmax = int(w.max()) if w.size else 1
    nmax = 1 << max(nmax - 1, 1).bit_length()
    lo, hi = _inv_pow_table(nmax, float(s))
    return Interval(lo[w - 1], hi[w - 1])


def pow_up(k, s: float) -> np.ndarray:
    """Upper bound of ``w_k^s`` for integer array ``k``."""
    k = np.abs(np.asarray(k, dtype=np.int64))
    w = np.maximum(k, 1).astype(float)
    if _is_int(s):
        return np.asarray((Interval(w) ** int(s)).hi)
    out = np.empty(w.shape)
    s_ = iv.mpf(s)
    for idx in np.ndindex(w.shape):
        out[idx] = float((iv.mpf(w[idx]) ** s_).b)
    return out
