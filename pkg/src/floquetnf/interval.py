"""
Outward-rounded interval arithmetic on numpy arrays.

Endpoints are binary64.  Numpy ufuncs and BLAS run in round-to-nearest,
so every operation is followed by an outward correction:

* sums use an error-free transformation (TwoSum) and only move an
  endpoint when the floating result is inexact;
* products, quotients and square roots move each endpoint one ulp
  outward;
* matrix products use the midpoint-radius form with an a-priori bound
  on the floating point error of a dot product of length p.

Scalar transcendental functions (exp, log, sin, cos, powers, pi) are
delegated to ``mpmath.iv``, whose endpoints are rigorously rounded.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Real

import numpy as np
from mpmath import iv

__all__ = [
    "Interval",
    "IntervalMatrix",
    "ComplexInterval",
    "DivisionByZeroInterval",
    "DimensionMismatch",
    "iv_arith",
    "mat_ops",
    "abs_sup",
    "rowsum_norm",
    "up",
    "down",
    "sum_up",
    "matmul_up",
    "mul_up",
    "parse_decimal",
    "fmt_float",
    "PI",
]

U = 2.0 ** -53
TINY = np.finfo(float).tiny


class DivisionByZeroInterval(ZeroDivisionError):
    """Divisor interval contains zero."""


class DimensionMismatch(ValueError):
    """Operands have incompatible shapes."""


def up(x):
    return np.nextafter(x, np.inf)


def down(x):
    return np.nextafter(x, -np.inf)


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


_SPLIT = 134217729.0  # 2**27 + 1


def _two_prod(a, b):
    """``a*b = p + e`` exactly (Dekker), barring over/underflow."""
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def mul_up(a, b):
    """Upper bound of ``a*b``; exact products are returned unchanged."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        p, e = _two_prod(a, b)
    # the split is unreliable near the ends of the exponent range
    safe = (np.abs(p) > 2.0 ** -900) & (np.abs(p) < 2.0 ** 900)
    exact = ((a == 0) | (b == 0)) | (safe & (e == 0))
    lift = safe & (e < 0)
    return np.where(exact | lift, p, up(p))


def _safe(x):
    ax = np.abs(x)
    return (ax > 2.0 ** -900) & (ax < 2.0 ** 900)


def _prod_bounds(a, b):
    """Lower and upper bounds of the exact products ``a*b``."""
    with np.errstate(over="ignore", invalid="ignore"):
        p, e = _two_prod(a, b)
    zero = (a == 0) | (b == 0)
    ok = _safe(p)
    lo = np.where(zero | (ok & (e >= 0)), p, down(p))
    hi = np.where(zero | (ok & (e <= 0)), p, up(p))
    return lo, hi


def _quot_bounds(a, b):
    """Lower and upper bounds of the exact quotients ``a/b`` (``b != 0``)."""
    q = a / b
    with np.errstate(over="ignore", invalid="ignore"):
        p, e = _two_prod(q, b)
        r = (a - p) - e          # sign of a - q*b
    sg = np.sign(r) * np.sign(b)
    ok = _safe(q) & _safe(a) & np.isfinite(r)
    zero = a == 0
    lo = np.where(zero | (ok & (sg >= 0)), q, down(q))
    hi = np.where(zero | (ok & (sg <= 0)), q, up(q))
    return lo, hi


def _add_lo(a, b):
    s, e = _two_sum(a, b)
    return np.where(e < 0, down(s), s)


def _add_hi(a, b):
    s, e = _two_sum(a, b)
    return np.where(e > 0, up(s), s)


def _gamma(p: int) -> float:
    # generous bound for gamma_p / (1 - gamma_p) plus the rounding of the
    # bound itself
    p = max(int(p), 1)
    if p * U > 0.01:
        raise ValueError("inner dimension too large for the error bound")
    return 2.0 * (p + 2) * U


def sum_up(x, axis=None):
    """Upper bound for the sum of nonnegative entries."""
    x = np.asarray(x, dtype=float)
    n = x.size if axis is None else x.shape[axis]
    s = np.sum(x, axis=axis)
    return np.where(s == 0, 0.0, up(s * (1.0 + _gamma(n))))


def matmul_up(a, b):
    """Upper bound for ``a @ b`` with ``a, b >= 0`` entrywise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = a.shape[-1]
    c = np.matmul(a, b)
    return up(c * (1.0 + _gamma(p)) + (p + 1) * TINY)


def _point_matmul(a, b):
    """Floating product and an upper bound on its rounding error."""
    p = a.shape[-1]
    c = np.matmul(a, b)
    e = np.matmul(np.abs(a), np.abs(b))
    err = up(e * _gamma(p) + (p + 1) * TINY)
    return c, err


def parse_decimal(text) -> tuple[float, float]:
    """Outward binary64 enclosure of a decimal or rational string."""
    if isinstance(text, (int, Fraction)):
        q = Fraction(text)
    elif isinstance(text, float):
        return float(text), float(text)
    else:
        s = str(text).strip().replace("−", "-")
        if s.lower() in ("inf", "+inf", "infinity"):
            return math.inf, math.inf
        if s.lower() in ("-inf", "-infinity"):
            return -math.inf, -math.inf
        q = Fraction(s)
    f = float(q)
    fq = Fraction(f)
    lo = f if fq <= q else math.nextafter(f, -math.inf)
    hi = f if fq >= q else math.nextafter(f, math.inf)
    return lo, hi


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal string."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _as_interval(x) -> "Interval":
    if isinstance(x, Interval):
        return x
    if isinstance(x, ComplexInterval):
        raise TypeError("expected a real interval")
    a = np.asarray(x, dtype=float)
    return Interval._make(a, a)


class Interval:
    """Array of closed real intervals ``[lo, hi]``.

    Any shape is allowed; a 0-d instance is a scalar interval.  Values
    are immutable after construction.

    Parameters
    ----------
    lo, hi : array_like
        Endpoints.  ``hi`` defaults to ``lo`` (point interval).
    """

    __array_priority__ = 1000

    def __init__(self, lo, hi=None):
        lo = np.array(lo, dtype=float)
        hi = lo.copy() if hi is None else np.array(hi, dtype=float)
        if lo.shape != hi.shape:
            raise DimensionMismatch(f"endpoint shapes {lo.shape} and {hi.shape}")
        if np.any(lo > hi) or np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("invalid interval: lo > hi or NaN endpoint")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi

    @classmethod
    def _make(cls, lo, hi):
        obj = Interval.__new__(IntervalMatrix if np.ndim(lo) == 2 else Interval)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape:
            lo, hi = np.broadcast_arrays(lo, hi)
            lo, hi = lo.copy(), hi.copy()
        lo.setflags(write=False)
        hi.setflags(write=False)
        obj.lo = lo
        obj.hi = hi
        return obj

    # construction helpers
    @classmethod
    def point(cls, x) -> "Interval":
        return _as_interval(x)

    @classmethod
    def from_midrad(cls, mid, rad) -> "Interval":
        mid = np.asarray(mid, dtype=float)
        rad = np.asarray(rad, dtype=float)
        return cls._make(down(mid - rad), up(mid + rad))

    @classmethod
    def from_decimal(cls, lo, hi=None) -> "Interval":
        a = parse_decimal(lo)
        b = a if hi is None else parse_decimal(hi)
        return cls._make(a[0], b[1])

    @classmethod
    def zeros(cls, shape) -> "Interval":
        z = np.zeros(shape)
        return cls._make(z, z)

    @classmethod
    def hull_of(cls, *xs) -> "Interval":
        xs = [_as_interval(x) for x in xs]
        lo = np.minimum.reduce([x.lo for x in xs])
        hi = np.maximum.reduce([x.hi for x in xs])
        return cls._make(lo, hi)

    @staticmethod
    def stack(items, axis=0) -> "Interval":
        items = [_as_interval(x) for x in items]
        return Interval._make(np.stack([x.lo for x in items], axis),
                              np.stack([x.hi for x in items], axis))

    @staticmethod
    def concat(items, axis=0) -> "Interval":
        items = [_as_interval(x) for x in items]
        return Interval._make(np.concatenate([x.lo for x in items], axis),
                              np.concatenate([x.hi for x in items], axis))

    # array protocol
    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, idx):
        return Interval._make(self.lo[idx], self.hi[idx])

    def reshape(self, *shape):
        return Interval._make(self.lo.reshape(*shape), self.hi.reshape(*shape))

    def transpose(self, *axes):
        return Interval._make(self.lo.transpose(*axes), self.hi.transpose(*axes))

    @property
    def T(self):
        return Interval._make(self.lo.T, self.hi.T)

    def swapaxes(self, a, b):
        return Interval._make(self.lo.swapaxes(a, b), self.hi.swapaxes(a, b))

    def broadcast_to(self, shape):
        return Interval._make(np.broadcast_to(self.lo, shape).copy(),
                              np.broadcast_to(self.hi, shape).copy())

    def sum(self, axis=None):
        """Enclosure of the sum along ``axis``."""
        lo, hi = self.lo, self.hi
        if axis is None:
            lo, hi, axis = lo.ravel(), hi.ravel(), 0
        n = lo.shape[axis]
        slo = np.sum(lo, axis=axis)
        shi = np.sum(hi, axis=axis)
        # addition is exact in the subnormal range, so no underflow term
        al = np.sum(np.abs(lo), axis=axis)
        ah = np.sum(np.abs(hi), axis=axis)
        rlo = np.where(al == 0, 0.0, down(slo - up(al * _gamma(n))))
        rhi = np.where(ah == 0, 0.0, up(shi + up(ah * _gamma(n))))
        return Interval._make(rlo, rhi)

    # scalar views
    def __float__(self):
        return float(self.mid)

    @property
    def mid(self):
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(np.isfinite(m), m, 0.0) if np.ndim(m) else float(m)

    @property
    def rad(self):
        """Upper bound of the radius around :attr:`mid`."""
        m = 0.5 * self.lo + 0.5 * self.hi
        r = np.maximum(up(self.hi - m), up(m - self.lo))
        return r if np.ndim(r) else float(r)

    def midrad(self):
        m = 0.5 * self.lo + 0.5 * self.hi
        r = np.maximum(up(self.hi - m), up(m - self.lo))
        return np.asarray(m), np.asarray(r)

    @property
    def width(self):
        return up(self.hi - self.lo)

    def mag(self):
        """Entrywise max |x| (exact)."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        """Entrywise min |x| (exact)."""
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0,
                        np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def abs(self):
        return Interval._make(self.mig(), self.mag())

    def contains(self, x) -> np.ndarray | bool:
        if isinstance(x, Interval):
            r = (self.lo <= x.lo) & (x.hi <= self.hi)
        else:
            r = (self.lo <= x) & (np.asarray(x) <= self.hi)
        return bool(r) if np.ndim(r) == 0 else r

    def interior_contains(self, x: "Interval"):
        r = (self.lo < x.lo) & (x.hi < self.hi)
        return bool(r) if np.ndim(r) == 0 else r

    def intersects(self, x):
        x = _as_interval(x)
        r = (self.lo <= x.hi) & (x.lo <= self.hi)
        return bool(r) if np.ndim(r) == 0 else r

    def hull(self, x) -> "Interval":
        return Interval.hull_of(self, x)

    def inflate(self, eps) -> "Interval":
        eps = np.asarray(eps, dtype=float)
        return Interval._make(_add_lo(self.lo, -eps), _add_hi(self.hi, eps))

    # arithmetic
    def __neg__(self):
        return Interval._make(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, ComplexInterval):
            return NotImplemented
        o = _as_interval(other)
        return Interval._make(_add_lo(self.lo, o.lo), _add_hi(self.hi, o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ComplexInterval):
            return NotImplemented
        o = _as_interval(other)
        return Interval._make(_add_lo(self.lo, -o.hi), _add_hi(self.hi, -o.lo))

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __mul__(self, other):
        if isinstance(other, ComplexInterval):
            return NotImplemented
        o = _as_interval(other)
        b = [_prod_bounds(x, y) for x in (self.lo, self.hi) for y in (o.lo, o.hi)]
        lo = np.minimum(np.minimum(b[0][0], b[1][0]), np.minimum(b[2][0], b[3][0]))
        hi = np.maximum(np.maximum(b[0][1], b[1][1]), np.maximum(b[2][1], b[3][1]))
        return Interval._make(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_interval(other)
        if np.any((o.lo <= 0) & (o.hi >= 0)):
            raise DivisionByZeroInterval("divisor interval contains 0")
        b = [_quot_bounds(x, y) for x in (self.lo, self.hi) for y in (o.lo, o.hi)]
        lo = np.minimum(np.minimum(b[0][0], b[1][0]), np.minimum(b[2][0], b[3][0]))
        hi = np.maximum(np.maximum(b[0][1], b[1][1]), np.maximum(b[2][1], b[3][1]))
        return Interval._make(lo, hi)

    def __rtruediv__(self, other):
        return _as_interval(other) / self

    def sqr(self) -> "Interval":
        lo = self.mig()
        hi = self.mag()
        return Interval._make(_prod_bounds(lo, lo)[0], _prod_bounds(hi, hi)[1])

    def sqrt(self) -> "Interval":
        if np.any(self.hi < 0):
            raise ValueError("sqrt of a negative interval")
        lo = np.sqrt(np.maximum(self.lo, 0.0))
        return Interval._make(np.where(lo == 0, 0.0, down(lo)), up(np.sqrt(self.hi)))

    def __matmul__(self, other):
        if isinstance(other, ComplexInterval):
            return NotImplemented
        return _imatmul(self, _as_interval(other))

    def __rmatmul__(self, other):
        return _imatmul(_as_interval(other), self)

    # transcendental (scalar-wise via mpmath.iv)
    def exp(self):
        out = _iv_map(iv.exp, self)
        # exp(0) = 1 exactly
        lo = np.where(np.asarray(self.lo) == 0, 1.0, np.asarray(out.lo))
        hi = np.where(np.asarray(self.hi) == 0, 1.0, np.asarray(out.hi))
        return Interval._make(lo, hi)

    def log(self):
        return _iv_map(iv.log, self)

    def cos(self):
        return _iv_map(iv.cos, self)

    def sin(self):
        return _iv_map(iv.sin, self)

    def __pow__(self, e):
        if isinstance(e, int) and e >= 0:
            out = Interval._make(np.ones(self.shape), np.ones(self.shape))
            base = self
            while e:
                if e & 1:
                    out = out * base
                base = base.sqr()
                e >>= 1
            return out
        ei = _as_interval(e)
        return _iv_map(lambda x: x ** _to_iv(float(ei.lo), float(ei.hi)), self)

    # io
    def to_json(self):
        if self.ndim == 0:
            return {"lo": fmt_float(self.lo), "hi": fmt_float(self.hi)}
        return [self[i].to_json() for i in range(len(self))]

    @classmethod
    def from_json(cls, obj) -> "Interval":
        if isinstance(obj, dict):
            if "lo" not in obj or "hi" not in obj:
                raise ValueError("interval object needs 'lo' and 'hi'")
            lo = parse_decimal(obj["lo"])[0]
            hi = parse_decimal(obj["hi"])[1]
            return cls._make(lo, hi)
        if isinstance(obj, (str, int, float)):
            a, b = parse_decimal(obj)
            return cls._make(a, b)
        items = [cls.from_json(o) for o in obj]
        return Interval.stack(items) if items else Interval.zeros((0,))

    def __repr__(self):
        if self.ndim == 0:
            return f"Interval({fmt_float(self.lo)}, {fmt_float(self.hi)})"
        return f"{type(self).__name__}(shape={self.shape})"


class IntervalMatrix(Interval):
    """Two-dimensional :class:`Interval` with row/column accessors."""

    def __init__(self, lo, hi=None):
        super().__init__(lo, hi)
        if self.ndim != 2:
            raise DimensionMismatch("IntervalMatrix needs a 2-d array")

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    @classmethod
    def eye(cls, n):
        e = np.eye(n)
        return Interval._make(e, e)


def _to_iv(lo, hi):
    return iv.mpf([lo, hi])


def _iv_map(fn, x: Interval) -> Interval:
    lo = np.empty(x.shape)
    hi = np.empty(x.shape)
    for idx in np.ndindex(x.shape):
        y = fn(_to_iv(float(x.lo[idx]), float(x.hi[idx])))
        lo[idx] = float(y.a)
        hi[idx] = float(y.b)
    return Interval._make(lo, hi)


def iv_const(name: str) -> Interval:
    v = getattr(iv, name)
    return Interval._make(float(v.a), float(v.b))


PI = iv_const("pi")


def _imatmul(a: Interval, b: Interval) -> Interval:
    if a.ndim == 0 or b.ndim == 0:
        raise DimensionMismatch("matmul needs arrays")
    ka = a.shape[-1]
    kb = b.shape[-2] if b.ndim >= 2 else b.shape[0]
    if ka != kb:
        raise DimensionMismatch(f"inner dimensions {ka} and {kb} differ")
    am, ar = a.midrad()
    bm, br = b.midrad()
    a_pt = not np.any(ar)
    b_pt = not np.any(br)
    c, err = _point_matmul(am, bm)
    if not (a_pt and b_pt):
        if a_pt:
            rad = matmul_up(np.abs(am), br)
        elif b_pt:
            rad = matmul_up(ar, np.abs(bm))
        else:
            rad = up(matmul_up(np.abs(am), br) + matmul_up(ar, up(np.abs(bm) + br)))
        err = up(err + rad)
    return Interval._make(down(c - err), up(c + err))


def iv_arith(a, b, op: str) -> Interval:
    """Apply ``op`` in {add, sub, mul, div} with outward rounding."""
    a, b = _as_interval(a), _as_interval(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def mat_ops(a, b, op: str) -> Interval:
    """Matrix add/sub/mul with shape checks."""
    a, b = _as_interval(a), _as_interval(b)
    if op in ("add", "sub"):
        if a.shape != b.shape:
            raise DimensionMismatch(f"shapes {a.shape} and {b.shape}")
        return a + b if op == "add" else a - b
    if op == "mul":
        return a @ b
    raise ValueError(f"unknown op {op!r}")


def abs_sup(a) -> float:
    """Upper bound of max_ij |a_ij| over the enclosure."""
    a = _as_interval(a) if not isinstance(a, ComplexInterval) else a
    if isinstance(a, ComplexInterval):
        return float(np.max(a.abs_up())) if a.re.lo.size else 0.0
    return float(np.max(a.mag())) if a.lo.size else 0.0


def rowsum_norm(a) -> float:
    """Upper bound of max_i sum_j |a_ij| over the enclosure."""
    if isinstance(a, ComplexInterval):
        m = a.abs_up()
    else:
        m = _as_interval(a).mag()
    if m.size == 0:
        return 0.0
    return float(np.max(sum_up(m, axis=-1)))


class ComplexInterval:
    """Rectangular complex enclosure ``re + i im`` (array valued)."""

    __array_priority__ = 1001

    def __init__(self, re, im=None):
        self.re = _as_interval(re)
        self.im = Interval.zeros(self.re.shape) if im is None else _as_interval(im)
        if self.re.shape != self.im.shape:
            raise DimensionMismatch("real and imaginary shapes differ")

    @property
    def shape(self):
        return self.re.shape

    def __getitem__(self, idx):
        return ComplexInterval(self.re[idx], self.im[idx])

    @classmethod
    def point(cls, z):
        z = np.asarray(z, dtype=complex)
        return cls(Interval(z.real), Interval(z.imag))

    @property
    def mid(self):
        return np.asarray(self.re.mid) + 1j * np.asarray(self.im.mid)

    def conj(self):
        return ComplexInterval(self.re, -self.im)

    def __neg__(self):
        return ComplexInterval(-self.re, -self.im)

    def __add__(self, o):
        o = _as_complex(o)
        return ComplexInterval(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = _as_complex(o)
        return ComplexInterval(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return _as_complex(o) - self

    def __mul__(self, o):
        o = _as_complex(o)
        return ComplexInterval(self.re * o.re - self.im * o.im,
                               self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __matmul__(self, o):
        o = _as_complex(o)
        return ComplexInterval(self.re @ o.re - self.im @ o.im,
                               self.re @ o.im + self.im @ o.re)

    def __rmatmul__(self, o):
        return _as_complex(o) @ self

    def abs_up(self) -> np.ndarray:
        """Entrywise upper bound of the modulus."""
        a = self.re.mag()
        b = self.im.mag()
        # exact when one part vanishes
        m = up(np.sqrt(up(up(a * a) + up(b * b))))
        return np.where(b == 0, a, np.where(a == 0, b, m))

    def abs2(self) -> Interval:
        return self.re.sqr() + self.im.sqr()

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return self.re.contains(z.real) & self.im.contains(z.imag)

    def to_json(self):
        return {"re": self.re.to_json(), "im": self.im.to_json()}

    @classmethod
    def from_json(cls, obj):
        return cls(Interval.from_json(obj["re"]), Interval.from_json(obj["im"]))

    def __repr__(self):
        return f"ComplexInterval({self.re!r}, {self.im!r})"


def _as_complex(x) -> ComplexInterval:
    if isinstance(x, ComplexInterval):
        return x
    if isinstance(x, Interval):
        return ComplexInterval(x)
    if isinstance(x, (Real, np.floating)) or np.isrealobj(x):
        return ComplexInterval(_as_interval(x))
    return ComplexInterval.point(x)
