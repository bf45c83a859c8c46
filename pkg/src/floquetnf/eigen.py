"""
Verified eigenpairs of an interval matrix and exponent classification.

Each eigenpair is certified with a Krawczyk operator on the real form of

    (R - mu I) v = 0,   |v|^2 = 1,   Im v_p = 0,

in the unknowns ``(Re mu, Im mu, Re v, Im v)``.  The pinned component
``p`` is the largest-modulus entry of the floating eigenvector, which
removes the phase freedom left by the normalization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import ComplexInterval, Interval, down, sum_up, up

__all__ = [
    "DegenerateSpectrum",
    "NotCertified",
    "AmbiguousTrivial",
    "EigenPairEnclosure",
    "ExponentClassification",
    "verified_eigenpairs",
    "classify",
]


class DegenerateSpectrum(ValueError):
    """Eigenvalues cannot be separated."""


class NotCertified(RuntimeError):
    """The Krawczyk inclusion test failed."""


class AmbiguousTrivial(ValueError):
    """Zero or several exponents are compatible with the trivial one."""


@dataclass
class EigenPairEnclosure:
    mu: ComplexInterval
    v: ComplexInterval
    kind: str                  # "real" or "complex"

    @property
    def lyapunov(self) -> Interval:
        return self.mu.re

    def to_json(self):
        return {"mu": self.mu.to_json(), "v": self.v.to_json(), "kind": self.kind}


@dataclass
class ExponentClassification:
    pairs: list                # [(EigenPairEnclosure, label)]
    lyapunov: list             # [Interval]
    trivial_tol: float

    def labels(self):
        return [lab for _, lab in self.pairs]

    def index(self, label):
        return [i for i, (_, lab) in enumerate(self.pairs) if lab == label]

    def to_json(self):
        return [{"mu": p.mu.to_json(), "v": p.v.to_json(), "kind": p.kind, "label": lab,
                 "lyapunov": l.to_json()} for (p, lab), l in zip(self.pairs, self.lyapunov)]


def _residual(R, a, b, p, q, pin):
    """Real form of F at a point (``R`` may be an Interval)."""
    r1 = R @ p - a * p + b * q
    r2 = R @ q - a * q - b * p
    nrm = (p * p).sum() + (q * q).sum() - 1.0
    return r1, r2, nrm, q[pin]


def _jacobian(R, a, b, p, q, pin, n):
    """Interval Jacobian over the box ``(a, b, p, q)``; ``R`` interval."""
    N = 2 * n + 2
    lo = np.zeros((N, N))
    hi = np.zeros((N, N))

    def put(rows, cols, X):
        X = X if isinstance(X, Interval) else Interval(np.asarray(X, dtype=float))
        lo[np.ix_(rows, cols)] = np.asarray(X.lo).reshape(len(rows), len(cols))
        hi[np.ix_(rows, cols)] = np.asarray(X.hi).reshape(len(rows), len(cols))

    I = np.eye(n)
    r1 = list(range(n))
    r2 = list(range(n, 2 * n))
    ca, cb = [2 * n], [2 * n + 1]
    cp = list(range(n))
    cq = list(range(n, 2 * n))
    # unknown order in the matrix columns: p (n), q (n), a, b
    put(r1, cp, R - Interval(I) * a)
    put(r1, cq, Interval(I) * b)
    put(r1, ca, -p.reshape(n, 1))
    put(r1, cb, q.reshape(n, 1))
    put(r2, cp, -(Interval(I) * b))
    put(r2, cq, R - Interval(I) * a)
    put(r2, ca, -q.reshape(n, 1))
    put(r2, cb, -p.reshape(n, 1))
    put([2 * n], cp, (p * 2.0).reshape(1, n))
    put([2 * n], cq, (q * 2.0).reshape(1, n))
    lo[2 * n + 1, n + pin] = hi[2 * n + 1, n + pin] = 1.0
    return Interval(lo, hi)


def _real_jacobian(R, a, p, n):
    lo = np.zeros((n + 1, n + 1))
    hi = np.zeros((n + 1, n + 1))
    top = R - Interval(np.eye(n)) * a
    lo[:n, :n], hi[:n, :n] = top.lo, top.hi
    lo[:n, n], hi[:n, n] = -p.hi, -p.lo
    row = p * 2.0
    lo[n, :n], hi[n, :n] = row.lo, row.hi
    return Interval(lo, hi)


def _contract(F0, Jfun, Jmid, x0, max_tries):
    """Krawczyk test with epsilon-inflation; returns the certified box."""
    try:
        C = np.linalg.inv(Jmid)
    except np.linalg.LinAlgError:
        raise NotCertified("singular eigen system Jacobian") from None
    Ci = Interval(C)
    X0 = Interval(x0)
    step = Ci @ F0
    I = Interval(np.eye(len(x0)))
    tiny = 1e-15 * max(1.0, float(np.max(np.abs(x0))))
    Y = X0 - step
    for _ in range(max_tries):
        w = np.asarray(Y.width)
        if not np.all(np.isfinite(w)):
            break
        X = Interval._make(down(np.asarray(Y.lo) - 0.1 * w - tiny),
                           up(np.asarray(Y.hi) + 0.1 * w + tiny)).hull(X0)
        Kx = X0 - step + (I - Ci @ Jfun(X)) @ (X - X0)
        if np.all(X.interior_contains(Kx)):
            return Kx
        Y = Kx
    raise NotCertified("Krawczyk inclusion failed")


def _krawczyk(R: Interval, mu0: complex, v0: np.ndarray, real: bool, max_tries=12):
    """Certify one pair; real pairs use the real system in ``(p, a)``."""
    n = R.shape[0]
    if real:
        p0 = v0.real / np.linalg.norm(v0.real)
        p0 = p0 * np.sign(p0[np.argmax(np.abs(p0))])
        x0 = np.concatenate([p0, [mu0.real]])
        X0 = Interval(x0)
        a, p = X0[n], X0[:n]
        F0 = Interval.concat([R @ p - a * p, ((p * p).sum() - 1.0).reshape(1)])
        Kx = _contract(F0, lambda X: _real_jacobian(R, X[n], X[:n], n),
                       np.asarray(_real_jacobian(Interval(R.mid), a, p, n).mid), x0, max_tries)
        return Kx[n], Interval(0.0), Kx[:n], Interval.zeros((n,))
    pin = int(np.argmax(np.abs(v0)))
    v0 = v0 * np.exp(-1j * np.angle(v0[pin]))
    v0 = v0 / np.linalg.norm(v0)
    x0 = np.concatenate([v0.real, v0.imag, [mu0.real, mu0.imag]])
    x0[n + pin] = 0.0
    X0 = Interval(x0)

    def split(X):
        return X[2 * n], X[2 * n + 1], X[:n], X[n:2 * n]

    r1, r2, nrm, pq = _residual(R, *split(X0), pin)
    F0 = Interval.concat([r1, r2, nrm.reshape(1), pq.reshape(1)])
    Kx = _contract(F0, lambda X: _jacobian(R, *split(X), pin, n),
                   np.asarray(_jacobian(Interval(R.mid), *split(X0), pin, n).mid), x0, max_tries)
    return split(Kx)


def _inverse_enclosure(V: np.ndarray) -> ComplexInterval:
    """Entrywise enclosure of ``V^{-1}`` around a floating inverse."""
    Y = np.linalg.inv(V)
    E = np.eye(V.shape[0]) - ComplexInterval.point(Y) @ ComplexInterval.point(V)
    beta = float(np.max(sum_up(E.abs_up(), axis=1)))
    if not beta < 1.0:
        raise NotCertified("eigenvector basis is numerically singular")
    delta = up(beta / down(1.0 - beta))
    d = up(delta * sum_up(np.abs(Y), axis=0))
    pad = Interval(-np.broadcast_to(d, Y.shape), np.broadcast_to(d, Y.shape))
    return ComplexInterval.point(Y) + ComplexInterval(pad, pad)


def _disks(T: ComplexInterval, axis: int):
    """Gershgorin centers and radii of ``T`` (rows for axis=1, columns for 0)."""
    n = T.shape[0]
    c = T.mid.diagonal().copy()
    A = T.abs_up()
    off = A * (1.0 - np.eye(n))
    own = np.array([(T[i, i] - complex(c[i])).abs_up() for i in range(n)], dtype=float)
    return c, up(own + sum_up(off, axis=axis))


def _solve_linear(B: ComplexInterval, c: ComplexInterval) -> ComplexInterval:
    """Enclose the solution set of ``B w = c`` (preconditioned, inf-norm)."""
    C = np.linalg.inv(B.mid)
    w0 = C @ c.mid
    G = np.eye(B.shape[0]) - ComplexInterval.point(C) @ B
    beta = float(np.max(sum_up(G.abs_up(), axis=1)))
    if not beta < 1.0:
        raise NotCertified("eigenvector system is not contracting")
    z = ComplexInterval.point(C) @ (c - B @ ComplexInterval.point(w0))
    e = up(float(np.max(z.abs_up())) / down(1.0 - beta))
    pad = Interval(-np.full(w0.shape, e), np.full(w0.shape, e))
    return ComplexInterval.point(w0) + ComplexInterval(pad, pad)


def _gershgorin_pairs(R: Interval, w: np.ndarray, V: np.ndarray, real_mask):
    """Certify all pairs at once through the similarity ``V^{-1} R V``.

    Used when ``R`` is too wide for the nonlinear contraction: disjoint
    disks give one eigenvalue each, and the eigenvector with ``w_i = 1`` in
    the ``V`` basis solves a linear interval system.
    """
    n = R.shape[0]
    T = _inverse_enclosure(V) @ ComplexInterval(R) @ ComplexInterval.point(V)
    for axis in (0, 1):
        c, rad = _disks(T, axis)
        ok = all(down(abs(c[i] - c[j])) > up(rad[i] + rad[j])
                 for i in range(n) for j in range(i + 1, n))
        if ok:
            break
    else:
        raise NotCertified("Gershgorin disks of the transformed matrix overlap")
    out = []
    for i in range(n):
        re = Interval(down(c[i].real - rad[i]), up(c[i].real + rad[i]))
        if real_mask[i]:
            # a disk symmetric about the real axis holding one eigenvalue
            # of a real matrix holds a real one
            im = Interval(0.0)
        else:
            im = Interval(down(c[i].imag - rad[i]), up(c[i].imag + rad[i]))
        mu = ComplexInterval(re, im)
        J = [j for j in range(n) if j != i]
        B = T[np.ix_(J, J)] - ComplexInterval(Interval(np.eye(n - 1))) * mu
        wJ = _solve_linear(B, -T[np.array(J), i])
        wr = [None] * n
        for k, j in enumerate(J):
            wr[j] = wJ[k]
        wr[i] = ComplexInterval(Interval(1.0))
        wv = ComplexInterval(Interval.stack([x.re for x in wr]), Interval.stack([x.im for x in wr]))
        v = ComplexInterval.point(V) @ wv
        if real_mask[i]:
            v = ComplexInterval(v.re, Interval.zeros(v.shape))
        out.append((mu, _normalize(v, real_mask[i])))
    return out


def _unit_box(x: Interval) -> Interval:
    # entries of a unit vector lie in [-1, 1]
    return Interval(np.maximum(np.asarray(x.lo), -1.0), np.minimum(np.asarray(x.hi), 1.0))


def _normalize(v: ComplexInterval, real: bool) -> ComplexInterval:
    """Scale to unit norm with the largest component real and positive."""
    p = int(np.argmax(np.abs(v.mid)))
    nrm = v.abs2().sum().sqrt()
    if real:
        s = Interval(1.0) / nrm
        if v.re.mid[p] < 0:
            s = -s
        return ComplexInterval(_unit_box(v.re * s), Interval.zeros(v.shape))
    vp = v[p]
    rot = vp.conj() * (Interval(1.0) / (vp.abs2().sqrt() * nrm))
    out = v * rot
    # the pinned entry is |v_p| / |v| exactly
    lo, hi = np.array(out.re.lo), np.array(out.re.hi)
    ilo, ihi = np.array(out.im.lo), np.array(out.im.hi)
    ilo[p] = ihi[p] = 0.0
    return ComplexInterval(_unit_box(Interval(lo, hi)), _unit_box(Interval(ilo, ihi)))


def verified_eigenpairs(R, sep_tol=None) -> list:
    """Certified enclosures of all eigenpairs of the interval matrix ``R``.

    Raises
    ------
    DegenerateSpectrum
        The floating spectrum of the midpoint has a cluster, or two
        enclosures overlap.
    NotCertified
        Neither the Krawczyk test nor the Gershgorin fallback succeeds.

    Notes
    -----
    Each pair is first certified by a Krawczyk operator.  Pairs for which
    ``R`` is too wide for that contraction are taken from Gershgorin disks
    of ``V^{-1} R V``.  In both cases the ``n`` returned
    eigenvalue enclosures are pairwise disjoint, so each holds exactly one
    eigenvalue of every matrix in ``R``.
    """
    R = R if isinstance(R, Interval) else Interval(np.asarray(R, dtype=float))
    Rm = np.asarray(R.mid)
    n = Rm.shape[0]
    w, V = np.linalg.eig(Rm)
    scale = max(1.0, float(np.max(np.abs(Rm))))
    tol = sep_tol if sep_tol is not None else 1e-8 * scale
    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= tol:
                raise DegenerateSpectrum(f"eigenvalues {w[i]} and {w[j]} are not separated")
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    real = np.abs(w.imag) <= 1e-12 * scale
    w = np.where(real, w.real, w)
    V = np.where(real[None, :], V.real, V)
    out = []
    fallback = None
    for i in range(n):
        kind = "real" if real[i] else "complex"
        try:
            a, b, p, q = _krawczyk(R, complex(w[i]), V[:, i], bool(real[i]))
            out.append(EigenPairEnclosure(ComplexInterval(a, b), ComplexInterval(p, q), kind))
        except NotCertified:
            if fallback is None:
                fallback = _gershgorin_pairs(R, w, V, real)
            out.append(EigenPairEnclosure(*fallback[i], kind))
    for i in range(n):
        for j in range(i + 1, n):
            mi, mj = out[i].mu, out[j].mu
            if bool(mi.re.intersects(mj.re)) and bool(mi.im.intersects(mj.im)):
                raise DegenerateSpectrum("eigenvalue enclosures overlap")
    return out


def classify(pairs, tau=None, trivial_tol=None, R=None, expect_trivial=True) -> ExponentClassification:
    """Label each pair stable, trivial or unstable by the sign of ``Re mu``.

    ``trivial_tol`` defaults to ``1e-6 ||R||_inf`` when ``R`` is given and
    ``1e-6`` otherwise.  A periodic orbit linearization has exactly one
    trivial exponent; pass ``expect_trivial=False`` for a general periodic
    system, where none is required.
    """
    if trivial_tol is None:
        if R is not None:
            Rm = R.mag() if isinstance(R, Interval) else np.abs(np.asarray(R))
            trivial_tol = 1e-6 * float(np.max(np.sum(Rm, axis=1)))
        else:
            trivial_tol = 1e-6
    band = Interval(-trivial_tol, trivial_tol)
    lyap = [p.lyapunov for p in pairs]
    cand = [i for i, l in enumerate(lyap) if l.intersects(band)]
    if len(cand) > 1 or (expect_trivial and not cand):
        raise AmbiguousTrivial(f"{len(cand)} exponents are compatible with zero")
    labels = []
    for i, l in enumerate(lyap):
        if cand and i == cand[0]:
            labels.append("trivial")
        elif float(l.hi) < 0:
            labels.append("stable")
        elif float(l.lo) > 0:
            labels.append("unstable")
        else:
            raise AmbiguousTrivial(f"exponent {i} straddles zero")
    return ExponentClassification(list(zip(pairs, labels)), lyap, float(trivial_tol))
