"""
Quadratic vector fields, periodic-orbit data and Jacobian coefficients.

For a field g of degree at most two the Jacobian is affine in the state,
``Dg(u) = J0 + sum_c u_c J_c``, so the Fourier coefficients of
``A(t) = Dg(gamma(t))`` follow directly from those of the orbit.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp

from .interval import ComplexInterval, Interval, fmt_float, mul_up, parse_decimal, up
from .sequence import MatrixFourierSeq
from .tails import inv_pow

__all__ = [
    "UnsupportedField",
    "MalformedOrbitFile",
    "NoConvergence",
    "VectorFieldSpec",
    "OrbitEnclosure",
    "lorenz",
    "zeta3",
    "jacobian_coeffs",
    "orbit_candidate_find",
    "orbit_residual",
    "parse_orbit",
    "emit_orbit",
    "load_orbit",
    "save_orbit",
]

log = logging.getLogger(__name__)


class UnsupportedField(ValueError):
    """Field of degree higher than two."""


class MalformedOrbitFile(ValueError):
    """Orbit file is missing a field or has an invalid value."""


class NoConvergence(RuntimeError):
    """Newton iteration did not reach the requested tolerance."""


@dataclass(frozen=True)
class Term:
    component: int
    coef: str            # decimal or rational string, kept verbatim
    powers: tuple


@dataclass
class VectorFieldSpec:
    """Polynomial field ``du/dt = g(u)`` given by a term table."""

    n: int
    kind: str
    params: dict = dc_field(default_factory=dict)
    terms: list = dc_field(default_factory=list)

    def __post_init__(self):
        for t in self.terms:
            if len(t.powers) != self.n or not 0 <= t.component < self.n:
                raise MalformedOrbitFile(f"term {t} does not match dimension {self.n}")
            if sum(t.powers) > 2:
                raise UnsupportedField(f"term {t} has degree {sum(t.powers)} > 2")

    def _coef(self, t: Term) -> Interval:
        return _coef_interval(t.coef, self.params)

    def eval_point(self, u):
        """g(u) in floating point; ``u`` has shape (..., n)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape)
        for t in self.terms:
            c = float(self._coef(t).mid)
            mono = np.ones(u.shape[:-1])
            for a, p in enumerate(t.powers):
                if p:
                    mono = mono * u[..., a] ** p
            out[..., t.component] += c * mono
        return out

    def eval_complex(self, u):
        u = np.asarray(u, dtype=complex)
        out = np.zeros(u.shape, dtype=complex)
        for t in self.terms:
            c = float(self._coef(t).mid)
            mono = np.ones(u.shape[:-1], dtype=complex)
            for a, p in enumerate(t.powers):
                if p:
                    mono = mono * u[..., a] ** p
            out[..., t.component] += c * mono
        return out

    def jacobian_affine(self):
        """Enclosures ``J0`` and ``[J_1..J_n]`` with ``Dg(u) = J0 + sum u_c J_c``."""
        n = self.n
        zero = Interval.zeros((n, n))
        J0 = zero
        Jc = [zero] * n
        for t in self.terms:
            c = self._coef(t)
            for a, p in enumerate(t.powers):
                if p == 0:
                    continue
                rest = list(t.powers)
                rest[a] -= 1
                e = np.zeros((n, n))
                e[t.component, a] = 1.0
                contrib = Interval(e) * (c * float(p))
                if sum(rest) == 0:
                    J0 = J0 + contrib
                else:
                    b = rest.index(1)
                    Jc[b] = Jc[b] + contrib
        return J0, Jc

    def jacobian_point(self, u):
        J0, Jc = self.jacobian_affine()
        u = np.asarray(u, dtype=float)
        out = np.broadcast_to(np.asarray(J0.mid), u.shape[:-1] + (self.n, self.n)).copy()
        for c, J in enumerate(Jc):
            out = out + u[..., c, None, None] * np.asarray(J.mid)
        return out

    def to_json(self):
        obj = {"kind": self.kind, "n": self.n}
        if self.kind in ("lorenz", "zeta3"):
            obj["params"] = dict(self.params)
        else:
            obj["params"] = dict(self.params)
            obj["terms"] = [{"component": t.component, "coef": t.coef,
                             "powers": list(t.powers)} for t in self.terms]
        return obj

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "kind" not in obj:
            raise MalformedOrbitFile("field: missing 'kind'")
        kind = obj["kind"]
        params = obj.get("params", {})
        try:
            if kind == "lorenz":
                return lorenz(params["sigma"], params["rho"], params["beta"])
            if kind == "zeta3":
                return zeta3(params["alpha"], params["beta"])
        except KeyError as exc:
            raise MalformedOrbitFile(f"field.params: missing {exc}") from None
        if kind == "polynomial":
            try:
                n = int(obj["n"])
                terms = [Term(int(t["component"]), str(t["coef"]), tuple(int(p) for p in t["powers"]))
                         for t in obj["terms"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedOrbitFile(f"field.terms: {exc}") from None
            return cls(n, "polynomial", dict(params), terms)
        raise MalformedOrbitFile(f"field.kind: unknown kind {kind!r}")


def _coef_interval(text: str, params: dict) -> Interval:
    """Parse ``"c"``, ``"-c"``, ``"name"``, ``"-name"`` or ``"c*name"``."""
    s = str(text).strip().replace("−", "-")
    sign = 1.0
    if s.startswith("-"):
        sign, s = -1.0, s[1:].strip()
    out = Interval(1.0)
    for part in s.split("*"):
        part = part.strip()
        val = params[part] if part in params else part
        lo, hi = parse_decimal(val)
        out = out * Interval(lo, hi)
    return out * sign


def lorenz(sigma="10", rho="28", beta="8/3") -> VectorFieldSpec:
    """Lorenz field ``(s(y-x), x(r-z)-y, xy-bz)``."""
    p = {"sigma": str(sigma), "rho": str(rho), "beta": str(beta)}
    T = Term
    terms = [
        T(0, "sigma", (0, 1, 0)), T(0, "-sigma", (1, 0, 0)),
        T(1, "rho", (1, 0, 0)), T(1, "-1", (1, 0, 1)), T(1, "-1", (0, 1, 0)),
        T(2, "1", (1, 1, 0)), T(2, "-beta", (0, 0, 1)),
    ]
    return VectorFieldSpec(3, "lorenz", p, terms)


def zeta3(alpha="3.372", beta="2") -> VectorFieldSpec:
    """Jerk field ``(y, z, a x - x^2 - b y - z)``."""
    p = {"alpha": str(alpha), "beta": str(beta)}
    T = Term
    terms = [
        T(0, "1", (0, 1, 0)), T(1, "1", (0, 0, 1)),
        T(2, "alpha", (1, 0, 0)), T(2, "-1", (2, 0, 0)),
        T(2, "-beta", (0, 1, 0)), T(2, "-1", (0, 0, 1)),
    ]
    return VectorFieldSpec(3, "zeta3", p, terms)


@dataclass
class OrbitEnclosure:
    """Periodic orbit data ``gamma(t) = sum xi_k exp(2 pi i k t / tau)``.

    ``tau`` and ``xi`` hold the centre values (as tight intervals); the
    orbit hypothesis adds ``r_gamma`` to the period and
    ``r_gamma w_k^-s_star`` to real and imaginary parts of every
    coefficient, with ``|xi_k| <= r_gamma w_k^-s_star`` beyond
    ``M_gamma``.
    """

    field: VectorFieldSpec
    tau: Interval
    s_star: float
    M_gamma: int
    xi_re: Interval          # (M_gamma+1, n)
    xi_im: Interval
    r_gamma: float
    validated: bool = False

    @property
    def n(self):
        return self.field.n

    @property
    def conditional(self) -> bool:
        return not self.validated

    def tau_enclosure(self) -> Interval:
        return self.tau.inflate(self.r_gamma)

    def xi_enclosure(self):
        k = np.arange(self.M_gamma + 1)
        b = mul_up(self.r_gamma, np.asarray(inv_pow(k, self.s_star).hi))[:, None]
        re = self.xi_re.inflate(b)
        im = self.xi_im.inflate(b)
        lo = np.array(im.lo)
        hi = np.array(im.hi)
        lo[0] = hi[0] = 0.0
        return re, Interval(lo, hi)

    def xi_mid(self) -> np.ndarray:
        return np.asarray(self.xi_re.mid) + 1j * np.asarray(self.xi_im.mid)

    def eval_point(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xi = self.xi_mid()
        k = np.arange(1, self.M_gamma + 1)
        ph = np.exp(2j * np.pi * np.outer(t, k) / float(self.tau.mid))
        return xi[0].real[None] + 2 * np.real(ph @ xi[1:])

    def eval_at(self, theta) -> Interval:
        """Enclosure of ``gamma(theta)`` under the orbit hypothesis."""
        from .sequence import _trig
        from .tails import zeta
        from .interval import PI

        th = theta if isinstance(theta, Interval) else Interval(theta)
        re, im = self.xi_enclosure()
        out = re[0]
        if self.M_gamma > 0:
            arg = (PI * 2.0) / self.tau_enclosure() * th
            c, s = _trig(self.M_gamma, arg)
            terms = re[1:] * c.reshape(-1, 1) - im[1:] * s.reshape(-1, 1)
            out = out + 2.0 * terms.sum(axis=0)
        t = up(2 * math.sqrt(2) * up(self.r_gamma * zeta(self.M_gamma, self.s_star)) * (1 + 1e-15))
        return out.inflate(t)


def jacobian_coeffs(orbit: OrbitEnclosure) -> MatrixFourierSeq:
    """Coefficients of ``A(t) = Dg(gamma(t))`` in the half-period basis.

    The orbit mode ``j`` becomes index ``2j``; odd indices vanish.  The
    tail constant bounds the entrywise modulus of ``A_k`` for
    ``k > 2 M_gamma``.
    """
    J0, Jc = orbit.field.jacobian_affine()
    n = orbit.n
    Mg = orbit.M_gamma
    re, im = orbit.xi_enclosure()
    N = 2 * Mg + 1
    a_re = [Interval.zeros((n, n)) for _ in range(N)]
    a_im = [Interval.zeros((n, n)) for _ in range(N)]
    for j in range(Mg + 1):
        r = J0 if j == 0 else Interval.zeros((n, n))
        i = Interval.zeros((n, n))
        for c in range(n):
            if np.all(Jc[c].lo == 0) and np.all(Jc[c].hi == 0):
                continue
            r = r + Jc[c] * re[j, c]
            i = i + Jc[c] * im[j, c]
        a_re[2 * j] = r
        a_im[2 * j] = i
    cJ = float(np.max(np.sum(np.stack([J.mag() for J in Jc]), axis=0)))
    cJ = float(up(cJ * (1 + 4 * 2.0 ** -53)))
    tail_C = float(mul_up(up(cJ * math.sqrt(2) * (1 + 2.0 ** -52)), mul_up(orbit.r_gamma, 2.0 ** orbit.s_star)))
    return MatrixFourierSeq(n, orbit.tau_enclosure(), Interval.stack(a_re), Interval.stack(a_im),
                            tail_C=tail_C, tail_s=orbit.s_star, odd_zero=True)


# ---------------------------------------------------------------------------
# candidate orbits

def _grid_size(M):
    return 4 * (M + 1)


def _pack(tau, xi):
    return np.concatenate([[tau], xi[0].real, xi[1:].real.ravel(), xi[1:].imag.ravel()])


def _unpack(z, n, M):
    tau = z[0]
    xi = np.zeros((M + 1, n), dtype=complex)
    xi[0] = z[1:1 + n]
    off = 1 + n
    xi[1:] = z[off:off + n * M].reshape(M, n) + 1j * z[off + n * M:].reshape(M, n)
    return tau, xi


def _values(xi, N):
    M = xi.shape[0] - 1
    c = np.zeros((N, xi.shape[1]), dtype=complex)
    c[:M + 1] = xi
    c[N - M:] = np.conj(xi[1:][::-1])
    return np.real(np.fft.ifft(c, axis=0) * N)


def _residual(z, fld, n, M, ref):
    tau, xi = _unpack(z, n, M)
    N = _grid_size(M)
    u = _values(xi, N)
    gh = np.fft.fft(fld.eval_point(u), axis=0)[:M + 1] / N
    k = np.arange(M + 1)[:, None]
    F = 1j * k * (2 * np.pi / tau) * xi - gh
    phase = np.sum(np.real(np.conj(xi[1:] - ref[1:]) * 1j * k[1:] * ref[1:]))
    return np.concatenate([F[0].real, F[1:].real.ravel(), F[1:].imag.ravel(), [phase]])


def _coeffs_from_trajectory(fld, state, period, M):
    N = _grid_size(M)
    t = np.arange(N) * period / N
    sol = solve_ivp(lambda _t, y: fld.eval_point(y), (0, period), np.asarray(state, float),
                    t_eval=t, method="DOP853", rtol=1e-12, atol=1e-12)
    if not sol.success:
        raise NoConvergence(f"integration of the guess failed: {sol.message}")
    c = np.fft.fft(sol.y.T, axis=0) / N
    return c[:M + 1]


def orbit_candidate_find(field: VectorFieldSpec, guess, M_gamma: int, r_gamma: float = 0.0,
                         s_star: float = 2.0, tol: float = 1e-11, max_iter: int = 60):
    """Refine a periodic orbit by Newton on its Fourier collocation system.

    Parameters
    ----------
    field : VectorFieldSpec
    guess : OrbitEnclosure or (state, period)
        Either orbit coefficients or a point with an approximate period.
    M_gamma : int
        Number of retained modes.
    r_gamma : float
        Trust radius copied into the result; the output is never marked
        validated.

    Returns
    -------
    OrbitEnclosure
    """
    n = field.n
    M = int(M_gamma)
    if isinstance(guess, OrbitEnclosure):
        tau0 = float(guess.tau.mid)
        xi0 = np.zeros((M + 1, n), dtype=complex)
        g = guess.xi_mid()
        kk = min(M, guess.M_gamma) + 1
        xi0[:kk] = g[:kk]
    else:
        state, tau0 = guess
        xi0 = _coeffs_from_trajectory(field, state, float(tau0), M)
    xi0[0] = xi0[0].real
    ref = xi0.copy()
    z = _pack(tau0, xi0)
    scale = max(1.0, float(np.abs(xi0).max()))
    h = 1e-6 * scale
    for it in range(max_iter):
        F = _residual(z, field, n, M, ref)
        res = float(np.abs(F).max())
        log.debug("orbit newton iter %d residual %.3e", it, res)
        if res < tol * scale:
            break
        J = np.empty((F.size, z.size))
        for i in range(z.size):
            e = np.zeros(z.size)
            e[i] = h
            J[:, i] = (_residual(z + e, field, n, M, ref) - _residual(z - e, field, n, M, ref)) / (2 * h)
        dz = np.linalg.lstsq(J, F, rcond=None)[0]
        z = z - dz
    else:
        raise NoConvergence(f"orbit Newton stalled at residual {res:.3e} after {max_iter} iterations")
    tau, xi = _unpack(z, n, M)
    return OrbitEnclosure(field, Interval(tau), float(s_star), M,
                          Interval(xi.real), Interval(xi.imag), float(r_gamma), validated=False)


def orbit_residual(orbit: OrbitEnclosure, npts: int = 2048) -> float:
    """Sup of ``|gamma' - g(gamma)|`` on a uniform grid (midpoint data)."""
    tau = float(orbit.tau.mid)
    t = np.arange(npts) * tau / npts
    xi = orbit.xi_mid()
    k = np.arange(1, orbit.M_gamma + 1)
    ph = np.exp(2j * np.pi * np.outer(t, k) / tau)
    u = xi[0].real[None] + 2 * np.real(ph @ xi[1:])
    du = 2 * np.real(ph @ (xi[1:] * (2j * np.pi * k / tau)[:, None]))
    return float(np.abs(du - orbit.field.eval_point(u)).max())


# ---------------------------------------------------------------------------
# file io

def emit_orbit(orbit: OrbitEnclosure) -> dict:
    xi = []
    for k in range(orbit.M_gamma + 1):
        xi.append({"k": k, "re": orbit.xi_re[k].to_json(), "im": orbit.xi_im[k].to_json()})
    return {
        "field": orbit.field.to_json(),
        "tau": orbit.tau.to_json(),
        "s_star": fmt_float(orbit.s_star),
        "M_gamma": orbit.M_gamma,
        "r_gamma": fmt_float(orbit.r_gamma),
        "validated": bool(orbit.validated),
        "xi": xi,
    }


def parse_orbit(obj) -> OrbitEnclosure:
    """Build an :class:`OrbitEnclosure` from its JSON object."""
    if not isinstance(obj, dict):
        raise MalformedOrbitFile("top level: expected an object")
    for key in ("field", "tau", "M_gamma", "r_gamma", "xi"):
        if key not in obj:
            raise MalformedOrbitFile(f"missing required field '{key}'")
    fld = VectorFieldSpec.from_json(obj["field"])
    try:
        tau = Interval.from_json(obj["tau"])
    except (ValueError, TypeError, KeyError) as exc:
        raise MalformedOrbitFile(f"tau: {exc}") from None
    try:
        Mg = int(obj["M_gamma"])
        r_gamma = parse_decimal(obj["r_gamma"])[1]
        s_star = parse_decimal(obj.get("s_star", "2"))[0]
    except (ValueError, TypeError) as exc:
        raise MalformedOrbitFile(f"numeric field: {exc}") from None
    if r_gamma < 0 or not math.isfinite(r_gamma):
        raise MalformedOrbitFile("r_gamma: must be finite and nonnegative")
    if s_star < 2:
        raise MalformedOrbitFile("s_star: must be >= 2")
    lo = np.zeros((2, Mg + 1, fld.n))
    hi = np.zeros((2, Mg + 1, fld.n))
    seen = set()
    for pos, e in enumerate(obj["xi"]):
        try:
            k = int(e["k"])
            re = Interval.from_json(e["re"])
            im = Interval.from_json(e.get("im", ["0"] * fld.n))
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedOrbitFile(f"xi[{pos}]: {exc}") from None
        if not 0 <= k <= Mg or re.shape != (fld.n,) or im.shape != (fld.n,):
            raise MalformedOrbitFile(f"xi[{pos}]: bad index or length")
        lo[0, k], hi[0, k] = re.lo, re.hi
        lo[1, k], hi[1, k] = im.lo, im.hi
        seen.add(k)
    if seen != set(range(Mg + 1)):
        raise MalformedOrbitFile(f"xi: expected coefficients k=0..{Mg}")
    return OrbitEnclosure(fld, tau, s_star, Mg, Interval(lo[0], hi[0]), Interval(lo[1], hi[1]),
                          r_gamma, bool(obj.get("validated", False)))


def load_orbit(path) -> OrbitEnclosure:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedOrbitFile(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return parse_orbit(obj)


def save_orbit(orbit: OrbitEnclosure, path):
    with open(path, "w") as fh:
        json.dump(emit_orbit(orbit), fh, indent=1, sort_keys=True)
        fh.write("\n")
