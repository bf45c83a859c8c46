#!/usr/bin/env python3
"""High-precision reference values frozen into the test suite.

Everything here uses mpmath only and never imports floquetnf.
"""
import mpmath as mp

mp.mp.dps = 40


def bessel_Q(a=-0.5, b=1.0, tau=1.0, kmax=15):
    """Fourier data of Q(t) = exp(c sin(2 pi t / tau)), c = b tau / (2 pi).

    In the basis exp(i k pi t / tau) only even k = 2j appear, with
    coefficient I_j(c) (-i)^j.
    """
    c = mp.mpf(b) * tau / (2 * mp.pi)
    out = []
    for k in range(kmax + 1):
        if k % 2:
            out.append((0, 0))
            continue
        j = k // 2
        z = mp.besseli(j, c) * (-1j) ** j
        out.append((mp.re(z), mp.im(z)))
    return out


def closed_form_series(c, tau, thetas):
    return [mp.e ** (c * mp.sin(mp.pi * th / tau)) for th in thetas]


def charpoly_roots(A):
    """Real roots of det(A - x I) by bisection on sign changes."""
    A = mp.matrix(A)

    def p(x):
        return mp.det(A - x * mp.eye(A.rows))

    grid = [mp.mpf(-10) + mp.mpf(i) / 100 for i in range(2001)]
    roots = []
    for x0, x1 in zip(grid, grid[1:]):
        if p(x0) == 0:
            roots.append(x0)
        elif p(x0) * p(x1) < 0:
            lo, hi = x0, x1
            for _ in range(200):
                mid = (lo + hi) / 2
                if p(lo) * p(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            roots.append((lo + hi) / 2)
    return roots


def eta_formula(k, s):
    k = mp.mpf(k)
    s = mp.mpf(s)
    return 2 * (k / (k - 1)) ** s + (4 * mp.log(k - 2) / k + (mp.pi ** 2 - 6) / 3) * (2 / k + mp.mpf(1) / 2) ** (s - 2)


if __name__ == "__main__":
    print("bessel")
    for k, (re, im) in enumerate(bessel_Q()):
        print(k, mp.nstr(re, 20), mp.nstr(im, 20))
    print("series c=0.7 tau=1.3")
    ths = [0, 0.1, 0.45, 0.9, 1.3, 2.0]
    for th, v in zip(ths, closed_form_series(mp.mpf("0.7"), mp.mpf("1.3"), [mp.mpf(str(t)) for t in ths])):
        print(th, mp.nstr(v, 20))
    M = [[0.5, 1.25, -0.75], [0.25, -1.5, 0.5], [1.0, 0.125, 2.25]]
    print("roots", [mp.nstr(r, 20) for r in charpoly_roots(M)])
    print("eta(10,2)", mp.nstr(eta_formula(10, 2), 20))
