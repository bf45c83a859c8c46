"""
Stable and unstable tangent bundles along the orbit.

The direction attached to the eigenpair ``(mu_j, v_j)`` at phase ``theta``
is ``w_j(theta) = Q(theta) v_j``.  Its enclosure comes from the verified
``Q`` (the validation ball is already folded into its coefficients) and
the certified ``v_j``.
"""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .eigen import EigenPairEnclosure, ExponentClassification
from .interval import ComplexInterval, Interval, fmt_float
from .sequence import eval_at

__all__ = [
    "InconsistentRatios",
    "BundleSample",
    "BundleEnclosure",
    "SignEstimate",
    "bundle_at",
    "multipliers",
    "multiplier_sign",
    "sample_bundles",
]

log = logging.getLogger(__name__)


class InconsistentRatios(ValueError):
    """Component ratios of the sign procedure disagree."""


@dataclass
class BundleSample:
    theta: float
    base_point: Interval | None     # None without an orbit
    directions: list          # [(label, ComplexInterval)]


@dataclass
class SignEstimate:
    """Floating estimate of a real multiplier (not rigorous)."""

    sign: int
    ratio: float
    ratios: np.ndarray
    rigorous: bool = False

    def to_json(self):
        return {"sign": self.sign, "ratio": fmt_float(self.ratio),
                "ratios": [fmt_float(r) for r in self.ratios], "rigorous": self.rigorous}


@dataclass
class BundleEnclosure:
    samples: list
    classification: ExponentClassification
    multipliers: list                        # |sigma_j| per pair
    orientation: dict                        # label -> verdict
    signs: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "exponents": self.classification.to_json(),
            "multipliers": [{"label": lab, "abs_sigma": s.to_json()}
                            for (_, lab), s in zip(self.classification.pairs, self.multipliers)],
            "orientation": dict(sorted(self.orientation.items())),
            "signs": {k: v.to_json() for k, v in sorted(self.signs.items())},
            "samples": len(self.samples),
        }

    def to_csv(self, fh=None) -> str:
        """One row per sample: ``theta, base_i, wj_k_lo, wj_k_hi``.

        Complex directions contribute their real part.
        """
        out = fh if fh is not None else io.StringIO()
        if not self.samples:
            return ""
        first = self.samples[0]
        n = int(first.directions[0][1].shape[0])
        nb = 0 if first.base_point is None else int(first.base_point.shape[0])
        nd = len(first.directions)
        head = ["theta"] + [f"base_{i + 1}" for i in range(nb)]
        for j in range(nd):
            for k in range(n):
                head += [f"w{j + 1}_{k + 1}_lo", f"w{j + 1}_{k + 1}_hi"]
        wr = csv.writer(out, lineterminator="\n")
        wr.writerow(head)
        for smp in self.samples:
            row = [fmt_float(smp.theta)]
            if nb:
                row += [fmt_float(x) for x in np.asarray(smp.base_point.mid)]
            for _, w in smp.directions:
                for k in range(n):
                    row += [fmt_float(float(w.re.lo[k])), fmt_float(float(w.re.hi[k]))]
            wr.writerow(row)
        return out.getvalue() if fh is None else ""


def _direction(Qt: Interval, v: ComplexInterval) -> ComplexInterval:
    return ComplexInterval(Qt) @ v


def bundle_at(theta, form, orbit, classification: ExponentClassification) -> BundleSample:
    """Base point and direction enclosures at phase ``theta``."""
    Qt = eval_at(form.Q, theta)
    base = orbit.eval_at(theta) if orbit is not None else None
    dirs = [(lab, _direction(Qt, p.v)) for p, lab in classification.pairs]
    return BundleSample(float(theta), base, dirs)


def multipliers(classification: ExponentClassification, tau) -> list:
    """``|sigma_j| = exp(l_j tau)`` as intervals."""
    tau = tau if isinstance(tau, Interval) else Interval(tau)
    return [(l * tau).exp() for l in classification.lyapunov]


def _Q_point(form, t: float) -> np.ndarray:
    x = form.candidate
    om = np.pi / float(form.tau.mid)
    k = np.arange(1, x.m)
    ph = np.exp(1j * om * k * t)[:, None, None]
    Qc = x.Qre[1:] + 1j * x.Qim[1:]
    return x.Qre[0] + 2.0 * np.real((Qc * ph).sum(axis=0))


def multiplier_sign(form, orbit, pair: EigenPairEnclosure, rtol=1e-4) -> SignEstimate:
    """Sign of a real multiplier from midpoint data.

    With ``Phi = Q(tau) exp(R tau)`` and ``w = Q(tau) v``, the componentwise
    ratio of ``Phi w`` to ``w`` estimates the multiplier.  This is a
    floating computation and is reported as non-rigorous.

    Raises
    ------
    InconsistentRatios
        The significant components give ratios of different sign or
        spread beyond ``rtol``.
    """
    if pair.kind != "real":
        raise ValueError("multiplier sign needs a real eigenpair")
    tau = float(form.tau.mid)
    R = np.asarray(form.R.mid)
    lam, V = np.linalg.eig(R)
    i = int(np.argmin(np.abs(lam - complex(pair.mu.mid))))
    v = V[:, i].real
    Qt = _Q_point(form, tau)
    Phi = Qt @ expm(R * tau)
    w = Qt @ v
    u = Phi @ w
    big = np.abs(w) >= 1e-3 * np.max(np.abs(w))
    ratios = u[big] / w[big]
    ratio = float(np.mean(ratios))
    if np.any(np.sign(ratios) != np.sign(ratio)):
        raise InconsistentRatios(f"ratios {ratios} disagree in sign")
    if np.max(np.abs(ratios - ratio)) > rtol * abs(ratio):
        raise InconsistentRatios(f"ratios {ratios} spread beyond rtol={rtol}")
    return SignEstimate(int(np.sign(ratio)), ratio, ratios)


def sample_bundles(form, orbit, classification: ExponentClassification, count: int = 256,
                   workers: int = 1) -> BundleEnclosure:
    """Bundles on a uniform grid of ``count`` phases in ``[0, tau]``."""
    if count < 2:
        raise ValueError("count must be at least 2")
    grid = np.linspace(0.0, float(form.tau.mid), count)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            samples = list(ex.map(lambda t: bundle_at(t, form, orbit, classification), grid))
    else:
        samples = [bundle_at(t, form, orbit, classification) for t in grid]
    orient = {}
    signs = {}
    for p, lab in classification.pairs:
        if lab == "trivial":
            continue
        try:
            est = multiplier_sign(form, orbit, p)
        except (InconsistentRatios, ValueError) as e:
            log.warning("%s bundle orientation undetermined: %s", lab, e)
            orient[lab] = "undetermined"
            continue
        signs[lab] = est
        orient[lab] = "orientable" if est.sign > 0 else "non-orientable"
    return BundleEnclosure(samples, classification, multipliers(classification, form.tau), orient, signs)
