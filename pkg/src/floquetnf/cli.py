"""
Command line front end: ``floquetnf {solve,verify,bundles,pipeline}``.

Every command writes deterministic JSON (sorted keys, shortest round-trip
decimals) into ``--out``.  Exit codes:

    0  success
    2  verification failed
    3  Newton solver did not converge
    4  malformed input
    5  degenerate spectrum
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .bundles import sample_bundles
from .eigen import AmbiguousTrivial, DegenerateSpectrum, NotCertified, classify, verified_eigenpairs
from .galerkin import (FloquetCandidate, GalerkinProblem, LogBranchFailure, SingularJacobian, f_vector,
                       init_guess, newton_refine)
from .interval import fmt_float
from .radii import VerificationFailed, VerifiedFloquetForm, VerifierParams, verify
from .sequence import MatrixFourierSeq
from .systems import MalformedOrbitFile, NoConvergence, jacobian_coeffs, parse_orbit

log = logging.getLogger("floquetnf")

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_NOCONV = 3
EXIT_INPUT = 4
EXIT_DEGENERATE = 5

DEFAULTS = {
    "m": 60,
    "M": None,           # m + 6 when unset
    "s": 2.0,
    "l_policy": "paper",
    "sharp_tails": "auto",
    "grid": 256,
    "out": ".",
    "threads": 1,
    "seed": 0,
    "tol": 1e-12,
}


class InputError(Exception):
    """Bad input file or option; maps to exit code 4."""


# ---------------------------------------------------------------------------
# input

def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def load_source(path):
    """Return ``(orbit or None, A_seq)`` from an orbit or sequence file."""
    obj = _read_json(path)
    if isinstance(obj, dict) and "coeffs" in obj:
        try:
            return None, MatrixFourierSeq.from_json(obj)
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: {exc}") from None
    try:
        orbit = parse_orbit(obj)
    except MalformedOrbitFile as exc:
        raise InputError(f"{path}: {exc}") from None
    return orbit, jacobian_coeffs(orbit)


def load_candidate(path):
    """Return ``(candidate, verified form or None)``."""
    obj = _read_json(path)
    try:
        if isinstance(obj, dict) and obj.get("kind") == "verified_floquet_form":
            form = VerifiedFloquetForm.from_json(obj)
            return form.candidate, form
        return FloquetCandidate.from_json(obj), None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write_json(cfg, name, obj):
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], name)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", path)
    return path


def _echo(cfg):
    return {k: v for k, v in sorted(cfg.items()) if k not in ("command", "config", "m_given")}


def _params(cfg, m=None):
    m = int(m if m is not None else cfg["m"])
    M = int(cfg["M"]) if cfg["M"] is not None else m + 6
    try:
        return VerifierParams(float(cfg["s"]), m, M, cfg["l_policy"], cfg["sharp_tails"])
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg):
    """Newton-refined candidate from the orbit or sequence file."""
    orbit, A_seq = load_source(_need(cfg, "orbit"))
    m = int(cfg["m"])
    try:
        prob = GalerkinProblem(A_seq, m, float(cfg["s"]))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    x = newton_refine(init_guess(prob, m), prob, tol=float(cfg["tol"]))
    res = float(np.max(np.abs(f_vector(x, prob, m))))
    _write_json(cfg, "candidate.json", x.to_json())
    print(f"candidate m={m} residual={res:.3e}")
    return x, orbit, A_seq


def cmd_verify(cfg, x=None, orbit=None, A_seq=None):
    if A_seq is None:
        orbit, A_seq = load_source(_need(cfg, "orbit"))
    if x is None:
        x, _ = load_candidate(_need(cfg, "candidate"))
    m = int(cfg["m"]) if cfg.get("m_given") else x.m
    if m != x.m:
        x = x.resized(m)
    params = _params(cfg, m)
    source = orbit if orbit is not None else A_seq
    try:
        form, rep = verify(source, x, params)
    except VerificationFailed as exc:
        obj = exc.report.to_json()
        obj["config"] = _echo(cfg)
        _write_json(cfg, "report.json", obj)
        print(f"verification failed: {exc.report.reason}")
        raise
    obj = rep.to_json()
    obj["config"] = _echo(cfg)
    _write_json(cfg, "report.json", obj)
    _write_json(cfg, "form.json", form.to_json())
    tag = " (conditional on the orbit enclosure)" if rep.conditional else ""
    print(f"verified r={fmt_float(rep.r)} r_interval=[{fmt_float(rep.r_min)}, {fmt_float(rep.r_max)}]{tag}")
    return form, orbit


def cmd_bundles(cfg, form=None, orbit=None):
    if form is None:
        orbit, A_seq = load_source(_need(cfg, "orbit"))
        x, form = load_candidate(_need(cfg, "candidate"))
        if form is None:
            form, orbit = cmd_verify(cfg, x, orbit, A_seq)
    pairs = verified_eigenpairs(form.R)
    cls = classify(pairs, form.tau, R=form.R, expect_trivial=orbit is not None)
    B = sample_bundles(form, orbit, cls, int(cfg["grid"]), workers=int(cfg["threads"]))
    _write_json(cfg, "eigen.json", cls.to_json())
    summary = B.to_json()
    summary["config"] = _echo(cfg)
    summary["conditional"] = bool(form.conditional)
    _write_json(cfg, "bundles.json", summary)
    os.makedirs(cfg["out"], exist_ok=True)
    with open(os.path.join(cfg["out"], "bundles.csv"), "w", newline="") as fh:
        B.to_csv(fh)
    for (p, lab), sig in zip(cls.pairs, B.multipliers):
        l = p.lyapunov
        print(f"{lab:9s} l=[{fmt_float(l.lo)}, {fmt_float(l.hi)}] "
              f"|sigma|=[{fmt_float(sig.lo)}, {fmt_float(sig.hi)}] {B.orientation.get(lab, '')}")
    return B


def cmd_pipeline(cfg):
    x, orbit, A_seq = cmd_solve(cfg)
    form, orbit = cmd_verify(cfg, x, orbit, A_seq)
    return cmd_bundles(cfg, form, orbit)


def _need(cfg, key):
    if not cfg.get(key):
        raise InputError(f"--{key} is required for '{cfg['command']}'")
    return cfg[key]


# ---------------------------------------------------------------------------
# argument handling

def build_parser():
    ap = argparse.ArgumentParser(prog="floquetnf", description="Rigorous Floquet normal forms.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("solve", "Newton-refine a candidate"),
                        ("verify", "prove a candidate with the radii polynomials"),
                        ("bundles", "eigenpairs, multipliers and tangent bundles"),
                        ("pipeline", "solve, verify and bundles in one run")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with option defaults (flags win)")
        p.add_argument("--orbit", help="orbit or coefficient-sequence JSON")
        p.add_argument("--candidate", help="candidate or verified form JSON")
        p.add_argument("--m", type=int, help="Galerkin dimension (default 60)")
        p.add_argument("--M", type=int, help="tail cutoff (default m + 6)")
        p.add_argument("--s", type=float, help="decay exponent (default 2)")
        p.add_argument("--l-policy", dest="l_policy", help="paper or fixed:N")
        p.add_argument("--grid", type=int, help="bundle samples per period (default 256)")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--threads", type=int, help="worker cap (default 1)")
        p.add_argument("--sharp-tails", dest="sharp_tails", choices=["auto", "on", "off"])
        p.add_argument("--seed", type=int, help="seed for randomized diagnostics")
        p.add_argument("--tol", type=float, help="Newton tolerance (default 1e-12)")
    return ap


def resolve_config(ns):
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    extra = {}
    if ns.config:
        extra = _read_json(ns.config)
        if not isinstance(extra, dict):
            raise InputError(f"{ns.config}: expected an object")
        for k, v in extra.items():
            k = k.replace("-", "_")
            if k not in DEFAULTS and k not in ("orbit", "candidate"):
                raise InputError(f"{ns.config}: unknown option '{k}'")
            cfg[k] = v
        extra = {k.replace("-", "_") for k in extra}
    flags = {k: v for k, v in vars(ns).items() if v is not None}
    cfg["m_given"] = "m" in flags or (ns.config is not None and "m" in extra)
    cfg.update(flags)
    return cfg


def _setup_logging():
    level = os.environ.get("FLOQUET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    ns = build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "verify": cmd_verify, "bundles": cmd_bundles,
                "pipeline": cmd_pipeline}
    try:
        cfg = resolve_config(ns)
        handlers[ns.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoConvergence, SingularJacobian, LogBranchFailure) as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (VerificationFailed, NotCertified) as exc:
        if isinstance(exc, NotCertified):
            print(f"error: eigenpairs not certified: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DegenerateSpectrum, AmbiguousTrivial) as exc:
        print(f"error: degenerate spectrum: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
