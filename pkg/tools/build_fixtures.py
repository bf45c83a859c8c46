#!/usr/bin/env python3
"""Regenerate the JSON fixtures under src/floquetnf/data/.

Lorenz orbits are transcribed from tools/lorenz_reference_coeffs.txt with
their decimal strings kept verbatim.  The zeta3 orbit is computed with
orbit_candidate_find.  Run from the repository root:

    python3 tools/build_fixtures.py
"""
import argparse
import json
import os
import sys

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "src"))

from floquetnf.interval import fmt_float  # noqa: E402
from floquetnf.sequence import MatrixFourierSeq  # noqa: E402
from floquetnf.systems import emit_orbit, lorenz, orbit_candidate_find, zeta3  # noqa: E402

DATA = os.path.join(HERE, "..", "src", "floquetnf", "data")
RHO = {"sol1": "18.0815", "sol4": "23.8815"}


def read_reference(path):
    blocks = {}
    name = None
    for line in open(path):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            name = line[1:].strip()
            blocks[name] = {"tau": None, "xi": []}
        elif line.startswith("tau"):
            blocks[name]["tau"] = line.split()[1]
        elif line.startswith("xi"):
            blocks[name]["xi"].append(line.split()[2:])
    return blocks


def unscramble(rows):
    """Undo the column permutation of the sol4 reference table.

    For k >= 1 the stored slots (re1, im1, re2, im2, re3, im3) hold
    (re1, im2, im1, re3, re2, im3); k = 0 is unaffected.  The reordered
    table solves the orbit equation to about 1e-12.
    """
    return [rows[0]] + [[r[i] for i in (0, 2, 4, 1, 3, 5)] for r in rows[1:]]


def lorenz_fixture(name, block, r_gamma="1e-6"):
    rows = block["xi"]
    if name == "sol4":
        rows = unscramble(rows)
    fld = lorenz("10", RHO[name], "8/3")
    xi = [{"k": k, "re": r[0::2], "im": r[1::2]} for k, r in enumerate(rows)]
    return {
        "field": fld.to_json(),
        "tau": block["tau"],
        "s_star": "2",
        "M_gamma": len(rows) - 1,
        "r_gamma": r_gamma,
        "validated": False,
        "xi": xi,
    }


def zeta3_fixture():
    orb = orbit_candidate_find(zeta3("3.372", "2"), ([0.68188698, 0.0, 3.60555477], 4.532840719616994),
                               40, r_gamma=1e-6)
    return emit_orbit(orb)


def constant_fixture():
    A = np.diag([-1.0, -2.0])[None].astype(complex)
    return MatrixFourierSeq.from_point(1.0, A).to_json()


def cosine_fixture(a=-0.5, b=1.0, tau=1.0):
    # a + b cos(2 pi t / tau) in the basis exp(i k pi t / tau)
    c = np.zeros((3, 1, 1), dtype=complex)
    c[0, 0, 0] = a
    c[2, 0, 0] = b / 2
    obj = MatrixFourierSeq.from_point(tau, c, odd_zero=True).to_json()
    obj["params"] = {"a": fmt_float(a), "b": fmt_float(b), "tau": fmt_float(tau)}
    return obj


def write(name, obj):
    path = os.path.join(DATA, name)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print("wrote", os.path.relpath(path))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reference", default=os.path.join(HERE, "lorenz_reference_coeffs.txt"))
    args = ap.parse_args(argv)
    os.makedirs(DATA, exist_ok=True)
    ref = read_reference(args.reference)
    for name in ("sol1", "sol4"):
        write(f"lorenz_{name}.json", lorenz_fixture(name, ref[name]))
    write("zeta3_alpha3372.json", zeta3_fixture())
    write("constant_diag.json", constant_fixture())
    write("scalar_cosine.json", cosine_fixture())


if __name__ == "__main__":
    main()
