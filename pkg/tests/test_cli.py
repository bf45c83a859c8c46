import csv
import json

import pytest

from floquetnf.cli import main
from floquetnf.data import path as fixture_path

SOL4 = fixture_path("lorenz_sol4.json")
ZETA3 = fixture_path("zeta3_alpha3372.json")
COSINE = fixture_path("scalar_cosine.json")
CONSTANT = fixture_path("constant_diag.json")

# reference exponents for Lorenz sol #4
SOL4_EXPONENTS = {"stable": -13.7210150091049, "unstable": 0.0543483424385}


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    with open(path) as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def sol4_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sol4")
    assert run("solve", "--orbit", SOL4, "--m", 60, "--out", out) == 0
    assert run("verify", "--orbit", SOL4, "--candidate", out / "candidate.json", "--M", 66, "--out", out) == 0
    return out


def test_solve_sol4(sol4_dir, capsys):
    cand = read(sol4_dir / "candidate.json")
    assert cand["m"] == 60
    assert run("solve", "--orbit", SOL4, "--m", 60, "--out", sol4_dir / "again") == 0
    res = float(capsys.readouterr().out.split("residual=")[1])
    assert res < 1e-12


def test_solve_constant(tmp_path, capsys):
    assert run("solve", "--orbit", CONSTANT, "--m", 6, "--out", tmp_path) == 0
    assert float(capsys.readouterr().out.split("residual=")[1]) < 1e-14


def test_malformed_orbit(tmp_path, capsys):
    obj = read(SOL4)
    del obj["r_gamma"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    assert run("solve", "--orbit", bad, "--out", tmp_path) == 4
    assert "r_gamma" in capsys.readouterr().err


def test_missing_flag_and_file(tmp_path):
    assert run("solve", "--out", tmp_path) == 4
    assert run("solve", "--orbit", tmp_path / "nope.json", "--out", tmp_path) == 4


def test_verify_sol4(sol4_dir):
    rep = read(sol4_dir / "report.json")
    assert rep["success"] is True
    assert rep["config"]["M"] == 66
    assert (sol4_dir / "form.json").exists()


def test_verify_failure_margins(sol4_dir, tmp_path):
    code = run("verify", "--orbit", SOL4, "--candidate", sol4_dir / "candidate.json", "--M", 61,
               "--l-policy", "fixed:1", "--out", tmp_path)
    assert code == 2
    rep = read(tmp_path / "report.json")
    assert rep["success"] is False
    assert len(rep["margins"]) == 61 + 1
    # the f_star rows stay positive
    assert float(rep["margins"][0]["value_at_rmin"]) > 0


def test_verify_cosine(tmp_path):
    assert run("solve", "--orbit", COSINE, "--m", 30, "--out", tmp_path) == 0
    assert run("verify", "--orbit", COSINE, "--candidate", tmp_path / "candidate.json", "--M", 40,
               "--out", tmp_path) == 0
    assert read(tmp_path / "report.json")["success"] is True


def test_bundles_sol4(sol4_dir, tmp_path):
    assert run("bundles", "--orbit", SOL4, "--candidate", sol4_dir / "form.json", "--grid", 2,
               "--out", tmp_path) == 0
    with open(tmp_path / "bundles.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3
    eig = read(tmp_path / "eigen.json")
    assert [e["label"] for e in eig] == ["stable", "trivial", "unstable"]
    for e in eig:
        if e["label"] in SOL4_EXPONENTS:
            lo, hi = float(e["lyapunov"]["lo"]), float(e["lyapunov"]["hi"])
            assert abs((lo + hi) / 2 - SOL4_EXPONENTS[e["label"]]) < 1e-3


def test_pipeline_zeta3(tmp_path):
    assert run("pipeline", "--orbit", ZETA3, "--m", 60, "--M", 90, "--grid", 4, "--threads", 2,
               "--out", tmp_path) == 0
    b = read(tmp_path / "bundles.json")
    assert b["orientation"] == {"stable": "non-orientable", "unstable": "non-orientable"}
    assert all(v["sign"] == -1 for v in b["signs"].values())


def test_byte_identical_reruns(tmp_path):
    names = ("candidate.json", "report.json", "form.json", "eigen.json", "bundles.json", "bundles.csv")
    outs = []
    for _ in range(2):
        assert run("pipeline", "--orbit", COSINE, "--m", 30, "--M", 40, "--grid", 5, "--out", tmp_path) == 0
        outs.append({f: (tmp_path / f).read_bytes() for f in names})
    assert outs[0] == outs[1]


def test_config_precedence(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"m": 8, "grid": 3, "M": 12}))
    out = tmp_path / "o"
    assert run("pipeline", "--config", conf, "--orbit", COSINE, "--m", 30, "--M", 40, "--out", out) == 0
    cfg = read(out / "report.json")["config"]
    assert cfg["m"] == 30 and cfg["M"] == 40 and cfg["grid"] == 3
    assert read(out / "candidate.json")["m"] == 30


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"bogus": 1}))
    assert run("solve", "--config", conf, "--orbit", COSINE, "--out", tmp_path) == 4
