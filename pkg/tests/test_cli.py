import json
import math

import numpy as np
import pytest

from stefanlab.cli import main
from stefanlab.solver import FrontierPath

PW_SPEC = {"family": "piecewise", "alpha1": "1/2", "alpha2": "21/20",
           "p": "1/2", "q": "1/2"}
CFG = {"n_particles": 4000, "dt": 0.001, "T": 0.1, "seed": 3,
       "picard": {"n_paths": 4000, "max_iters": 30, "tol": 1e-3}}


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "pw.json").write_text(json.dumps(PW_SPEC))
    (tmp_path / "cfg.json").write_text(json.dumps(CFG))
    return tmp_path


def test_jump_prints_cascade_size(workdir, capsys):
    (workdir / "pos.csv").write_text("-0.05, 0.3, 0.6, 0.9\n")
    assert main(["jump", "--positions", "pos.csv"]) == 0
    assert capsys.readouterr().out.strip() == "0.25"


def test_jump_with_header_and_n(workdir, capsys):
    (workdir / "pos.csv").write_text("x\n-0.05\n0.3\n0.6\n0.9\n")
    assert main(["jump", "--positions", "pos.csv", "--n", "4"]) == 0
    assert capsys.readouterr().out.strip() == "0.25"


def test_jump_missing_file(workdir, capsys):
    assert main(["jump", "--positions", "nope.csv"]) == 1
    assert "nope.csv" in capsys.readouterr().err


def test_check_sine_passes(workdir, capsys):
    (workdir / "sine.json").write_text(json.dumps({"family": "periodic", "alpha": 1.0,
                                                   "psi": "sin"}))
    code = main(["check", "--density", "sine.json", "--n-lambda", "40",
                 "--n-mu", "41", "--out", "rep.json"])
    assert code == 0
    rep = json.loads((workdir / "rep.json").read_text())
    assert rep["holds_1_7"] is True
    assert rep["holds_1_5"] is False
    for key in ("holds_1_5", "holds_1_6", "holds_1_7", "lambda0", "g_envelope", "worst_psi"):
        assert key in rep
    assert all(len(pair) == 2 for pair in rep["g_envelope"])


def test_check_piecewise_fails_exit2(workdir):
    code = main(["check", "--density", "pw.json", "--n-lambda", "30",
                 "--n-mu", "31", "--out", "rep.json"])
    assert code == 2
    rep = json.loads((workdir / "rep.json").read_text())
    assert rep["holds_1_7"] is False
    assert rep["lambda0"] == 0.0


def test_simulate_missing_config_names_path(workdir, capsys):
    assert main(["simulate", "--config", "missing.json", "--density", "pw.json"]) == 1
    assert "missing.json" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(workdir, capsys):
    assert main(["simulate", "--bogus-flag", "1"]) == 1


def test_unknown_config_field_named(workdir, capsys):
    (workdir / "bad.json").write_text(json.dumps({"n_particles": 10, "wobble": 3}))
    assert main(["simulate", "--config", "bad.json", "--density", "pw.json"]) == 1
    assert "wobble" in capsys.readouterr().err


def test_simulate_writes_frontier_and_manifest(workdir):
    code = main(["simulate", "--config", "cfg.json", "--density", "pw.json",
                 "--out", "f.csv", "--threads", "1"])
    assert code == 0
    fr = FrontierPath.read_csv(workdir / "f.csv")
    assert fr.t[-1] == pytest.approx(0.1)
    man = json.loads((workdir / "f.csv.manifest.json").read_text())
    assert man["seed"] == 3
    assert man["outputs"] == ["f.csv"]
    assert man["config"]["n_particles"] == 4000
    header = (workdir / "f.csv").read_text().splitlines()[0]
    assert header == "t,lambda,alive_fraction"


def test_simulate_flag_overrides_config(workdir):
    main(["simulate", "--config", "cfg.json", "--density", "pw.json",
          "--out", "a.csv", "--seed", "9", "--threads", "1"])
    man = json.loads((workdir / "a.csv.manifest.json").read_text())
    assert man["seed"] == 9


def test_picard_manifest_flags_convergence(workdir):
    code = main(["picard", "--config", "cfg.json", "--density", "pw.json",
                 "--out", "p.csv", "--threads", "1"])
    assert code == 0
    man = json.loads((workdir / "p.csv.manifest.json").read_text())
    assert man["converged"] is True
    assert man["iterations"] >= 1
    assert man["solver"] == "picard"


def test_bounds_roundtrip_bit_identical(workdir):
    main(["simulate", "--config", "cfg.json", "--density", "pw.json",
          "--out", "f.csv", "--threads", "1"])
    code1 = main(["bounds", "--config", "cfg.json", "--density", "pw.json",
                  "--frontier", "f.csv", "--n-paths", "4000", "--out", "b1.json",
                  "--threads", "1"])
    code2 = main(["bounds", "--config", "cfg.json", "--density", "pw.json",
                  "--n-paths", "4000", "--out", "b2.json", "--threads", "1"])
    assert code1 == code2
    assert (workdir / "b1.json").read_bytes() == (workdir / "b2.json").read_bytes()
    rep = json.loads((workdir / "b1.json").read_text())
    assert rep["L"] == pytest.approx(0.94)
    assert rep["admissible_4_4"] is True


def test_bounds_emit_csv(workdir):
    main(["bounds", "--config", "cfg.json", "--density", "pw.json",
          "--n-paths", "2000", "--out", "b.json", "--emit-csv", "tables",
          "--threads", "1"])
    lines = (workdir / "tables" / "bounds_margins.csv").read_text().splitlines()
    assert lines[0].startswith("t,lambda,")
    assert len(lines) > 10


def test_bounds_rejects_non_piecewise(workdir, capsys):
    (workdir / "u.json").write_text(json.dumps({"family": "tabulated",
                                                "grid": [0.0, 2.0], "values": [0.5, 0.5]}))
    assert main(["bounds", "--config", "cfg.json", "--density", "u.json"]) == 1
    assert "piecewise" in capsys.readouterr().err


def test_sweep_grid(workdir):
    code = main(["sweep", "--config", "cfg.json", "--density", "pw.json",
                 "--param", "n_particles=1000,2000", "--param", "seed=1,2",
                 "--out-dir", "sw", "--threads", "1"])
    assert code == 0
    index = json.loads((workdir / "sw" / "index.json").read_text())
    assert len(index["cells"]) == 4
    for cell in index["cells"]:
        assert (workdir / "sw" / cell["csv"]).exists()
    # cells are re-derivable: same params give the same frontier
    c0 = index["cells"][0]
    fr = FrontierPath.read_csv(workdir / "sw" / c0["csv"])
    assert fr.lam[-1] == c0["lambda_T"]


def test_seed_determinism_across_runs(workdir):
    for name in ("r1.csv", "r2.csv"):
        main(["simulate", "--config", "cfg.json", "--density", "pw.json",
              "--out", name, "--threads", "1"])
    assert (workdir / "r1.csv").read_bytes() == (workdir / "r2.csv").read_bytes()


def test_env_threads_parsing(workdir, monkeypatch, capsys):
    monkeypatch.setenv("STEFAN_THREADS", "junk")
    assert main(["simulate", "--config", "cfg.json", "--density", "pw.json"]) == 1
    assert "STEFAN_THREADS" in capsys.readouterr().err
