from __future__ import annotations

import json
import math

import numpy as np
import pytest

from avqe.cli import main
from avqe.errors import ConfigInvalid, InvalidParams
from avqe.harness import (EXIT_CERTIFICATION, EXIT_CONFIG, EXIT_STALL, csv_text, fmt, load_config,
                          make_context, representability_check, validate_config)
from avqe.models import build_model, random_2local, tfim
from avqe.oracle import PathOracle, eigensystem, gap_profile
from avqe.tracker import TrackerConfig


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run_cli(tmp_path, command, cfg, out="out", extra=()):
    out_dir = tmp_path / out
    code = main([command, "--config", write_config(tmp_path, cfg, f"{out}.json"), "--out", str(out_dir),
                 *extra])
    return code, out_dir


def bodies(out_dir):
    return {p.relative_to(out_dir).as_posix(): p.read_bytes()
            for p in sorted(out_dir.rglob("*")) if p.is_file() and p.name != "summary.json"}


def test_tfim_pair_ground_energy():
    model = tfim(2, 1.0)
    assert eigensystem(model.path.h_final).ground_energy == pytest.approx(-math.sqrt(5))


def test_single_qubit_gap():
    assert gap_profile(build_model("single_qubit").path).delta_min == pytest.approx(math.sqrt(2))


def test_random_2local_deterministic():
    a, b = random_2local(3, 5, seed=7), random_2local(3, 5, seed=7)
    assert a.path == b.path
    assert random_2local(3, 5, seed=8).path != a.path


def test_build_model_errors():
    with pytest.raises(InvalidParams):
        build_model("tfim", {"n": 1})
    with pytest.raises(InvalidParams):
        build_model("heisenberg")
    with pytest.raises(InvalidParams):
        build_model("tfim", {"field": 2})


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        validate_config({"tracker": {"eta": -1}})
    with pytest.raises(ConfigInvalid):
        validate_config({"unknown": 1})
    with pytest.raises(ConfigInvalid):
        validate_config({"model": {"family": "custom"}})
    cfg = validate_config({"tracker": {"K": 7}})
    assert cfg["tracker"]["K"] == 7 and cfg["tracker"]["eta"] == 0.25


def test_load_config_overrides(tmp_path):
    p = write_config(tmp_path, {"seed": 3})
    assert load_config(p, {"seed": 9})["seed"] == 9
    with pytest.raises(ConfigInvalid):
        load_config(str(tmp_path / "missing.json"))


def test_fmt_round_trip():
    for x in (0.1, 1 / 3, -2.5e-300, math.pi):
        assert float(fmt(x)) == x
    assert fmt(None) == "" and fmt(True) == "true" and fmt(float("nan")) == ""
    assert csv_text(["a", "b"], [[1, 0.5]]) == "a,b\n1,0.5\n"


def test_verify_single_qubit_cli(tmp_path):
    code, out = run_cli(tmp_path, "verify", {"model": {"family": "single_qubit"}})
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["completed"] is True
    assert summary["final_fidelity"] >= 0.999
    header = (out / "certificates.csv").read_text().splitlines()[0]
    assert header == "t,lambda,sigma_H,sigma_D,delta_c,pass,strong,fid_lower,dlambda_V,dlambda_used,retries"


def test_track_cli_columns(tmp_path):
    code, out = run_cli(tmp_path, "track", {"tracker": {"dlambda": 0.1}}, extra=["--oracle", "off"])
    assert code == 0
    lines = (out / "slices.csv").read_text().splitlines()
    assert lines[0] == "t,lambda,energy,grad_norm,sigma_H,sigma_D,delta_lambda,fidelity,gap,theta_dist"
    assert len(lines) == 11
    assert lines[-1].endswith(",,,")  # oracle columns empty


def test_bounds_cli(tmp_path, capsys):
    code, out = run_cli(tmp_path, "bounds", {"tracker": {"gamma": 1.0}})
    assert code == 0
    table = (out / "bounds.txt").read_text()
    row = next(line for line in table.splitlines() if line.startswith("r_PL"))
    assert float(row.split()[-1]) == pytest.approx(0.0589256, abs=1e-7)
    assert "S_min" in capsys.readouterr().out


def test_malformed_config_exit_64(tmp_path):
    code, out = run_cli(tmp_path, "track", {"tracker": {"eta": "fast"}})
    assert code == EXIT_CONFIG
    assert not out.exists()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["verify", "--config", str(bad), "--out", str(tmp_path / "b")]) == EXIT_CONFIG
    assert not (tmp_path / "b").exists()


def test_certification_failure_exit_2(tmp_path):
    cfg = {"model": {"family": "custom", "h_initial": [{"coefficient": 1, "string": "Z"}],
                     "h_final": [{"coefficient": 0.1, "string": "X"}]},
           "ansatz": {"generators": ["Y"], "theta0": [0.0]},
           "tracker": {"eta": 0.01, "K": 1, "dlambda": 0.05},
           "verifier": {"delta_c": 0.15, "retry_cap": 3}}
    code, out = run_cli(tmp_path, "verify", cfg)
    assert code == EXIT_CERTIFICATION
    assert json.loads((out / "summary.json").read_text())["completed"] is False


def test_stall_exit_3(tmp_path):
    # the Z generator cannot move |0>; sigma sits 5e-14 below delta_c / 2
    cfg = {"model": {"family": "custom", "h_initial": [{"coefficient": 1, "string": "X"}],
                     "h_final": [{"coefficient": 1, "string": "Z"}]},
           "ansatz": {"generators": ["Z"], "theta0": [0.0]},
           "tracker": {"dlambda": 0.1},
           "verifier": {"delta_c": 2.0 + 1e-13}}
    code, _ = run_cli(tmp_path, "verify", cfg, extra=["--oracle", "off"])
    assert code == EXIT_STALL


SMALL = {
    "track": {"model": {"family": "tfim", "params": {"n": 2, "template": "parity"}},
              "tracker": {"eta": 0.05, "K": 5, "dlambda": 0.05}},
    "verify": {"model": {"family": "random_2local", "params": {"n": 2, "n_terms": 3}},
               "tracker": {"eta": 0.05, "K": 5, "dlambda": 0.1}, "verifier": {"delta_c_scale": 0.9}},
    "bounds": {"model": {"family": "tfim", "params": {"n": 2, "template": "parity"}}},
    "oracle": {"model": {"family": "tfim", "params": {"n": 3}}, "oracle": {"grid": 51}},
    "bp-variance": {"bp": {"samples": 2000, "lambdas": [0.5]}},
    "shots": {"shots": {"trials": 3}},
    "sweep": {"sweep": {"command": "track", "parameter": "model.params.final_scale",
                        "values": [0.5, 1.0, 2.0]}},
}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_reproducible_outputs(tmp_path, command):
    cfg = dict(SMALL[command], seed=42)
    code_a, a = run_cli(tmp_path, command, cfg, out="a")
    code_b, b = run_cli(tmp_path, command, cfg, out="b")
    assert code_a == code_b
    assert bodies(a) and bodies(a) == bodies(b)


def test_parallel_sweep_matches_serial(tmp_path):
    base = dict(SMALL["sweep"])
    _, a = run_cli(tmp_path, "sweep", base, out="serial")
    par = {"sweep": dict(base["sweep"], workers=2)}
    _, b = run_cli(tmp_path, "sweep", par, out="par")
    assert bodies(a) == bodies(b)


def test_guarantee_track_within_bound(tmp_path):
    cfg = {"guarantee": True, "tracker": {"eta": "auto", "K": "auto", "dlambda": "auto", "gamma": 1.0}}
    code, out = run_cli(tmp_path, "track", cfg)
    summary = json.loads((out / "summary.json").read_text())
    assert code == 0 and summary["completed"]
    assert summary["n_updates"] == 136  # 34 slices of K = 4


def test_representability_instances():
    cfg = TrackerConfig(eta=0.05, k_steps=10, dlambda=0.05)
    pos = make_context(validate_config({"model": {"family": "tfim",
                                                  "params": {"n": 4, "j": 0.3, "depth": 1}}}))
    r = representability_check(pos, cfg)
    assert r.admissible and r.attempted and r.completed and r.consistent
    neg = make_context(validate_config({"model": {"family": "tfim", "params": {"n": 3, "depth": 1}}}))
    r = representability_check(neg, cfg)
    assert not r.admissible and not r.attempted


def test_oracle_cli_matches_direct(tmp_path):
    code, out = run_cli(tmp_path, "oracle", {"oracle": {"grid": 11}})
    rows = (out / "spectrum.csv").read_text().splitlines()
    assert rows[0] == "lambda,gap,E0,E1"
    lam, gap, e0, e1 = map(float, rows[6].split(","))
    assert lam == 0.5 and gap == pytest.approx(math.sqrt(2))
    po = PathOracle(build_model("single_qubit").path)
    assert e0 == pytest.approx(po.ground_energy(0.5)) and np.isclose(e1, -e0)
