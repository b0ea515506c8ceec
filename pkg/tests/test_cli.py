import json
from pathlib import Path

import pytest

from srpt_ht.cli import RbmConfig, SimulateConfig, main
from srpt_ht.errors import ConfigInvalid

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).parent / "fixtures"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_walk_example(capsys):
    code, out, _ = run(["walk", "--j", "2", "--l", "3"], capsys)
    assert code == 0
    assert "exact 0.333333 (1/3)" in out and "mc 0.3" in out


def test_walk_needs_both_levels(capsys):
    code, _, err = run(["walk", "--j", "2"], capsys)
    assert code == 2 and "--l" in err


def test_dist_example(capsys):
    code, out, _ = run(["dist", "--law", "exponential:1", "--r", "10"], capsys)
    assert code == 0
    assert "c_r=3.88972" in out and "S(c_r)=10 " in out


def test_dist_json(tmp_path, capsys):
    assert main(["dist", "--law", "weibull:1,2", "--r", "10", "100", "--format", "json", "--out-dir", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "dist.json").read_text())["rows"]
    assert [r["r"] for r in rows] == [10.0, 100.0]
    assert rows[0]["S_c_r"] == pytest.approx(10.0, rel=1e-9)


def test_simulate_hand_trace_matches_fixture(tmp_path, capsys):
    code, _, _ = run(["simulate", "--config", str(ROOT / "configs" / "hand_trace.json"), "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "trajectory.csv").read_bytes() == (FIXTURES / "hand_trace_trajectory.csv").read_bytes()
    assert (tmp_path / "events.jsonl").read_bytes() == (FIXTURES / "hand_trace_events.jsonl").read_bytes()


def test_hand_trace_fixture_rows():
    # values traced by hand: Q, W and the cutoff/truncated processes at a = 1, 2
    rows = (FIXTURES / "hand_trace_trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,Q,W,Q_a@1,Q_a@2,W_a@1,W_a@2,Z_a@1,Z_a@2,tau@1,tau@2"
    assert rows[3] == "1,1,2,0,1,0,2,0,1,1,1"
    assert rows[6] == "2.5,2,1,2,2,1,1,1,2,2,1"
    assert rows[7] == "3,1,0.5,1,1,0.5,0.5,0,1,2,1"
    assert rows[8] == "3.5,0,0,0,0,0,0,0,0,3.5,3.5"


def test_simulate_byte_identical_and_seed_override(tmp_path, capsys):
    cfg = ROOT / "configs" / "simulate_r20.json"

    def files(name, *extra):
        d = tmp_path / name
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(d), "--quiet", *extra]) == 0
        return {p.name: p.read_bytes() for p in d.iterdir()}

    a, b, c = files("a"), files("b"), files("c", "--seed", "2")
    assert a == b
    assert a["scaled.csv"] != c["scaled.csv"]
    assert sorted(a) == ["primitives.json", "scaled.csv", "trajectory.csv"]
    assert a["scaled.csv"].startswith(b"# scaled r=20,c_r=")


def test_simulate_json_format(tmp_path, capsys):
    cfg = ROOT / "configs" / "simulate_r20.json"
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path), "--format", "json", "--quiet"]) == 0
    obj = json.loads((tmp_path / "trajectory.json").read_text())
    assert obj["scaled"]["r"] == 20 and len(obj["Z_a"]) == len(obj["times"])


@pytest.mark.parametrize(
    "cfg, msg",
    [
        ({"law": "exponential:1", "r": 10, "colour": 1}, "colour"),
        ({"law": "exponential:1"}, "'r'"),
        ({"r": 10}, "exactly one"),
        ({"law": "uniform:0,2", "r": 10}, "unbounded"),
        ({"law": "exponential:1", "r": 10, "a_grid": [2, 1]}, "a_grid"),
    ],
)
def test_simulate_strict_config(tmp_path, capsys, cfg, msg):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(["simulate", "--config", str(path)], capsys)
    assert code == 2 and msg in err


def test_missing_and_broken_config(tmp_path, capsys):
    code, _, err = run(["sweep", "--config", str(tmp_path / "nope.json")], capsys)
    assert code == 2 and "cannot read" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["sweep", "--config", str(bad)], capsys)
    assert code == 2 and "invalid JSON" in err


def test_sweep_outputs(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(
        json.dumps(
            {"law": "exponential:1", "kappa": -0.5, "r_list": [8, 12], "reps": 4, "a_grid": [0.5, 2],
             "seed": 1, "reference_paths": 200, "reference_steps_per_unit": 64}
        )
    )
    code, out, _ = run(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "o"), "--workers", "1"], capsys)
    assert code == 0 and "violations: W_sandwich=0" in out
    assert (tmp_path / "o" / "report.csv").read_text().startswith("r,functional,statistic,value\n")
    assert (tmp_path / "o" / "trends.csv").exists()
    code, _, _ = run(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "j"), "--format", "json", "--workers", "1"], capsys)
    rep = json.loads((tmp_path / "j" / "report.json").read_text())
    assert code == 0 and rep["hard_fail"] is False and rep["config"]["seed"] == 1


def test_sweep_hard_failure_exit_code(tmp_path, capsys, monkeypatch):
    from srpt_ht import cli

    class Broken:
        hard_fail = True
        per_r, trends = [], {}
        violations = {"W_sandwich": 1}

        def to_csv(self):
            return ""

    monkeypatch.setattr(cli, "run_ensemble", lambda cfg, workers=None: Broken())
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"law": "exponential:1", "r_list": [8], "reps": 2}))
    code, _, _ = run(["sweep", "--config", str(cfg)], capsys)
    assert code == 1


def test_rbm_flags_and_config(tmp_path, capsys):
    code, out, _ = run(["rbm", "--paths", "500", "--steps", "256", "--out-dir", str(tmp_path), "--format", "json"], capsys)
    assert code == 0 and "sqrt(2T/pi) = 0.797885" in out
    s = json.loads((tmp_path / "rbm.json").read_text())
    assert s["n"] == 500 and s["params"]["sigma"] == 1.0
    assert RbmConfig.from_json({"law": "exponential:1", "kappa": -0.5}).params().sigma == pytest.approx(2**0.5)
    with pytest.raises(ConfigInvalid):
        RbmConfig.from_json({"sigma": 1, "law": "exponential:1"})
    with pytest.raises(ConfigInvalid):
        RbmConfig.from_json({"sigma": 1, "paths": 10})


def test_verify_subset_and_exit_code(tmp_path, capsys, monkeypatch):
    code, out, _ = run(["verify", "--only", "reference,scaling.c_over_r_decreasing", "--scale", "0.05"], capsys)
    assert code == 0 and "PASS  reference.walk_monotone" in out
    code, out, _ = run(["verify", "--list"], capsys)
    names = out.split()
    assert "engine.cutoff_sandwich" in names and len(names) == len(set(names))
    code, _, err = run(["verify", "--only", "nothing"], capsys)
    assert code == 2

    from srpt_ht import checks

    def failing(rng, scale):
        return False, "forced"

    monkeypatch.setattr(checks, "_REGISTRY", [checks._Check("x.fail", "x", True, failing)])
    code, out, _ = run(["verify", "--out-dir", str(tmp_path), "--format", "json"], capsys)
    assert code == 1 and "FAIL  x.fail" in out
    assert json.loads((tmp_path / "verify.json").read_text())["checks"][0]["passed"] is False


def test_verify_covers_every_module():
    from srpt_ht.checks import check_names

    modules = {n.split(".")[0] for n in check_names()}
    assert modules == {"distributions", "paths", "engine", "scaling", "reference", "harness", "cli"}


def test_simulate_config_round_trip():
    cfg = SimulateConfig.from_json(json.loads((ROOT / "configs" / "hand_trace.json").read_text()))
    assert cfg.primitives.n_arrivals == 2 and cfg.coupled and cfg.a_grid == (1.0, 2.0)
