import csv
import json

import numpy as np
import pytest

from designrl.agents import TrainingDiverged
from designrl.bounds import RandomDesignPolicy, estimate_bounds
from designrl.envs import CesProblem, LocationFindingProblem
from designrl.harness import (
    RESULTS_HEADER,
    apply_override,
    cmd_baseline,
    cmd_eval,
    cmd_sweep,
    cmd_train,
    config_hash,
    main,
    parse_override_arg,
    read_results_csv,
    run_config_from_dict,
    run_config_to_dict,
)
from designrl.prob import make_rng


def desk_doc(out, seeds=(0, 1), iterations=24):
    return {
        "problem": {"problem": "location_finding", "K": 1, "d": 1,
                    "horizon": 3, "L_train": 40},
        "agent": {"variant": "redq", "utd": 2, "batch_size": 8,
                  "hidden": 16, "buffer_capacity": 500},
        "seeds": list(seeds),
        "iterations": iterations,
        "eval": {"rollouts": 3, "L": 60, "overrides": []},
        "out": str(out),
        "chunk_size": 1000,
    }


def quiet(*_args, **_kw):
    pass


# ---------------------------------------------------------------------------
# config documents


def test_minimal_config_defaults_from_published_tables(tmp_path):
    doc = {
        "problem": {"problem": "location_finding"},
        "agent": {"variant": "redq"},
        "seeds": [0],
        "out": str(tmp_path),
    }
    rc = run_config_from_dict(doc)
    assert rc.problem.K == 2 and rc.problem.d == 2
    assert rc.problem.sigma == 0.5 and rc.problem.horizon == 30
    assert rc.L_train == 100_000
    assert rc.agent.gamma == 0.9 and rc.agent.utd == 64
    assert rc.agent.batch_size == 4096
    assert rc.eval.rollouts == 200 and rc.eval.L == 10_000
    assert rc.eval.sunrise_method == "B"


def test_config_errors_name_the_key_path(tmp_path):
    base = desk_doc(tmp_path)
    bad = dict(base)
    bad["problem"] = dict(base["problem"], wat=1)
    with pytest.raises(ValueError, match="problem.wat"):
        run_config_from_dict(bad)
    bad = dict(base)
    bad["agent"] = dict(base["agent"], learning="fast")
    with pytest.raises(ValueError, match="agent.learning"):
        run_config_from_dict(bad)
    with pytest.raises(ValueError, match="seeds"):
        run_config_from_dict(dict(base, seeds=[]))
    with pytest.raises(ValueError, match="agent.variant"):
        run_config_from_dict(dict(base, agent={}))
    bad = dict(base)
    bad["eval"] = {"sunrise_method": "Z"}
    with pytest.raises(ValueError, match="sunrise_method"):
        run_config_from_dict(bad)
    bad = dict(base)
    bad["eval"] = {"overrides": ["nu=0.1"]}
    with pytest.raises(ValueError, match="nu=0.1"):
        run_config_from_dict(bad)


def test_config_round_trip_and_hash_stability(tmp_path):
    rc = run_config_from_dict(desk_doc(tmp_path))
    doc = run_config_to_dict(rc)
    rc2 = run_config_from_dict(doc)
    assert config_hash(rc) == config_hash(rc2)
    rc3 = run_config_from_dict(dict(desk_doc(tmp_path), iterations=25))
    assert config_hash(rc) != config_hash(rc3)


def test_parse_override_arg():
    assert parse_override_arg("k=1,2,3") == ("k=1", "k=2", "k=3")
    assert parse_override_arg("nu=0.005,0.01") == ("nu=0.005", "nu=0.01")
    assert parse_override_arg(None) == ()
    assert parse_override_arg("none") == ()
    with pytest.raises(ValueError):
        parse_override_arg("k")


def test_apply_override_pins_observation_scaling():
    base = LocationFindingProblem(K=2)
    k3 = apply_override(base, "k=3")
    assert k3.K == 3
    assert k3.obs_range == base.obs_range
    assert k3.design_dim == base.design_dim
    assert apply_override(base, "none") is base
    ces = CesProblem()
    nu = apply_override(ces, "nu=0.01")
    assert nu.nu == 0.01 and nu.epsilon == ces.epsilon
    with pytest.raises(ValueError):
        apply_override(base, "nu=0.01")
    with pytest.raises(ValueError):
        apply_override(ces, "k=3")
    with pytest.raises(ValueError):
        apply_override(base, "sigma=1.0")


# ---------------------------------------------------------------------------
# train command


def test_train_writes_per_seed_artifacts_with_distinct_hashes(tmp_path):
    rc = run_config_from_dict(desk_doc(tmp_path / "run"))
    assert cmd_train(rc, log=quiet) == 0
    manifests = []
    for seed in (0, 1):
        sdir = tmp_path / "run" / str(seed)
        assert (sdir / "ckpt.npz").exists()
        assert (sdir / "curve.csv").exists()
        man = json.loads((sdir / "manifest.json").read_text())
        assert man["seed"] == seed
        assert man["config_sha256"] == config_hash(rc)
        assert man["env_steps"] == 24
        manifests.append(man)
    assert manifests[0]["ckpt_sha256"] != manifests[1]["ckpt_sha256"]


def test_train_reruns_reproduce_curves_byte_identically(tmp_path):
    rc1 = run_config_from_dict(desk_doc(tmp_path / "a"))
    rc2 = run_config_from_dict(desk_doc(tmp_path / "b"))
    cmd_train(rc1, log=quiet)
    cmd_train(rc2, log=quiet)
    for seed in (0, 1):
        a = (tmp_path / "a" / str(seed) / "curve.csv").read_bytes()
        b = (tmp_path / "b" / str(seed) / "curve.csv").read_bytes()
        assert a == b


def test_train_divergence_exits_nonzero(tmp_path, monkeypatch):
    rc = run_config_from_dict(desk_doc(tmp_path / "run", seeds=(0,)))

    def explode(*a, **kw):
        raise TrainingDiverged(12, "nan in critic loss")

    monkeypatch.setattr("designrl.harness.run.train", explode)
    assert cmd_train(rc, log=quiet) == 3


# ---------------------------------------------------------------------------
# eval command


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = run_config_from_dict(desk_doc(out))
    cmd_train(rc, log=quiet)
    return out, rc


def test_eval_results_header_and_pooling(trained_run, tmp_path):
    out, rc = trained_run
    rows = cmd_eval(str(out / "*" / "ckpt.npz"), ("k=1", "k=2"), 3, 60,
                    str(tmp_path), chunk_size=1000, log=quiet)
    text = (tmp_path / "results.csv").read_text().splitlines()
    assert text[0] == RESULTS_HEADER
    assert len(rows) == 4  # 2 overrides x 2 bounds
    for r in rows:
        assert r.algorithm == "redq"
        assert r.n == 6  # 2 seeds x 3 rollouts pooled
    # pooled stats equal direct computation over concatenated rollout values
    with open(tmp_path / "rollouts.csv", newline="") as fh:
        recs = list(csv.DictReader(fh))
    for r in rows:
        if r.bound != "spce":
            continue
        finals = [float(x["cumulative_reward"]) for x in recs
                  if x["override"] == r.override and int(x["step"]) == 3]
        v = np.array(finals)
        assert len(v) == r.n
        assert abs(v.mean() - r.mean) < 1e-12
        assert abs(v.std(ddof=1) / np.sqrt(len(v)) - r.stderr) < 1e-12
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"k=1", "k=2"}
    assert summary["k=1"]["spce"]["n"] == 6


def test_eval_is_deterministic_up_to_wall_clock(trained_run, tmp_path):
    out, rc = trained_run
    r1 = cmd_eval(str(out / "*" / "ckpt.npz"), (), 3, 60,
                  str(tmp_path / "e1"), chunk_size=1000, log=quiet)
    r2 = cmd_eval(str(out / "*" / "ckpt.npz"), (), 3, 60,
                  str(tmp_path / "e2"), chunk_size=1000, log=quiet)
    for a, b in zip(r1, r2):
        assert (a.algorithm, a.override, a.bound, a.mean, a.stderr, a.n) == \
               (b.algorithm, b.override, b.bound, b.mean, b.stderr, b.n)
    a = (tmp_path / "e1" / "rollouts.csv").read_bytes()
    b = (tmp_path / "e2" / "rollouts.csv").read_bytes()
    assert a == b


def test_eval_missing_checkpoints_is_error(tmp_path):
    with pytest.raises(ValueError, match="no checkpoints"):
        cmd_eval(str(tmp_path / "nope" / "*.npz"), (), 2, 50, str(tmp_path),
                 log=quiet)


def test_results_csv_round_trip(trained_run, tmp_path):
    out, rc = trained_run
    rows = cmd_eval(str(out / "*" / "ckpt.npz"), (), 2, 50,
                    str(tmp_path), chunk_size=1000, log=quiet)
    back = read_results_csv(tmp_path / "results.csv")
    assert back == rows


# ---------------------------------------------------------------------------
# baseline command


def test_baseline_rows_and_in_bounds_designs(trained_run, tmp_path):
    _, rc = trained_run
    rows = cmd_baseline(rc, out_dir=str(tmp_path), log=quiet)
    assert {r.algorithm for r in rows} == {"random"}
    cap = np.log(rc.eval.L + 1.0)
    spce = [r for r in rows if r.bound == "spce"][0]
    assert 0.0 < spce.mean <= cap
    with open(tmp_path / "rollouts.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            x = float(rec["design_0"])
            assert rc.problem.design_lo <= x <= rc.problem.design_hi


def test_baseline_cumulative_curve_grows_with_t():
    # aggregate increments are expected-nonnegative; with 500 rollouts the
    # mean curve should rise essentially monotonically
    prob = LocationFindingProblem(K=1, d=1, horizon=6)
    est, _ = estimate_bounds(RandomDesignPolicy(1), prob, 500, 100,
                             make_rng(5), chunk_size=1000)
    mean_curve = est["spce"].per_step.mean(axis=0)
    diffs = np.diff(mean_curve)
    assert np.all(diffs > -1e-3)
    assert mean_curve[-1] > mean_curve[0]


# ---------------------------------------------------------------------------
# sweep command


def test_sweep_merges_named_cells(tmp_path):
    base = desk_doc(tmp_path / "sweep", iterations=16)
    matrix = {"base": base,
              "cells": [{"name": "redq"},
                        {"name": "sac-1", "agent": {"variant": "sac"}}]}
    mpath = tmp_path / "matrix.json"
    mpath.write_text(json.dumps(matrix))
    rows = cmd_sweep(mpath, log=quiet)
    assert [r.algorithm for r in rows] == ["redq", "redq", "sac-1", "sac-1"]
    for name in ("redq", "sac-1"):
        for seed in (0, 1):
            assert (tmp_path / "sweep" / name / str(seed) / "ckpt.npz").exists()
    merged = read_results_csv(tmp_path / "sweep" / "results.csv")
    assert merged == rows


def test_sweep_rejects_anonymous_cells(tmp_path):
    mpath = tmp_path / "m.json"
    mpath.write_text(json.dumps({"base": desk_doc(tmp_path),
                                 "cells": [{"agent": {"variant": "sac"}}]}))
    with pytest.raises(ValueError, match="name"):
        cmd_sweep(mpath, log=quiet)


# ---------------------------------------------------------------------------
# cli


def test_cli_train_eval_cycle(tmp_path, capsys):
    cfg = desk_doc(tmp_path / "run", seeds=(0,), iterations=16)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(cfg_path)]) == 0
    assert main(["eval", "--ckpt", str(tmp_path / "run" / "*" / "ckpt.npz"),
                 "--rollouts", "2", "--L", "50",
                 "--out", str(tmp_path / "ev")]) == 0
    assert (tmp_path / "ev" / "results.csv").exists()
    assert main(["baseline", "--config", str(cfg_path), "--rollouts", "2",
                 "--L", "50", "--out", str(tmp_path / "bl")]) == 0
    capsys.readouterr()


def test_cli_reports_config_errors_as_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"problem": {"problem": "location_finding"},
                               "agent": {"variant": "warp"},
                               "seeds": [0], "out": "x"}))
    assert main(["train", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "warp" in err
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2
