import numpy as np
import pytest

from designrl.bounds import (
    BoundEstimate,
    NetPolicy,
    RandomDesignPolicy,
    bound_series_from_trace,
    estimate_bounds,
    history_loglik_matrix,
    rollout,
    snmc_estimate,
    spce_estimate,
    write_rollouts_csv,
    write_summary_json,
    RolloutTrace,
    _regroup,
)
from designrl.envs import (
    CesProblem,
    LocationFindingProblem,
    env_reset,
    env_step,
)
from designrl.policy import policy_init
from designrl.prob import make_rng, split


def loc():
    return LocationFindingProblem(horizon=8)


# ---------------------------------------------------------------------------
# rollouts


def test_rollout_shapes_and_design_bounds():
    p = loc()
    tr = rollout(RandomDesignPolicy(p.design_dim), p, make_rng(0))
    assert tr.designs.shape == (8, 2)
    assert tr.outcomes.shape == (8, 1)
    assert tr.theta0.shape == (4,)
    assert np.all(tr.designs >= -4.0) and np.all(tr.designs <= 4.0)


def test_rollout_deterministic():
    p = loc()
    a = rollout(RandomDesignPolicy(2), p, make_rng(1))
    b = rollout(RandomDesignPolicy(2), p, make_rng(1))
    assert np.array_equal(a.designs, b.designs)
    assert np.array_equal(a.outcomes, b.outcomes)
    assert np.array_equal(a.theta0, b.theta0)


def test_rollout_with_net_policy():
    p = loc()
    net = policy_init(make_rng(2), p.design_dim, p.outcome_dim)
    tr = rollout(NetPolicy(net, mode="sample"), p, make_rng(3))
    assert np.all(tr.designs > -4.0) and np.all(tr.designs < 4.0)
    tr_mean = rollout(NetPolicy(net, mode="mean"), p, make_rng(4))
    tr_mean2 = rollout(NetPolicy(net, mode="mean"), p, make_rng(4))
    assert np.array_equal(tr_mean.designs, tr_mean2.designs)


def test_net_policy_rejects_bad_mode():
    net = policy_init(make_rng(5), 2, 1)
    with pytest.raises(ValueError):
        NetPolicy(net, mode="greedy")


def test_rollout_horizon_override():
    p = loc()
    tr = rollout(RandomDesignPolicy(2), p, make_rng(6), horizon=3)
    assert tr.designs.shape == (3, 2)


# ---------------------------------------------------------------------------
# the likelihood matrix and bound series


def test_history_loglik_matrix_matches_scalar_loop():
    p = loc()
    tr = rollout(RandomDesignPolicy(2), p, make_rng(7))
    thetas = p.prior_sample(make_rng(8), 5)
    m = history_loglik_matrix(p, tr, thetas)
    for i in range(5):
        for t in range(8):
            want = p.log_lik(tr.outcomes[t], thetas[i], tr.designs[t])
            assert m[i, t] == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("problem_fn", [LocationFindingProblem, CesProblem])
def test_bound_series_matches_episode_rewards(problem_fn):
    # the environment's summed rewards and the estimator agree exactly on
    # the same theta bank: both telescope the same normalized weight
    p = problem_fn()
    L = 40
    for seed in range(4):
        env_rng = make_rng(seed)
        act_rng = make_rng(1000 + seed)
        state = env_reset(p, L, env_rng)
        rewards = []
        while not state.done:
            res = env_step(p, state, act_rng.uniform(-1, 1, p.design_dim), env_rng)
            rewards.append(res.reward)
        tr = RolloutTrace(
            theta0=state.thetas[0],
            designs=np.stack(state.designs),
            outcomes=np.stack(state.outcomes),
            stream=0,
        )
        series = bound_series_from_trace(p, tr, state.thetas[1:])
        cum = np.cumsum(rewards)
        assert np.max(np.abs(series.spce - cum)) < 1e-9


def test_bound_series_cap_and_ordering():
    p = loc()
    tr = rollout(RandomDesignPolicy(2), p, make_rng(9))
    thetas = p.prior_sample(make_rng(10), 100)
    series = bound_series_from_trace(p, tr, thetas)
    assert np.all(series.spce <= np.log(101.0) + 1e-12)
    # snmc >= spce - log(1 + 1/L) holds per step for a shared bank
    gap = np.log(1.0 + 1.0 / 100.0)
    assert np.all(series.snmc >= series.spce - gap - 1e-12)


# ---------------------------------------------------------------------------
# estimators


def test_estimate_deterministic_and_paired():
    p = loc()
    est1, traces1 = estimate_bounds(RandomDesignPolicy(2), p, 6, 50, make_rng(11))
    est2, traces2 = estimate_bounds(RandomDesignPolicy(2), p, 6, 50, make_rng(11))
    assert np.array_equal(est1["spce"].values, est2["spce"].values)
    assert np.array_equal(est1["snmc"].values, est2["snmc"].values)
    assert np.array_equal(traces1[0].designs, traces2[0].designs)
    # paired on the same rollouts
    assert np.all(est1["snmc"].values >= est1["spce"].values - np.log(1.02) - 1e-12)


@pytest.mark.parametrize("problem_fn", [LocationFindingProblem, CesProblem])
def test_estimate_chunk_size_invariance(problem_fn):
    p = problem_fn()
    vals = {}
    for chunk in (64, 1000, 100_000):
        est, _ = estimate_bounds(RandomDesignPolicy(p.design_dim), p, 3, 5000,
                                 make_rng(12), chunk_size=chunk)
        vals[chunk] = (est["spce"].values, est["snmc"].values)
    for chunk in (1000, 100_000):
        assert np.max(np.abs(vals[chunk][0] - vals[64][0])) < 1e-9
        assert np.max(np.abs(vals[chunk][1] - vals[64][1])) < 1e-9


def test_spce_values_capped_and_positive_mean():
    p = LocationFindingProblem()
    est = spce_estimate(RandomDesignPolicy(2), p, 20, 100, make_rng(13))
    assert np.all(est.values <= np.log(101.0) + 1e-9)
    assert 0.0 < est.mean < np.log(101.0)


def test_snmc_mean_dominates_spce_mean():
    p = LocationFindingProblem()
    est, _ = estimate_bounds(RandomDesignPolicy(2), p, 30, 1000, make_rng(14))
    assert est["snmc"].mean >= est["spce"].mean - 0.05


def test_estimate_monotone_in_bank_size():
    p = LocationFindingProblem(horizon=10)
    small = spce_estimate(RandomDesignPolicy(2), p, 40, 10, make_rng(15))
    big = spce_estimate(RandomDesignPolicy(2), p, 40, 1000, make_rng(15))
    assert big.mean >= small.mean - 2.0 * (small.stderr + big.stderr)


def test_estimate_statistics():
    p = loc()
    est = spce_estimate(RandomDesignPolicy(2), p, 12, 30, make_rng(16))
    assert est.n == 12
    assert est.mean == pytest.approx(est.values.mean())
    want = est.values.std(ddof=1) / np.sqrt(12)
    assert est.stderr == pytest.approx(want)
    one = BoundEstimate("spce", est.values[:1], est.per_step[:1], 30, 8)
    assert one.stderr == 0.0


def test_estimate_scores_provided_traces():
    p = loc()
    traces = [rollout(RandomDesignPolicy(2), p, r) for r in split(make_rng(17), 4)]
    est, got = estimate_bounds(RandomDesignPolicy(2), p, 4, 50, make_rng(18),
                               traces=list(traces))
    assert got is not None and len(got) == 4
    assert np.array_equal(got[0].designs, traces[0].designs)
    with pytest.raises(ValueError):
        estimate_bounds(RandomDesignPolicy(2), p, 3, 50, make_rng(19), traces=list(traces))


def test_estimate_validation():
    p = loc()
    with pytest.raises(ValueError):
        estimate_bounds(RandomDesignPolicy(2), p, 2, 0, make_rng(20))
    with pytest.raises(ValueError):
        estimate_bounds(RandomDesignPolicy(2), p, 2, 10, make_rng(21), chunk_size=0)


def test_per_step_series_monotone_final_column():
    p = loc()
    est, _ = estimate_bounds(RandomDesignPolicy(2), p, 5, 200, make_rng(22))
    assert np.array_equal(est["spce"].per_step[:, -1], est["spce"].values)
    assert est["spce"].per_step.shape == (5, 8)


def test_regroup_preserves_sequence():
    blocks = [np.arange(10).reshape(5, 2), np.arange(10, 16).reshape(3, 2)]
    out = list(_regroup(iter(blocks), 2))
    merged = np.concatenate(out, axis=0)
    assert np.array_equal(merged, np.arange(16).reshape(8, 2))
    assert all(b.shape[0] == 2 for b in out)
    out_big = list(_regroup(iter([np.arange(6).reshape(3, 2)]), 100))
    assert np.array_equal(out_big[0], np.arange(6).reshape(3, 2))


def test_rollouts_csv_columns_and_telescoping(tmp_path):
    import csv

    p = loc()
    est, traces = estimate_bounds(RandomDesignPolicy(2), p, 3, 100,
                                  make_rng(30))
    path = tmp_path / "rollouts.csv"
    write_rollouts_csv(path, traces, est["spce"], seeds=7)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0].keys()) == [
        "rollout_id", "seed", "step", "design_0", "design_1",
        "outcome", "reward", "cumulative_reward"]
    assert len(rows) == 3 * 8
    for rid in range(3):
        sub = [r for r in rows if int(r["rollout_id"]) == rid]
        assert [int(r["step"]) for r in sub] == list(range(1, 9))
        assert all(int(r["seed"]) == 7 for r in sub)
        run = np.cumsum([float(r["reward"]) for r in sub])
        cum = np.array([float(r["cumulative_reward"]) for r in sub])
        assert np.allclose(run, cum, atol=1e-9)
        assert np.allclose(cum, est["spce"].per_step[rid], atol=1e-12)
        assert np.allclose([float(r["design_0"]) for r in sub],
                           traces[rid].designs[:, 0], atol=1e-12)


def test_rollouts_csv_extra_label_columns(tmp_path):
    import csv

    p = loc()
    est, traces = estimate_bounds(RandomDesignPolicy(2), p, 2, 50,
                                  make_rng(31))
    path = tmp_path / "rollouts.csv"
    write_rollouts_csv(path, traces, est["spce"],
                       extra={"algorithm": "redq", "override": "none"})
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        first = next(reader)
    assert header[:2] == ["algorithm", "override"]
    assert first[:2] == ["redq", "none"]
    with pytest.raises(ValueError):
        write_rollouts_csv(path, traces[:1], est["spce"])


def test_summary_json_fields(tmp_path):
    import json

    p = loc()
    est, _ = estimate_bounds(RandomDesignPolicy(2), p, 4, 60, make_rng(32))
    path = tmp_path / "summary.json"
    write_summary_json(path, est)
    back = json.loads(path.read_text())
    for bound in ("spce", "snmc"):
        assert set(back[bound]) == {"mean", "stderr", "L", "T", "n"}
        assert back[bound]["L"] == 60
        assert back[bound]["T"] == 8
        assert back[bound]["n"] == 4
        assert back[bound]["mean"] == pytest.approx(est[bound].mean)
    write_summary_json(path, est["spce"])
    flat = json.loads(path.read_text())
    assert flat["n"] == 4 and "mean" in flat
