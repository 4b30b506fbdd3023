"""Simulation engine: kernels, curves, crossing clocks, determinism."""

import math

import numpy as np
import pytest

import extremebandits as xb
from extremebandits.engine import CHUNK_TRIALS
from extremebandits.rng import POLICY_LANE

HALF_VS_RISKY = (
    xb.point_mass(0.5),
    xb.make_discrete([(0.0, 0.25), (1.0, 0.75)]),
)
UNIFORM_VS_SURE = (xb.uniform01(), xb.point_mass(1.0))


def _manual_raw(policy, arms, t_max, n, seed):
    rows = [xb.run_trajectory(policy, arms, t_max, seed, trial).best_so_far for trial in range(n)]
    return np.vstack(rows).sum(axis=0) / n


KERNEL_POLICIES = [
    xb.RoundRobinPolicy(),
    xb.FixedArmPolicy(arm=2),
    xb.SequenceThenArmPolicy(prefix=(2, 2, 1), tail_arm=1),
    xb.UniformRandomPolicy(),
    xb.EpsGreedyMinPolicy(epsilon=0.1),
    xb.EpsGreedyMinPolicy(epsilon=0.0),
    xb.EpsGreedyMinPolicy(epsilon=1.0),
    xb.QuantileThresholdPolicy(q=0.25, explore_every=4),
]


@pytest.mark.parametrize("policy", KERNEL_POLICIES, ids=lambda p: f"{p.name}-{p.to_record()['params']}")
def test_kernel_matches_sequential_bitwise(policy):
    # One chunk (n <= CHUNK_TRIALS), so the kernel's per-column pairwise sum
    # is byte-for-byte the vstack sum over the sequential reference rows.
    n, t_max, seed = 48, 50, 12
    assert n <= CHUNK_TRIALS
    for arms in (HALF_VS_RISKY, UNIFORM_VS_SURE):
        curve = xb.estimate_min_curve(policy, arms, t_max, n_trials=n, seed=seed)
        assert np.array_equal(curve.raw, _manual_raw(policy, arms, t_max, n, seed))


def test_generic_kernel_matches_sequential_bitwise():
    # Quantile policy on a continuous arm falls back to the per-trial kernel.
    policy = xb.QuantileThresholdPolicy(q=0.5, explore_every=3)
    n, t_max, seed = 16, 30, 4
    curve = xb.estimate_min_curve(policy, UNIFORM_VS_SURE, t_max, n_trials=n, seed=seed)
    assert np.array_equal(curve.raw, _manual_raw(policy, UNIFORM_VS_SURE, t_max, n, seed))

    tab = xb.TablePolicy(
        alphabet=(0.0, 0.5, 1.0),
        mapping={(): 2, (0,): 1, (1,): 2, (2,): 1},
        depth=2,
        default_arm=2,
    )
    curve_t = xb.estimate_min_curve(tab, HALF_VS_RISKY, t_max, n_trials=n, seed=seed)
    assert np.array_equal(curve_t.raw, _manual_raw(tab, HALF_VS_RISKY, t_max, n, seed))


def test_kernel_block_boundary():
    # A horizon past one 4096-step block must splice blocks seamlessly.
    policy = xb.RoundRobinPolicy()
    n, t_max, seed = 8, 4100, 9
    curve = xb.estimate_min_curve(policy, UNIFORM_VS_SURE, t_max, n_trials=n, seed=seed)
    assert np.array_equal(curve.raw, _manual_raw(policy, UNIFORM_VS_SURE, t_max, n, seed))


def test_worker_fanout_is_invisible(monkeypatch):
    policy = xb.EpsGreedyMinPolicy(epsilon=0.2)
    kw = dict(t_max=80, n_trials=200, seed=5)
    one = xb.estimate_min_curve(policy, HALF_VS_RISKY, workers=1, **kw)
    two = xb.estimate_min_curve(policy, HALF_VS_RISKY, workers=2, **kw)
    assert np.array_equal(one.raw, two.raw)
    assert np.array_equal(one.se, two.se)
    assert np.array_equal(one.estimates, two.estimates)

    monkeypatch.setenv(xb.engine.WORKERS_ENV, "2")
    via_env = xb.estimate_min_curve(policy, HALF_VS_RISKY, **kw)
    assert np.array_equal(one.raw, via_env.raw)


def test_worker_count_resolution(monkeypatch):
    monkeypatch.delenv(xb.engine.WORKERS_ENV, raising=False)
    assert xb.worker_count() == 1
    monkeypatch.setenv(xb.engine.WORKERS_ENV, "3")
    assert xb.worker_count() == 3
    assert xb.worker_count(5) == 5  # explicit argument beats the env
    assert xb.worker_count(0) == 1


def test_estimates_are_running_min_and_se_sane():
    policy = xb.UniformRandomPolicy()
    curve = xb.estimate_min_curve(policy, UNIFORM_VS_SURE, 60, n_trials=192, seed=2)
    assert np.all(np.diff(curve.estimates) <= 0)
    assert np.array_equal(curve.estimates, np.minimum.accumulate(curve.raw))
    assert np.all(curve.se >= 0)
    # Minimum of a point mass draw is deterministic: se must be exactly 0.
    det = xb.estimate_min_curve(xb.FixedArmPolicy(arm=2), UNIFORM_VS_SURE, 5, n_trials=64, seed=2)
    assert np.array_equal(det.se, np.zeros(5))
    assert np.array_equal(det.raw, np.ones(5))


def test_exact_curve_uniform_tail():
    # One sure draw of 1, then uniforms: E[min over t] = 1/t.
    policy = xb.SequenceThenArmPolicy(prefix=(2,), tail_arm=1)
    curve = xb.exact_min_curve(policy, UNIFORM_VS_SURE, 5)
    want = np.array([1.0, 1 / 2, 1 / 3, 1 / 4, 1 / 5])
    np.testing.assert_allclose(curve.raw, want, rtol=1e-12)
    assert curve.mode == "exact"
    assert np.array_equal(curve.se, np.zeros(5))


def test_exact_curve_alternating_arms():
    # Round robin on (uniform, sure 1): t draws hold ceil(t/2) uniforms.
    curve = xb.exact_min_curve(xb.RoundRobinPolicy(), UNIFORM_VS_SURE, 8)
    want = np.array([1.0 / (math.ceil(t / 2) + 1) for t in range(1, 9)])
    np.testing.assert_allclose(curve.raw, want, rtol=1e-12)


def test_exact_curve_matches_expected_min():
    for arms in (HALF_VS_RISKY, UNIFORM_VS_SURE):
        for k, d in enumerate(arms, start=1):
            curve = xb.exact_min_curve(xb.FixedArmPolicy(arm=k), arms, 7)
            want = [xb.expected_min(d, t) for t in range(1, 8)]
            np.testing.assert_allclose(curve.raw, want, rtol=1e-12)


def _brute_curve(policy, arms, t_max):
    """Per-depth E[min] by full outcome-tree enumeration (policy API only)."""
    out = np.zeros(t_max)

    def rec(state, t, logp, best):
        arm = policy.choose(state, t)
        d = arms[arm - 1]
        for v, lp in zip(d.support, d.log_probs):
            nb = min(best, v)
            out[t - 1] += math.exp(logp + lp) * nb
            if t < t_max:
                rec(policy.observe(state, arm, v), t + 1, logp + lp, nb)

    rec(policy.initial_state(len(arms)), 1, 0.0, math.inf)
    return out


def test_tree_exact_curve_matches_brute_enumeration():
    # eps=0 greedy is deterministic but value-adaptive: tree walker territory.
    for policy in (
        xb.EpsGreedyMinPolicy(epsilon=0.0),
        xb.QuantileThresholdPolicy(q=0.5, explore_every=2),
    ):
        curve = xb.exact_min_curve(policy, HALF_VS_RISKY, 6)
        np.testing.assert_allclose(curve.raw, _brute_curve(policy, HALF_VS_RISKY, 6), rtol=1e-12)


def test_exact_curve_rejects_randomized_policies():
    with pytest.raises(ValueError):
        xb.exact_min_curve(xb.UniformRandomPolicy(), HALF_VS_RISKY, 4)
    with pytest.raises(ValueError):
        xb.exact_min_curve(xb.EpsGreedyMinPolicy(epsilon=0.5), HALF_VS_RISKY, 4)


def test_stream_curve_matches_estimate_bitwise():
    policy = xb.EpsGreedyMinPolicy(epsilon=0.1)
    n, t_max, seed = 64, 200, 11
    est = xb.estimate_min_curve(policy, HALF_VS_RISKY, t_max, n_trials=n, seed=seed)
    stream = xb.stream_curve(policy, HALF_VS_RISKY, n_trials=n, seed=seed, t_max=t_max)
    assert np.array_equal(stream.raw, est.raw)
    assert stream.crossed_at is None
    assert stream.t_evaluated == t_max


def test_stream_curve_early_stop_matches_crossing_time():
    policy = xb.EpsGreedyMinPolicy(epsilon=0.1)
    n, t_max, seed, thr = 64, 300, 11, 0.4
    est = xb.estimate_min_curve(policy, HALF_VS_RISKY, t_max, n_trials=n, seed=seed)
    want = xb.crossing_time(est.raw, thr)
    stream = xb.stream_curve(
        policy, HALF_VS_RISKY, n_trials=n, seed=seed, t_max=t_max, stop_threshold=thr
    )
    assert want is not None
    assert stream.crossed_at == want
    assert len(stream.raw) == stream.t_evaluated >= stream.crossed_at


def test_stream_trial_offset_shifts_streams():
    policy = xb.UniformRandomPolicy()
    a = xb.stream_curve(policy, UNIFORM_VS_SURE, n_trials=32, seed=0, t_max=20, trial_offset=0)
    b = xb.stream_curve(policy, UNIFORM_VS_SURE, n_trials=32, seed=0, t_max=20, trial_offset=32)
    assert not np.array_equal(a.raw, b.raw)
    # Offset trials are the same trials the plain engine would label 32..63.
    manual = np.vstack(
        [xb.run_trajectory(policy, UNIFORM_VS_SURE, 20, 0, trial).best_so_far for trial in range(32, 64)]
    ).sum(axis=0) / 32
    assert np.array_equal(b.raw, manual)


def test_crossing_time_semantics():
    vals = np.array([0.9, 0.5, 0.5, 0.2])
    assert xb.crossing_time(vals, 0.5) == 2
    assert xb.crossing_time(vals, 0.1) is None
    assert xb.crossing_time(vals, 0.9) == 1
    # Relative slack absorbs last-ulp misses.
    assert xb.crossing_time(np.array([0.5 + 1e-13]), 0.5) == 1
    # Non-monotone input is handled through the running minimum.
    assert xb.crossing_time(np.array([0.9, 0.1, 0.8]), 0.2) == 2


def test_extreme_regret_exact_bernoulli_then_sure():
    # Sure 1 first, then the {0, 1} coin: curve p^(t-1) vs oracle p^T, so the
    # match time is exactly T + 1 at every horizon.
    p = 0.5
    arms = (xb.make_discrete([(0.0, 1 - p), (1.0, p)]), xb.point_mass(1.0))
    policy = xb.SequenceThenArmPolicy(prefix=(2,), tail_arm=1)
    for horizon in range(1, 21):
        rep = xb.extreme_regret(policy, arms, horizon, mode="exact")
        assert rep.oracle_value == pytest.approx(p**horizon, rel=1e-12)
        assert rep.t_prime == horizon + 1
        assert rep.ratio == pytest.approx((horizon + 1) / horizon, rel=1e-12)
        assert rep.ci_low is None and rep.ci_high is None


def test_extreme_regret_exact_uniform_case():
    policy = xb.SequenceThenArmPolicy(prefix=(2,), tail_arm=1)
    for horizon in (10, 100):
        rep = xb.extreme_regret(policy, UNIFORM_VS_SURE, horizon, mode="exact")
        assert rep.oracle_value == pytest.approx(1.0 / (horizon + 1), rel=1e-12)
        assert rep.t_prime == horizon + 1
        assert rep.ratio == pytest.approx((horizon + 1) / horizon, rel=1e-12)


def test_extreme_regret_never_matching_is_inf():
    rep = xb.extreme_regret(xb.FixedArmPolicy(arm=2), UNIFORM_VS_SURE, 10, mode="exact")
    assert rep.t_prime is None
    assert rep.ratio == math.inf
    assert rep.cap == 4 * 2 * 10


def test_extreme_regret_monte_carlo_with_bootstrap():
    policy = xb.RoundRobinPolicy()
    rep = xb.extreme_regret(
        policy, UNIFORM_VS_SURE, 10, mode="monte_carlo", n_trials=400, seed=3, bootstrap=400
    )
    # Alternating draws need about twice the horizon of uniforms.
    assert rep.t_prime is not None
    assert 15 <= rep.t_prime <= 25
    assert rep.ci_low is not None and rep.ci_high is not None
    assert rep.ci_low <= rep.t_prime <= rep.ci_high
    again = xb.extreme_regret(
        policy, UNIFORM_VS_SURE, 10, mode="monte_carlo", n_trials=400, seed=3, bootstrap=400
    )
    assert again.t_prime == rep.t_prime
    assert (again.ci_low, again.ci_high) == (rep.ci_low, rep.ci_high)


def test_extreme_regret_honors_explicit_oracle_and_cap():
    rep = xb.extreme_regret(
        xb.FixedArmPolicy(arm=1), UNIFORM_VS_SURE, 5, oracle_value=0.25, mode="exact", cap=3
    )
    # E[min of t uniforms] = 1/(t+1) <= 1/4 first at t = 3.
    assert rep.t_prime == 3
    assert rep.cap == 3
    with pytest.raises(ValueError):
        xb.extreme_regret(xb.FixedArmPolicy(arm=1), UNIFORM_VS_SURE, 5, cap=0)


def test_legacy_gap_ratio_uniform_case():
    policy = xb.SequenceThenArmPolicy(prefix=(2,), tail_arm=1)
    rep = xb.legacy_gap_ratio(policy, UNIFORM_VS_SURE, 10, mode="exact")
    assert rep.policy_value == pytest.approx(0.1, rel=1e-12)
    assert rep.oracle_value == pytest.approx(1.0 / 11.0, rel=1e-12)
    assert rep.oracle_arm == 1
    assert rep.ratio == pytest.approx(1.1, rel=1e-12)
    assert rep.gap == pytest.approx(1.0 / 110.0, rel=1e-9)


def test_legacy_gap_ratio_zero_oracle():
    arms = (xb.point_mass(0.0), xb.point_mass(1.0))
    rep = xb.legacy_gap_ratio(xb.FixedArmPolicy(arm=2), arms, 3, mode="exact")
    assert rep.ratio == math.inf
    rep0 = xb.legacy_gap_ratio(xb.FixedArmPolicy(arm=1), arms, 3, mode="exact")
    assert math.isnan(rep0.ratio)


def test_run_trajectory_replays_through_policy_api():
    policy = xb.EpsGreedyMinPolicy(epsilon=0.3)
    arms = HALF_VS_RISKY
    seed, trial, horizon = 7, 2, 40
    trace = xb.run_trajectory(policy, arms, horizon, seed, trial)
    assert np.array_equal(trace.best_so_far, np.minimum.accumulate(trace.values))
    state = policy.initial_state(len(arms))
    for t in range(1, horizon + 1):
        rng = xb.RngStream(seed=seed, trial=trial, t=t, lane=POLICY_LANE)
        assert policy.choose(state, t, rng) == trace.arms[t - 1]
        state = policy.observe(state, int(trace.arms[t - 1]), float(trace.values[t - 1]))
    assert state.counts == tuple(np.bincount(trace.arms, minlength=3)[1:])
    assert state.best == trace.best_so_far[-1]
