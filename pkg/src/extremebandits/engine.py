"""Trajectory simulation, running-minimum curves, and the regret clock.

The load-bearing contract: the cost observed at (trial, t) is the t-th
uniform of that trial's arm stream pushed through the chosen arm's inverse
CDF, and the policy's coin at (trial, t) is the t-th uniform of the trial's
policy stream. Every execution path below (sequential reference, vectorized
kernels, streaming evaluator) reads the same counter addresses, so they all
produce bit-identical trajectories and the worker count cannot change any
number. Monte Carlo reductions always run over fixed 64-trial chunks in
trial order for the same reason.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, expected_min, log_survival_at, _check_horizon
from .errors import BudgetExceeded, ContinuousArm
from .policies import (
    EpsGreedyMinPolicy,
    Policy,
    QuantileThresholdPolicy,
    UniformRandomPolicy,
)
from .rng import ARM_LANE, BOOT_LANE, POLICY_LANE, Coin, TrialStreams, generator_for

CHUNK_TRIALS = 64
BLOCK_STEPS = 4096
MAX_TREE_LEAVES = 10_000_000
WORKERS_ENV = "EXTREMEBANDITS_WORKERS"


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV, "")
    return max(1, int(env)) if env else 1


def parallel_map(fn, jobs: list, workers: int | None = None) -> list:
    """Order-preserving map, fanned out over processes when workers > 1."""
    w = worker_count(workers)
    if w <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * w))))


@dataclass(frozen=True)
class Trace:
    seed: int
    trial: int
    arms: np.ndarray
    values: np.ndarray
    best_so_far: np.ndarray


def run_trajectory(policy: Policy, arms: tuple[Distribution, ...], horizon: int, seed: int, trial: int = 0) -> Trace:
    """Sequential reference simulation of one trial."""
    _check_horizon(horizon)
    K = len(arms)
    arm_row = generator_for(seed, ARM_LANE, trial).random(horizon)
    pol_row = generator_for(seed, POLICY_LANE, trial).random(horizon)
    caches = [_icdf_cache(d) for d in arms]
    state = policy.initial_state(K)
    chosen = np.empty(horizon, dtype=np.int64)
    values = np.empty(horizon)
    for t in range(1, horizon + 1):
        arm = policy.choose(state, t, Coin(pol_row[t - 1]))
        value = _icdf_one(caches[arm - 1], arm_row[t - 1])
        chosen[t - 1] = arm
        values[t - 1] = value
        state = policy.observe(state, arm, value)
    return Trace(seed=seed, trial=trial, arms=chosen, values=values, best_so_far=np.minimum.accumulate(values))


def _icdf_cache(d: Distribution):
    """(support, cum) arrays for a discrete arm, None for uniform01."""
    if not d.is_discrete:
        return None
    from .distributions import icdf_arrays

    support, cum = icdf_arrays(d)
    return np.asarray(support), np.asarray(cum)


def _icdf_one(cache, u: float) -> float:
    if cache is None:
        return float(u)
    support, cum = cache
    return float(support[np.searchsorted(cum, u, side="left")])


def _icdf_block(cache, u: np.ndarray) -> np.ndarray:
    if cache is None:
        return u
    support, cum = cache
    return support[np.searchsorted(cum, u, side="left")]


# ---------------------------------------------------------------------------
# Vectorized kernels. Each produces the (n_trials x block) cost matrix for
# consecutive time blocks, reading exactly the addressed uniforms.


class _KernelBase:
    def __init__(self, policy, arms, seed, trials):
        self.policy = policy
        self.arms = arms
        self.K = len(arms)
        self.n = len(trials)
        self.caches = [_icdf_cache(d) for d in arms]
        self.arm_streams = TrialStreams(seed, ARM_LANE, trials)
        self._pol_streams = None
        self._seed = seed
        self._trials = trials
        self.t0 = 0  # steps already consumed

    def pol_block(self, bt):
        if self._pol_streams is None:
            self._pol_streams = TrialStreams(self._seed, POLICY_LANE, self._trials)
        return self._pol_streams.next_block(bt)

    def next_block(self, bt: int) -> np.ndarray:
        raise NotImplementedError


class _ScriptedKernel(_KernelBase):
    def __init__(self, policy, arms, seed, trials, script):
        super().__init__(policy, arms, seed, trials)
        self.script = script

    def next_block(self, bt):
        u = self.arm_streams.next_block(bt)
        piece = self.script[self.t0 : self.t0 + bt]
        self.t0 += bt
        v = np.empty_like(u)
        for k in range(self.K):
            cols = np.nonzero(piece == k + 1)[0]
            if cols.size:
                v[:, cols] = _icdf_block(self.caches[k], u[:, cols])
        return v


class _RandomKernel(_KernelBase):
    def next_block(self, bt):
        u = self.arm_streams.next_block(bt)
        p = self.pol_block(bt)
        self.t0 += bt
        arm = np.minimum((p * self.K).astype(np.int64), self.K - 1)
        v = np.empty_like(u)
        for k in range(self.K):
            mask = arm == k
            if np.any(mask):
                v[mask] = _icdf_block(self.caches[k], u[mask])
        return v


class _EpsGreedyKernel(_KernelBase):
    def __init__(self, policy, arms, seed, trials):
        super().__init__(policy, arms, seed, trials)
        self.bests = np.full((self.n, self.K), math.inf)
        self.rows = np.arange(self.n)

    def next_block(self, bt):
        eps = self.policy.epsilon
        u = self.arm_streams.next_block(bt)
        vk = np.stack([_icdf_block(self.caches[k], u) for k in range(self.K)])
        if eps > 0.0:
            p = self.pol_block(bt)
            explore = p < eps
            explore_arm = np.minimum((p / eps * self.K).astype(np.int64), self.K - 1)
        self.t0 += bt
        v = np.empty_like(u)
        for c in range(bt):
            arm = np.argmin(self.bests, axis=1)
            if eps > 0.0:
                np.copyto(arm, explore_arm[:, c], where=explore[:, c])
            vals = vk[arm, self.rows, c]
            v[:, c] = vals
            np.minimum.at(self.bests, (self.rows, arm), vals)
        return v


class _QuantileKernel(_KernelBase):
    def __init__(self, policy, arms, seed, trials):
        super().__init__(policy, arms, seed, trials)
        self.supports = [c[0] for c in self.caches]
        self.hists = [np.zeros((self.n, len(s)), dtype=np.int64) for s in self.supports]
        self.counts = np.zeros((self.n, self.K), dtype=np.int64)
        self.rows = np.arange(self.n)

    def _scores(self):
        q = self.policy.q
        scores = np.full((self.n, self.K), math.inf)
        for k in range(self.K):
            seen = self.counts[:, k] > 0
            if not np.any(seen):
                continue
            target = np.maximum(np.ceil(q * self.counts[:, k]), 1.0)
            cum = np.cumsum(self.hists[k], axis=1)
            idx = np.argmax(cum >= target[:, None], axis=1)
            vals = self.supports[k][idx]
            scores[seen, k] = vals[seen]
        return scores

    def next_block(self, bt):
        every = self.policy.explore_every
        u = self.arm_streams.next_block(bt)
        lidx = np.stack([np.searchsorted(c[1], u, side="left") for c in self.caches])
        v = np.empty_like(u)
        for c in range(bt):
            t = self.t0 + c + 1
            if (t - 1) % every == 0:
                arm = np.full(self.n, ((t - 1) // every) % self.K, dtype=np.int64)
            else:
                arm = np.argmin(self._scores(), axis=1)
            li = lidx[arm, self.rows, c]
            for k in range(self.K):
                mask = arm == k
                if np.any(mask):
                    np.add.at(self.hists[k], (self.rows[mask], li[mask]), 1)
                    v[mask, c] = self.supports[k][li[mask]]
            self.counts[self.rows, arm] += 1
        self.t0 += bt
        return v


class _GenericKernel(_KernelBase):
    """Per-trial sequential stepping; slow but covers every policy."""

    def __init__(self, policy, arms, seed, trials):
        super().__init__(policy, arms, seed, trials)
        self.states = [policy.initial_state(self.K) for _ in trials]

    def next_block(self, bt):
        u = self.arm_streams.next_block(bt)
        p = self.pol_block(bt)
        v = np.empty_like(u)
        for c in range(bt):
            t = self.t0 + c + 1
            for row in range(self.n):
                arm = self.policy.choose(self.states[row], t, Coin(p[row, c]))
                value = _icdf_one(self.caches[arm - 1], u[row, c])
                v[row, c] = value
                self.states[row] = self.policy.observe(self.states[row], arm, value)
        self.t0 += bt
        return v


def _make_kernel(policy, arms, seed, trials, t_max) -> _KernelBase:
    script = policy.arm_script(len(arms), t_max)
    if script is not None:
        return _ScriptedKernel(policy, arms, seed, trials, np.asarray(script, dtype=np.int64))
    if isinstance(policy, UniformRandomPolicy):
        return _RandomKernel(policy, arms, seed, trials)
    if isinstance(policy, EpsGreedyMinPolicy):
        return _EpsGreedyKernel(policy, arms, seed, trials)
    if isinstance(policy, QuantileThresholdPolicy) and all(d.is_discrete for d in arms):
        return _QuantileKernel(policy, arms, seed, trials)
    return _GenericKernel(policy, arms, seed, trials)


# ---------------------------------------------------------------------------
# Monte Carlo curves.


@dataclass(frozen=True)
class MinCurve:
    """E[min of the first t costs] for t = 1..t_max.

    estimates is nonincreasing (exact values, or the running minimum of the
    raw Monte Carlo means); raw keeps the uncorrected means; se has the
    per-t standard errors (zeros in exact mode).
    """

    t_max: int
    estimates: np.ndarray
    raw: np.ndarray
    se: np.ndarray
    mode: str
    n_trials: int
    seed: int | None


def _curve_chunk(job):
    policy, arms, seed, start, size, t_max, want_events = job
    kernel = _make_kernel(policy, arms, seed, range(start, start + size), t_max)
    sums = np.zeros(t_max)
    sumsq = np.zeros(t_max)
    events = [([], []) for _ in range(size)] if want_events else None
    carry = np.full(size, math.inf)
    t0 = 0
    while t0 < t_max:
        bt = min(BLOCK_STEPS, t_max - t0)
        v = kernel.next_block(bt)
        np.minimum.accumulate(v, axis=1, out=v)
        np.minimum(v, carry[:, None], out=v)
        sums[t0 : t0 + bt] += v.sum(axis=0)
        sumsq[t0 : t0 + bt] += (v * v).sum(axis=0)
        if want_events:
            prev = np.column_stack([carry, v[:, :-1]])
            rows, cols = np.nonzero(v < prev)
            for r, c in zip(rows, cols):
                events[r][0].append(t0 + c + 1)
                events[r][1].append(v[r, c])
        carry = v[:, -1].copy()
        t0 += bt
    return sums, sumsq, events


def _curve_and_events(policy, arms, t_max, n_trials, seed, workers, want_events):
    _check_horizon(t_max)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    jobs = []
    start = 0
    while start < n_trials:
        size = min(CHUNK_TRIALS, n_trials - start)
        jobs.append((policy, arms, seed, start, size, t_max, want_events))
        start += size
    sums = np.zeros(t_max)
    sumsq = np.zeros(t_max)
    events = [] if want_events else None
    for s, sq, ev in parallel_map(_curve_chunk, jobs, workers):
        sums += s
        sumsq += sq
        if want_events:
            events.extend(
                (np.array(ts, dtype=np.int64), np.array(vs)) for ts, vs in ev
            )
    raw = sums / n_trials
    if n_trials > 1:
        var = np.maximum(sumsq - n_trials * raw * raw, 0.0) / (n_trials - 1)
        se = np.sqrt(var / n_trials)
    else:
        se = np.zeros(t_max)
    curve = MinCurve(
        t_max=t_max,
        estimates=np.minimum.accumulate(raw),
        raw=raw,
        se=se,
        mode="monte_carlo",
        n_trials=n_trials,
        seed=seed,
    )
    return curve, events


def estimate_min_curve(
    policy: Policy,
    arms: tuple[Distribution, ...],
    t_max: int,
    n_trials: int = 1000,
    seed: int = 0,
    workers: int | None = None,
) -> MinCurve:
    """Monte Carlo running-minimum curve over n_trials independent trials."""
    curve, _ = _curve_and_events(policy, arms, t_max, n_trials, seed, workers, False)
    return curve


@dataclass(frozen=True)
class StreamResult:
    raw: np.ndarray
    crossed_at: int | None
    t_evaluated: int


def stream_curve(
    policy: Policy,
    arms: tuple[Distribution, ...],
    n_trials: int,
    seed: int,
    t_max: int,
    stop_threshold: float | None = None,
    trial_offset: int = 0,
) -> StreamResult:
    """Single-pass mean curve that can stop as soon as it dips to a threshold.

    All trials advance together through time blocks (no trial chunking), so
    the result is independent of any worker setting by construction. raw is
    truncated at the block where the crossing happened.
    """
    _check_horizon(t_max)
    kernel = _make_kernel(policy, arms, seed, range(trial_offset, trial_offset + n_trials), t_max)
    pieces = []
    carry = np.full(n_trials, math.inf)
    t0 = 0
    while t0 < t_max:
        bt = min(BLOCK_STEPS, t_max - t0)
        v = kernel.next_block(bt)
        np.minimum.accumulate(v, axis=1, out=v)
        np.minimum(v, carry[:, None], out=v)
        mean = v.sum(axis=0) / n_trials
        pieces.append(mean)
        if stop_threshold is not None:
            hits = np.nonzero(mean <= stop_threshold)[0]
            if hits.size:
                raw = np.concatenate(pieces)
                return StreamResult(raw=raw, crossed_at=t0 + int(hits[0]) + 1, t_evaluated=t0 + bt)
        carry = v[:, -1].copy()
        t0 += bt
    return StreamResult(raw=np.concatenate(pieces), crossed_at=None, t_evaluated=t_max)


# ---------------------------------------------------------------------------
# Exact curves.


def exact_min_curve(policy: Policy, arms: tuple[Distribution, ...], t_max: int) -> MinCurve:
    """Exact E[min over t] curve for scripted or deterministic policies.

    Scripted policies get the closed form: P[min >= v] is a product of
    per-draw survivals, integrated piecewise between atoms (uniform01 draws
    contribute exact (1-v)^n factors on each piece). Deterministic adaptive
    policies are evaluated by enumerating the outcome tree, which needs
    discrete arms and a leaf budget.
    """
    _check_horizon(t_max)
    script = policy.arm_script(len(arms), t_max)
    if script is not None:
        raw = _scripted_exact_curve(np.asarray(script, dtype=np.int64), arms, t_max)
    elif policy.is_deterministic:
        raw = _tree_exact_curve(policy, arms, t_max)
    else:
        raise ValueError("exact curves need a scripted or deterministic policy")
    return MinCurve(
        t_max=t_max,
        estimates=np.minimum.accumulate(raw),
        raw=raw,
        se=np.zeros(t_max),
        mode="exact",
        n_trials=0,
        seed=None,
    )


def _scripted_exact_curve(script, arms, t_max):
    breaks = sorted({v for d in arms if d.is_discrete for v in d.support} | {1.0})
    w = np.array(breaks)
    left = np.concatenate([[0.0], w[:-1]])
    log_s = []
    for d in arms:
        if d.is_discrete:
            log_s.append(np.array([log_survival_at(d, v) for v in w]))
        else:
            log_s.append(None)
    log_d = np.zeros(len(w))
    a = 1.0 - left
    b = 1.0 - w
    pow_a = a.copy()
    pow_b = b.copy()
    n_uniform = 0
    raw = np.empty(t_max)
    for t in range(1, t_max + 1):
        k = script[t - 1] - 1
        if log_s[k] is None:
            n_uniform += 1
            pow_a *= a
            pow_b *= b
        else:
            log_d += log_s[k]
        raw[t - 1] = float(np.sum(np.exp(log_d) * (pow_a - pow_b)) / (n_uniform + 1))
    return raw


def _tree_exact_curve(policy, arms, t_max):
    for d in arms:
        if not d.is_discrete:
            raise ContinuousArm("tree evaluation needs discrete arms")
    widest = max(len(d.support) for d in arms)
    if widest**t_max > MAX_TREE_LEAVES:
        raise BudgetExceeded(f"outcome tree would exceed {MAX_TREE_LEAVES} leaves")
    raw = np.zeros(t_max)
    K = len(arms)

    def walk(state, t, log_p, cur_min):
        arm = policy.choose(state, t + 1, None)
        d = arms[arm - 1]
        for v, lv in zip(d.support, d.log_probs):
            child_min = v if v < cur_min else cur_min
            child_logp = log_p + lv
            raw[t] += math.exp(child_logp) * child_min
            if t + 1 < t_max:
                walk(policy.observe(state, arm, v), t + 1, child_logp, child_min)

    walk(policy.initial_state(K), 0, 0.0, math.inf)
    return raw


# ---------------------------------------------------------------------------
# Regret clock.


@dataclass(frozen=True)
class RegretReport:
    """First time the policy's curve catches the oracle's value at horizon T.

    t_prime is the crossing time within [1, cap], None if the curve never
    got there; ratio = t_prime / horizon, inf when t_prime is None. ci_low /
    ci_high bracket t_prime by bootstrap percentiles in Monte Carlo mode.
    """

    horizon: int
    cap: int
    mode: str
    oracle_value: float
    t_prime: int | None
    ratio: float
    n_trials: int
    seed: int | None
    ci_low: int | None
    ci_high: int | None
    curve: MinCurve


def crossing_time(values: np.ndarray, threshold: float) -> int | None:
    """First 1-based index where the running min of values dips to threshold
    plus relative slack 1e-12, absorbing last-ulp rounding in exact curves."""
    slack = 1e-12 * max(1.0, abs(threshold))
    hits = np.nonzero(np.minimum.accumulate(values) <= threshold + slack)[0]
    return int(hits[0]) + 1 if hits.size else None


def extreme_regret(
    policy: Policy,
    arms: tuple[Distribution, ...],
    horizon: int,
    oracle_value: float | None = None,
    mode: str = "monte_carlo",
    n_trials: int = 1000,
    seed: int = 0,
    cap: int | None = None,
    bootstrap: int = 1000,
    workers: int | None = None,
) -> RegretReport:
    """Time-to-match ratio against the best single-arm value at the horizon.

    oracle_value defaults to the exact best single-armed expectation. The
    policy curve is evaluated out to cap (default 4*K*horizon); if it never
    reaches the oracle value there, the report carries the infinity marker.
    """
    _check_horizon(horizon)
    if oracle_value is None:
        oracle_value = min(expected_min(d, horizon) for d in arms)
    if cap is None:
        cap = 4 * len(arms) * horizon
    if cap < 1:
        raise ValueError("cap must be >= 1")

    ci_low = ci_high = None
    if mode == "exact":
        curve = exact_min_curve(policy, arms, cap)
        t_prime = crossing_time(curve.raw, oracle_value)
        n_used, seed_used = 0, None
    elif mode == "monte_carlo":
        want_events = bootstrap > 0 and n_trials > 1
        curve, events = _curve_and_events(policy, arms, cap, n_trials, seed, workers, want_events)
        t_prime = crossing_time(curve.raw, oracle_value)
        if want_events:
            ci_low, ci_high = _bootstrap_crossing_ci(events, n_trials, cap, oracle_value, seed, bootstrap)
        n_used, seed_used = n_trials, seed
    else:
        raise ValueError(f"mode must be exact or monte_carlo, got {mode!r}")

    return RegretReport(
        horizon=horizon,
        cap=cap,
        mode=mode,
        oracle_value=oracle_value,
        t_prime=t_prime,
        ratio=(t_prime / horizon) if t_prime is not None else math.inf,
        n_trials=n_used,
        seed=seed_used,
        ci_low=ci_low,
        ci_high=ci_high,
        curve=curve,
    )


def _bootstrap_crossing_ci(events, n_trials, cap, threshold, seed, n_boot):
    """Percentile bootstrap of the crossing time, resampling whole trials.

    Trial curves are kept as change-point deltas, so one resample is a
    weighted scatter-add followed by a cumulative sum. All resampling
    randomness comes from the dedicated bootstrap lane of the seed.
    """
    trial_ids = np.concatenate([np.full(len(ts), m, dtype=np.int64) for m, (ts, _) in enumerate(events)])
    ts = np.concatenate([t for t, _ in events])
    deltas = np.concatenate(
        [np.diff(vs, prepend=0.0) if len(vs) else vs for _, vs in events]
    )
    slack = 1e-12 * max(1.0, abs(threshold))
    rng = generator_for(seed, BOOT_LANE, 0)
    counts = rng.multinomial(n_trials, np.full(n_trials, 1.0 / n_trials), size=n_boot)
    crossings = np.empty(n_boot)
    for i in range(n_boot):
        weights = counts[i][trial_ids] * deltas
        mean = np.cumsum(np.bincount(ts - 1, weights=weights, minlength=cap)) / n_trials
        hits = np.nonzero(mean <= threshold + slack)[0]
        crossings[i] = hits[0] + 1 if hits.size else math.inf
    lo, hi = np.quantile(crossings, [0.025, 0.975], method="nearest")
    return (
        int(lo) if math.isfinite(lo) else None,
        int(hi) if math.isfinite(hi) else None,
    )


@dataclass(frozen=True)
class GapReport:
    """Horizon-T comparison against the single-armed oracle: the additive
    excess gap = policy - oracle (>= 0 up to noise) and the ratio."""

    horizon: int
    mode: str
    policy_value: float
    oracle_value: float
    oracle_arm: int
    gap: float
    ratio: float
    n_trials: int
    seed: int | None


def legacy_gap_ratio(
    policy: Policy,
    arms: tuple[Distribution, ...],
    horizon: int,
    mode: str = "exact",
    n_trials: int = 1000,
    seed: int = 0,
    workers: int | None = None,
) -> GapReport:
    from .oracles import single_armed_oracle

    oracle = single_armed_oracle(arms, horizon)
    if mode == "exact":
        value = float(exact_min_curve(policy, arms, horizon).raw[-1])
        n_used, seed_used = 0, None
    elif mode == "monte_carlo":
        value = float(estimate_min_curve(policy, arms, horizon, n_trials, seed, workers).raw[-1])
        n_used, seed_used = n_trials, seed
    else:
        raise ValueError(f"mode must be exact or monte_carlo, got {mode!r}")
    if oracle.value > 0.0:
        ratio = value / oracle.value
    else:
        ratio = math.inf if value > 0.0 else math.nan
    return GapReport(
        horizon=horizon,
        mode=mode,
        policy_value=value,
        oracle_value=oracle.value,
        oracle_arm=oracle.arm,
        gap=value - oracle.value,
        ratio=ratio,
        n_trials=n_used,
        seed=seed_used,
    )
