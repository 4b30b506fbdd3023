"""Arm-selection policies.

A policy is a (possibly randomized) map from the observed history to the next
arm. State is carried functionally: ``observe`` returns a new PolicyState, so
a state can be replayed or forked without aliasing. Randomized policies draw
nothing themselves: ``choose`` receives the address of this (trial, t)'s
policy coin and must be a pure function of (state, t, that coin), which is
what keeps sequential and vectorized execution bit-identical.

Arm indices are 1-based everywhere. All tie-breaks go to the lowest arm
index.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import UnknownPolicy
from .rng import RngStream

_UNSEEN = math.inf


@dataclass(frozen=True)
class PolicyState:
    """Observation summary after t-1 plays.

    counts/best_per_arm are per-arm; best is the global best-so-far (inf
    before the first observation). memory holds policy-specific extras.
    """

    t: int
    counts: tuple[int, ...]
    best_per_arm: tuple[float, ...]
    best: float
    memory: object = None

    @property
    def K(self) -> int:
        return len(self.counts)


class Policy:
    """Base policy; subclasses override choose() and possibly the hooks."""

    name: str = "?"

    def initial_state(self, K: int) -> PolicyState:
        return PolicyState(
            t=1, counts=(0,) * K, best_per_arm=(_UNSEEN,) * K, best=_UNSEEN, memory=self._initial_memory(K)
        )

    def _initial_memory(self, K: int):
        return None

    def choose(self, state: PolicyState, t: int, rng: RngStream | None = None) -> int:
        raise NotImplementedError

    def observe(self, state: PolicyState, arm: int, value: float) -> PolicyState:
        counts = list(state.counts)
        counts[arm - 1] += 1
        bests = list(state.best_per_arm)
        if value < bests[arm - 1]:
            bests[arm - 1] = value
        return replace(
            state,
            t=state.t + 1,
            counts=tuple(counts),
            best_per_arm=tuple(bests),
            best=min(state.best, value),
            memory=self._update_memory(state, arm, value),
        )

    def _update_memory(self, state: PolicyState, arm: int, value: float):
        return state.memory

    def arm_script(self, K: int, horizon: int) -> np.ndarray | None:
        """Arm sequence for t=1..horizon if value- and coin-independent."""
        return None

    @property
    def is_deterministic(self) -> bool:
        """True when choose() never reads its rng argument."""
        return False

    def to_record(self) -> dict:
        return {"name": self.name, "params": {}}


def _lowest_argmin(values: Sequence[float]) -> int:
    best_idx = 0
    for idx in range(1, len(values)):
        if values[idx] < values[best_idx]:
            best_idx = idx
    return best_idx + 1


@dataclass(frozen=True)
class RoundRobinPolicy(Policy):
    name = "round_robin"

    def choose(self, state, t, rng=None):
        return (t - 1) % state.K + 1

    def arm_script(self, K, horizon):
        return (np.arange(horizon) % K) + 1

    @property
    def is_deterministic(self):
        return True


@dataclass(frozen=True)
class UniformRandomPolicy(Policy):
    name = "uniform_random"

    def choose(self, state, t, rng=None):
        return rng.randint(state.K)


@dataclass(frozen=True)
class EpsGreedyMinPolicy(Policy):
    """Exploit the arm holding the smallest best-so-far; explore w.p. epsilon.

    One coin u serves both decisions: explore iff u < eps, and the explored
    arm is 1 + floor(K u / eps), so eps=1 is pathwise uniform_random. Unseen
    arms count as +inf, hence eps=0 greedily locks onto the first arm played.
    """

    epsilon: float = 0.1

    name = "eps_greedy_min"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise UnknownPolicy(f"epsilon must be in [0, 1], got {self.epsilon}")

    def choose(self, state, t, rng=None):
        if self.epsilon > 0.0:
            u = rng.uniform()
            if u < self.epsilon:
                return min(int(u / self.epsilon * state.K), state.K - 1) + 1
        return _lowest_argmin(state.best_per_arm)

    @property
    def is_deterministic(self):
        return self.epsilon == 0.0

    def to_record(self):
        return {"name": self.name, "params": {"epsilon": self.epsilon}}


@dataclass(frozen=True)
class QuantileThresholdPolicy(Policy):
    """Play the arm with the lowest empirical q-quantile of observed values.

    The score of an arm with sorted observations x_(1..n) is x_(ceil(q n)),
    +inf while unseen. Every explore_every-th step (t = 1, 1+m, 1+2m, ...)
    is a forced round-robin exploration so scores keep converging; all other
    steps exploit. Deterministic by construction.
    """

    q: float = 0.25
    explore_every: int = 10

    name = "quantile_threshold"

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise UnknownPolicy(f"q must be in (0, 1), got {self.q}")
        if self.explore_every < 1:
            raise UnknownPolicy(f"explore_every must be >= 1, got {self.explore_every}")

    def _initial_memory(self, K):
        return ((),) * K

    def _update_memory(self, state, arm, value):
        per_arm = list(state.memory)
        values = list(per_arm[arm - 1])
        bisect.insort(values, value)
        per_arm[arm - 1] = tuple(values)
        return tuple(per_arm)

    def _score(self, values: tuple[float, ...]) -> float:
        if not values:
            return _UNSEEN
        k = max(1, math.ceil(self.q * len(values)))
        return values[k - 1]

    def choose(self, state, t, rng=None):
        if (t - 1) % self.explore_every == 0:
            return ((t - 1) // self.explore_every) % state.K + 1
        return _lowest_argmin([self._score(v) for v in state.memory])

    @property
    def is_deterministic(self):
        return True

    def to_record(self):
        return {"name": self.name, "params": {"q": self.q, "explore_every": self.explore_every}}


@dataclass(frozen=True)
class FixedArmPolicy(Policy):
    arm: int = 1

    name = "fixed_arm"

    def __post_init__(self):
        if self.arm < 1:
            raise UnknownPolicy(f"arm indices are 1-based, got {self.arm}")

    def choose(self, state, t, rng=None):
        return self.arm

    def arm_script(self, K, horizon):
        return np.full(horizon, self.arm, dtype=int)

    @property
    def is_deterministic(self):
        return True

    def to_record(self):
        return {"name": self.name, "params": {"arm": self.arm}}


@dataclass(frozen=True)
class SequenceThenArmPolicy(Policy):
    """Play a fixed prefix of arms, then one arm forever."""

    prefix: tuple[int, ...] = ()
    tail_arm: int = 1

    name = "arm_sequence"

    def __post_init__(self):
        if self.tail_arm < 1 or any(a < 1 for a in self.prefix):
            raise UnknownPolicy("arm indices are 1-based")

    def choose(self, state, t, rng=None):
        if t <= len(self.prefix):
            return self.prefix[t - 1]
        return self.tail_arm

    def arm_script(self, K, horizon):
        script = np.full(horizon, self.tail_arm, dtype=int)
        head = min(len(self.prefix), horizon)
        script[:head] = self.prefix[:head]
        return script

    @property
    def is_deterministic(self):
        return True

    def to_record(self):
        return {"name": self.name, "params": {"prefix": list(self.prefix), "tail_arm": self.tail_arm}}


@dataclass(frozen=True)
class TablePolicy(Policy):
    """Explicit history-to-arm lookup over a finite value alphabet.

    Arm choices are deterministic, so a history is just the sequence of
    observed values, encoded as indices into ``alphabet``. ``mapping`` must
    be total over histories up to ``depth``. Observations outside the
    alphabet fall through to ``default_arm`` forever; the table's behavior
    on such branches is immaterial to the set computations it exists for,
    but a policy has to answer on every reachable history.
    """

    alphabet: tuple[float, ...] = ()
    mapping: dict = None  # dict[tuple[int, ...], int]
    depth: int = 0
    default_arm: int = 1

    name = "table"

    def __post_init__(self):
        if self.mapping is None:
            object.__setattr__(self, "mapping", {})
        missing = [h for h in _histories(len(self.alphabet), self.depth) if h not in self.mapping]
        if missing:
            raise UnknownPolicy(f"table not total: missing {len(missing)} histories, e.g. {missing[0]}")

    def _initial_memory(self, K):
        return ()

    def _update_memory(self, state, arm, value):
        try:
            idx = self.alphabet.index(value)
        except ValueError:
            idx = -1
        return state.memory + (idx,)

    def choose(self, state, t, rng=None):
        history = state.memory
        if -1 in history:
            return self.default_arm
        if len(history) >= self.depth:
            return self.default_arm
        return self.mapping[history]

    @property
    def is_deterministic(self):
        return True

    def to_record(self):
        return {
            "name": self.name,
            "params": {
                "alphabet": list(self.alphabet),
                "depth": self.depth,
                "default_arm": self.default_arm,
                "entries": [{"history": list(h), "arm": a} for h, a in sorted(self.mapping.items())],
            },
        }


def table_from_record(params: dict) -> TablePolicy:
    mapping = {tuple(e["history"]): e["arm"] for e in params["entries"]}
    return TablePolicy(
        alphabet=tuple(params["alphabet"]),
        mapping=mapping,
        depth=params["depth"],
        default_arm=params.get("default_arm", 1),
    )


def _histories(alphabet_size: int, depth: int):
    """All value-index histories of length < depth (the table's domain)."""
    import itertools

    for d in range(depth):
        yield from itertools.product(range(alphabet_size), repeat=d)


def enumerate_tables(K: int, alphabet: Sequence[float], depth: int, default_arm: int = 1):
    """Every total TablePolicy over the alphabet up to depth; K^nodes of them."""
    import itertools

    nodes = list(_histories(len(alphabet), depth))
    for arms in itertools.product(range(1, K + 1), repeat=len(nodes)):
        yield TablePolicy(
            alphabet=tuple(alphabet),
            mapping=dict(zip(nodes, arms)),
            depth=depth,
            default_arm=default_arm,
        )


_BASELINES = ("round_robin", "uniform_random", "eps_greedy_min", "quantile_threshold")


def baseline(name: str, params: dict | None = None) -> Policy:
    """The four reference baselines; raises UnknownPolicy on anything else."""
    if name not in _BASELINES:
        raise UnknownPolicy(f"unknown baseline {name!r}; expected one of {_BASELINES}")
    return make_policy(name, params)


def make_policy(name: str, params: dict | None = None) -> Policy:
    """Factory over every named policy, including the structural ones."""
    params = dict(params or {})
    try:
        if name == "round_robin":
            return RoundRobinPolicy(**params)
        if name == "uniform_random":
            return UniformRandomPolicy(**params)
        if name == "eps_greedy_min":
            return EpsGreedyMinPolicy(**params)
        if name == "quantile_threshold":
            return QuantileThresholdPolicy(**params)
        if name == "fixed_arm":
            return FixedArmPolicy(**params)
        if name == "arm_sequence":
            if "prefix" in params:
                params["prefix"] = tuple(params["prefix"])
            return SequenceThenArmPolicy(**params)
        if name == "table":
            return table_from_record(params)
    except TypeError as exc:
        raise UnknownPolicy(f"bad params for policy {name!r}: {exc}") from exc
    raise UnknownPolicy(f"unknown policy {name!r}")
