"""Arm environments, reward sampling and per-agent local statistics."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid experiment parameters.

    ``path`` names the offending configuration key when one is known.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvariantViolation(RuntimeError):
    """A state invariant that the simulator guarantees was broken."""


# ---------------------------------------------------------------- distributions


class RewardDistribution:
    """Reward law supported on [0, 1], sampled by inverse transform.

    Every sampler maps one uniform draw to one reward. The engine relies on
    this so that a single uniform per agent per round yields common random
    numbers across policies.
    """

    kind: str = ""
    mean: float

    def quantile(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.quantile(rng.random()))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Bernoulli(RewardDistribution):
    p: float
    kind = "bernoulli"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or math.isnan(self.p):
            raise ConfigError(f"Bernoulli parameter must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return float(self.p)

    def quantile(self, u):
        return np.where(np.asarray(u) < self.p, 1.0, 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class PointMass(RewardDistribution):
    value: float
    kind = "point"

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ConfigError(f"point mass must lie in [0, 1], got {self.value}")

    @property
    def mean(self) -> float:
        return float(self.value)

    def quantile(self, u):
        return np.full(np.shape(u), float(self.value))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class TruncatedGeneric(RewardDistribution):
    """Arbitrary law given by its quantile function and declared mean.

    Quantile outputs are clipped into [0, 1]; the declared mean is trusted,
    so it must be the mean of the clipped law.
    """

    ppf: Callable = field(compare=False)
    declared_mean: float
    name: str = "generic"
    params: dict = field(default_factory=dict)
    kind = "generic"

    def __post_init__(self):
        if not 0.0 <= self.declared_mean <= 1.0:
            raise ConfigError(f"declared mean must lie in [0, 1], got {self.declared_mean}")

    @property
    def mean(self) -> float:
        return float(self.declared_mean)

    def quantile(self, u):
        return np.clip(np.asarray(self.ppf(u), dtype=float), 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"kind": self.name, **self.params}


def beta_distribution(a: float, b: float) -> TruncatedGeneric:
    from scipy import stats

    if a <= 0 or b <= 0:
        raise ConfigError("beta parameters must be positive")
    law = stats.beta(a, b)
    return TruncatedGeneric(law.ppf, a / (a + b), "beta", {"a": a, "b": b})


def _uniform_ppf(u, low, high):
    return low + (high - low) * np.asarray(u)


def uniform_distribution(low: float, high: float) -> TruncatedGeneric:
    if not 0.0 <= low <= high <= 1.0:
        raise ConfigError("uniform bounds must satisfy 0 <= low <= high <= 1")
    return TruncatedGeneric(
        functools.partial(_uniform_ppf, low=low, high=high), (low + high) / 2, "uniform",
        {"low": low, "high": high},
    )


# ---------------------------------------------------------------- environment


def compute_gaps(means: Sequence[float]) -> list[float]:
    """Gap of every arm to the best mean; arms need not be sorted."""
    if len(means) == 0:
        raise ConfigError("at least one arm is required")
    best = max(means)
    return [best - m for m in means]


@dataclass
class ArmEnvironment:
    """The M arms shared by all agents.

    ``overrides`` maps an agent id to its own list of distributions; each
    override must keep the shared per-arm means.
    """

    arms: list
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.arms:
            raise ConfigError("at least one arm is required", "env.arms")
        for agent, dists in self.overrides.items():
            if len(dists) != len(self.arms):
                raise ConfigError("override must list every arm", f"env.overrides.{agent}")
            for k, (d, base) in enumerate(zip(dists, self.arms)):
                if not math.isclose(d.mean, base.mean, abs_tol=1e-12):
                    raise ConfigError(
                        f"override mean {d.mean} differs from shared mean {base.mean}",
                        f"env.overrides.{agent}[{k}]",
                    )

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> list[float]:
        return [d.mean for d in self.arms]

    @property
    def gaps(self) -> list[float]:
        return compute_gaps(self.means)

    @property
    def best_arm(self) -> int:
        means = self.means
        return means.index(max(means))

    def arms_for(self, agent: int) -> list:
        return self.overrides.get(agent, self.arms)

    @classmethod
    def bernoulli(cls, means: Sequence[float]) -> "ArmEnvironment":
        return cls([Bernoulli(float(p)) for p in means])


def sample_reward(env: ArmEnvironment, arm: int, rng: np.random.Generator, agent: int = 0) -> float:
    if not 0 <= arm < env.n_arms:
        raise ConfigError(f"arm index {arm} out of range for {env.n_arms} arms")
    return env.arms_for(agent)[arm].sample(rng)


# ---------------------------------------------------------------- agent state


def check_kappa(kappa: float, path: str = "kappa") -> float:
    if not 1.0 <= kappa < 2.0:
        raise ConfigError(f"kappa must lie in [1, 2), got {kappa}", path)
    return float(kappa)


@dataclass
class AgentState:
    agent_id: int
    counts: np.ndarray
    sums: np.ndarray
    kappa: float = 1.0
    consensus_estimate: Optional[np.ndarray] = None

    @property
    def means(self) -> np.ndarray:
        return self.sums / self.counts

    @property
    def n_arms(self) -> int:
        return len(self.counts)


def initialize_agent(agent_id: int, env: ArmEnvironment, kappa: float,
                     rng: np.random.Generator) -> AgentState:
    """Pull every arm once; draws exactly M uniforms from ``rng`` in arm order."""
    check_kappa(kappa)
    u = rng.random(env.n_arms)
    rewards = np.array([d.quantile(x) for d, x in zip(env.arms_for(agent_id), u)], dtype=float)
    return AgentState(agent_id, np.ones(env.n_arms, dtype=np.int64), rewards, kappa)


def record_pull(state: AgentState, arm: int, reward: float) -> AgentState:
    if not 0.0 <= reward <= 1.0:
        raise InvariantViolation(
            f"reward {reward} outside [0, 1] for agent {state.agent_id}, arm {arm}"
        )
    counts = state.counts.copy()
    sums = state.sums.copy()
    counts[arm] += 1
    sums[arm] += reward
    return replace(state, counts=counts, sums=sums)
