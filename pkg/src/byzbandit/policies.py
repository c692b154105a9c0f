"""Arm-selection rules.

Every deterministic rule breaks ties toward the lowest arm index. The
``*_array`` helpers are the batched forms the engine calls; they apply the
same floating-point operations in the same order as the scalar rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .core import AgentState, ConfigError
from .resilience import FilterOutcome, confidence_bonus, confidence_bonus_array, sequential_sum, trim_sorted


@dataclass(frozen=True)
class ResilientUCB:
    tuned: bool = False
    kind = "resilient_ucb"


@dataclass(frozen=True)
class SingleUCB1:
    kind = "single_ucb1"


@dataclass(frozen=True)
class ResilientGreedy:
    kind = "resilient_greedy"


@dataclass(frozen=True)
class SoftmaxTop3:
    temperature: float = 1.0
    kind = "softmax_top3"

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError("softmax temperature must be positive", "policy.temperature")


@dataclass(frozen=True)
class RunningConsensusTrimmed:
    """Running-consensus estimate with a trimmed mean; arms chosen by UCB1 on z.

    Kept only to reproduce the bias of consensus-style estimators under
    attack. It exchanges estimates z rather than (count, mean) pairs.
    """

    kind = "running_consensus"


PolicySpec = Union[ResilientUCB, SingleUCB1, ResilientGreedy, SoftmaxTop3, RunningConsensusTrimmed]


def _first_argmax(values: Sequence[float]) -> int:
    best = 0
    for k in range(1, len(values)):
        if values[k] > values[best]:
            best = k
    return best


def select_arm_resilient_ucb(outcomes: Sequence[FilterOutcome], state: AgentState, t: int,
                             tuned: bool = False) -> int:
    index = [
        o.z + confidence_bonus(t, int(n), o.g, tuned)
        for o, n in zip(outcomes, state.counts)
    ]
    return _first_argmax(index)


def select_arm_single_ucb1(state: AgentState, t: int) -> int:
    means = state.means
    index = [float(means[k]) + confidence_bonus(t, int(state.counts[k]), 1.0)
             for k in range(state.n_arms)]
    return _first_argmax(index)


def select_arm_greedy(outcomes: Sequence[FilterOutcome]) -> int:
    return _first_argmax([o.z for o in outcomes])


def _softmax_pick(z_top: np.ndarray, temperature: float, u: float) -> int:
    w = np.exp((z_top - z_top[0]) / temperature)
    cum = np.cumsum(w)
    return int(np.argmax(u * cum[-1] < cum))


def top3(z: Sequence[float]) -> list[int]:
    """Indices of the three largest values, larger first, lower index on ties."""
    return sorted(range(len(z)), key=lambda k: (-z[k], k))[:3]


def select_arm_softmax_top3(outcomes: Sequence[FilterOutcome], temperature: float,
                            rng: np.random.Generator) -> int:
    """Sample among the top-3 arms by z with softmax weights; one uniform per call."""
    z = [o.z for o in outcomes]
    top = top3(z)
    u = rng.random()
    return top[_softmax_pick(np.array([z[k] for k in top]), temperature, u)]


def running_consensus_update(state: AgentState, arm: int, trimmed_reports_z: Sequence[float],
                             new_mean: float, old_mean: float) -> AgentState:
    """One running-consensus step for ``arm``.

    The agent's own estimate is averaged with the retained neighbor values,
    then the innovation ``new_mean - old_mean`` is added. With no retained
    values the estimate is carried over plus the innovation.
    """
    if state.consensus_estimate is None:
        raise ConfigError("agent carries no consensus estimate")
    z = state.consensus_estimate.copy()
    acc = 0.0
    for v in sorted(trimmed_reports_z):
        acc += v
    z[arm] = (z[arm] + acc) / (len(trimmed_reports_z) + 1) + (new_mean - old_mean)
    return replace(state, consensus_estimate=z)


# ---------------------------------------------------------------- batched


def ucb_choice(z: np.ndarray, counts: np.ndarray, g, t: int, tuned: bool = False) -> np.ndarray:
    return np.argmax(z + confidence_bonus_array(t, counts, g, tuned), axis=-1)


def greedy_choice(z: np.ndarray) -> np.ndarray:
    return np.argmax(z, axis=-1)


def softmax_top3_choice(z: np.ndarray, u: np.ndarray, temperature: float) -> np.ndarray:
    """Batched softmax-top-3 draw; ``u`` has the shape of ``z`` minus the arm axis."""
    order = np.argsort(-z, axis=-1, kind="stable")[..., :3]
    z_top = np.take_along_axis(z, order, axis=-1)
    w = np.exp((z_top - z_top[..., :1]) / temperature)
    cum = np.cumsum(w, axis=-1)
    pick = np.argmax(u[..., None] * cum[..., -1:] < cum, axis=-1)
    return np.take_along_axis(order, pick[..., None], axis=-1)[..., 0]


def consensus_average(own_z: np.ndarray, rep_z: np.ndarray, in_mask: np.ndarray, f: int) -> np.ndarray:
    """Average of own estimate and trimmed neighbor estimates (senders last)."""
    _, sorted_values, keep = trim_sorted(rep_z, np.broadcast_to(in_mask, rep_z.shape), f)
    acc = sequential_sum(sorted_values, keep)
    return (own_z + acc) / (keep.sum(axis=-1) + 1)
