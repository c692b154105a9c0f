"""Consistency and trimmed-mean filtering of neighbor reports.

The scalar functions work on one (agent, arm) pair and mirror the filter
step by step. ``filter_arrays`` is the vectorized form used by the engine;
both sum the retained means in ascending (mean, sender) order so they agree
bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .core import AgentState, InvariantViolation


def clamp_mean(value) -> np.ndarray:
    """Ingestion clamp for reported means: NaN -> 0, then clip to [0, 1]."""
    return np.clip(np.nan_to_num(value, nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0)


@dataclass(frozen=True)
class Report:
    sender: int
    arm: int
    count: int
    mean: float

    def __post_init__(self):
        object.__setattr__(self, "count", max(int(self.count), 0))
        object.__setattr__(self, "mean", float(clamp_mean(float(self.mean))))


@dataclass(frozen=True)
class FilterOutcome:
    a_set: frozenset
    b_set: frozenset
    z: float
    g: float


def _mean_of(report: Union[Report, float]) -> float:
    return report.mean if isinstance(report, Report) else float(report)


def consistency_filter(self_count: int, kappa: float, reports: Iterable[Report]) -> set:
    return {r.sender for r in reports if kappa * r.count >= self_count}


def trimmed_mean_filter(a_set: Iterable[int], reports: Mapping[int, Union[Report, float]], f: int) -> set:
    """Drop the f smallest and f largest reported means; ties go by sender id."""
    ranked = sorted(a_set, key=lambda j: (_mean_of(reports[j]), j))
    if len(ranked) <= 2 * f:
        return set()
    return set(ranked[f:len(ranked) - f])


def fuse_estimate(self_mean: float, b_set: Iterable[int], reports: Mapping[int, Union[Report, float]]) -> float:
    values = sorted((_mean_of(reports[j]), j) for j in b_set)
    if not values:
        return float(self_mean)
    acc = 0.0
    for v, _ in values:
        acc += v
    return (self_mean + acc) / (len(values) + 1)


def adjusted_variance(kappa: float, b_size: int) -> float:
    if b_size == 0:
        return 1.0
    m = b_size + 1
    return kappa / 4 + kappa / (4 * m) + 1 / m ** 2


def confidence_bonus(t: int, n: int, g: float, tuned: bool = False) -> float:
    if n < 1:
        raise InvariantViolation("confidence bonus needs at least one pull")
    log_t = math.log(max(t, 1))
    if tuned:
        return math.sqrt(g * log_t / (4 * n))
    return math.sqrt(2 * g * log_t / n)


def filter_pipeline(agent: AgentState, arm: int, reports: Iterable[Report], f: int) -> FilterOutcome:
    """Full filter for one agent and arm; ``reports`` come from in-neighbors."""
    by_sender = {r.sender: r for r in reports if r.arm == arm}
    self_count = int(agent.counts[arm])
    self_mean = float(agent.means[arm])
    a_set = consistency_filter(self_count, agent.kappa, by_sender.values())
    b_set = trimmed_mean_filter(a_set, by_sender, f)
    z = fuse_estimate(self_mean, b_set, by_sender)
    g = adjusted_variance(agent.kappa, len(b_set))
    return FilterOutcome(frozenset(a_set), frozenset(b_set), z, g)


def trimmed_mean_oracle(values: Iterable[tuple[int, float]], f: int) -> set:
    """Brute-force trimmed set, independent of any sorting routine.

    Candidates of size max(n - 2f, 0) are enumerated; the valid one has
    exactly f excluded items below all of its members and f above, in the
    (value, id) order.
    """
    items = [(float(v), int(i)) for i, v in values]
    n = len(items)
    size = n - 2 * f
    if size <= 0:
        return set()
    for combo in itertools.combinations(range(n), size):
        chosen = [items[c] for c in combo]
        rest = [items[c] for c in range(n) if c not in combo]
        lo, hi = min(chosen), max(chosen)
        below = sum(1 for x in rest if x < lo)
        above = sum(1 for x in rest if x > hi)
        if below == f and above == f:
            return {i for _, i in chosen}
    raise AssertionError("no valid trimmed set found")


# ---------------------------------------------------------------- vectorized


def trim_sorted(values: np.ndarray, mask: np.ndarray, f: int):
    """Sort masked values along the last axis and mark the middle ones.

    Returns ``(order, sorted_values, keep)`` where ``keep`` is in sorted
    position space. Masked-out entries sort last as +inf.
    """
    key = np.where(mask, values, np.inf)
    order = np.argsort(key, axis=-1, kind="stable")
    sorted_values = np.take_along_axis(key, order, axis=-1)
    a_size = mask.sum(axis=-1, keepdims=True)
    pos = np.arange(values.shape[-1])
    keep = (pos >= f) & (pos < a_size - f)
    return order, sorted_values, keep


def sequential_sum(values: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Left-to-right sum of kept values along the last axis."""
    acc = np.zeros(values.shape[:-1])
    for p in range(values.shape[-1]):
        acc += np.where(keep[..., p], values[..., p], 0.0)
    return acc


def adjusted_variance_array(kappa: np.ndarray, b_size: np.ndarray) -> np.ndarray:
    m = b_size + 1
    g = kappa / 4 + kappa / (4 * m) + 1 / m ** 2
    return np.where(b_size == 0, 1.0, g)


def confidence_bonus_array(t: int, counts: np.ndarray, g: np.ndarray, tuned: bool = False) -> np.ndarray:
    log_t = math.log(max(t, 1))
    if tuned:
        return np.sqrt(g * log_t / (4 * counts))
    return np.sqrt(2 * g * log_t / counts)


def filter_arrays(own_counts, own_means, rep_counts, rep_means, in_mask, kappa, f, want_sets=False):
    """Vectorized filter over any leading axes.

    Shapes: ``own_*`` (..., M); ``rep_*`` (..., M, S) with senders last;
    ``in_mask`` broadcastable to (..., M, S); ``kappa`` (...,).
    Returns ``(z, g, b_size)`` and, with ``want_sets``, the sender-space
    masks ``(a_mask, b_mask)`` as well.
    """
    kappa = np.asarray(kappa, dtype=float)[..., None, None]
    a_mask = in_mask & (kappa * rep_counts >= own_counts[..., None])
    order, sorted_values, keep = trim_sorted(rep_means, a_mask, f)
    b_size = keep.sum(axis=-1)
    acc = sequential_sum(sorted_values, keep)
    z = np.where(b_size == 0, own_means, (own_means + acc) / (b_size + 1))
    g = adjusted_variance_array(kappa[..., 0], b_size)
    if not want_sets:
        return z, g, b_size
    b_mask = np.zeros_like(a_mask)
    np.put_along_axis(b_mask, order, keep, axis=-1)
    return z, g, b_size, a_mask, b_mask
