"""Byzantine report crafting.

Adversaries see a read-only ``GlobalSnapshot`` of the round-start state and
influence normal agents only through the reports they send. The batched
``*_batch`` kernels consume the same random draws, in the same order, as the
scalar functions:

* constant and Gaussian attacks take one uniform per round for the count copy;
* the Gaussian attack takes a full (N, M) block of standard normals per round,
  whatever the current recipients are.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import ConfigError
from .resilience import Report, clamp_mean


@dataclass(frozen=True)
class ConstantBroadcast:
    means: tuple
    kind = "constant"


@dataclass(frozen=True)
class GaussianBias:
    variance: float = 0.01
    kind = "gaussian"

    def __post_init__(self):
        if self.variance < 0:
            raise ConfigError("variance must be non-negative", "attack.variance")


@dataclass(frozen=True)
class Adaptive:
    kind = "adaptive"


@dataclass(frozen=True)
class ConsensusConstant:
    value: Union[float, tuple] = 1 / 3
    kind = "consensus_constant"


@dataclass(frozen=True)
class Honest:
    """Byzantine-labelled agents that follow the protocol exactly."""

    kind = "honest"


AttackSpec = Union[ConstantBroadcast, GaussianBias, Adaptive, ConsensusConstant, Honest]


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GlobalSnapshot:
    """Round-start view of every agent; arrays are made read-only."""

    counts: np.ndarray          # (N, M)
    means: np.ndarray           # (N, M)
    prev_counts: np.ndarray     # (N, M), counts one round earlier
    adjacency: np.ndarray       # (N, N), adj[j, i] = arc j -> i
    kappa: np.ndarray           # (N,)
    byzantine: frozenset
    best_arm: int

    def __post_init__(self):
        for name in ("counts", "means", "prev_counts", "adjacency", "kappa"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def normal_ids(self) -> list[int]:
        return [i for i in range(self.counts.shape[0]) if i not in self.byzantine]


def _pick(candidates: Sequence[int], u: float) -> int:
    return candidates[min(int(u * len(candidates)), len(candidates) - 1)]


def craft_reports_constant(spec: ConstantBroadcast, adversary: int, recipients: Iterable[int],
                           snapshot: GlobalSnapshot, rng: np.random.Generator) -> dict:
    normals = snapshot.normal_ids
    if not normals:
        raise ConfigError("constant attack needs at least one normal agent")
    if len(spec.means) != snapshot.counts.shape[1]:
        raise ConfigError("attack means must list every arm", "attack.means")
    source = _pick(normals, rng.random())
    counts = snapshot.counts[source]
    return {
        i: [Report(adversary, k, int(counts[k]), spec.means[k]) for k in range(len(counts))]
        for i in recipients
    }


def craft_reports_gaussian(spec: GaussianBias, adversary: int, recipients: Iterable[int],
                           snapshot: GlobalSnapshot, rng: np.random.Generator, bias: np.ndarray,
                           noise_rng: Optional[np.random.Generator] = None) -> dict:
    """Noisy, per-recipient inflated means plus counts copied from a normal in-neighbor.

    ``bias`` holds this adversary's per-arm bias. ``rng`` supplies the copy
    choice and ``noise_rng`` (default ``rng``) the noise block.
    """
    n, m = snapshot.counts.shape
    normals = snapshot.normal_ids
    if not normals:
        raise ConfigError("Gaussian attack needs at least one normal agent")
    in_normals = [j for j in normals if snapshot.adjacency[j, adversary]]
    source = _pick(in_normals or normals, rng.random())
    noise = (noise_rng or rng).standard_normal((n, m))
    sd = np.sqrt(spec.variance)
    counts = snapshot.prev_counts[source]
    own = snapshot.means[adversary]
    out = {}
    for i in recipients:
        reported = clamp_mean(own + (bias + sd * noise[i]))
        out[i] = [Report(adversary, k, int(counts[k]), reported[k]) for k in range(m)]
    return out


def adaptive_values(recipient: int, snapshot: GlobalSnapshot) -> tuple[np.ndarray, np.ndarray]:
    """Per-arm (count, mean) an omniscient adversary sends to ``recipient``."""
    n, m = snapshot.counts.shape
    kappa = snapshot.kappa[recipient]
    own_counts = snapshot.counts[recipient]
    counts = own_counts + 1
    means = np.empty(m)
    senders = [j for j in snapshot.normal_ids if snapshot.adjacency[j, recipient]]
    for k in range(m):
        survivors = sorted(
            float(snapshot.means[j, k]) for j in senders if kappa * snapshot.counts[j, k] >= own_counts[k]
        )
        if len(survivors) >= 2:
            means[k] = survivors[1] if k == snapshot.best_arm else survivors[-2]
        elif survivors:
            means[k] = survivors[0]
        else:
            means[k] = snapshot.means[recipient, k]
    return counts, means


def craft_reports_adaptive(adversary: int, recipient: int, snapshot: GlobalSnapshot) -> list:
    counts, means = adaptive_values(recipient, snapshot)
    return [Report(adversary, k, int(c), float(v)) for k, (c, v) in enumerate(zip(counts, means))]


def consensus_values(spec: ConsensusConstant, n_arms: int) -> np.ndarray:
    value = np.broadcast_to(np.asarray(spec.value, dtype=float), (n_arms,)).copy()
    if ((value < 0) | (value > 1)).any():
        raise ConfigError("consensus attack value must lie in [0, 1]", "attack.value")
    return value


def craft_reports_consensus_constant(spec: ConsensusConstant, recipients: Iterable[int], n_arms: int) -> dict:
    value = consensus_values(spec, n_arms)
    return {i: value.copy() for i in recipients}


def draw_biases(rng: np.random.Generator, n_arms: int) -> np.ndarray:
    """Per-arm Gaussian-attack biases, uniform on the open interval (0, 1)."""
    u = rng.random(n_arms)
    while (u == 0).any():
        u[u == 0] = rng.random(int((u == 0).sum()))
    return u


# ---------------------------------------------------------------- batched


def pick_batch(candidates: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Uniform choice among True entries of ``candidates`` (..., N), in id order."""
    size = candidates.sum(axis=-1)
    idx = np.minimum((u * size).astype(np.int64), size - 1)
    ranks = np.cumsum(candidates, axis=-1) - 1
    return np.argmax(candidates & (ranks == idx[..., None]), axis=-1)


def adaptive_batch(counts, means, adj, kappa, normal_mask, best_arm):
    """Adaptive-attack reports per recipient.

    Shapes: counts/means (R, N, M); adj (R, N, N) or (N, N); kappa (R, N).
    Returns (R, N_recv, M) counts and means, identical for every adversary.
    """
    r, n, m = counts.shape
    in_normal = np.broadcast_to(adj, (r, n, n)) & normal_mask[:, None]     # [r, j, i]
    in_normal = np.swapaxes(in_normal, 1, 2)[:, :, None, :]                   # [r, i, 1, j]
    sender_counts = np.swapaxes(counts, 1, 2)[:, None, :, :]                # [r, 1, k, j]
    sender_means = np.swapaxes(means, 1, 2)[:, None, :, :]
    survive = in_normal & (kappa[:, :, None, None] * sender_counts >= counts[:, :, :, None])
    size = survive.sum(axis=-1)                                             # [r, i, k]
    lo = np.sort(np.where(survive, sender_means, np.inf), axis=-1)
    second_small = lo[..., 1] if n > 1 else lo[..., 0]
    second_large = np.take_along_axis(lo, np.maximum(size - 2, 0)[..., None], axis=-1)[..., 0]
    only = lo[..., 0]
    best = np.arange(m) == best_arm
    value = np.where(best, second_small, second_large)
    value = np.where(size >= 2, value, np.where(size == 1, only, means))
    return counts + 1, value
