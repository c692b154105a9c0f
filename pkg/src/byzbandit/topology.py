"""Directed neighbor graphs and the random graph models used in experiments.

Adjacency convention: ``adj[j, i]`` is True when the arc (j, i) exists, i.e.
agent i receives from agent j. Column ``i`` is therefore the in-neighborhood
of agent i and row ``j`` the out-neighborhood of agent j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
from scipy import optimize, stats

from .core import ConfigError


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ConfigError("adjacency must be a square matrix")
        if adj.diagonal().any():
            raise ConfigError("self-loops are not allowed")
        adj = adj.copy()
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    def __eq__(self, other):
        return isinstance(other, DirectedGraph) and np.array_equal(self.adjacency, other.adjacency)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def in_neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.adjacency[:, i]).tolist()

    def out_neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.adjacency[i, :]).tolist()

    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=0)

    def edges(self) -> list[tuple[int, int]]:
        return [(int(j), int(i)) for j, i in zip(*np.nonzero(self.adjacency))]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, symmetric: bool = False) -> "DirectedGraph":
        adj = np.zeros((n, n), dtype=bool)
        for j, i in edges:
            if not (0 <= j < n and 0 <= i < n):
                raise ConfigError(f"edge ({j}, {i}) references an agent outside 0..{n - 1}")
            if j == i:
                raise ConfigError(f"self-loop on agent {j}")
            adj[j, i] = True
            if symmetric:
                adj[i, j] = True
        return cls(adj)

    @classmethod
    def complete(cls, n: int) -> "DirectedGraph":
        return cls(~np.eye(n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> "DirectedGraph":
        return cls(np.zeros((n, n), dtype=bool))


def load_edge_list(path: Union[str, Path], n: int, symmetric: bool = False) -> DirectedGraph:
    """Read ``j i`` pairs (arc j -> i), one per line; ``#`` starts a comment."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: expected 'j i'", str(path))
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ConfigError(f"line {lineno}: agent ids must be integers", str(path)) from None
    return DirectedGraph.from_edges(n, edges, symmetric)


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class Fixed:
    graph: DirectedGraph
    time_varying = False


@dataclass(frozen=True)
class ErRandomPerRound:
    q: float
    time_varying = True

    def __post_init__(self):
        _check_q(self.q)


@dataclass(frozen=True)
class ErRandomFixed:
    q: float
    time_varying = False

    def __post_init__(self):
        _check_q(self.q)


@dataclass(frozen=True)
class MinDegreeConstrained:
    """Per-round graphs with in-degree >= d_min and a target mean in-degree.

    Each realization starts from an ER draw with probability ``base_q`` and
    then adds uniformly random missing in-edges to every agent below
    ``d_min``. ``base_q`` is solved so that the expected in-degree after the
    repair equals ``target_mean_degree``.
    """

    d_min: int
    target_mean_degree: float
    time_varying = True

    def base_q(self, n: int) -> float:
        if not 0 <= self.d_min <= n - 1:
            raise ConfigError(f"d_min must lie in [0, {n - 1}]", "graph.d_min")
        if not self.d_min <= self.target_mean_degree <= n - 1:
            raise ConfigError("target mean degree must lie in [d_min, n-1]", "graph.target_mean_degree")
        return _solve_base_q(n, self.d_min, self.target_mean_degree)


GraphModel = Union[Fixed, ErRandomPerRound, ErRandomFixed, MinDegreeConstrained]


def _check_q(q: float):
    if not 0.0 < q <= 1.0:
        raise ConfigError(f"edge probability q must lie in (0, 1], got {q}", "graph.q")


def _expected_repaired_degree(q: float, n: int, d_min: int) -> float:
    k = np.arange(n)
    pmf = stats.binom.pmf(k, n - 1, q)
    return float(np.sum(pmf * np.maximum(k, d_min)))


def _solve_base_q(n: int, d_min: int, target: float) -> float:
    if target >= n - 1:
        return 1.0
    if _expected_repaired_degree(0.0, n, d_min) >= target:
        return 0.0
    return float(optimize.brentq(
        lambda q: _expected_repaired_degree(q, n, d_min) - target, 0.0, 1.0, xtol=1e-14
    ))


def er_adjacency(uniforms: np.ndarray, q: float) -> np.ndarray:
    """Arc (j, i) present iff u[j, i] < q; works on stacked (..., N, N) draws."""
    adj = uniforms < q
    n = adj.shape[-1]
    adj[..., np.arange(n), np.arange(n)] = False
    return adj


def repair_min_degree(adj: np.ndarray, priority: np.ndarray, d_min: int) -> np.ndarray:
    """Add the lowest-priority missing in-edges until every in-degree >= d_min.

    ``adj`` and ``priority`` have shape (..., N, N); column i lists the
    candidates for agent i.
    """
    n = adj.shape[-1]
    eye = np.eye(n, dtype=bool)
    deficit = np.maximum(d_min - adj.sum(axis=-2), 0)          # (..., N)
    missing = ~adj & ~eye
    key = np.where(missing, priority, np.inf)
    rank = np.argsort(np.argsort(key, axis=-2, kind="stable"), axis=-2, kind="stable")
    add = missing & (rank < deficit[..., None, :])
    return adj | add


def realize(model: GraphModel, n: int, t: int, rng: Optional[np.random.Generator] = None) -> DirectedGraph:
    """One realization of ``model`` for round ``t``.

    For ``ErRandomFixed`` the caller must pass the same generator state for
    every ``t`` (the engine realizes it once per run). ``t`` is otherwise only
    validated: the randomness comes entirely from ``rng``.
    """
    if t < 0:
        raise ValueError("round index must be non-negative")
    if isinstance(model, Fixed):
        return model.graph
    if rng is None:
        raise ValueError("random graph models need a generator")
    if isinstance(model, (ErRandomPerRound, ErRandomFixed)):
        return DirectedGraph(er_adjacency(rng.random((n, n)), model.q))
    if isinstance(model, MinDegreeConstrained):
        q0 = model.base_q(n)
        adj = er_adjacency(rng.random((n, n)), q0)
        return DirectedGraph(repair_min_degree(adj, rng.random((n, n)), model.d_min))
    raise ConfigError(f"unknown graph model {model!r}")


def degree_requirement_probability(model, n: int, f: int) -> float:
    """Probability that every one of ``n`` agents has at least 3f+1 in-neighbors
    in a directed ER graph; ``model`` is an ER model or the edge probability."""
    if isinstance(model, (ErRandomPerRound, ErRandomFixed)):
        q = model.q
    elif isinstance(model, (int, float)):
        q = float(model)
    else:
        raise ConfigError("degree requirement probability is defined for ER models only")
    _check_q(q)
    need = 3 * f + 1
    if need > n - 1:
        return 0.0
    per_agent = sum(math.comb(n - 1, i) * q ** i * (1 - q) ** (n - 1 - i) for i in range(need, n))
    return per_agent ** n


def validate_byzantine_budget(graph: DirectedGraph, byzantine: Iterable[int], f: int) -> bool:
    """True iff no normal agent has more than ``f`` Byzantine in-neighbors."""
    byz = np.zeros(graph.n, dtype=bool)
    byz[list(byzantine)] = True
    return not budget_violations(graph.adjacency, byz, f).any()


def budget_violations(adj: np.ndarray, byz_mask: np.ndarray, f: int) -> np.ndarray:
    """Per-normal-agent violation flags; ``adj`` may carry leading batch axes."""
    byz_in = (adj & byz_mask[:, None]).sum(axis=-2)
    return (byz_in > f) & ~byz_mask
