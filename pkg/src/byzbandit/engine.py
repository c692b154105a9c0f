"""Synchronous round loop, regret accounting, bounds and batch execution.

Runs are simulated in batches: every state array carries a leading run axis
and reports are laid out as ``(run, recipient, arm, sender)``. Each run draws
from its own substreams, so a run's trajectory is the same whatever batch it
lands in and whichever worker executes it.

Round ``t`` (``0 <= t < T``) realizes the graph, exchanges reports built from
the round-start state, filters them, picks ``a_i(t+1)`` and pulls it. Row
``t - 1`` of every per-round output refers to the state after pull ``t``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .adversary import (Adaptive, AttackSpec, ConsensusConstant, ConstantBroadcast, GaussianBias, Honest,
                        adaptive_batch, consensus_values, draw_biases, pick_batch)
from .core import ArmEnvironment, Bernoulli, ConfigError, InvariantViolation, PointMass, check_kappa
from .policies import (PolicySpec, ResilientGreedy, ResilientUCB, RunningConsensusTrimmed, SingleUCB1,
                       SoftmaxTop3, consensus_average, greedy_choice, softmax_top3_choice, ucb_choice)
from .resilience import clamp_mean, filter_arrays
from .streams import BlockBuffer, Purpose, substream
from .topology import (ErRandomFixed, ErRandomPerRound, Fixed, GraphModel, MinDegreeConstrained,
                       budget_violations, er_adjacency, repair_min_degree)

UCB_CONSTANT = 1 + math.pi ** 2 / 3


@dataclass(frozen=True)
class KappaUniform:
    """Per-run random kappa: each agent draws uniformly from [low, high)."""

    low: float = 1.0
    high: float = 2.0

    def __post_init__(self):
        if not 1.0 <= self.low <= self.high <= 2.0:
            raise ConfigError("kappa range must satisfy 1 <= low <= high <= 2", "agents.kappa")


KappaSpec = Union[float, tuple, KappaUniform]


@dataclass(frozen=True)
class ExperimentConfig:
    env: ArmEnvironment
    graph: GraphModel
    n_agents: int
    byzantine: tuple = ()
    f: int = 0
    kappa: KappaSpec = 1.0
    policy: PolicySpec = field(default_factory=ResilientUCB)
    attack: AttackSpec = field(default_factory=Honest)
    horizon: int = 1000
    runs: int = 1
    root_seed: int = 0
    name: str = ""

    def __post_init__(self):
        n = self.n_agents
        if n < 1:
            raise ConfigError("at least one agent is required", "agents.n")
        byz = tuple(sorted(int(b) for b in self.byzantine))
        if len(set(byz)) != len(byz) or any(not 0 <= b < n for b in byz):
            raise ConfigError(f"byzantine ids must be distinct and lie in 0..{n - 1}", "agents.byzantine")
        if len(byz) == n:
            raise ConfigError("at least one normal agent is required", "agents.byzantine")
        object.__setattr__(self, "byzantine", byz)
        if self.f < 0:
            raise ConfigError("f must be non-negative", "agents.f")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1", "horizon")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1", "runs")
        if isinstance(self.kappa, (tuple, list)):
            if len(self.kappa) != n:
                raise ConfigError(f"kappa list must have {n} entries", "agents.kappa")
            object.__setattr__(self, "kappa", tuple(check_kappa(float(k), f"agents.kappa[{i}]")
                                                   for i, k in enumerate(self.kappa)))
        elif not isinstance(self.kappa, KappaUniform):
            object.__setattr__(self, "kappa", check_kappa(float(self.kappa), "agents.kappa"))
        if isinstance(self.graph, Fixed) and self.graph.graph.n != n:
            raise ConfigError(f"graph has {self.graph.graph.n} nodes, expected {n}", "graph")
        if isinstance(self.graph, MinDegreeConstrained):
            self.graph.base_q(n)
        m = self.env.n_arms
        if m > np.iinfo(np.int16).max:
            raise ConfigError("too many arms", "env.arms")
        if isinstance(self.attack, ConstantBroadcast) and len(self.attack.means) != m:
            raise ConfigError("attack means must list every arm", "attack.means")
        if isinstance(self.attack, ConsensusConstant):
            consensus_values(self.attack, m)
        consensus = isinstance(self.policy, RunningConsensusTrimmed)
        if consensus and self.byzantine and not isinstance(self.attack, (ConsensusConstant, Honest)):
            raise ConfigError("running consensus supports only consensus_constant or honest attacks", "attack")
        if isinstance(self.attack, ConsensusConstant) and not consensus:
            raise ConfigError("consensus_constant attack needs the running_consensus policy", "attack")
        for i, dists in self.env.overrides.items():
            if not 0 <= int(i) < n:
                raise ConfigError(f"override for unknown agent {i}", "env.overrides")

    @property
    def normal_ids(self) -> list[int]:
        return [i for i in range(self.n_agents) if i not in self.byzantine]

    @property
    def n_arms(self) -> int:
        return self.env.n_arms


# ---------------------------------------------------------------- bounds and regret


def _positive_gaps(gaps) -> tuple[np.ndarray, np.ndarray]:
    gaps = np.asarray(gaps, dtype=float)
    return gaps, gaps > 0


def ucb1_bound(env_or_gaps, T: int) -> float:
    """Single-agent UCB1 regret bound with natural log."""
    if T < 1:
        raise ValueError("T must be at least 1")
    gaps = env_or_gaps.gaps if isinstance(env_or_gaps, ArmEnvironment) else env_or_gaps
    gaps, pos = _positive_gaps(gaps)
    log_t = math.log(T)
    return float(sum(8 * log_t / d + UCB_CONSTANT * d for d in gaps[pos]))


def ucb1_bound_curve(gaps, T: int) -> np.ndarray:
    """``ucb1_bound(gaps, t)`` for t = 1..T."""
    gaps, pos = _positive_gaps(gaps)
    t = np.arange(1, T + 1)
    return 8 * np.log(t) * np.sum(1 / gaps[pos]) + UCB_CONSTANT * gaps[pos].sum()


def resilient_bound(g_trace, env_or_gaps, T: Optional[int] = None) -> tuple[float, float]:
    """Regret bound on a realized trace of adjusted variances.

    ``g_trace`` has shape (T, M); row ``t - 1`` holds g_k(t) for t = 1..T.
    Returns ``(plain, tau_min)``, where ``tau_min`` minimizes over the
    switching time tau with the (T - tau) * max-gap tail.
    """
    g_trace = np.asarray(g_trace, dtype=float)
    if T is None:
        T = g_trace.shape[0]
    g_trace = g_trace[:T]
    gaps = env_or_gaps.gaps if isinstance(env_or_gaps, ArmEnvironment) else env_or_gaps
    gaps, pos = _positive_gaps(gaps)
    if not pos.any():
        return 0.0, 0.0
    log_t = np.log(np.arange(1, T + 1))
    run_max = np.maximum.accumulate(g_trace * log_t[:, None], axis=0)     # (T, M)
    s = _bound_sum(run_max, gaps, pos)                                      # (T,)
    const = UCB_CONSTANT * gaps[pos].sum()
    d_max = gaps.max()
    tau = np.arange(1, T + 1)
    plain = float(s[-1] + const)
    tau_min = float(np.min(s - tau * d_max) + T * d_max + const)
    return plain, tau_min


def _bound_sum(run_max: np.ndarray, gaps: np.ndarray, pos: np.ndarray) -> np.ndarray:
    acc = np.zeros(run_max.shape[:-1])
    for k in np.flatnonzero(pos):
        acc += 8 * run_max[..., k] / gaps[k]
    return acc


def compute_regret(arms, gaps) -> np.ndarray:
    """Cumulative pseudo-regret from an arm history of shape (T, agents)."""
    gaps = np.asarray(gaps, dtype=float)
    return np.cumsum(gaps[np.asarray(arms)], axis=0)


def stage_bounds(T: int) -> list[tuple[int, int]]:
    """Rows [start, stop) of the three stages over pulls 1..T."""
    a, b = T // 3, (2 * T) // 3
    return [(0, a), (a, b), (b, T)]


def stage_counts(arms: np.ndarray, n_arms: int) -> np.ndarray:
    """Per-agent per-arm per-stage pull counts; ``arms`` is (T, agents)."""
    T, h = arms.shape
    out = np.zeros((h, n_arms, 3), dtype=np.int64)
    for s, (lo, hi) in enumerate(stage_bounds(T)):
        seg = arms[lo:hi]
        for k in range(n_arms):
            out[:, k, s] = (seg == k).sum(axis=0)
    return out


def selection_frequency_by_stage(results: Sequence["RunResult"]) -> np.ndarray:
    """Stage pull frequency per normal agent and arm, averaged over runs.

    Returns shape (agents, M, 3). Empty stages (T < 3) report zero.
    """
    if not results:
        raise ValueError("no results")
    T = results[0].regret.shape[0]
    lengths = np.array([hi - lo for lo, hi in stage_bounds(T)], dtype=float)
    total = np.mean([r.stage_counts for r in results], axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(lengths > 0, total / np.where(lengths > 0, lengths, 1), 0.0)


# ---------------------------------------------------------------- world


@dataclass
class SimOptions:
    """What a batch simulation records besides the arm history."""

    record_arms: bool = True
    record_g: bool = False
    track_bounds: bool = True
    probes: tuple = ()
    check_invariants: bool = True


def _reward_tables(env: ArmEnvironment, n: int):
    m = env.n_arms
    thresh = np.zeros((n, m))
    point = np.full((n, m), np.nan)
    generic = []
    for i in range(n):
        for k, d in enumerate(env.arms_for(i)):
            if isinstance(d, Bernoulli):
                thresh[i, k] = d.p
            elif isinstance(d, PointMass):
                point[i, k] = d.value
            else:
                generic.append((i, k, d))
    return thresh, point, generic


def _rewards(arm: np.ndarray, u: np.ndarray, tables) -> np.ndarray:
    """Inverse-transform rewards for arm choices and uniforms of shape (R, N)."""
    thresh, point, generic = tables
    n = arm.shape[1]
    agents = np.arange(n)
    th = thresh[agents, arm]
    pv = point[agents, arm]
    out = np.where(np.isnan(pv), np.where(u < th, 1.0, 0.0), pv)
    for i, k, d in generic:
        sel = arm[:, i] == k
        if sel.any():
            out[sel, i] = d.quantile(u[sel, i])
    return out


class World:
    """Batched state of several independent runs of one experiment."""

    def __init__(self, config: ExperimentConfig, runs: Sequence[int], options: Optional[SimOptions] = None):
        self.config = config
        self.options = options or SimOptions()
        self.runs = list(runs)
        cfg = config
        seed = cfg.root_seed
        r, n, m = len(self.runs), cfg.n_agents, cfg.n_arms
        self.R, self.N, self.M, self.T = r, n, m, cfg.horizon
        self.byz = np.array(cfg.byzantine, dtype=np.int64)
        self.byz_mask = np.zeros(n, dtype=bool)
        self.byz_mask[self.byz] = True
        self.normal = np.flatnonzero(~self.byz_mask)
        self.normal_mask = ~self.byz_mask
        self.gaps = np.asarray(cfg.env.gaps, dtype=float)
        self.best_arm = cfg.env.best_arm
        self.attack = cfg.attack if len(self.byz) else Honest()
        self.adversarial = not isinstance(self.attack, Honest)
        self.policy = cfg.policy
        self.consensus = isinstance(self.policy, RunningConsensusTrimmed)
        self.filtered = isinstance(self.policy, (ResilientUCB, ResilientGreedy, SoftmaxTop3))

        def gens(purpose, agents):
            return [[substream(seed, run, purpose, int(a)) for a in agents] for run in self.runs]

        # kappa
        if isinstance(cfg.kappa, KappaUniform):
            lo, hi = cfg.kappa.low, cfg.kappa.high
            self.kappa = np.array([lo + (hi - lo) * substream(seed, run, Purpose.KAPPA).random(n)
                                   for run in self.runs])
            self.kappa = np.minimum(self.kappa, np.nextafter(2.0, 0.0))
        else:
            self.kappa = np.broadcast_to(np.asarray(cfg.kappa, dtype=float), (r, n)).copy()

        # rewards and initialization pulls
        self.tables = _reward_tables(cfg.env, n)
        reward_gens = gens(Purpose.REWARD, range(n))
        init_u = np.array([[g.random(m) for g in row] for row in reward_gens])      # (R, N, M)
        self.counts = np.ones((r, n, m), dtype=np.int64)
        self.sums = np.empty((r, n, m))
        for k in range(m):
            self.sums[:, :, k] = _rewards(np.full((r, n), k), init_u[:, :, k], self.tables)
        self.prev_counts = self.counts.copy()
        self.reward_buf = BlockBuffer(reward_gens)
        self.z_cons = self.sums / self.counts if self.consensus else None

        if self.adversarial:
            self.byz_pull_buf = BlockBuffer(gens(Purpose.BYZ_PULL, self.byz))
        if isinstance(self.attack, (ConstantBroadcast, GaussianBias)):
            self.pick_buf = BlockBuffer(gens(Purpose.ATTACK_PICK, self.byz))
        if isinstance(self.attack, GaussianBias):
            self.noise_buf = BlockBuffer(gens(Purpose.ATTACK_NOISE, self.byz), shape=(n, m), normal=True)
            self.biases = np.array([[draw_biases(g, m) for g in row] for row in gens(Purpose.ATTACK_BIAS, self.byz)])
        else:
            self.biases = None
        if isinstance(self.attack, ConsensusConstant):
            self.consensus_attack = consensus_values(self.attack, m)
        if isinstance(self.policy, SoftmaxTop3):
            self.softmax_buf = BlockBuffer(gens(Purpose.SOFTMAX, range(n)))

        # graphs
        model = cfg.graph
        self.graph_buf = None
        if isinstance(model, Fixed):
            self.adj_static = np.broadcast_to(model.graph.adjacency, (r, n, n))
        elif isinstance(model, ErRandomFixed):
            self.adj_static = np.array([er_adjacency(substream(seed, run, Purpose.GRAPH).random((n, n)), model.q)
                                        for run in self.runs])
        elif isinstance(model, ErRandomPerRound):
            self.adj_static = None
            self.graph_buf = BlockBuffer(gens(Purpose.GRAPH, [0]), shape=(n, n), block=64)
        elif isinstance(model, MinDegreeConstrained):
            self.adj_static = None
            self.base_q = model.base_q(n)
            self.graph_buf = BlockBuffer(gens(Purpose.GRAPH, [0]), shape=(2, n, n), block=64)
        else:
            raise ConfigError(f"unknown graph model {model!r}", "graph")
        if self.adj_static is not None:
            self.static_violation = budget_violations(self.adj_static, self.byz_mask, cfg.f).any(axis=-1)

        # outputs
        opts = self.options
        self.arms = np.zeros((r, self.T, n), dtype=np.int16) if opts.record_arms else None
        self.final_counts = None
        self.violations = np.zeros(r, dtype=np.int64)
        self.g_trace = np.ones((r, self.T + 1, n, m)) if opts.record_g else None
        self.probes = {}
        self._pos = self.gaps > 0
        self.run_max = np.zeros((r, n, m))
        self.bound_curve = np.zeros((r, self.T, n)) if opts.track_bounds else None
        self.tau_acc = np.full((r, n), np.inf)

    # -- per-round pieces

    def graph_at(self, t: int) -> np.ndarray:
        """Adjacency for round t, shape (R, N, N)."""
        if self.adj_static is not None:
            return self.adj_static
        draws = self.graph_buf.take(t)[:, 0]
        if isinstance(self.config.graph, ErRandomPerRound):
            return er_adjacency(draws, self.config.graph.q)
        adj = er_adjacency(draws[:, 0], self.base_q)
        return repair_min_degree(adj, draws[:, 1], self.config.graph.d_min)

    def reports(self, t: int, adj: np.ndarray, means: np.ndarray):
        """Reported (counts, means) in (R, recipient, arm, sender) layout."""
        r, n, m = self.R, self.N, self.M
        rep_counts = np.broadcast_to(np.swapaxes(self.counts, 1, 2)[:, None], (r, n, m, n))
        rep_means = np.broadcast_to(np.swapaxes(means, 1, 2)[:, None], (r, n, m, n))
        if not self.adversarial:
            return rep_counts, rep_means
        rep_counts, rep_means = rep_counts.copy(), rep_means.copy()
        byz = self.byz
        attack = self.attack
        rows = np.arange(r)[:, None]
        if isinstance(attack, ConstantBroadcast):
            cand = np.broadcast_to(self.normal_mask, (r, len(byz), n))
            src = pick_batch(cand, self.pick_buf.take(t))                     # (R, B)
            rep_counts[..., byz] = np.swapaxes(self.counts[rows, src], 1, 2)[:, None]
            rep_means[..., byz] = clamp_mean(np.asarray(attack.means, dtype=float))[:, None]
        elif isinstance(attack, GaussianBias):
            cand = np.swapaxes(adj[:, :, byz], 1, 2) & self.normal_mask    # (R, B, N)
            cand = np.where(cand.any(axis=-1, keepdims=True), cand, self.normal_mask)
            src = pick_batch(cand, self.pick_buf.take(t))
            noise = self.noise_buf.take(t)                                    # (R, B, N, M)
            sd = np.sqrt(attack.variance)
            own = means[:, byz]                                               # (R, B, M)
            vals = clamp_mean(own[:, :, None] + (self.biases[:, :, None] + sd * noise))
            rep_counts[..., byz] = np.swapaxes(self.prev_counts[rows, src], 1, 2)[:, None]
            rep_means[..., byz] = vals.transpose(0, 2, 3, 1)
        elif isinstance(attack, Adaptive):
            c, v = adaptive_batch(self.counts, means, adj, self.kappa, self.normal_mask, self.best_arm)
            rep_counts[..., byz] = c[..., None]
            rep_means[..., byz] = v[..., None]
        return rep_counts, rep_means

    def _check(self, t: int, g, b_size, means):
        bad = (g > 1) | ((g < 1) != (b_size > 0))
        bad &= self.normal_mask[:, None]
        if bad.any():
            run, agent, arm = np.argwhere(bad)[0]
            raise InvariantViolation(
                f"adjusted variance check failed for agent {agent}, arm {arm}, round {t} (run {self.runs[run]})")
        if ((means < 0) | (means > 1)).any():
            run, agent, arm = np.argwhere((means < 0) | (means > 1))[0]
            raise InvariantViolation(
                f"sample mean outside [0, 1] for agent {agent}, arm {arm}, round {t} (run {self.runs[run]})")

    def _track_bound(self, t: int, g):
        if t < 1 or self.bound_curve is None:
            return
        np.maximum(self.run_max, g * math.log(t), out=self.run_max)
        s = _bound_sum(self.run_max, self.gaps, self._pos)
        self.bound_curve[:, t - 1] = s
        self.tau_acc = np.minimum(self.tau_acc, s - t * self.gaps.max())

    def estimates(self, t: int):
        """Graph, reports and filter output for round t: (adj, z, g, in_mask, means)."""
        adj = self.graph_at(t)
        means = self.sums / self.counts
        in_mask = np.swapaxes(adj, 1, 2)[:, :, None, :]                      # [r, i, 1, j]
        if self.filtered:
            rep_counts, rep_means = self.reports(t, adj, means)
            z, g, b_size = filter_arrays(self.counts, means, rep_counts, rep_means, in_mask,
                                         self.kappa, self.config.f)
            if self.options.check_invariants:
                self._check(t, g, b_size, means)
        else:
            z = self.z_cons if self.consensus else means
            g = np.ones_like(means)
        return adj, z, g, in_mask, means

    def run_round(self, t: int):
        """Execute decision round ``t`` (0-based) and pull ``a_i(t+1)``."""
        adj, z, g, in_mask, means = self.estimates(t)
        if t in self.options.probes:
            self.probes[t] = z.copy()
        if self.g_trace is not None:
            self.g_trace[:, t] = g
        self._track_bound(t, g)
        if self.adj_static is None:
            self.violations += budget_violations(adj, self.byz_mask, self.config.f).any(axis=-1)
        else:
            self.violations += self.static_violation

        policy = self.policy
        if isinstance(policy, ResilientUCB):
            choice = ucb_choice(z, self.counts, g, t, policy.tuned)
        elif isinstance(policy, (SingleUCB1, RunningConsensusTrimmed)):
            choice = ucb_choice(z, self.counts, 1.0, t)
        elif isinstance(policy, ResilientGreedy):
            choice = greedy_choice(z)
        else:
            choice = softmax_top3_choice(z, self.softmax_buf.take(t), policy.temperature)
        if self.adversarial:
            u = self.byz_pull_buf.take(t)
            choice[:, self.byz] = np.minimum((u * self.M).astype(np.int64), self.M - 1)

        if self.arms is not None:
            self.arms[:, t] = choice
        rewards = _rewards(choice, self.reward_buf.take(t), self.tables)
        if self.options.check_invariants and ((rewards < 0) | (rewards > 1)).any():
            run, agent = np.argwhere((rewards < 0) | (rewards > 1))[0]
            raise InvariantViolation(
                f"reward outside [0, 1] for agent {agent}, arm {choice[run, agent]}, round {t}")
        onehot = np.arange(self.M) == choice[..., None]
        self.prev_counts = self.counts
        self.counts = self.counts + onehot
        self.sums = self.sums + np.where(onehot, rewards[..., None], 0.0)
        if self.consensus:
            self._consensus_step(in_mask, means)

    def _consensus_step(self, in_mask, old_means):
        r, n, m = self.R, self.N, self.M
        rep_z = np.broadcast_to(np.swapaxes(self.z_cons, 1, 2)[:, None], (r, n, m, n))
        if self.adversarial:
            rep_z = rep_z.copy()
            rep_z[..., self.byz] = self.consensus_attack[:, None]
        new_means = self.sums / self.counts
        self.z_cons = consensus_average(self.z_cons, rep_z, in_mask, self.config.f) + (new_means - old_means)

    def finish(self):
        """Final estimate pass at round T (bounds and probes only)."""
        T = self.T
        if self.bound_curve is not None or T in self.options.probes or self.g_trace is not None:
            _, z, g, _, _ = self.estimates(T)
            if T in self.options.probes:
                self.probes[T] = z.copy()
            if self.g_trace is not None:
                self.g_trace[:, T] = g
            self._track_bound(T, g)
        self.final_counts = self.counts

    def run(self):
        for t in range(self.T):
            self.run_round(t)
        self.finish()
        return self


# ---------------------------------------------------------------- results


@dataclass
class RunResult:
    run_index: int
    regret: np.ndarray               # (T, agents) cumulative pseudo-regret of normal agents
    final_counts: np.ndarray         # (N, M), initialization pulls included
    stage_counts: np.ndarray         # (agents, M, 3)
    budget_violations: int
    bound_curve: Optional[np.ndarray]   # (T, agents) resilient bound with horizon t
    bound_tau_min: Optional[np.ndarray]  # (agents,)
    manifest: dict

    @property
    def normal_ids(self) -> list[int]:
        return list(self.manifest["normal_ids"])


@dataclass
class AggregateResult:
    normal_ids: list
    mean_regret: np.ndarray          # (T, agents)
    std_regret: np.ndarray
    mean_network: np.ndarray         # (T,) network-average regret
    std_network: np.ndarray
    ucb1_bound: np.ndarray           # (T,)
    resilient_bound: Optional[np.ndarray]   # (T,), averaged over runs and agents
    resilient_bound_per_agent: Optional[np.ndarray]  # (T, agents), averaged over runs
    frequencies: np.ndarray          # (agents, M, 3)
    budget_violations: int
    manifest: dict
    runs: list = field(default_factory=list, repr=False)

    @property
    def horizon(self) -> int:
        return self.mean_regret.shape[0]


@dataclass
class BatchOutcome:
    """Raw arrays from one batch of runs."""

    runs: list
    arms: Optional[np.ndarray]
    final_counts: np.ndarray
    violations: np.ndarray
    bound_curve: Optional[np.ndarray]
    bound_tau_min: Optional[np.ndarray]
    kappa: np.ndarray
    biases: Optional[np.ndarray]
    probes: dict
    g_trace: Optional[np.ndarray]


def simulate(config: ExperimentConfig, runs: Optional[Sequence[int]] = None,
             options: Optional[SimOptions] = None) -> BatchOutcome:
    """Simulate the given run indices (default: all) as one batch."""
    runs = list(range(config.runs)) if runs is None else list(runs)
    w = World(config, runs, options).run()
    T = config.horizon
    normal = w.normal
    const = UCB_CONSTANT * w.gaps[w._pos].sum()
    bound_curve = tau_min = None
    if w.bound_curve is not None:
        bound_curve = w.bound_curve[:, :, normal] + const
        tau_min = w.tau_acc[:, normal] + T * w.gaps.max() + const
    return BatchOutcome(runs, w.arms, w.final_counts, w.violations, bound_curve, tau_min, w.kappa,
                        w.biases, w.probes, w.g_trace)


def config_hash(config: ExperimentConfig) -> str:
    from .config import config_hash as _hash

    return _hash(config)


def _run_results(config: ExperimentConfig, out: BatchOutcome, digest: str) -> list[RunResult]:
    normal = config.normal_ids
    gaps = config.env.gaps
    results = []
    for idx, run in enumerate(out.runs):
        arms = out.arms[idx][:, normal]
        manifest = {
            "run": run,
            "root_seed": config.root_seed,
            "config_hash": digest,
            "normal_ids": normal,
            "kappa": out.kappa[idx].tolist(),
        }
        if out.biases is not None:
            manifest["attack_biases"] = {int(b): out.biases[idx, j].tolist()
                                         for j, b in enumerate(config.byzantine)}
        results.append(RunResult(
            run_index=run,
            regret=compute_regret(arms, gaps),
            final_counts=out.final_counts[idx].copy(),
            stage_counts=stage_counts(arms, config.n_arms),
            budget_violations=int(out.violations[idx]),
            bound_curve=None if out.bound_curve is None else out.bound_curve[idx],
            bound_tau_min=None if out.bound_tau_min is None else out.bound_tau_min[idx],
            manifest=manifest,
        ))
    return results


def _simulate_chunk(args):
    config, runs = args
    return simulate(config, runs)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("BYZBANDIT_WORKERS", "1")))
    except ValueError:
        return 1


def run_batch(config: ExperimentConfig, workers: Optional[int] = None, batch_size: int = 50) -> AggregateResult:
    """Run every seed of ``config`` and aggregate pointwise over runs.

    Results do not depend on ``workers`` or ``batch_size``.
    """
    workers = default_workers() if workers is None else max(1, workers)
    runs = list(range(config.runs))
    size = max(1, min(batch_size, -(-len(runs) // workers)))
    chunks = [runs[i:i + size] for i in range(0, len(runs), size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_simulate_chunk, [(config, c) for c in chunks]))
    else:
        outs = [simulate(config, c) for c in chunks]
    digest = config_hash(config)
    results = [res for out in outs for res in _run_results(config, out, digest)]
    return aggregate(config, results, digest)


def aggregate(config: ExperimentConfig, results: Sequence[RunResult], digest: Optional[str] = None) -> AggregateResult:
    results = sorted(results, key=lambda r: r.run_index)
    regret = np.stack([r.regret for r in results])            # (runs, T, agents)
    network = regret.mean(axis=2)
    T = regret.shape[1]
    bounds = [r.bound_curve for r in results]
    per_agent_bound = None if bounds[0] is None else np.mean(bounds, axis=0)
    manifest = {
        "config_hash": digest or config_hash(config),
        "root_seed": config.root_seed,
        "runs": len(results),
        "horizon": T,
        "code_version": __version__,
    }
    return AggregateResult(
        normal_ids=config.normal_ids,
        mean_regret=regret.mean(axis=0),
        std_regret=regret.std(axis=0),
        mean_network=network.mean(axis=0),
        std_network=network.std(axis=0),
        ucb1_bound=ucb1_bound_curve(config.env.gaps, T),
        resilient_bound=None if per_agent_bound is None else per_agent_bound.mean(axis=1),
        resilient_bound_per_agent=per_agent_bound,
        frequencies=selection_frequency_by_stage(results),
        budget_violations=int(sum(r.budget_violations for r in results)),
        manifest=manifest,
        runs=list(results),
    )
