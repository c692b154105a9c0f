from __future__ import annotations

import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import byzbandit.engine as engine
from byzbandit.adversary import Adaptive, ConsensusConstant, ConstantBroadcast, GaussianBias, Honest
from byzbandit.core import ArmEnvironment, ConfigError, InvariantViolation, PointMass
from byzbandit.engine import (ExperimentConfig, KappaUniform, SimOptions, compute_regret, resilient_bound,
                              run_batch, selection_frequency_by_stage, simulate, stage_bounds, ucb1_bound,
                              ucb1_bound_curve)
from byzbandit.policies import (ResilientGreedy, ResilientUCB, RunningConsensusTrimmed, SingleUCB1,
                                SoftmaxTop3)
from byzbandit.topology import (DirectedGraph, ErRandomFixed, ErRandomPerRound, Fixed, MinDegreeConstrained)
from reference import reference_run

ENV = ArmEnvironment.bernoulli([0.5, 0.45, 0.4, 0.3])
ATTACK = ConstantBroadcast((0.4, 0.5, 0.4, 0.3))


def _config(**kw):
    base = dict(env=ENV, graph=ErRandomFixed(0.8), n_agents=5, byzantine=(0,), f=1, kappa=1.2,
                policy=ResilientUCB(), attack=ATTACK, horizon=200, runs=4, root_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def _assert_matches_reference(cfg, runs=2):
    out = simulate(cfg, options=SimOptions(record_g=True))
    normal = cfg.normal_ids
    for r in range(runs):
        arms, final, g = reference_run(cfg, r, order_seed=100 + r)
        assert np.array_equal(out.arms[r], arms)
        assert np.array_equal(out.final_counts[r], final)
        assert np.array_equal(out.g_trace[r][:, normal], g[:, normal])


GRAPHS = [ErRandomFixed(0.7), ErRandomPerRound(0.6), MinDegreeConstrained(2, 3.0), Fixed(DirectedGraph.complete(6))]
ATTACKS = [Honest(), ATTACK, GaussianBias(), Adaptive()]


@pytest.mark.parametrize("graph,attack", list(itertools.product(GRAPHS, ATTACKS)))
def test_batched_engine_matches_sequential_reference(graph, attack):
    cfg = _config(graph=graph, attack=attack, n_agents=6, byzantine=(0, 3), kappa=KappaUniform(), horizon=40, runs=2)
    _assert_matches_reference(cfg)


@pytest.mark.parametrize("policy", [ResilientUCB(True), SingleUCB1(), ResilientGreedy(), SoftmaxTop3(0.2)])
def test_policies_match_sequential_reference(policy):
    cfg = _config(graph=ErRandomPerRound(0.7), attack=Adaptive(), policy=policy, n_agents=6, byzantine=(1,),
                  horizon=40, runs=2)
    _assert_matches_reference(cfg)


def test_consensus_matches_sequential_reference():
    cfg = _config(graph=Fixed(DirectedGraph.complete(6)), n_agents=6, policy=RunningConsensusTrimmed(),
                  attack=ConsensusConstant((0.4, 0.5, 0.4, 0.3)), horizon=40, runs=2)
    _assert_matches_reference(cfg)


def test_generic_reward_laws_match_reference():
    from byzbandit.core import beta_distribution, uniform_distribution

    env = ArmEnvironment([beta_distribution(2, 2), uniform_distribution(0.1, 0.5), PointMass(0.2)],
                         {2: [uniform_distribution(0.0, 1.0), uniform_distribution(0.1, 0.5), PointMass(0.2)]})
    cfg = _config(env=env, attack=Adaptive(), horizon=40, runs=2)
    _assert_matches_reference(cfg)


def test_run_trajectory_independent_of_batching():
    cfg = _config(graph=ErRandomPerRound(0.6), attack=GaussianBias(), runs=5, horizon=100)
    full = simulate(cfg)
    part = simulate(cfg, runs=[3, 1])
    assert np.array_equal(full.arms[3], part.arms[0])
    assert np.array_equal(full.arms[1], part.arms[1])


def test_isolated_agent_is_ucb1():
    cfg = _config(graph=Fixed(DirectedGraph.empty(1)), n_agents=1, byzantine=(), f=0, attack=Honest(), runs=2)
    single = simulate(replace(cfg, policy=SingleUCB1()))
    resilient = simulate(cfg)
    assert np.array_equal(single.arms, resilient.arms)


def test_dropping_all_reports_reproduces_single_ucb1():
    cfg = _config(graph=Fixed(DirectedGraph.empty(5)), runs=3)
    a = simulate(cfg)
    b = simulate(replace(cfg, policy=SingleUCB1()))
    assert np.array_equal(a.arms[:, :, 1:], b.arms[:, :, 1:])


def test_honest_byzantine_labels_change_nothing():
    cfg = _config(attack=Honest(), byzantine=(0,), f=1, runs=3)
    plain = _config(attack=Honest(), byzantine=(), f=1, runs=3)
    assert np.array_equal(simulate(cfg).arms, simulate(plain).arms)


def test_point_mass_greedy_picks_best_arm_everywhere():
    env = ArmEnvironment([PointMass(0.2), PointMass(0.9), PointMass(0.5)])
    cfg = _config(env=env, graph=Fixed(DirectedGraph.complete(4)), n_agents=4, byzantine=(), f=1,
                  attack=Honest(), policy=ResilientGreedy(), horizon=30, runs=1)
    assert (simulate(cfg).arms == 1).all()


def test_point_mass_ucb_regret_is_logarithmic():
    env = ArmEnvironment([PointMass(0.2), PointMass(0.9)])
    cfg = _config(env=env, graph=Fixed(DirectedGraph.complete(4)), n_agents=4, byzantine=(), f=1,
                  attack=Honest(), horizon=2000, runs=1)
    pulls = (simulate(cfg).arms[0] == 0).sum(axis=0)
    assert (pulls <= 8 * math.log(2000) / 0.7 ** 2).all()


def test_regret_example_and_monotone():
    arms = np.zeros((100, 1), dtype=int)
    arms[:30] = 3
    regret = compute_regret(arms, [0.0, 0.05, 0.1, 0.2])
    assert regret[-1, 0] == pytest.approx(6.0)
    assert (np.diff(regret[:, 0]) >= 0).all()
    assert compute_regret(np.zeros((5, 2), dtype=int), [0.0, 0.1])[-1].tolist() == [0.0, 0.0]


def test_stage_boundaries():
    assert stage_bounds(9) == [(0, 3), (3, 6), (6, 9)]
    assert stage_bounds(10) == [(0, 3), (3, 6), (6, 10)]


def test_run_result_invariants():
    cfg = _config(runs=3, horizon=99)
    result = run_batch(cfg)
    for run in result.runs:
        assert (np.diff(run.regret, axis=0) >= 0).all()
        normal_final = run.final_counts[cfg.normal_ids]
        assert (run.stage_counts.sum(axis=2) == normal_final - 1).all()
        assert run.regret.shape == (99, 4)
    freq = result.frequencies
    assert np.allclose(freq.sum(axis=1), 1.0)
    assert (result.std_regret >= 0).all()


def test_frequency_of_constant_pulls():
    cfg = _config(env=ArmEnvironment([PointMass(0.9), PointMass(0.1)]), graph=Fixed(DirectedGraph.complete(3)),
                  n_agents=3, byzantine=(), attack=Honest(), policy=ResilientGreedy(), horizon=9, runs=2)
    result = run_batch(cfg)
    assert result.frequencies[:, 0, :].tolist() == [[1.0, 1.0, 1.0]] * 3
    assert selection_frequency_by_stage(result.runs)[:, 1].max() == 0.0


def test_single_run_has_zero_std():
    result = run_batch(_config(runs=1, horizon=50))
    assert (result.std_regret == 0).all()
    assert np.array_equal(result.mean_regret, result.runs[0].regret)


def test_run_batch_deterministic_across_workers_and_batches():
    cfg = _config(runs=5, horizon=120, graph=ErRandomPerRound(0.5), attack=GaussianBias())
    a = run_batch(cfg, workers=1)
    b = run_batch(cfg, workers=2)
    c = run_batch(cfg, workers=1, batch_size=2)
    for other in (b, c):
        assert np.array_equal(a.mean_regret, other.mean_regret)
        assert np.array_equal(a.std_network, other.std_network)
        assert np.array_equal(a.resilient_bound, other.resilient_bound)


def test_ucb1_bound_values():
    gaps = [0.0, 0.05, 0.1, 0.2]
    assert ucb1_bound(gaps, 10_000) == pytest.approx(2580.40, abs=0.01)
    assert ucb1_bound(gaps, 1) == pytest.approx((1 + math.pi ** 2 / 3) * 0.35)
    assert ucb1_bound([0.0], 100) == 0.0
    assert ucb1_bound(ENV, 10_000) == pytest.approx(ucb1_bound_curve(gaps, 10_000)[-1])


@given(st.integers(1, 300), st.integers(0, 10_000))
def test_resilient_bound_properties(T, seed):
    rng = np.random.default_rng(seed)
    g = rng.choice([1.0, 0.625, 0.4], size=(T, 4))
    plain, tau = resilient_bound(g, [0.0, 0.05, 0.1, 0.2], T)
    assert tau <= plain + 1e-9
    assert plain <= ucb1_bound([0.0, 0.05, 0.1, 0.2], T) + 1e-9


def test_resilient_bound_reductions():
    gaps = [0.0, 0.05, 0.1, 0.2]
    T = 500
    plain, _ = resilient_bound(np.ones((T, 4)), gaps)
    assert plain == pytest.approx(ucb1_bound(gaps, T), rel=1e-12)
    const = (1 + math.pi ** 2 / 3) * 0.35
    scaled, _ = resilient_bound(np.full((T, 4), 0.625), gaps)
    assert scaled == pytest.approx(0.625 * (ucb1_bound(gaps, T) - const) + const, rel=1e-12)


def test_engine_bound_tracking_matches_pure_function():
    cfg = _config(runs=3, horizon=150, graph=ErRandomPerRound(0.7))
    out = simulate(cfg, options=SimOptions(record_g=True))
    for r in range(3):
        for h, agent in enumerate(cfg.normal_ids):
            trace = out.g_trace[r, 1:, agent]
            plain, tau = resilient_bound(trace, ENV.gaps, cfg.horizon)
            assert out.bound_curve[r, -1, h] == pytest.approx(plain, rel=1e-12)
            assert out.bound_tau_min[r, h] == pytest.approx(tau, rel=1e-12)
            assert out.bound_curve[r, 9, h] == pytest.approx(resilient_bound(trace[:10], ENV.gaps)[0], rel=1e-12)


def test_budget_violations_counted():
    cfg = _config(graph=Fixed(DirectedGraph.complete(5)), byzantine=(0, 1), f=1, horizon=30, runs=2)
    assert [r.budget_violations for r in run_batch(cfg).runs] == [30, 30]
    assert run_batch(_config(graph=Fixed(DirectedGraph.complete(5)), horizon=30, runs=1)).budget_violations == 0


def test_invariant_violation_names_agent_arm_round(monkeypatch):
    real = engine.filter_arrays

    def broken(*args, **kw):
        z, g, b = real(*args, **kw)
        g = g.copy()
        g[..., 2, 1] = 1.5
        return z, g, b

    monkeypatch.setattr(engine, "filter_arrays", broken)
    with pytest.raises(InvariantViolation, match="agent 2, arm 1, round 0"):
        simulate(_config(horizon=5, runs=1))


def test_probes_record_round_start_estimates():
    cfg = _config(horizon=20, runs=2)
    out = simulate(cfg, options=SimOptions(probes=(0, 20)))
    assert set(out.probes) == {0, 20}
    assert out.probes[0].shape == (2, 5, 4)


@pytest.mark.parametrize("kw,path", [
    (dict(byzantine=(7,)), "agents.byzantine"),
    (dict(byzantine=(0, 1, 2, 3, 4)), "agents.byzantine"),
    (dict(kappa=2.0), "agents.kappa"),
    (dict(kappa=(1.0, 1.0)), "agents.kappa"),
    (dict(horizon=0), "horizon"),
    (dict(runs=0), "runs"),
    (dict(f=-1), "agents.f"),
    (dict(attack=ConstantBroadcast((0.1,))), "attack.means"),
    (dict(graph=Fixed(DirectedGraph.complete(3))), "graph"),
    (dict(attack=ConsensusConstant()), "attack"),
    (dict(policy=RunningConsensusTrimmed(), attack=Adaptive()), "attack"),
])
def test_config_validation(kw, path):
    with pytest.raises(ConfigError) as err:
        _config(**kw)
    assert err.value.path == path


def test_empty_byzantine_set_is_valid():
    cfg = _config(byzantine=(), f=0, horizon=20, runs=1)
    assert run_batch(cfg).normal_ids == [0, 1, 2, 3, 4]
