from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from byzbandit.core import (AgentState, ArmEnvironment, Bernoulli, ConfigError, InvariantViolation, PointMass,
                            beta_distribution, check_kappa, compute_gaps, initialize_agent, record_pull,
                            sample_reward, uniform_distribution)


def test_gaps_for_four_arm_problem():
    assert compute_gaps([0.5, 0.45, 0.4, 0.3]) == pytest.approx([0.0, 0.05, 0.1, 0.2])


def test_gaps_unsorted_means():
    assert compute_gaps([0.2, 0.9, 0.5]) == pytest.approx([0.7, 0.0, 0.4])


def test_gaps_need_an_arm():
    with pytest.raises(ConfigError):
        compute_gaps([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_gaps_nonnegative_with_a_zero(means):
    gaps = compute_gaps(means)
    assert min(gaps) == 0.0
    assert all(g >= 0 for g in gaps)


@pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
def test_bernoulli_rejects_bad_parameter(p):
    with pytest.raises(ConfigError):
        Bernoulli(p)


def test_point_mass_always_returns_value():
    rng = np.random.default_rng(0)
    d = PointMass(0.3)
    assert {d.sample(rng) for _ in range(20)} == {0.3}


def test_bernoulli_quantile_threshold():
    d = Bernoulli(0.25)
    assert d.quantile(0.2499) == 1.0
    assert d.quantile(0.25) == 0.0


def test_bernoulli_sample_mean():
    rng = np.random.default_rng(1)
    draws = [Bernoulli(0.3).sample(rng) for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(0.3, abs=0.015)


def test_generic_laws_stay_in_unit_interval():
    u = np.linspace(0, 1, 101)
    for d in (beta_distribution(2, 5), uniform_distribution(0.2, 0.6)):
        q = d.quantile(u)
        assert q.min() >= 0 and q.max() <= 1
    assert uniform_distribution(0.2, 0.6).mean == pytest.approx(0.4)


def test_override_must_keep_means():
    with pytest.raises(ConfigError, match="overrides"):
        ArmEnvironment([Bernoulli(0.5)], {1: [PointMass(0.4)]})
    env = ArmEnvironment([Bernoulli(0.5)], {1: [PointMass(0.5)]})
    assert env.arms_for(1)[0] == PointMass(0.5)
    assert env.arms_for(0)[0] == Bernoulli(0.5)


def test_sample_reward_checks_arm():
    env = ArmEnvironment.bernoulli([0.5])
    with pytest.raises(ConfigError):
        sample_reward(env, 3, np.random.default_rng(0))


@pytest.mark.parametrize("kappa", [0.99, 2.0, 2.5])
def test_kappa_range(kappa):
    with pytest.raises(ConfigError):
        check_kappa(kappa)


def test_initialize_pulls_every_arm_once():
    env = ArmEnvironment([PointMass(0.1), PointMass(0.9)])
    state = initialize_agent(0, env, 1.0, np.random.default_rng(0))
    assert state.counts.tolist() == [1, 1]
    assert state.means.tolist() == [0.1, 0.9]


def test_record_pull_updates_one_arm_and_copies():
    state = AgentState(0, np.array([1, 1]), np.array([0.0, 1.0]))
    new = record_pull(state, 1, 0.0)
    assert new.counts.tolist() == [1, 2]
    assert new.means.tolist() == [0.0, 0.5]
    assert state.counts.tolist() == [1, 1]


def test_record_pull_rejects_reward_outside_unit_interval():
    state = AgentState(3, np.array([1]), np.array([0.0]))
    with pytest.raises(InvariantViolation, match="agent 3, arm 0"):
        record_pull(state, 0, 1.5)


@given(st.lists(st.tuples(st.integers(0, 2), st.floats(0, 1)), max_size=40))
def test_means_stay_in_unit_interval(pulls):
    state = AgentState(0, np.ones(3, dtype=np.int64), np.array([0.0, 0.5, 1.0]))
    for arm, reward in pulls:
        state = record_pull(state, arm, reward)
    assert state.counts.sum() == 3 + len(pulls)
    assert np.all((state.means >= 0) & (state.means <= 1))
