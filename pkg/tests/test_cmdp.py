import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from e2cfd.cmdp import (
    EpisodeStats,
    SafetyRequirement,
    Trajectory,
    constrained_fitness,
    discounted_return,
    satisfies,
)


def make_stats(j_c, j_r=1.0):
    return EpisodeStats(
        j_r=j_r,
        j_c=j_c,
        undiscounted_cost=j_c,
        reached_goal=True,
        touched_hazard=j_c > 0,
    )


def test_discounted_return_examples():
    assert discounted_return([1, 1, 1], 0.5) == 1.75
    assert discounted_return([], 0.9) == 0
    assert discounted_return([0, 1, 0], 0.9) == pytest.approx(0.9)


def test_discounted_return_gamma_bounds():
    with pytest.raises(ValueError):
        discounted_return([1.0], 1.5)
    with pytest.raises(ValueError):
        discounted_return([1.0], -0.1)


@given(st.lists(st.floats(min_value=-10, max_value=10), max_size=30))
def test_discounted_return_gamma_edges(values):
    assert discounted_return(values, 1.0) == pytest.approx(sum(values))
    first = values[0] if values else 0.0
    assert discounted_return(values, 0.0) == pytest.approx(first)


def test_satisfies_traditional():
    req = SafetyRequirement("traditional", d=10.0)
    episodes = [make_stats(9.0), make_stats(10.0)]
    assert satisfies(req, episodes)  # mean 9.5
    assert not satisfies(req, [make_stats(10.5)])


def test_satisfies_boundary_is_inclusive():
    req = SafetyRequirement("traditional", d=10.0)
    assert satisfies(req, [make_stats(10.0)])


def test_satisfies_zero_violation():
    req = SafetyRequirement("zero_violation")
    assert satisfies(req, [make_stats(0.0), make_stats(0.0)])
    assert not satisfies(req, [make_stats(0.0), make_stats(0.01)])


def test_satisfies_almost_surely_counts_episodes():
    req = SafetyRequirement("almost_surely", d=10.0, epsilon=0.05)
    ok = [make_stats(11.0)] * 4 + [make_stats(1.0)] * 96
    assert satisfies(req, ok)
    bad = [make_stats(11.0)] * 6 + [make_stats(1.0)] * 94
    assert not satisfies(req, bad)


def test_satisfies_rejects_empty():
    with pytest.raises(ValueError):
        satisfies(SafetyRequirement(), [])


@given(
    st.lists(st.floats(min_value=0, max_value=20), min_size=1, max_size=50),
    st.floats(min_value=0, max_value=20),
)
def test_zero_violation_implies_traditional(costs, d):
    episodes = [make_stats(c) for c in costs]
    zv = SafetyRequirement("zero_violation")
    if satisfies(zv, episodes):
        assert satisfies(SafetyRequirement("traditional", d=d), episodes)


@given(st.lists(st.floats(min_value=0, max_value=20), min_size=1, max_size=50))
def test_almost_surely_zero_epsilon_bounds_every_episode(costs):
    episodes = [make_stats(c) for c in costs]
    req = SafetyRequirement("almost_surely", d=10.0, epsilon=0.0)
    if satisfies(req, episodes):
        assert all(e.j_c <= 10.0 for e in episodes)


def test_requirement_validation():
    with pytest.raises(ValueError):
        SafetyRequirement("bogus")
    with pytest.raises(ValueError):
        SafetyRequirement(d=-1.0)
    with pytest.raises(ValueError):
        SafetyRequirement(epsilon=1.5)


def test_constrained_fitness_examples():
    assert constrained_fitness(5.0, 12.0, 10.0, 1e6) == -1e6
    assert constrained_fitness(5.0, 10.0, 10.0, 1e6) == 5.0
    assert constrained_fitness(-2.0, 0.0, 0.0, 1e6) == -2.0


def test_constrained_fitness_requires_positive_penalty():
    with pytest.raises(ValueError):
        constrained_fitness(1.0, 0.0, 10.0, n=0.0)


@given(
    st.floats(min_value=-100, max_value=100),
    st.floats(min_value=-100, max_value=100),
    st.floats(min_value=0, max_value=20),
    st.floats(min_value=0, max_value=25),
)
def test_constrained_fitness_monotone_in_reward(j_r_low, delta, j_c, d):
    j_r_high = j_r_low + abs(delta)
    low = constrained_fitness(j_r_low, j_c, d)
    high = constrained_fitness(j_r_high, j_c, d)
    assert high >= low
    if j_c > d:
        assert low == high == -1e6


def test_episode_stats_from_trajectory():
    n = 4
    traj = Trajectory(
        observations=np.zeros((n, 11)),
        actions=np.zeros((n, 2)),
        rewards=np.array([1.0, 1.0, 1.0, 0.0]),
        costs=np.array([0.0, 1.0, 0.0, 0.0]),
        shaped_rewards=np.array([1.0, 1.0, 1.0, 0.0]),
        terminated_at_goal=True,
    )
    stats = EpisodeStats.from_trajectory(traj, gamma=0.5)
    assert stats.j_r == 1.75
    assert stats.j_c == 0.5
    assert stats.undiscounted_cost == 1.0
    assert stats.reached_goal
    assert stats.touched_hazard
    assert len(traj) == 4


def test_touched_hazard_tracks_undiscounted_cost():
    clean = Trajectory(
        observations=np.zeros((2, 11)),
        actions=np.zeros((2, 2)),
        rewards=np.zeros(2),
        costs=np.zeros(2),
        shaped_rewards=np.zeros(2),
        terminated_at_goal=False,
    )
    stats = EpisodeStats.from_trajectory(clean)
    assert not stats.touched_hazard
    assert stats.undiscounted_cost == 0.0
