import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxweight.controller import QLA, ControllerConfig, Randomized, qla_decide, qla_objectives, randomized_decide, simulate, simulate_replications
from maxweight.instances import random_instance
from maxweight.rng import stream


def test_V_below_one_rejected():
    with pytest.raises(ValueError):
        QLA(0.5)
    with pytest.raises(ValueError):
        ControllerConfig(2.0, tie_break="random")


def test_worked_crossover(worked):
    # x1 beats x2 exactly when 3q > V; a tie at q = V/3 goes to x1 (index 0)
    spec, _ = worked
    V = 3.0
    assert qla_decide(spec, "s1", [0.5], V) == 1
    assert qla_decide(spec, "s1", [1.0], V) == 0
    assert qla_decide(spec, "s1", [1.5], V) == 0
    assert qla_decide(spec, "s1", [V / 3 - 1e-9], V) == 1


@given(st.integers(0, 24), st.floats(1, 100), st.lists(st.floats(0, 50), min_size=3, max_size=3), st.floats(0.1, 10))
def test_scaling_invariance(seed, V, q, c):
    spec, _ = random_instance(seed)
    q = np.array(q[: spec.r])
    a = qla_objectives(spec, 0, q, V)
    b = qla_objectives(spec, 0, c * q, c * V)
    np.testing.assert_allclose(b, c * a, rtol=1e-12, atol=1e-9)
    assert qla_decide(spec, 0, q, V) == int(np.argmax(a))


def test_argmax_optimal_among_actions():
    spec, _ = random_instance(3)
    rng = np.random.default_rng(0)
    for _ in range(200):
        q = rng.uniform(0, 20, spec.r)
        s = int(rng.integers(spec.M))
        k = qla_decide(spec, s, q, 7.0)
        obj = qla_objectives(spec, s, q, 7.0)
        assert np.all(obj <= obj[k])


def test_trace_shapes_and_replay():
    spec, _ = random_instance(1)
    tr = simulate(spec, QLA(4), 500, seed=2)
    assert tr.q.shape == (501, spec.r)
    assert tr.horizon == 500
    assert tr.is_consistent()
    for t in range(0, 500, 37):
        assert tr.actions[t] == qla_decide(spec, int(tr.states[t]), tr.q[t], 4.0)


def test_worked_trace_pattern(worked):
    spec, _ = worked
    tr = simulate(spec, QLA(3), 12, seed=0)
    # q: 0 ->1 (x2), tie at q=1 goes to x1 -> 0
    assert list(tr.actions[:4]) == [1, 0, 1, 0]


def test_same_seed_same_trace():
    spec, _ = random_instance(5)
    a = simulate(spec, QLA(8), 2000, seed=9)
    b = simulate(spec, QLA(8), 2000, seed=9)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.actions, b.actions)


def test_randomized_policy_frequency(worked):
    spec, cert = worked
    tr = simulate(spec, Randomized(cert), 400_000, seed=4)
    assert abs(np.mean(tr.actions == 0) - 0.5) < 0.002


def test_randomized_decide_matches_simulate(worked):
    spec, cert = worked
    tr = simulate(spec, Randomized(cert), 50, seed=8)
    rng = stream(8, "policy")
    assert [randomized_decide(cert, 0, rng) for _ in range(50)] == list(tr.actions)


def test_replications_use_consecutive_seeds():
    spec, _ = random_instance(2)
    reps = simulate_replications(spec, QLA(2), 300, 3, seed_base=10, workers=2)
    assert [t.seed for t in reps] == [10, 11, 12]
    np.testing.assert_array_equal(reps[1].states, simulate(spec, QLA(2), 300, 11).states)


def test_bad_horizon(worked):
    spec, _ = worked
    with pytest.raises(ValueError):
        simulate(spec, QLA(1), 0, seed=0)


def test_csv_columns(tmp_path, worked):
    spec, _ = worked
    tr = simulate(spec, QLA(2), 5, seed=0)
    p = tmp_path / "t.csv"
    tr.write_csv(p, spec)
    lines = p.read_text().splitlines()
    assert lines[0] == "slot,state,action,cost,q_1,L,drift_lhs,drift_rhs"
    assert len(lines) == 6
    assert lines[1].startswith("0,s1,x2,0,1,0.5")
