import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxweight.controller import qla_objectives
from maxweight.dual import (
    g,
    g_batch,
    g_c,
    g_si,
    maximize_dual,
    optimal_stationary_cost,
    solve_convexified_lp,
    verify_strong_duality,
)
from maxweight.instances import random_instance

gam1 = st.floats(0, 50, allow_nan=False)


def test_worked_values(worked):
    spec, _ = worked
    v, k, sub = g_si(spec, "s1", [1.0], 1.0)
    assert (v, k) == (-1.0, 0)
    np.testing.assert_array_equal(sub, [-2.0])
    v, k, sub = g_si(spec, "s1", [0.0], 1.0)
    assert (v, k) == (0.0, 1)
    np.testing.assert_array_equal(sub, [1.0])
    # min(1 - 2y, y) peaks at y = 1/3
    assert g(spec, [1 / 3], 1.0).value == pytest.approx(1 / 3, abs=1e-15)


def test_worked_lp(worked):
    spec, _ = worked
    sol = solve_convexified_lp(spec, 1.0)
    assert sol.opt_c == pytest.approx(1 / 3, abs=1e-12)
    w = dict(sol.weights[0])
    assert w[0] == pytest.approx(1 / 3) and w[1] == pytest.approx(2 / 3)
    np.testing.assert_allclose(sol.gamma, [1 / 3], atol=1e-12)


def test_worked_dual_optimum_tight(worked):
    spec, _ = worked
    best = maximize_dual(spec, 1.0, target=1 / 3, tol=1e-9)
    assert abs(best.value - 1 / 3) <= 1e-9


@given(st.integers(0, 24), st.floats(1, 64), st.lists(gam1, min_size=3, max_size=3))
def test_g_si_is_negated_qla_max(seed, V, gam):
    spec, _ = random_instance(seed)
    gam = np.array(gam[: spec.r])
    for i in range(spec.M):
        v, k, _ = g_si(spec, i, gam, V)
        obj = qla_objectives(spec, i, gam, V)
        assert v == pytest.approx(-obj.max(), rel=1e-12, abs=1e-9)
        assert k == int(np.argmax(obj))


@given(st.integers(0, 24), st.floats(1, 64), st.lists(gam1, min_size=6, max_size=6))
def test_subgradient_and_lipschitz(seed, V, both):
    spec, _ = random_instance(seed)
    r = spec.r
    a, b = np.array(both[:r]), np.array(both[3 : 3 + r])
    B = np.sqrt(r) * spec.delta_max
    for i in range(spec.M):
        va, _, G = g_si(spec, i, a, V)
        vb, _, _ = g_si(spec, i, b, V)
        scale = 1e-12 * max(1.0, abs(va), abs(vb))
        assert vb - va <= float(G @ (b - a)) + scale
        assert abs(va - vb) <= B * np.linalg.norm(a - b) + scale


@given(st.integers(0, 24), st.lists(gam1, min_size=6, max_size=6), st.floats(0, 1))
def test_concavity(seed, both, lam):
    spec, _ = random_instance(seed)
    r = spec.r
    a, b = np.array(both[:r]), np.array(both[3 : 3 + r])
    mid = lam * a + (1 - lam) * b
    lhs = g(spec, mid, 4.0).value
    rhs = lam * g(spec, a, 4.0).value + (1 - lam) * g(spec, b, 4.0).value
    assert lhs >= rhs - 1e-9 * max(1.0, abs(rhs))


def test_batch_matches_scalar():
    spec, _ = random_instance(7)
    rng = np.random.default_rng(1)
    states = rng.integers(0, spec.M, 300)
    gams = rng.uniform(0, 30, (300, spec.r))
    vals, ks = g_batch(spec, states, gams, 5.0)
    for t in range(0, 300, 11):
        v, k, _ = g_si(spec, int(states[t]), gams[t], 5.0)
        assert vals[t] == v and ks[t] == k


@pytest.mark.parametrize("seed", range(8))
def test_gc_equals_g(seed):
    spec, _ = random_instance(seed)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        gam = rng.exponential(3.0, spec.r)
        v = g(spec, gam, 2.0).value
        assert g_c(spec, gam, 2.0) == pytest.approx(v, abs=1e-10 * max(1, abs(v)))


@pytest.mark.parametrize("seed", range(6))
def test_lp_against_scipy(seed):
    linprog = pytest.importorskip("scipy.optimize").linprog
    spec, _ = random_instance(seed)
    t = spec.tables
    cols = [(i, k) for i in range(spec.M) for k in range(t.nact[i])]
    c = [spec.pi[i] * t.cost[i, k] for i, k in cols]
    A_ub = np.array([[spec.pi[i] * (t.arr[i, k, j] - t.srv[i, k, j]) for i, k in cols] for j in range(spec.r)])
    A_eq = np.array([[1.0 if i == s else 0.0 for i, _ in cols] for s in range(spec.M)])
    ref = linprog(c, A_ub, np.zeros(spec.r), A_eq, np.ones(spec.M), method="highs")
    assert optimal_stationary_cost(spec) == pytest.approx(ref.fun, abs=1e-10)


def test_gamma_validation(worked):
    spec, _ = worked
    with pytest.raises(ValueError):
        g(spec, [-1.0], 1.0)
    with pytest.raises(ValueError):
        g(spec, [1.0, 2.0], 1.0)


def test_verify_report(worked):
    spec, cert = worked
    rep = verify_strong_duality(spec, 1.0, cert.eta, n_samples=100)
    assert rep.passed, rep.failed()
    assert rep.g_star == pytest.approx(1 / 3, abs=1e-9)
    assert {c.name for c in rep.checks} >= {"zero_duality_gap", "gc_equals_g", "dual_slack_bound"}
