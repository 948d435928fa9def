"""Acceptance criteria 1-9, each at its stated tolerance.

Every test appends one ``PASS``/``FAIL`` line to the acceptance log, which
the terminal summary prints after the run.
"""
import time

import numpy as np
import pytest

from maxweight.cli import main
from maxweight.controller import QLA, simulate, simulate_replications
from maxweight.drift import check_drift, empirical_vs_bounds, fit_slope, qla_bounds, renewal_decompose, sweep
from maxweight.dual import g, g_si, optimal_stationary_cost, solve_convexified_lp, verify_strong_duality
from maxweight.instances import collapsed_iid_stats, data_path, iid_channel_instance, random_instance, worked_instance
from maxweight.markov import (
    MarkovChainSpec,
    bound_constants,
    empirical_return_times,
    iid_state_path,
    mean_return_times,
    return_and_hitting_moments,
    sample_path,
    stationary_distribution,
)
from maxweight.model import compute_B

CORPUS_VS = (1.0, 4.0, 16.0, 64.0)
SWEEP_VS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
HORIZON = 100_000


def verdict(log, n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    log.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def corpus():
    return [worked_instance()] + [random_instance(s) for s in range(25)]


@pytest.fixture(scope="module")
def duality_reports(corpus):
    return {
        (n, V): verify_strong_duality(spec, V, cert.eta, n_samples=100, seed=n)
        for n, (spec, cert) in enumerate(corpus)
        for V in CORPUS_VS
    }


@pytest.fixture(scope="module")
def worked_sweep():
    spec, cert = worked_instance()
    t0 = time.perf_counter()
    reps = sweep(spec, cert.eta, SWEEP_VS, HORIZON, 20, seed_base=0)
    return reps, time.perf_counter() - t0


def test_criterion_1_drift_inequality(corpus, acceptance_log):
    t0 = time.perf_counter()
    traces = slots = 0
    bad = []
    worst = -np.inf
    for n, (spec, _) in enumerate(corpus):
        for V in CORPUS_VS:
            # spread start states over the chain
            for seed in range(5):
                tr = simulate(spec, QLA(V), HORIZON, seed, start_state=seed % spec.M)
                chk = check_drift(tr, spec, tol=1e-9)
                traces += 1
                slots += tr.horizon
                worst = max(worst, chk.max_excess)
                if not chk.passed:
                    bad.append((n, V, seed, chk.first_violation))
    dt = time.perf_counter() - t0
    verdict(
        acceptance_log,
        1,
        not bad and dt < 120,
        f"{traces} QLA traces, {slots} slots, {len(bad)} violating traces, "
        f"max(lhs - rhs) = {worst:.3g}, {dt:.1f} s (target < 120 s)",
    )


def test_criterion_2_zero_duality_gap(corpus, duality_reports, acceptance_log):
    bad = []
    worst = 0.0
    for (n, V), rep in duality_reports.items():
        vf = V * rep.f_star_av
        gap = abs(rep.g_star - vf)
        worst = max(worst, gap / (1 + vf))
        names = ("zero_duality_gap", "lp_scales_with_V", "lp_multiplier_attains_optimum")
        if gap > 1e-6 * (1 + vf) or not all(c.passed for c in rep.checks if c.name in names):
            bad.append((n, V))
    spec, _ = corpus[0]
    f_star = optimal_stationary_cost(spec)
    g_star = duality_reports[(0, 1.0)].g_star
    lp = solve_convexified_lp(spec, 1.0)
    # hand LP: weights (1/3, 2/3) on (x1, x2) give cost 1/3 and zero drift
    worked_ok = abs(g_star - 1 / 3) <= 1e-9 and abs(f_star - 1 / 3) <= 1e-9 and abs(g(spec, lp.gamma, 1.0).value - 1 / 3) <= 1e-9
    verdict(
        acceptance_log,
        2,
        not bad and worked_ok,
        f"{len(duality_reports)} (instance, V) pairs, max |g* - V f*|/(1 + V f*) = {worst:.2e} (tol 1e-6), "
        f"worked g* = {g_star:.12f}, f* = {f_star:.12f} (tol 1e-9), failures {bad}",
    )


def test_criterion_3_dual_upper_bounds(duality_reports, acceptance_log):
    bad = [k for k, rep in duality_reports.items() for c in rep.checks
           if c.name in ("dual_below_optimum", "dual_slack_bound") and not c.passed]
    worst_opt = max(c.worst for rep in duality_reports.values() for c in rep.checks if c.name == "dual_below_optimum")
    worst_slack = max(c.worst for rep in duality_reports.values() for c in rep.checks if c.name == "dual_slack_bound")
    verdict(
        acceptance_log,
        3,
        not bad,
        f"101 multipliers per (instance, V), {len(duality_reports)} pairs, violations {len(bad)}; "
        f"max g - V f* = {worst_opt:.3g}, max g - (V dmax - eta sum gamma) = {worst_slack:.3g} (tol 1e-9)",
    )


def test_criterion_4_subgradient_lipschitz(corpus, acceptance_log):
    rng = np.random.default_rng(2024)
    pairs = violations = 0
    for spec, cert in corpus:
        B = compute_B(spec)
        for V in CORPUS_VS:
            scale = V * spec.delta_max / cert.eta
            for _ in range(100):
                a = rng.exponential(scale, spec.r)
                b = rng.exponential(scale, spec.r) if rng.random() < 0.5 else a + rng.normal(0, 0.1 * scale, spec.r).clip(-a)
                pairs += 1
                ga, gb = g(spec, a, V), g(spec, b, V)
                # relative floor: values reach ~1e3, where 1e-12 absolute is below one ulp
                tol = 1e-12 * max(1.0, abs(ga.value), abs(gb.value))
                bad = gb.value > ga.value + float(ga.aggregate_subgradient @ (b - a)) + tol
                bad |= abs(ga.value - gb.value) > B * float(np.linalg.norm(a - b)) + tol
                for i in range(spec.M):
                    va, _, G = g_si(spec, i, a, V)
                    vb = gb.state_values[i]
                    bad |= vb > va + float(G @ (b - a)) + tol
                    bad |= abs(va - vb) > B * float(np.linalg.norm(a - b)) + tol
                violations += int(bad)
    verdict(
        acceptance_log,
        4,
        violations == 0,
        f"{pairs} (gamma, gamma') pairs over {len(corpus)} instances x {len(CORPUS_VS)} V, "
        f"per-state and aggregate, {violations} violations (tol 1e-12 relative)",
    )


def _hitting_samples(states, ref, j):
    """Hitting times to ``ref`` from the first visit to ``j`` in each renewal cycle."""
    visits = np.flatnonzero(states == ref)
    out = []
    for s, e in zip(visits[:-1], visits[1:]):
        hit = np.flatnonzero(states[s:e] == j)
        if hit.size:
            out.append(e - (s + hit[0]))
    return np.asarray(out, dtype=float)


def _within(x, expected, n_se=4.0):
    se = x.std(ddof=1) / np.sqrt(x.size)
    return abs(x.mean() - expected) <= n_se * se + 1e-12


def test_criterion_5_return_time_machinery(corpus, acceptance_log):
    chains = [spec.chain for spec, _ in corpus if spec.M > 1]
    chains.append(MarkovChainSpec(("a", "b", "c"), [[0.1, 0.6, 0.3], [0.5, 0.2, 0.3], [0.3, 0.3, 0.4]]))
    checks = fails = 0
    worst_inv = 0.0
    for k, chain in enumerate(chains):
        pi = stationary_distribution(chain).pi
        T = mean_return_times(chain)
        worst_inv = max(worst_inv, float(np.max(np.abs(T - 1.0 / pi))))
        ref = int(np.argmax(pi))
        st = return_and_hitting_moments(chain, ref)
        x = empirical_return_times(chain, ref, 100_000, seed=k).astype(float)
        for sample, expected in ((x, st.mean_return), (x * x, st.second_moment_return)):
            checks += 1
            fails += not _within(sample, expected)
        path = sample_path(chain, ref, int(100_000 * st.mean_return) + 100, seed=1000 + k)
        dec = renewal_decompose(path, ref, chain.M)
        res = dec.check(pi, n_se=4.0, min_cycles=min(dec.n_cycles, 1000))
        checks += chain.M + 1
        fails += (not res["occupation_ok"]) + (not res["length_ok"])
        for j in range(chain.M):
            if j == ref:
                continue
            h = _hitting_samples(path, ref, j)
            if h.size > 1000:
                checks += 2
                fails += not _within(h, st.hitting_means[j])
                fails += not _within(h * h, st.hitting_second_moments[j])
    sym = return_and_hitting_moments(MarkovChainSpec(("a", "b"), [[0.5, 0.5], [0.5, 0.5]]), 0)
    sym_ok = abs(sym.mean_return - 2.0) <= 1e-12 and abs(sym.second_moment_return - 6.0) <= 1e-12
    verdict(
        acceptance_log,
        5,
        fails == 0 and worst_inv <= 1e-10 and sym_ok,
        f"{len(chains)} chains, {checks} Monte Carlo checks at 4 SE with {fails} misses; "
        f"max |T_i - 1/pi_i| = {worst_inv:.2e} (tol 1e-10); symmetric chain T1 = {sym.mean_return!r}, "
        f"T1^2 = {sym.second_moment_return!r}",
    )


def test_criterion_6_utility_tradeoff(worked_sweep, acceptance_log):
    reps, dt = worked_sweep
    margins_ok = all(r.util_margin > 3 * r.util_se for r in reps)
    by_V = {r.V: r for r in reps}
    g8 = by_V[8.0].util_emp - by_V[8.0].f_star_av
    g128 = by_V[128.0].util_emp - by_V[128.0].f_star_av
    noise = 3 * np.hypot(by_V[128.0].util_se, by_V[8.0].util_se / 16)
    scaling_ok = g128 <= g8 / 16 + noise
    min_margin = min(r.util_margin for r in reps)
    verdict(
        acceptance_log,
        6,
        margins_ok and scaling_ok and dt < 600,
        f"worked instance, V = 1..128, 20 x 1e5 slots: min utility margin {min_margin:.4g} (> 3 SE at every V); "
        f"gap(8) = {g8:.3g}, gap(128) = {g128:.3g} <= gap(8)/16 + {noise:.2g}; {dt:.1f} s (target < 600 s)",
    )


def test_criterion_7_backlog_tradeoff(worked_sweep, acceptance_log):
    reps, _ = worked_sweep
    margins_ok = all(r.bl_margin > 3 * r.bl_se for r in reps)
    slope = fit_slope([r.V for r in reps], [r.bl_emp for r in reps])
    r0 = reps[0]
    limit = r0.T1_mean * r0.delta_max / r0.eta * 1.1
    verdict(
        acceptance_log,
        7,
        margins_ok and slope <= limit,
        f"min backlog margin {min(r.bl_margin for r in reps):.4g} (> 3 SE at every V); "
        f"fitted slope {slope:.4g} <= T1 dmax / eta * 1.1 = {limit:.4g}",
    )


def test_criterion_8_markov_modulated_iid(acceptance_log):
    spec, cert = iid_channel_instance(10)
    f_star = optimal_stationary_cost(spec)
    full = return_and_hitting_moments(spec.chain, spec.reference_index)
    coll = collapsed_iid_stats()
    k = bound_constants(coll)
    problems = []
    if (k.C, k.D) != (2.0, 0.0):
        problems.append(f"collapsed C, D = {k.C}, {k.D}")
    detail = []
    for V in (4.0, 16.0, 64.0):
        b_full = qla_bounds(spec, full, cert.eta, V, f_star)
        b_coll = qla_bounds(spec, coll, cert.eta, V, f_star)
        if not (b_coll.utility_bound < b_full.utility_bound and b_coll.backlog_bound < b_full.backlog_bound):
            problems.append(f"V={V}: collapsed bounds not tighter")
        tr_full = simulate_replications(spec, QLA(V), HORIZON, 20, seed_base=0)
        tr_coll = [
            simulate(spec, QLA(V), HORIZON, s, state_path=iid_state_path(spec.pi, HORIZON, 10_000 + s))
            for s in range(20)
        ]
        e_full = empirical_vs_bounds(tr_full, b_full)
        e_coll = empirical_vs_bounds(tr_coll, b_coll)
        if e_full.flags or e_coll.flags:
            problems.append(f"V={V}: margins {e_full.flags + e_coll.flags}")
        for name, se_name in (("util_emp", "util_se"), ("bl_emp", "bl_se")):
            d = abs(getattr(e_full, name) - getattr(e_coll, name))
            se = np.hypot(getattr(e_full, se_name), getattr(e_coll, se_name))
            if d > 3 * se:
                problems.append(f"V={V}: {name} differs by {d:.3g} > 3 SE = {3 * se:.3g}")
        detail.append(f"V={V:g} util {b_coll.utility_bound:.3g}<{b_full.utility_bound:.3g} "
                      f"backlog {b_coll.backlog_bound:.4g}<{b_full.backlog_bound:.4g}")
    verdict(
        acceptance_log,
        8,
        not problems,
        f"collapsed C = {k.C:g}, D = {k.D:g} vs 10-state C = {bound_constants(full).C:g}, "
        f"D = {bound_constants(full).D:g}; " + "; ".join(detail) + (f"; problems {problems}" if problems else ""),
    )


def test_criterion_9_determinism(tmp_path, acceptance_log):
    worked = str(data_path("worked_instance.json"))
    from maxweight.specfile import dump_spec

    rand = tmp_path / "random.json"
    dump_spec(rand, *random_instance(7))
    runs = [
        ["--spec", worked, "--mode", "sweep", "--V", "1..128", "--reps", "20", "--horizon", str(HORIZON)],
        ["--spec", worked, "--mode", "verify-duality", "--V", "1,4,16,64"],
        ["--spec", str(rand), "--mode", "simulate", "--V", "1,16", "--reps", "2", "--horizon", "20000"],
        ["--spec", str(rand), "--mode", "verify-drift", "--V", "4", "--reps", "5", "--horizon", str(HORIZON)],
    ]
    files = differing = 0
    for i, args in enumerate(runs):
        outs = []
        for k in range(2):
            d = tmp_path / f"run{i}_{k}"
            assert main(args + ["--out", str(d), "-q"]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        files += len(outs[0])
        differing += sum(outs[0][n] != outs[1].get(n) for n in outs[0]) + len(set(outs[1]) - set(outs[0]))
    verdict(
        acceptance_log,
        9,
        differing == 0,
        f"{len(runs)} CLI runs repeated: {files} CSV/JSON artifacts compared byte for byte, {differing} differ",
    )
