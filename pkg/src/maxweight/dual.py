"""Dual function of the deterministic problem, its maximization, the
convexified linear program, and numeric strong-duality checks."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .model import NetworkSpec, compute_B
from .rng import stream
from .simplex import solve_lp


class DualConvergenceError(ArithmeticError):
    def __init__(self, message: str, best_value: float, gap: float, gamma: np.ndarray):
        super().__init__(message)
        self.best_value = best_value
        self.gap = gap
        self.gamma = gamma


def _gamma(spec: NetworkSpec, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if gamma.shape != (spec.r,):
        raise ValueError(f"gamma must have length r={spec.r}, got {gamma.shape}")
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        raise ValueError("gamma must be finite and componentwise nonnegative")
    return gamma


def _state_values(spec: NetworkSpec, i: int, gamma: np.ndarray, V: float) -> np.ndarray:
    t = spec.tables
    n = t.nact[i]
    v = V * t.cost[i, :n]
    for j in range(spec.r):
        v = v + gamma[j] * (t.arr[i, :n, j] - t.srv[i, :n, j])
    return v


def g_si(spec: NetworkSpec, state, gamma, V: float):
    """``(value, minimizer, subgradient)`` of the single-state dual function.

    Value is ``min_x V f + sum_j gamma_j (A_j - mu_j)`` over the state's
    actions; the subgradient is ``A - mu`` at the lowest-index minimizer.
    """
    i = spec.chain.index(state)
    gamma = _gamma(spec, gamma)
    v = _state_values(spec, i, gamma, V)
    k = int(np.argmin(v))
    t = spec.tables
    return float(v[k]), k, t.arr[i, k] - t.srv[i, k]


@dataclass(frozen=True)
class DualEval:
    gamma: np.ndarray
    value: float
    state_values: np.ndarray
    minimizers: np.ndarray
    subgradients: np.ndarray
    aggregate_subgradient: np.ndarray


def g(spec: NetworkSpec, gamma, V: float) -> DualEval:
    """``g(gamma) = sum_i pi_i g_i(gamma)`` with per-state detail."""
    gamma = _gamma(spec, gamma)
    vals = np.empty(spec.M)
    ks = np.empty(spec.M, dtype=np.int64)
    subs = np.empty((spec.M, spec.r))
    for i in range(spec.M):
        vals[i], ks[i], subs[i] = g_si(spec, i, gamma, V)
    total = 0.0
    agg = np.zeros(spec.r)
    for i in range(spec.M):
        total += spec.pi[i] * vals[i]
        agg = agg + spec.pi[i] * subs[i]
    return DualEval(gamma, total, vals, ks, subs, agg)


def g_batch(spec: NetworkSpec, states, gammas, V: float):
    """Per-slot ``g_{s_t}(gamma_t)`` and minimizer indices, for whole traces."""
    t = spec.tables
    states = np.ascontiguousarray(states, dtype=np.int64)
    gammas = np.ascontiguousarray(gammas, dtype=float)
    return _kernels.dual_batch(states, gammas, t.cost, t.arr, t.srv, t.nact, float(V))


@dataclass(frozen=True)
class DualMaximum:
    gamma: np.ndarray
    value: float
    iterations: int
    method: str


def maximize_dual(
    spec: NetworkSpec,
    V: float,
    a: float | None = None,
    b: float = 10.0,
    max_iter: int = 100_000,
    target: float | None = None,
    tol: float | None = None,
    polish: bool = True,
) -> DualMaximum:
    """Projected subgradient ascent ``gamma <- [gamma + a/(b+n) G]_+``.

    ``G`` is the aggregate subgradient ``sum_i pi_i (A - mu)`` at the
    per-state minimizers and the best iterate is kept.  Without ``target``
    the full ``max_iter`` iterations run.  With ``target`` (the known optimum,
    e.g. from the linear program) the ascent stops once the best value is
    within ``tol`` of it; if the diminishing schedule has not got there and
    ``polish`` is set, Polyak steps ``(target - g)/|G|^2`` continue from the
    best iterate.  Failing both, :class:`DualConvergenceError` is raised.
    """
    t = spec.tables
    a = compute_B(spec) if a is None else float(a)
    gamma0 = np.zeros(spec.r)
    pi = np.ascontiguousarray(spec.pi)
    if target is None:
        tgt, tl = np.inf, 0.0
    else:
        tgt = float(target)
        tl = 1e-6 * (1.0 + abs(tgt)) if tol is None else float(tol)
    args = (t.cost, t.arr, t.srv, t.nact, pi, float(V))
    gam, best, it = _kernels.ascent(*args, gamma0, a, float(b), int(max_iter), tgt, tl, False)
    method = "diminishing"
    if target is not None and best < tgt - tl and polish:
        gam2, best2, it2 = _kernels.ascent(*args, gam.copy(), a, float(b), int(max_iter), tgt, tl, True)
        it += it2
        method = "diminishing+polyak"
        if best2 > best:
            gam, best = gam2, best2
    if target is not None and best < tgt - tl:
        raise DualConvergenceError(
            f"dual ascent stopped {tgt - best:.3e} below the target after {it} iterations",
            best_value=best,
            gap=tgt - best,
            gamma=gam,
        )
    return DualMaximum(np.asarray(gam), float(best), int(it), method)


@dataclass(frozen=True)
class ConvexifiedSolution:
    """Optimal per-state mixing weights of the convexified problem."""

    V: float
    weights: tuple
    opt_c: float
    slacks: np.ndarray
    gamma: np.ndarray

    def probabilities(self, spec: NetworkSpec) -> np.ndarray:
        out = np.zeros(spec.tables.cost.shape)
        for i, ws in enumerate(self.weights):
            for k, w in ws:
                out[i, k] = w
        return out


def convexified_objective(spec: NetworkSpec, probs: np.ndarray, V: float):
    """``(V sum_i pi_i sum_k a_ik f_ik, per-queue sum_i pi_i sum_k a_ik (A - mu))``."""
    t = spec.tables
    probs = np.asarray(probs, dtype=float)
    F = V * float(np.einsum("i,ik,ik->", spec.pi, probs, t.cost))
    slack = np.einsum("i,ik,ikj->j", spec.pi, probs, t.arr - t.srv)
    return F, slack


def solve_convexified_lp(spec: NetworkSpec, V: float) -> ConvexifiedSolution:
    """Minimize the mixed cost subject to nonpositive mean net arrivals.

    Variables are weights over every action of every state (one simplex per
    state).  The returned basic solution puts weight on at most ``r + 1``
    actions per state; ``gamma`` holds the multipliers of the queue
    constraints.
    """
    t = spec.tables
    pi = spec.pi
    cols = [(i, k) for i in range(spec.M) for k in range(t.nact[i])]
    n = len(cols)
    c = np.array([V * pi[i] * t.cost[i, k] for i, k in cols])
    A_ub = np.zeros((spec.r, n))
    A_eq = np.zeros((spec.M, n))
    for col, (i, k) in enumerate(cols):
        A_ub[:, col] = pi[i] * (t.arr[i, k] - t.srv[i, k])
        A_eq[i, col] = 1.0
    res = solve_lp(c, A_ub, np.zeros(spec.r), A_eq, np.ones(spec.M))
    weights = [[] for _ in range(spec.M)]
    for col, (i, k) in enumerate(cols):
        if res.x[col] > 0:
            weights[i].append((k, float(res.x[col])))
    probs = np.zeros(t.cost.shape)
    for i, ws in enumerate(weights):
        for k, w in ws:
            probs[i, k] = w
    _, slacks = convexified_objective(spec, probs, V)
    return ConvexifiedSolution(
        V=float(V),
        weights=tuple(tuple(ws) for ws in weights),
        opt_c=float(res.fun),
        slacks=slacks,
        gamma=np.maximum(-res.duals_ub, 0.0),
    )


def optimal_stationary_cost(spec: NetworkSpec) -> float:
    """Optimal time-average cost ``f*_av``, the convexified optimum at ``V = 1``."""
    return solve_convexified_lp(spec, 1.0).opt_c


def g_c(spec: NetworkSpec, gamma, V: float) -> float:
    """Dual function of the convexified problem.

    Minimizes the Lagrangian over all per-state mixing weights with the
    simplex solver (no vertex enumeration), so agreement with :func:`g` is a
    genuine check.
    """
    gamma = _gamma(spec, gamma)
    t = spec.tables
    cols = [(i, k) for i in range(spec.M) for k in range(t.nact[i])]
    c = np.array(
        [spec.pi[i] * (V * t.cost[i, k] + float(gamma @ (t.arr[i, k] - t.srv[i, k]))) for i, k in cols]
    )
    A_eq = np.zeros((spec.M, len(cols)))
    for col, (i, _) in enumerate(cols):
        A_eq[i, col] = 1.0
    return solve_lp(c, A_eq=A_eq, b_eq=np.ones(spec.M)).fun


def lagrangian_at(spec: NetworkSpec, gamma, V: float, probs: np.ndarray) -> float:
    """Convexified Lagrangian at fixed mixing weights ``probs[i, k]``."""
    gamma = _gamma(spec, gamma)
    F, slack = convexified_objective(spec, probs, V)
    return F + float(gamma @ slack)


def random_simplex_weights(spec: NetworkSpec, rng: np.random.Generator) -> np.ndarray:
    t = spec.tables
    out = np.zeros(t.cost.shape)
    for i in range(spec.M):
        out[i, : t.nact[i]] = rng.dirichlet(np.ones(t.nact[i]))
    return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    witness: list | None = None
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst = float(self.worst)


@dataclass
class DualityReport:
    V: float
    eta: float
    g_star: float
    opt_c: float
    f_star_av: float
    gamma_star: list
    iterations: int
    method: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def sample_gammas(spec: NetworkSpec, V: float, eta: float, n: int, seed: int) -> np.ndarray:
    """``gamma = 0`` followed by ``n`` componentwise Exponential(V delta_max / eta) draws."""
    rng = stream(seed, "states")
    draws = rng.exponential(V * spec.delta_max / eta, size=(n, spec.r))
    return np.vstack([np.zeros((1, spec.r)), draws])


def verify_strong_duality(
    spec: NetworkSpec,
    V: float,
    eta: float,
    n_samples: int = 100,
    seed: int = 0,
    tol: float | None = None,
) -> DualityReport:
    """Numeric checks of zero duality gap and the dual-function bounds.

    Checks, in order: ascent optimum equals ``V f*_av`` (``tol`` defaults to
    ``1e-6 (1 + V f*_av)``); the linear program scales with ``V``; the LP
    multipliers attain the optimum; ``g_c = g`` at every sample; the
    convexified Lagrangian at random weights is never below ``g_c``;
    ``g <= V f*_av``; ``g <= V delta_max - eta sum(gamma)``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    f_star = optimal_stationary_cost(spec)
    lp = solve_convexified_lp(spec, V)
    vf = V * f_star
    tol = 1e-6 * (1.0 + abs(vf)) if tol is None else tol
    checks = []

    # aim tighter than the pass tolerance so reports show the optimum cleanly
    try:
        best = maximize_dual(spec, V, target=vf, tol=min(tol, 1e-10 * (1.0 + abs(vf))))
    except DualConvergenceError as exc:
        best = DualMaximum(exc.gamma, exc.best_value, -1, "stalled")
    gap = abs(best.value - vf)
    checks.append(CheckResult("zero_duality_gap", gap <= tol, gap, np.asarray(best.gamma).tolist(),
                              f"|g* - V f*_av| = {gap:.3e} (tol {tol:.3e})"))

    scale_err = abs(lp.opt_c - vf)
    checks.append(CheckResult("lp_scales_with_V", scale_err <= 1e-9 * (1 + abs(vf)), scale_err, None,
                              f"|OPT_c(V) - V OPT_c(1)| = {scale_err:.3e}"))

    g_lp = g(spec, lp.gamma, V).value
    lp_gap = abs(g_lp - lp.opt_c)
    checks.append(CheckResult("lp_multiplier_attains_optimum", lp_gap <= tol, lp_gap, lp.gamma.tolist(),
                              f"|g(gamma_lp) - OPT_c| = {lp_gap:.3e}"))

    gammas = sample_gammas(spec, V, eta, n_samples, seed)
    wrng = stream(seed, "policy")
    worst = {key: (-np.inf, None) for key in ("gc", "lag", "cor", "prop")}
    ok = {"gc": True, "lag": True, "cor": True, "prop": True}
    for gam in gammas:
        gv = g(spec, gam, V).value
        gcv = g_c(spec, gam, V)
        scale = max(1.0, abs(gv))
        d = abs(gcv - gv)
        if d > worst["gc"][0]:
            worst["gc"] = (d, gam.tolist())
        ok["gc"] &= d <= 1e-10 * scale
        lag = lagrangian_at(spec, gam, V, random_simplex_weights(spec, wrng))
        v = gcv - lag
        if v > worst["lag"][0]:
            worst["lag"] = (v, gam.tolist())
        ok["lag"] &= v <= 1e-12 * scale
        v = gv - vf
        if v > worst["cor"][0]:
            worst["cor"] = (v, gam.tolist())
        ok["cor"] &= v <= 1e-9
        v = gv - (V * spec.delta_max - eta * float(gam.sum()))
        if v > worst["prop"][0]:
            worst["prop"] = (v, gam.tolist())
        ok["prop"] &= v <= 1e-9

    n = len(gammas)
    checks.append(CheckResult("gc_equals_g", ok["gc"], worst["gc"][0], worst["gc"][1],
                              f"max |g_c - g| over {n} samples"))
    checks.append(CheckResult("lagrangian_above_gc", ok["lag"], worst["lag"][0], worst["lag"][1],
                              f"max g_c - Lagrangian(random weights) over {n} samples"))
    checks.append(CheckResult("dual_below_optimum", ok["cor"], worst["cor"][0], worst["cor"][1],
                              f"max g - V f*_av over {n} samples"))
    checks.append(CheckResult("dual_slack_bound", ok["prop"], worst["prop"][0], worst["prop"][1],
                              f"max g - (V delta_max - eta sum gamma) over {n} samples"))

    return DualityReport(
        V=float(V),
        eta=float(eta),
        g_star=float(best.value),
        opt_c=float(lp.opt_c),
        f_star_av=float(f_star),
        gamma_star=np.asarray(best.gamma).tolist(),
        iterations=int(best.iterations),
        method=best.method,
        checks=checks,
    )
