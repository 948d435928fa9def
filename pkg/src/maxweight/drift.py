"""Per-slot drift checks, renewal-cycle accounting and the utility/backlog
bounds for QLA, with Monte Carlo comparison."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .controller import QLA, ControllerConfig, Trace, simulate_replications
from .dual import g_batch, optimal_stationary_cost
from .markov import ReturnTimeStats, bound_constants, return_and_hitting_moments
from .model import NetworkSpec, compute_B

DRIFT_TOL = 1e-9


class TraceMismatchError(ValueError):
    pass


@dataclass
class DriftCheck:
    V: float
    B: float
    lhs: np.ndarray
    rhs: np.ndarray
    violations: np.ndarray

    @property
    def passed(self) -> bool:
        return self.violations.size == 0

    @property
    def first_violation(self) -> int | None:
        return int(self.violations[0]) if self.violations.size else None

    @property
    def max_excess(self) -> float:
        return float(np.max(self.lhs - self.rhs))


def _check_trace(trace: Trace, spec: NetworkSpec) -> None:
    t = spec.tables
    T = trace.horizon
    if trace.q.shape != (T + 1, spec.r):
        raise TraceMismatchError(f"trace backlog has shape {trace.q.shape}, spec expects ({T + 1}, {spec.r})")
    if T and (trace.states.min() < 0 or trace.states.max() >= spec.M):
        raise TraceMismatchError("trace visits states outside the spec's chain")
    if np.any(trace.actions < 0) or np.any(trace.actions >= t.nact[trace.states]):
        raise TraceMismatchError("trace uses action indices outside the state's action list")
    if not (
        np.array_equal(trace.costs, t.cost[trace.states, trace.actions])
        and np.array_equal(trace.arrivals, t.arr[trace.states, trace.actions])
        and np.array_equal(trace.services, t.srv[trace.states, trace.actions])
    ):
        raise TraceMismatchError("trace cost/arrival/service rows disagree with the spec's action tables")


def check_drift(trace: Trace, spec: NetworkSpec, V: float | None = None, tol: float = DRIFT_TOL) -> DriftCheck:
    """Check ``L(t+1) - L(t) + V f(t) <= B^2 + g_{S(t)}(q(t))`` on every slot.

    The right side is evaluated by the dual module, not read from the
    controller.  Holds on every slot of a QLA trace; other policies may
    violate it, and violations are reported rather than raised.  The
    per-slot values are also stored on ``trace`` for CSV output.
    """
    if V is None:
        V = trace.V
        if V is None:
            raise TraceMismatchError("V must be given for traces not produced by QLA")
    elif trace.V is not None and float(V) != trace.V:
        raise TraceMismatchError(f"trace was produced with V={trace.V}, checked with V={V}")
    _check_trace(trace, spec)
    B = compute_B(spec)
    lhs = (trace.L[1:] - trace.L[:-1]) + V * trace.costs
    gvals, _ = g_batch(spec, trace.states, trace.q[:-1], V)
    rhs = B * B + gvals
    trace.drift_lhs = lhs
    trace.drift_rhs = rhs
    return DriftCheck(float(V), B, lhs, rhs, np.flatnonzero(lhs > rhs + tol))


@dataclass(frozen=True)
class RenewalCycle:
    start: int
    end: int
    counts: np.ndarray

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class RenewalDecomposition:
    """Cycles between consecutive visits to the reference state.

    Cycle ``k`` covers slots ``[starts[k], starts[k] + lengths[k])``;
    ``counts[k, i]`` is the number of those slots spent in state ``i``.
    """

    reference_state: int
    starts: np.ndarray
    lengths: np.ndarray
    counts: np.ndarray

    @property
    def n_cycles(self) -> int:
        return int(self.lengths.size)

    def cycles(self) -> list[RenewalCycle]:
        return [
            RenewalCycle(int(s), int(s + n), self.counts[k])
            for k, (s, n) in enumerate(zip(self.starts, self.lengths))
        ]

    def mean_length(self) -> tuple[float, float]:
        return _mean_se(self.lengths.astype(float))

    def mean_occupation(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.counts.astype(float)
        n = c.shape[0]
        se = c.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(c.shape[1])
        return c.mean(axis=0), se

    def check(self, pi, n_se: float = 4.0, min_cycles: int = 1000) -> dict:
        """Compare per-cycle means with ``pi_i / pi_ref`` and ``1 / pi_ref``."""
        if self.n_cycles < min_cycles:
            raise ValueError(f"only {self.n_cycles} cycles; need at least {min_cycles}")
        pi = np.asarray(pi, dtype=float)
        expected = pi / pi[self.reference_state]
        occ, occ_se = self.mean_occupation()
        ml, ml_se = self.mean_length()
        occ_ok = np.abs(occ - expected) <= n_se * occ_se + 1e-12
        len_ok = abs(ml - 1.0 / pi[self.reference_state]) <= n_se * ml_se + 1e-12
        return {
            "occupation_mean": occ,
            "occupation_se": occ_se,
            "occupation_expected": expected,
            "occupation_ok": bool(occ_ok.all()),
            "length_mean": ml,
            "length_se": ml_se,
            "length_expected": 1.0 / pi[self.reference_state],
            "length_ok": bool(len_ok),
            "passed": bool(occ_ok.all() and len_ok),
        }


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(x.mean()), se


def renewal_decompose(states, reference_state: int, M: int) -> RenewalDecomposition:
    """Split ``[first visit, last visit)`` of the reference state into cycles.

    ``states`` may be a state array or a :class:`Trace`.
    """
    if isinstance(states, Trace):
        states = states.states
    states = np.asarray(states, dtype=np.int64)
    visits = np.flatnonzero(states == reference_state)
    if visits.size < 2:
        raise ValueError(f"reference state visited {visits.size} time(s); need at least 2")
    counts = np.empty((visits.size - 1, M), dtype=np.int64)
    for i in range(M):
        c = np.concatenate([[0], np.cumsum(states == i)])
        counts[:, i] = c[visits[1:]] - c[visits[:-1]]
    return RenewalDecomposition(int(reference_state), visits[:-1], np.diff(visits), counts)


def initial_transient(trace: Trace, reference_state: int, B: float) -> tuple[int, float, float]:
    """``(T_j1, L(T_j1), T_j1^2 B^2 / 2)`` for the first hit of the reference state."""
    hits = np.flatnonzero(trace.states == reference_state)
    if hits.size == 0:
        raise ValueError("trace never reaches the reference state")
    t = int(hits[0])
    return t, float(trace.L[t]), t * t * B * B / 2.0


@dataclass
class BoundReport:
    V: float
    B: float
    delta_max: float
    eta: float
    reference_state: int
    T1_mean: float
    T1_m2: float
    C: float
    D: float
    f_star_av: float
    utility_bound: float
    backlog_bound: float
    C_proof: float
    util_emp: float | None = None
    util_se: float | None = None
    bl_emp: float | None = None
    bl_se: float | None = None
    util_margin: float | None = None
    bl_margin: float | None = None
    replications: int = 0
    horizon: int = 0
    mean_first_hit: float | None = None
    flags: list = field(default_factory=list)

    def recomputed(self) -> tuple[float, float]:
        """Both bounds re-derived from the stored components."""
        B2 = self.B * self.B
        u = self.f_star_av + self.C * B2 / (self.V * self.T1_mean)
        b = (self.C * B2 + self.T1_mean * self.V * self.delta_max) / self.eta + self.D * B2 / 2.0
        return u, b

    def to_dict(self) -> dict:
        return asdict(self)


def qla_bounds(spec: NetworkSpec, stats: ReturnTimeStats, eta: float, V: float, f_star_av: float) -> BoundReport:
    """Utility bound ``f* + C B^2 / (V T1)`` and backlog bound
    ``(C B^2 + T1 V delta_max) / eta + D B^2 / 2``.

    ``C_proof = (T1^2 + T1) / 2`` is the smaller constant that the drift
    argument itself produces; it is reported alongside but not used.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    B = compute_B(spec)
    k = bound_constants(stats)
    T1 = stats.mean_return
    util = f_star_av + k.C * B * B / (V * T1)
    backlog = (k.C * B * B + T1 * V * spec.delta_max) / eta + k.D * B * B / 2.0
    return BoundReport(
        V=float(V),
        B=B,
        delta_max=spec.delta_max,
        eta=float(eta),
        reference_state=stats.reference_state,
        T1_mean=T1,
        T1_m2=stats.second_moment_return,
        C=k.C,
        D=k.D,
        f_star_av=float(f_star_av),
        utility_bound=util,
        backlog_bound=backlog,
        C_proof=0.5 * (stats.second_moment_return + T1),
    )


def empirical_vs_bounds(traces: list[Trace], report: BoundReport, n_se: float = 3.0) -> BoundReport:
    """Fill across-replication means of the time averages and the margins.

    A margin that is not positive by more than ``n_se`` standard errors is
    flagged.
    """
    if not traces:
        raise ValueError("no traces")
    for tr in traces:
        if not isinstance(tr.policy, ControllerConfig) or tr.V != report.V:
            raise ValueError(f"all traces must be QLA with V={report.V}")
    avgs = np.array([tr.time_averages() for tr in traces])
    u, u_se = _mean_se(avgs[:, 0])
    b, b_se = _mean_se(avgs[:, 1])
    hits = []
    for tr in traces:
        h = np.flatnonzero(tr.states == report.reference_state)
        hits.append(float(h[0]) if h.size else float(tr.horizon))
    flags = []
    if not report.utility_bound - u > n_se * u_se:
        flags.append("utility_margin_not_positive")
    if not report.backlog_bound - b > n_se * b_se:
        flags.append("backlog_margin_not_positive")
    return replace(
        report,
        util_emp=u,
        util_se=u_se,
        bl_emp=b,
        bl_se=b_se,
        util_margin=report.utility_bound - u,
        bl_margin=report.backlog_bound - b,
        replications=len(traces),
        horizon=traces[0].horizon,
        mean_first_hit=float(np.mean(hits)),
        flags=flags,
    )


SWEEP_COLUMNS = (
    "V", "f_star", "util_bound", "util_emp", "util_se", "bl_bound", "bl_emp", "bl_se",
    "C", "D", "T1_mean", "T1_m2", "B", "eta",
)


def sweep(
    spec: NetworkSpec,
    eta: float,
    Vs,
    horizon: int,
    reps: int,
    seed_base: int,
    start_state=None,
    workers: int | None = None,
) -> list[BoundReport]:
    """Bounds and Monte Carlo averages for each ``V``; seeds ``seed_base + k``."""
    stats = return_and_hitting_moments(spec.chain, spec.reference_index)
    f_star = optimal_stationary_cost(spec)
    out = []
    for V in Vs:
        rep = qla_bounds(spec, stats, eta, V, f_star)
        traces = simulate_replications(spec, QLA(V), horizon, reps, seed_base, start_state, workers)
        out.append(empirical_vs_bounds(traces, rep))
    return out


def sweep_row(rep: BoundReport) -> dict:
    return {
        "V": rep.V,
        "f_star": rep.f_star_av,
        "util_bound": rep.utility_bound,
        "util_emp": rep.util_emp,
        "util_se": rep.util_se,
        "bl_bound": rep.backlog_bound,
        "bl_emp": rep.bl_emp,
        "bl_se": rep.bl_se,
        "C": rep.C,
        "D": rep.D,
        "T1_mean": rep.T1_mean,
        "T1_m2": rep.T1_m2,
        "B": rep.B,
        "eta": rep.eta,
    }


def fit_slope(x, y) -> float:
    """Least-squares slope of ``y`` on ``x``."""
    return float(np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 1)[0])
