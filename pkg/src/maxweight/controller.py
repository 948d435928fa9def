"""QLA (MaxWeight) decisions, the stationary randomized baseline, and
trace-producing simulation."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .markov import sample_path
from .model import NetworkSpec, SlacknessCertificate
from .queues import lyapunov_rows, step_queues, trace_averages
from .rng import cumulative_rows, stream

TIE_BREAKS = ("lowest-index",)


@dataclass(frozen=True)
class ControllerConfig:
    V: float
    tie_break: str = "lowest-index"

    def __post_init__(self):
        object.__setattr__(self, "V", float(self.V))
        if not self.V >= 1:
            raise ValueError(f"V must be >= 1, got {self.V!r}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")


class QLA(ControllerConfig):
    """QLA policy with parameter ``V``."""


@dataclass(frozen=True)
class Randomized:
    certificate: SlacknessCertificate


Policy = Union[ControllerConfig, Randomized]


def qla_objectives(spec: NetworkSpec, state, q, V: float) -> np.ndarray:
    """``-V f(s, x) + sum_j q_j (mu_j - A_j)`` for every action ``x`` of ``state``."""
    i = spec.chain.index(state)
    t = spec.tables
    n = t.nact[i]
    q = np.asarray(q, dtype=float)
    obj = -V * t.cost[i, :n]
    for j in range(spec.r):
        obj = obj + q[j] * (t.srv[i, :n, j] - t.arr[i, :n, j])
    return obj


def qla_decide(spec: NetworkSpec, state, q, V: float) -> int:
    """Index of the action QLA picks in ``state`` at backlog ``q``.

    Ties go to the lowest action index.
    """
    return int(np.argmax(qla_objectives(spec, state, q, V)))


def _cert_cum(cert: SlacknessCertificate, M: int, K: int) -> np.ndarray:
    probs = np.zeros((M, K))
    for i, ws in enumerate(cert.weights):
        for k, p in ws:
            probs[i, k] += p
    return cumulative_rows(probs)


def randomized_decide(cert: SlacknessCertificate, state: int, rng: np.random.Generator) -> int:
    """Draw an action index with the certificate's probabilities for ``state``.

    Consumes one uniform from ``rng``; with ``rng = stream(seed, "policy")``
    successive calls reproduce the actions of :func:`simulate`.
    """
    ws = cert.weights[state]
    K = max(k for k, _ in ws) + 1
    cum = _cert_cum(SlacknessCertificate([ws], cert.eta), 1, K)[0]
    return min(int(np.searchsorted(cum, rng.random(), side="right")), K - 1)


@dataclass(eq=False)
class Trace:
    """One simulated sample path.

    Row ``t`` of ``states``/``actions``/``costs``/``arrivals``/``services``
    describes slot ``t``; ``q`` and ``L`` have ``T + 1`` rows, ``q[t]`` being
    the backlog at the start of slot ``t``.
    """

    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    arrivals: np.ndarray
    services: np.ndarray
    q: np.ndarray
    L: np.ndarray
    seed: int
    policy: Policy
    start_state: int
    drift_lhs: np.ndarray | None = field(default=None)
    drift_rhs: np.ndarray | None = field(default=None)

    @property
    def horizon(self) -> int:
        return int(self.states.shape[0])

    @property
    def V(self) -> float | None:
        return self.policy.V if isinstance(self.policy, ControllerConfig) else None

    def time_averages(self) -> tuple[float, float]:
        return trace_averages(self.costs, self.q[:-1])

    def replay(self) -> np.ndarray:
        q = np.empty_like(self.q)
        q[0] = self.q[0]
        for t in range(self.horizon):
            q[t + 1] = step_queues(q[t], self.arrivals[t], self.services[t])
        return q

    def is_consistent(self) -> bool:
        return bool(np.array_equal(self.replay(), self.q))

    def write_csv(self, path, spec: NetworkSpec) -> None:
        """Columns: slot, state, action, cost, q_1..q_r, L, drift_lhs, drift_rhs.

        The backlog and ``L`` columns are the post-step values ``q(t+1)``.
        Reals use 17 significant digits.
        """
        labels = spec.chain.state_labels
        r = spec.r
        header = ["slot", "state", "action", "cost"] + [f"q_{j + 1}" for j in range(r)] + ["L", "drift_lhs", "drift_rhs"]

        def fmt(x):
            return format(float(x), ".17g")

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t in range(self.horizon):
                s = int(self.states[t])
                row = [t, labels[s], spec.actions[s][int(self.actions[t])].label, fmt(self.costs[t])]
                row += [fmt(x) for x in self.q[t + 1]]
                row.append(fmt(self.L[t + 1]))
                if self.drift_lhs is None:
                    row += ["", ""]
                else:
                    row += [fmt(self.drift_lhs[t]), fmt(self.drift_rhs[t])]
                w.writerow(row)


def simulate(
    spec: NetworkSpec,
    policy: Policy,
    horizon: int,
    seed: int,
    start_state=None,
    q0=None,
    state_path=None,
) -> Trace:
    """Run ``policy`` for ``horizon`` slots.

    The state path comes from the chain (seeded by ``seed``) unless
    ``state_path`` is given.  ``start_state`` defaults to the spec's
    reference state; ``q0`` defaults to the zero vector.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    t = spec.tables
    if state_path is None:
        start = spec.reference_index if start_state is None else spec.chain.index(start_state)
        states = sample_path(spec.chain, start, horizon, seed)
    else:
        states = np.ascontiguousarray(state_path, dtype=np.int64)
        if states.shape != (horizon,):
            raise ValueError("state_path length must equal horizon")
        start = int(states[0])
    q_init = np.zeros(spec.r) if q0 is None else np.asarray(q0, dtype=float).copy()
    if q_init.shape != (spec.r,) or np.any(q_init < 0):
        raise ValueError("q0 must be a nonnegative vector of length r")

    if isinstance(policy, ControllerConfig):
        actions, q = _kernels.qla_run(states, t.cost, t.arr, t.srv, t.nact, policy.V, q_init)
    elif isinstance(policy, Randomized):
        cum = _cert_cum(policy.certificate, spec.M, t.cost.shape[1])
        u = stream(seed, "policy").random(horizon)
        actions, q = _kernels.randomized_run(states, u, cum, t.arr, t.srv, q_init)
    else:
        raise TypeError(f"unsupported policy {policy!r}")

    return Trace(
        states=states,
        actions=actions,
        costs=t.cost[states, actions],
        arrivals=t.arr[states, actions],
        services=t.srv[states, actions],
        q=q,
        L=lyapunov_rows(q),
        seed=int(seed),
        policy=policy,
        start_state=start,
    )


def worker_count() -> int:
    """Pool size: CPU count, capped by ``MAXWEIGHT_THREADS`` when set."""
    n = os.cpu_count() or 1
    cap = os.environ.get("MAXWEIGHT_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def simulate_replications(
    spec: NetworkSpec,
    policy: Policy,
    horizon: int,
    reps: int,
    seed_base: int,
    start_state=None,
    workers: int | None = None,
) -> list[Trace]:
    """Replications with seeds ``seed_base + k``, returned in ``k`` order."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    workers = workers or worker_count()
    seeds = [seed_base + k for k in range(reps)]

    def one(seed):
        return simulate(spec, policy, horizon, seed, start_state=start_state)

    if workers == 1 or reps == 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))
