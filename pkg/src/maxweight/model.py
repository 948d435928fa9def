"""Network instance: queues, per-state finite action tables, the B constant
and the slackness certificate."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import sqrt
from typing import NamedTuple, Sequence

import numpy as np

from .markov import MarkovChainSpec, chain_violations, default_reference_state, stationary_distribution

SLACK_TOL = 1e-10


class SpecError(ValueError):
    pass


class SlacknessError(ValueError):
    """Certificate fails the slackness inequality at some queue."""

    def __init__(self, message: str, queue: int | None = None, achieved: float | None = None):
        super().__init__(message)
        self.queue = queue
        self.achieved = achieved


@dataclass(frozen=True)
class Action:
    label: str
    cost: float
    arrivals: tuple
    services: tuple

    def __post_init__(self):
        object.__setattr__(self, "label", str(self.label))
        object.__setattr__(self, "cost", float(self.cost))
        object.__setattr__(self, "arrivals", tuple(float(a) for a in self.arrivals))
        object.__setattr__(self, "services", tuple(float(m) for m in self.services))


class ActionTables(NamedTuple):
    """Padded array view of the action lists (see :mod:`maxweight._kernels`)."""

    cost: np.ndarray
    arr: np.ndarray
    srv: np.ndarray
    nact: np.ndarray


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    state: str | None = None
    action: str | None = None
    queue: int | None = None


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    r: int
    chain: MarkovChainSpec
    actions: tuple
    delta_max: float
    reference_state: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(tuple(acts) for acts in self.actions))
        object.__setattr__(self, "delta_max", float(self.delta_max))

    @property
    def M(self) -> int:
        return self.chain.M

    @cached_property
    def pi(self) -> np.ndarray:
        return stationary_distribution(self.chain).pi

    @cached_property
    def reference_index(self) -> int:
        if self.reference_state is not None:
            return self.chain.index(self.reference_state)
        return default_reference_state(self.chain)

    @cached_property
    def tables(self) -> ActionTables:
        K = max(len(a) for a in self.actions)
        cost = np.zeros((self.M, K))
        arr = np.zeros((self.M, K, self.r))
        srv = np.zeros((self.M, K, self.r))
        nact = np.array([len(a) for a in self.actions], dtype=np.int64)
        for i, acts in enumerate(self.actions):
            for k, act in enumerate(acts):
                cost[i, k] = act.cost
                arr[i, k] = act.arrivals
                srv[i, k] = act.services
        for a in (cost, arr, srv, nact):
            a.setflags(write=False)
        return ActionTables(cost, arr, srv, nact)

    def action_index(self, state, action) -> int:
        i = self.chain.index(state)
        if isinstance(action, (int, np.integer)) and not isinstance(action, bool):
            if not 0 <= action < len(self.actions[i]):
                raise IndexError(f"action index {action} out of range in state {self.chain.state_labels[i]}")
            return int(action)
        for k, act in enumerate(self.actions[i]):
            if act.label == str(action):
                return k
        raise KeyError(f"unknown action {action!r} in state {self.chain.state_labels[i]}")


@dataclass(frozen=True)
class SlacknessCertificate:
    """Per state, ``(action_index, probability)`` pairs; plus the claimed slack."""

    weights: tuple
    eta: float

    def __post_init__(self):
        object.__setattr__(
            self, "weights", tuple(tuple((int(k), float(p)) for k, p in ws) for ws in self.weights)
        )
        object.__setattr__(self, "eta", float(self.eta))

    def probabilities(self, spec: NetworkSpec) -> np.ndarray:
        """Dense ``(M, K)`` matrix of action probabilities."""
        K = spec.tables.cost.shape[1]
        out = np.zeros((spec.M, K))
        for i, ws in enumerate(self.weights):
            for k, p in ws:
                out[i, k] += p
        return out


def compute_B(spec: NetworkSpec) -> float:
    """``sqrt(r) * delta_max``, after checking ``|A - mu| <= B`` on every action."""
    B = sqrt(spec.r) * spec.delta_max
    for i, acts in enumerate(spec.actions):
        for act in acts:
            d = np.subtract(act.arrivals, act.services)
            if float(np.sqrt(d @ d)) > B * (1 + 1e-12):
                raise SpecError(
                    f"action {act.label} in state {spec.chain.state_labels[i]} has |A - mu| > B = {B}"
                )
    return B


def validate_spec(spec: NetworkSpec) -> list[Violation]:
    """Every structural violation in ``spec``, with coordinates."""
    out = [Violation("chain", msg) for msg in chain_violations(spec.chain)]
    if not isinstance(spec.r, (int, np.integer)) or spec.r < 1:
        out.append(Violation("shape", f"queue count r must be an integer >= 1, got {spec.r!r}"))
        return out
    dm = spec.delta_max
    if not (np.isfinite(dm) and dm > 0):
        out.append(Violation("bound", f"delta_max must be finite and positive, got {dm!r}"))
    if len(spec.actions) != spec.M:
        out.append(Violation("shape", f"{len(spec.actions)} action lists for {spec.M} states"))
        return out
    labels = spec.chain.state_labels
    for i, acts in enumerate(spec.actions):
        s = labels[i]
        if len(acts) == 0:
            out.append(Violation("empty", f"state {s} has no actions", state=s))
        names = [a.label for a in acts]
        if len(set(names)) != len(names):
            out.append(Violation("shape", f"duplicate action labels in state {s}", state=s))
        for act in acts:
            for field, vec in (("arrivals", act.arrivals), ("services", act.services)):
                if len(vec) != spec.r:
                    out.append(
                        Violation(
                            "shape",
                            f"{field} of action {act.label} in state {s} has length {len(vec)}, expected {spec.r}",
                            state=s,
                            action=act.label,
                        )
                    )
            if not (0.0 <= act.cost <= dm):
                out.append(
                    Violation(
                        "bound",
                        f"cost {act.cost!r} of action {act.label} in state {s} outside [0, {dm}]",
                        state=s,
                        action=act.label,
                    )
                )
            for field, vec in (("arrivals", act.arrivals), ("services", act.services)):
                for j, v in enumerate(vec):
                    if not (0.0 <= v <= dm):
                        out.append(
                            Violation(
                                "bound",
                                f"{field}[{j}] = {v!r} of action {act.label} in state {s} outside [0, {dm}]",
                                state=s,
                                action=act.label,
                                queue=j,
                            )
                        )
    return out


def net_drift(spec: NetworkSpec, probs: np.ndarray) -> np.ndarray:
    """Per-queue ``sum_i pi_i sum_k p_ik (A_j - mu_j)`` for action probabilities ``probs``."""
    t = spec.tables
    return np.einsum("i,ik,ikj->j", spec.pi, probs, t.arr - t.srv)


def verify_slackness(spec: NetworkSpec, cert: SlacknessCertificate) -> float:
    """Largest slack the certificate achieves; raises if it is below the claim."""
    if not cert.eta > 0:
        raise SlacknessError(f"claimed slack must be positive, got {cert.eta!r}")
    if len(cert.weights) != spec.M:
        raise SlacknessError(f"certificate covers {len(cert.weights)} states, spec has {spec.M}")
    labels = spec.chain.state_labels
    for i, ws in enumerate(cert.weights):
        if not ws:
            raise SlacknessError(f"certificate has no entries for state {labels[i]}")
        if len(ws) > spec.r + 2:
            raise SlacknessError(f"certificate has {len(ws)} entries for state {labels[i]}; at most r+2 allowed")
        for k, p in ws:
            if not 0 <= k < len(spec.actions[i]):
                raise SlacknessError(f"certificate names action index {k} missing from state {labels[i]}")
            if p < 0:
                raise SlacknessError(f"negative probability {p!r} in state {labels[i]}")
        total = sum(p for _, p in ws)
        if abs(total - 1.0) > SLACK_TOL:
            raise SlacknessError(f"probabilities for state {labels[i]} sum to {total!r}")
    drift = net_drift(spec, cert.probabilities(spec))
    achieved = float(-drift.max())
    if achieved < cert.eta - SLACK_TOL:
        j = int(np.argmax(drift))
        raise SlacknessError(
            f"queue {j} has net drift {drift[j]!r}; certificate claims slack {cert.eta!r}",
            queue=j,
            achieved=achieved,
        )
    return achieved


def suggest_certificate(spec: NetworkSpec) -> SlacknessCertificate:
    """Maximum-slack stationary randomized policy, found by linear programming.

    A convenience for building instances; loaded certificates are verified,
    not replaced, by this.
    """
    from .simplex import solve_lp

    t = spec.tables
    pi = spec.pi
    cols = [(i, k) for i in range(spec.M) for k in range(t.nact[i])]
    n = len(cols) + 1  # last column is the slack eta
    c = np.zeros(n)
    c[-1] = -1.0
    A_ub = np.zeros((spec.r + 1, n))
    for col, (i, k) in enumerate(cols):
        A_ub[: spec.r, col] = pi[i] * (t.arr[i, k] - t.srv[i, k])
    A_ub[: spec.r, -1] = 1.0
    A_ub[spec.r, -1] = 1.0
    b_ub = np.zeros(spec.r + 1)
    b_ub[spec.r] = compute_B(spec)
    A_eq = np.zeros((spec.M, n))
    for col, (i, _) in enumerate(cols):
        A_eq[i, col] = 1.0
    res = solve_lp(c, A_ub, b_ub, A_eq, np.ones(spec.M))
    eta = res.x[-1]
    if eta <= SLACK_TOL:
        raise SlacknessError("no stationary randomized policy has positive slack")
    weights = [[] for _ in range(spec.M)]
    for col, (i, k) in enumerate(cols):
        if res.x[col] > 0:
            weights[i].append((k, res.x[col]))
    weights = [[(k, p / sum(q for _, q in ws)) for k, p in ws] for ws in weights]
    cert = SlacknessCertificate(weights, eta)
    achieved = -float(net_drift(spec, cert.probabilities(spec)).max())
    return SlacknessCertificate(weights, min(eta, achieved))


def make_spec(
    states: Sequence,
    transition,
    actions: dict | Sequence,
    delta_max: float,
    r: int | None = None,
    reference_state=None,
) -> NetworkSpec:
    """Build a spec from plain Python data.

    ``actions`` maps each state (or lists, in state order) to a sequence of
    ``Action`` or ``(label, cost, arrivals, services)`` tuples.
    """
    chain = MarkovChainSpec(tuple(states), np.asarray(transition, dtype=float))
    if isinstance(actions, dict):
        lists = [actions[s] for s in states]
    else:
        lists = list(actions)
    built = []
    for acts in lists:
        built.append(tuple(a if isinstance(a, Action) else Action(*a) for a in acts))
    if r is None:
        r = len(built[0][0].arrivals)
    return NetworkSpec(r, chain, tuple(built), delta_max, None if reference_state is None else str(reference_state))
