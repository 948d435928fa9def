"""Finite network-state Markov chain: validation, stationary distribution,
exact return/hitting-time moments and seeded sample paths."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Sequence

import numpy as np

from . import _kernels
from .rng import cumulative_rows, stream

ROW_SUM_TOL = 1e-12
# transitions lighter than this do not count as edges of the support graph
SUPPORT_TOL = 1e-12
RESIDUAL_TOL = 1e-12
BALANCE_TOL = 1e-10


class ChainValidationError(ValueError):
    """Raised when a transition matrix is malformed, reducible or periodic."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True, eq=False)
class MarkovChainSpec:
    state_labels: tuple
    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "state_labels", tuple(str(s) for s in self.state_labels))

    @property
    def M(self) -> int:
        return len(self.state_labels)

    def index(self, state) -> int:
        """Index of ``state`` given either as a label or an integer index."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < self.M:
                raise IndexError(f"state index {state} out of range for {self.M} states")
            return int(state)
        try:
            return self.state_labels.index(str(state))
        except ValueError:
            raise KeyError(f"unknown state {state!r}") from None


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray


@dataclass(frozen=True)
class ReturnTimeStats:
    reference_state: int
    mean_return: float
    second_moment_return: float
    hitting_means: np.ndarray
    hitting_second_moments: np.ndarray


@dataclass(frozen=True)
class BoundConstants:
    C: float
    D: float


def _support_graph(P: np.ndarray) -> list[list[int]]:
    return [list(np.flatnonzero(P[i] > SUPPORT_TOL)) for i in range(P.shape[0])]


def _reach(adj: list[list[int]], source: int) -> np.ndarray:
    seen = np.zeros(len(adj), dtype=bool)
    seen[source] = True
    stack = [source]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def _period(adj: list[list[int]]) -> tuple[int, np.ndarray]:
    """Period of an irreducible support graph and BFS levels from state 0."""
    level = np.full(len(adj), -1, dtype=np.int64)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    d = 0
    for u, row in enumerate(adj):
        for v in row:
            d = gcd(d, int(abs(level[u] + 1 - level[v])))
    return d, level


def chain_violations(chain: MarkovChainSpec) -> list[str]:
    """All structural problems with ``chain``; empty when it is valid."""
    P = chain.P
    labels = chain.state_labels
    out = []
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        return [f"transition matrix must be square, got shape {P.shape}"]
    if P.shape[0] != len(labels):
        return [f"{len(labels)} state labels but transition matrix is {P.shape[0]}x{P.shape[0]}"]
    if len(set(labels)) != len(labels):
        out.append("state labels are not unique")
    if not np.all(np.isfinite(P)):
        return out + ["transition matrix has non-finite entries"]
    for i, row in enumerate(P):
        bad = np.flatnonzero((row < 0) | (row > 1))
        for k in bad:
            out.append(f"transition[{labels[i]}][{labels[k]}] = {row[k]!r} is outside [0, 1]")
        s = float(row.sum())
        if abs(s - 1.0) > ROW_SUM_TOL:
            out.append(f"row {labels[i]} of the transition matrix sums to {s!r}, not 1")
    if out:
        return out

    adj = _support_graph(P)
    fwd = _reach(adj, 0)
    rev_adj = [[] for _ in adj]
    for u, row in enumerate(adj):
        for v in row:
            rev_adj[v].append(u)
    bwd = _reach(rev_adj, 0)
    if not (fwd.all() and bwd.all()):
        if not fwd.all():
            names = [labels[i] for i in np.flatnonzero(~fwd)]
            out.append(f"chain is reducible: states {names} are unreachable from {labels[0]}")
        if not bwd.all():
            names = [labels[i] for i in np.flatnonzero(~bwd)]
            out.append(f"chain is reducible: states {names} cannot reach {labels[0]}")
        return out

    d, level = _period(adj)
    if d > 1:
        classes = [[labels[i] for i in np.flatnonzero(level % d == c)] for c in range(d)]
        out.append(f"chain is periodic with period {d}; cyclic classes {classes}")
    return out


def validate_chain(chain: MarkovChainSpec) -> None:
    v = chain_violations(chain)
    if v:
        raise ChainValidationError(v)


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU solve (partial pivoting) with a residual check."""
    x = np.linalg.solve(A, b)
    scale = max(1.0, float(np.abs(A).sum(axis=1).max()) * float(np.abs(x).max(initial=0.0)))
    resid = float(np.abs(A @ x - b).max(initial=0.0))
    if resid > RESIDUAL_TOL * scale:
        raise np.linalg.LinAlgError(f"linear solve residual {resid:.3e} exceeds tolerance")
    return x


def stationary_distribution(chain: MarkovChainSpec) -> StationaryDistribution:
    """Solve ``pi P = pi``, ``sum(pi) = 1`` directly.

    The last balance equation is replaced by the normalization row, which is
    nonsingular for an irreducible chain.
    """
    validate_chain(chain)
    M = chain.M
    A = chain.P.T - np.eye(M)
    A[-1, :] = 1.0
    b = np.zeros(M)
    b[-1] = 1.0
    pi = _solve(A, b)
    if np.any(pi <= 0):
        raise ChainValidationError([f"stationary distribution has nonpositive entries {pi.tolist()}"])
    if np.abs(pi @ chain.P - pi).max() > BALANCE_TOL:
        raise ChainValidationError(["stationary distribution fails the balance check"])
    pi.setflags(write=False)
    return StationaryDistribution(pi)


def return_and_hitting_moments(chain: MarkovChainSpec, reference_state=0) -> ReturnTimeStats:
    """First two moments of hitting times to, and the return time of, a state.

    With ``Q`` the transition matrix restricted to the other states, the
    hitting means solve ``(I - Q) h = 1`` and the second moments solve
    ``(I - Q) m = 1 + 2 Q h``.  The return time from the reference state is
    one step followed by the hitting time from wherever that step lands.
    """
    validate_chain(chain)
    ref = chain.index(reference_state)
    M = chain.M
    others = np.array([i for i in range(M) if i != ref], dtype=np.int64)
    h = np.zeros(M)
    m2 = np.zeros(M)
    if others.size:
        Q = chain.P[np.ix_(others, others)]
        I = np.eye(others.size)
        h_o = _solve(I - Q, np.ones(others.size))
        m_o = _solve(I - Q, 1.0 + 2.0 * (Q @ h_o))
        h[others] = h_o
        m2[others] = m_o
    p = chain.P[ref]
    mean_return = 1.0 + float(p[others] @ h[others])
    second = 1.0 + 2.0 * float(p[others] @ h[others]) + float(p[others] @ m2[others])
    h.setflags(write=False)
    m2.setflags(write=False)
    return ReturnTimeStats(ref, mean_return, second, h, m2)


def mean_return_times(chain: MarkovChainSpec) -> np.ndarray:
    return np.array([return_and_hitting_moments(chain, i).mean_return for i in range(chain.M)])


def bound_constants(stats: ReturnTimeStats) -> BoundConstants:
    t1, t2 = stats.mean_return, stats.second_moment_return
    return BoundConstants(C=t2 + t1, D=t2 - t1)


def default_reference_state(chain: MarkovChainSpec) -> int:
    """State of largest stationary probability (smallest mean return time).

    Ties go to the lowest index.
    """
    return int(np.argmax(stationary_distribution(chain).pi))


def sample_path(chain: MarkovChainSpec, start_state, horizon: int, seed: int) -> np.ndarray:
    """State indices ``S(0), ..., S(horizon-1)`` with ``S(0) = start_state``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    start = chain.index(start_state)
    u = stream(seed, "states").random(horizon - 1)
    return _kernels.sample_chain(cumulative_rows(chain.P), np.int64(start), u)


def iid_state_path(probs: Sequence[float], horizon: int, seed: int) -> np.ndarray:
    """I.i.d. draws from ``probs``; the chain whose rows all equal ``probs``."""
    probs = np.asarray(probs, dtype=float)
    u = stream(seed, "states").random(horizon)
    cum = cumulative_rows(probs[None, :])[0]
    return np.minimum(np.searchsorted(cum, u, side="right"), probs.size - 1).astype(np.int64)


def empirical_return_times(chain: MarkovChainSpec, reference_state, n_cycles: int, seed: int) -> np.ndarray:
    """``n_cycles`` consecutive return times to ``reference_state`` from one path."""
    ref = chain.index(reference_state)
    t1 = return_and_hitting_moments(chain, ref).mean_return
    out = []
    have = 0
    chunk_seed = seed
    start = ref
    while have < n_cycles:
        horizon = int((n_cycles - have) * t1 * 1.2) + 64
        path = sample_path(chain, start, horizon, chunk_seed)
        visits = np.flatnonzero(path == ref)
        gaps = np.diff(visits)
        out.append(gaps[: n_cycles - have])
        have += min(gaps.size, n_cycles - have)
        # continue from the last visit with a fresh stream
        chunk_seed = chunk_seed * 1_000_003 + 7
    return np.concatenate(out).astype(np.int64)
