"""Built-in instances: the worked single-queue example, an i.i.d.
channel example, and a seeded random-instance generator."""
from __future__ import annotations

from importlib import resources

import numpy as np

from .markov import ReturnTimeStats
from .model import Action, NetworkSpec, SlacknessCertificate, make_spec, suggest_certificate


def data_path(name: str):
    return resources.files("maxweight") / "data" / name


def worked_instance() -> tuple[NetworkSpec, SlacknessCertificate]:
    """One state, one queue, delta_max = 2.

    ``x1`` serves two packets at cost 1, ``x2`` admits one packet for free.
    The half/half mix has slack 1/2 and the optimal average cost is 1/3.
    """
    spec = make_spec(
        ["s1"],
        [[1.0]],
        {"s1": [("x1", 1.0, [0.0], [2.0]), ("x2", 0.0, [1.0], [0.0])]},
        delta_max=2.0,
    )
    return spec, SlacknessCertificate([[(0, 0.5), (1, 0.5)]], 0.5)


def iid_channel_instance(n: int = 10) -> tuple[NetworkSpec, SlacknessCertificate]:
    """``n`` equiprobable i.i.d. channel conditions as an ``n``-state chain.

    One packet arrives every slot; in condition ``i`` sending costs 1 and
    serves ``1 + i % 3`` packets, idling costs nothing.  Every row of the
    transition matrix is uniform, so the state process is i.i.d.
    """
    states = [f"c{i}" for i in range(n)]
    P = np.full((n, n), 1.0 / n)
    actions = {
        s: [Action("idle", 0.0, [1.0], [0.0]), Action("send", 1.0, [1.0], [float(1 + i % 3)])]
        for i, s in enumerate(states)
    }
    spec = make_spec(states, P, actions, delta_max=3.0, reference_state=states[0])
    return spec, suggest_certificate(spec)


def collapsed_iid_stats() -> ReturnTimeStats:
    """Return-time moments of an i.i.d. process viewed as one Markov state."""
    return ReturnTimeStats(0, 1.0, 1.0, np.zeros(1), np.zeros(1))


def random_instance(
    seed: int,
    max_states: int = 4,
    max_queues: int = 3,
    max_actions: int = 5,
) -> tuple[NetworkSpec, SlacknessCertificate]:
    """Random bounded instance with positive slack.

    Transition rows are Dirichlet draws (all entries positive, so the chain
    is irreducible and aperiodic).  Each state's first action is a drain:
    no arrivals, service of at least ``delta_max / 2`` on every queue, cost
    ``delta_max``; the remaining actions are uniform on ``[0, delta_max]``.
    """
    rng = np.random.default_rng(seed)
    M = int(rng.integers(1, max_states + 1))
    r = int(rng.integers(1, max_queues + 1))
    dm = float(rng.choice([1.0, 2.0, 3.0]))
    P = rng.dirichlet(np.ones(M), size=M)
    P = P / P.sum(axis=1, keepdims=True)
    states = [f"s{i + 1}" for i in range(M)]
    actions = []
    for _ in range(M):
        K = int(rng.integers(2, max_actions + 1))
        acts = [Action("drain", dm, np.zeros(r), rng.uniform(dm / 2, dm, r))]
        for k in range(1, K):
            acts.append(
                Action(f"a{k}", rng.uniform(0, dm), rng.uniform(0, dm, r), rng.uniform(0, dm, r))
            )
        actions.append(acts)
    spec = make_spec(states, P, actions, delta_max=dm, r=r)
    return spec, suggest_certificate(spec)
