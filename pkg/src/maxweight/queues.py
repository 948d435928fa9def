"""Queue dynamics, the quadratic Lyapunov function and time averages."""
from __future__ import annotations

import math

import numpy as np


def step_queues(q, A, mu) -> np.ndarray:
    """One slot of ``q_j <- max(q_j - mu_j, 0) + A_j``."""
    q = np.asarray(q, dtype=float)
    A = np.asarray(A, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not (q.shape == A.shape == mu.shape) or q.ndim != 1:
        raise ValueError(f"shape mismatch: q{q.shape}, A{A.shape}, mu{mu.shape}")
    return np.maximum(q - mu, 0.0) + A


def lyapunov(q) -> float:
    q = np.asarray(q, dtype=float)
    return 0.5 * float(q @ q)


def lyapunov_rows(Q: np.ndarray) -> np.ndarray:
    """``lyapunov`` applied to every row of a ``(T, r)`` backlog array."""
    Q = np.asarray(Q, dtype=float)
    L = np.zeros(Q.shape[0])
    for j in range(Q.shape[1]):
        L = L + Q[:, j] * Q[:, j]
    return 0.5 * L


class _Neumaier:
    __slots__ = ("total", "comp")

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.comp


class MetricsAccumulator:
    """Streaming cost/backlog sums with compensated summation.

    ``record(cost, q)`` is called once per slot with the slot's cost and the
    backlog vector at the *start* of the slot.
    """

    def __init__(self, r: int):
        self.r = r
        self.t = 0
        self._cost = _Neumaier()
        self._backlog = _Neumaier()
        self.lyapunov = 0.0

    def record(self, cost: float, q) -> None:
        q = np.asarray(q, dtype=float)
        self.t += 1
        self._cost.add(float(cost))
        for x in q:
            self._backlog.add(float(x))
        self.lyapunov = lyapunov(q)

    @property
    def cost_sum(self) -> float:
        return self._cost.value

    @property
    def backlog_sum(self) -> float:
        return self._backlog.value


def time_averages(acc: MetricsAccumulator) -> tuple[float, float]:
    if acc.t == 0:
        raise ValueError("no slots recorded")
    return acc.cost_sum / acc.t, acc.backlog_sum / acc.t


def trace_averages(costs: np.ndarray, Q: np.ndarray) -> tuple[float, float]:
    """Cesaro averages over ``T`` slots: mean cost and mean total backlog.

    ``Q`` holds the ``T`` start-of-slot backlog rows ``q(0), ..., q(T-1)``.
    Sums are exact-rounded (``math.fsum``).
    """
    T = len(costs)
    if T == 0:
        raise ValueError("no slots recorded")
    return math.fsum(costs) / T, math.fsum(np.asarray(Q, dtype=float).ravel()) / T
