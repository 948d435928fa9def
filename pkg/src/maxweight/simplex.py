"""Dense two-phase tableau simplex with Bland's rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``.  Meant for the small dense programs in this package (a few dozen
columns); no sparsity, no presolve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class LPError(ArithmeticError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    duals_ub: np.ndarray
    duals_eq: np.ndarray
    basis: np.ndarray
    iterations: int


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run(T, basis, allowed, tol, max_iter, it):
    """Bland's-rule iterations on tableau ``T`` whose last row is the
    reduced-cost row (last entry = minus the objective)."""
    m = T.shape[0] - 1
    while True:
        if it >= max_iter:
            raise LPError(f"simplex did not terminate within {max_iter} pivots")
        z = T[-1, :-1]
        cand = np.flatnonzero((z < -tol) & allowed)
        if cand.size == 0:
            return it
        col = int(cand[0])
        colv = T[:m, col]
        rows = np.flatnonzero(colv > tol)
        if rows.size == 0:
            raise UnboundedError("objective is unbounded below")
        ratios = T[rows, -1] / colv[rows]
        rmin = ratios.min()
        ties = rows[ratios <= rmin + tol * max(1.0, abs(rmin))]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, basis, row, col)
        it += 1


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=TOL, max_iter=50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    if A_ub.shape[1] != n or A_eq.shape[1] != n or b_ub.size != m_ub or b_eq.size != m_eq:
        raise ValueError("inconsistent LP dimensions")

    m = m_ub + m_eq
    N = n + m_ub
    A = np.zeros((m, N))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    c_full = np.concatenate([c, np.zeros(m_ub)])
    A_orig = A.copy()

    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    basis = np.full(m, -1, dtype=np.int64)
    needs_art = []
    for i in range(m):
        if i < m_ub and sign[i] > 0:
            basis[i] = n + i
        else:
            needs_art.append(i)
    n_art = len(needs_art)
    T = np.zeros((m + 1, N + n_art + 1))
    T[:m, :N] = A
    T[:m, -1] = b
    for a, i in enumerate(needs_art):
        T[i, N + a] = 1.0
        basis[i] = N + a

    it = 0
    if n_art:
        # phase 1: minimize the sum of artificials
        for i in needs_art:
            T[-1] -= T[i]
        T[-1, N : N + n_art] = 0.0
        allowed = np.ones(N + n_art, dtype=bool)
        it = _run(T, basis, allowed, tol, max_iter, it)
        infeas = -T[-1, -1]
        if infeas > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
            raise InfeasibleError(f"no feasible point (phase-1 residual {infeas:.3e})")
        # drive artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= N:
                nz = np.flatnonzero(np.abs(T[i, :N]) > tol)
                if nz.size:
                    _pivot(T, basis, i, int(nz[0]))
                else:
                    keep[i] = False
        rows = np.concatenate([np.flatnonzero(keep), [m]])
        T = np.delete(T[rows], np.s_[N : N + n_art], axis=1)
        basis = basis[keep]
    else:
        keep = np.ones(m, dtype=bool)

    # phase 2
    T[-1] = 0.0
    T[-1, :N] = c_full
    for i, bv in enumerate(basis):
        if c_full[bv] != 0.0:
            T[-1] -= c_full[bv] * T[i]
    it = _run(T, basis, np.ones(N, dtype=bool), tol, max_iter, it)

    x_full = np.zeros(N)
    x_full[basis] = T[:-1, -1]
    x_full = np.maximum(x_full, 0.0)
    x = x_full[:n]

    y = np.zeros(m)
    kept = np.flatnonzero(keep)
    if kept.size:
        B = A_orig[np.ix_(kept, basis)]
        y[kept] = np.linalg.solve(B.T, c_full[basis])
    return LPResult(
        x=x,
        fun=float(c @ x),
        duals_ub=y[:m_ub],
        duals_eq=y[m_ub:],
        basis=basis.copy(),
        iterations=it,
    )
