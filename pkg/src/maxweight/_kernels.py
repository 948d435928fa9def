"""Hot loops: chain sampling, QLA and randomized simulation, per-slot dual
evaluation, projected subgradient ascent.

Each kernel has a ``*_nb`` loop form (numba-compiled when available) and a
``*_np`` numpy form.  The public names at the bottom dispatch on
:data:`maxweight._accel.USE_NUMBA`.

Action tables are padded arrays: ``cost[M, K]``, ``arr[M, K, r]``,
``srv[M, K, r]`` and ``nact[M]``; only ``k < nact[s]`` is meaningful.
Objectives are accumulated as ``base + x_0*d_0 + x_1*d_1 + ...`` in queue
order in both forms, and ties resolve to the lowest action index.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# --------------------------------------------------------------------------
# Markov chain sampling

@njit
def sample_chain_nb(cum, start, u):
    horizon = u.shape[0] + 1
    m = cum.shape[0]
    states = np.empty(horizon, dtype=np.int64)
    s = start
    states[0] = s
    for t in range(1, horizon):
        x = u[t - 1]
        nxt = m - 1
        for k in range(m):
            if x < cum[s, k]:
                nxt = k
                break
        s = nxt
        states[t] = s
    return states


def sample_chain_np(cum, start, u):
    horizon = u.shape[0] + 1
    m = cum.shape[0]
    states = np.empty(horizon, dtype=np.int64)
    s = int(start)
    states[0] = s
    rows = [np.ascontiguousarray(cum[i]) for i in range(m)]
    for t in range(1, horizon):
        s = min(int(np.searchsorted(rows[s], u[t - 1], side="right")), m - 1)
        states[t] = s
    return states


# --------------------------------------------------------------------------
# QLA simulation

@njit
def qla_run_nb(states, cost, arr, srv, nact, V, q0):
    horizon = states.shape[0]
    r = q0.shape[0]
    actions = np.empty(horizon, dtype=np.int64)
    q = np.empty((horizon + 1, r))
    for j in range(r):
        q[0, j] = q0[j]
    for t in range(horizon):
        s = states[t]
        best = -np.inf
        bk = 0
        for k in range(nact[s]):
            obj = -V * cost[s, k]
            for j in range(r):
                obj += q[t, j] * (srv[s, k, j] - arr[s, k, j])
            if obj > best:
                best = obj
                bk = k
        actions[t] = bk
        for j in range(r):
            rem = q[t, j] - srv[s, bk, j]
            if rem < 0.0:
                rem = 0.0
            q[t + 1, j] = rem + arr[s, bk, j]
    return actions, q


def qla_run_np(states, cost, arr, srv, nact, V, q0):
    horizon = states.shape[0]
    r = q0.shape[0]
    actions = np.empty(horizon, dtype=np.int64)
    q = np.empty((horizon + 1, r))
    q[0] = q0
    net = srv - arr
    neg_vcost = -V * cost
    for t in range(horizon):
        s = states[t]
        n = nact[s]
        obj = neg_vcost[s, :n]
        qt = q[t]
        for j in range(r):
            obj = obj + qt[j] * net[s, :n, j]
        bk = int(np.argmax(obj))
        actions[t] = bk
        q[t + 1] = np.maximum(qt - srv[s, bk], 0.0) + arr[s, bk]
    return actions, q


# --------------------------------------------------------------------------
# Stationary randomized policy simulation

@njit
def randomized_run_nb(states, u, cumprob, arr, srv, q0):
    horizon = states.shape[0]
    r = q0.shape[0]
    kmax = cumprob.shape[1]
    actions = np.empty(horizon, dtype=np.int64)
    q = np.empty((horizon + 1, r))
    for j in range(r):
        q[0, j] = q0[j]
    for t in range(horizon):
        s = states[t]
        x = u[t]
        bk = kmax - 1
        for k in range(kmax):
            if x < cumprob[s, k]:
                bk = k
                break
        actions[t] = bk
        for j in range(r):
            rem = q[t, j] - srv[s, bk, j]
            if rem < 0.0:
                rem = 0.0
            q[t + 1, j] = rem + arr[s, bk, j]
    return actions, q


def randomized_run_np(states, u, cumprob, arr, srv, q0):
    horizon = states.shape[0]
    kmax = cumprob.shape[1]
    actions = np.empty(horizon, dtype=np.int64)
    for s in range(cumprob.shape[0]):
        sel = states == s
        idx = np.searchsorted(cumprob[s], u[sel], side="right")
        actions[sel] = np.minimum(idx, kmax - 1)
    q = np.empty((horizon + 1, q0.shape[0]))
    q[0] = q0
    a_rows = arr[states, actions]
    m_rows = srv[states, actions]
    for t in range(horizon):
        q[t + 1] = np.maximum(q[t] - m_rows[t], 0.0) + a_rows[t]
    return actions, q


# --------------------------------------------------------------------------
# Per-slot dual evaluation: g_{s_t}(gamma_t) and its minimizer

@njit
def dual_batch_nb(states, gammas, cost, arr, srv, nact, V):
    n = states.shape[0]
    r = gammas.shape[1]
    values = np.empty(n)
    argmins = np.empty(n, dtype=np.int64)
    for t in range(n):
        s = states[t]
        best = np.inf
        bk = 0
        for k in range(nact[s]):
            v = V * cost[s, k]
            for j in range(r):
                v += gammas[t, j] * (arr[s, k, j] - srv[s, k, j])
            if v < best:
                best = v
                bk = k
        values[t] = best
        argmins[t] = bk
    return values, argmins


def dual_batch_np(states, gammas, cost, arr, srv, nact, V):
    r = gammas.shape[1]
    kmax = cost.shape[1]
    diff = arr - srv
    v = V * cost[states]
    for j in range(r):
        v = v + gammas[:, j : j + 1] * diff[states, :, j]
    valid = np.arange(kmax)[None, :] < nact[states][:, None]
    v = np.where(valid, v, np.inf)
    argmins = np.argmin(v, axis=1).astype(np.int64)
    values = v[np.arange(states.shape[0]), argmins]
    return values, argmins


# --------------------------------------------------------------------------
# Projected subgradient ascent on g(gamma) = sum_i pi_i g_i(gamma)

@njit
def _dual_point_nb(gamma, cost, arr, srv, nact, pi, V, G):
    m = cost.shape[0]
    r = gamma.shape[0]
    g = 0.0
    for j in range(r):
        G[j] = 0.0
    for i in range(m):
        best = np.inf
        bk = 0
        for k in range(nact[i]):
            v = V * cost[i, k]
            for j in range(r):
                v += gamma[j] * (arr[i, k, j] - srv[i, k, j])
            if v < best:
                best = v
                bk = k
        g += pi[i] * best
        for j in range(r):
            G[j] += pi[i] * (arr[i, bk, j] - srv[i, bk, j])
    return g


@njit
def ascent_nb(cost, arr, srv, nact, pi, V, gamma0, a, b, max_iter, target, tol, polyak):
    r = gamma0.shape[0]
    gamma = gamma0.copy()
    best_gamma = gamma0.copy()
    best = -np.inf
    G = np.empty(r)
    it = 0
    while it < max_iter:
        g = _dual_point_nb(gamma, cost, arr, srv, nact, pi, V, G)
        it += 1
        if g > best:
            best = g
            for j in range(r):
                best_gamma[j] = gamma[j]
        if best >= target - tol:
            break
        norm2 = 0.0
        for j in range(r):
            norm2 += G[j] * G[j]
        if norm2 == 0.0:
            break
        if polyak:
            step = (target - g) / norm2
        else:
            step = a / (b + (it - 1))
        for j in range(r):
            x = gamma[j] + step * G[j]
            gamma[j] = x if x > 0.0 else 0.0
    return best_gamma, best, it


def _dual_point_np(gamma, cost, arr, srv, nact, pi, V):
    m = cost.shape[0]
    r = gamma.shape[0]
    diff = arr - srv
    v = V * cost
    for j in range(r):
        v = v + gamma[j] * diff[:, :, j]
    v = np.where(np.arange(cost.shape[1])[None, :] < nact[:, None], v, np.inf)
    ks = np.argmin(v, axis=1)
    g = 0.0
    G = np.zeros(r)
    for i in range(m):
        g += pi[i] * v[i, ks[i]]
        G = G + pi[i] * diff[i, ks[i]]
    return g, G


def ascent_np(cost, arr, srv, nact, pi, V, gamma0, a, b, max_iter, target, tol, polyak):
    r = gamma0.shape[0]
    gamma = gamma0.copy()
    best_gamma = gamma0.copy()
    best = -np.inf
    it = 0
    while it < max_iter:
        g, G = _dual_point_np(gamma, cost, arr, srv, nact, pi, V)
        it += 1
        if g > best:
            best = g
            best_gamma = gamma.copy()
        if best >= target - tol:
            break
        norm2 = 0.0
        for j in range(r):
            norm2 += G[j] * G[j]
        if norm2 == 0.0:
            break
        step = (target - g) / norm2 if polyak else a / (b + (it - 1))
        gamma = np.maximum(gamma + step * G, 0.0)
    return best_gamma, best, it


if USE_NUMBA:
    sample_chain = sample_chain_nb
    qla_run = qla_run_nb
    randomized_run = randomized_run_nb
    dual_batch = dual_batch_nb
    ascent = ascent_nb
else:
    sample_chain = sample_chain_np
    qla_run = qla_run_np
    randomized_run = randomized_run_np
    dual_batch = dual_batch_np
    ascent = ascent_np
