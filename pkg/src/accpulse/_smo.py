"""Compiled SMO core for the C-SVC dual.

Solves::

    min_a  0.5 a^T Q a - e^T a
    s.t.   y^T a = 0,  0 <= a_i <= C

with ``Q_ij = y_i y_j K(x_i, x_j)`` and an RBF kernel. Working-set selection
takes the maximal violator ``i`` and picks ``j`` by second-order gain among
the violating partners. Kernel rows come either from a dense precomputed
matrix or from a bounded FIFO row cache filled on demand.
"""

import numpy as np
from numba import njit

TAU = 1e-12


@njit(cache=True, nogil=True)
def _rbf_row(X, i, gamma, out):
    # same arithmetic as rbf_cross, so cached and dense kernels agree bitwise
    n, d = X.shape
    for k in range(n):
        d2 = 0.0
        for c in range(d):
            diff = X[i, c] - X[k, c]
            d2 += diff * diff
        out[k] = np.exp(-gamma * d2)


@njit(cache=True, nogil=True)
def _get_row(i, K, X, gamma, cache, slot_of, owner, next_slot):
    if K.shape[0] > 0:
        return K[i]
    s = slot_of[i]
    if s >= 0:
        return cache[s]
    s = next_slot[0]
    next_slot[0] = (s + 1) % cache.shape[0]
    old = owner[s]
    if old >= 0:
        slot_of[old] = -1
    owner[s] = i
    slot_of[i] = s
    _rbf_row(X, i, gamma, cache[s])
    return cache[s]


@njit(cache=True, nogil=True)
def smo_solve(K, X, gamma, y, C, tol, max_iter, alpha, G, cache_rows):
    """Run SMO in place on ``alpha`` / ``G``.

    ``K`` is either the dense (n, n) kernel or an empty (0, 0) array, in which
    case rows are computed from ``X`` with width ``gamma`` and cached in a
    ring of ``cache_rows`` slots. ``alpha`` and ``G`` must be a feasible
    starting point and its gradient ``Q alpha - 1``.

    Returns ``(iterations, gap)`` where gap is the final maximal KKT
    violation ``m(alpha) - M(alpha)``.
    """
    n = y.shape[0]
    if K.shape[0] > 0:
        cache = np.zeros((1, 1))
    else:
        slots = max(2, min(cache_rows, n))
        cache = np.empty((slots, n))
    slot_of = np.full(n, -1, dtype=np.int64)
    owner = np.full(cache.shape[0], -1, dtype=np.int64)
    next_slot = np.zeros(1, dtype=np.int64)

    it = 0
    gap = np.inf
    while True:
        # maximal violator i over I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -G[t] >= gmax:
                    gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0.0 and G[t] >= gmax:
                    gmax = G[t]
                    i = t
        if i < 0:
            gap = 0.0
            break
        Ki = _get_row(i, K, X, gamma, cache, slot_of, owner, next_slot)
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0.0:
                    grad_diff = gmax + G[t]
                    if G[t] >= gmax2:
                        gmax2 = G[t]
                    if grad_diff > 0.0:
                        quad = 2.0 - 2.0 * y[i] * Ki[t]
                        if quad <= 0.0:
                            quad = TAU
                        obj = -(grad_diff * grad_diff) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
            else:
                if alpha[t] < C:
                    grad_diff = gmax - G[t]
                    if -G[t] >= gmax2:
                        gmax2 = -G[t]
                    if grad_diff > 0.0:
                        quad = 2.0 + 2.0 * y[i] * Ki[t]
                        if quad <= 0.0:
                            quad = TAU
                        obj = -(grad_diff * grad_diff) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
        gap = gmax + gmax2
        if gap < tol or j < 0:
            if j < 0 and gmax2 == -np.inf:
                gap = 0.0
            break
        if it >= max_iter:
            break
        it += 1

        # Ki may be evicted by fetching Kj when the ring has two slots only
        kij = Ki[j]
        yi = y[i]
        yj = y[j]
        ai_old = alpha[i]
        aj_old = alpha[j]
        if yi != yj:
            quad = 2.0 - 2.0 * kij
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = -diff
            if diff > 0.0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = 2.0 - 2.0 * kij
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0.0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = total
        alpha[i] = ai
        alpha[j] = aj
        dai = (ai - ai_old) * yi
        daj = (aj - aj_old) * yj
        Ki = _get_row(i, K, X, gamma, cache, slot_of, owner, next_slot)
        if dai != 0.0:
            for t in range(n):
                G[t] += y[t] * Ki[t] * dai
        Kj = _get_row(j, K, X, gamma, cache, slot_of, owner, next_slot)
        if daj != 0.0:
            for t in range(n):
                G[t] += y[t] * Kj[t] * daj
    return it, gap


@njit(cache=True, nogil=True)
def compute_rho(y, alpha, G, C):
    ub = np.inf
    lb = -np.inf
    nr_free = 0
    sum_free = 0.0
    for t in range(y.shape[0]):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0.0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nr_free += 1
            sum_free += yg
    if nr_free > 0:
        return sum_free / nr_free
    return (ub + lb) / 2.0


@njit(cache=True, nogil=True)
def rbf_cross(A, B, gamma):
    na = A.shape[0]
    nb = B.shape[0]
    out = np.empty((na, nb))
    for r in range(na):
        for s in range(nb):
            d2 = 0.0
            for c in range(A.shape[1]):
                diff = A[r, c] - B[s, c]
                d2 += diff * diff
            out[r, s] = np.exp(-gamma * d2)
    return out


@njit(cache=True, nogil=True)
def decision_values(X, sv, coef, gamma, bias):
    """sum_s coef_s K(sv_s, x) + bias per row, summed in a fixed order so a
    row's value does not depend on the batch it arrives in."""
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        acc = 0.0
        for s in range(sv.shape[0]):
            d2 = 0.0
            for c in range(X.shape[1]):
                diff = X[r, c] - sv[s, c]
                d2 += diff * diff
            acc += coef[s] * np.exp(-gamma * d2)
        out[r] = acc + bias
    return out
