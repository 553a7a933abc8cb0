"""Compiled inner loops.

Every tabular MDP handled here uses the same layout: ``nxt0[s]`` is the index
of the ``a' = 0`` successor of ``s`` when continuing, ``nxt1[s]`` the same
for switching (``-1`` when not allowed), and the ``a' = 1`` successor is the
following index.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def q_values(V, cost, nxt0, nxt1, p, alpha, q0, q1):
    q = 1.0 - p
    for s in range(V.shape[0]):
        j = nxt0[s]
        q0[s] = cost[s] + alpha * (q * V[j] + p * V[j + 1])
        k = nxt1[s]
        if k >= 0:
            q1[s] = cost[s] + alpha * (q * V[k] + p * V[k + 1])
        else:
            q1[s] = np.inf


@njit(cache=True)
def backup(V, cost, nxt0, nxt1, p, alpha, out):
    """One Bellman backup into ``out``; returns the sup-norm change."""
    q = 1.0 - p
    res = 0.0
    for s in range(V.shape[0]):
        j = nxt0[s]
        v = cost[s] + alpha * (q * V[j] + p * V[j + 1])
        k = nxt1[s]
        if k >= 0:
            v1 = cost[s] + alpha * (q * V[k] + p * V[k + 1])
            if v1 <= v:
                v = v1
        out[s] = v
        diff = abs(v - V[s])
        if diff > res:
            res = diff
    return res


@njit(cache=True)
def value_iterate(V0, cost, nxt0, nxt1, p, alpha, eps, max_iters, residuals):
    cur = V0.copy()
    nxt = np.empty_like(cur)
    it = 0
    res = np.inf
    while it < max_iters:
        res = backup(cur, cost, nxt0, nxt1, p, alpha, nxt)
        residuals[it] = res
        cur, nxt = nxt, cur
        it += 1
        if res < eps:
            break
    return cur, it, res


@njit(cache=True)
def _structured_backup(V, cost, nxt0, nxt1, p, alpha, out, plain, blk_d, blk_l,
                       blk_start, blk_idx, b, tau):
    q = 1.0 - p
    res = 0.0
    mins = 0
    for i in range(plain.shape[0]):
        s = plain[i]
        j = nxt0[s]
        v = cost[s] + alpha * (q * V[j] + p * V[j + 1])
        k = nxt1[s]
        if k >= 0:
            mins += 1
            v1 = cost[s] + alpha * (q * V[k] + p * V[k + 1])
            if v1 <= v:
                v = v1
        out[s] = v
        diff = abs(v - V[s])
        if diff > res:
            res = diff
    for blk in range(blk_d.shape[0]):
        d = blk_d[blk]
        l = blk_l[blk]
        m = b - l
        # skip below the thresholds already known for (d, l+1) and (d-1, l)
        lo = 0
        if l + 1 < b:
            lo = min(tau[d, l + 1], m - 1)
        if d - 1 >= m:
            lo = max(lo, tau[d - 1, l])
        lo = min(lo, m)
        start = blk_start[blk]
        k = nxt1[blk_idx[start]]
        v1 = cost[blk_idx[start]] + alpha * (q * V[k] + p * V[k + 1])
        t = b
        for i in range(m):
            s = blk_idx[start + i]
            if t < b:
                v = v1
            else:
                j = nxt0[s]
                v = cost[s] + alpha * (q * V[j] + p * V[j + 1])
                if i >= lo:
                    mins += 1
                    if v1 <= v:
                        v = v1
                        t = i
            out[s] = v
            diff = abs(v - V[s])
            if diff > res:
                res = diff
        tau[d, l] = t
    return res, mins


@njit(cache=True)
def structured_iterate(V0, cost, nxt0, nxt1, p, alpha, eps, max_iters, residuals,
                       plain, blk_d, blk_l, blk_start, blk_idx, b, tau, mins_out):
    cur = V0.copy()
    nxt = np.empty_like(cur)
    it = 0
    res = np.inf
    while it < max_iters:
        res, mins = _structured_backup(cur, cost, nxt0, nxt1, p, alpha, nxt, plain,
                                       blk_d, blk_l, blk_start, blk_idx, b, tau)
        residuals[it] = res
        mins_out[it] = mins
        cur, nxt = nxt, cur
        it += 1
        if res < eps:
            break
    return cur, it, res


@njit(cache=True)
def relative_iterate(h0, cost, nxt0, nxt1, p, ref, damping, eps, max_iters, residuals):
    h = h0.copy()
    w = np.empty_like(h)
    it = 0
    res = np.inf
    gain = 0.0
    while it < max_iters:
        backup(h, cost, nxt0, nxt1, p, 1.0, w)
        gain = w[ref] - h[ref]
        res = 0.0
        for s in range(h.shape[0]):
            v = (1.0 - damping) * h[s] + damping * (w[s] - gain)
            diff = abs(v - h[s])
            if diff > res:
                res = diff
            w[s] = v
        h, w = w, h
        residuals[it] = res
        it += 1
        if res < eps:
            break
    return h, gain, it, res


@njit(cache=True)
def run_slots(arrivals, state, b, mode, tau, aoi_switch, aoi_lo, t0, warmup, d_cap):
    """Advance the system over ``arrivals``.

    ``state`` holds ``(d, delta, l, aoi)`` and is updated in place.  Mode 0
    reads the threshold table ``tau[min(d, rows - 1), l]``; mode 1 reads the
    AoI switch table ``aoi_switch[min(aoi, hi) - aoi_lo, l]``.  A non-negative
    ``d_cap`` applies the truncation of the solver's state space.  Returns the
    AoS sum, AoI sum, number of deliveries and number of counted slots.
    """
    d = state[0]
    delta = state[1]
    l = state[2]
    aoi = state[3]
    tau_rows = tau.shape[0]
    aoi_rows = aoi_switch.shape[0]
    sum_d = 0
    sum_aoi = 0
    deliveries = 0
    counted = 0
    for i in range(arrivals.shape[0]):
        a = arrivals[i]
        if t0 + i >= warmup:
            sum_d += d
            sum_aoi += aoi
            counted += 1
        w = False
        if a:
            if mode == 0:
                if l == 0:
                    w = True
                else:
                    w = delta >= tau[min(d, tau_rows - 1), l]
            else:
                row = min(aoi - aoi_lo, aoi_rows - 1)
                w = aoi_switch[row, l] != 0
        done = False
        if a and w:
            if b == 1:
                d = 0
                delta = 0
                l = 0
                done = True
            else:
                d += 1
                delta = 0
                l = b - 1
        else:
            nd = delta + 1 if (delta > 0 or a) else 0
            if l == 1:
                d = nd
                delta = nd
                l = 0
                done = True
            else:
                d = d + 1 if (d > 0 or a) else 0
                delta = nd
                if l > 0:
                    l -= 1
        if d_cap >= 0 and d > d_cap:
            d = d_cap
            if l == 0:
                delta = d_cap
        if done:
            aoi = b
            deliveries += 1
        else:
            aoi += 1
    state[0] = d
    state[1] = delta
    state[2] = l
    state[3] = aoi
    return sum_d, sum_aoi, deliveries, counted
