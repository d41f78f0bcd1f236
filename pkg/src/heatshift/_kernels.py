"""Compiled per-household search used by the population loops.

Each household turn finds the same shift and compensation as the full-matrix
routines in :mod:`heatshift.shift` and :mod:`heatshift.comfort`, but prunes
the pair search instead of materialising N x N matrices.  Gamma is never
stored: ``Gamma[k, t] = gamma * psi**(k - t)`` is read from a power table.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KW_TO_MW = 1e-3


@njit(cache=True)
def _powers(psi, n):
    pw = np.empty(n)
    acc = 1.0
    for i in range(n):
        pw[i] = acc
        acc *= psi
    return pw


@njit(cache=True)
def _shift_fits(trace, lower, upper, pw, gamma, t1, t2, tol):
    start = t1 if t1 < t2 else t2
    for k in range(start, trace.size):
        d = 0.0
        if k >= t2:
            d += gamma * pw[k - t2]
        if k >= t1:
            d -= gamma * pw[k - t1]
        T = trace[k] + d
        if T > upper[k] + tol or T < lower[k] - tol:
            return False
    return True


@njit(cache=True)
def best_shift(eps, trace, lower, upper, pw, gamma, D, price, rated_kw, dt, use_sigma_c, tol):
    """Return ``(t1, t2, saving)`` of the best feasible shift, ``t1 = -1`` if none."""
    n = eps.size
    p_mw = rated_kw * KW_TO_MW
    den = 2.0 * rated_kw * KW_TO_MW
    n_on = 0
    for t in range(n):
        n_on += eps[t]
    if n_on == 0 or n_on == n:
        return -1, -1, 0.0
    on = np.empty(n_on, dtype=np.int64)
    off = np.empty(n - n_on, dtype=np.int64)
    i = 0
    j = 0
    for t in range(n):
        if eps[t] == 1:
            on[i] = t
            i += 1
        else:
            off[j] = t
            j += 1
    on = on[np.argsort(-price[on], kind="mergesort")]
    off = off[np.argsort(price[off], kind="mergesort")]
    p_min = price[off[0]]

    best_s = 0.0
    b1 = -1
    b2 = -1
    for t1 in on:
        if p_mw * (price[t1] - p_min) * dt < best_s:
            break
        for t2 in off:
            s = p_mw * (price[t1] - price[t2]) * dt
            if s <= 0.0 or s < best_s:
                break
            if s == best_s and (t1 > b1 or (t1 == b1 and t2 > b2)):
                continue
            if use_sigma_c and (D[t1] - D[t2]) / den < 1.0:
                continue
            if _shift_fits(trace, lower, upper, pw, gamma, t1, t2, tol):
                best_s = s
                b1 = t1
                b2 = t2
                break
    return b1, b2, best_s


@njit(cache=True)
def best_compensation(eps, trace, upper, ref, w, pw, gamma, price, rated_kw, dt, max_cost, tol):
    """Step maximising comfort gain per pound with cost below ``max_cost``; -1 if none."""
    n = eps.size
    p_mw = rated_kw * KW_TO_MW
    best_r = -np.inf
    best_t = -1
    for t0 in range(n):
        if eps[t0] != 0:
            continue
        cost = p_mw * price[t0] * dt
        if not cost < max_cost:
            continue
        gain = 0.0
        fits = True
        for k in range(t0, n):
            g = gamma * pw[k - t0]
            if trace[k] + g > upper[k] + tol:
                fits = False
                break
            if w[k] != 0.0:
                gain += w[k] * (abs(trace[k] - ref[k]) - abs(trace[k] + g - ref[k]))
        if not fits:
            continue
        gain /= n
        if not gain > 0.0:
            continue
        r = gain / cost if cost > 0.0 else np.inf
        if r > best_r:
            best_r = r
            best_t = t0
    return best_t


@njit(cache=True)
def _total_cost(D, a, b, dt):
    c = 0.0
    for t in range(D.size):
        c += 0.5 * a * D[t] * D[t] + b * D[t]
    return c * dt


@njit(cache=True)
def _violations(trace, lower, upper, tol):
    v = 0
    for k in range(trace.size):
        if trace[k] < lower[k] - tol or trace[k] > upper[k] + tol:
            v += 1
    return v


@njit(cache=True)
def _switch(eps, trace, pw, gamma, t, sign):
    eps[t] = 1 if sign > 0 else 0
    for k in range(t, trace.size):
        trace[k] += sign * gamma * pw[k - t]


@njit(cache=True)
def household_turn(eps, trace, lower, upper, ref, w, psi, gamma, rated_kw, D, price, a, b, dt,
                   use_sigma_c, compensate, update_prices, tol, out):
    """One best-response move: at most one shift, then at most one compensation.

    Mutates ``eps``/``trace`` (and ``D``/``price`` when ``update_prices``).
    ``out`` receives ``[t1, t2, t0, saving, cost_before, cost_after_shift, violations]``.
    """
    n = eps.size
    pw = _powers(psi, n)
    t1, t2, saving = best_shift(eps, trace, lower, upper, pw, gamma, D, price, rated_kw, dt, use_sigma_c, tol)
    out[0] = t1
    out[1] = t2
    out[2] = -1
    out[3] = saving
    out[6] = 0
    if t1 < 0:
        return False
    p_mw = rated_kw * KW_TO_MW
    if update_prices:
        out[4] = _total_cost(D, a, b, dt)
    _switch(eps, trace, pw, gamma, t1, -1.0)
    _switch(eps, trace, pw, gamma, t2, 1.0)
    if update_prices:
        D[t1] -= p_mw
        D[t2] += p_mw
        price[t1] = a * D[t1] + b
        price[t2] = a * D[t2] + b
        out[5] = _total_cost(D, a, b, dt)
    out[6] += _violations(trace, lower, upper, tol)
    if compensate:
        t0 = best_compensation(eps, trace, upper, ref, w, pw, gamma, price, rated_kw, dt, saving, tol)
        out[2] = t0
        if t0 >= 0:
            _switch(eps, trace, pw, gamma, t0, 1.0)
            if update_prices:
                D[t0] += p_mw
                price[t0] = a * D[t0] + b
            out[6] += _violations(trace, lower, upper, tol)
    return True


@njit(cache=True)
def coordination_pass(order, eps, trace, lower, upper, ref, w, psi, gamma, rated_kw, D, price, a, b, dt,
                      use_sigma_c, compensate, tol, log):
    """Visit households in ``order``; ``log[i]`` records household ``order[i]``'s move."""
    shifts = 0
    comps = 0
    violations = 0
    out = np.empty(7)
    for i in range(order.size):
        j = order[i]
        moved = household_turn(eps[j], trace[j], lower[j], upper[j], ref[j], w[j], psi[j], gamma[j],
                               rated_kw[j], D, price, a, b, dt, use_sigma_c, compensate, True, tol, out)
        log[i, 0] = j
        log[i, 1:] = out
        violations += int(out[6])
        if moved:
            shifts += 1
            if out[2] >= 0:
                comps += 1
    return shifts, comps, violations


@njit(cache=True)
def individual_fixed_points(eps, trace, lower, upper, ref, w, psi, gamma, rated_kw, price, dt,
                            compensate, tol, max_moves, moves):
    """Each household best-responds to a frozen price until it has no saving shift left."""
    H = eps.shape[0]
    n = eps.shape[1]
    D_dummy = np.zeros(n)
    out = np.empty(7)
    violations = 0
    capped = 0
    for j in range(H):
        count = 0
        while count < max_moves:
            moved = household_turn(eps[j], trace[j], lower[j], upper[j], ref[j], w[j], psi[j], gamma[j],
                                   rated_kw[j], D_dummy, price, 0.0, 0.0, dt, False, compensate, False, tol,
                                   out)
            violations += int(out[6])
            if not moved:
                break
            count += 1
        if count >= max_moves:
            capped += 1
        moves[j] = count
    return violations, capped


@njit(cache=True)
def thermostat_search(T0, psi, gamma, ups, R, U, ref, home, tol, budget, eps):
    """Reference-tracking schedule with backtracking.

    At each step the preferred status is the one landing closer to ``ref``
    when at home, OFF when away; the other status is tried only if the
    preferred branch dead-ends.  ``R``/``U`` prune temperatures that cannot
    stay within bounds.  Fills ``eps`` and returns the number of nodes
    visited, or -1 when the search fails or exceeds ``budget``.
    """
    n = ups.size
    temps = np.empty(n + 1)
    tried = np.zeros(n, dtype=np.int8)  # options already expanded at step k
    first = np.zeros(n, dtype=np.int8)
    temps[0] = T0
    k = 0
    nodes = 0
    while k < n:
        if k < 0:
            return -1
        nodes += 1
        if nodes > budget:
            return -1
        T_off = psi * temps[k] + ups[k]
        if tried[k] == 0:
            if home[k]:
                first[k] = 1 if abs(T_off + gamma - ref[k]) < abs(T_off - ref[k]) else 0
            else:
                first[k] = 0
        if tried[k] >= 2:
            tried[k] = 0
            k -= 1
            continue
        status = first[k] if tried[k] == 0 else 1 - first[k]
        tried[k] += 1
        T = T_off + gamma * status
        if T < R[k] - tol or T > U[k] + tol:
            continue
        eps[k] = status
        temps[k + 1] = T
        k += 1
        if k < n:
            tried[k] = 0
    return nodes
