"""Compiled best-first branch-and-bound for the centralized scheduling problem.

Appliances of all households are decided one at a time in the order given
(the caller passes them largest energy first), each node branching over every
choice of the next appliance. A node
is pruned when the supply cap is already exceeded or when a lower bound on
the cost of any completion is no better than the incumbent. The bound is the
larger of a water-filling relaxation of the undecided energy and the
Lagrangian bound obtained by relaxing the supply-demand balance. Children are
first screened with the parent's multipliers; survivors refine them along
Frank-Wolfe iterates of the relaxed completion problem. Guided dives followed
by exact single-appliance moves supply incumbents.
"""

import numpy as np
from numba import njit

from ._bnb import NI, _best_response, _ni_start_cost, _place, _sort_window


@njit(cache=True, nogil=True)
def _cost(y, c2, c1):
    v = 0.0
    for t in range(y.shape[0]):
        v += c2[t] * y[t] * y[t] + c1[t] * y[t]
    return v


@njit(cache=True, nogil=True)
def _fill(y, caps, c2, c1, nu, z):
    """Cheapest extra load per slot at marginal price nu; returns its total."""
    s = 0.0
    for t in range(y.shape[0]):
        cap = caps[t]
        if cap <= 0.0:
            z[t] = 0.0
            continue
        if c2[t] > 0.0:
            v = (nu - c1[t]) / (2.0 * c2[t]) - y[t]
            if v < 0.0:
                v = 0.0
            elif v > cap:
                v = cap
        else:
            v = cap if c1[t] < nu else 0.0
        z[t] = v
        s += v
    return s


@njit(cache=True, nogil=True)
def _fluid_bound(y, energy, caps, c2, c1, z):
    """Lagrangian lower bound on min sum C(y + z) with sum z = energy, 0 <= z <= caps."""
    T = y.shape[0]
    if energy <= 0.0:
        for t in range(T):
            z[t] = 0.0
        return _cost(y, c2, c1)
    lo = np.inf
    hi = -np.inf
    for t in range(T):
        if caps[t] > 0.0:
            m0 = c1[t] + 2.0 * c2[t] * y[t]
            m1 = c1[t] + 2.0 * c2[t] * (y[t] + caps[t])
            lo = min(lo, m0)
            hi = max(hi, m1)
    if hi < lo:
        return np.inf
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _fill(y, caps, c2, c1, mid, z) < energy:
            lo = mid
        else:
            hi = mid
    nu = hi
    _fill(y, caps, c2, c1, nu, z)
    val = nu * energy
    for t in range(T):
        w = y[t] + z[t]
        val += c2[t] * w * w + c1[t] * w - nu * z[t]
    return val


@njit(cache=True, nogil=True)
def _supply_value(lam, c2, c1, y_max, x0):
    """min over 0 <= x0 <= y_max of sum C(x0) - lam . x0, with the minimiser in x0."""
    v = 0.0
    for t in range(lam.shape[0]):
        if c2[t] > 0.0:
            q = (lam[t] - c1[t]) / (2.0 * c2[t])
            if q < 0.0:
                q = 0.0
            elif q > y_max[t]:
                q = y_max[t]
        else:
            q = y_max[t] if lam[t] > c1[t] else 0.0
        x0[t] = q
        v += c2[t] * q * q + c1[t] * q - lam[t] * q
    return v


@njit(cache=True, nogil=True)
def _linear_response(j, skip, price, z, kind, lo, hi, dur, pw, poff, prof, idx):
    """Sum over appliances b >= j (except skip) of min price.x_b; argmin loads added to z."""
    n = kind.shape[0]
    tot = 0.0
    for b in range(j, n):
        if b == skip:
            continue
        if kind[b] == NI:
            best = np.inf
            bs = lo[b]
            for s in range(lo[b], hi[b] - dur[b] + 2):
                v = _ni_start_cost(price, s, prof, poff[b], dur[b])
                if v < best:
                    best = v
                    bs = s
            tot += best
            for k in range(dur[b]):
                z[bs + k] += prof[poff[b] + k]
        else:
            _sort_window(price, lo[b], hi[b], idx)
            for i in range(dur[b]):
                t = idx[i]
                tot += pw[b] * price[t]
                z[t] += pw[b]
    return tot


@njit(cache=True, nogil=True)
def _lagrangian_bound(j, y, lam, steps, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, z, x0,
                      best_lam, idx):
    """max over the visited lam of the dual bound with the coupling relaxed.

    For every lam, min_x0 [C(x0) - lam.x0] + lam.y + sum_b min lam.x_b is a
    lower bound. lam moves by damped steps toward the marginal cost at the
    aggregate the relaxation produces; the best lam is left in ``lam``.
    """
    T = y.shape[0]
    best = -np.inf
    for it in range(steps + 1):
        for t in range(T):
            z[t] = y[t]
        v = _supply_value(lam, c2, c1, y_max, x0)
        for t in range(T):
            v += lam[t] * y[t]
        v += _linear_response(j, -1, lam, z, kind, lo, hi, dur, pw, poff, prof, idx)
        if v > best:
            best = v
            best_lam[:] = lam
        if it < steps:
            s = 1.0 / (it + 2.0)
            for t in range(T):
                lam[t] += s * (c1[t] + 2.0 * c2[t] * z[t] - lam[t])
    lam[:] = best_lam
    return best


@njit(cache=True, nogil=True)
def _num_choices(b, kind, lo, hi, dur):
    w = hi[b] - lo[b] + 1
    if kind[b] == NI:
        return w - dur[b] + 1
    r = 1
    for i in range(dur[b]):
        r = r * (w - i) // (i + 1)
    return r


@njit(cache=True, nogil=True)
def _apply_choice(b, comb, y, sign, kind, lo, dur, pw, poff, prof):
    """comb holds the start offset (NI) or the sorted slot offsets (INT)."""
    if kind[b] == NI:
        s = lo[b] + comb[0]
        for k in range(dur[b]):
            y[s + k] += sign * prof[poff[b] + k]
    else:
        for i in range(dur[b]):
            y[lo[b] + comb[i]] += sign * pw[b]


@njit(cache=True, nogil=True)
def _first_choice(b, comb, kind, dur):
    if kind[b] == NI:
        comb[0] = 0
    else:
        for i in range(dur[b]):
            comb[i] = i


@njit(cache=True, nogil=True)
def _next_choice(b, comb, kind, lo, hi, dur):
    """Advance comb to the next choice in lexicographic order; False when exhausted."""
    w = hi[b] - lo[b] + 1
    if kind[b] == NI:
        comb[0] += 1
        return comb[0] <= w - dur[b]
    d = dur[b]
    i = d - 1
    while i >= 0 and comb[i] == w - d + i:
        i -= 1
    if i < 0:
        return False
    comb[i] += 1
    for k in range(i + 1, d):
        comb[k] = comb[k - 1] + 1
    return True


@njit(cache=True, nogil=True)
def _rank(b, comb, kind, lo, hi, dur):
    """Lexicographic index of comb among the appliance's choices."""
    if kind[b] == NI:
        return comb[0]
    w = hi[b] - lo[b] + 1
    d = dur[b]
    r = 0
    prev = -1
    for i in range(d):
        for v in range(prev + 1, comb[i]):
            # choices whose i-th element is v come first
            m = w - v - 1
            k = d - i - 1
            c = 1
            for q in range(k):
                c = c * (m - q) // (q + 1)
            r += c
        prev = comb[i]
    return r


@njit(cache=True, nogil=True)
def _greedy(c2, c1, kind, lo, hi, dur, pw, prof, poff, koff, T):
    """Best responses to marginal cost, swept until no appliance moves."""
    n = kind.shape[0]
    key = np.zeros(koff[n], np.int16)
    trial = np.zeros(koff[n], np.int16)
    y = np.zeros(T)
    c = np.empty(T)
    idx = np.empty(T, np.int64)
    for a in range(n):
        for t in range(T):
            c[t] = c1[t] + c2[t] * (2.0 * y[t])
        _best_response(a, c, kind, lo, hi, dur, prof, poff, idx, key, koff)
        _place(a, key, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
    for _sweep in range(50):
        changed = False
        for a in range(n):
            before = _cost(y, c2, c1)
            _place(a, key, y, -1.0, kind, lo, hi, dur, pw, prof, poff, koff)
            for t in range(T):
                c[t] = c1[t] + 2.0 * c2[t] * y[t]
            trial[:] = key
            _best_response(a, c, kind, lo, hi, dur, prof, poff, idx, trial, koff)
            _place(a, trial, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
            if _cost(y, c2, c1) < before - 1e-12 * max(1.0, abs(before)):
                key[:] = trial
                changed = True
            else:
                _place(a, trial, y, -1.0, kind, lo, hi, dur, pw, prof, poff, koff)
                _place(a, key, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
        if not changed:
            break
    y[:] = 0.0
    for a in range(n):
        _place(a, key, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
    return key, y


@njit(cache=True, nogil=True)
def _fw_bound(j, y, lam, steps, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, z, x0, w, s,
              best_lam, idx):
    """Lagrangian bound along Frank-Wolfe iterates of the relaxed completion problem.

    w holds the relaxed aggregate y + z. It starts at the vertex selected by
    the incoming multipliers and moves toward the vertex selected by the
    current marginal cost with an exact line search. Each iterate's marginal
    cost gives a valid dual bound; the best one is returned and left in lam.
    """
    T = y.shape[0]
    best = -np.inf
    for t in range(T):
        s[t] = y[t]
    v = _supply_value(lam, c2, c1, y_max, x0)
    for t in range(T):
        v += lam[t] * y[t]
    v += _linear_response(j, -1, lam, s, kind, lo, hi, dur, pw, poff, prof, idx)
    best = v
    best_lam[:] = lam
    for t in range(T):
        w[t] = s[t]
    for it in range(steps):
        for t in range(T):
            lam[t] = c1[t] + 2.0 * c2[t] * w[t]
            s[t] = y[t]
        v = _supply_value(lam, c2, c1, y_max, x0)
        for t in range(T):
            v += lam[t] * y[t]
        v += _linear_response(j, -1, lam, s, kind, lo, hi, dur, pw, poff, prof, idx)
        if v > best:
            best = v
            best_lam[:] = lam
        num = 0.0
        den = 0.0
        for t in range(T):
            d = s[t] - w[t]
            num += lam[t] * d
            den += 2.0 * c2[t] * d * d
        if num >= 0.0 or den <= 0.0:
            break
        g = -num / den
        if g > 1.0:
            g = 1.0
        for t in range(T):
            w[t] += g * (s[t] - w[t])
    lam[:] = best_lam
    return best


@njit(cache=True, nogil=True)
def _dive(j0, y_start, lam_start, ranks, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, z, x0,
          lam_best, idx, comb, steps):
    """Complete a partial schedule greedily by the Lagrangian bound; returns its cost.

    ranks[j0:] receives the chosen choice ranks. Returns inf when a supply
    cap blocks every choice at some depth.
    """
    n = kind.shape[0]
    T = y_start.shape[0]
    y = y_start.copy()
    lam = lam_start.copy()
    yc = np.empty(T)
    for j in range(j0, n):
        best_v = np.inf
        best_r = -1
        _first_choice(j, comb, kind, dur)
        ok = True
        rank = 0
        while ok:
            yc[:] = y
            _apply_choice(j, comb, yc, 1.0, kind, lo, dur, pw, poff, prof)
            feasible = True
            for t in range(T):
                if yc[t] > y_max[t]:
                    feasible = False
            if feasible:
                if j + 1 == n:
                    v = _cost(yc, c2, c1)
                else:
                    # multipliers are held fixed while scanning siblings
                    for t in range(T):
                        z[t] = yc[t]
                    v = _supply_value(lam, c2, c1, y_max, x0)
                    for t in range(T):
                        v += lam[t] * yc[t]
                    v += _linear_response(j + 1, -1, lam, z, kind, lo, hi, dur, pw, poff, prof, idx)
                if v < best_v:
                    best_v = v
                    best_r = rank
            rank += 1
            ok = _next_choice(j, comb, kind, lo, hi, dur)
        if best_r < 0:
            return np.inf
        _first_choice(j, comb, kind, dur)
        for _ in range(best_r):
            _next_choice(j, comb, kind, lo, hi, dur)
        _apply_choice(j, comb, y, 1.0, kind, lo, dur, pw, poff, prof)
        ranks[j] = best_r
        if j + 1 < n:
            _lagrangian_bound(j + 1, y, lam, steps, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof,
                              z, x0, lam_best, idx)
    return _cost(y, c2, c1)


@njit(cache=True, nogil=True)
def _set_comb(b, rank, comb, kind, lo, hi, dur):
    _first_choice(b, comb, kind, dur)
    for _ in range(rank):
        _next_choice(b, comb, kind, lo, hi, dur)


@njit(cache=True, nogil=True)
def _improve(ranks, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, comb, T):
    """Exact one-appliance moves until none lowers the cost; returns the cost."""
    n = kind.shape[0]
    y = np.zeros(T)
    for b in range(n):
        _set_comb(b, ranks[b], comb, kind, lo, hi, dur)
        _apply_choice(b, comb, y, 1.0, kind, lo, dur, pw, poff, prof)
    for t in range(T):
        if y[t] > y_max[t]:
            return np.inf
    cur = _cost(y, c2, c1)
    changed = True
    while changed:
        changed = False
        for b in range(n):
            _set_comb(b, ranks[b], comb, kind, lo, hi, dur)
            _apply_choice(b, comb, y, -1.0, kind, lo, dur, pw, poff, prof)
            best_v = cur
            best_r = ranks[b]
            _first_choice(b, comb, kind, dur)
            ok = True
            rank = 0
            while ok:
                _apply_choice(b, comb, y, 1.0, kind, lo, dur, pw, poff, prof)
                feasible = True
                for t in range(T):
                    if y[t] > y_max[t]:
                        feasible = False
                if feasible:
                    v = _cost(y, c2, c1)
                    if v < best_v - 1e-13 * abs(best_v):
                        best_v = v
                        best_r = rank
                _apply_choice(b, comb, y, -1.0, kind, lo, dur, pw, poff, prof)
                rank += 1
                ok = _next_choice(b, comb, kind, lo, hi, dur)
            if best_r != ranks[b]:
                changed = True
                ranks[b] = best_r
            _set_comb(b, ranks[b], comb, kind, lo, hi, dur)
            _apply_choice(b, comb, y, 1.0, kind, lo, dur, pw, poff, prof)
        # recompute to avoid drift from repeated add/subtract
        y[:] = 0.0
        for b in range(n):
            _set_comb(b, ranks[b], comb, kind, lo, hi, dur)
            _apply_choice(b, comb, y, 1.0, kind, lo, dur, pw, poff, prof)
        cur = _cost(y, c2, c1)
    return cur


@njit(cache=True, nogil=True)
def _key_to_ranks(key, kind, lo, hi, dur, koff):
    n = kind.shape[0]
    ranks = np.zeros(n, np.int64)
    comb = np.empty(max(1, koff[n]), np.int64)
    for b in range(n):
        if kind[b] == NI:
            comb[0] = key[koff[b]]
        else:
            k = 0
            for j in range(hi[b] - lo[b] + 1):
                if key[koff[b] + j] == 0:
                    comb[k] = j
                    k += 1
        ranks[b] = _rank(b, comb, kind, lo, hi, dur)
    return ranks


@njit(cache=True, nogil=True)
def solve_central(kind, lo, hi, dur, pw, poff, prof, koff, energy, env, c2, c1, y_max, cap,
                  root_steps=300, node_steps=60, dive_every=256):
    """Returns (status, best cost, per-appliance choice ranks, evaluations).

    status 0: optimal; 1: evaluation cap exceeded; 2: infeasible.
    ``env[b]`` is appliance b's per-slot maximum load over its choices.
    """
    n = kind.shape[0]
    T = c2.shape[0]
    energy_sfx = np.zeros(n + 1)
    caps_sfx = np.zeros((n + 1, T))
    for b in range(n - 1, -1, -1):
        energy_sfx[b] = energy_sfx[b + 1] + energy[b]
        for t in range(T):
            caps_sfx[b, t] = caps_sfx[b + 1, t] + env[b, t]
    z = np.empty(T)
    x0 = np.empty(T)
    lam_best = np.empty(T)
    lam = np.empty(T)
    wbuf = np.empty(T)
    sbuf = np.empty(T)
    idx = np.empty(T, np.int64)
    maxd = 1
    for b in range(n):
        maxd = max(maxd, dur[b])
    comb = np.empty(maxd, np.int64)

    best = np.inf
    best_ranks = np.zeros(n, np.int64)
    key0, y0 = _greedy(c2, c1, kind, lo, hi, dur, pw, prof, poff, koff, T)
    feasible0 = True
    for t in range(T):
        if y0[t] > y_max[t]:
            feasible0 = False
    if feasible0:
        best = _cost(y0, c2, c1)
        best_ranks = _key_to_ranks(key0, kind, lo, hi, dur, koff)

    pcap = 1024
    PY = np.empty((pcap, T))
    PL = np.empty((pcap, T))
    PR = np.empty((pcap, n), np.int64)
    PD = np.empty(pcap, np.int64)
    HB = np.empty(pcap)
    HS = np.empty(pcap, np.int64)
    HN = np.empty(pcap, np.int64)
    FS = np.empty(pcap, np.int64)
    nfree = 0
    used = 1
    PY[0, :] = 0.0
    PR[0, :] = 0
    PD[0] = 0
    for t in range(T):
        PL[0, t] = c1[t] + 2.0 * c2[t] * y0[t]
    lam[:] = PL[0]
    lb = _lagrangian_bound(0, PY[0], lam, root_steps, c2, c1, y_max, kind, lo, hi, dur, pw, poff,
                           prof, z, x0, lam_best, idx)
    PL[0, :] = lam
    HB[0] = max(lb, _fluid_bound(PY[0], energy_sfx[0], caps_sfx[0], c2, c1, z))
    dive_ranks = np.zeros(n, np.int64)
    v = _dive(0, PY[0], PL[0], dive_ranks, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, z, x0,
              lam_best, idx, comb, node_steps)
    if v < np.inf:
        v = _improve(dive_ranks, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, comb, T)
    if v < best:
        best = v
        best_ranks[:] = dive_ranks
    popped = 0
    HS[0] = 0
    HN[0] = 0
    hsize = 1
    seq = 1
    evals = 1
    ychild = np.empty(T)

    while hsize > 0:
        # pop
        node = HN[0]
        b0 = HB[0]
        hsize -= 1
        HB[0] = HB[hsize]
        HS[0] = HS[hsize]
        HN[0] = HN[hsize]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < hsize and (HB[l] < HB[m] or (HB[l] == HB[m] and HS[l] < HS[m])):
                m = l
            if r < hsize and (HB[r] < HB[m] or (HB[r] == HB[m] and HS[r] < HS[m])):
                m = r
            if m == i:
                break
            HB[m], HB[i] = HB[i], HB[m]
            HS[m], HS[i] = HS[i], HS[m]
            HN[m], HN[i] = HN[i], HN[m]
            i = m
        if b0 >= best:
            break
        j = PD[node]
        popped += 1
        if popped % dive_every == 0:
            dive_ranks[:] = PR[node]
            v = _dive(j, PY[node], PL[node], dive_ranks, c2, c1, y_max, kind, lo, hi, dur, pw, poff,
                      prof, z, x0, lam_best, idx, comb, node_steps)
            if v < np.inf:
                v = _improve(dive_ranks, c2, c1, y_max, kind, lo, hi, dur, pw, poff, prof, comb, T)
            if v < best:
                best = v
                best_ranks[:] = dive_ranks
        # bound of every child at the parent's multipliers, up to the child's own term
        plam = PL[node]
        for t in range(T):
            z[t] = 0.0
        rest = _supply_value(plam, c2, c1, y_max, x0)
        for t in range(T):
            rest += plam[t] * PY[node, t]
        rest += _linear_response(j + 1, -1, plam, z, kind, lo, hi, dur, pw, poff, prof, idx)
        _first_choice(j, comb, kind, dur)
        ok = True
        rank = 0
        while ok:
            evals += 1
            if evals > cap:
                return 1, best, best_ranks, evals
            quick = rest
            if kind[j] == NI:
                quick += _ni_start_cost(plam, lo[j] + comb[0], prof, poff[j], dur[j])
            else:
                for i in range(dur[j]):
                    quick += pw[j] * plam[lo[j] + comb[i]]
            if quick >= best:
                rank += 1
                ok = _next_choice(j, comb, kind, lo, hi, dur)
                continue
            ychild[:] = PY[node]
            _apply_choice(j, comb, ychild, 1.0, kind, lo, dur, pw, poff, prof)
            over = False
            for t in range(T):
                if ychild[t] > y_max[t]:
                    over = True
            if not over:
                if j + 1 == n:
                    v = _cost(ychild, c2, c1)
                    if v < best:
                        best = v
                        best_ranks[:] = PR[node]
                        best_ranks[j] = rank
                else:
                    lam[:] = plam
                    cb = _fw_bound(j + 1, ychild, lam, node_steps, c2, c1, y_max, kind, lo, hi,
                                   dur, pw, poff, prof, z, x0, wbuf, sbuf, lam_best, idx)
                    cb = max(cb, quick)
                    if cb < best:
                        cb = max(cb, _fluid_bound(ychild, energy_sfx[j + 1], caps_sfx[j + 1], c2,
                                                  c1, z))
                    if cb < best:
                        if nfree > 0:
                            nfree -= 1
                            slot = FS[nfree]
                        else:
                            if used == pcap:
                                ncap = 2 * pcap
                                PY2 = np.empty((ncap, T))
                                PL2 = np.empty((ncap, T))
                                PR2 = np.empty((ncap, n), np.int64)
                                PD2 = np.empty(ncap, np.int64)
                                HB2 = np.empty(ncap)
                                HS2 = np.empty(ncap, np.int64)
                                HN2 = np.empty(ncap, np.int64)
                                FS2 = np.empty(ncap, np.int64)
                                PY2[:pcap] = PY
                                PL2[:pcap] = PL
                                PR2[:pcap] = PR
                                PD2[:pcap] = PD
                                HB2[:pcap] = HB
                                HS2[:pcap] = HS
                                HN2[:pcap] = HN
                                FS2[:pcap] = FS
                                PY = PY2
                                PL = PL2
                                PR = PR2
                                PD = PD2
                                HB = HB2
                                HS = HS2
                                HN = HN2
                                FS = FS2
                                pcap = ncap
                            slot = used
                            used += 1
                        PY[slot, :] = ychild
                        PL[slot, :] = lam
                        PR[slot, :] = PR[node]
                        PR[slot, j] = rank
                        PD[slot] = j + 1
                        # push
                        k = hsize
                        HB[k] = cb
                        HS[k] = seq
                        HN[k] = slot
                        while k > 0:
                            p = (k - 1) // 2
                            if HB[p] < HB[k] or (HB[p] == HB[k] and HS[p] < HS[k]):
                                break
                            HB[p], HB[k] = HB[k], HB[p]
                            HS[p], HS[k] = HS[k], HS[p]
                            HN[p], HN[k] = HN[k], HN[p]
                            k = p
                        hsize += 1
                        seq += 1
            rank += 1
            ok = _next_choice(j, comb, kind, lo, hi, dur)
        FS[nfree] = node
        nfree += 1

    if best == np.inf:
        return 2, best, best_ranks, evals
    return 0, best, best_ranks, evals
