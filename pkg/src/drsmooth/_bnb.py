"""Compiled best-first branch-and-bound for the smoothed household subproblem.

Minimises ``sum_t lam_t y_t + mu/2 * y_t**2`` where ``y`` is the sum of the
appliance placements. Appliances are decided in list order.
Non-interruptible appliances branch on the start slot; interruptible ones
branch slot by slot (include before exclude) over their window.

The lower bound at a node is the exact cost of the decided part plus the
largest of three relaxations of the undecided part: per-appliance minima
that ignore cross terms, a water-filling relaxation of the pooled energy,
and a conjugate split of the quadratic into per-appliance linear problems.

Every decision is recorded as a small integer key (start offset, or 0/1 for
include/exclude) so that lexicographic order on the concatenated keys equals
lexicographic order on the choice encodings. The returned leaf is the
lexicographically smallest one whose objective is within ``tie_tol`` of the
minimum.
"""

import numpy as np
from numba import njit

NI = 0
INT = 1


@njit(cache=True, nogil=True)
def _slack(v, tol):
    return v + tol * max(1.0, abs(v))


@njit(cache=True, nogil=True)
def _objective(y, lam, mu):
    lin = 0.0
    sq = 0.0
    for t in range(y.shape[0]):
        lin += lam[t] * y[t]
        sq += y[t] * y[t]
    return lin + 0.5 * mu * sq


@njit(cache=True, nogil=True)
def _keycmp(a, b, length):
    for i in range(length):
        if a[i] < b[i]:
            return -1
        if a[i] > b[i]:
            return 1
    return 0


@njit(cache=True, nogil=True)
def _sort_window(c, lo, hi, idx):
    """Fill idx[:w] with window slots ordered by (c, slot)."""
    w = hi - lo + 1
    for j in range(w):
        t = lo + j
        i = j
        while i > 0 and c[idx[i - 1]] > c[t]:
            idx[i] = idx[i - 1]
            i -= 1
        idx[i] = t
    return w


@njit(cache=True, nogil=True)
def _min_int_cost(c, lo, hi, r, p, mu, idx):
    if r == 0:
        return 0.0
    _sort_window(c, lo, hi, idx)
    s = 0.0
    for j in range(r):
        s += c[idx[j]]
    return p * s + 0.5 * mu * p * p * r


@njit(cache=True, nogil=True)
def _ni_start_cost(c, s, prof, off, d):
    v = 0.0
    for k in range(d):
        v += c[s + k] * prof[off + k]
    return v


@njit(cache=True, nogil=True)
def _min_ni_cost(c, lo, hi, prof, off, d, mu):
    best = np.inf
    for s in range(lo, hi - d + 2):
        v = _ni_start_cost(c, s, prof, off, d)
        if v < best:
            best = v
    q = 0.0
    for k in range(d):
        q += prof[off + k] * prof[off + k]
    return best + 0.5 * mu * q


@njit(cache=True, nogil=True)
def _waterfill_bound(c, caps, energy, mu, brk):
    """Dual lower bound on min sum c z + mu/2 z^2, sum z = energy, 0 <= z <= caps."""
    if energy <= 0.0:
        return 0.0
    T = c.shape[0]
    nb = 0
    for t in range(T):
        if caps[t] > 0.0:
            brk[nb] = c[t]
            nb += 1
            brk[nb] = c[t] + mu * caps[t]
            nb += 1
    if nb == 0:
        return 0.0
    b = np.sort(brk[:nb])
    # smallest breakpoint where the supplied amount reaches the energy
    lo_i = 0
    hi_i = nb - 1
    if _supply(c, caps, mu, b[hi_i]) < energy:
        nu = b[hi_i]
    else:
        while lo_i < hi_i:
            mid = (lo_i + hi_i) // 2
            if _supply(c, caps, mu, b[mid]) >= energy:
                hi_i = mid
            else:
                lo_i = mid + 1
        nu = b[hi_i]
        if mu > 0.0 and hi_i > 0:
            s1 = _supply(c, caps, mu, b[hi_i])
            s0 = _supply(c, caps, mu, b[hi_i - 1])
            if s1 > s0:
                nu = b[hi_i - 1] + (b[hi_i] - b[hi_i - 1]) * (energy - s0) / (s1 - s0)
    val = nu * energy
    for t in range(T):
        cap = caps[t]
        if cap <= 0.0:
            continue
        g = c[t] - nu
        if mu > 0.0:
            z = -g / mu
            if z < 0.0:
                z = 0.0
            elif z > cap:
                z = cap
        else:
            z = cap if g < 0.0 else 0.0
        val += g * z + 0.5 * mu * z * z
    return val


@njit(cache=True, nogil=True)
def _supply(c, caps, mu, nu):
    s = 0.0
    for t in range(c.shape[0]):
        cap = caps[t]
        if cap <= 0.0:
            continue
        if mu > 0.0:
            z = (nu - c[t]) / mu
            if z > cap:
                z = cap
            if z > 0.0:
                s += z
        elif c[t] <= nu:
            s += cap
    return s


@njit(cache=True, nogil=True)
def _linear_response(a, pos, rem, price, z, kind, lo, hi, dur, pw, poff, prof, idx):
    """Sum over undecided appliances of min price.x_b; argmin loads are added to z."""
    n = kind.shape[0]
    tot = 0.0
    for b in range(a, n):
        if kind[b] == INT:
            if b == a:
                l = lo[b] + pos
                r = rem
            else:
                l = lo[b]
                r = dur[b]
            if r == 0:
                continue
            _sort_window(price, l, hi[b], idx)
            for j in range(r):
                t = idx[j]
                tot += pw[b] * price[t]
                z[t] += pw[b]
        else:
            d = dur[b]
            best = np.inf
            bs = lo[b]
            for s in range(lo[b], hi[b] - d + 2):
                v = _ni_start_cost(price, s, prof, poff[b], d)
                if v < best:
                    best = v
                    bs = s
            tot += best
            for k in range(d):
                z[bs + k] += prof[poff[b] + k]
    return tot


@njit(cache=True, nogil=True)
def _conjugate_bound(a, pos, rem, c, mu, pi, steps, kind, lo, hi, dur, pw, poff, prof, idx,
                     price, z):
    """Lower bound on min c.z + mu/2 ||z||^2 over the undecided appliances.

    Uses mu/2 z_t^2 >= pi_t z_t - pi_t^2 / (2 mu), valid for every pi, which
    splits the remaining appliances into independent linear problems. pi is
    improved in place by damped fixed-point steps toward mu * z(pi).
    """
    T = c.shape[0]
    best = -np.inf
    for it in range(steps + 1):
        pen = 0.0
        for t in range(T):
            price[t] = c[t] + pi[t]
            z[t] = 0.0
            pen += pi[t] * pi[t]
        v = _linear_response(a, pos, rem, price, z, kind, lo, hi, dur, pw, poff, prof, idx) \
            - pen / (2.0 * mu)
        if v > best:
            best = v
        if it < steps:
            s = 1.0 / (it + 2.0)
            for t in range(T):
                pi[t] += s * (mu * z[t] - pi[t])
    return best


@njit(cache=True, nogil=True)
def _bound(a, pos, rem, y, lam, mu, kind, lo, hi, dur, pw, poff, prof, energy, peak,
           c, caps, idx, brk, pi, steps, price, z):
    n = kind.shape[0]
    T = y.shape[0]
    for t in range(T):
        c[t] = lam[t] + mu * y[t]
        caps[t] = 0.0
    sep = 0.0
    e = 0.0
    for b in range(a, n):
        if kind[b] == INT:
            if b == a:
                l = lo[b] + pos
                r = rem
            else:
                l = lo[b]
                r = dur[b]
            sep += _min_int_cost(c, l, hi[b], r, pw[b], mu, idx)
            e += r * pw[b]
            if r > 0:
                for t in range(l, hi[b] + 1):
                    caps[t] += pw[b]
        else:
            sep += _min_ni_cost(c, lo[b], hi[b], prof, poff[b], dur[b], mu)
            e += energy[b]
            for t in range(lo[b], hi[b] + 1):
                caps[t] += peak[b]
    best = max(sep, _waterfill_bound(c, caps, e, mu, brk))
    if mu > 0.0 and steps >= 0:
        best = max(best, _conjugate_bound(a, pos, rem, c, mu, pi, steps, kind, lo, hi, dur, pw,
                                          poff, prof, idx, price, z))
    return _objective(y, lam, mu) + best


@njit(cache=True, nogil=True)
def _enter(a, kind, dur):
    """(pos, rem) when appliance a becomes current."""
    if a < kind.shape[0] and kind[a] == INT:
        return 0, dur[a]
    return 0, 0


@njit(cache=True, nogil=True)
def _normalize(a, pos, rem, y, key, kind, lo, hi, dur, pw, koff):
    """Apply forced interruptible decisions until a real branching point."""
    n = kind.shape[0]
    while a < n and kind[a] == INT:
        w = hi[a] - lo[a] + 1
        if rem == 0:
            for j in range(pos, w):
                key[koff[a] + j] = 1
        elif rem == w - pos:
            for j in range(pos, w):
                key[koff[a] + j] = 0
                y[lo[a] + j] += pw[a]
        else:
            break
        a += 1
        pos, rem = _enter(a, kind, dur)
    return a, pos, rem


@njit(cache=True, nogil=True)
def _slot_masks(kind, lo, hi, T):
    """Per-slot bitmasks of interruptible and non-interruptible windows covering it."""
    imask = np.zeros(T, np.int64)
    nmask = np.zeros(T, np.int64)
    for a in range(kind.shape[0]):
        for t in range(lo[a], hi[a] + 1):
            if kind[a] == INT:
                imask[t] |= np.int64(1) << a
            else:
                nmask[t] |= np.int64(1) << a
    return imask, nmask


@njit(cache=True, nogil=True)
def _include_is_symmetric(a, pos, y, key, lam, lo, koff, imask, nmask):
    """True if including slot lo+pos mirrors an earlier excluded, interchangeable slot.

    Slots t < u are interchangeable for the rest of the search when they carry
    the same price and partial load, are covered by the same later
    interruptible windows and by no later non-interruptible window. Swapping
    them maps the include-u leaf onto a lexicographically smaller leaf with
    the same objective, so the include branch can be dropped.
    """
    u = lo[a] + pos
    later = np.int64(-1) << (a + 1)
    if nmask[u] & later:
        return False
    for j in range(pos):
        t = lo[a] + j
        if key[koff[a] + j] != 1:
            continue
        if (y[t] == y[u] and lam[t] == lam[u] and (imask[t] & later) == (imask[u] & later)
                and not (nmask[t] & later)):
            return True
    return False


@njit(cache=True, nogil=True)
def _depth(a, pos, koff):
    return koff[a] + pos


@njit(cache=True, nogil=True)
def _best_response(a, c, kind, lo, hi, dur, prof, poff, idx, key, koff):
    """Write appliance a's cheapest decision against marginal prices c into key."""
    if kind[a] == NI:
        best = np.inf
        bs = 0
        for s in range(lo[a], hi[a] - dur[a] + 2):
            v = _ni_start_cost(c, s, prof, poff[a], dur[a])
            if v < best:
                best = v
                bs = s
        key[koff[a]] = bs - lo[a]
    else:
        w = _sort_window(c, lo[a], hi[a], idx)
        for j in range(w):
            key[koff[a] + j] = 1
        for j in range(dur[a]):
            key[koff[a] + idx[j] - lo[a]] = 0


@njit(cache=True, nogil=True)
def _place(a, key, y, sign, kind, lo, hi, dur, pw, prof, poff, koff):
    if kind[a] == NI:
        s = lo[a] + key[koff[a]]
        for k in range(dur[a]):
            y[s + k] += sign * prof[poff[a] + k]
    else:
        for j in range(hi[a] - lo[a] + 1):
            if key[koff[a] + j] == 0:
                y[lo[a] + j] += sign * pw[a]


@njit(cache=True, nogil=True)
def _initial(lam, mu, kind, lo, hi, dur, pw, prof, poff, koff, idx):
    """Greedy construction followed by per-appliance best-response sweeps."""
    n = kind.shape[0]
    T = lam.shape[0]
    key = np.zeros(koff[n], np.int16)
    y = np.zeros(T)
    c = np.empty(T)
    for a in range(n):
        for t in range(T):
            c[t] = lam[t] + mu * y[t]
        _best_response(a, c, kind, lo, hi, dur, prof, poff, idx, key, koff)
        _place(a, key, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
    if mu > 0.0:
        trial = key.copy()
        for _sweep in range(50):
            changed = False
            for a in range(n):
                before = _objective(y, lam, mu)
                _place(a, key, y, -1.0, kind, lo, hi, dur, pw, prof, poff, koff)
                for t in range(T):
                    c[t] = lam[t] + mu * y[t]
                trial[:] = key
                _best_response(a, c, kind, lo, hi, dur, prof, poff, idx, trial, koff)
                _place(a, trial, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
                after = _objective(y, lam, mu)
                if after < before - 1e-12 * max(1.0, abs(before)):
                    key[:] = trial
                    changed = True
                else:
                    _place(a, trial, y, -1.0, kind, lo, hi, dur, pw, prof, poff, koff)
                    _place(a, key, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
            if not changed:
                break
    # recompute from scratch so the value is independent of the update path
    y[:] = 0.0
    for a in range(n):
        _place(a, key, y, 1.0, kind, lo, hi, dur, pw, prof, poff, koff)
    return key, y


@njit(cache=True, nogil=True)
def _offer(obj, key, y, CO, CK, CY, ncand, m_hat, tol):
    """Record a leaf; keeps only non-dominated near-optimal candidates."""
    K = key.shape[0]
    if obj < m_hat:
        m_hat = obj
    thr = _slack(m_hat, tol)
    j = 0
    for i in range(ncand):
        if CO[i] <= thr:
            if i != j:
                CO[j] = CO[i]
                CK[j, :] = CK[i, :]
                CY[j, :] = CY[i, :]
            j += 1
    ncand = j
    if obj > thr:
        return ncand, m_hat
    for i in range(ncand):
        if CO[i] <= obj and _keycmp(CK[i], key, K) <= 0:
            return ncand, m_hat
    j = 0
    for i in range(ncand):
        if not (obj <= CO[i] and _keycmp(key, CK[i], K) < 0):
            if i != j:
                CO[j] = CO[i]
                CK[j, :] = CK[i, :]
                CY[j, :] = CY[i, :]
            j += 1
    ncand = j
    CO[ncand] = obj
    CK[ncand, :] = key
    CY[ncand, :] = y
    return ncand + 1, m_hat


@njit(cache=True, nogil=True)
def _tie_prunable(prefix, depth, b, CO, CK, ncand, m_hat, tol):
    """True if some candidate surely within tolerance of the optimum beats every leaf below."""
    thr = _slack(min(m_hat, b), tol)
    for i in range(ncand):
        if CO[i] <= thr and _keycmp(prefix, CK[i], depth) > 0:
            return True
    return False


@njit(cache=True, nogil=True)
def _heap_push(HB, HS, HN, size, b, s, node):
    i = size
    HB[i] = b
    HS[i] = s
    HN[i] = node
    while i > 0:
        p = (i - 1) // 2
        if HB[p] < HB[i] or (HB[p] == HB[i] and HS[p] < HS[i]):
            break
        HB[p], HB[i] = HB[i], HB[p]
        HS[p], HS[i] = HS[i], HS[p]
        HN[p], HN[i] = HN[i], HN[p]
        i = p
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(HB, HS, HN, size):
    node = HN[0]
    b = HB[0]
    size -= 1
    HB[0] = HB[size]
    HS[0] = HS[size]
    HN[0] = HN[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < size and (HB[l] < HB[m] or (HB[l] == HB[m] and HS[l] < HS[m])):
            m = l
        if r < size and (HB[r] < HB[m] or (HB[r] == HB[m] and HS[r] < HS[m])):
            m = r
        if m == i:
            break
        HB[m], HB[i] = HB[i], HB[m]
        HS[m], HS[i] = HS[i], HS[m]
        HN[m], HN[i] = HN[i], HN[m]
        i = m
    return node, b, size


@njit(cache=True, nogil=True)
def solve_household(kind, lo, hi, dur, pw, poff, prof, koff, energy, peak, lam, mu, tol, max_nodes,
                    root_steps=30, node_steps=2):
    """Best-first search. Returns (key, demand, objective, nodes_expanded, proven).

    A negative ``max_nodes`` means no limit. When the limit is hit the best
    leaf found so far is returned with ``proven`` False.
    """
    n = kind.shape[0]
    T = lam.shape[0]
    K = koff[n]
    c = np.empty(T)
    caps = np.empty(T)
    idx = np.empty(T, np.int64)
    brk = np.empty(2 * T)
    price = np.empty(T)
    zbuf = np.empty(T)
    pic = np.empty(T)
    pit = np.empty(T)

    ccap = 16
    CO = np.empty(ccap)
    CK = np.empty((ccap, K), np.int16)
    CY = np.empty((ccap, T))
    ncand = 0
    m_hat = np.inf

    key0, y0 = _initial(lam, mu, kind, lo, hi, dur, pw, prof, poff, koff, idx)
    ncand, m_hat = _offer(_objective(y0, lam, mu), key0, y0, CO, CK, CY, ncand, m_hat, tol)
    for t in range(T):
        pic[t] = mu * y0[t]

    cap = 256
    PY = np.empty((cap, T))
    PI = np.empty((cap, T))
    PK = np.empty((cap, K), np.int16)
    PA = np.empty(cap, np.int64)
    PPOS = np.empty(cap, np.int64)
    PREM = np.empty(cap, np.int64)
    FS = np.empty(cap, np.int64)
    HB = np.empty(cap)
    HS = np.empty(cap, np.int64)
    HN = np.empty(cap, np.int64)
    nfree = 0
    used = 0
    hsize = 0
    seq = 0

    maxch = 2
    for a in range(n):
        if kind[a] == NI:
            maxch = max(maxch, hi[a] - lo[a] - dur[a] + 2)
    use_sym = n <= 62
    imask, nmask = _slot_masks(kind, lo, hi, T)
    BY = np.empty((maxch, T))
    BK = np.empty((maxch, K), np.int16)
    BA = np.empty(maxch, np.int64)
    BP = np.empty(maxch, np.int64)
    BR = np.empty(maxch, np.int64)

    # root
    BY[0, :] = 0.0
    BK[0, :] = 0
    p0, r0 = _enter(0, kind, dur)
    a0, p0, r0 = _normalize(0, p0, r0, BY[0], BK[0], kind, lo, hi, dur, pw, koff)
    BA[0] = a0
    BP[0] = p0
    BR[0] = r0
    nch = 1
    cur = -1
    nodes = 0
    proven = True

    while True:
        # process the children buffer of the node just expanded (or the root)
        for ch in range(nch):
            a2 = BA[ch]
            if a2 == n:
                if ncand == ccap:
                    ccap *= 2
                    CO2 = np.empty(ccap)
                    CK2 = np.empty((ccap, K), np.int16)
                    CY2 = np.empty((ccap, T))
                    CO2[:ncand] = CO[:ncand]
                    CK2[:ncand] = CK[:ncand]
                    CY2[:ncand] = CY[:ncand]
                    CO = CO2
                    CK = CK2
                    CY = CY2
                ncand, m_hat = _offer(_objective(BY[ch], lam, mu), BK[ch], BY[ch],
                                      CO, CK, CY, ncand, m_hat, tol)
                continue
            pit[:] = pic
            cb = _bound(a2, BP[ch], BR[ch], BY[ch], lam, mu, kind, lo, hi, dur, pw, poff,
                        prof, energy, peak, c, caps, idx, brk, pit,
                        root_steps if cur < 0 else node_steps, price, zbuf)
            if cb > _slack(m_hat, tol):
                continue
            if _tie_prunable(BK[ch], _depth(a2, BP[ch], koff), cb, CO, CK, ncand, m_hat, tol):
                continue
            if nfree > 0:
                nfree -= 1
                slot = FS[nfree]
            else:
                if used == cap:
                    ncap = cap * 2
                    PY2 = np.empty((ncap, T))
                    PI2 = np.empty((ncap, T))
                    PK2 = np.empty((ncap, K), np.int16)
                    PA2 = np.empty(ncap, np.int64)
                    PPOS2 = np.empty(ncap, np.int64)
                    PREM2 = np.empty(ncap, np.int64)
                    FS2 = np.empty(ncap, np.int64)
                    HB2 = np.empty(ncap)
                    HS2 = np.empty(ncap, np.int64)
                    HN2 = np.empty(ncap, np.int64)
                    PY2[:cap] = PY
                    PI2[:cap] = PI
                    PK2[:cap] = PK
                    PA2[:cap] = PA
                    PPOS2[:cap] = PPOS
                    PREM2[:cap] = PREM
                    FS2[:cap] = FS
                    HB2[:cap] = HB
                    HS2[:cap] = HS
                    HN2[:cap] = HN
                    PY = PY2
                    PI = PI2
                    PK = PK2
                    PA = PA2
                    PPOS = PPOS2
                    PREM = PREM2
                    FS = FS2
                    HB = HB2
                    HS = HS2
                    HN = HN2
                    cap = ncap
                slot = used
                used += 1
            PY[slot, :] = BY[ch]
            PI[slot, :] = pit
            PK[slot, :] = BK[ch]
            PA[slot] = a2
            PPOS[slot] = BP[ch]
            PREM[slot] = BR[ch]
            hsize = _heap_push(HB, HS, HN, hsize, cb, seq, slot)
            seq += 1
        if cur >= 0:
            FS[nfree] = cur
            nfree += 1
            cur = -1

        # pop the next node worth expanding
        nch = 0
        while hsize > 0:
            node, b, hsize = _heap_pop(HB, HS, HN, hsize)
            if b > _slack(m_hat, tol):
                hsize = 0
                FS[nfree] = node
                nfree += 1
                break
            if _tie_prunable(PK[node], _depth(PA[node], PPOS[node], koff), b,
                             CO, CK, ncand, m_hat, tol):
                FS[nfree] = node
                nfree += 1
                continue
            cur = node
            pic[:] = PI[node]
            break
        if cur < 0:
            break

        if max_nodes >= 0 and nodes >= max_nodes:
            proven = False
            break
        nodes += 1
        a = PA[cur]
        if kind[a] == NI:
            d = dur[a]
            for s in range(hi[a] - lo[a] - d + 2):
                BY[nch, :] = PY[cur]
                BK[nch, :] = PK[cur]
                for k in range(d):
                    BY[nch, lo[a] + s + k] += prof[poff[a] + k]
                BK[nch, koff[a]] = s
                p2, r2 = _enter(a + 1, kind, dur)
                a2, p2, r2 = _normalize(a + 1, p2, r2, BY[nch], BK[nch], kind, lo, hi, dur, pw, koff)
                BA[nch] = a2
                BP[nch] = p2
                BR[nch] = r2
                nch += 1
        else:
            pos = PPOS[cur]
            rem = PREM[cur]
            for inc in range(2):
                if inc == 0 and use_sym and _include_is_symmetric(a, pos, PY[cur], PK[cur], lam, lo,
                                                                  koff, imask, nmask):
                    continue
                BY[nch, :] = PY[cur]
                BK[nch, :] = PK[cur]
                if inc == 0:
                    BY[nch, lo[a] + pos] += pw[a]
                    BK[nch, koff[a] + pos] = 0
                    r2 = rem - 1
                else:
                    BK[nch, koff[a] + pos] = 1
                    r2 = rem
                a2, p2, r2 = _normalize(a, pos + 1, r2, BY[nch], BK[nch], kind, lo, hi, dur, pw, koff)
                BA[nch] = a2
                BP[nch] = p2
                BR[nch] = r2
                nch += 1

    thr = _slack(m_hat, tol)
    w = -1
    for i in range(ncand):
        if CO[i] <= thr and (w < 0 or _keycmp(CK[i], CK[w], K) < 0):
            w = i
    return CK[w].copy(), CY[w].copy(), CO[w], nodes, proven
