"""Compiled inner loop of the simulator.

State lives in a handful of flat arrays so one call can advance many steps.
Active users are kept contiguous and in admission (uid) order; a cell never
holds more than ``K`` users, so capacity ``K * towers`` is enough.
"""

import math

import numba as nb

# float state rows
POS, VEL, REM, PW, VSTART = 0, 1, 2, 3, 4
N_FSTATE = 5
# int state rows
UID, CELL, HO, ABATCH = 0, 1, 2, 3
N_ISTATE = 4
# cursor slots
N_ACTIVE, PTR, EV_N, NEXT_UID = 0, 1, 2, 3
# float params
DT, HALF, RING, HO_BYTES, WARMUP, BATCH_LEN, D0, BETA, SIGMA2 = range(9)
# int params
TOWERS, SERVERS, NBATCH, COMMON_RATES, INTERFERENCE, TRACE, TWICE_BETA = range(7)
# counters
ARRIVALS, BLOCKED, ADMITTED, HO_ATTEMPTS, HO_DROPS, COMPLETIONS = range(6)
COUNT_NAMES = ("arrivals", "blocked", "admitted", "ho_attempts", "ho_drops", "completions")
# accumulator rows are (num, den) pairs in this order
METRICS = ("busy", "drop", "e_ho", "h_ho", "b_e", "b_h")
EVENT_NAMES = ("arrival", "block", "admit", "handover", "drop", "complete")


@nb.njit(cache=True)
def attenuation(d, d0, beta, twice_beta):
    """``min(1, (d/d0)**-beta)``; ``twice_beta >= 0`` selects a multiply-only path."""
    if d <= d0:
        return 1.0
    r = d / d0
    if twice_beta < 0:
        return r ** (-beta)
    out = 1.0
    for _ in range(twice_beta // 2):
        out *= r
    if twice_beta % 2:
        out *= math.sqrt(r)
    return 1.0 / out


@nb.njit(cache=True)
def batch_of(t, fpar, ipar):
    if t < fpar[WARMUP]:
        return -1
    b = int((t - fpar[WARMUP]) / fpar[BATCH_LEN])
    return min(b, ipar[NBATCH] - 1)


@nb.njit(cache=True)
def emit(ev_f, ev_i, cursor, ipar, t, kind, uid, cell, val):
    if ipar[TRACE] == 0:
        return
    k = cursor[EV_N]
    ev_f[0, k] = t
    ev_f[1, k] = val
    ev_i[0, k] = kind
    ev_i[1, k] = uid
    ev_i[2, k] = cell
    cursor[EV_N] = k + 1


@nb.njit(cache=True)
def admit(fs, is_, occ, counts, acc, cursor, fpar, ipar, ev_f, ev_i, t, pos, vel, job, power):
    """Offer a new call; returns True if a server was free."""
    two_l = 2.0 * fpar[HALF]
    c = min(int(pos // two_l), ipar[TOWERS] - 1)
    uid = cursor[NEXT_UID]
    cursor[NEXT_UID] = uid + 1
    b = batch_of(t, fpar, ipar)
    if b >= 0:
        counts[ARRIVALS] += 1
        acc[1, b] += 1.0
    emit(ev_f, ev_i, cursor, ipar, t, 0, uid, c, vel)
    if occ[c] >= ipar[SERVERS]:
        if b >= 0:
            counts[BLOCKED] += 1
            acc[0, b] += 1.0
        emit(ev_f, ev_i, cursor, ipar, t, 1, uid, c, 0.0)
        return False
    occ[c] += 1
    j = cursor[N_ACTIVE]
    fs[POS, j] = pos
    fs[VEL, j] = vel
    fs[REM, j] = job
    fs[PW, j] = power
    fs[VSTART, j] = t
    is_[UID, j] = uid
    is_[CELL, j] = c
    is_[HO, j] = 0
    is_[ABATCH, j] = b
    cursor[N_ACTIVE] = j + 1
    if b >= 0:
        counts[ADMITTED] += 1
        acc[3, b] += 1.0
    emit(ev_f, ev_i, cursor, ipar, t, 2, uid, c, power)
    return True


@nb.njit(cache=True)
def end_visit(fs, is_, acc, fpar, ipar, j, t, boundary):
    vs = fs[VSTART, j]
    if vs < fpar[WARMUP]:
        return
    b = min(int((vs - fpar[WARMUP]) / fpar[BATCH_LEN]), ipar[NBATCH] - 1)
    # e_ho rows 4/5, h_ho 6/7, b_e 8/9, b_h 10/11
    off = 2 if is_[HO, j] == 1 else 0
    acc[5 + off, b] += 1.0
    if boundary:
        acc[4 + off, b] += 1.0
    acc[8 + off, b] += t - vs
    acc[9 + off, b] += 1.0


@nb.njit(cache=True)
def compact(fs, is_, keep, cursor):
    n = cursor[N_ACTIVE]
    w = 0
    for j in range(n):
        if keep[j]:
            if w != j:
                for r in range(N_FSTATE):
                    fs[r, w] = fs[r, j]
                for r in range(N_ISTATE):
                    is_[r, w] = is_[r, j]
            w += 1
    cursor[N_ACTIVE] = w


@nb.njit(cache=True)
def pick_rate(levels, x):
    """Largest entry of ascending ``levels`` that is <= x, else -1 index."""
    lo, hi = 0, levels.size
    while lo < hi:
        mid = (lo + hi) // 2
        if levels[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo - 1


@nb.njit(cache=True)
def advance(fs, is_, occ, counts, cell_ho, acc, cursor, fpar, ipar, levels,
            pool, pois, step, stop, ev_f, ev_i, keep, crossing, load, rate):
    """Run steps ``step..stop-1``; returns the next unprocessed step.

    Returns early when the arrival pool or the event buffer might overflow.
    """
    dt = fpar[DT]
    half = fpar[HALF]
    two_l = 2.0 * half
    ring = fpar[RING]
    d0 = fpar[D0]
    beta = fpar[BETA]
    n_t = ipar[TOWERS]
    K = ipar[SERVERS]
    tb = ipar[TWICE_BETA]
    cap = fs.shape[1]
    ev_cap = ev_f.shape[1]
    pool_n = pool.shape[1]
    base = step
    while step < stop:
        count = pois[step - base]
        if cursor[PTR] + count > pool_n:
            return step
        if ipar[TRACE] == 1 and cursor[EV_N] + 3 * (cap + count) + 8 > ev_cap:
            return step
        t0 = step * dt
        t1 = (step + 1) * dt
        for _ in range(count):
            p = cursor[PTR]
            cursor[PTR] = p + 1
            admit(fs, is_, occ, counts, acc, cursor, fpar, ipar, ev_f, ev_i, t0,
                  pool[0, p], pool[1, p], pool[2, p], pool[3, p])

        n = cursor[N_ACTIVE]
        # motion and boundary crossings: release every old server first
        any_cross = False
        for j in range(n):
            x = fs[POS, j] + fs[VEL, j] * dt
            if x >= ring:
                x -= ring
            fs[POS, j] = x
            c = min(int(x // two_l), n_t - 1)
            if c != is_[CELL, j]:
                crossing[j] = c
                any_cross = True
                end_visit(fs, is_, acc, fpar, ipar, j, t1, True)
                occ[is_[CELL, j]] -= 1
                fs[REM, j] += fpar[HO_BYTES]
            else:
                crossing[j] = -1
        if any_cross:
            any_drop = False
            counted = t1 >= fpar[WARMUP]
            for j in range(n):
                keep[j] = True
                dest = crossing[j]
                if dest < 0:
                    continue
                if counted:
                    counts[HO_ATTEMPTS] += 1
                    cell_ho[dest] += 1
                if occ[dest] < K:
                    occ[dest] += 1
                    is_[CELL, j] = dest
                    is_[HO, j] = 1
                    fs[VSTART, j] = t1
                    emit(ev_f, ev_i, cursor, ipar, t1, 3, is_[UID, j], dest, fs[REM, j])
                else:
                    keep[j] = False
                    any_drop = True
                    b = is_[ABATCH, j]
                    if b >= 0:
                        counts[HO_DROPS] += 1
                        acc[2, b] += 1.0
                    emit(ev_f, ev_i, cursor, ipar, t1, 4, is_[UID, j], dest, fs[REM, j])
            if any_drop:
                compact(fs, is_, keep, cursor)
                n = cursor[N_ACTIVE]

        # service at the received SNR / SINR
        if ipar[INTERFERENCE] == 1:
            for c in range(n_t):
                load[c] = 0.0
            for j in range(n):
                load[is_[CELL, j]] += fs[PW, j]
        for j in range(n):
            c = is_[CELL, j]
            tower = two_l * c + half
            d = abs(fs[POS, j] - tower)
            x = fs[PW, j] * attenuation(d, d0, beta, tb)
            if ipar[INTERFERENCE] == 1:
                interf = 0.0
                for k in range(n_t):
                    if k == c or load[k] == 0.0:
                        continue
                    dk = abs(fs[POS, j] - (two_l * k + half))
                    if ring - dk < dk:
                        dk = ring - dk
                    interf += load[k] * attenuation(dk, d0, beta, tb)
                x = x / (1.0 + interf / fpar[SIGMA2])
            if ipar[COMMON_RATES] == 1:
                i = pick_rate(levels, x)
                rate[j] = levels[i] if i >= 0 else 0.0
            else:
                i = pick_rate(levels, x / fs[PW, j])
                rate[j] = fs[PW, j] * levels[i] if i >= 0 else 0.0
        any_done = False
        for j in range(n):
            fs[REM, j] -= rate[j] * dt
            keep[j] = True
            if fs[REM, j] <= 0.0:
                keep[j] = False
                any_done = True
                end_visit(fs, is_, acc, fpar, ipar, j, t1, False)
                occ[is_[CELL, j]] -= 1
                if is_[ABATCH, j] >= 0:
                    counts[COMPLETIONS] += 1
                emit(ev_f, ev_i, cursor, ipar, t1, 5, is_[UID, j], is_[CELL, j], 0.0)
        if any_done:
            compact(fs, is_, keep, cursor)
        step += 1
    return step
