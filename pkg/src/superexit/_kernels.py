"""Numba kernels: branching Brownian particles killed on the unit sphere, and
the pure-branching total-mass chain.

Masses are kept as integer particle counts; the caller divides by n.
"""
import numpy as np
from numba import njit

# counters layout
C_N0, C_JUMPS, C_EXITS, C_ALIVE, C_EVENTS, C_TRUNC, C_STEPS, C_MAXPOP, C_PSTEPS = range(9)


@njit(cache=True)
def sample_offspring(rng, cdf, tail_p, tail_k, tail_a):
    """k from the tabulated law; beyond the table k = floor(x) + 1, x Pareto."""
    u = rng.random()
    if u < cdf[0]:
        return 0
    if u >= cdf[cdf.shape[0] - 1] and tail_p > 0.0:
        v = rng.random()
        x = (tail_k - 1.0) * (1.0 - v) ** (-1.0 / tail_a)
        if x > 9.0e15:
            x = 9.0e15
        return int(np.floor(x)) + 1
    return np.searchsorted(cdf, u, side="right")


@njit(cache=True)
def _grow2(a, need):
    cap = a.shape[0]
    while cap < need:
        cap *= 2
    b = np.empty((cap, a.shape[1]), a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow1(a, need):
    cap = a.shape[0]
    while cap < need:
        cap *= 2
    b = np.empty(cap, a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _angle_bin(x, d, n_ang, n_z, r):
    # pseudo-angle of (x0, x1) in [0, 4)
    ax, ay = x[0], x[1]
    s = abs(ax) + abs(ay)
    if s == 0.0:
        a = 0.0
    else:
        a = ay / s
        if ax < 0.0:
            a = 2.0 - a
        elif ay < 0.0:
            a = 4.0 + a
    ia = int(a * 0.25 * n_ang)
    if ia >= n_ang:
        ia = n_ang - 1
    if d == 2:
        return ia
    cz = x[2] / r if r > 0 else 0.0
    iz = int((cz + 1.0) * 0.5 * n_z)
    if iz >= n_z:
        iz = n_z - 1
    if iz < 0:
        iz = 0
    return iz * n_ang + ia


@njit(cache=True)
def _tally(hist, r_edges, x, d, w, n_ang, n_z):
    r = 0.0
    for c in range(d):
        r += x[c] * x[c]
    r = np.sqrt(r)
    if r < r_edges[0] or r >= r_edges[-1]:
        return
    ir = np.searchsorted(r_edges, r, side="right") - 1
    ib = _angle_bin(x, d, n_ang, n_z, r)
    hist[ir, ib, 0] += w
    hist[ir, ib, 1] += w * r
    for c in range(d):
        hist[ir, ib, 2 + c] += w * x[c]


# integer state slots shared by the step function and its driver
S_NALIVE, S_NEXT, S_NEV, S_NEX, S_JUMPS, S_PEND, S_TRUNC = range(7)


@njit(cache=True)
def _advance(rng, pos, clock, rem, dead, ist, fst, t, dt, mean_clock,
             cdf, tail_p, tail_k, tail_a, max_alive,
             ev_t, ev_x, ev_k, ex_t, ex_x, hist, use_hist, r_edges, n_ang, n_z,
             bridge, r_safe2, p, q):
    """Advance particles ist[S_NEXT] .. n_alive - 1 over the rest of the step.

    Never allocates. Returns early, with particle i's state saved in place,
    when an output buffer is full or a brood does not fit in ``pos``; the
    brood is then parked in ist[S_PEND] / fst[0] / p for the driver.
    """
    d = pos.shape[1]
    n_alive = ist[S_NALIVE]
    n_ev = ist[S_NEV]
    n_ex = ist[S_NEX]
    jumps = ist[S_JUMPS]
    i = ist[S_NEXT]
    cap = pos.shape[0]
    while i < n_alive:
        if dead[i]:
            i += 1
            continue
        r_left = rem[i]
        tloc = t + dt - r_left
        for c in range(d):
            p[c] = pos[i, c]
        alive = True
        while r_left > 0.0:
            if n_ev >= ev_t.shape[0] or n_ex >= ex_t.shape[0]:
                for c in range(d):
                    pos[i, c] = p[c]
                rem[i] = r_left
                ist[S_NALIVE] = n_alive
                ist[S_NEXT] = i
                ist[S_NEV] = n_ev
                ist[S_NEX] = n_ex
                ist[S_JUMPS] = jumps
                return
            branch = clock[i] < r_left
            tau = clock[i] if branch else r_left
            sq = np.sqrt(tau)
            rq = 0.0
            rp = 0.0
            for c in range(d):
                q[c] = p[c] + sq * rng.standard_normal()
                rq += q[c] * q[c]
                rp += p[c] * p[c]
            exited = False
            lam = 1.0
            if rq >= 1.0:
                # ray-sphere intersection of the segment p -> q
                aa = 0.0
                bb = 0.0
                for c in range(d):
                    dc = q[c] - p[c]
                    aa += dc * dc
                    bb += 2.0 * p[c] * dc
                cc = rp - 1.0
                lam = (-bb + np.sqrt(bb * bb - 4.0 * aa * cc)) / (2.0 * aa)
                lam = min(max(lam, 0.0), 1.0)
                for c in range(d):
                    q[c] = p[c] + lam * (q[c] - p[c])
                exited = True
            elif bridge and (rq > r_safe2 or rp > r_safe2):
                # Brownian bridge crossing, locally flat boundary
                a1 = 1.0 - np.sqrt(rp)
                a2 = 1.0 - np.sqrt(rq)
                e = 2.0 * a1 * a2 / tau
                if e < 40.0 and rng.random() < np.exp(-e):
                    lam = a1 / (a1 + a2)
                    for c in range(d):
                        q[c] = p[c] + lam * (q[c] - p[c])
                    exited = True
            if use_hist:
                _tally(hist, r_edges, p, d, 0.5 * lam * tau, n_ang, n_z)
                if not exited:
                    _tally(hist, r_edges, q, d, 0.5 * tau, n_ang, n_z)
            if exited:
                nq = 0.0
                for c in range(d):
                    nq += q[c] * q[c]
                nq = np.sqrt(nq)
                ex_t[n_ex] = tloc + lam * tau
                for c in range(d):
                    ex_x[n_ex, c] = q[c] / nq
                n_ex += 1
                alive = False
                break
            for c in range(d):
                p[c] = q[c]
            r_left -= tau
            tloc += tau
            if not branch:
                clock[i] -= tau
                break
            k = sample_offspring(rng, cdf, tail_p, tail_k, tail_a)
            ev_t[n_ev] = tloc
            for c in range(d):
                ev_x[n_ev, c] = p[c]
            ev_k[n_ev] = k
            n_ev += 1
            jumps += k - 1
            if k == 0:
                alive = False
                break
            clock[i] = rng.exponential(mean_clock)
            if n_alive + k - 1 > max_alive:
                ist[S_TRUNC] = 1
                break
            if n_alive + k - 1 > cap:
                for c in range(d):
                    pos[i, c] = p[c]
                rem[i] = r_left
                ist[S_PEND] = k - 1
                fst[0] = r_left
                ist[S_NALIVE] = n_alive
                ist[S_NEXT] = i
                ist[S_NEV] = n_ev
                ist[S_NEX] = n_ex
                ist[S_JUMPS] = jumps
                return
            for j in range(k - 1):
                for c in range(d):
                    pos[n_alive, c] = p[c]
                clock[n_alive] = rng.exponential(mean_clock)
                rem[n_alive] = r_left
                dead[n_alive] = False
                n_alive += 1
        if ist[S_TRUNC]:
            break
        if alive:
            for c in range(d):
                pos[i, c] = p[c]
            rem[i] = 0.0
        else:
            dead[i] = True
        i += 1
    ist[S_NALIVE] = n_alive
    ist[S_NEXT] = i
    ist[S_NEV] = n_ev
    ist[S_NEX] = n_ex
    ist[S_JUMPS] = jumps


@njit(cache=True)
def simulate(rng, x0, beta, n, dt, cdf, tail_p, tail_k, tail_a, max_events, max_alive,
             snap_steps, use_hist, r_edges, n_ang, n_z, bridge):
    """One replica until extinction (or truncation).

    x0: (N0, d) initial particle positions. Returns exits (t, x), events
    (t, x, k), snapshot positions, occupation histogram and counters.
    """
    d = x0.shape[1]
    gamma = (1.0 + beta) * n**beta
    mean_clock = 1.0 / gamma
    N0 = x0.shape[0]
    cap = max(1024, 4 * N0)
    pos = np.empty((cap, d))
    clock = np.empty(cap)
    rem = np.empty(cap)
    dead = np.zeros(cap, np.bool_)
    for i in range(N0):
        pos[i] = x0[i]
        clock[i] = rng.exponential(mean_clock)
    ex_t = np.empty(max(1024, 2 * N0))
    ex_x = np.empty((ex_t.shape[0], d))
    ev_t = np.empty(max(1024, 2 * N0))
    ev_x = np.empty((ev_t.shape[0], d))
    ev_k = np.empty(ev_t.shape[0], np.int64)
    sn_x = np.empty((max(16, N0 * len(snap_steps)), d))
    sn_c = np.zeros(len(snap_steps), np.int64)
    n_sn = 0
    n_bins = n_ang * (n_z if d == 3 else 1)
    if use_hist:
        hist = np.zeros((len(r_edges) - 1, n_bins, 2 + d))
    else:
        hist = np.zeros((0, n_bins, 2 + d))
    # bridge test skipped when exp(-2 a1 a2 / dt) < e^-40 for sure
    r_safe2 = (1.0 - np.sqrt(20.0 * dt)) ** 2 if 20.0 * dt < 1.0 else 0.0
    ist = np.zeros(7, np.int64)
    fst = np.zeros(1)
    ist[S_NALIVE] = N0
    p = np.empty(d)
    q = np.empty(d)
    max_pop = N0
    psteps = 0
    t = 0.0
    step = 0
    si = 0
    while ist[S_NALIVE] > 0:
        n_alive = ist[S_NALIVE]
        while si < len(snap_steps) and snap_steps[si] < step:
            si += 1
        if si < len(snap_steps) and snap_steps[si] == step:
            if n_sn + n_alive > sn_x.shape[0]:
                sn_x = _grow2(sn_x, n_sn + n_alive)
            for i in range(n_alive):
                for c in range(d):
                    sn_x[n_sn, c] = pos[i, c]
                n_sn += 1
            sn_c[si] = n_alive
            si += 1
        for i in range(n_alive):
            rem[i] = dt
        psteps += n_alive
        ist[S_NEXT] = 0
        while True:
            # room for a typical step; _advance stops early if not enough
            need = 2 * ist[S_NALIVE] + 1024
            if pos.shape[0] < need:
                pos = _grow2(pos, need)
                clock = _grow1(clock, need)
                rem = _grow1(rem, need)
                dead = _grow1(dead, need)
            if ev_t.shape[0] < ist[S_NEV] + ist[S_NALIVE] + 1024:
                m = ist[S_NEV] + ist[S_NALIVE] + 1024
                ev_t = _grow1(ev_t, m)
                ev_x = _grow2(ev_x, m)
                ev_k = _grow1(ev_k, m)
            if ex_t.shape[0] < ist[S_NEX] + ist[S_NALIVE] + 1024:
                m = ist[S_NEX] + ist[S_NALIVE] + 1024
                ex_t = _grow1(ex_t, m)
                ex_x = _grow2(ex_x, m)
            if ist[S_PEND] > 0:
                kk = ist[S_PEND]
                m = ist[S_NALIVE] + kk
                if pos.shape[0] < m:
                    pos = _grow2(pos, m)
                    clock = _grow1(clock, m)
                    rem = _grow1(rem, m)
                    dead = _grow1(dead, m)
                ip = ist[S_NEXT]
                na = ist[S_NALIVE]
                for j in range(kk):
                    for c in range(d):
                        pos[na + j, c] = pos[ip, c]
                    clock[na + j] = rng.exponential(mean_clock)
                    rem[na + j] = fst[0]
                    dead[na + j] = False
                ist[S_NALIVE] = na + kk
                ist[S_PEND] = 0
            _advance(rng, pos, clock, rem, dead, ist, fst, t, dt, mean_clock,
                     cdf, tail_p, tail_k, tail_a, max_alive,
                     ev_t, ev_x, ev_k, ex_t, ex_x, hist, use_hist, r_edges, n_ang, n_z,
                     bridge, r_safe2, p, q)
            if ist[S_TRUNC] or (ist[S_NEXT] >= ist[S_NALIVE] and ist[S_PEND] == 0):
                break
        if ist[S_TRUNC] or ist[S_NEV] > max_events:
            ist[S_TRUNC] = 1
            break
        # compaction
        m = 0
        for i in range(ist[S_NALIVE]):
            if not dead[i]:
                if m != i:
                    for c in range(d):
                        pos[m, c] = pos[i, c]
                    clock[m] = clock[i]
                dead[m] = False
                m += 1
        ist[S_NALIVE] = m
        if m > max_pop:
            max_pop = m
        t += dt
        step += 1

    n_alive = 0
    for i in range(ist[S_NALIVE]):
        if not dead[i]:
            n_alive += 1
    n_ex = ist[S_NEX]
    n_ev = ist[S_NEV]
    counters = np.zeros(9, np.int64)
    counters[C_N0] = N0
    counters[C_JUMPS] = ist[S_JUMPS]
    counters[C_EXITS] = n_ex
    counters[C_ALIVE] = n_alive
    counters[C_EVENTS] = n_ev
    counters[C_TRUNC] = ist[S_TRUNC]
    counters[C_STEPS] = step
    counters[C_MAXPOP] = max_pop
    counters[C_PSTEPS] = psteps
    return (ex_t[:n_ex].copy(), ex_x[:n_ex].copy(), ev_t[:n_ev].copy(), ev_x[:n_ev].copy(),
            ev_k[:n_ev].copy(), sn_c, sn_x[:n_sn].copy(), hist, counters)


@njit(cache=True)
def csbp_chain(rng, n0, beta, n, t_end, cdf, tail_p, tail_k, tail_a, max_pop):
    """Particle count at t_end of the pure-branching chain (-1 past max_pop).

    Each particle branches at rate (1 + beta) n^beta, so the population
    jumps at rate N times that.
    """
    gamma = (1.0 + beta) * n**beta
    N = n0
    t = 0.0
    while N > 0:
        t += rng.exponential(1.0 / (gamma * N))
        if t > t_end:
            break
        N += sample_offspring(rng, cdf, tail_p, tail_k, tail_a) - 1
        if N > max_pop:
            return -1
    return N


@njit(cache=True)
def offspring_draws(rng, cdf, tail_p, tail_k, tail_a, size):
    out = np.empty(size, np.int64)
    for i in range(size):
        out[i] = sample_offspring(rng, cdf, tail_p, tail_k, tail_a)
    return out
