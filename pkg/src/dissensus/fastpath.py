"""Compiled execution path for counters-only runs.

Event-heavy regimes spend almost all wall time in event resolution, so
runs that keep neither per-tick records nor per-epoch snapshots are
executed by a numba kernel over bitmask adjacency. The kernel consumes
the same per-purpose splitmix64 streams as the interpreted loop (same
seed derivation, same draw order over id-sorted neighbor lists), so both
paths produce bit-identical trajectories for the same RunConfig; tests
cross-validate that equality directly.

Per-tick and per-epoch invariants are still checked inline on every step
(conservation, squared-norm growth, connectivity, agent-count bounds,
agent-count step per event, and under the partition + star rules the
per-event edge deltas and density non-increase); the counters land in
Trace.stats / Trace.epoch_stats.
"""
from __future__ import annotations

import numpy as np

from .errors import SchedulingError
from .events import split_state
from .graph import Topology, classify
from .protocol import SystemState  # noqa: F401  (kept for API symmetry)

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    AVAILABLE = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco if not (args and callable(args[0])) else args[0]


NCAP = 62  # slot bitmasks live in int64 bits 0..61

# splitmix64 constants; must match streams.py exactly
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_PUR = np.uint64(0xD1B54A32D192ED03)
_EPO = np.uint64(0x8BB84B93962EACC9)
_PICK = 1  # streams.PICK

_BIG = 1 << 60

# st[] scalar slots shared across kernel helpers
_EPOCH, _FIRST_DUP, _ALIVE, _NEXT_ID, _N = 0, 1, 2, 3, 4

# out[] layout
_O_TERM = 0
_O_GOSSIP = 1
_O_TICK = 2
_O_EQUAL = 6
_O_TRANSFER = 7
_O_MIN_GAIN = 8
_O_CONS_VIOL = 9
_O_GAIN_VIOL = 10
_O_EPOCHS_CHECKED = 11
_O_SUM_VIOL = 12
_O_CONN_VIOL = 13
_O_BOUNDS_VIOL = 14
_O_STEP_VIOL = 15
_O_EDGE_DELTA_VIOL = 16
_O_DENSITY_VIOL = 17
_O_CONSENSUS_VIOL = 18
_O_CONSENSUS_VALUE = 5


@njit(cache=True)
def _mix64(z):
    z = z + _GOLD
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _seed_stream(master, purpose, epoch):
    s = _mix64(master)
    s = _mix64(s ^ (np.uint64(purpose) * _PUR))
    return _mix64(s ^ (np.uint64(epoch) * _EPO))


@njit(cache=True)
def _sm_next(state):
    state = state + _GOLD
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _ctz(v):
    c = 0
    while (v >> c) & 1 == 0:
        c += 1
    return c


@njit(cache=True)
def _popcount(v):
    c = 0
    while v != 0:
        v &= v - 1
        c += 1
    return c


@njit(cache=True)
def _connected(adj, alive_mask):
    if alive_mask == 0:
        return True
    reach = alive_mask & (-alive_mask)
    frontier = reach
    while frontier != 0:
        nxt = 0
        f = frontier
        while f != 0:
            t = _ctz(f)
            f &= f - 1
            nxt |= adj[t]
        nxt &= ~reach
        reach |= nxt
        frontier = nxt
    return reach == alive_mask


@njit(cache=True)
def _edge_count(adj, alive_mask):
    tot = 0
    a = alive_mask
    while a != 0:
        t = _ctz(a)
        a &= a - 1
        tot += _popcount(adj[t])
    return tot // 2


@njit(cache=True)
def _epoch_checks(x, adj, st, out, b, chi):
    out[_O_EPOCHS_CHECKED] += 1
    tot = 0
    a = st[_ALIVE]
    while a != 0:
        t = _ctz(a)
        a &= a - 1
        tot += x[t]
    if tot != chi:
        out[_O_SUM_VIOL] += 1
    if not _connected(adj, st[_ALIVE]):
        out[_O_CONN_VIOL] += 1
    lower = (chi + b - 1) // b
    upper = chi if st[_FIRST_DUP] < 0 else chi - b + 2
    if st[_N] < lower or st[_N] > upper:
        out[_O_BOUNDS_VIOL] += 1


@njit(cache=True)
def _density_checks(adj, st, out, last_m, last_c, m_before, n_before, is_dup):
    m_after = _edge_count(adj, st[_ALIVE])
    if is_dup:
        if m_after != m_before + 1:
            out[_O_EDGE_DELTA_VIOL] += 1
    else:
        if m_after > m_before - 1:
            out[_O_EDGE_DELTA_VIOL] += 1
    c_before = m_before - n_before + 1
    c_after = m_after - st[_N] + 1
    if c_after > c_before:
        out[_O_EDGE_DELTA_VIOL] += 1
    if st[_FIRST_DUP] >= 0:
        n = st[_N]
        if last_m[n] >= 0 and (m_after > last_m[n] or c_after > last_c[n]):
            out[_O_DENSITY_VIOL] += 1
        last_m[n] = m_after
        last_c[n] = c_after


@njit(cache=True)
def _resolve(x, ids, adj, st, out, last_m, last_c, arr,
             b, chi, seed, alpha, clique, full_rule, density_mode):
    """Deaths in id order, then duplications in id order, one epoch each."""
    while True:
        s = -1
        best = _BIG
        a = st[_ALIVE]
        while a != 0:
            t = _ctz(a)
            a &= a - 1
            if x[t] == 0 and ids[t] < best:
                best = ids[t]
                s = t
        if s < 0:
            break
        nb = adj[s]
        if nb == 0:
            return -3
        n_before = st[_N]
        m_before = _edge_count(adj, st[_ALIVE]) if density_mode else 0
        if clique:
            a = nb
            while a != 0:
                t = _ctz(a)
                a &= a - 1
                adj[t] = (adj[t] | (nb & ~(1 << t))) & ~(1 << s)
        else:
            jst = -1
            bx = -1
            bid = _BIG
            a = nb
            while a != 0:
                t = _ctz(a)
                a &= a - 1
                if x[t] > bx or (x[t] == bx and ids[t] < bid):
                    bx = x[t]
                    bid = ids[t]
                    jst = t
            a = nb
            while a != 0:
                t = _ctz(a)
                a &= a - 1
                adj[t] &= ~(1 << s)
                if t != jst:
                    adj[t] |= 1 << jst
                    adj[jst] |= 1 << t
        adj[s] = 0
        st[_ALIVE] &= ~(1 << s)
        st[_N] -= 1
        st[_EPOCH] += 1
        if st[_N] != n_before - 1:
            out[_O_STEP_VIOL] += 1
        _epoch_checks(x, adj, st, out, b, chi)
        if density_mode:
            _density_checks(adj, st, out, last_m, last_c, m_before, n_before, False)

    while True:
        s = -1
        best = _BIG
        a = st[_ALIVE]
        while a != 0:
            t = _ctz(a)
            a &= a - 1
            if x[t] == b and ids[t] < best:
                best = ids[t]
                s = t
        if s < 0:
            break
        nb = adj[s]
        deg = _popcount(nb)
        n_before = st[_N]
        m_before = _edge_count(adj, st[_ALIVE]) if density_mode else 0
        id1 = st[_NEXT_ID]
        id2 = id1 + 1
        st[_NEXT_ID] += 2
        s2 = _ctz(~st[_ALIVE])  # lowest free slot hosts the second child
        if full_rule:
            a = nb
            while a != 0:
                t = _ctz(a)
                a &= a - 1
                adj[t] |= 1 << s2  # keeps its bit for s, now the first child
            adj[s] = nb | (1 << s2)
            adj[s2] = nb | (1 << s)
        else:
            # id-sorted neighbor list, then a partial Fisher-Yates draw that
            # replicates SplitMix.sample(sorted(neighbors), deg // 2)
            cnt = 0
            a = nb
            while a != 0:
                t = _ctz(a)
                a &= a - 1
                arr[cnt] = t
                cnt += 1
            for i in range(1, cnt):
                v = arr[i]
                key = ids[v]
                j = i - 1
                while j >= 0 and ids[arr[j]] > key:
                    arr[j + 1] = arr[j]
                    j -= 1
                arr[j + 1] = v
            k = deg // 2
            state = _seed_stream(seed, _PICK, st[_EPOCH] + 1)
            for i in range(k):
                state, z = _sm_next(state)
                j = i + np.int64(z % np.uint64(deg - i))
                tmp = arr[i]
                arr[i] = arr[j]
                arr[j] = tmp
            picked = 0
            for i in range(k):
                picked |= 1 << arr[i]
            rest = nb & ~picked
            a = rest
            while a != 0:
                t = _ctz(a)
                a &= a - 1
                adj[t] = (adj[t] & ~(1 << s)) | (1 << s2)
            adj[s] = picked | (1 << s2)
            adj[s2] = rest | (1 << s)
        ids[s] = id1
        ids[s2] = id2
        x[s] = alpha
        x[s2] = b - alpha
        st[_ALIVE] |= 1 << s2
        st[_N] += 1
        st[_EPOCH] += 1
        if st[_FIRST_DUP] < 0:
            st[_FIRST_DUP] = st[_EPOCH]
        if st[_N] != n_before + 1:
            out[_O_STEP_VIOL] += 1
        _epoch_checks(x, adj, st, out, b, chi)
        if density_mode:
            _density_checks(adj, st, out, last_m, last_c, m_before, n_before, True)
    return 0


@njit(cache=True)
def _settle(x, st, out, b, chi, alpha):
    """Termination test at a critical time: 99 means keep running."""
    n = st[_N]
    if n == 1:
        return 3
    v = -1
    equal = True
    a = st[_ALIVE]
    while a != 0:
        t = _ctz(a)
        a &= a - 1
        if v < 0:
            v = x[t]
        elif x[t] != v:
            equal = False
            break
    if not equal:
        return 99
    if chi % n != 0 or v * n != chi or v >= b:
        out[_O_CONSENSUS_VIOL] += 1
    if st[_FIRST_DUP] >= 0 and v < alpha:
        out[_O_CONSENSUS_VIOL] += 1
    out[_O_CONSENSUS_VALUE] = v
    return 0


@njit(cache=True)
def _rebuild(adj, ids, alive_mask, eu, ev, keys):
    """Canonical round-robin queue: edges sorted by (min id, max id)."""
    m = 0
    am = alive_mask
    while am != 0:
        su = _ctz(am)
        am &= am - 1
        hi = adj[su] >> (su + 1) << (su + 1)  # partners with a larger slot
        while hi != 0:
            sv = _ctz(hi)
            hi &= hi - 1
            a = ids[su]
            c = ids[sv]
            if a < c:
                keys[m] = (a << 31) | c
            else:
                keys[m] = (c << 31) | a
            eu[m] = su
            ev[m] = sv
            m += 1
    return m


@njit(cache=True)
def _kernel(x, ids, adj, st, out, last_m, last_c, arr, eu, ev, keys,
            b, chi, seed, alpha, delta_max, clique, full_rule, density_mode,
            max_ticks, max_epochs):
    tick = 0
    gossip_ticks = 0
    ticks_since_event = 0
    term = 99

    has_thresh = False
    a = st[_ALIVE]
    while a != 0:
        t = _ctz(a)
        a &= a - 1
        if x[t] == 0 or x[t] == b:
            has_thresh = True
            break
    if has_thresh:
        rc = _resolve(x, ids, adj, st, out, last_m, last_c, arr,
                      b, chi, seed, alpha, clique, full_rule, density_mode)
        if rc < 0:
            term = rc
        tick += 1
    else:
        _epoch_checks(x, adj, st, out, b, chi)
    if term == 99:
        term = _settle(x, st, out, b, chi, alpha)

    m = _rebuild(adj, ids, st[_ALIVE], eu, ev, keys)
    order = np.argsort(keys[:m])
    ptr = 0
    bound = m * ((b * chi + 3) // 4 + 2)

    while term == 99:
        if gossip_ticks >= max_ticks:
            term = 1
            break
        if max_epochs >= 0 and st[_EPOCH] >= max_epochs:
            term = 2
            break
        if m == 0:
            term = -2
            break
        e = order[ptr]
        ptr += 1
        if ptr == m:
            ptr = 0
        si = eu[e]
        sj = ev[e]
        xi = x[si]
        xj = x[sj]
        tick += 1
        gossip_ticks += 1
        ticks_since_event += 1
        if xi == xj:
            out[_O_EQUAL] += 1
            if ticks_since_event > bound:
                term = -1
                break
            continue
        if xi > xj:
            hi_ = xi
            lo_ = xj
        else:
            hi_ = xj
            lo_ = xi
        if delta_max:
            head = b - hi_
            d = lo_ if lo_ < head else head
        else:
            d = 1
        if xi > xj:
            nxi = xi + d
            nxj = xj - d
        else:
            nxi = xi - d
            nxj = xj + d
        if nxi + nxj != xi + xj:
            out[_O_CONS_VIOL] += 1
        gain = 2 * d * d + 2 * d * (hi_ - lo_)
        if gain < 4:
            out[_O_GAIN_VIOL] += 1
        if out[_O_MIN_GAIN] < 0 or gain < out[_O_MIN_GAIN]:
            out[_O_MIN_GAIN] = gain
        x[si] = nxi
        x[sj] = nxj
        out[_O_TRANSFER] += 1
        if nxi == 0 or nxj == 0 or nxi == b or nxj == b:
            tick += 1  # the event batch consumes one tick
            rc = _resolve(x, ids, adj, st, out, last_m, last_c, arr,
                          b, chi, seed, alpha, clique, full_rule, density_mode)
            if rc < 0:
                term = rc
                break
            term = _settle(x, st, out, b, chi, alpha)
            ticks_since_event = 0
            m = _rebuild(adj, ids, st[_ALIVE], eu, ev, keys)
            order = np.argsort(keys[:m])
            ptr = 0
            bound = m * ((b * chi + 3) // 4 + 2)
        elif ticks_since_event > bound:
            term = -1
            break

    out[_O_TERM] = term
    out[_O_GOSSIP] = gossip_ticks
    out[_O_TICK] = tick
    return term


def supports(cfg) -> bool:
    """Whether the kernel can execute this configuration."""
    if not AVAILABLE:
        return False
    if cfg.scheduler != "round_robin" or cfg.delta not in ("unit", "max"):
        return False
    if cfg.detect_periodicity:
        return False
    if cfg.death_rule == "star" and cfg.jstar != "max_state":
        return False
    if max(len(cfg.states), cfg.chi) + 2 > NCAP:
        return False
    # ids must stay well below 2**31 for the edge sort keys
    if max(cfg.states) + 4 * cfg.max_ticks + 2 * len(cfg.states) >= 1 << 31:
        return False
    return True


def run(cfg):
    """Execute one counters-only run on the kernel and wrap it in a Trace."""
    from .engine import EpochSnapshot, EpochStats, Termination, TickStats, Trace

    cfg.validate()
    b = cfg.b
    chi = cfg.chi
    alpha, _ = split_state(b, cfg.split)
    node_ids = sorted(cfg.states)
    n0 = len(node_ids)
    slot_of = {i: s for s, i in enumerate(node_ids)}

    x = np.zeros(NCAP, np.int64)
    ids = np.full(NCAP, -1, np.int64)
    adj = np.zeros(NCAP, np.int64)
    for i, s in slot_of.items():
        x[s] = cfg.states[i]
        ids[s] = i
    for u, v in cfg.edges:
        su, sv = slot_of[u], slot_of[v]
        adj[su] |= 1 << sv
        adj[sv] |= 1 << su

    st = np.zeros(5, np.int64)
    st[_EPOCH] = 0
    st[_FIRST_DUP] = -1
    st[_ALIVE] = (1 << n0) - 1
    st[_NEXT_ID] = max(node_ids) + 1
    st[_N] = n0
    out = np.zeros(24, np.int64)
    out[_O_CONSENSUS_VALUE] = -1
    out[_O_MIN_GAIN] = -1
    last_m = np.full(NCAP + 1, -1, np.int64)
    last_c = np.full(NCAP + 1, -1, np.int64)
    arr = np.zeros(NCAP, np.int64)
    cap = NCAP * (NCAP - 1) // 2
    eu = np.zeros(cap, np.int64)
    ev = np.zeros(cap, np.int64)
    keys = np.zeros(cap, np.int64)

    density_mode = cfg.dup_rule == "partition" and cfg.death_rule == "star"
    term = _kernel(
        x, ids, adj, st, out, last_m, last_c, arr, eu, ev, keys,
        b, chi, np.uint64(cfg.seed & ((1 << 64) - 1)), alpha,
        cfg.delta == "max", cfg.death_rule == "clique", cfg.dup_rule == "full",
        density_mode, cfg.max_ticks, -1 if cfg.max_epochs is None else cfg.max_epochs,
    )

    epoch = int(st[_EPOCH])
    if term == -1:
        raise AssertionError("no critical event within the fair-rotation bound")
    if term == -2:
        raise SchedulingError("no edges to schedule")
    if term == -3:
        raise AssertionError(f"dead agent with no neighbors at epoch {epoch}")
    if out[_O_SUM_VIOL]:
        raise AssertionError(f"state total drifted from chi={chi}")
    if out[_O_CONN_VIOL]:
        raise AssertionError("graph disconnected after an event")
    if out[_O_BOUNDS_VIOL]:
        raise AssertionError("agent count left its interval bounds")
    if out[_O_CONSENSUS_VIOL]:
        raise AssertionError("consensus conditions violated")

    alive = int(st[_ALIVE])
    final_states = {}
    final_edges = []
    a = alive
    while a:
        t = (a & -a).bit_length() - 1
        a &= a - 1
        final_states[int(ids[t])] = int(x[t])
        nb = int(adj[t]) >> (t + 1) << (t + 1)
        while nb:
            u = (nb & -nb).bit_length() - 1
            nb &= nb - 1
            if (alive >> u) & 1:
                iu, iv = int(ids[t]), int(ids[u])
                final_edges.append((iu, iv) if iu < iv else (iv, iu))
    final_edges.sort()

    g0 = Topology(cfg.states, list(cfg.edges))
    snap0 = EpochSnapshot(
        epoch=0, tick=0, n=n0, edge_count=g0.edge_count(), nodes=g0.nodes(),
        edges=g0.edges(), states=dict(cfg.states), shape=classify(g0),
    )
    snapshots = [snap0]
    if epoch > 0:
        g_end = Topology(final_states, final_edges)
        snapshots.append(
            EpochSnapshot(
                epoch=epoch, tick=int(out[_O_TICK]), n=len(final_states),
                edge_count=len(final_edges), nodes=sorted(final_states),
                edges=final_edges, states=dict(final_states), shape=classify(g_end),
            )
        )

    first_dup = int(st[_FIRST_DUP])
    stats = TickStats(
        gossip_ticks=int(out[_O_GOSSIP]),
        equal_steps=int(out[_O_EQUAL]),
        transfer_steps=int(out[_O_TRANSFER]),
        conservation_violations=int(out[_O_CONS_VIOL]),
        norm_gain_violations=int(out[_O_GAIN_VIOL]),
        min_norm_gain=None if out[_O_MIN_GAIN] < 0 else int(out[_O_MIN_GAIN]),
    )
    epoch_stats = EpochStats(
        epochs_checked=int(out[_O_EPOCHS_CHECKED]),
        sum_violations=int(out[_O_SUM_VIOL]),
        connectivity_violations=int(out[_O_CONN_VIOL]),
        bounds_violations=int(out[_O_BOUNDS_VIOL]),
        count_step_violations=int(out[_O_STEP_VIOL]),
        edge_delta_violations=int(out[_O_EDGE_DELTA_VIOL]),
        density_violations=int(out[_O_DENSITY_VIOL]),
        consensus_violations=int(out[_O_CONSENSUS_VIOL]),
        density_checked=density_mode,
    )
    return Trace(
        config=cfg,
        chi=chi,
        records=[],
        snapshots=snapshots,
        termination={0: Termination.CONSENSUS, 1: Termination.MAX_TICKS,
                     2: Termination.MAX_EPOCHS, 3: Termination.SINGLE_AGENT}[term],
        final_states=final_states,
        final_edges=final_edges,
        consensus_value=None if out[_O_CONSENSUS_VALUE] < 0 else int(out[_O_CONSENSUS_VALUE]),
        first_dup_epoch=None if first_dup < 0 else first_dup,
        period=None,
        gossip_ticks=int(out[_O_GOSSIP]),
        final_tick=int(out[_O_TICK]),
        epochs=epoch,
        stats=stats,
        epoch_stats=epoch_stats,
    )
