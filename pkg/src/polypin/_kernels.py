"""Compiled inner loops.

Everything here works on plain numpy arrays so the public modules stay
free of numba types. Renewal-side arrays use the compressed even index
``i`` for time ``n = 2 * i``.
"""

import os

import numba as nb
import numpy as np

# the bundled TBB is too old for numba and only produces a warning
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "omp"

# ---------------------------------------------------------------------------
# first-contact dynamic programme
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def hitting_dp(T, horizon, weight):
    """Walk started on the interface at 0, absorbed on T*Z.

    Heights -T+1..T-1 are stored at offset T. ``weight`` multiplies every
    step, so ``weight = exp(-lam)`` yields the ``exp(-lam * n)`` tilted law.

    Returns (q0, q_up, q_down, alive), each of length horizon + 1 and
    indexed by time; ``alive[n]`` is the (tilted) mass not yet absorbed.
    """
    size = 2 * T + 1
    cur = np.zeros(size)
    nxt = np.zeros(size)
    q0 = np.zeros(horizon + 1)
    q_up = np.zeros(horizon + 1)
    q_down = np.zeros(horizon + 1)
    alive = np.zeros(horizon + 1)
    alive[0] = 1.0
    if horizon == 0:
        return q0, q_up, q_down, alive
    half = 0.5 * weight
    # step 1: leave the origin
    cur[T + 1] = half
    cur[T - 1] = half
    alive[1] = 2.0 * half
    for n in range(1, horizon):
        # heights at time n have the parity of n
        start = -T + 1
        if (start - n) % 2 != 0:
            start += 1
        for h in range(start, T, 2):
            idx = h + T
            m = cur[idx]
            if m == 0.0:
                continue
            part = half * m
            nxt[idx + 1] += part
            nxt[idx - 1] += part
            cur[idx] = 0.0
        # absorb
        q0[n + 1] = nxt[T]
        q_up[n + 1] = nxt[2 * T]
        q_down[n + 1] = nxt[0]
        nxt[T] = 0.0
        nxt[2 * T] = 0.0
        nxt[0] = 0.0
        s = 0.0
        c = 0.0
        for h in range(start + 1, T, 2):
            y = nxt[h + T] - c
            t = s + y
            c = (t - s) - y
            s = t
        alive[n + 1] = s
        tmp = cur
        cur = nxt
        nxt = tmp
    return q0, q_up, q_down, alive


@nb.njit(cache=True)
def killed_walk_step(v, T):
    """One step of the walk on {1..T-1} killed on leaving; ``v`` indexed by height."""
    out = np.zeros(T + 1)
    for h in range(1, T):
        m = v[h]
        if m != 0.0:
            out[h - 1] += 0.5 * m
            out[h + 1] += 0.5 * m
    out[0] = 0.0
    out[T] = 0.0
    return out


# ---------------------------------------------------------------------------
# compensated convolutions
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def conv_kahan(a, b, length):
    """Truncated convolution ``c[i] = sum_j a[j] b[i-j]`` for i < length."""
    out = np.zeros(length)
    na = a.shape[0]
    nb_ = b.shape[0]
    for i in range(length):
        s = 0.0
        c = 0.0
        jlo = max(0, i - nb_ + 1)
        jhi = min(i, na - 1)
        for j in range(jlo, jhi + 1):
            y = a[j] * b[i - j] - c
            t = s + y
            c = (t - s) - y
            s = t
        out[i] = s
    return out


@nb.njit(cache=True)
def renewal_direct(f, length, support):
    """u = 1 / (1 - F) by the renewal recursion, compensated sums.

    ``f`` is compressed with ``f[0] == 0``; only ``f[1..support]`` is used.
    """
    u = np.zeros(length)
    u[0] = 1.0
    for i in range(1, length):
        s = 0.0
        c = 0.0
        kmax = min(i, support)
        for k in range(1, kmax + 1):
            y = f[k] * u[i - k] - c
            t = s + y
            c = (t - s) - y
            s = t
        u[i] = s
    return u


@nb.njit(cache=True)
def renewal_block(f, u, acc, lo, hi):
    """Base case of the divide-and-conquer inversion on [lo, hi)."""
    for i in range(lo, hi):
        s = acc[i]
        c = 0.0
        for j in range(lo, i):
            y = f[i - j] * u[j] - c
            t = s + y
            c = (t - s) - y
            s = t
        if i == 0:
            s += 1.0
        u[i] = s


# ---------------------------------------------------------------------------
# portable random numbers: splitmix64 seeding, xoshiro256** streams
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@nb.njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def seed_stream(seed, index, state):
    """Fill ``state`` (uint64[4]) for stream ``index`` of ``seed``."""
    x = _mix64(np.uint64(seed) + _GOLDEN * (np.uint64(index) + np.uint64(1)))
    for j in range(4):
        x = x + _GOLDEN
        state[j] = _mix64(x)
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = np.uint64(1)


@nb.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def next_u64(state):
    result = _rotl(state[1] * np.uint64(5), 7) * np.uint64(9)
    t = state[1] << np.uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@nb.njit(cache=True)
def next_double(state):
    """Uniform on [0, 1) with 53 random bits."""
    return np.float64(next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# polymer skeleton sampler
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _search_desc(G, lo, hi, t):
    """Largest k in [lo, hi] with G[k] >= t (G non-increasing)."""
    a = lo
    b = hi
    while a < b:
        mid = (a + b + 1) // 2
        if G[mid] >= t:
            a = mid
        else:
            b = mid - 1
    return a


@nb.njit(cache=True)
def _search_cdf(cdf, t):
    """Smallest index with cdf[index] > t."""
    a = 0
    b = cdf.shape[0] - 1
    while a < b:
        mid = (a + b) // 2
        if cdf[mid] > t:
            b = mid
        else:
            a = mid + 1
    return a


@nb.njit(cache=True)
def draw_gap(s, G, u, umax, state):
    """Previous-gap draw from contact ``s``: P(k) = f(k) u(s-k) / u(s).

    Rejection from dyadic blocks of ``m = s - k``: block 0 is {0}, block j
    is [2^(j-1), 2^j - 1]; the envelope on a block is its maximum of u.
    ``G[k]`` is the tail sum of f from k.
    """
    nblocks = 1
    while (1 << (nblocks - 1)) <= s - 1:
        nblocks += 1
    weights = np.empty(nblocks)
    klo = np.empty(nblocks, dtype=np.int64)
    khi = np.empty(nblocks, dtype=np.int64)
    total = 0.0
    for j in range(nblocks):
        if j == 0:
            mlo = 0
            mhi = 0
        else:
            mlo = 1 << (j - 1)
            mhi = (1 << j) - 1
        if mhi > s - 1:
            mhi = s - 1
        if mlo > mhi:
            weights[j] = 0.0
            klo[j] = 1
            khi[j] = 0
            continue
        klo[j] = s - mhi
        khi[j] = s - mlo
        w = umax[j] * (G[klo[j]] - G[khi[j] + 1])
        if w < 0.0:
            w = 0.0
        weights[j] = w
        total += w
    while True:
        t = next_double(state) * total
        j = 0
        acc = weights[0]
        while acc <= t and j < nblocks - 1:
            j += 1
            acc += weights[j]
        if weights[j] == 0.0:
            continue
        top = G[klo[j]]
        bottom = G[khi[j] + 1]
        x = bottom + (1.0 - next_double(state)) * (top - bottom)
        k = _search_desc(G, klo[j], khi[j], x)
        if next_double(state) * umax[j] < u[s - k]:
            return k


@nb.njit(cache=True)
def sample_one(last_cdf, G, u, umax, switch, state, gaps, signs):
    """Draw one skeleton backwards from the last contact.

    Fills ``gaps``/``signs`` in backward order and returns (R, L) with R the
    compressed last-contact index.
    """
    R = _search_cdf(last_cdf, next_double(state))
    s = R
    L = 0
    while s > 0:
        k = draw_gap(s, G, u, umax, state)
        p = switch[k]
        x = next_double(state)
        if x < p:
            sg = 1 if x < 0.5 * p else -1
        else:
            sg = 0
        gaps[L] = k
        signs[L] = sg
        L += 1
        s -= k
    return R, L


@nb.njit(cache=True, parallel=True)
def sample_batch(seed, first, count, last_cdf, G, u, umax, switch, max_contacts):
    """Skeleton statistics for streams first..first+count-1.

    Returns (R, L, m, net, side_u, height_u); the last two are the uniforms
    reserved for the endpoint draw of each sample.
    """
    R_out = np.zeros(count, dtype=np.int64)
    L_out = np.zeros(count, dtype=np.int64)
    m_out = np.zeros(count, dtype=np.int64)
    net_out = np.zeros(count, dtype=np.int64)
    side_u = np.zeros(count)
    height_u = np.zeros(count)
    for i in nb.prange(count):
        state = np.zeros(4, dtype=np.uint64)
        seed_stream(seed, first + i, state)
        gaps = np.empty(max_contacts, dtype=np.int64)
        signs = np.empty(max_contacts, dtype=np.int64)
        R, L = sample_one(last_cdf, G, u, umax, switch, state, gaps, signs)
        m = 0
        net = 0
        for j in range(L):
            if signs[j] != 0:
                m += 1
                net += signs[j]
        R_out[i] = R
        L_out[i] = L
        m_out[i] = m
        net_out[i] = net
        side_u[i] = next_double(state)
        height_u[i] = next_double(state)
    return R_out, L_out, m_out, net_out, side_u, height_u


@nb.njit(cache=True)
def endpoint_sweep(T, lengths, order, height_u):
    """Final-excursion heights for residual lengths ``lengths`` (even, > 0).

    One forward pass of the killed walk on {1..T-1} started at 1; at time
    ``ell - 1`` the normalised vector is the law of the excursion height.
    ``order`` sorts ``lengths`` ascending. Returns heights in 1..T-1.
    """
    out = np.zeros(lengths.shape[0], dtype=np.int64)
    v = np.zeros(T + 1)
    v[1] = 1.0
    t = 0
    cdf = np.zeros(T - 1)
    pos = 0
    n = order.shape[0]
    while pos < n:
        target = lengths[order[pos]] - 1
        while t < target:
            v = killed_walk_step(v, T)
            s = 0.0
            for h in range(1, T):
                s += v[h]
            for h in range(1, T):
                v[h] /= s
            t += 1
        acc = 0.0
        for h in range(1, T):
            acc += v[h]
            cdf[h - 1] = acc
        for h in range(T - 1):
            cdf[h] /= acc
        while pos < n and lengths[order[pos]] - 1 == t:
            idx = order[pos]
            out[idx] = _search_cdf(cdf, height_u[idx]) + 1
            pos += 1
    return out


@nb.njit(cache=True)
def transfer_log_partition(T, delta, N):
    """log Z by a transfer matrix on heights mod T (contact at residue 0)."""
    v = np.zeros(T)
    w = np.zeros(T)
    v[0] = 1.0
    pen = np.exp(-delta)
    logscale = 0.0
    for _ in range(N):
        for r in range(T):
            w[r] = 0.0
        for r in range(T):
            m = v[r]
            if m != 0.0:
                w[(r + 1) % T] += 0.5 * m
                w[(r - 1) % T] += 0.5 * m
        w[0] *= pen
        s = 0.0
        for r in range(T):
            s += w[r]
        for r in range(T):
            v[r] = w[r] / s
        logscale += np.log(s)
    return logscale


@nb.njit(cache=True)
def fill_bridge(T, length, target, state):
    """Uniform path on {1..T-1} from 1 at time 1 to ``target`` at ``length``.

    ``target = 0`` leaves the end free. Row ``t`` of the table holds the
    normalised number of admissible continuations from each height.
    """
    table = np.zeros((length + 1, T + 1))
    if target == 0:
        for h in range(1, T):
            table[length, h] = 1.0
    else:
        table[length, target] = 1.0
    for t in range(length - 1, 0, -1):
        s = 0.0
        for h in range(1, T):
            x = 0.0
            if h > 1:
                x += table[t + 1, h - 1]
            if h < T - 1:
                x += table[t + 1, h + 1]
            table[t, h] = x
            s += x
        if s > 0.0:
            for h in range(1, T):
                table[t, h] /= s
    path = np.zeros(length + 1, dtype=np.int64)
    path[1] = 1
    for t in range(1, length):
        h = path[t]
        down = table[t + 1, h - 1] if h > 1 else 0.0
        up = table[t + 1, h + 1] if h < T - 1 else 0.0
        if next_double(state) * (up + down) < up:
            path[t + 1] = h + 1
        else:
            path[t + 1] = h - 1
    return path
