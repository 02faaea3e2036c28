"""Brute-force references that share no code with the package."""

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def all_paths(n):
    """Every +-1 path of length ``n`` as heights S_1..S_n (read-only)."""
    idx = np.arange(2 ** n, dtype=np.int64)
    steps = 2 * ((idx[:, None] >> np.arange(n)) & 1) - 1
    out = np.cumsum(steps, axis=1)
    out.flags.writeable = False
    return out


def first_contact_enum(T, n):
    """P(tau_1 = n, eps_1 = j) for j = 0, +1 by enumerating length-n paths."""
    S = all_paths(n)
    on = S % T == 0
    first = np.where(on.any(axis=1), on.argmax(axis=1) + 1, 0)
    hit = first == n
    end = S[:, -1]
    p0 = np.sum(hit & (end == 0)) / 2 ** n
    p1 = np.sum(hit & (end == T)) / 2 ** n
    return float(p0), float(p1)


class PolymerEnum:
    """Polymer measure on all 2^N paths."""

    def __init__(self, N, T, delta):
        S = all_paths(N)
        on = S % T == 0
        self.N, self.T, self.delta = N, T, delta
        self.S = S
        self.weights_raw = np.exp(-delta * on.sum(axis=1)) / 2.0 ** N
        self.Z = float(math.fsum(self.weights_raw))
        self.w = self.weights_raw / self.Z
        t = np.arange(1, N + 1)
        self.last = np.where(on, t, 0).max(axis=1)
        rows = np.arange(S.shape[0])
        at_last = np.where(self.last > 0, S[rows, np.maximum(self.last - 1, 0)], 0)
        self.net = at_last // T
        self.end = S[:, -1]
        self.L = on.sum(axis=1)
        # interface index at each contact, with the start at interface 0
        level = np.where(on, S // T, 0)
        m = np.zeros(S.shape[0], dtype=np.int64)
        prev = np.zeros(S.shape[0], dtype=np.int64)
        for j in range(N):
            hit = on[:, j]
            m += hit & (level[:, j] != prev)
            prev = np.where(hit, level[:, j], prev)
        self.m = m

    def law(self, key):
        """Exact law of an integer-valued statistic as a dict."""
        out = {}
        for k, w in zip(key.tolist(), self.w.tolist()):
            out[k] = out.get(k, 0.0) + w
        return out


def srw_contact_prob(T, n):
    """P(S_n in T Z) from the binomial law."""
    total = 0.0
    for k in range(n + 1):
        if (2 * k - n) % T == 0:
            total += math.comb(n, k)
    return total / 2 ** n


def origin_first_return(n):
    """P(tau_1^inf = n) = C(n, n/2) / ((n - 1) 2^n)."""
    return math.comb(n, n // 2) / ((n - 1) * 2 ** n)


def laplace_numeric(T, lam, horizon=4000):
    """Truncated sum of P(tau_1 = n) e^{-lam n} via a plain height recursion."""
    v = np.zeros(2 * T + 1)
    v[T] = 1.0
    total = 0.0
    for n in range(1, horizon + 1):
        w = np.zeros_like(v)
        w[1:] += 0.5 * v[:-1]
        w[:-1] += 0.5 * v[1:]
        hit = w[0] + w[T] + w[2 * T]
        total += hit * math.exp(-lam * n)
        w[0] = w[T] = w[2 * T] = 0.0
        v = w
    return total
