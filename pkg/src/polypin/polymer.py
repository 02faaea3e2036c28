"""Exact partition function and exact sampling under the polymer measure.

Splitting a path at its last contact ``r`` gives

    Z_N = e^{phi N} sum_r u(r) e^{-phi (N - r)} P(tau_1 > N - r),

with ``u`` the tilted renewal mass function. The same terms, normalised,
are the law of the last contact. Given it, the contacts before ``r`` form
a renewal bridge, drawn backwards one gap at a time, and the height after
``r`` is the end point of a walk that avoids every interface.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import ParameterError
from .free_energy import ModelParams, ScalingPoint, compare_exponents
from .io import atomic_write_text
from .renewal import RenewalModel, build_renewal
from .srw import check_even

MAX_TRAJECTORY_N = 10_000
_BRIDGE_CELLS = 60_000_000


@dataclass(frozen=True)
class PolymerInstance:
    """Everything needed to evaluate and sample the polymer of length ``N``.

    Arrays are indexed by compressed time ``i`` (time ``2 i``).
    """

    params: ModelParams
    N: int
    renewal: RenewalModel = field(repr=False)
    srw_tail: np.ndarray = field(repr=False)
    log_terms: np.ndarray = field(repr=False)
    log_Z: float
    last_cdf: np.ndarray = field(repr=False)
    tail_sums: np.ndarray = field(repr=False)
    block_max: np.ndarray = field(repr=False)
    switch: np.ndarray = field(repr=False)

    @property
    def M(self):
        return self.N // 2


def build_instance(params, N, renewal=None):
    """Precompute the last-contact law and the sampler tables."""
    N = check_even(N, "N", minimum=2)
    if renewal is None:
        renewal = build_renewal(params, N)
    if renewal.horizon < N:
        raise ParameterError(f"renewal horizon {renewal.horizon} is shorter than N={N}")
    M = N // 2
    u = np.asarray(renewal.u[:M + 1])
    A = np.asarray(renewal.survival[:M + 1])
    with np.errstate(divide="ignore"):
        log_terms = np.log(u) + np.log(A[::-1])
    lse = float(logsumexp(log_terms))
    log_Z = renewal.phi * N + lse
    p = np.exp(log_terms - lse)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tail = A * np.exp(renewal.phi * 2.0 * np.arange(M + 1))
    f = np.asarray(renewal.f[:M + 1])
    G = np.zeros(M + 2)
    G[:M + 1] = np.cumsum(f[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        switch = np.where(f > 0, 2.0 * np.asarray(renewal.f1[:M + 1]) / f, 0.0)
    return PolymerInstance(params, N, renewal, _ro(tail), _ro(log_terms), log_Z,
                           _ro(cdf), _ro(G), _ro(_block_max(u)), _ro(np.minimum(switch, 1.0)))


def _ro(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _block_max(u):
    """Max of ``u`` on the dyadic blocks {0}, [1,1], [2,3], [4,7], ..."""
    M = u.shape[0] - 1
    nb = 1
    while (1 << (nb - 1)) <= M:
        nb += 1
    out = np.zeros(nb + 1)
    out[0] = u[0]
    for j in range(1, nb + 1):
        lo, hi = 1 << (j - 1), min((1 << j) - 1, M)
        if lo <= hi:
            out[j] = u[lo:hi + 1].max()
    return out


@dataclass(frozen=True)
class PartitionResult:
    Z: float
    logZ: float


def partition_function(instance):
    """``Z_N`` and ``log Z_N`` from the last-contact decomposition."""
    return PartitionResult(math.exp(instance.log_Z), instance.log_Z)


def transfer_log_partition(params, N):
    """``log Z_N`` by a transfer matrix on heights modulo ``T`` (independent check)."""
    N = check_even(N, "N", minimum=0)
    return float(_kernels.transfer_log_partition(params.T, params.delta, N))


@dataclass(frozen=True)
class LastContactLaw:
    times: np.ndarray
    prob: np.ndarray


def last_contact_law(instance):
    """Exact law of the last contact time on even ``r`` in ``[0, N]``."""
    lse = instance.log_Z - instance.renewal.phi * instance.N
    p = np.exp(instance.log_terms - lse)
    return LastContactLaw(2 * np.arange(instance.M + 1), p)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


class SampleStream:
    """Portable xoshiro256** stream ``index`` of ``seed`` (splitmix64 seeding)."""

    def __init__(self, seed, index=0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.index = int(index)
        self.state = np.zeros(4, dtype=np.uint64)
        _kernels.seed_stream(np.uint64(self.seed), np.uint64(self.index), self.state)

    def random(self):
        return float(_kernels.next_double(self.state))


@dataclass(frozen=True)
class ContactSkeleton:
    """Contact times (excluding 0) with their interface switches."""

    contacts: tuple
    signs: tuple
    last_contact: int
    L: int
    m: int

    @property
    def net(self):
        return sum(self.signs)


@dataclass(frozen=True)
class TrajectoryStats:
    S_N: int
    tau_last: int
    L: int
    m: int
    visited_other_interface: bool


def sample_skeleton(instance, rng):
    """Draw the contact skeleton: last contact first, then gaps backwards."""
    gaps = np.empty(instance.M + 1, dtype=np.int64)
    signs = np.empty(instance.M + 1, dtype=np.int64)
    R, L = _kernels.sample_one(instance.last_cdf, instance.tail_sums, instance.renewal.u,
                               instance.block_max, instance.switch, rng.state, gaps, signs)
    gaps, signs = gaps[:L][::-1], signs[:L][::-1]
    contacts = tuple(int(x) for x in 2 * np.cumsum(gaps))
    sg = tuple(int(x) for x in signs)
    m = sum(1 for x in sg if x != 0)
    return ContactSkeleton(contacts, sg, 2 * int(R), int(L), m)


def sample_endpoint(instance, skeleton, rng):
    """Final height given the skeleton; consumes two uniforms like the batch sampler."""
    side_u = rng.random()
    height_u = rng.random()
    ell = instance.N - skeleton.last_contact
    offset = 0
    if ell > 0:
        h = _kernels.endpoint_sweep(instance.params.T, np.array([ell], dtype=np.int64),
                                    np.zeros(1, dtype=np.int64), np.array([height_u]))[0]
        offset = int(h) if side_u < 0.5 else -int(h)
    S = instance.params.T * skeleton.net + offset
    return TrajectoryStats(S, skeleton.last_contact, skeleton.L, skeleton.m, skeleton.m > 0)


@dataclass(frozen=True)
class SampleBatch:
    seed: int
    first: int
    S_N: np.ndarray
    tau_last: np.ndarray
    L: np.ndarray
    m: np.ndarray

    @property
    def visited_other(self):
        return self.m > 0

    def __len__(self):
        return int(self.S_N.shape[0])

    def stats(self, i):
        return TrajectoryStats(int(self.S_N[i]), int(self.tau_last[i]), int(self.L[i]),
                               int(self.m[i]), bool(self.m[i] > 0))


def resolve_threads(threads=None):
    """Worker count: explicit value, else POLYPIN_THREADS, else 1."""
    if threads is None:
        threads = int(os.environ.get("POLYPIN_THREADS", "1"))
    threads = int(threads)
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    return min(threads, numba.config.NUMBA_NUM_THREADS)


def sample_polymer(instance, n_samples, seed=0, threads=None, first=0):
    """``n_samples`` independent trajectories; sample ``i`` uses stream ``first + i``.

    Output does not depend on ``threads``.
    """
    if n_samples < 0:
        raise ParameterError("n_samples must be >= 0")
    numba.set_num_threads(resolve_threads(threads))
    R, L, m, net, side_u, height_u = _kernels.sample_batch(
        np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), np.uint64(first), n_samples,
        instance.last_cdf, instance.tail_sums, instance.renewal.u, instance.block_max,
        instance.switch, instance.M + 1)
    tau = 2 * R
    ell = instance.N - tau
    offset = np.zeros(n_samples, dtype=np.int64)
    live = np.nonzero(ell > 0)[0]
    if live.size:
        lengths = ell[live].astype(np.int64)
        order = np.argsort(lengths, kind="stable").astype(np.int64)
        h = _kernels.endpoint_sweep(instance.params.T, lengths, order, height_u[live])
        offset[live] = np.where(side_u[live] < 0.5, h, -h)
    S = instance.params.T * net + offset
    return SampleBatch(int(seed), int(first), S, tau, L, m)


def write_samples_csv(batch, path):
    """CSV with header ``sample_id,S_N,tau_last,L,m,visited_other``."""
    lines = ["sample_id,S_N,tau_last,L,m,visited_other"]
    for i in range(len(batch)):
        lines.append(f"{batch.first + i},{int(batch.S_N[i])},{int(batch.tau_last[i])},"
                     f"{int(batch.L[i])},{int(batch.m[i])},{int(batch.m[i] > 0)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# full paths
# ---------------------------------------------------------------------------


def sample_trajectory(instance, rng):
    """Full height path ``S_0..S_N`` for ``N <= 10^4``.

    Draws skeleton and end point as above, then fills each excursion with
    a uniform path of the right length and end, which is its exact
    conditional law.
    """
    if instance.N > MAX_TRAJECTORY_N:
        raise ParameterError(f"trajectory export needs N <= {MAX_TRAJECTORY_N}")
    T = instance.params.T
    sk = sample_skeleton(instance, rng)
    stats = sample_endpoint(instance, sk, rng)
    path = np.zeros(instance.N + 1, dtype=np.int64)
    start, base = 0, 0
    for t, sg in zip(sk.contacts, sk.signs):
        k = t - start
        if sg == 0:
            side = 1 if rng.random() < 0.5 else -1
            inner = _bridge(T, k - 1, 1, rng)
        else:
            side = sg
            inner = _bridge(T, k - 1, T - 1, rng)
        path[start + 1:t] = base + side * inner[1:k]
        base += T * sg
        path[t] = base
        start = t
    ell = instance.N - start
    if ell > 0:
        offset = stats.S_N - base
        side = 1 if offset > 0 else -1
        inner = _bridge(T, ell, abs(offset), rng)
        path[start + 1:] = base + side * inner[1:]
    return path, stats


def _bridge(T, length, target, rng):
    if length * (T + 1) > _BRIDGE_CELLS:
        raise ParameterError("excursion too long for path export at this T")
    return _kernels.fill_bridge(T, length, target, rng.state)


def write_trajectory_csv(path_values, path):
    lines = ["t,S"] + [f"{t},{int(s)}" for t, s in enumerate(path_values)]
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# partition asymptotics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticsRow:
    N: int
    T: int
    delta: float
    log_Z: float
    phi: float
    ratio: float


@dataclass(frozen=True)
class AsymptoticsReport:
    point: ScalingPoint
    form: str
    rows: tuple
    spread: float

    @property
    def within_factor_4(self):
        return self.spread <= 4.0


def partition_asymptotics_report(point, N_grid=(10_000, 100_000, 1_000_000)):
    """``Z e^{-N phi}`` (times ``max(1, delta min(sqrt N, T))`` when a > b) along ``N_grid``."""
    scaled = compare_exponents(point.a, point.b) > 0
    rows = []
    for N in N_grid:
        p = point.with_N(N)
        params = p.params()
        inst = build_instance(params, p.N)
        factor = max(1.0, params.delta * min(math.sqrt(p.N), params.T)) if scaled else 1.0
        ratio = math.exp(inst.log_Z - inst.renewal.phi * p.N) * factor
        rows.append(AsymptoticsRow(p.N, params.T, params.delta, inst.log_Z, inst.renewal.phi, ratio))
    vals = [r.ratio for r in rows]
    return AsymptoticsReport(point, "scaled" if scaled else "plain", tuple(rows), max(vals) / min(vals))


def no_switch_probability(instance):
    """Exact ``P(m = 0)``: the same decomposition with only same-interface gaps."""
    from .renewal import renewal_fft

    r = instance.renewal
    M = instance.M
    f0 = np.array(r.f[:M + 1]) - 2.0 * np.array(r.f1[:M + 1])
    f0[0] = 0.0
    f0 = np.maximum(f0, 0.0)
    u0 = renewal_fft(f0, M + 1)
    A = np.asarray(r.survival[:M + 1])
    with np.errstate(divide="ignore"):
        log0 = np.log(np.maximum(u0, 0.0)) + np.log(A[::-1])
    lse = instance.log_Z - r.phi * instance.N
    return min(1.0, math.exp(float(logsumexp(log0)) - lse))
