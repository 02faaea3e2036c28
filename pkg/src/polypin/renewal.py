"""Tilted renewal law of the contact times and its mass function.

Under the renewal measure the gaps between contacts are i.i.d. with

    P(tau_1 = n, eps_1 = j) = e^{-delta} q_T^j(n) e^{-phi n},

which sums to one because ``phi`` solves ``Q_T(phi) = e^delta``. Arrays
are stored on even times only: entry ``i`` is time ``n = 2 i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import _kernels
from .errors import HorizonError, ParameterError
from .free_energy import ModelParams, free_energy, renewal_moments
from .srw import check_even, tilted_first_contact

DIRECT_OPS_LIMIT = 1e9
FFT_BASE_BLOCK = 256
SUPPORT_TAIL = 1e-15
CLAMP = -1e-13


@dataclass(frozen=True)
class RenewalModel:
    """Tilted gap law and renewal mass function on even times 0..horizon.

    ``f[i] = P(tau_1 = 2i)``, ``f1[i] = P(tau_1 = 2i, eps_1 = +1)``,
    ``u[i] = P(2i in tau)`` and ``survival[i] = e^{-phi 2i} P(tau_1^T > 2i)``
    (the last one under the free walk).
    """

    params: ModelParams
    phi: float
    horizon: int
    f: np.ndarray = field(repr=False)
    f1: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    survival: np.ndarray = field(repr=False)
    normalization_defect: float
    tail_bound: float
    support: int

    @property
    def times(self):
        return 2 * np.arange(self.f.shape[0])

    def f_at(self, n):
        return float(self.f[n // 2]) if n % 2 == 0 else 0.0

    def u_at(self, n):
        return float(self.u[n // 2]) if n % 2 == 0 else 0.0


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def tail_ratio(params, phi):
    """Per-two-steps geometric decay of the gap law, ``exp(-2 (g + phi))``."""
    if params.T == 2:
        return 0.0
    g = -math.log(math.cos(math.pi / params.T))
    return math.exp(-2.0 * (g + phi))


def horizon_for_tail(params, tol=1e-9):
    """Smallest even horizon whose geometric tail bound is below ``tol``."""
    fe = free_energy(params)
    if params.T == 2:
        return 2
    rate = fe.g + fe.phi
    n = max(2, 2 * int(math.log(1.0 / tol) / rate / 2))
    while True:
        model = build_renewal(params, n, with_mass=False)
        if model.tail_bound <= tol:
            return n
        n = 2 * int(0.75 * n) + 2


def build_renewal(params, horizon, tail_tol=None, with_mass=True):
    """Tilted renewal law up to ``horizon``.

    With ``tail_tol`` set, raises HorizonError (carrying the achievable
    defect) when the horizon cannot certify normalisation to that level.
    """
    horizon = check_even(horizon, "horizon", minimum=2)
    fe = free_energy(params)
    q0, q1, alive = tilted_first_contact(params.T, horizon, fe.phi)
    w = math.exp(-params.delta)
    f = w * (q0[0::2] + 2.0 * q1[0::2])
    f1 = w * q1[0::2]
    rho = tail_ratio(params, fe.phi)
    tail = f[-1] * rho / (1.0 - rho) if rho > 0 else 0.0
    defect = abs(math.fsum(f) + tail - 1.0)
    if tail_tol is not None and max(defect, tail) > tail_tol:
        raise HorizonError(f"horizon {horizon} reaches defect {max(defect, tail):.3e}, "
                           f"above {tail_tol:.1e}", achievable=max(defect, tail))
    support = effective_support(f, rho)
    survival = alive[0::2]
    model = RenewalModel(params, fe.phi, horizon, _freeze(f), _freeze(f1),
                         _freeze(np.zeros(0)), _freeze(survival), defect, tail, support)
    if not with_mass:
        return model
    u = mass_function(model)
    object.__setattr__(model, "u", _freeze(u))
    return model


def effective_support(f, rho):
    """First index past which the geometric tail is below 1e-15 of the mass so far."""
    if rho <= 0.0:
        nz = np.nonzero(f)[0]
        return int(nz[-1]) if nz.size else 1
    cum = np.cumsum(f)
    tail = f * rho / (1.0 - rho)
    ok = np.nonzero((tail < SUPPORT_TAIL * cum) & (np.arange(f.shape[0]) > 0))[0]
    return int(ok[0]) if ok.size else f.shape[0] - 1


def mass_function(model, method="auto"):
    """Renewal mass function ``u = 1 / (1 - F)`` on even times.

    ``method`` is ``"direct"`` (O(H * support) recursion), ``"fft"``
    (divide and conquer with FFT cross terms) or ``"auto"``, which picks
    the FFT path above 1e9 operations.
    """
    f = np.array(model.f)
    f[0] = 0.0
    length = f.shape[0]
    support = max(1, min(model.support, length - 1))
    if method == "auto":
        method = "direct" if float(length) * support <= DIRECT_OPS_LIMIT else "fft"
    if method == "direct":
        u = _kernels.renewal_direct(f, length, support)
    elif method == "fft":
        f[support + 1:] = 0.0
        u = renewal_fft(f, length)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return _clamp(u)


def _clamp(u):
    low = u.min()
    if low < CLAMP:
        raise ArithmeticError(f"renewal mass function went negative ({low:.3e})")
    return np.maximum(u, 0.0)


def renewal_fft(f, length, base=FFT_BASE_BLOCK):
    """Online inversion of ``1 - F`` by divide and conquer.

    The left half of every interval is finished first and its contribution
    to the right half is added in one FFT product, so the cost is
    O(H log^2 H). Leaves of size ``base`` run the compensated recursion.
    """
    f = np.ascontiguousarray(f[:length], dtype=float)
    u = np.zeros(length)
    acc = np.zeros(length)
    stack = [(0, length, False)]
    while stack:
        lo, hi, left_done = stack.pop()
        if hi - lo <= base:
            _kernels.renewal_block(f, u, acc, lo, hi)
            continue
        mid = (lo + hi) // 2
        if not left_done:
            stack.append((lo, hi, True))
            stack.append((lo, mid, False))
            continue
        part = signal.fftconvolve(u[lo:mid], f[:hi - lo])
        acc[mid:hi] += part[mid - lo:hi - lo]
        stack.append((mid, hi, False))
    return u


# ---------------------------------------------------------------------------
# profile checks
# ---------------------------------------------------------------------------


@dataclass
class RangeBand:
    name: str
    lo: float
    hi: float
    sup: float
    inf: float
    coverage: str

    @property
    def spread(self):
        if self.coverage == "none" or self.inf <= 0:
            return math.inf
        return self.sup / self.inf


@dataclass
class ProfileReport:
    kind: str
    mean_tau: float
    ranges: list
    stationary_n: int
    stationary_ratio: float | None

    def band(self, name):
        for r in self.ranges:
            if r.name == name:
                return r
        raise KeyError(name)


def _band(name, model, lo, hi, profile):
    n = model.times.astype(float)
    H = model.horizon
    if lo > H:
        return RangeBand(name, lo, hi, math.nan, math.nan, "none")
    mask = (n >= lo) & (n <= hi) & (n >= 2)
    if not mask.any():
        return RangeBand(name, lo, hi, math.nan, math.nan, "none")
    ratio = model.u[mask] / profile(n[mask])
    coverage = "full" if hi <= H else "partial"
    return RangeBand(name, lo, hi, float(ratio.max()), float(ratio.min()), coverage)


def regime_profile_report(model, kind="auto"):
    """Ratios of u(n) to the regime profiles.

    ``kind="three"`` uses ``1/sqrt(n)``, ``1/(delta^2 n^1.5)``,
    ``1/(T^3 delta^2)`` on ``[2, 1/delta^2]``, ``[1/delta^2, T^2]``,
    ``[T^2, H]``; ``kind="diffusive"`` uses ``1/min(sqrt(n), T)`` on
    ``[2, T^2]`` and ``[T^2, H]``. ``"auto"`` picks by ``T delta >= 1``.
    """
    T, delta = model.params.T, model.params.delta
    if kind == "auto":
        kind = "three" if T * delta >= 1.0 else "diffusive"
    mu = renewal_moments(model.params).mean_tau
    H = model.horizon
    if kind == "three":
        cut1 = 1.0 / delta ** 2
        cut2 = float(T * T)
        ranges = [
            _band("short", model, 2, cut1, lambda n: 1.0 / np.sqrt(n)),
            _band("middle", model, cut1, cut2, lambda n: 1.0 / (delta ** 2 * n ** 1.5)),
            _band("stationary", model, cut2, math.inf, lambda n: np.full_like(n, 1.0 / (T ** 3 * delta ** 2))),
        ]
        # an empty middle range (1/delta^2 > T^2) is reported as not covered
        if cut1 >= cut2:
            ranges[1] = RangeBand("middle", cut1, cut2, math.nan, math.nan, "none")
    elif kind == "diffusive":
        ranges = [
            _band("short", model, 2, float(T * T), lambda n: 1.0 / np.minimum(np.sqrt(n), T)),
            _band("stationary", model, float(T * T), math.inf,
                  lambda n: 1.0 / np.minimum(np.sqrt(n), T)),
        ]
    else:
        raise ParameterError(f"unknown profile kind {kind!r}")
    for r in ranges:
        if r.coverage == "partial" and math.isinf(r.hi):
            r.coverage = "full"
    stat_n = 2 * int(round(10.0 * mu))  # n = 20 E[tau_1] on the even lattice
    stat = model.u_at(stat_n) * mu / 2.0 if stat_n <= H else None
    return ProfileReport(kind, mu, ranges, stat_n, stat)


def compare_profiles(first, second):
    """Per-range ratio of the sup/inf bands of two reports (>= 1)."""
    out = {}
    for a in first.ranges:
        b = second.band(a.name)
        if a.coverage == "none" or b.coverage == "none":
            out[a.name] = math.nan
            continue
        out[a.name] = max(a.sup / b.sup, b.sup / a.sup, a.inf / b.inf, b.inf / a.inf)
    return out


# ---------------------------------------------------------------------------
# tilt identity
# ---------------------------------------------------------------------------


def penalised_contact_weight(T, delta, k):
    """``E[exp(-H_k) 1{k in tau^T}]`` by a transfer matrix over heights -k..k."""
    size = 2 * k + 1
    heights = np.arange(-k, k + 1)
    on = (heights % T) == 0
    pen = np.where(on, math.exp(-delta), 1.0)
    v = np.zeros(size)
    v[k] = 1.0
    for _ in range(k):
        w = np.zeros(size)
        w[1:] += 0.5 * v[:-1]
        w[:-1] += 0.5 * v[1:]
        v = w * pen
    return math.fsum(v[on])


def enumerate_contact_weight(T, delta, k):
    """Same expectation by summing over all ``2^k`` paths."""
    if k == 0:
        return 1.0
    idx = np.arange(2 ** k, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(k)) & 1).astype(np.int64)
    paths = np.cumsum(2 * bits - 1, axis=1)
    contacts = (paths % T == 0).sum(axis=1)
    end = paths[:, -1] % T == 0
    return math.fsum(np.exp(-delta * contacts[end])) / 2 ** k


def tilt_identity_check(params, k_max=20):
    """Max relative defect of ``E[e^{-H_k} 1{k in tau^T}] = e^{phi k} u(k)``.

    The left side comes from a transfer matrix for every even k <= k_max
    and, for k_max <= 16, additionally from full path enumeration.
    """
    k_max = check_even(k_max, "k_max", minimum=0)
    if k_max > 20:
        raise ParameterError("k_max must be <= 20")
    model = build_renewal(params, max(k_max, 2))
    worst = 0.0
    for k in range(0, k_max + 1, 2):
        rhs = math.exp(model.phi * k) * model.u_at(k)
        lhs = [penalised_contact_weight(params.T, params.delta, k)]
        if k_max <= 16:
            lhs.append(enumerate_contact_weight(params.T, params.delta, k))
        for value in lhs:
            worst = max(worst, abs(value - rhs) / rhs)
    return worst


def write_csv(model, path):
    """Dump ``n,f,u`` rows with shortest round-trip floats."""
    from .io import atomic_write_text

    lines = ["n,f,u"]
    for i in range(model.f.shape[0]):
        lines.append(f"{2 * i},{float(model.f[i])!r},{float(model.u[i])!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
