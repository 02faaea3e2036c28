"""Exact simple-random-walk quantities.

First contact laws with the interface set ``T * Z``, their k-fold
convolutions, interface visit probabilities and the return-to-origin
expansions. All results are exact up to floating point accumulation.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .errors import ParameterError


class Infinity(enum.Enum):
    INFINITY = "inf"

    def __repr__(self):
        return "INFINITY"


#: Interface spacing meaning "only the interface at height 0".
INFINITY = Infinity.INFINITY


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


def check_even(value, name, minimum=0):
    """Return ``value`` as an int after checking it is even and >= minimum."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ParameterError(f"{name} must be an even integer, got {value!r}")
    value = int(value)
    if value % 2:
        raise ParameterError(f"{name} must be even, got {value}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class InterfaceSpec:
    """Interface spacing: an even ``T >= 2`` or :data:`INFINITY`."""

    T: int | Infinity

    def __post_init__(self):
        if self.T is INFINITY:
            return
        object.__setattr__(self, "T", check_even(self.T, "T", minimum=2))

    @classmethod
    def of(cls, T):
        if isinstance(T, InterfaceSpec):
            return T
        if T is INFINITY or (isinstance(T, str) and T.lower() in ("inf", "infinity")):
            return cls(INFINITY)
        if isinstance(T, float) and math.isinf(T):
            return cls(INFINITY)
        return cls(T)

    @property
    def finite(self):
        return self.T is not INFINITY

    def g(self):
        """Decay rate ``-log cos(pi / T)`` of the first contact law (0 for INFINITY)."""
        if not self.finite:
            return 0.0
        return g_rate(self.T)

    def __str__(self):
        return "inf" if not self.finite else str(self.T)


def g_rate(T):
    """``g(T) = -log cos(pi / T)``; infinite for T = 2."""
    if T == 2:
        return math.inf
    return -math.log(math.cos(math.pi / T))


@dataclass(frozen=True)
class HittingLaw:
    """Law of the first contact time and the interface it lands on.

    ``q0[n]``, ``q1[n]``, ``q1_lower[n]`` are indexed by time n = 0..horizon;
    odd entries are zero. ``q1`` (upper neighbour) and ``q1_lower`` are
    computed independently and agree by symmetry.
    """

    spec: InterfaceSpec
    horizon: int
    q0: np.ndarray = field(repr=False)
    q1: np.ndarray = field(repr=False)
    q1_lower: np.ndarray = field(repr=False)
    tail_mass: float

    @property
    def q(self):
        return self.q0 + 2.0 * self.q1

    def total(self):
        """Sum of q over the horizon plus the tail mass (should be 1)."""
        return math.fsum(self.q) + self.tail_mass

    def laplace(self, lam):
        """Truncated Laplace transform ``sum_{n <= H} q(n) exp(-lam n)``."""
        n = np.arange(self.horizon + 1)
        return math.fsum(self.q * np.exp(-lam * n))


def _origin_return_laws(horizon):
    """P(S_{2m} = 0) and P(tau_1 = 2m) for the walk with only the origin."""
    m = np.arange(1, horizon // 2 + 1)
    ratio = (2.0 * m - 1.0) / (2.0 * m)
    visit = np.concatenate(([1.0], np.cumprod(ratio)))
    first = np.zeros_like(visit)
    first[1:] = visit[1:] / (2.0 * m - 1.0)
    return visit, first


def hitting_law(spec, horizon):
    """Exact law of ``(tau_1^T, eps_1^T)`` up to ``horizon``.

    Examples
    --------
    >>> law = hitting_law(InterfaceSpec(4), 4)
    >>> float(law.q1[4])
    0.0625
    """
    spec = InterfaceSpec.of(spec)
    horizon = check_even(horizon, "horizon", minimum=2)
    if spec.finite:
        q0, up, down, alive = _kernels.hitting_dp(spec.T, horizon, 1.0)
        return HittingLaw(spec, horizon, _frozen(q0), _frozen(up), _frozen(down),
                          float(alive[horizon]))
    visit, first = _origin_return_laws(horizon)
    q0 = np.zeros(horizon + 1)
    q0[0::2] = first
    zeros = np.zeros(horizon + 1)
    return HittingLaw(spec, horizon, _frozen(q0), _frozen(zeros), _frozen(zeros.copy()),
                      float(visit[-1]))


def tilted_first_contact(T, horizon, lam):
    """First contact law tilted by ``exp(-lam * n)``.

    Returns ``(q0, q1, alive)`` with ``alive[n] = exp(-lam n) P(tau_1 > n)``.
    The tilt is applied step by step, so nothing overflows even when
    ``exp(-lam n)`` alone would.
    """
    T = check_even(T, "T", minimum=2)
    horizon = check_even(horizon, "horizon", minimum=0)
    q0, up, _down, alive = _kernels.hitting_dp(T, horizon, math.exp(-lam))
    return q0, up, alive


@dataclass(frozen=True)
class KFoldLaw:
    """``mass[n] = P(tau_k^T = n)``, optionally with every gap <= T^2."""

    spec: InterfaceSpec
    k: int
    horizon: int
    mass: np.ndarray = field(repr=False)
    constrained: bool = False


def _gap_law(spec, horizon, constrained):
    """Compressed (even-index) first-contact law, gap-truncated if constrained."""
    law = hitting_law(spec, horizon)
    q = np.array(law.q[0::2])
    if constrained and spec.finite:
        cap = spec.T ** 2 // 2
        q[cap + 1:] = 0.0
    return law, q


def k_fold_sequence(spec, k_max, horizon, constrained=False):
    """Yield ``(k, compressed mass)`` for k = 1..k_max."""
    spec = InterfaceSpec.of(spec)
    horizon = check_even(horizon, "horizon", minimum=2)
    _, q = _gap_law(spec, horizon, constrained)
    length = q.shape[0]
    cur = q
    yield 1, cur
    for k in range(2, k_max + 1):
        cur = _kernels.conv_kahan(cur, q, length)
        yield k, cur


def k_fold_hitting(spec, k, horizon, constrained=False):
    """Law of the k-th contact time, exact up to accumulation error."""
    spec = InterfaceSpec.of(spec)
    if isinstance(k, bool) or not isinstance(k, numbers.Integral) or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    horizon = check_even(horizon, "horizon", minimum=2)
    if k == 1:
        law, q = _gap_law(spec, horizon, constrained)
        mass = law.q if not constrained else _expand(q, horizon)
        return KFoldLaw(spec, 1, horizon, _frozen(mass), constrained)
    for j, mass in k_fold_sequence(spec, k, horizon, constrained):
        if j == k:
            return KFoldLaw(spec, k, horizon, _frozen(_expand(mass, horizon)), constrained)


def _expand(compressed, horizon):
    out = np.zeros(horizon + 1)
    out[0::2] = compressed
    return out


def convolve_laws(a, b):
    """Convolution of two full-index laws on the same horizon (Kahan sums)."""
    if a.horizon != b.horizon:
        raise ParameterError("laws must share a horizon")
    c = _kernels.conv_kahan(np.ascontiguousarray(a.mass[0::2]),
                            np.ascontiguousarray(b.mass[0::2]), a.horizon // 2 + 1)
    return _expand(c, a.horizon)


# ---------------------------------------------------------------------------
# bound verification
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    grid_max: float
    argmax: tuple
    interior: dict
    per_T: dict
    constrained: dict

    def as_rows(self):
        rows = []
        for T, entry in self.per_T.items():
            rows.append({"T": str(T), **entry, **self.constrained.get(T, {})})
        return rows


def bound_ratio(prob, T, k, n):
    """``P(tau_k = n) min(T^3, n^1.5) exp(n g(T)) / k``."""
    if T is INFINITY:
        scale = n ** 1.5
        g = 0.0
    else:
        scale = min(float(T) ** 3, n ** 1.5)
        g = _bound_rate(T)
    return prob * scale * math.exp(n * g) / k


def _bound_rate(T):
    # T = 2 has no tail to correct, and g(2) is infinite
    return 0.0 if T == 2 else g_rate(T)


def verify_hitting_bounds(Ts, k_max, horizon_inf=None, constrained_factor=4):
    """Extract empirical constants in the k-fold hitting bounds.

    For each T the ratio ``P(tau_k = n) min(T^3, n^1.5) e^{n g(T)} / k`` is
    maximised over ``1 <= k <= k_max`` and even ``n < 2 T^2``. For
    ``2 T^2 <= n <= constrained_factor * T^2`` the gap-constrained law is
    scaled by ``T^3 e^{n g(T)}`` and ``log max_n`` is fitted as
    ``log C + k log(1 + C'/T)``.
    """
    per_T = {}
    constrained = {}
    best = (-math.inf, None)
    for T in Ts:
        spec = InterfaceSpec.of(T)
        if spec.finite:
            horizon = 2 * spec.T ** 2 - 2
        else:
            if horizon_inf is None:
                raise ParameterError("horizon_inf is required for T = INFINITY")
            horizon = check_even(horizon_inf, "horizon_inf", minimum=2)
        n = 2.0 * np.arange(horizon // 2 + 1)
        if spec.finite:
            weight = np.minimum(float(spec.T) ** 3, n ** 1.5) * np.exp(n * _bound_rate(spec.T))
        else:
            weight = n ** 1.5
        t_best = (-math.inf, None)
        for k, mass in k_fold_sequence(spec, k_max, horizon):
            ratio = mass * weight / k
            i = int(np.argmax(ratio))
            if ratio[i] > t_best[0]:
                t_best = (float(ratio[i]), (k, 2 * i))
        per_T[spec.T] = {"max_ratio": t_best[0], "k": t_best[1][0], "n": t_best[1][1],
                         "n_max": horizon}
        if t_best[0] > best[0]:
            best = (t_best[0], (spec.T, *t_best[1]))
        if spec.finite and spec.T > 2:
            constrained[spec.T] = _constrained_fit(spec, k_max, constrained_factor)
    T_arg, k_arg, n_arg = best[1]
    finite_Ts = [InterfaceSpec.of(T).T for T in Ts]
    interior = {
        "k": k_arg < k_max,
        "n": n_arg < per_T[T_arg]["n_max"],
        "T": T_arg != finite_Ts[-1],
    }
    return BoundReport(best[0], best[1], interior, per_T, constrained)


def _constrained_fit(spec, k_max, factor):
    T = spec.T
    horizon = factor * T * T
    lo = 2 * T * T
    n = 2.0 * np.arange(horizon // 2 + 1)
    weight = float(T) ** 3 * np.exp(n * spec.g())
    peaks = []
    for _k, mass in k_fold_sequence(spec, k_max, horizon, constrained=True):
        peaks.append(float(np.max((mass * weight)[lo // 2:])))
    peaks = np.array(peaks)
    ks = np.arange(1, k_max + 1)
    positive = peaks > 0
    if positive.sum() >= 2:
        slope, intercept = np.polyfit(ks[positive], np.log(peaks[positive]), 1)
    else:
        slope, intercept = 0.0, float(np.log(peaks[positive][0])) if positive.any() else 0.0
    c_prime = T * math.expm1(slope)
    growth = (1.0 + c_prime / T) ** ks
    return {"C_prime": c_prime, "C": math.exp(intercept),
            "max_scaled": float(np.max(peaks / growth))}


# ---------------------------------------------------------------------------
# visits and expansions
# ---------------------------------------------------------------------------


def interface_visit_prob(spec, n):
    """Exact ``P(S_n in T Z)`` for even n."""
    spec = InterfaceSpec.of(spec)
    n = check_even(n, "n", minimum=0)
    if n == 0:
        return 1.0
    if not spec.finite:
        return float(stats.binom.pmf(n // 2, n, 0.5))
    T = spec.T
    if T == 2:
        return 1.0
    jmax = n // T
    j = np.arange(-jmax, jmax + 1)
    return math.fsum(stats.binom.pmf((n + j * T) // 2, n, 0.5))


def interface_visit_band(spec, n):
    """``P(S_n in T Z) * min(sqrt(n), T)``; stays in a bounded band."""
    spec = InterfaceSpec.of(spec)
    p = interface_visit_prob(spec, n)
    scale = math.sqrt(n) if not spec.finite else min(math.sqrt(n), spec.T)
    return p * scale


@dataclass
class ExpansionReport:
    n: np.ndarray
    visit: np.ndarray
    first_return: np.ndarray
    cdf: np.ndarray
    visit_residual: np.ndarray
    first_return_residual: np.ndarray
    cdf_residual: np.ndarray

    @property
    def cdf_bound_holds(self):
        """Whether P(tau_1 <= n) stays below 1 - 1/sqrt(pi l) - 3/(8 sqrt(pi) l^1.5)."""
        return self.cdf_residual <= 0.0


def return_origin_expansions(n_values):
    """Exact return-to-origin probabilities against their expansions.

    With ``l = n / 2``:

    * ``visit = P(n in tau)``, residual ``visit sqrt(pi n / 2) - (1 - 1/(4n))``
    * ``first_return = P(tau_1 = n)``, residual
      ``first_return sqrt(pi / 2) n^1.5 - (1 + 3/(4n))``
    * ``cdf = P(tau_1 <= n)``, residual against
      ``1 - 1/sqrt(pi l) - 3/(8 sqrt(pi) l^1.5)``.

    The first two residuals are O(1/n^2). The third is not o(l^-1.5): the
    exact correction is ``+1/(8 sqrt(pi) l^1.5)``, so the residual behaves
    like ``l^-1.5 / (2 sqrt(pi))`` and the one-sided bound fails.
    """
    n = np.array([check_even(v, "n", minimum=2) for v in n_values], dtype=np.int64)
    visit = stats.binom.pmf(n // 2, n, 0.5)
    first = visit / (n - 1.0)
    cdf = 1.0 - visit  # P(tau_1 > n) = P(S_n = 0)
    nf = n.astype(float)
    l = nf / 2.0
    visit_res = visit * np.sqrt(np.pi * nf / 2.0) - (1.0 - 1.0 / (4.0 * nf))
    first_res = first * np.sqrt(np.pi / 2.0) * nf ** 1.5 - (1.0 + 3.0 / (4.0 * nf))
    cdf_res = cdf - (1.0 - 1.0 / np.sqrt(np.pi * l) - 3.0 / (8.0 * np.sqrt(np.pi) * l ** 1.5))
    return ExpansionReport(n, visit, first, cdf, visit_res, first_res, cdf_res)


def reflection_identity_check(T, horizon):
    """``max_n |2 q_T^1(n) - q_T^0(n) + q_{T/2}^0(n)|`` for T divisible by 4."""
    T = check_even(T, "T", minimum=4)
    if T % 4:
        raise ParameterError(f"T must be divisible by 4, got {T}")
    big = hitting_law(InterfaceSpec(T), horizon)
    half = hitting_law(InterfaceSpec(T // 2), horizon)
    return float(np.max(np.abs(2.0 * big.q1 - big.q0 + half.q0)))
