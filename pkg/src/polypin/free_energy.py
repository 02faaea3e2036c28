"""Free energy of the interface model and the tilted first-contact moments.

The free energy is the inverse of the Laplace transform of the first
contact time at ``e^delta``. Writing ``lam`` for the Laplace argument and
``gamma = arctan sqrt(e^{-2 lam} - 1)``,

    Q_T(lam) = 1 + tan(gamma) tan(T gamma / 2),

which is increasing on ``0 < gamma < pi / T`` and blows up at the right
end. Everything below is solved by bisection on gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, ParameterError, SolverError
from .srw import check_even, g_rate, tilted_first_contact

_MAX_ITER = 200


@dataclass(frozen=True)
class ModelParams:
    """Interface spacing ``T`` (even) and repulsion strength ``delta``."""

    T: int
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "T", check_even(self.T, "T", minimum=2))
        d = float(self.delta)
        if not math.isfinite(d) or d < 0.0:
            raise ParameterError(f"delta must be a finite number >= 0, got {self.delta!r}")
        object.__setattr__(self, "delta", d)


def nearest_even(x):
    """Nearest even integer to ``x``, at least 2."""
    return 2 * max(1, round(x / 2.0))


@dataclass(frozen=True)
class ScalingPoint:
    """A point ``(a, b, beta, N)`` with ``T_N ~ N^a`` and ``delta_N = beta N^-b``.

    ``a`` and ``b`` may be Fractions, in which case regime borders are
    decided exactly.
    """

    a: float | Fraction
    b: float | Fraction
    beta: float
    N: int

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError(f"a must be positive, got {self.a}")
        if not self.b >= 0:
            raise ParameterError(f"b must be non-negative, got {self.b}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "N", check_even(self.N, "N", minimum=2))

    @property
    def T_N(self):
        return nearest_even(self.N ** float(self.a))

    @property
    def delta_N(self):
        return float(self.beta) * self.N ** (-float(self.b))

    def params(self):
        return ModelParams(self.T_N, self.delta_N)

    def with_N(self, N):
        return ScalingPoint(self.a, self.b, self.beta, N)


@dataclass(frozen=True)
class FreeEnergyResult:
    phi: float
    gamma: float
    g: float
    residual: float


@dataclass(frozen=True)
class RenewalMoments:
    mean_tau: float
    second_tau: float
    switch_prob: float
    method: str


# ---------------------------------------------------------------------------
# Laplace transform and its inverse
# ---------------------------------------------------------------------------


def _excess(T, gamma):
    """``Q~_T(gamma) - 1 = tan(gamma) tan(T gamma / 2)``."""
    return math.tan(gamma) * math.tan(0.5 * T * gamma)


def gamma_of_lambda(lam):
    """``arctan sqrt(e^{-2 lam} - 1)`` for ``lam <= 0``."""
    if lam > 0:
        raise DomainError(f"lambda must be <= 0, got {lam}", boundary=0.0)
    return math.atan(math.sqrt(math.expm1(-2.0 * lam)))


def laplace_Q(T, lam):
    """Closed form of ``E[exp(-lam tau_1^T)]`` for ``lam <= 0``.

    Raises DomainError once ``T gamma(lam)`` reaches pi; the error carries
    the boundary value of ``lam``.
    """
    T = check_even(T, "T", minimum=2)
    boundary = 0.5 * math.log(math.cos(math.pi / T) ** 2) if T > 2 else -math.inf
    if lam > 0:
        raise DomainError(f"lambda must be <= 0, got {lam}", boundary=0.0)
    gamma = gamma_of_lambda(lam)
    if T * gamma >= math.pi:
        raise DomainError(f"lambda={lam} is beyond the singularity of Q_{T}", boundary=boundary)
    return 1.0 + _excess(T, gamma)


def laplace_Q_switch(T, gamma):
    """``E[exp(-lam tau_1) 1{eps_1 = +1}]`` in terms of gamma: ``tan(gamma) / (2 sin(T gamma))``."""
    return math.tan(gamma) / (2.0 * math.sin(T * gamma))


def free_energy(params, tol=1e-13):
    """Solve ``Q_T(phi) = e^delta`` for the free energy ``phi <= 0``.

    Examples
    --------
    >>> r = free_energy(ModelParams(2, 0.3))
    >>> round(r.phi, 12)
    -0.15
    """
    T, delta = params.T, params.delta
    g = g_rate(T)
    if delta == 0.0:
        return FreeEnergyResult(0.0, 0.0, g, 0.0)
    target = math.expm1(delta)
    lo, hi = 0.0, math.pi / T
    # halve down to the root's binade first so tiny delta still converges
    while _excess(T, 0.5 * hi) >= target and hi > 0.0:
        hi *= 0.5
    if hi < math.pi / T:
        lo = 0.5 * hi
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _excess(T, mid) < target:
            lo = mid
        else:
            hi = mid
    else:
        raise SolverError(f"bisection did not collapse for T={T}, delta={delta}")
    candidates = [x for x in (lo, hi) if 0.0 < x < math.pi / T]
    gamma = min(candidates, key=lambda x: abs(_excess(T, x) - target))
    residual = abs(_excess(T, gamma) - target)
    if residual > tol and not _adjacent(lo, hi):
        raise SolverError(f"residual {residual} above tol {tol}")
    phi = -0.5 * math.log1p(math.tan(gamma) ** 2)
    return FreeEnergyResult(phi, gamma, g, residual)


def _adjacent(lo, hi):
    return hi - lo <= 4.0 * math.ulp(hi)


# ---------------------------------------------------------------------------
# border constants
# ---------------------------------------------------------------------------


def x_beta(beta, tol=1e-15):
    """Unique root in (0, pi) of ``x = beta sin(x) / (1 - cos x)`` (= beta cot(x/2))."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    lo, hi = 0.0, math.pi
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid <= lo or mid >= hi:
            break
        if beta / math.tan(0.5 * mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kappa(beta):
    """Diffusion constant ``sqrt(x^3 / (beta (x + sin x)))`` with ``x = x_beta``."""
    x = x_beta(beta)
    return math.sqrt(x ** 3 / (beta * (x + math.sin(x))))


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

TIE_TOL = 1e-12


def compare_exponents(a, b):
    """-1, 0, 1 as a < b, a = b, a > b; exact for rationals, 1e-12 tie band for floats."""
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return (a > b) - (a < b)
    diff = float(a) - float(b)
    if abs(diff) <= TIE_TOL:
        return 0
    return 1 if diff > 0 else -1


@dataclass(frozen=True)
class AsymptoticPhi:
    approx: float
    exact: float
    rel_error: float
    branch: str


def asymptotic_phi(point):
    """Leading-order free energy along a scaling ray next to the exact value."""
    T, delta = point.T_N, point.delta_N
    exact = free_energy(ModelParams(T, delta)).phi
    cmp = compare_exponents(point.a, point.b)
    if cmp < 0:
        branch = "a<b"
        approx = -delta / T
    elif cmp == 0:
        branch = "a=b"
        approx = -x_beta(float(point.beta)) ** 2 / (2.0 * T * T)
    else:
        branch = "a>b"
        approx = -(math.pi ** 2) / (2.0 * T * T) * (1.0 - 4.0 / (T * delta))
    rel = abs(approx - exact) / abs(exact) if exact != 0 else math.inf
    return AsymptoticPhi(approx, exact, rel, branch)


# ---------------------------------------------------------------------------
# tilted moments
# ---------------------------------------------------------------------------


def _moments_closed(T, delta, fe):
    gamma = fe.gamma
    lam = fe.phi
    if T == 2:
        # tau_1 = 2 deterministically; Q_2(lam) = e^{-2 lam}
        return RenewalMoments(2.0, 4.0, 0.5, "closed_form")
    tg = math.tan(gamma)
    sec2 = 1.0 + tg * tg
    # h = tan(T gamma / 2) is pinned by the root equation, which keeps the
    # derivatives 1/(1 + cos x) and sin x/(1 + cos x)^2 finite near the pole
    h = math.expm1(delta) / tg
    h1 = 0.5 * (1.0 + h * h)
    h2 = h * h1
    dq = sec2 * h + T * tg * h1
    d2q = 2.0 * sec2 * tg * h + 2.0 * T * sec2 * h1 + T * T * tg * h2
    s = math.expm1(-2.0 * lam)
    dg = -1.0 / math.sqrt(s)
    d2g = -math.exp(-2.0 * lam) / s ** 1.5
    w = math.exp(-delta)
    mean = -w * dq * dg
    second = w * (d2g * dq + dg * dg * d2q)
    switch = 2.0 * w * laplace_Q_switch(T, gamma)
    return RenewalMoments(mean, second, switch, "closed_form")


def _geometric_tail(f_last, n_last, rho):
    """Tail sums of sum_j f_last rho^j (n_last + 2 j)^p for p = 0, 1, 2, j >= 1."""
    if f_last == 0.0 or rho <= 0.0:
        return 0.0, 0.0, 0.0
    s0 = rho / (1 - rho)
    s1 = rho / (1 - rho) ** 2
    s2 = rho * (1 + rho) / (1 - rho) ** 3
    t0 = f_last * s0
    t1 = f_last * (n_last * s0 + 2 * s1)
    t2 = f_last * (n_last ** 2 * s0 + 4 * n_last * s1 + 4 * s2)
    return t0, t1, t2


def _moments_direct(T, delta, fe, rel=1e-12):
    w = math.exp(-delta)
    rate = fe.g + fe.phi
    rho = math.exp(-2.0 * rate) if T > 2 else 0.0
    horizon = 2 if T == 2 else max(4 * T * T, 2 * int(20.0 / rate) + 2)
    while True:
        q0, q1, _alive = tilted_first_contact(T, horizon, fe.phi)
        f = w * (q0 + 2.0 * q1)
        f1 = w * q1
        n = np.arange(horizon + 1, dtype=float)
        _, t1, t2 = _geometric_tail(f[-1], horizon, rho)
        s0, _, _ = _geometric_tail(2.0 * f1[-1], horizon, rho)
        second_head = math.fsum(n * n * f)
        # the geometric tail is added, but only trusted once it is negligible
        if t2 <= rel * second_head or rho == 0.0:
            break
        horizon = 2 * int(0.75 * horizon) + 2
    mean = math.fsum(n * f) + t1
    second = second_head + t2
    switch = 2.0 * math.fsum(f1) + s0
    return RenewalMoments(mean, second, switch, "direct_sum")


def renewal_moments(params, method="closed_form"):
    """``E[tau_1]``, ``E[tau_1^2]`` and ``P(eps_1^2 = 1)`` under the tilted law."""
    if params.delta <= 0.0:
        raise ParameterError("renewal moments need delta > 0")
    fe = free_energy(params)
    if method == "closed_form":
        return _moments_closed(params.T, params.delta, fe)
    if method == "direct_sum":
        return _moments_direct(params.T, params.delta, fe)
    raise ParameterError(f"unknown method {method!r}")
