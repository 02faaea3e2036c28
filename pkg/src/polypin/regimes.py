"""Phase diagram over the exponents ``(a, b)`` and desk-scale experiments.

``T_N ~ N^a`` and ``delta_N = beta N^-b``. Borders are tested before open
regions; float inputs tie within ``TIE_TOL``, Fractions tie exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import InfeasibleRunError, ParameterError
from .free_energy import ModelParams, ScalingPoint, compare_exponents, kappa, renewal_moments
from .io import atomic_write_json, fmt, write_csv
from .polymer import build_instance, last_contact_law, partition_function, sample_polymer

HALF = Fraction(1, 2)
NU = 0.05
BIG_M = 20.0
MAX_N = 2_000_000
MAX_T = 2000
MAX_SAMPLES = 100_000
WINDOW_EPS = (0.05, 0.1, 0.2)
NORMAL_EDGES = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)


class RegimeLabel(str, enum.Enum):
    TH1_LOCALIZED = "TH1_LOCALIZED"
    R1_SUBDIFFUSIVE = "R1_SUBDIFFUSIVE"
    R2_DIFFUSIVE = "R2_DIFFUSIVE"
    R3_SRW = "R3_SRW"
    BC1_DIAGONAL = "BC1_DIAGONAL"
    BC2_HALFLINE = "BC2_HALFLINE"
    BC3_CRITICAL = "BC3_CRITICAL"


@dataclass(frozen=True)
class Classification:
    label: RegimeLabel
    subcase: str

    def __str__(self):
        return self.label.value


def _is_exact(x):
    return isinstance(x, (int, Fraction))


def _half(x):
    return HALF if _is_exact(x) else 0.5


def classify(a, b):
    """Region of ``(a, b)`` in the exponent diagram.

    TH1 is tagged ``"localized"`` (``1/3 < a < 1/2``, ``3a - 1 > b``),
    ``"strong_repulsion"`` (``a < 1/2``, ``b >= 1/2``) or
    ``"weakly_depinned"`` (``a >= 1/2``, ``b < 1/2``).

    >>> str(classify(0.4, 0.1))
    'TH1_LOCALIZED'
    >>> str(classify(Fraction(9, 20), Fraction(7, 20)))
    'BC3_CRITICAL'
    """
    if not a > 0:
        raise ParameterError(f"a must be positive, got {a}")
    if not b >= 0:
        raise ParameterError(f"b must be non-negative, got {b}")
    exact = _is_exact(a) and _is_exact(b)
    h = HALF if exact else 0.5
    third = Fraction(1, 3) if exact else 1.0 / 3.0
    three_a = 3 * a - 1 if exact else 3.0 * float(a) - 1.0
    c = compare_exponents
    # borders first
    if c(a, b) == 0 and c(b, h) <= 0:
        return Classification(RegimeLabel.BC1_DIAGONAL, "")
    if c(b, h) == 0 and c(a, h) > 0:
        return Classification(RegimeLabel.BC2_HALFLINE, "")
    if c(b, h) < 0 and c(three_a, b) == 0:
        return Classification(RegimeLabel.BC3_CRITICAL, "")
    # open regions
    if c(a, h) < 0 and c(b, h) >= 0:
        return Classification(RegimeLabel.TH1_LOCALIZED, "strong_repulsion")
    if c(a, h) >= 0 and c(b, h) < 0:
        return Classification(RegimeLabel.TH1_LOCALIZED, "weakly_depinned")
    if c(a, h) >= 0:
        return Classification(RegimeLabel.R3_SRW, "")
    # a < 1/2 and b < 1/2 from here on
    if c(three_a, b) > 0 and c(a, third) > 0:
        return Classification(RegimeLabel.TH1_LOCALIZED, "localized")
    if c(b, a) > 0:
        return Classification(RegimeLabel.R2_DIFFUSIVE, "")
    return Classification(RegimeLabel.R1_SUBDIFFUSIVE, "")


@dataclass(frozen=True)
class Prediction:
    """Orders of magnitude from the summary table, plus the renewal contact count."""

    label: RegimeLabel
    endpoint_scale: float
    last_contact_scale: float
    contacts_scale: float
    contacts_renewal: float
    constant: float | None = None


def predicted_orders(point):
    """Endpoint, last-contact and contact-count scales at ``point``."""
    cls = classify(point.a, point.b)
    label = cls.label
    N = point.N
    T, d = point.T_N, point.delta_N
    rootN = math.sqrt(N)
    constant = None
    if label is RegimeLabel.TH1_LOCALIZED:
        small_b = compare_exponents(point.b, _half(point.b)) < 0
        endpoint = float(T) if small_b else rootN
        last, contacts = 1.0 / d ** 2, 1.0 / d
    elif label is RegimeLabel.R1_SUBDIFFUSIVE:
        constant = math.pi
        endpoint = math.pi * math.sqrt(N / (T * d))
        last, contacts = float(N), T ** 3 * d ** 2
    elif label in (RegimeLabel.R2_DIFFUSIVE, RegimeLabel.BC1_DIAGONAL):
        endpoint = rootN
        if label is RegimeLabel.BC1_DIAGONAL:
            constant = kappa(float(point.beta))
            endpoint = constant * rootN
        last, contacts = float(N), min(rootN, N / T)
    elif label in (RegimeLabel.R3_SRW, RegimeLabel.BC2_HALFLINE):
        endpoint, last, contacts = rootN, float(N), rootN
    else:
        endpoint, last, contacts = float(T), float(N), T ** 3 * d ** 2
    renewal = N / renewal_moments(ModelParams(T, d)).mean_tau if d > 0 else math.nan
    return Prediction(label, endpoint, last, contacts, renewal, constant)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    criterion: str
    statistic: float
    threshold: str
    verdict: str

    @classmethod
    def at_most(cls, name, criterion, value, limit):
        return cls(name, criterion, value, f"<= {fmt(limit)}", _verdict(value <= limit))

    @classmethod
    def at_least(cls, name, criterion, value, limit):
        return cls(name, criterion, value, f">= {fmt(limit)}", _verdict(value >= limit))

    @classmethod
    def within(cls, name, criterion, value, lo, hi):
        return cls(name, criterion, value, f"[{fmt(lo)}, {fmt(hi)}]", _verdict(lo <= value <= hi))

    @classmethod
    def info(cls, name, value):
        return cls(name, "", value, "", "info")


def _verdict(ok):
    return "pass" if ok else "fail"


@dataclass
class ExperimentReport:
    point: ScalingPoint
    label: RegimeLabel
    subcase: str
    n_samples: int
    seed: int
    T: int
    delta: float
    prediction: Prediction
    cost_estimate: float
    moments: dict
    tails: dict
    last_contact: dict
    m_histogram: list
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.verdict != "fail" for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        pred = asdict(self.prediction)
        pred["label"] = self.prediction.label.value
        return {
            "point": {"a": float(self.point.a), "b": float(self.point.b),
                      "beta": float(self.point.beta), "N": self.point.N},
            "label": self.label.value,
            "subcase": self.subcase,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "T": self.T,
            "delta": self.delta,
            "prediction": pred,
            "cost_estimate": self.cost_estimate,
            "moments": self.moments,
            "tails": self.tails,
            "last_contact": self.last_contact,
            "m_histogram": self.m_histogram,
            "checks": [asdict(c) for c in self.checks],
            "passed": self.passed,
        }


def estimate_cost(point, n_samples):
    """Rough operation count: hitting DP, renewal inversion and sampling."""
    N, T = point.N, point.T_N
    M = N // 2
    dp = 0.5 * N * min(T, N)
    inversion = 40.0 * M * max(1.0, math.log2(M)) ** 2
    sampling = n_samples * 200.0 * max(1.0, math.log2(M)) + N * T
    return dp + inversion + sampling


def check_feasible(point, n_samples):
    estimate = estimate_cost(point, n_samples)
    if point.N > MAX_N or point.T_N > MAX_T or n_samples > MAX_SAMPLES:
        raise InfeasibleRunError(
            f"run exceeds desk scale (N <= {MAX_N}, T <= {MAX_T}, samples <= {MAX_SAMPLES}); "
            f"N={point.N}, T={point.T_N}, samples={n_samples}", estimate=estimate)
    return estimate


def srw_contrast(point, eps):
    """Exact SRW probability of an interface contact in ``[(1 - eps) N, N]``."""
    if compare_exponents(point.a, _half(point.a)) >= 0:
        raise ParameterError("srw_contrast needs a < 1/2")
    if not 0 < eps <= 1:
        raise ParameterError("eps must be in (0, 1]")
    return window_probability(build_instance(ModelParams(point.T_N, 0.0), point.N), eps)


def window_probability(instance, eps):
    law = last_contact_law(instance)
    return float(np.sum(law.prob[law.times >= (1.0 - eps) * instance.N]))


def _normal_band(x):
    """Worst-cell factor C with C^-1 Phi <= empirical <= C Phi on the grid."""
    edges = np.array(NORMAL_EDGES)
    cells = []
    worst = 1.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        emp = float(np.mean((x > lo) & (x <= hi)))
        ref = float(stats.norm.cdf(hi) - stats.norm.cdf(lo))
        c = max(emp / ref, ref / emp) if emp > 0 else math.inf
        worst = max(worst, c)
        cells.append({"u": float(lo), "v": float(hi), "empirical": emp, "normal": ref})
    return worst, cells


def _geometric_fit(m):
    ks = np.arange(1, 6)
    surv = np.array([np.mean(m >= k) for k in ks])
    keep = surv > 0
    if keep.sum() < 2:
        return math.nan
    slope = np.polyfit(ks[keep], np.log(surv[keep]), 1)[0]
    return float(math.exp(slope))


def run_experiment(point, n_samples, seed=0, criteria=None, threads=None):
    """Sample ``n_samples`` trajectories at ``point`` and evaluate the regime's checks.

    ``criteria`` optionally restricts the checks to a set of criterion tags
    (``"C6"``...). Statistical misses come back as ``fail`` verdicts.
    """
    cls = classify(point.a, point.b)
    estimate = check_feasible(point, n_samples)
    params = point.params()
    pred = predicted_orders(point)
    instance = build_instance(params, point.N)
    batch = sample_polymer(instance, n_samples, seed=seed, threads=threads)
    x = batch.S_N / pred.endpoint_scale
    d = params.delta
    tau = batch.tau_last
    m = batch.m
    moments = {
        "mean_scaled": float(np.mean(x)),
        "var_scaled": float(np.var(x)),
        "mean_L": float(np.mean(batch.L)),
        "mean_m": float(np.mean(m)),
        "visited_other_fraction": float(np.mean(m > 0)),
    }
    tails = {f"P(|X|>{k})": float(np.mean(np.abs(x) > k)) for k in (1, 2, 3)}
    lo, hi = NU / d ** 2, BIG_M / d ** 2
    last = {
        "mean": float(np.mean(tau)),
        "median": float(np.median(tau)),
        "q90": float(np.quantile(tau, 0.9)),
        "nu_over_delta2": lo,
        "M_over_delta2": hi,
        "fraction_in_band": float(np.mean((tau >= lo) & (tau <= hi))),
        "fraction_below_M": float(np.mean(tau <= hi)),
    }
    top = int(m.max()) if m.size else 0
    hist = [int(v) for v in np.bincount(m, minlength=top + 1)]
    checks = []
    label = cls.label
    if label is RegimeLabel.TH1_LOCALIZED:
        checks.append(Check.at_most("visited_other_fraction", "C6",
                                    moments["visited_other_fraction"], 0.05))
        if compare_exponents(point.b, _half(point.b)) < 0:
            checks.append(Check.at_least("tau_last_below_M_over_delta2", "C6",
                                         last["fraction_below_M"], 0.8))
        else:
            checks.append(Check.info("tau_last_below_M_over_delta2", last["fraction_below_M"]))
        checks.append(Check.info("tau_last_in_nu_M_band", last["fraction_in_band"]))
    elif label in (RegimeLabel.R1_SUBDIFFUSIVE, RegimeLabel.R2_DIFFUSIVE,
                   RegimeLabel.BC1_DIAGONAL, RegimeLabel.BC2_HALFLINE):
        checks.append(Check.within("var_scaled", "C8", moments["var_scaled"], 0.6, 1.4))
        checks.append(Check.at_most("tail_beyond_3", "C8", tails["P(|X|>3)"], 0.02))
        c, _cells = _normal_band(x)
        checks.append(Check.info("normal_band_C", c))
    elif label is RegimeLabel.BC3_CRITICAL:
        for k in (1, 2, 3):
            denom = float(np.mean(m >= k))
            ratio = float(np.mean(m >= k + 1)) / denom if denom > 0 else math.inf
            checks.append(Check.at_most(f"m_ratio_{k}", "C7", ratio, 0.9))
        checks.append(Check.info("geometric_theta", _geometric_fit(m)))
        scaled = []
        for eps in WINDOW_EPS:
            frac = float(np.mean(tau >= (1.0 - eps) * point.N))
            scaled.append(frac / eps)
            checks.append(Check.info(f"window_fraction_over_eps_{fmt(eps)}", frac / eps))
        spread = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
        checks.append(Check.at_most("window_spread", "C7", spread, 3.0))
        if compare_exponents(point.a, _half(point.a)) < 0:
            for eps in WINDOW_EPS:
                checks.append(Check.at_least(f"srw_contrast_{fmt(eps)}", "C7",
                                             srw_contrast(point, eps), 0.9))
    elif label is RegimeLabel.R3_SRW:
        z = partition_function(instance).Z
        checks.append(Check.at_most("abs_Z_minus_1", "C9", abs(z - 1.0), 0.05))
        free = sample_polymer(build_instance(ModelParams(params.T, 0.0), point.N),
                              n_samples, seed=seed, threads=threads)
        ks = stats.ks_2samp(batch.L, free.L)
        checks.append(Check.info("L_ks_statistic_vs_srw", float(ks.statistic)))
        checks.append(Check.info("mean_L_srw", float(np.mean(free.L))))
    if criteria is not None:
        wanted = set(criteria)
        checks = [c for c in checks if c.verdict == "info" or c.criterion in wanted]
    return ExperimentReport(point, label, cls.subcase, n_samples, int(seed), params.T, d, pred,
                            estimate, moments, tails, last, hist, checks)


def write_report(report, path, fmt_name="json"):
    """JSON report, or a CSV summary with one row per check."""
    if fmt_name == "json":
        atomic_write_json(path, report.to_dict())
    elif fmt_name == "csv":
        rows = [(c.name, c.statistic, c.threshold, c.verdict) for c in report.checks]
        write_csv(path, ("name", "statistic", "threshold", "verdict"), rows)
    else:
        raise ParameterError(f"unknown format {fmt_name!r}")

