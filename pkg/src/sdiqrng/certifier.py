"""Certification test calculus: voltage thresholds to a certified photon range.

A round passes when the tap-off detector's ADC code lies in [i_minus, i_plus].
Passing certifies that the randomness mode held between n_R_minus and
n_R_plus photons except with probability eps_fail, which is composed of the
electronic-noise tail eps_lambda and Hoeffding bounds on the lower and upper
binomial tails. All small probabilities are carried as natural or base-2 logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy.special import log_ndtr, ndtr
from scipy.stats import poisson

from .config import ProtocolParams, digest_of
from .detector_model import AdcSpec, bin_index, support_set, voltage_bin
from .photon_core import (IMPOSSIBLE, FockRange, LogProb, RegimeError, bs_povm_coeff,
                          min_entropy_per_sample)

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class CertThresholds:
    i_minus: int
    i_plus: int
    v_minus: float   # lowest voltage that passes
    v_plus: float    # upper edge of the highest passing bin

    def __post_init__(self):
        if self.i_minus > self.i_plus or self.v_minus > self.v_plus:
            raise ValueError("thresholds must satisfy i_minus <= i_plus")

    @classmethod
    def from_bins(cls, i_minus: int, i_plus: int, adc: AdcSpec) -> "CertThresholds":
        return cls(i_minus, i_plus, voltage_bin(i_minus, adc).v_lo, voltage_bin(i_plus, adc).v_hi)

    @classmethod
    def from_voltages(cls, v_lo: float, v_hi: float, adc: AdcSpec) -> "CertThresholds":
        """Bins containing ``v_lo`` and ``v_hi``; the window is widened to bin edges."""
        return cls.from_bins(int(bin_index(v_lo, adc)), int(bin_index(v_hi, adc)), adc)

    @classmethod
    def covering(cls, voltages, adc: AdcSpec) -> "CertThresholds":
        """Narrowest window that lets every observed voltage pass."""
        v = np.asarray(voltages, dtype=float)
        return cls.from_voltages(float(v.min()), float(v.max()), adc)

    def passes(self, codes):
        codes = np.asarray(codes)
        return (codes >= self.i_minus) & (codes <= self.i_plus)


@dataclass(frozen=True)
class EpsilonBudget:
    eps_minus: LogProb
    eps_plus: LogProb
    eps_lambda: LogProb
    eps_fail: LogProb
    eps_fail_m: LogProb
    m: int

    @classmethod
    def compose(cls, eps_minus: LogProb, eps_plus: LogProb, eps_lambda: LogProb, m: int) -> "EpsilonBudget":
        eps_fail = max(eps_minus, eps_plus) + eps_lambda
        eps_fail_m = LogProb(min(0.0, eps_fail.times(m)))
        return cls(eps_minus, eps_plus, eps_lambda, eps_fail, eps_fail_m, m)

    def to_record(self) -> dict:
        return {
            "eps_minus_log10": self.eps_minus.log10,
            "eps_plus_log10": self.eps_plus.log10,
            "eps_lambda_log10": self.eps_lambda.log10,
            "eps_fail_log10": self.eps_fail.log10,
            "eps_fail_m_log10": self.eps_fail_m.log10,
            "m": self.m,
        }


@dataclass(frozen=True)
class CertCertificate:
    certified_range: FockRange
    kappa_per_sample: float
    budget: EpsilonBudget
    lambda_tilde: float
    thresholds: CertThresholds
    reason: str | None = None
    input_digest: str = ""
    details: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.reason is None

    @property
    def n_R_minus(self) -> int:
        return self.certified_range.n_lo

    @property
    def n_R_plus(self) -> float:
        return self.certified_range.n_hi

    def to_record(self) -> dict:
        return {
            "ok": self.ok,
            "reason": self.reason,
            "n_R_minus": self.certified_range.n_lo,
            "n_R_plus": self.certified_range.n_hi,
            "kappa_per_sample_bits": self.kappa_per_sample,
            "lambda_tilde_volts": self.lambda_tilde,
            "thresholds": {"i_minus": self.thresholds.i_minus, "i_plus": self.thresholds.i_plus,
                           "v_minus_volts": self.thresholds.v_minus, "v_plus_volts": self.thresholds.v_plus},
            **self.budget.to_record(),
            "input_digest": self.input_digest,
            **self.details,
        }


# -- error-function inversion in log space --------------------------------------------

def log_erfc(x: float) -> float:
    """ln erfc(x), accurate far into the tail."""
    return _LN2 + float(log_ndtr(-math.sqrt(2.0) * x))


def erfc_inv_from_log(ln_eps: float, max_iter: int = 100) -> float:
    """Solve erfc(x) = exp(ln_eps) for x >= 0, with ln_eps <= 0.

    Seeded by the tail asymptotic x^2 ~ -ln(eps) - ln(x sqrt(pi)) and refined by
    Newton steps on ln erfc, so it works where eps itself underflows.
    """
    if ln_eps > 0:
        raise ValueError("need eps <= 1")
    if ln_eps == 0:
        return 0.0
    if ln_eps > -0.5:
        x = float(math.sqrt(-ln_eps) * 0.5)
    else:
        x = math.sqrt(-ln_eps)
        x = math.sqrt(max(-ln_eps - math.log(x * math.sqrt(math.pi)), 1e-3))
    for _ in range(max_iter):
        f = log_erfc(x) - ln_eps
        dlog = -2.0 / math.sqrt(math.pi) * math.exp(-x * x - log_erfc(x))
        step = f / dlog
        x_new = max(x - step, 0.5 * x)
        if abs(x_new - x) <= 1e-15 * max(1.0, x):
            return x_new
        x = x_new
    raise ArithmeticError(f"erfc inversion did not converge: ln_eps={ln_eps}, x={x}, residual={f}")


def _as_ln(p) -> float:
    if isinstance(p, LogProb):
        return p.ln
    if p <= 0:
        return -math.inf
    return math.log(p)


def lambda_bound(sigma_c: float, eps_lambda) -> float:
    """Noise amplitude exceeded with probability eps_lambda: sqrt(2) sigma erfc^-1(eps)."""
    ln_eps = _as_ln(eps_lambda)
    if ln_eps > 0:
        raise ValueError("eps_lambda must lie in (0, 1]")
    if ln_eps == -math.inf:
        raise ValueError("eps_lambda must be positive")
    return math.sqrt(2.0) * sigma_c * erfc_inv_from_log(ln_eps)


def eps_lambda_of(sigma_c: float, lambda_tilde: float) -> LogProb:
    """Two-sided Gaussian tail probability Pr[|noise| > lambda_tilde]."""
    if sigma_c == 0:
        return IMPOSSIBLE
    return LogProb.from_ln(log_erfc(lambda_tilde / (math.sqrt(2.0) * sigma_c)))


# -- Hoeffding forms of the two failure tails -------------------------------------------

def log_epsilon_minus(v_minus, lambda_tilde, alpha_c, r1, n_R_minus) -> float:
    """ln of the lower-tail bound; raises RegimeError outside k >= rN."""
    n_c = (v_minus - lambda_tilde) / alpha_c
    n_tot = n_c + n_R_minus - 1
    if not n_c > 0 or n_R_minus < 1:
        raise RegimeError("no photons certified at the tap-off detector")
    if n_c < r1 * n_tot:
        raise RegimeError("lower tail outside the Hoeffding regime")
    return -2.0 * (n_c - r1 * n_tot) ** 2 / n_tot


def epsilon_minus(v_minus, lambda_tilde, alpha_c, r1, n_R_minus) -> float:
    return math.exp(log_epsilon_minus(v_minus, lambda_tilde, alpha_c, r1, n_R_minus))


def log_epsilon_plus(v_plus, lambda_tilde, alpha_c, r1, n_R_plus) -> float:
    """ln of the upper-tail bound with n_C^+ = (v_plus + lambda)/alpha_C."""
    if not math.isfinite(v_plus):
        raise RegimeError("unbounded upper threshold")
    n_c = max((v_plus + lambda_tilde) / alpha_c, 0.0)
    n_tot = n_c + n_R_plus + 1
    if n_R_plus < (1 - r1) * n_tot:
        raise RegimeError("upper tail outside the Hoeffding regime")
    return -2.0 * (n_R_plus - (1 - r1) * n_tot) ** 2 / n_tot


def epsilon_plus(v_plus, lambda_tilde, alpha_c, r1, n_R_plus) -> float:
    return math.exp(log_epsilon_plus(v_plus, lambda_tilde, alpha_c, r1, n_R_plus))


def disjointness_check(lambda_tilde, v_plus, alpha_c, n_R_minus, n_R_plus) -> bool:
    """True when no Fock input can trigger both failure tails at once.

    The lower tail vanishes for n_E > (v_plus + lambda)/alpha_C + n_R_minus - 1
    and the upper one for n_E < n_R_plus; they never overlap when
    lambda <= alpha_C (n_R_plus - n_R_minus + 1) - v_plus.
    """
    return lambda_tilde <= alpha_c * (n_R_plus - n_R_minus + 1) - v_plus


def regime_limit_n_R_minus(v_minus, lambda_tilde, alpha_c, r1) -> int:
    """Largest integer n_R_minus for which the lower-tail bound is in regime."""
    n_c = (v_minus - lambda_tilde) / alpha_c
    if not n_c > 0:
        return 0
    n = math.floor(1 + n_c * (1 - r1) / r1)
    while n >= 1 and n_c < r1 * (n_c + n - 1):
        n -= 1
    while n_c >= r1 * (n_c + n):
        n += 1
    return max(n, 0)


def solve_n_R_minus(target_eps_minus, v_minus, lambda_tilde, alpha_c, r1) -> int:
    """Largest integer n_R_minus with epsilon_minus <= target (0 if none).

    Within the Hoeffding regime the bound increases with n_R_minus, so integer
    bisection on [1, regime limit] finds the crossing; both neighbours are
    re-checked before returning.
    """
    ln_target = _as_ln(target_eps_minus)
    hi = regime_limit_n_R_minus(v_minus, lambda_tilde, alpha_c, r1)
    if hi < 1:
        return 0

    def ok(n):
        return log_epsilon_minus(v_minus, lambda_tilde, alpha_c, r1, n) <= ln_target

    if not ok(1):
        return 0
    if ok(hi):
        return hi
    lo = 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    assert ok(lo) and not ok(lo + 1)
    return lo


def n_R_minus_real(ln_target: float, n_c_minus: float, r1: float) -> float:
    """Real root of the lower-tail bound = target, with lambda = 0 and alpha_C = 1.

    Solves (c - r N)^2 = (L/2) N for the branch N <= c/r, L = -ln target, and
    returns n_R = N - c + 1 (0 when no positive solution exists).
    """
    c = n_c_minus
    if not c > 0:
        return 0.0
    half_l = -ln_target / 2.0
    b = 2.0 * r1 * c + half_l
    disc = b * b - 4.0 * r1 * r1 * c * c
    n_tot = 2.0 * c * c / (b + math.sqrt(max(disc, 0.0)))
    return max(n_tot - c + 1.0, 0.0)


# -- assembly ------------------------------------------------------------------------------

def certify(params: ProtocolParams, thresholds: CertThresholds, target_eps_fail, m: int = 1,
            split: float = 0.5) -> CertCertificate:
    """Certified photon range, per-sample min-entropy and epsilon budget.

    ``split`` is the fraction of eps_fail assigned to the noise tail; the rest
    bounds each of the two binomial tails. Sub-check failures yield a zeroed
    certificate carrying a machine-readable reason.
    """
    target = target_eps_fail if isinstance(target_eps_fail, LogProb) else LogProb.from_prob(target_eps_fail)
    alpha_c, r1, n_plus = params.alpha_c, params.r1, params.n_R_plus
    digest = digest_of({"params": params.to_flat(), "thresholds": thresholds.__dict__,
                        "target_log2": target.log2_value, "m": m, "split": split})
    if params.sigma_c > 0:
        eps_lambda = LogProb(target.log2_value + math.log2(split))
        tail_target = LogProb(target.log2_value + math.log2(1 - split))
        lam = lambda_bound(params.sigma_c, eps_lambda)
    else:
        eps_lambda, tail_target, lam = IMPOSSIBLE, target, 0.0

    def zeroed(reason, eps_minus=None, eps_plus=None):
        budget = EpsilonBudget.compose(eps_minus or IMPOSSIBLE, eps_plus or IMPOSSIBLE, eps_lambda, m)
        return CertCertificate(FockRange(0, n_plus), 0.0, budget, lam, thresholds, reason, digest)

    try:
        eps_plus = LogProb.from_ln(log_epsilon_plus(thresholds.v_plus, lam, alpha_c, r1, n_plus))
    except RegimeError:
        return zeroed("upper-tail-regime")
    if eps_plus > tail_target:
        return zeroed("upper-tail-exceeds-target", eps_plus=eps_plus)

    n_minus = min(solve_n_R_minus(tail_target, thresholds.v_minus, lam, alpha_c, r1), n_plus)
    if n_minus < 1:
        return zeroed("no-certifiable-photon-number", eps_plus=eps_plus)
    eps_minus = LogProb.from_ln(log_epsilon_minus(thresholds.v_minus, lam, alpha_c, r1, n_minus))
    if not disjointness_check(lam, thresholds.v_plus, alpha_c, n_minus, n_plus):
        return zeroed("tails-not-disjoint", eps_minus, eps_plus)

    support = support_set(params.delta_v_d, params.alpha_d)
    kappa = min_entropy_per_sample(n_minus, support)
    budget = EpsilonBudget.compose(eps_minus, eps_plus, eps_lambda, m)
    return CertCertificate(FockRange(n_minus, n_plus), kappa, budget, lam, thresholds, None, digest,
                           {"support_half_width": support.stop - 1})


def completeness_coherent(alpha_amp: float, thresholds: CertThresholds, params: ProtocolParams) -> float:
    """Probability eps_c that a coherent state of amplitude alpha fails the test.

    Photons reaching the tap-off detector are Poisson(r1 |alpha|^2); the voltage
    adds N(0, sigma_C^2). Exact Poisson summation up to mean 10^3, Gaussian above.
    """
    mu = params.r1 * abs(alpha_amp) ** 2
    a, s = params.alpha_c, params.sigma_c
    lo, hi = thresholds.v_minus, thresholds.v_plus
    if mu <= 1e3:
        n = np.arange(0, int(mu + 40 * math.sqrt(mu) + 50))
        pmf = poisson.pmf(n, mu)
        v = a * params.detector_c.linear_range.clamp(n)
        if s > 0:
            p_pass = ndtr((hi - v) / s) - ndtr((lo - v) / s)
        else:
            p_pass = ((v >= lo) & (v < hi)).astype(float)
        return float(min(1.0, max(0.0, 1.0 - np.dot(pmf, p_pass))))
    mean = a * mu
    sd = math.sqrt(a * a * mu + s * s)
    return float(ndtr((lo - mean) / sd) + ndtr((mean - hi) / sd))


def trace_distance_identity_check(n_range: FockRange, r1, pass_window: FockRange,
                                  state: int | Mapping[int, Fraction]) -> tuple[Fraction, Fraction]:
    """Failure probability computed two ways for a diagonal input state.

    ``pass_window`` is the ideal-detector test on n_C. Returns
    (joint probability of passing with n_R out of range,
     p_pass * trace distance of the passing conditional state of mode R to the
     closest state supported on ``n_range``).
    """
    r1 = Fraction(r1)
    probs = {state: Fraction(1)} if isinstance(state, int) else {k: Fraction(v) for k, v in state.items()}

    joint = Fraction(0)
    for n_e, p in probs.items():
        for n_c in range(n_e + 1):
            if n_c in pass_window and (n_e - n_c) not in n_range:
                joint += p * bs_povm_coeff(n_c, n_e - n_c, r1)

    unnorm: dict[int, Fraction] = {}
    for n_e, p in probs.items():
        for n_r in range(n_e + 1):
            if (n_e - n_r) in pass_window:
                unnorm[n_r] = unnorm.get(n_r, Fraction(0)) + p * bs_povm_coeff(n_e - n_r, n_r, r1)
    p_pass = sum(unnorm.values(), Fraction(0))
    if p_pass == 0:
        return joint, Fraction(0)
    rho = {n: w / p_pass for n, w in unnorm.items()}
    inside = {n: w for n, w in rho.items() if n in n_range}
    mass_in = sum(inside.values(), Fraction(0))
    if mass_in > 0:
        sigma = {n: w / mass_in for n, w in inside.items()}
    else:
        sigma = {n_range.n_lo: Fraction(1)}
    keys = set(rho) | set(sigma)
    distance = sum((abs(rho.get(n, 0) - sigma.get(n, 0)) for n in keys), Fraction(0)) / 2
    return joint, p_pass * distance
