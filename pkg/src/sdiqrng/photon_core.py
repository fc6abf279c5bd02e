"""Photon statistics of the beam-splitter difference measurement.

Exact rational arithmetic is used for small photon numbers (n <= 64 by
default) so that brute-force oracles can be compared bit for bit; above that
binomial coefficients are handled in log space through ``gammaln``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import binom

Number = Union[float, Fraction]

EXACT_MAX_N = 64
GAUSS_MIN_N = 10_000
LOG_SPACE_MIN_N = 1_000


class RegimeError(ValueError):
    """Raised when a tail bound is requested outside its validity regime."""


@dataclass(frozen=True, order=True)
class LogProb:
    """A probability stored as its base-2 logarithm.

    ``log2_value = -inf`` is the impossible event; it is never replaced by a
    large negative finite number.
    """

    log2_value: float

    def __post_init__(self):
        if math.isnan(self.log2_value) or self.log2_value > 1e-12:
            raise ValueError(f"not a log-probability: {self.log2_value}")
        if self.log2_value > 0:
            object.__setattr__(self, "log2_value", 0.0)

    @classmethod
    def from_prob(cls, p: Number) -> "LogProb":
        if p < 0 or p > 1:
            raise ValueError(f"probability out of range: {p}")
        if p == 0:
            return IMPOSSIBLE
        if isinstance(p, Fraction):
            return cls(math.log2(p.numerator) - math.log2(p.denominator))
        return cls(math.log2(p))

    @classmethod
    def from_ln(cls, ln_p: float) -> "LogProb":
        return cls(ln_p / math.log(2.0))

    @property
    def is_impossible(self) -> bool:
        return self.log2_value == -math.inf

    @property
    def prob(self) -> float:
        return 2.0 ** self.log2_value

    @property
    def log10(self) -> float:
        return self.log2_value * math.log10(2.0)

    @property
    def ln(self) -> float:
        return self.log2_value * math.log(2.0)

    def __add__(self, other: "LogProb") -> "LogProb":
        return LogProb(min(0.0, float(np.logaddexp2(self.log2_value, other.log2_value))))

    def __mul__(self, other: "LogProb") -> "LogProb":
        return LogProb(self.log2_value + other.log2_value)

    def times(self, count: float) -> float:
        """log2 of ``count * p`` (may exceed 0, so returned as a bare float)."""
        if count <= 0:
            return -math.inf
        return self.log2_value + math.log2(count)


IMPOSSIBLE = LogProb(-math.inf)
CERTAIN = LogProb(0.0)


@dataclass(frozen=True)
class FockRange:
    """Closed photon-number interval [n_lo, n_hi]; ``n_hi`` may be ``math.inf``."""

    n_lo: int
    n_hi: float

    def __post_init__(self):
        if self.n_lo < 0 or self.n_hi < self.n_lo:
            raise ValueError(f"invalid photon range [{self.n_lo}, {self.n_hi}]")

    def __contains__(self, n) -> bool:
        return self.n_lo <= n <= self.n_hi

    def clamp(self, n):
        return np.clip(n, self.n_lo, self.n_hi)


@dataclass(frozen=True)
class DiffOutcomeDist:
    """Outcome distribution of n_A - n_B for Fock input |n> on a 50:50 splitter."""

    n: int
    weights: dict = field(repr=False)

    def weight(self, x: int) -> Number:
        return self.weights.get(x, 0)

    @property
    def exact(self) -> bool:
        return isinstance(next(iter(self.weights.values())), Fraction)


def _check_reflectivity(r: Number) -> None:
    if not 0 <= r <= 1:
        raise ValueError(f"reflectivity must lie in [0, 1], got {r}")


def log_binom_coeff(n, k):
    """Natural log of C(n, k), vectorised; -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    ok = (k >= 0) & (k <= n)
    with np.errstate(invalid="ignore"):
        out = gammaln(n + 1) - gammaln(np.where(ok, k, 0) + 1) - gammaln(np.where(ok, n - k, 0) + 1)
    return np.where(ok, out, -np.inf)


def bs_povm_coeff(n_refl: int, n_trans: int, r: Number) -> Number:
    """Probability that ``n_refl + n_trans`` photons split as (n_refl, n_trans).

    Exact when ``r`` is a ``Fraction``; scipy's saddle-point pmf above 10^3 photons.
    """
    _check_reflectivity(r)
    if n_refl < 0 or n_trans < 0:
        raise ValueError("photon counts must be non-negative")
    total = n_refl + n_trans
    if isinstance(r, Rational):
        r = Fraction(r)
        return math.comb(total, n_refl) * r**n_refl * (1 - r) ** n_trans
    if total <= LOG_SPACE_MIN_N:
        return math.comb(total, n_refl) * r**n_refl * (1.0 - r) ** n_trans
    return float(binom.pmf(n_refl, total, r))


def diff_outcome_dist(n: int, exact: bool | None = None) -> DiffOutcomeDist:
    """Distribution of x = n_A - n_B for |n> on a balanced splitter.

    weight(x) = 2^-n C(n, (n+x)/2) for x with the parity of n, zero otherwise.
    """
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if exact is None:
        exact = n <= EXACT_MAX_N
    ks = range(n + 1)
    if exact:
        denom = 2**n
        weights = {2 * k - n: Fraction(math.comb(n, k), denom) for k in ks}
    else:
        k = np.arange(n + 1)
        w = binom.pmf(k, n, 0.5)
        weights = {int(2 * kk - n): float(ww) for kk, ww in zip(k, w)}
    return DiffOutcomeDist(n=n, weights=weights)


def outcome_indices(n: int, support: Iterable[int]) -> np.ndarray:
    """Distinct n_A values addressed by the support set.

    Each x in the support is mapped to n_A = floor((n + x)/2); duplicates are
    counted once. For x of the same parity as n this is the outcome x itself;
    an x of the other parity is rounded down to the neighbouring outcome.
    """
    xs = np.fromiter((int(x) for x in support), dtype=np.int64)
    if xs.size == 0:
        raise ValueError("support set is empty")
    k = np.floor_divide(n + xs, 2)
    k = k[(k >= 0) & (k <= n)]
    return np.unique(k)


def guess_prob(n: int, support: Iterable[int], exact: bool | None = None) -> Number:
    """Eve's best guessing probability for Fock input |n> and support set X."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if exact is None:
        exact = n <= EXACT_MAX_N
    k = outcome_indices(n, support)
    if k.size == 0:
        return Fraction(0) if exact else 0.0
    if exact:
        p = Fraction(sum(math.comb(n, int(kk)) for kk in k), 2**n)
        return min(p, Fraction(1))
    return min(1.0, math.fsum(binom.pmf(k, n, 0.5)))


def _window_parity_edges(n: int, half_width: float) -> tuple[int, int]:
    """Extreme outcomes addressed by the symmetric window |x| <= floor(half_width)."""
    w = math.floor(half_width)
    if (w - n) % 2 == 0:
        return -w, w
    return -w - 1, w - 1


def guess_prob_gauss(n: float, half_width: float) -> float:
    """Large-n Gaussian approximation of ``guess_prob`` on |x| <= floor(half_width).

    The outcomes are spaced by 2 and each carries roughly twice the normal
    density of variance n, so the window sum becomes a normal integral over
    the window widened by one unit on each side.
    """
    if n <= 0:
        return 1.0
    lo, hi = _window_parity_edges(int(n), half_width)
    s = math.sqrt(2.0 * n)
    return 0.5 * (math.erf((hi + 1) / s) - math.erf((lo - 1) / s))


def _is_symmetric_window(support) -> float | None:
    if isinstance(support, range) and support.step == 1 and len(support):
        if support.start == -(support.stop - 1):
            return float(support.stop - 1)
    return None


def min_entropy_per_sample(n_R_minus: int, support: Iterable[int], exact: bool | None = None,
                           method: str = "auto") -> float:
    """Certified min-entropy in bits for the smallest certified photon number.

    ``method``: ``"exact"`` sums binomial weights, ``"gauss"`` uses the erf
    form (requires a symmetric ``range`` support), ``"auto"`` switches to the
    erf form for n >= 10^4 when the support is a symmetric window.
    """
    n = int(n_R_minus)
    if n <= 0:
        return 0.0
    hw = _is_symmetric_window(support)
    use_gauss = method == "gauss" or (method == "auto" and n >= GAUSS_MIN_N and hw is not None)
    if use_gauss:
        if hw is None:
            raise ValueError("Gaussian form needs a symmetric contiguous support window")
        p = guess_prob_gauss(n, hw)
    else:
        p = guess_prob(n, support, exact=exact)
    if p <= 0:
        return math.inf
    if isinstance(p, Fraction):
        return math.log2(p.denominator) - math.log2(p.numerator)
    return -math.log2(p)


def ideal_min_entropy(n: float) -> float:
    """Leading-order min-entropy 0.5*log2(pi*n/2) for the central bin."""
    return 0.5 * math.log2(math.pi * n / 2.0) if n > 0 else 0.0


def log_binom_tail(r: float, n: int, k: int) -> float:
    """Natural log of Pr[Binomial(n, r) >= k]."""
    if k > n:
        return -math.inf
    k = max(k, 0)
    if k == 0:
        return 0.0
    if r <= 0:
        return -math.inf
    if r >= 1:
        return 0.0
    j = np.arange(k, n + 1)
    logs = log_binom_coeff(n, j) + j * math.log(r) + (n - j) * math.log1p(-r)
    return min(0.0, float(logsumexp(logs)))


def binom_tail_exact(r: Number, n: int, k: int) -> Number:
    """Pr[Binomial(n, r) >= k]; exact rational when ``r`` is a Fraction."""
    _check_reflectivity(r)
    if k > n:
        return Fraction(0) if isinstance(r, Rational) else 0.0
    k = max(k, 0)
    if isinstance(r, Rational):
        r = Fraction(r)
        return sum(math.comb(n, j) * r**j * (1 - r) ** (n - j) for j in range(k, n + 1))
    return math.exp(log_binom_tail(r, n, k))


def log_hoeffding_tail(r: float, n: float, k: float) -> float:
    """Natural log of the Hoeffding bound exp(-2(k - rn)^2 / n)."""
    if k < r * n:
        raise RegimeError(f"Hoeffding bound needs k >= r n (k={k}, r n={r * n})")
    if n <= 0:
        return 0.0
    return -2.0 * (k - r * n) ** 2 / n


def hoeffding_tail(r: Number, n: float, k: float) -> float:
    """Upper bound exp(-2(k - rn)^2/n) on Pr[Binomial(n, r) >= k], valid for k >= rn."""
    return math.exp(log_hoeffding_tail(r, n, k))
