"""Brute-force reference computations used only by the test-suite.

Everything here is deliberately naive: photon paths are enumerated one by one,
binomial masses are built from exact rationals, and failure probabilities are
maximised by scanning every Fock input. None of it calls into the package.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product

import mpmath
import numpy as np


@lru_cache(maxsize=None)
def path_difference_counts(n: int) -> dict[int, int]:
    """Count the 2^n routings of n photons at a 50:50 splitter by n_A - n_B."""
    counts: dict[int, int] = {}
    for path in product((1, -1), repeat=n):
        d = sum(path)
        counts[d] = counts.get(d, 0) + 1
    return counts


def path_difference_dist(n: int) -> dict[int, Fraction]:
    return {d: Fraction(c, 2**n) for d, c in path_difference_counts(n).items()}


def guess_prob_bruteforce(n: int, support) -> Fraction:
    """Mass of outcomes d attributed to the window: d in X, or d + 1 in X when
    the window point d + 1 has the wrong parity to be an outcome itself."""
    xs = set(support)
    total = 0
    for d, c in path_difference_counts(n).items():
        if d in xs or (d + 1) in xs:
            total += c
    return Fraction(total, 2**n)


def entropy_bits(p: Fraction) -> float:
    return math.log2(p.denominator) - math.log2(p.numerator)


def binom_pmf(n: int, k: int, r: Fraction) -> Fraction:
    if k < 0 or k > n:
        return Fraction(0)
    return math.comb(n, k) * r**k * (1 - r) ** (n - k)


@lru_cache(maxsize=None)
def beamsplitter_paths(n: int, r: Fraction) -> dict[int, Fraction]:
    """Distribution of reflected photons, adding one photon's two paths at a time.

    Cached; callers must not mutate the returned dict.
    """
    if n == 0:
        return {0: Fraction(1)}
    dist: dict[int, Fraction] = {}
    for k, p in beamsplitter_paths(n - 1, r).items():
        dist[k + 1] = dist.get(k + 1, 0) + p * r
        dist[k] = dist.get(k, 0) + p * (1 - r)
    return dist


def lower_tail_failure(n_e: int, r1: Fraction, n_c_minus: int, n_r_minus: int) -> Fraction:
    """Pr[n_C >= n_C^- and n_R <= n_R^- - 1] for a Fock input of n_e photons."""
    return sum((p for n_c, p in beamsplitter_paths(n_e, r1).items()
                if n_c >= n_c_minus and n_e - n_c <= n_r_minus - 1), Fraction(0))


def upper_tail_failure(n_e: int, r1: Fraction, n_c_plus: int, n_r_plus: int) -> Fraction:
    """Pr[n_C <= n_C^+ and n_R >= n_R^+ + 1] for a Fock input of n_e photons."""
    return sum((p for n_c, p in beamsplitter_paths(n_e, r1).items()
                if n_c <= n_c_plus and n_e - n_c >= n_r_plus + 1), Fraction(0))


def adversarial_max(fn, n_e_max: int, *args) -> tuple[int, Fraction]:
    """(argmax, max) of fn(n_e, *args) over 0 <= n_e <= n_e_max; first argmax on ties."""
    best_n, best = 0, Fraction(-1)
    for n_e in range(n_e_max + 1):
        v = fn(n_e, *args)
        if v > best:
            best_n, best = n_e, v
    return best_n, best


def pass_and_out_of_range(n_e: int, r1: Fraction, pass_lo: int, pass_hi: int, r_lo: int, r_hi: int) -> Fraction:
    """Joint probability that the tap-off count passes and the kept count misses [r_lo, r_hi]."""
    return sum((p for n_c, p in beamsplitter_paths(n_e, r1).items()
                if pass_lo <= n_c <= pass_hi and not r_lo <= n_e - n_c <= r_hi), Fraction(0))


def erfc_inv_mp_log(ln_eps: float, dps: int = 60) -> float:
    """erfc^-1(exp(ln_eps)) by mpmath bisection on ln erfc, which is monotone."""
    with mpmath.workdps(dps):
        target = mpmath.mpf(ln_eps)
        lo, hi = mpmath.mpf(0), mpmath.sqrt(-target) + 2
        for _ in range(200):
            mid = (lo + hi) / 2
            if mpmath.log(mpmath.erfc(mid)) > target:
                lo = mid
            else:
                hi = mid
        return float((lo + hi) / 2)


def erfc_inv_mp(eps: float, dps: int = 60) -> float:
    with mpmath.workdps(dps):
        return erfc_inv_mp_log(mpmath.log(mpmath.mpf(eps)), dps)


def toeplitz_hash_loops(seed_bits, h: int, l: int, x) -> list[int]:
    """Output bit i = XOR over j of seed[i - j + h - 1] * x[j]."""
    return [sum(int(seed_bits[i - j + h - 1]) * int(x[j]) for j in range(h)) % 2 for i in range(l)]


def collision_fractions(h: int, l: int) -> np.ndarray:
    """Fraction of all 2^(h+l-1) seeds under which x and x' collide, for every
    difference z = x xor x' != 0 (a pair collides iff T z = 0)."""
    n = h + l - 1
    seeds = np.arange(2**n, dtype=np.int64)
    parity = np.zeros(2**n, np.uint8)
    for b in range(n):
        parity ^= ((seeds >> b) & 1).astype(np.uint8)
    out = np.empty(2**h - 1)
    for z in range(1, 2**h):
        zero = np.ones(2**n, bool)
        for i in range(l):
            mask = 0
            for j in range(h):
                if (z >> (h - 1 - j)) & 1:
                    mask |= 1 << (n - 1 - (i - j + h - 1))
            zero &= parity[seeds & mask] == 0
        out[z - 1] = zero.mean()
    return out
