"""Airy function Ai, its derivative, and its negative-axis zeros.

Self-contained implementation: the Maclaurin series (summed in extended
precision to absorb the alternating-series cancellation) covers |x| <= 7.5,
and the standard asymptotic expansions take over beyond,

    Ai(x)  ~  exp(-z)/(2 sqrt(pi) x^{1/4}) * sum_k (-1)^k c_k z^{-k},
    Ai(-x) ~  1/(sqrt(pi) x^{1/4}) * [sin(z + pi/4) * sum_k (-1)^k c_{2k} z^{-2k}
                                      - cos(z + pi/4) * sum_k (-1)^k c_{2k+1} z^{-2k-1}],

with z = (2/3) x^{3/2}, c_0 = 1, c_{k+1} = c_k (6k+1)(6k+5) / (72 (k+1)), and
d_k = -c_k (6k+1)/(6k-1) for the derivative.  Both asymptotic sums are
truncated at their smallest term, which keeps the mismatch between the series
and asymptotic branches at the switch point below 1e-10.

Zeros of Ai are located from their asymptotic positions, bracketed, bisected,
and Newton-polished with Ai'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SWITCH = 7.5          # |x| boundary between Maclaurin series and asymptotics
# Ai(0) = 3^{-2/3}/Gamma(2/3) and Ai'(0) = -3^{-1/3}/Gamma(1/3), parsed to
# extended precision: they multiply series sums of size ~1e5 near the switch
# point, so float64 constants would already cost ~1e-11 there.
_AI0 = np.longdouble("0.35502805388781723926006318600418317639797917419917724058332651030081004245")
_AIP0 = np.longdouble("-0.25881940379280679840518356018920396347909113835536239261038146295828529397")
_MAX_ZEROS = 50


def _series_pair(x: np.ndarray):
    """Maclaurin values (Ai, Ai') via the two Airy-equation series solutions.

    Summed in longdouble: individual terms reach ~1e5 at |x| = 7.5 while the
    result is O(1), so float64 accumulation would lose ~1e-11 absolute.
    """
    x = x.astype(np.longdouble)
    x3 = x**3
    f = np.ones_like(x)       # y1 = 1 + x^3/(2*3) + x^6/(2*3*5*6) + ...
    g = x.copy()              # y2 = x + x^4/(3*4) + x^7/(3*4*6*7) + ...
    fp = np.zeros_like(x)     # y1'
    gp = np.ones_like(x)      # y2'
    tf, tg = np.ones_like(x), x.copy()
    for k in range(120):
        tf = tf * x3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * x3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        fp += tf * (3 * k + 3) / x_safe(x)
        gp += tg * (3 * k + 4) / x_safe(x)
        if max(np.abs(tf).max(initial=0.0), np.abs(tg).max(initial=0.0)) < 1e-25:
            break
    ai = _AI0 * f + _AIP0 * g
    aip = _AI0 * fp + _AIP0 * gp
    return ai.astype(float), aip.astype(float)


def x_safe(x):
    # derivative terms are formed as term * power / x; at x = 0 every such
    # term is zero anyway, so any nonzero placeholder is fine
    return np.where(x == 0.0, 1.0, x)


def _asym_coeffs(n: int):
    c = np.empty(n, dtype=np.longdouble)
    c[0] = 1.0
    for k in range(n - 1):
        c[k + 1] = c[k] * (6 * k + 1) * (6 * k + 5) / (72.0 * (k + 1))
    d = -c * (6 * np.arange(n) + 1) / (6 * np.arange(n) - 1.0)
    d[0] = 1.0
    return c, d


_C, _D = _asym_coeffs(40)


def _asym_sum(coeffs: np.ndarray, z: np.ndarray, parity: int, step: int):
    """sum_k (-1)^k coeffs[parity + step*k] z^{-(parity + step*k)}, truncated
    at the smallest term for each z."""
    acc = np.zeros_like(z)
    stop = np.zeros(z.shape, dtype=bool)
    prev = np.full_like(z, np.inf)
    sign = 1.0
    for k in range(parity, len(coeffs), step):
        term = coeffs[k] * z ** (-float(k))
        grow = np.abs(term) >= prev
        stop |= grow
        acc = np.where(stop, acc, acc + sign * term)
        prev = np.abs(term)
        sign = -sign
    return acc


def _asym_pos(x: np.ndarray):
    z = (2.0 / 3.0) * x**1.5
    s_ai = _asym_sum(_C, z, 0, 1)
    s_aip = _asym_sum(_D, z, 0, 1)
    pref = np.exp(-z) / (2.0 * math.sqrt(math.pi))
    return pref * x**-0.25 * s_ai, -pref * x**0.25 * s_aip


def _asym_neg(x: np.ndarray):
    """Ai and Ai' at -x for x > 0."""
    z = (2.0 / 3.0) * x**1.5
    chi = z + 0.25 * math.pi
    p, q = _asym_sum(_C, z, 0, 2), _asym_sum(_C, z, 1, 2)
    pd, qd = _asym_sum(_D, z, 0, 2), _asym_sum(_D, z, 1, 2)
    pref = 1.0 / math.sqrt(math.pi)
    ai = pref * x**-0.25 * (np.sin(chi) * p - np.cos(chi) * q)
    aip = -pref * x**0.25 * (np.cos(chi) * pd + np.sin(chi) * qd)
    return ai, aip


def _eval(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    ai = np.empty_like(x)
    aip = np.empty_like(x)
    mid = np.abs(x) <= SWITCH
    if mid.any():
        ai[mid], aip[mid] = _series_pair(x[mid])
    hi = x > SWITCH
    if hi.any():
        ai[hi], aip[hi] = _asym_pos(x[hi])
    lo = x < -SWITCH
    if lo.any():
        a, ap = _asym_neg(-x[lo])
        ai[lo], aip[lo] = a, ap
    return ai, aip


def airy(x):
    """Ai(x), elementwise."""
    scalar = np.isscalar(x)
    ai, _ = _eval(np.atleast_1d(x))
    return float(ai[0]) if scalar else ai


def airy_deriv(x):
    """Ai'(x), elementwise."""
    scalar = np.isscalar(x)
    _, aip = _eval(np.atleast_1d(x))
    return float(aip[0]) if scalar else aip


@dataclass(frozen=True)
class AiryTable:
    """Negative-axis zeros of Ai: Ai(-zeros[k]) = 0, zeros ascending."""

    zeros: np.ndarray

    @staticmethod
    def ai(x):
        return airy(x)


def _zero_guess(k: int) -> float:
    # asymptotic location of the k-th zero (1-based), accurate to ~1e-4 at k=1
    z = 3.0 * math.pi * (4 * k - 1) / 8.0
    return z ** (2.0 / 3.0) * (1.0 + 5.0 / (48.0 * z * z)
                               - 5.0 / (36.0 * z**4) + 77125.0 / (82944.0 * z**6))


def airy_zeros(n: int) -> AiryTable:
    """First n zeros of Ai on the negative axis (n <= 50), polished to ~1e-13."""
    if not 1 <= n <= _MAX_ZEROS:
        raise ValueError(f"airy_zeros: n must be in [1, {_MAX_ZEROS}]")
    zeros = []
    for k in range(1, n + 1):
        guess = _zero_guess(k)
        lo, hi = guess - 0.05, guess + 0.05
        flo = airy(-lo)
        if airy(-hi) * flo > 0.0:  # widen once if the asymptotic guess is off
            lo, hi = guess - 0.2, guess + 0.2
            flo = airy(-lo)
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            fm = airy(-mid)
            if fm == 0.0:
                lo = hi = mid
                break
            if fm * flo > 0.0:
                lo, flo = mid, fm
            else:
                hi = mid
        u = 0.5 * (lo + hi)
        for _ in range(4):  # Newton polish on Ai(-u)
            u += airy(-u) / airy_deriv(-u)
        zeros.append(u)
    return AiryTable(np.asarray(zeros))
