"""Bit-reproducible elementary functions.

Library ``exp``/``log``/``erf`` are not correctly rounded and differ between
libm implementations, so anything that both ends of the codec must agree on
goes through the routines below. They use only IEEE-754 binary64 ``+ - * /``,
``sqrt`` (correctly rounded by the standard), ``floor`` and the exact
``frexp``/``ldexp`` scalings, each in a fixed evaluation order.

All functions accept scalars or numpy arrays and return float64 arrays
(0-d for scalar input).
"""

from __future__ import annotations

import numpy as np

# Cody-Waite split of ln 2: LN2_HI has trailing zero bits, so k * LN2_HI is
# exact for |k| < 2**11.
LN2_HI = 6.93147180369123816490e-01
LN2_LO = 1.90821492927058770002e-10
INV_LN2 = 1.44269504088896338700e00
SQRT_HALF = 0.70710678118654752440
INV_SQRT2 = 0.70710678118654752440

# 1/n! for n = 0..12, evaluated by Horner from the highest term down.
_EXP_TAYLOR = (
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
)

# Abramowitz & Stegun 7.1.26 (|error| <= 1.5e-7 on x >= 0).
_AS_P = 0.3275911
_AS_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)

# Acklam's rational approximation to the standard normal quantile.
_ACK_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
          1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_ACK_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
          6.680131188771972e01, -1.328068155288572e01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
          -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
          3.754408661907416e00)
_ACK_PLOW = 0.02425


def _horner(coeffs, x):
    acc = np.full_like(x, coeffs[0])
    for c in coeffs[1:]:
        acc = acc * x + c
    return acc


def det_exp(x):
    """exp(x) via k*ln2 range reduction and a 12th-order Taylor polynomial."""
    x = np.asarray(x, dtype=np.float64)
    under = x < -745.2
    over = x > 709.78
    xs = np.where(under | over, 0.0, x)
    k = np.floor(xs * INV_LN2 + 0.5)
    r = (xs - k * LN2_HI) - k * LN2_LO
    p = _horner(_EXP_TAYLOR[::-1], r)
    out = np.ldexp(p, k.astype(np.int64))
    out = np.where(under, 0.0, out)
    return np.where(over, np.inf, out)


def det_log(x):
    """Natural log for positive finite x via frexp and an atanh series."""
    x = np.asarray(x, dtype=np.float64)
    m, e = np.frexp(x)
    low = m < SQRT_HALF
    m = np.where(low, m * 2.0, m)
    e = np.where(low, e - 1, e).astype(np.float64)
    s = (m - 1.0) / (m + 1.0)
    s2 = s * s
    # 2*atanh(s) = 2s(1 + s^2/3 + s^4/5 + ...), |s| <= 0.1716
    series = _horner([1.0 / (2 * j + 1) for j in range(11, -1, -1)], s2)
    ln_m = 2.0 * s * series
    return (e * LN2_HI + ln_m) + e * LN2_LO


def det_erf(x):
    """erf via Abramowitz & Stegun 7.1.26, odd-extended to negative x."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _AS_P * ax)
    poly = _horner(_AS_A[::-1], t) * t
    y = 1.0 - poly * det_exp(-(ax * ax))
    # the fit leaves 1e-9 at the origin; pin it so erf stays exactly odd
    y = np.where(ax == 0, 0.0, y)
    return np.where(x < 0, -y, y)


def det_ndtri(p):
    """Standard normal quantile for p in (0, 1), Acklam's approximation."""
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)

    lo = p < _ACK_PLOW
    hi = p > 1.0 - _ACK_PLOW
    mid = ~(lo | hi)

    q = p[mid] - 0.5
    r = q * q
    out[mid] = _horner(_ACK_A, r) * q / (_horner(_ACK_B + (1.0,), r))

    if lo.any():
        q = np.sqrt(-2.0 * det_log(p[lo]))
        out[lo] = _horner(_ACK_C, q) / _horner(_ACK_D + (1.0,), q)
    if hi.any():
        q = np.sqrt(-2.0 * det_log(1.0 - p[hi]))
        out[hi] = -_horner(_ACK_C, q) / _horner(_ACK_D + (1.0,), q)
    return out


def round_half_away(x):
    """Nearest integer, ties away from zero. Exact for every finite double."""
    x = np.asarray(x, dtype=np.float64)
    t = np.trunc(x)
    frac = x - t
    return t + np.sign(x) * (np.abs(frac) >= 0.5)
