"""Gamma function via a rational Lanczos approximation.

The approximation is

.. math::

    \\Gamma(x) = S(x) \\, y^{x - 1/2} e^{-y}, \\qquad y = x + g - 1/2,

with ``g = 6.024680040776729583740234375`` and ``S`` the ratio of two degree-12
polynomials whose coefficients are listed below (the 13-term, 53-bit set
published with Boost.Math, ``lanczos13m53``).  The rounding error committed
when forming ``y`` is measured and fed back as a first-order correction,
which keeps the relative error below ``1e-14`` all the way up to ``x = 171``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["gamma", "rgamma", "LANCZOS_G"]

LANCZOS_G = 6.024680040776729583740234375
_G_MINUS_HALF = 5.524680040776729583740234375

# numerator coefficients, constant term first
_NUM = np.array([
    23531376880.410759688572007674451636754734846804940,
    42919803642.649098768957899047001988850926355848959,
    35711959237.355668049440185451547166705960488635843,
    17921034426.037209699919755754458931112671403265390,
    6039542586.3520280050642916443072979210699388420708,
    1439720407.3117216736632230727949123939715485786772,
    248874557.86205415651146038641322942321632125127801,
    31426415.585400194380614231628318205362874684987640,
    2876370.6289353724412254090516208496135991145378768,
    186056.26539522349504029498971604569928220784236328,
    8071.6720023658162106380029022722506138218516325024,
    210.82427775157934587250973392071336271166969580291,
    2.5066282746310002701649081771338373386264310793408,
])

# denominator is x (x+1) ... (x+10) expanded, constant term first
_DEN = np.array([
    0.0, 39916800.0, 120543840.0, 150917976.0, 105258076.0, 45995730.0,
    13339535.0, 2637558.0, 357423.0, 32670.0, 1925.0, 66.0, 1.0,
])


def _lanczos_sum(x: np.ndarray) -> np.ndarray:
    num = np.zeros_like(x)
    den = np.zeros_like(x)
    small = x < 5.0
    xs = x[small]
    ns = np.zeros_like(xs)
    ds = np.zeros_like(xs)
    for c_num, c_den in zip(_NUM[::-1], _DEN[::-1]):
        ns = ns * xs + c_num
        ds = ds * xs + c_den
    num[small], den[small] = ns, ds

    # Horner in 1/x keeps the large-x branch from overflowing
    xl = x[~small]
    nl = np.zeros_like(xl)
    dl = np.zeros_like(xl)
    for c_num, c_den in zip(_NUM, _DEN):
        nl = nl / xl + c_num
        dl = dl / xl + c_den
    num[~small], den[~small] = nl, dl
    return num / den


def _sinpi(x: np.ndarray) -> np.ndarray:
    # reduce before multiplying by pi so that sin stays accurate near the integers
    n = np.round(x)
    sign = np.where(np.fmod(n, 2.0) == 0.0, 1.0, -1.0)
    return sign * np.sin(np.pi * (x - n))


# (n-1)! is exact in double precision up to n = 23
_FACTORIALS = np.array([float(math.factorial(n)) for n in range(23)])


# Gamma(x) exceeds the largest double beyond this point
_GAMMA_OVERFLOW = 171.62437695630272


def _gamma_positive(x: np.ndarray) -> np.ndarray:
    big = x > _GAMMA_OVERFLOW
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(big, np.inf, _lanczos_gamma(np.where(big, 1.0, x)))
    exact = (x == np.floor(x)) & (x <= 23.0)
    if np.any(exact):
        out[exact] = _FACTORIALS[x[exact].astype(int) - 1]
    return out


def _lanczos_gamma(x: np.ndarray) -> np.ndarray:
    y = x + _G_MINUS_HALF
    # exact rounding error of y, computed two ways depending on which term dominates
    z = np.where(x > _G_MINUS_HALF, (y - x) - _G_MINUS_HALF, (y - _G_MINUS_HALF) - x)
    z = z * LANCZOS_G / y

    r = _lanczos_sum(x) / np.exp(y)
    r = r + z * r
    half_pow = y ** (x / 2.0 - 0.25)
    return r * half_pow * half_pow


def gamma(x):
    """Gamma function for real arguments.

    Nonpositive integers are poles and yield ``inf``; negative non-integers
    go through the reflection formula.  Scalars in, scalars out.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)

    pos = arr > 0
    with np.errstate(over="ignore"):
        out[pos] = _gamma_positive(arr[pos])
        neg = ~pos
        if np.any(neg):
            xn = arr[neg]
            pole = xn == np.floor(xn)
            res = np.full_like(xn, np.inf)
            xr = xn[~pole]
            # Gamma(x) Gamma(1-x) = pi / sin(pi x)
            res[~pole] = np.pi / (_sinpi(xr) * _gamma_positive(1.0 - xr))
            out[neg] = res

    return float(out[0]) if scalar else out


def rgamma(x):
    """Reciprocal gamma function, entire; zero at the poles of ``gamma``."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)

    pos = arr > 0
    with np.errstate(over="ignore"):
        out[pos] = 1.0 / _gamma_positive(arr[pos])
    neg = ~pos
    if np.any(neg):
        xn = arr[neg]
        pole = xn == np.floor(xn)
        res = np.zeros_like(xn)
        xr = xn[~pole]
        res[~pole] = _sinpi(xr) * _gamma_positive(1.0 - xr) / np.pi
        out[neg] = res

    return float(out[0]) if scalar else out
