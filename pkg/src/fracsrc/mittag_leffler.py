r"""Two-parameter Mittag-Leffler function on the nonpositive real axis.

.. math::

    E_{\alpha,\beta}(z) = \sum_{k \ge 0} \frac{z^k}{\Gamma(\alpha k + \beta)}

Three evaluation regimes are used.

* Small ``|z|``: the Taylor series.  For small ``alpha`` the terms grow to
  roughly ``exp(|z|^{1/alpha})`` before they decay, so the sum is carried out
  in double precision only when the largest term is harmless, in double-double
  arithmetic for moderate growth and in :mod:`mpmath` beyond that.
* Large ``|z|``: the spectral-density representation obtained by folding the
  Bromwich contour of the Laplace transform ``s^{alpha-beta} / (s^alpha + x)``
  onto the branch cut,

  .. math::

      E_{\alpha,\beta}(-x) = \frac{1}{\pi} \int_0^\infty e^{-r} r^{\alpha-\beta}
          \frac{r^\alpha \sin(\pi\beta) + x \sin(\pi(\beta-\alpha))}
               {r^{2\alpha} + 2 x r^\alpha \cos(\pi\alpha) + x^2} \, dr,

  valid for ``0 < alpha < 1`` and ``0 < beta < 1 + alpha``.  ``beta > 1``
  is reduced with ``E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z``.  The
  integral is split at ``r0 = x^{1/alpha}`` (where the denominator is smallest)
  and each piece is computed with double-exponential quadrature whose step is
  halved until successive levels agree.
* Very large ``|z|`` (``alpha < 1``): the algebraic expansion
  ``sum_k (-1)^(k+1) |z|^-k / Gamma(beta - alpha k)``, truncated where the
  next term is below double-precision rounding.

For ``alpha = 1`` closed forms in ``exp`` replace the quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import gammaln

from fracsrc._parallel import ordered_map
from fracsrc.errors import DomainError, NumericalFailure
from fracsrc.special import gamma, rgamma

__all__ = [
    "MLParams",
    "Z_SWITCH",
    "series_switch",
    "mittag_leffler",
    "ml_eval",
    "ml_series",
    "ml_integral",
    "ml_asymptotic",
    "ml_kernel",
    "ml_scaled",
    "ml_asymptotic_leading",
]

#: nominal switch point between the Taylor and integral regimes
Z_SWITCH = 5.0

# series terms are dropped once they fall below this fraction of the partial sum
_SERIES_RTOL = 1e-18
# largest tolerated series term for plain double-precision summation
_DOUBLE_MAX_TERM = 10.0
_MAX_TERMS = 50_000

_CHUNK = 1024


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        _check_params(self.alpha, self.beta)


def _check_params(alpha: float, beta: float) -> None:
    if not (0.0 < alpha <= 1.0) or not math.isfinite(alpha):
        raise DomainError(f"Mittag-Leffler alpha must lie in (0, 1], got {alpha!r}")
    if not (beta > 0.0) or not math.isfinite(beta):
        raise DomainError(f"Mittag-Leffler beta must be positive, got {beta!r}")


def series_switch(alpha: float) -> float:
    """Largest ``|z|`` handled by the Taylor series for a given ``alpha``.

    ``Z_SWITCH`` for ``alpha >= 1/2``; for smaller ``alpha`` the switch moves
    in to ``25**alpha`` so the number of series terms stays bounded.
    """
    return min(Z_SWITCH, 25.0**alpha)


# {{{ series


def _log_terms(alpha: float, beta: float, x: float, kmax: int) -> np.ndarray:
    k = np.arange(kmax + 1, dtype=float)
    with np.errstate(divide="ignore"):
        return k * math.log(x) - gammaln(alpha * k + beta)


def _term_budget(alpha: float, beta: float, x: float) -> tuple[float, int]:
    """(log of the largest term, number of terms needed) for the series at ``-x``."""
    if x == 0.0:
        return 0.0, 1
    # the terms peak near alpha*k ~ x**(1/alpha); the scan grows until the tail is found
    kmax = int(min(_MAX_TERMS, 4.0 * x ** (1.0 / alpha) / alpha + 200.0))
    while True:
        logs = _log_terms(alpha, beta, x, kmax)
        lmax = float(np.max(logs))
        ipeak = int(np.argmax(logs))
        # stop well below the peak *and* below an absolute floor (the sum can be tiny)
        target = min(lmax, 0.0) + math.log(_SERIES_RTOL) - 10.0
        tail = np.nonzero(logs[ipeak:] < target)[0]
        if tail.size:
            return lmax, ipeak + int(tail[0]) + 1
        if kmax >= _MAX_TERMS:
            raise NumericalFailure(
                f"Mittag-Leffler series for alpha={alpha}, beta={beta}, z={-x} "
                f"needs more than {_MAX_TERMS} terms"
            )
        kmax = min(_MAX_TERMS, 2 * kmax)


# (alpha, beta) -> (dps, coefficient tuple); tables only ever grow
_MP_TABLES: dict[tuple[float, float], tuple[int, tuple]] = {}


def _mp_coefficients(alpha: float, beta: float, dps: int, nterms: int) -> tuple:
    key = (alpha, beta)
    have = _MP_TABLES.get(key)
    if have is not None and have[0] >= dps and len(have[1]) >= nterms:
        return have[1]
    if have is not None:
        dps, nterms = max(dps, have[0]), max(nterms, len(have[1]))
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        table = tuple(mpmath.rgamma(a * k + b) for k in range(nterms))
    if len(_MP_TABLES) > 64:
        _MP_TABLES.clear()
    _MP_TABLES[key] = (dps, table)
    return table


def _mp_dps(lmax: float) -> int:
    dps = 20 + int(math.ceil(max(lmax, 0.0) / math.log(10.0)))
    return 16 * int(math.ceil(dps / 16))


def _series_mp(alpha: float, beta: float, x: np.ndarray, lmax: float, nterms: int) -> np.ndarray:
    """High-precision Horner sums at the points ``-x``; ``lmax``/``nterms`` cover the largest."""
    dps = _mp_dps(lmax)
    # round the term count up so nearby calls share a coefficient table
    nterms = 64 * int(math.ceil(nterms / 64))
    coeffs = _mp_coefficients(alpha, beta, dps, nterms)[:nterms]
    out = np.empty(len(x))
    with mpmath.workdps(dps):
        for i, xi in enumerate(x):
            z = -mpmath.mpf(float(xi))
            acc = mpmath.mpf(0)
            for c in reversed(coeffs):
                acc = acc * z + c
            out[i] = float(acc)
    return out


# natural log of the largest series term summed in double-double arithmetic
_DD_MAX_LOG = 30.0
_SPLIT = 134217729.0  # 2^27 + 1


def _log_peak(alpha: float, beta: float, x: float) -> float:
    """Log of the largest series term at ``-x`` (a lower bound once the scan is capped)."""
    if x == 0.0:
        return 0.0
    kmax = int(min(_MAX_TERMS, 4.0 * x ** (1.0 / alpha) / alpha + 200.0))
    return float(np.max(_log_terms(alpha, beta, x, kmax)))


@lru_cache(maxsize=256)
def _tier_bounds(alpha: float, beta: float) -> tuple[float, float]:
    """``x`` beyond which the peak term exceeds the double / double-double budgets.

    The peak term is increasing in ``x``, so each bound is found by bisection.
    """
    out = []
    for level in (math.log(_DOUBLE_MAX_TERM), _DD_MAX_LOG):
        lo, hi = 0.0, 1.0
        while _log_peak(alpha, beta, hi) <= level:
            lo, hi = hi, 2.0 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _log_peak(alpha, beta, mid) <= level:
                lo = mid
            else:
                hi = mid
        out.append(lo)
    return out[0], out[1]


@lru_cache(maxsize=64)
def _dd_coefficients(alpha: float, beta: float, nterms: int) -> tuple[np.ndarray, np.ndarray]:
    with mpmath.workdps(40):
        a, b = mpmath.mpf(alpha), mpmath.mpf(beta)
        exact = [mpmath.rgamma(a * k + b) for k in range(nterms)]
        hi = np.array([float(c) for c in exact])
        lo = np.array([float(c - mpmath.mpf(float(c))) for c in exact])
    return hi, lo


def _split(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def _horner_dd(chi: np.ndarray, clo: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Double-double Horner scheme; ``z`` is exact in double precision."""
    zh, zl = _split(z)
    hi = np.zeros_like(z)
    lo = np.zeros_like(z)
    for ch, cl in zip(chi[::-1], clo[::-1]):
        # (hi + lo) * z, error-free product of hi and z
        p = hi * z
        ah, al = _split(hi)
        perr = ((ah * zh - p) + ah * zl + al * zh) + al * zl
        plo = lo * z + perr
        # + (ch + cl), error-free sum of p and ch
        s_ = p + ch
        bb = s_ - p
        serr = (p - (s_ - bb)) + (ch - bb)
        tlo = serr + plo + cl
        hi = s_ + tlo
        lo = tlo - (hi - s_)
    return hi + lo


def ml_series(alpha: float, beta: float, z) -> np.ndarray | float:
    """Taylor-series evaluation of ``E_{alpha,beta}(z)`` for ``z <= 0``.

    Points are summed in double precision while the largest term stays below
    ``_DOUBLE_MAX_TERM``, in vectorized double-double arithmetic while it stays
    below ``exp(_DD_MAX_LOG)``, and with :mod:`mpmath` beyond that.
    """
    _check_params(alpha, beta)
    zz = np.asarray(z, dtype=float)
    scalar = zz.ndim == 0
    x = -np.atleast_1d(zz).ravel()
    if np.any(x < 0.0) or not np.all(np.isfinite(x)):
        raise DomainError("Mittag-Leffler evaluation is limited to finite z <= 0")

    out = np.empty_like(x)
    x_dbl, x_dd = _tier_bounds(float(alpha), float(beta))
    tier = np.where(x <= x_dbl, 0, np.where(x <= x_dd, 1, 2))

    sel = tier == 0
    if np.any(sel):
        n = _term_budget(alpha, beta, float(x[sel].max()))[1]
        coeffs = rgamma(alpha * np.arange(n, dtype=float) + beta)
        zc = -x[sel]
        acc = np.zeros_like(zc)
        for c in coeffs[::-1]:
            acc = acc * zc + c
        out[sel] = acc
    sel = tier == 1
    if np.any(sel):
        n = _term_budget(alpha, beta, float(x[sel].max()))[1]
        n = 64 * int(math.ceil(n / 64))
        chi, clo = _dd_coefficients(float(alpha), float(beta), n)
        out[sel] = _horner_dd(chi, clo, -x[sel])
    sel = tier == 2
    if np.any(sel):
        lmax, n = _term_budget(alpha, beta, float(x[sel].max()))
        out[sel] = _series_mp(float(alpha), float(beta), x[sel], lmax, n)

    out = out.reshape(np.shape(zz)) if not scalar else out
    return float(out[0]) if scalar else out


# }}}


# {{{ integral representation


def _tanh_sinh_nodes(h: float, umax: float) -> np.ndarray:
    n = int(math.ceil(umax / h))
    return h * np.arange(-n, n + 1, dtype=float)


def _density_factor(alpha: float, beta: float, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    # (r^a sin(pi b) + x sin(pi(b-a))) / |r^a e^{i pi a} + x|^2, written to avoid cancellation
    ra = r**alpha
    num = ra * math.sin(math.pi * beta) + x * math.sin(math.pi * (beta - alpha))
    den = (ra + x * math.cos(math.pi * alpha)) ** 2 + (x * math.sin(math.pi * alpha)) ** 2
    return num / den


def _integral_level(alpha: float, beta: float, x: np.ndarray, r0: np.ndarray, h: float) -> np.ndarray:
    p = 1.0 + alpha - beta
    x = x[:, None]
    r0 = r0[:, None]
    log_r0 = np.log(r0)

    # [0, r0]: tanh-sinh, carried in logs near r = 0 where r^(alpha-beta) may blow up
    umax = math.asinh(45.0 / (math.pi * min(p, 1.0)))
    u = _tanh_sinh_nodes(h, umax)[None, :]
    ps = math.pi * np.sinh(u)
    log_sig = -np.logaddexp(0.0, -ps)
    log_1msig = -np.logaddexp(0.0, ps)
    log_r = log_r0 + log_sig
    r = np.exp(log_r)
    # r^(a-b) * dr/du / pi, with dr/du = r0 * pi * cosh(u) * sig * (1 - sig)
    log_w = p * log_r + log_1msig + np.log(np.cosh(u))
    left = np.exp(log_w - r) * _density_factor(alpha, beta, x, r)
    left_sum = h * left.sum(axis=1)

    # [r0, inf): exp-sinh, r = r0 + exp(pi/2 sinh u)
    ulo = -math.asinh(2.0 * 46.0 / math.pi)
    uhi = math.asinh(2.0 * math.log(800.0) / math.pi)
    v = h * np.arange(math.floor(ulo / h), math.ceil(uhi / h) + 1, dtype=float)[None, :]
    s = np.exp(0.5 * math.pi * np.sinh(v))
    r = r0 + s
    w = 0.5 * np.cosh(v) * s * np.exp(-r) * r ** (alpha - beta)
    right_sum = h * (w * _density_factor(alpha, beta, x, r)).sum(axis=1)

    return left_sum + right_sum


def _integral_chunk(args: tuple[float, float, np.ndarray]) -> np.ndarray:
    alpha, beta, x = args
    r0 = np.clip(x ** (1.0 / alpha), 1e-8, 50.0)
    result = np.full_like(x, np.nan)
    prev = None
    todo = np.arange(x.size)
    for level in range(3, 11):
        h = 2.0**-level
        cur = _integral_level(alpha, beta, x[todo], r0[todo], h)
        if prev is not None:
            diff = np.abs(cur - prev)
            done = diff <= 1e-15 + 1e-14 * np.abs(cur)
            result[todo[done]] = cur[done]
            todo = todo[~done]
            cur = cur[~done]
            if todo.size == 0:
                return result
        prev = cur
    raise NumericalFailure(
        f"Mittag-Leffler quadrature did not converge for alpha={alpha}, beta={beta} "
        f"at {todo.size} point(s), e.g. z={-x[todo[0]]}"
    )


def _integral_reduced(alpha: float, beta: float, x: np.ndarray) -> np.ndarray:
    # reducing until beta <= 1 keeps the exponent 1 + alpha - beta >= alpha
    if beta > 1.0:
        lower = _integral_reduced(alpha, beta - alpha, x)
        return (lower - rgamma(beta - alpha)) / (-x)
    chunks = [(alpha, beta, x[i : i + _CHUNK]) for i in range(0, x.size, _CHUNK)]
    parts = ordered_map(_integral_chunk, chunks)
    return np.concatenate(parts) if parts else np.empty(0)


def _alpha_one(beta: float, x: np.ndarray) -> np.ndarray:
    # E_{1,1}(z) = e^z; for integer beta = m, E_{1,m}(z) = (e^z - sum_{k<m-1} z^k/k!) / z^(m-1)
    z = -x
    if beta == 1.0:
        return np.exp(z)
    if beta == round(beta):
        m = int(round(beta))
        acc = np.expm1(z)
        term = np.ones_like(z)
        for k in range(1, m - 1):
            term = term * z / k
            acc = acc - term
        return acc / z ** (m - 1)
    return np.array([float(mpmath.hyp1f1(1, beta, zi) * mpmath.rgamma(beta)) for zi in z])


# {{{ algebraic asymptotics

# relative size of the last retained asymptotic term
_ASYM_RTOL = 1e-17
_ASYM_MAX_TERMS = 40


def _asym_log_envelope(alpha: float, beta: float, x: float) -> np.ndarray:
    """Upper bound of ``log |x^-k / Gamma(beta - alpha k)|`` for ``k = 1.._ASYM_MAX_TERMS``.

    For ``y <= 0``, ``|1/Gamma(y)| = Gamma(1-y) |sin(pi y)| / pi <= Gamma(1-y) / pi``;
    bounding by the envelope keeps accidental near-zeros of ``1/Gamma`` from
    ending the sum early.
    """
    k = np.arange(1, _ASYM_MAX_TERMS + 1, dtype=float)
    arg = beta - alpha * k
    pos = arg > 0
    lg = np.where(pos, -gammaln(np.where(pos, arg, 1.0)), gammaln(1.0 - np.minimum(arg, 0.0)) - math.log(math.pi))
    return -k * math.log(x) + lg


def _asym_terms_needed(alpha: float, beta: float, x: float) -> int | None:
    """Number of terms giving relative accuracy ``_ASYM_RTOL`` at ``x``, or None."""
    env = _asym_log_envelope(alpha, beta, x)
    # the size of the result is set by the first coefficient that is not an exact zero
    k = np.arange(1, _ASYM_MAX_TERMS + 1, dtype=float)
    arg = beta - alpha * k
    nonzero = np.nonzero(~((arg <= 0) & (arg == np.round(arg))))[0]
    if nonzero.size == 0:
        return None
    j = int(nonzero[0])
    lead = -(j + 1) * math.log(x) - float(gammaln(arg[j])) if arg[j] > 0 else None
    if lead is None:
        # leading coefficient 1/Gamma(y) with y < 0: use its exact magnitude
        lead = -(j + 1) * math.log(x) + math.log(abs(1.0 / math.gamma(arg[j])))
    target = lead + math.log(_ASYM_RTOL)
    # the neglected remainder also carries a piece of size ~ exp(-x^(1/alpha))
    remainder = -x ** (1.0 / alpha) - 2.0 * math.log(math.sin(math.pi * alpha))
    if remainder > target:
        return None
    for m in range(j + 1, env.size):
        if env[m] > env[m - 1] + 1e-12:
            return None  # the envelope grows before the target is reached
        if env[m] <= target:
            return m  # keep terms 1..m; term m+1 is below the target
    return None


@lru_cache(maxsize=256)
def _asym_switch(alpha: float, beta: float) -> tuple[float, int]:
    """Smallest ``x`` (to a factor 2^(1/8)) where the expansion is usable, and its term count."""
    x = 1.0
    while _asym_terms_needed(alpha, beta, x) is None:
        x *= 2.0 ** 0.125
        if x > 1e12:
            return math.inf, 0
    return x, _asym_terms_needed(alpha, beta, x)


def ml_asymptotic(alpha: float, beta: float, z) -> np.ndarray:
    """Algebraic expansion ``E(-x) = sum_k (-1)^(k+1) x^-k / Gamma(beta - alpha k)`` for large ``x``."""
    _check_params(alpha, beta)
    if alpha >= 1.0:
        raise DomainError("the algebraic expansion needs alpha < 1")
    x = -np.atleast_1d(np.asarray(z, dtype=float))
    x0, nterms = _asym_switch(float(alpha), float(beta))
    if np.any(x < x0):
        raise DomainError(f"algebraic expansion is only used for |z| >= {x0:.6g}")
    k = np.arange(1, nterms + 1, dtype=float)
    coeffs = rgamma(beta - alpha * k) * (-1.0) ** (k + 1)
    u = 1.0 / x
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = (acc + c) * u
    return acc


# }}}


def ml_integral(alpha: float, beta: float, z) -> np.ndarray | float:
    """Large-argument evaluation of ``E_{alpha,beta}(z)`` for ``z < 0``.

    For ``alpha < 1`` this is the quadrature of the spectral-density
    representation; for ``alpha = 1`` closed forms in ``exp`` are used.
    """
    _check_params(alpha, beta)
    zz = np.asarray(z, dtype=float)
    scalar = zz.ndim == 0
    x = -np.atleast_1d(zz).ravel()
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise DomainError("the integral representation needs finite z < 0")
    if alpha == 1.0:
        out = _alpha_one(beta, x)
    else:
        out = _integral_reduced(alpha, beta, x)
    if scalar:
        return float(out[0])
    return out.reshape(zz.shape)


# }}}


def mittag_leffler(alpha: float, beta: float, z) -> np.ndarray | float:
    """Evaluate ``E_{alpha,beta}(z)`` for real ``z <= 0`` (scalar or array)."""
    _check_params(alpha, beta)
    zz = np.asarray(z, dtype=float)
    scalar = zz.ndim == 0
    flat = np.atleast_1d(zz).ravel()
    if not np.all(np.isfinite(flat)):
        raise DomainError("Mittag-Leffler argument must be finite")
    if np.any(flat > 0.0):
        raise DomainError("Mittag-Leffler evaluation is limited to z <= 0")

    x = -flat
    out = np.empty_like(x)
    small = x <= series_switch(alpha)
    if np.any(small):
        out[small] = ml_series(alpha, beta, -x[small])
    if alpha < 1.0:
        x_asym = _asym_switch(float(alpha), float(beta))[0]
        far = ~small & (x >= x_asym)
        if np.any(far):
            out[far] = ml_asymptotic(alpha, beta, -x[far])
    else:
        far = np.zeros_like(small)
    mid = ~small & ~far
    if np.any(mid):
        out[mid] = ml_integral(alpha, beta, -x[mid])

    if scalar:
        return float(out[0])
    return out.reshape(zz.shape)


def ml_eval(p: MLParams, z: float) -> float:
    """Scalar ``E_{p.alpha, p.beta}(z)`` for ``z <= 0``."""
    return float(mittag_leffler(p.alpha, p.beta, float(z)))


def ml_scaled(alpha: float, index: float, lam, t):
    """``t^(index-1) * E_{alpha,index}(-lam * t^alpha)`` for ``t > 0``.

    ``lam`` and ``t`` broadcast against each other.  With ``index = alpha``
    this is the relaxation kernel; ``index = alpha + 1`` and ``alpha + 2`` give
    its first and second antiderivatives.
    """
    lam_arr, t_arr = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(t, dtype=float))
    if np.any(t_arr <= 0.0):
        raise DomainError("kernel evaluation requires t > 0")
    if np.any(lam_arr < 0.0):
        raise DomainError("kernel evaluation requires lambda >= 0")
    values = mittag_leffler(alpha, index, -lam_arr * t_arr**alpha)
    out = t_arr ** (index - 1.0) * values
    return float(out) if out.ndim == 0 else out


def ml_kernel(alpha: float, lam, t):
    """Relaxation kernel ``t^(alpha-1) E_{alpha,alpha}(-lam t^alpha)``, nonnegative for ``t > 0``."""
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"kernel order must lie in (0, 1], got {alpha!r}")
    return ml_scaled(alpha, alpha, lam, t)


def ml_asymptotic_leading(alpha: float, rho, t):
    """Leading large-time term ``1 / (Gamma(1-alpha) rho t^alpha)`` of ``E_{alpha,1}(-rho t^alpha)``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    rho_arr, t_arr = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(t, dtype=float))
    if np.any(rho_arr <= 0.0) or np.any(t_arr <= 0.0):
        raise DomainError("rho and t must be positive")
    out = 1.0 / (gamma(1.0 - alpha) * rho_arr * t_arr**alpha)
    return float(out) if out.ndim == 0 else out
