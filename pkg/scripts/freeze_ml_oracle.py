"""Print high-precision Mittag-Leffler reference values for the test suite.

Sums the power series in mpmath with enough working digits to absorb the
cancellation (the largest term is about exp(|z|^(1/alpha))).  The output is
pasted into tests/test_mittag_leffler.py; rerun only to extend the table.
"""

from __future__ import annotations

import mpmath

CASES = [
    (0.5, 1.0, -1.0),
    (0.5, 0.5, -1.0),
    (0.5, 1.0, -3.0),
    (0.3, 1.0, -2.0),
    (0.3, 0.3, -4.0),
    (0.7, 0.7, -10.0),
    (0.8, 1.0, -25.0),
    (0.25, 1.0, -8.0),
    (0.9, 1.75, -40.0),
    (0.5, 1.25, -30.0),
    (0.6, 0.6, -12.0),
    (0.1, 1.0, -1.5),
]


def ml_mp(alpha, beta, z, digits=50):
    x = abs(z)
    lead = x ** (1.0 / alpha)  # log of the peak term, roughly
    dps = digits + int(lead / 2.3) + 10
    with mpmath.workdps(dps):
        a, b, zz = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
        total = mpmath.mpf(0)
        k = 0
        while True:
            term = zz**k * mpmath.rgamma(a * k + b)
            total += term
            if k > 200 and abs(term) < mpmath.mpf(10) ** (-digits - 5) * max(abs(total), mpmath.mpf(10) ** -300):
                break
            k += 1
        return mpmath.nstr(total, 20)


def erfcx_mp(x, digits=30):
    """``E_{1/2,1}(-x) = exp(x^2) erfc(x)``, independent of the series."""
    with mpmath.workdps(digits):
        return mpmath.nstr(mpmath.exp(mpmath.mpf(x) ** 2) * mpmath.erfc(x), 20)


if __name__ == "__main__":
    for a, b, z in CASES:
        print(f"    ({a}, {b}, {z}, {ml_mp(a, b, z)}),")
    for x in (1.0, 10.0, 100.0, 1e4):
        print(f"    ({x}, {erfcx_mp(x)}),")
