"""Normal distribution helpers: erf/erfc, the standard normal CDF and Wald p-values.

``erf`` uses the series ``2/sqrt(pi) * exp(-x^2) * sum 2^n x^(2n+1) / (2n+1)!!``
for |x| < 3; ``erfc`` uses the Laplace continued fraction, evaluated with
the modified Lentz method, for |x| >= 1 so that small tail values keep
their relative precision.
"""

from __future__ import annotations

import math

_SERIES_LIMIT = 3.0
_FRACTION_LIMIT = 1.0
_TINY = 1e-300


def _erf_series(x: float) -> float:
    term = x
    total = x
    x2 = x * x
    n = 0
    while abs(term) > 1e-17 * abs(total):
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return 2.0 / math.sqrt(math.pi) * math.exp(-x2) * total


def _erfc_fraction(x: float) -> float:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))) for x > 0
    f = x
    c = x
    d = 0.0
    for n in range(1, 500):
        a = n / 2.0
        d = x + a * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = x + a / c
        if abs(c) < _TINY:
            c = _TINY
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x * x) / (math.sqrt(math.pi) * f)


def erf(x: float) -> float:
    if abs(x) < _SERIES_LIMIT:
        return _erf_series(x)
    return math.copysign(1.0 - _erfc_fraction(abs(x)), x)


def erfc(x: float) -> float:
    if x >= _FRACTION_LIMIT:
        return _erfc_fraction(x)
    if x <= -_FRACTION_LIMIT:
        return 2.0 - _erfc_fraction(-x)
    return 1.0 - _erf_series(x)


def norm_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * erfc(-z / math.sqrt(2.0))


def wald_p_value(z: float) -> float:
    """Two-sided p-value 2 * (1 - Phi(|z|)), computed without cancellation."""
    if math.isnan(z):
        return float("nan")
    return erfc(abs(z) / math.sqrt(2.0))
