"""Improper integrals over [a, +inf) with a fitted power-law tail.

The integral is accumulated decade by decade in the logarithmic variable
``s = exp(y)``.  After each decade the decay exponent ``q`` of the
integrand (``g(s) ~ s**-q``) is fitted by least squares over the last two
decades and used both to estimate the remaining tail ``g(R) R / (q - 1)``
and to detect divergence (``q <= 1``).  The fitted tail is accepted once
its error, gauged by the drift of q between consecutive windows, falls
below the tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = ["TailIntegral", "integrate_to_infinity", "loglog_slope"]


@dataclass(frozen=True)
class TailIntegral:
    value: float
    finite: bool
    exponent: float
    tail: float
    radius: float
    converged: bool = True


def loglog_slope(g, lo: float, hi: float, n: int = 41) -> float:
    """Least-squares slope of log|g| against log s on [lo, hi]."""
    s = np.geomspace(lo, hi, n)
    vals = np.array([abs(g(x)) for x in s])
    ok = np.isfinite(vals) & (vals > 0)
    if ok.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(s[ok]), np.log(vals[ok]), 1)[0])


def _decade(g, lo: float, hi: float, rtol: float) -> float:
    # oscillatory integrands may exhaust the subdivision limit long after
    # the contribution has become negligible; the tail fit guards accuracy
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(
            lambda y: g(math.exp(y)) * math.exp(y),
            math.log(lo),
            math.log(hi),
            epsabs=0.0,
            epsrel=max(rtol, 1e-13),
            limit=1000,
        )
    return val


def integrate_to_infinity(
    g,
    a: float,
    rtol: float = 1e-10,
    max_decades: int = 60,
    divergence_margin: float = 0.01,
    min_decades: int = 3,
) -> TailIntegral:
    """Integrate ``g`` over ``[a, +inf)`` for a positive, eventually power-like ``g``.

    Returns a :class:`TailIntegral`; ``finite`` is False when the fitted decay
    exponent stays at or below ``1 + divergence_margin`` over two consecutive
    two-decade windows.  When ``max_decades`` is exhausted without the tail
    estimate dropping below ``rtol`` the value (with tail correction) is
    returned with ``converged=False``.
    """
    if not a > 0:
        raise ValueError("lower limit must be positive")
    total = 0.0
    lo = a
    slow_windows = 0
    q = q_prev = float("nan")
    tail = float("inf")
    for k in range(1, max_decades + 1):
        hi = lo * 10.0
        if not np.isfinite(g(hi)):
            break
        total += _decade(g, lo, hi, rtol * 1e-2)
        lo = hi
        if k < 2:
            continue
        q = -loglog_slope(g, lo / 100.0, lo)
        if not np.isfinite(q):
            break
        if q <= 1.0 + divergence_margin:
            slow_windows += 1
            if k >= min_decades and slow_windows >= 2:
                return TailIntegral(float("inf"), False, q, float("inf"), lo, True)
            continue
        slow_windows = 0
        tail = g(lo) * lo / (q - 1.0)
        # error of the fitted tail: its size times the drift of the exponent
        err = abs(tail) * (abs(q - q_prev) / (q - 1.0) if np.isfinite(q_prev) else 1.0)
        q_prev = q
        if k >= min_decades and err <= rtol * abs(total + tail):
            return TailIntegral(total + tail, True, q, tail, lo, True)
    if np.isfinite(q) and q > 1.0 + divergence_margin:
        tail = g(lo) * lo / (q - 1.0)
        return TailIntegral(total + tail, True, q, tail, lo, False)
    return TailIntegral(float("inf"), False, q, float("inf"), lo, False)
