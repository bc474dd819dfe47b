"""Cancellation-free differences of elementary functions and a bisection root finder.

The implicit time relations all vanish like x**3 at the singular end, where
the naive expressions lose every significant digit.
"""

from __future__ import annotations

import math

from .errors import RootNotBracketed

_SERIES_CUTOFF = 1e-2


def x_minus_arctan(x: float) -> float:
    """x - arctan(x)."""
    if abs(x) < _SERIES_CUTOFF:
        x2 = x * x
        return x * x2 * (1 / 3 - x2 * (1 / 5 - x2 * (1 / 7 - x2 * (1 / 9 - x2 / 11))))
    return x - math.atan(x)


def artanh_minus_x(x: float) -> float:
    """artanh(x) - x for |x| < 1."""
    if abs(x) < _SERIES_CUTOFF:
        x2 = x * x
        return x * x2 * (1 / 3 + x2 * (1 / 5 + x2 * (1 / 7 + x2 * (1 / 9 + x2 / 11))))
    return math.atanh(x) - x


def x_minus_asinh(x: float) -> float:
    """x - asinh(x)."""
    if abs(x) < _SERIES_CUTOFF:
        x2 = x * x
        # asinh x = x - x^3/6 + 3x^5/40 - 15x^7/336 + 105x^9/3456
        return x * x2 * (1 / 6 - x2 * (3 / 40 - x2 * (15 / 336 - x2 * 105 / 3456)))
    return x - math.asinh(x)


def x_minus_sin(x: float) -> float:
    """x - sin(x)."""
    if abs(x) < _SERIES_CUTOFF:
        x2 = x * x
        return x * x2 * (1 / 6 - x2 * (1 / 120 - x2 * (1 / 5040 - x2 / 362880)))
    return x - math.sin(x)


def bisect(f, lo: float, hi: float, xtol: float = 1e-13, maxiter: int = 400) -> float:
    """Root of ``f`` on ``[lo, hi]`` by bisection.

    Stops once the bracket is narrower than ``xtol`` (absolute) or can no
    longer be split in floating point.

    Raises
    ------
    RootNotBracketed
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise RootNotBracketed(f"no sign change on [{lo!r}, {hi!r}]: f = ({flo!r}, {fhi!r})")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)
