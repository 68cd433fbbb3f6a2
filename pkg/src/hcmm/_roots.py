"""Scalar root bracketing and bisection."""

import math


class RootFindingError(RuntimeError):
    pass


def expand_bracket(f, lo, width, max_doublings=200):
    """Grow ``[lo, lo + width]`` until ``f`` changes sign.

    ``f(lo)`` must be strictly negative. Returns the upper end.
    """
    if not f(lo) < 0:
        raise RootFindingError(f"f({lo!r}) must be negative to start the bracket")
    for _ in range(max_doublings):
        hi = lo + width
        if f(hi) >= 0:
            return hi
        width *= 2.0
    raise RootFindingError("no sign change found while expanding the bracket")


def bisect(f, lo, hi, xtol=1e-12, maxiter=2000):
    """Bisection for ``f(lo) < 0 <= f(hi)``.

    Runs until the bracket is narrower than ``xtol`` *and* a few ulps of the
    midpoint, so roots with tiny magnitude are still resolved to full
    relative precision.
    """
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 <= fhi):
        raise RootFindingError(f"root not bracketed: f(lo)={flo!r}, f(hi)={fhi!r}")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if fmid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= min(xtol, 4.0 * math.ulp(mid)):
            break
    return 0.5 * (lo + hi)
