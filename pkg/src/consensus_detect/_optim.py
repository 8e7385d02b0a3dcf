"""Scalar root finding and unimodal optimization used throughout the package."""

from __future__ import annotations

import math
from typing import Callable

from scipy.optimize import brentq

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NumericError(RuntimeError):
    """An iterative numerical routine failed to converge or to bracket."""


def golden_max(f: Callable[[float], float], lo: float, hi: float,
               tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal function on ``[lo, hi]``.

    Returns ``(argmax, max)``. The endpoints are evaluated too, so a maximum
    sitting on the boundary of the interval is returned exactly.
    """
    a, b = float(lo), float(hi)
    if b < a:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        if it >= max_iter:
            raise NumericError(
                f"golden-section did not converge in {max_iter} iterations "
                f"(bracket [{a:.3e}, {b:.3e}], width {b - a:.3e})")
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        it += 1
    candidates = [(fc, c), (fd, d), (f(lo), float(lo)), (f(hi), float(hi))]
    best_f, best_x = max(candidates)
    return best_x, best_f


def newton_min(f: Callable[[float], float],
               derivs: Callable[[float], tuple[float, float]],
               lo: float, hi: float, x0: float,
               tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Minimize a strictly convex function on ``[lo, hi]`` with damped Newton.

    Each step uses the direction ``-f'/f''``. When a step leaves the interval
    or does not decrease ``f`` the search falls back to golden section.
    """
    x = min(max(x0, lo), hi)
    fx = f(x)
    for _ in range(max_iter):
        g, h = derivs(x)
        if not (h > 0.0 and math.isfinite(g) and math.isfinite(h)):
            break
        step = -g / h
        x_new = x + step
        if x_new < lo or x_new > hi:
            # minimizer on the boundary, or a wild step; let golden decide
            break
        f_new = f(x_new)
        if f_new > fx + 1e-15 * max(1.0, abs(fx)):
            break
        x, fx = x_new, f_new
        if abs(step) <= tol:
            return x, fx
    xm, negf = golden_max(lambda t: -f(t), lo, hi, tol=tol, max_iter=max_iter)
    return xm, -negf


def find_root(f: Callable[[float], float], lo: float, hi: float,
              xtol: float = 1e-12) -> float:
    """Root of ``f`` on a sign-changing bracket ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NumericError(f"no sign change on [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    return brentq(f, lo, hi, xtol=xtol, rtol=1e-15, maxiter=500)


def expand_bracket(f: Callable[[float], float], start: float, cap: float,
                   sign: int = 1) -> float | None:
    """Grow ``[0, start]`` geometrically (by doubling) until ``f`` turns positive.

    Works on the negative half-line when ``sign=-1``. Returns the right (or
    left) endpoint, or ``None`` when ``|x|`` exceeds ``cap`` first.
    """
    x = float(start)
    while x <= cap:
        if f(sign * x) > 0.0:
            return sign * x
        x *= 2.0
    return None
