"""Composite Simpson quadrature with nested doubling, and positive-part integrals."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import bisect

from .errors import ToleranceError

QUAD_RTOL = 1e-8
# absolute floor for integrals that cancel, as a fraction of the integral of |f|
QUAD_ATOL_L1 = 1e-12
MAX_DOUBLINGS = 10
ROOT_XTOL_REL = 1e-10

Integrand = Callable[[np.ndarray], np.ndarray]


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


def simpson_refined(f: Integrand, a: float, b: float, n_points: int,
                    rtol: float = QUAD_RTOL, atol_l1: float = QUAD_ATOL_L1,
                    atol: float = 0.0) -> float:
    """Integrate a vectorised ``f`` from a to b (b < a allowed).

    Starts from a uniform grid of ``n_points`` nodes (bumped to odd) and doubles
    it, reusing previous nodes, until two successive Simpson sums agree to
    ``rtol`` relative, ``atol_l1`` times the integral of |f|, or ``atol``
    absolute, whichever is loosest. The returned
    value is the Richardson combination of the last two sums.
    """
    if a == b:
        return 0.0
    n = max(_odd(n_points), 3)
    x = np.linspace(a, b, n)
    y = np.asarray(f(x), dtype=float)
    previous = simpson(y, dx=(b - a) / (n - 1))
    history = [previous]
    for _ in range(MAX_DOUBLINGS):
        n = 2 * n - 1
        x = np.linspace(a, b, n)
        refined = np.empty(n)
        refined[::2] = y
        refined[1::2] = f(x[1::2])
        y = refined
        dx = (b - a) / (n - 1)
        current = simpson(y, dx=dx)
        history.append(current)
        l1 = abs(simpson(np.abs(y), dx=dx))
        if abs(current - previous) <= max(rtol * abs(current), atol_l1 * l1, atol):
            return float(current + (current - previous) / 15.0)
        previous = current
    raise ToleranceError(
        f"Simpson refinement did not converge on [{a:.6g}, {b:.6g}]",
        {"nodes": n, "last_estimates": history[-3:], "rtol": rtol})


def sign_changes(f: Integrand, a: float, b: float, n_scan: int) -> list[float]:
    """Roots of ``f`` on [a, b] (a < b) bracketed on a scan grid and bisected."""
    x = np.linspace(a, b, max(n_scan, 3))
    y = np.asarray(f(x), dtype=float)
    positive = y > 0
    roots = []
    xtol = ROOT_XTOL_REL * (b - a)

    def scalar(t):
        return float(f(np.array([t]))[0])

    for i in np.nonzero(positive[:-1] != positive[1:])[0]:
        lo, hi = x[i], x[i + 1]
        flo, fhi = scalar(lo), scalar(hi)
        if flo == 0.0 or fhi == 0.0 or (flo > 0) == (fhi > 0):
            roots.append(float(lo if flo == 0.0 else hi))
            continue
        roots.append(float(bisect(scalar, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)))
    return roots


def positive_part_integral(f: Integrand, a: float, b: float, n_points: int,
                           rtol: float = QUAD_RTOL) -> float:
    """Integral of max(f, 0) over [a, b] with a < b.

    Sign changes are located first so each piece is integrated as a smooth
    function; pieces where f is negative contribute nothing.
    """
    if a == b:
        return 0.0
    if b < a:
        raise ValueError("positive_part_integral expects a < b")
    edges = [a, *sign_changes(f, a, b, n_points), b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        if float(f(np.array([mid]))[0]) <= 0.0:
            continue
        n_seg = max(5, math.ceil(n_points * (hi - lo) / (b - a)))
        total += simpson_refined(f, lo, hi, n_seg, rtol=rtol)
    return total
