"""Romberg quadrature (trapezoid + Richardson extrapolation).

This is the independent numerical oracle used to validate the closed forms.
Integrands with kinks are split at caller-supplied breakpoints so each panel
is smooth and the extrapolation converges quickly.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from .exceptions import QuadratureFailure

DEFAULT_TOL = 1e-8


def romberg(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    max_levels: int = 18,
    min_levels: int = 3,
) -> float:
    """Integrate a vectorised ``f`` over [a, b].

    Refines until two successive diagonal Richardson estimates differ by less
    than ``tol`` (absolute). Raises :class:`QuadratureFailure` otherwise.
    """
    if b == a:
        return 0.0
    h = b - a
    # endpoint samples are one-sided limits so jumps at panel edges are harmless
    d = 1e-13 * h
    ends = f(np.array([a + d, b - d]))
    R = [[0.5 * h * float(ends[0] + ends[1])]]
    n = 1
    for i in range(1, max_levels):
        h *= 0.5
        mids = a + h * (2 * np.arange(n) + 1)
        n *= 2
        row = [0.5 * R[-1][0] + h * float(np.sum(f(mids)))]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - R[-1][j - 1]) / (4**j - 1))
        if i >= min_levels and abs(row[-1] - R[-1][-1]) < tol:
            return row[-1]
        R.append(row)
    raise QuadratureFailure(
        f"romberg on [{a}, {b}] did not reach tol={tol} in {max_levels} levels "
        f"(last change {abs(R[-1][-1] - R[-2][-1]):.3e})"
    )


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Optional[Iterable[float]] = None,
    tol: float = DEFAULT_TOL,
) -> float:
    """Romberg over the panels of [a, b] cut at ``breakpoints``."""
    if b < a:
        return -integrate(f, b, a, breakpoints, tol)
    pts = [a, b]
    if breakpoints is not None:
        pts += [p for p in breakpoints if a < p < b]
    pts = np.unique(np.asarray(pts, dtype=float))
    panels = [(lo, hi) for lo, hi in zip(pts[:-1], pts[1:]) if hi - lo > 1e-15]
    if not panels:
        return 0.0
    panel_tol = tol / len(panels)
    return float(sum(romberg(f, lo, hi, tol=panel_tol) for lo, hi in panels))


def integrate2(
    g: Callable[[float, np.ndarray], np.ndarray],
    outer: tuple[float, float],
    inner: Callable[[float], tuple[float, float]],
    outer_breaks: Optional[Iterable[float]] = None,
    inner_breaks: Optional[Callable[[float], Iterable[float]]] = None,
    tol: float = DEFAULT_TOL,
) -> float:
    """Nested Romberg of ``int_outer int_inner(x) g(x, y) dy dx``."""
    outer_breaks = list(outer_breaks) if outer_breaks is not None else None

    def F(xs: np.ndarray) -> np.ndarray:
        out = np.empty(len(xs))
        for k, x in enumerate(xs):
            lo, hi = inner(x)
            bk = inner_breaks(x) if inner_breaks is not None else None
            out[k] = integrate(lambda y: g(x, y), lo, hi, bk, tol=tol * 1e-2)
        return out

    return integrate(F, outer[0], outer[1], outer_breaks, tol=tol)
