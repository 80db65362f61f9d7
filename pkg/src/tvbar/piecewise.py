"""Exact piecewise-polynomial arithmetic on the real line.

Functions are stored as knots ``x_0 < ... < x_n`` with one polynomial per
interval, written in ascending powers of the *local* variable ``x - x_i``.
They vanish left of ``x_0``; right of ``x_n`` they follow an optional ``tail``
polynomial in ``x - x_n`` (zero for compactly supported functions, nonzero for
antiderivatives).

Convolution with a continuous piecewise-linear kernel is done exactly through
the second antiderivative: if the kernel's slope jumps by ``c_j`` at ``k_j``
then ``phi * f = sum_j c_j F2(. - k_j)`` with ``F2'' = f``.
"""
from __future__ import annotations

from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

KNOT_MERGE = 1e-14


def taylor_shift(c: np.ndarray, d: float) -> np.ndarray:
    """Coefficients of ``s -> p(s + d)`` for ascending coefficients ``c``."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    if d == 0.0 or n <= 1:
        return c.copy()
    out = np.zeros(n)
    dp = d ** np.arange(n)
    for j in range(n):
        for k in range(j + 1):
            out[k] += c[j] * comb(j, k) * dp[j - k]
    return out


def _poly_integral(c: np.ndarray, length: float) -> float:
    k = np.arange(1, len(c) + 1)
    return float(np.sum(c * length**k / k))


def _merge_knots(knots: Iterable[float]) -> np.ndarray:
    k = np.unique(np.asarray(list(knots), dtype=float))
    if len(k) < 2:
        return k
    keep = [k[0]]
    for v in k[1:]:
        if v - keep[-1] > KNOT_MERGE * max(1.0, abs(v)):
            keep.append(v)
    return np.asarray(keep)


class PiecewisePoly:
    """Piecewise polynomial, zero to the left of its first knot."""

    def __init__(
        self,
        knots: Sequence[float],
        coeffs,
        tail: Optional[Sequence[float]] = None,
        provenance: str = "",
    ):
        self.knots = np.asarray(knots, dtype=float)
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if len(self.knots) < 2:
            raise ValueError("need at least two knots")
        if coeffs.shape[0] != len(self.knots) - 1:
            raise ValueError(
                f"{len(self.knots) - 1} intervals but {coeffs.shape[0]} coefficient rows"
            )
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        self.coeffs = coeffs
        self.tail = np.zeros(1) if tail is None else np.asarray(tail, dtype=float)
        self.provenance = provenance

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, lo: float = 0.0, hi: float = 1.0) -> "PiecewisePoly":
        return cls([lo, hi], [[0.0]])

    @classmethod
    def from_barcode(cls, code, provenance: str = "") -> "PiecewisePoly":
        """Piecewise-constant indicator of a bar code."""
        t = list(code.interfaces)
        if not t:
            return cls.zero()
        vals = [[1.0] if i % 2 == 0 else [0.0] for i in range(len(t) - 1)]
        return cls(t, vals, provenance=provenance or "barcode")

    @classmethod
    def hat(cls, sigma: float) -> "PiecewisePoly":
        """The hat kernel ``(1 - |x|/sigma)/sigma`` on [-sigma, sigma]."""
        s2 = sigma * sigma
        return cls(
            [-sigma, 0.0, sigma],
            [[0.0, 1.0 / s2], [1.0 / sigma, -1.0 / s2]],
            provenance=f"hat(sigma={sigma!r})",
        )

    # basic properties ---------------------------------------------------
    @property
    def degree(self) -> int:
        return max(self.coeffs.shape[1], len(self.tail)) - 1

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def compact(self) -> bool:
        return not np.any(self.tail)

    def __repr__(self) -> str:
        return (
            f"PiecewisePoly(pieces={len(self.coeffs)}, degree={self.degree}, "
            f"support={self.support})"
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        n = len(self.coeffs)
        idx = np.searchsorted(self.knots, x, side="right") - 1
        idx[x == self.knots[-1]] = n - 1
        inside = (idx >= 0) & (idx < n)
        if np.any(inside):
            ii = idx[inside]
            s = x[inside] - self.knots[ii]
            c = self.coeffs[ii]
            acc = np.zeros_like(s)
            for k in range(c.shape[1] - 1, -1, -1):
                acc = acc * s + c[:, k]
            out[inside] = acc
        right = idx >= n
        if np.any(right) and np.any(self.tail):
            out[right] = P.polyval(x[right] - self.knots[-1], self.tail)
        return float(out[0]) if scalar else out

    # re-expression ------------------------------------------------------
    def local_coeffs(self, lo: float, hi: float, shift: float = 0.0) -> np.ndarray:
        """Ascending coefficients of ``s -> self(lo + shift + s)`` on [0, hi - lo].

        The shifted interval must not straddle a knot; the piece is chosen by
        the midpoint so that ulp-level knot mismatches are harmless.
        """
        mid = 0.5 * (lo + hi) + shift
        start = lo + shift
        if mid < self.knots[0]:
            return np.zeros(1)
        if mid > self.knots[-1]:
            return taylor_shift(self.tail, start - self.knots[-1])
        i = int(np.searchsorted(self.knots, mid, side="right") - 1)
        i = min(i, len(self.coeffs) - 1)
        return taylor_shift(self.coeffs[i], start - self.knots[i])

    def refine(self, knots: Iterable[float]) -> "PiecewisePoly":
        """Re-express on the union of the current knots and ``knots``."""
        new = _merge_knots(np.concatenate([self.knots, np.asarray(list(knots), float)]))
        d = max(self.coeffs.shape[1], len(self.tail))
        rows = np.zeros((len(new) - 1, d))
        for i, (lo, hi) in enumerate(zip(new[:-1], new[1:])):
            c = self.local_coeffs(lo, hi)
            rows[i, : len(c)] = c
        tail = taylor_shift(self.tail, new[-1] - self.knots[-1]) if np.any(self.tail) else None
        return PiecewisePoly(new, rows, tail=tail, provenance=self.provenance)

    def _aligned(self, other: "PiecewisePoly"):
        knots = np.concatenate([self.knots, other.knots])
        return self.refine(knots), other.refine(knots)

    def trimmed(self, tol: float = 0.0) -> "PiecewisePoly":
        """Drop leading/trailing pieces that are identically zero."""
        if not self.compact:
            return self
        nz = np.flatnonzero(np.any(np.abs(self.coeffs) > tol, axis=1))
        if len(nz) == 0:
            return PiecewisePoly.zero(self.knots[0], self.knots[-1])
        a, b = nz[0], nz[-1]
        return PiecewisePoly(self.knots[a : b + 2], self.coeffs[a : b + 1], provenance=self.provenance)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, PiecewisePoly):
            return NotImplemented
        a, b = self._aligned(other)
        d = max(a.coeffs.shape[1], b.coeffs.shape[1])
        ca = np.pad(a.coeffs, ((0, 0), (0, d - a.coeffs.shape[1])))
        cb = np.pad(b.coeffs, ((0, 0), (0, d - b.coeffs.shape[1])))
        tail = P.polyadd(a.tail, b.tail)
        return PiecewisePoly(a.knots, ca + cb, tail=tail)

    def __neg__(self):
        return PiecewisePoly(self.knots, -self.coeffs, tail=-self.tail, provenance=self.provenance)

    def __sub__(self, other):
        if not isinstance(other, PiecewisePoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PiecewisePoly):
            if not (self.compact or other.compact):
                raise ValueError("product of two non-compact piecewise polynomials")
            a, b = self._aligned(other)
            rows = [P.polymul(ca, cb) for ca, cb in zip(a.coeffs, b.coeffs)]
            d = max(len(r) for r in rows)
            rows = np.array([np.pad(r, (0, d - len(r))) for r in rows])
            return PiecewisePoly(a.knots, rows)
        other = float(other)
        return PiecewisePoly(self.knots, self.coeffs * other, tail=self.tail * other,
                             provenance=self.provenance)

    __rmul__ = __mul__

    # calculus -----------------------------------------------------------
    def integral(self) -> float:
        if not self.compact:
            raise ValueError("integral of a function with a non-zero tail diverges")
        lengths = np.diff(self.knots)
        return float(sum(_poly_integral(c, L) for c, L in zip(self.coeffs, lengths)))

    def antiderivative(self) -> "PiecewisePoly":
        """``F(x) = int_{-inf}^x f``; continuous, with a polynomial tail."""
        if not self.compact:
            raise ValueError("antiderivative only defined for compact support")
        n, d = self.coeffs.shape
        rows = np.zeros((n, d + 1))
        acc = 0.0
        lengths = np.diff(self.knots)
        for i in range(n):
            c = self.coeffs[i]
            rows[i, 1:] = c / np.arange(1, d + 1)
            rows[i, 0] = acc
            acc = float(P.polyval(lengths[i], rows[i]))
        return PiecewisePoly(self.knots, rows, tail=[acc])

    def second_antiderivative_tail(self) -> "PiecewisePoly":
        """``F2`` with ``F2'' = f``, vanishing to the left of the support."""
        F1 = self.antiderivative()
        n, d = F1.coeffs.shape
        rows = np.zeros((n, d + 1))
        acc = 0.0
        lengths = np.diff(F1.knots)
        for i in range(n):
            c = F1.coeffs[i]
            rows[i, 1:] = c / np.arange(1, d + 1)
            rows[i, 0] = acc
            acc = float(P.polyval(lengths[i], rows[i]))
        mass = float(F1.tail[0])
        return PiecewisePoly(F1.knots, rows, tail=[acc, mass])

    def inner(self, other: "PiecewisePoly") -> float:
        return (self * other).integral()

    def norm_sq(self) -> float:
        return self.inner(self)

    def convolve_piecewise_linear(
        self, kernel_knots: Sequence[float], slope_jumps: Sequence[float]
    ) -> "PiecewisePoly":
        """Exact convolution with a continuous, compactly supported,
        piecewise-linear kernel given by its slope jumps."""
        F2 = self.second_antiderivative_tail()
        kk = np.asarray(kernel_knots, dtype=float)
        cj = np.asarray(slope_jumps, dtype=float)
        new = _merge_knots((self.knots[:, None] + kk[None, :]).ravel())
        d = F2.coeffs.shape[1]
        rows = np.zeros((len(new) - 1, d))
        for i, (lo, hi) in enumerate(zip(new[:-1], new[1:])):
            acc = np.zeros(d)
            for k, c in zip(kk, cj):
                loc = F2.local_coeffs(lo, hi, shift=-k)
                acc[: len(loc)] += c * loc
            rows[i] = acc
        return PiecewisePoly(new, rows)

    def convolve_hat(self, sigma: float) -> "PiecewisePoly":
        s2 = sigma * sigma
        out = self.convolve_piecewise_linear(
            [-sigma, 0.0, sigma], [1.0 / s2, -2.0 / s2, 1.0 / s2]
        )
        out.provenance = f"hat(sigma={sigma!r}) * [{self.provenance}]"
        return out

    # level sets -----------------------------------------------------------
    def level_crossings(self, level: float, tol: float = 1e-12) -> np.ndarray:
        """Sorted points where the function equals ``level`` (isolated roots)."""
        roots = []
        lengths = np.diff(self.knots)
        for c, x0, L in zip(self.coeffs, self.knots[:-1], lengths):
            q = np.array(c, dtype=float)
            q[0] -= level
            q = np.trim_zeros(q, "b")
            if len(q) == 0:
                continue  # identically equal: not an isolated crossing
            if len(q) == 1:
                continue
            for r in np.roots(q[::-1]):
                if abs(r.imag) > 1e-9 * max(1.0, L):
                    continue
                s = r.real
                if -tol * max(1.0, L) <= s <= L * (1 + tol) + tol:
                    s = float(np.clip(s, 0.0, L))
                    # polish with a couple of Newton steps
                    dq = P.polyder(q)
                    for _ in range(3):
                        der = P.polyval(s, dq)
                        if der == 0:
                            break
                        s = float(np.clip(s - P.polyval(s, q) / der, 0.0, L))
                    roots.append(x0 + s)
        if not roots:
            return np.empty(0)
        roots = np.sort(np.asarray(roots))
        keep = [roots[0]]
        for r in roots[1:]:
            if r - keep[-1] > 1e-10:
                keep.append(r)
        return np.asarray(keep)

    # serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "representation": "piecewise_poly",
            "knots": self.knots.tolist(),
            "coefficients": self.coeffs.tolist(),
            "local_origin": "left_knot",
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewisePoly":
        return cls(data["knots"], data["coefficients"], provenance=data.get("provenance", ""))
