"""Blurred observations: exact hat convolutions, grid convolutions, and the
closed-form integrals used in the interface-count argument together with the
quadrature oracles that check them.

A signal is either a :class:`~tvbar.piecewise.PiecewisePoly` (exact, hat
kernels) or a :class:`GridSignal` (uniform samples, any kernel or noisy data).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import fftconvolve

from .barcode import BarCode
from .exceptions import CaseOrderingViolated, GridTooSmall
from .kernel import HAT, Kernel
from .piecewise import PiecewisePoly
from .quadrature import integrate

DEFAULT_GRID_DIVISIONS = 4096
NOISE_GRID_PER_OMEGA = 400


@dataclass(frozen=True)
class GridSpec:
    x0: float
    h: float
    n: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.n < 2:
            raise ValueError("grid needs at least two points")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    @property
    def x1(self) -> float:
        return self.x0 + self.h * (self.n - 1)

    @classmethod
    def covering(cls, lo: float, hi: float, h: float) -> "GridSpec":
        """Grid of spacing ``h`` aligned to multiples of ``h`` covering [lo, hi]."""
        i0 = math.floor(lo / h + 1e-9)
        i1 = math.ceil(hi / h - 1e-9)
        return cls(i0 * h, h, max(i1 - i0 + 1, 2))


@dataclass
class GridSignal:
    """Uniform samples ``samples[k] = f(x0 + k h)``; zero outside the grid."""

    x0: float
    h: float
    samples: np.ndarray
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("grid samples must be finite")

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.x0, self.h, self.n)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.x0), float(self.x0 + self.h * (self.n - 1))

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.samples, left=0.0, right=0.0)

    def integral(self) -> float:
        return float(np.trapezoid(self.samples, dx=self.h))

    def norm_sq(self) -> float:
        return float(np.trapezoid(self.samples**2, dx=self.h))

    def with_samples(self, samples, provenance: Optional[str] = None) -> "GridSignal":
        return GridSignal(self.x0, self.h, samples, provenance or self.provenance, dict(self.meta))

    def resample(self, spec: GridSpec) -> "GridSignal":
        return GridSignal(spec.x0, spec.h, self(spec.x), self.provenance, dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "representation": "grid",
            "x0": self.x0,
            "h": self.h,
            "samples": self.samples.tolist(),
            "provenance": self.provenance,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSignal":
        return cls(d["x0"], d["h"], d["samples"], d.get("provenance", ""), d.get("meta", {}))


Signal = Union[PiecewisePoly, GridSignal]


def sample(signal: Signal, spec: GridSpec) -> GridSignal:
    """Samples of any signal on ``spec``."""
    if isinstance(signal, GridSignal):
        return signal.resample(spec)
    return GridSignal(spec.x0, spec.h, signal(spec.x), signal.provenance)


# exact hat calculus ---------------------------------------------------------------


def hat_convolve(z: BarCode, sigma: float) -> PiecewisePoly:
    """``phi_sigma * z`` for the hat kernel, exactly, as a piecewise quadratic."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    base = PiecewisePoly.from_barcode(z, provenance=f"z={list(z.interfaces)}")
    out = base.convolve_hat(sigma)
    out.provenance = f"hat(sigma={sigma!r}) * z={list(z.interfaces)}"
    return out


def double_convolve(
    z: BarCode,
    rho: float,
    sigma: float,
    kernel_rho: Optional[Kernel] = None,
    kernel_sigma: Optional[Kernel] = None,
    grid_spec: Optional[GridSpec] = None,
) -> Signal:
    """``phi_rho * phi_sigma * z``.

    With the default hat kernels the result is an exact piecewise quartic;
    other kernels go through the grid.
    """
    ks = kernel_sigma or Kernel.hat(sigma)
    kr = kernel_rho or Kernel.hat(rho)
    if ks.kind == HAT and kr.kind == HAT:
        out = hat_convolve(z, ks.size).convolve_hat(kr.size)
        out.provenance = f"hat(rho={kr.size!r}) * hat(sigma={ks.size!r}) * z={list(z.interfaces)}"
        return out
    reach = ks.support_radius + kr.support_radius
    if grid_spec is None:
        grid_spec = _default_spec(z, reach, None)
    return grid_convolve(grid_convolve(z, ks, grid_spec), kr, grid_spec)


def I_plus(x: float, a: float, b: float, sigma: float) -> float:
    """``(1/sigma) int_a^b (1 + (x - y)/sigma) dy`` in closed form."""
    return ((b - a) * (1 + x / sigma) - (b * b - a * a) / (2 * sigma)) / sigma


def I_minus(x: float, a: float, b: float, sigma: float) -> float:
    """``(1/sigma) int_a^b (1 - (x - y)/sigma) dy`` in closed form."""
    return ((b - a) * (1 - x / sigma) + (b * b - a * a) / (2 * sigma)) / sigma


# grid convolution -------------------------------------------------------------------


def _default_spec(z, reach: float, omega: Optional[float]) -> GridSpec:
    if isinstance(z, BarCode):
        lo, hi = (0.0, 1.0) if z.is_empty() else (z.interfaces[0], z.interfaces[-1])
    else:
        lo, hi = z.support
    lo, hi = lo - reach, hi + reach
    if omega is not None:
        h = omega / NOISE_GRID_PER_OMEGA
    else:
        h = (hi - lo) / DEFAULT_GRID_DIVISIONS
    return GridSpec.covering(lo, hi, h)


def grid_convolve(
    z_or_signal: Union[BarCode, Signal],
    k: Kernel,
    grid_spec: Optional[GridSpec] = None,
    omega: Optional[float] = None,
) -> GridSignal:
    """Convolution sampled on a uniform grid.

    A bar code is convolved exactly at the nodes through the kernel CDF. A
    sampled signal is convolved by the discrete rule with exact cell masses
    of the kernel, which is the trapezoid rule for piecewise-linear data.
    """
    if not k.truncated:
        raise GridTooSmall("untruncated kernels have no finite grid coverage")
    reach = k.support_radius
    if grid_spec is None:
        grid_spec = _default_spec(z_or_signal, reach, omega)
    if isinstance(z_or_signal, BarCode):
        z = z_or_signal
        if not z.is_empty():
            _require_cover(grid_spec, z.interfaces[0] - reach, z.interfaces[-1] + reach)
        x = grid_spec.x
        out = np.zeros_like(x)
        for a, b in z.bars:
            out += k.cdf(x - a) - k.cdf(x - b)
        return GridSignal(grid_spec.x0, grid_spec.h, out,
                          f"{k.kind}({k.size!r}) * z={list(z.interfaces)}")
    src = z_or_signal
    lo, hi = _nonzero_extent(src)
    _require_cover(grid_spec, lo - reach, hi + reach)
    samples = sample(src, grid_spec).samples
    w = k.cell_weights(grid_spec.h)
    out = fftconvolve(samples, w, mode="same") if len(w) <= len(samples) else np.convolve(samples, w, mode="same")
    return GridSignal(grid_spec.x0, grid_spec.h, out, f"{k.kind}({k.size!r}) * [{src.provenance}]")


def _nonzero_extent(sig: Signal) -> tuple[float, float]:
    if isinstance(sig, PiecewisePoly):
        return sig.support
    nz = np.flatnonzero(sig.samples)
    if len(nz) == 0:
        return sig.support
    return float(sig.x[nz[0]]), float(sig.x[nz[-1]])


def _require_cover(spec: GridSpec, lo: float, hi: float) -> None:
    tol = 1e-9 * spec.h
    if spec.x0 > lo + tol or spec.x1 < hi - tol:
        raise GridTooSmall(
            f"grid [{spec.x0}, {spec.x1}] does not cover the result support [{lo}, {hi}]"
        )


# closed forms for the interface-count lemma ------------------------------------------

CASES = ("Ia", "Ib", "II_first", "IIa", "IIb", "fsigma_sq")


def fsigma_sq_closed(a: float, b: float, sigma: float) -> float:
    """``int (phi_sigma * chi_[a,b])^2 = b - a - 7 sigma / 15`` (hat kernel)."""
    return b - a - 7.0 * sigma / 15.0


def _check_case(case, rho, sigma, N, a, omega):
    if case in ("Ia", "IIa") and sigma is not None and rho is not None and sigma > rho:
        raise CaseOrderingViolated(f"case {case} needs sigma <= rho (got {sigma} > {rho})")
    if case in ("Ib", "IIb") and sigma is not None and rho is not None and rho > sigma:
        raise CaseOrderingViolated(f"case {case} needs rho <= sigma (got {rho} > {sigma})")
    widths = [v for v in (rho, sigma) if v is not None]
    if any(w <= 0 for w in widths):
        raise CaseOrderingViolated("kernel sizes must be positive")
    if omega is not None and any(w > omega / 2 for w in widths):
        raise CaseOrderingViolated(f"kernel sizes must not exceed omega/2 = {omega / 2}")
    if N is not None and widths and N < 2 * max(widths):
        raise CaseOrderingViolated(f"|N| = {N} must be at least twice the kernel size")
    if a is not None and N is not None and widths:
        reach = sum(widths)
        if a - reach < 0 or a + N + reach > 1:
            raise CaseOrderingViolated(
                "N must sit at least rho + sigma inside [0, 1]; closed forms near the edge are not available"
            )


def appendix_A_closed_forms(
    case: str,
    *,
    rho: Optional[float] = None,
    sigma: Optional[float] = None,
    N: Optional[float] = None,
    a: Optional[float] = None,
    b: Optional[float] = None,
    omega: Optional[float] = None,
) -> float:
    """Closed-form value of one of the interface-count integrals.

    ``N`` is the length of the interval on which the competitor and ``z``
    differ, ``a`` its left end (optional, used only for the ordering check).
    For ``fsigma_sq`` pass ``a``, ``b`` and ``sigma``.
    """
    if case == "fsigma_sq":
        if a is None or b is None or sigma is None:
            raise ValueError("fsigma_sq needs a, b and sigma")
        if sigma > (b - a) / 2:
            raise CaseOrderingViolated(f"sigma = {sigma} exceeds (b - a)/2 = {(b - a) / 2}")
        return fsigma_sq_closed(a, b, sigma)
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    if case == "II_first":
        if N is None:
            raise ValueError("II_first needs N")
        _check_case(case, rho, None, N, a, omega)
        return -2.0 * N
    if rho is None or sigma is None:
        raise ValueError(f"case {case} needs rho and sigma")
    _check_case(case, rho, sigma, N, a, omega)
    if case in ("Ia", "IIa"):
        core = (sigma**3 - 5 * rho * sigma**2 - 10 * rho**3) / (15 * rho**2)
    else:
        # IIb is IIa with the roles of rho and sigma exchanged
        core = (rho**3 - 5 * sigma * rho**2 - 10 * sigma**3) / (15 * sigma**2)
    if case.startswith("II"):
        if N is None:
            raise ValueError(f"case {case} needs N")
        return 2.0 * N + core
    return core


# quadrature oracles ------------------------------------------------------------------


def _quad_blur(sigma: float, intervals, x: float, tol: float) -> float:
    """``(phi_sigma * chi_U)(x)`` for a union of intervals, by Romberg."""
    total = 0.0
    for lo, hi in intervals:
        lo_, hi_ = max(lo, x - sigma), min(hi, x + sigma)
        if hi_ > lo_:
            total += integrate(
                lambda y: np.maximum(0.0, 1.0 - np.abs(x - y) / sigma) / sigma,
                lo_, hi_, [x], tol=tol,
            )
    return total


def _quad_product(sig1, set1, sig2, set2, lo, hi, breaks, tol) -> float:
    def integrand(xs):
        return np.array([
            _quad_blur(sig1, set1, x, tol * 1e-3) * _quad_blur(sig2, set2, x, tol * 1e-3)
            for x in xs
        ])

    return integrate(integrand, lo, hi, breaks, tol=tol)


def _breaks(points, widths):
    out = set()
    for p in points:
        for w in widths:
            out.update((p - w, p, p + w))
        out.update(p + s1 - s2 for s1 in widths for s2 in widths)
    return sorted(out)


def quadrature_oracle(
    case: str,
    *,
    rho: Optional[float] = None,
    sigma: Optional[float] = None,
    N: Optional[float] = None,
    a: Optional[float] = None,
    b: Optional[float] = None,
    tol: float = 1e-9,
) -> float:
    """The same integrals as :func:`appendix_A_closed_forms`, computed by
    nested Romberg quadrature straight from their defining expressions."""
    if case == "fsigma_sq":
        bars = [(a, b)]
        return _quad_product(sigma, bars, sigma, bars, a - sigma, b + sigma,
                             _breaks([a, b], [sigma]), tol)
    if a is None:
        a = 0.5 - N / 2
    e = a + N
    inside = [(a, e)]
    outside = [(0.0, a), (e, 1.0)]
    widths = [w for w in (rho, sigma) if w is not None]
    breaks = _breaks([0.0, a, e, 1.0], widths)
    r = max(widths)
    if case == "II_first":
        # phi_rho * 1 == 1 on the support of phi_rho * chi_N
        return -2.0 * integrate(lambda xs: np.array([_quad_blur(rho, inside, x, tol * 1e-3) for x in xs]),
                                a - rho, e + rho, breaks, tol=tol)
    if case in ("Ia", "Ib"):
        return -2.0 * _quad_product(rho, inside, sigma, outside, a - r, e + r, breaks, tol)
    if case in ("IIa", "IIb"):
        return 2.0 * _quad_product(rho, inside, sigma, inside, a - r, e + r, breaks, tol)
    raise ValueError(f"unknown case {case!r}")


# I/O -------------------------------------------------------------------------------------


def signal_to_json(sig: Signal) -> str:
    return json.dumps(sig.to_dict())


def signal_from_json(text: str) -> Signal:
    d = json.loads(text)
    if d.get("representation") == "grid":
        return GridSignal.from_dict(d)
    return PiecewisePoly.from_dict(d)


def signal_to_csv(sig: Signal, spec: Optional[GridSpec] = None) -> str:
    g = sig if spec is None and isinstance(sig, GridSignal) else sample(sig, spec or _default_spec(sig, 0.0, None))
    buf = io.StringIO()
    if g.meta or g.provenance:
        buf.write("# " + json.dumps({"provenance": g.provenance, "meta": g.meta}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "value"])
    for x, v in zip(g.x, g.samples):
        w.writerow([repr(float(x)), repr(float(v))])
    return buf.getvalue()


def signal_from_csv(text: str) -> GridSignal:
    """Parse ``x,value`` rows; an optional leading ``# {json}`` line carries metadata."""
    info = {}
    lines = text.splitlines()
    while lines and lines[0].startswith("#"):
        try:
            info = json.loads(lines[0][1:])
        except json.JSONDecodeError:
            pass
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
        raise ValueError("signal CSV must start with the header 'x,value'")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    if len(data) < 2:
        raise ValueError("signal CSV needs at least two rows")
    x, v = data[:, 0], data[:, 1]
    h = (x[-1] - x[0]) / (len(x) - 1)
    if not np.allclose(np.diff(x), h, rtol=1e-6, atol=1e-12):
        raise ValueError("signal CSV abscissae are not uniformly spaced")
    return GridSignal(float(x[0]), float(h), v, info.get("provenance", "csv"), info.get("meta", {}))
