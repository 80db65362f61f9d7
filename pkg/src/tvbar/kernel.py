"""Blurring kernels and admissibility checks.

Kernels are symmetric, unit-mass profiles ``phi(x) = p(|x|, size)``. The hat
kernel is handled in closed form; Gaussians are truncated and renormalised;
tabulated kernels interpolate a profile linearly on [0, size].

For the double-convolution monotonicity condition the kernel family is
parametrised by dilation, ``p(x, tau) = (size / tau) p(x size / tau, size)``,
which reproduces the hat family exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from .exceptions import QuadratureFailure
from .quadrature import integrate, integrate2

HAT, GAUSSIAN, TABULATED = "hat", "gaussian", "tabulated"
J_TOLERANCE = 1e-9
FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class Kernel:
    kind: str
    size: float
    truncation_radius: Optional[float] = 4.0
    profile_x: tuple = ()
    profile_p: tuple = ()

    def __post_init__(self):
        if self.kind not in (HAT, GAUSSIAN, TABULATED):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.size > 0:
            raise ValueError("kernel size must be positive")
        if self.kind == TABULATED:
            x = np.asarray(self.profile_x, dtype=float)
            p = np.asarray(self.profile_p, dtype=float)
            if len(x) < 2 or len(x) != len(p):
                raise ValueError("tabulated kernel needs matching x/p arrays")
            if np.any(np.diff(x) <= 0) or x[0] != 0.0:
                raise ValueError("profile_x must start at 0 and increase")
            # stretch the abscissae onto [0, size] and rescale to half mass
            x = x * (self.size / x[-1])
            half = np.trapezoid(p, x)
            if not half > 0:
                raise ValueError("profile has no mass")
            p = p * (0.5 / half)
            object.__setattr__(self, "profile_x", tuple(x.tolist()))
            object.__setattr__(self, "profile_p", tuple(p.tolist()))

    # constructors ---------------------------------------------------------
    @classmethod
    def hat(cls, sigma: float) -> "Kernel":
        return cls(HAT, float(sigma))

    @classmethod
    def gaussian(cls, sigma: float, truncation: Optional[float] = 4.0) -> "Kernel":
        return cls(GAUSSIAN, float(sigma), truncation_radius=truncation)

    @classmethod
    def tabulated(cls, x: Sequence[float], p: Sequence[float], size: Optional[float] = None) -> "Kernel":
        x = tuple(float(v) for v in x)
        return cls(TABULATED, float(size if size is not None else x[-1]),
                   profile_x=x, profile_p=tuple(float(v) for v in p))

    # geometry -------------------------------------------------------------
    @property
    def support_radius(self) -> float:
        if self.kind == GAUSSIAN:
            if self.truncation_radius is None:
                return math.inf
            return self.truncation_radius * self.size
        return self.size

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.support_radius)

    def breakpoints(self) -> list[float]:
        """Points where the kernel is not smooth."""
        if self.kind == HAT:
            return [-self.size, 0.0, self.size]
        if self.kind == TABULATED:
            x = np.asarray(self.profile_x)
            return sorted(set((-x).tolist() + x.tolist()))
        if self.truncated:
            r = self.support_radius
            return [-r, r]
        return []

    def with_size(self, size: float) -> "Kernel":
        if self.kind == TABULATED:
            return Kernel.tabulated(self.profile_x, self.profile_p, size=size)
        return Kernel(self.kind, float(size), self.truncation_radius)

    # evaluation -------------------------------------------------------------
    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        s = self.size
        if self.kind == HAT:
            return np.where(ax < s, (1.0 - ax / s) / s, 0.0)
        if self.kind == GAUSSIAN:
            g = np.exp(-0.5 * (ax / s) ** 2) / (s * math.sqrt(2 * math.pi))
            if not self.truncated:
                return g
            r = self.support_radius
            return np.where(ax <= r, g / erf(r / (s * math.sqrt(2))), 0.0)
        xs, ps = np.asarray(self.profile_x), np.asarray(self.profile_p)
        return np.where(ax <= s, np.interp(ax, xs, ps), 0.0)

    __call__ = evaluate

    def cdf(self, x):
        """``int_{-inf}^x phi``."""
        x = np.asarray(x, dtype=float)
        s = self.size
        if self.kind == HAT:
            u = np.clip(x / s, -1.0, 1.0)
            return np.where(u <= 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)
        if self.kind == GAUSSIAN:
            if not self.truncated:
                return 0.5 * (1 + erf(x / (s * math.sqrt(2))))
            r = self.support_radius
            xc = np.clip(x, -r, r)
            return 0.5 + 0.5 * erf(xc / (s * math.sqrt(2))) / erf(r / (s * math.sqrt(2)))
        # exact integral of the linear interpolant
        xs, ps = np.asarray(self.profile_x), np.asarray(self.profile_p)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (ps[1:] + ps[:-1]) * np.diff(xs))])
        ax = np.minimum(np.abs(x), s)
        i = np.clip(np.searchsorted(xs, ax, side="right") - 1, 0, len(xs) - 2)
        dx = ax - xs[i]
        slope = (ps[i + 1] - ps[i]) / (xs[i + 1] - xs[i])
        part = cum[i] + ps[i] * dx + 0.5 * slope * dx**2
        return np.where(x >= 0, 0.5 + part, 0.5 - part)

    def profile(self, x, tau: float):
        """``p(x, tau)`` of the dilation family on [0, tau].

        ``tau`` plays the role of the half-support; for the hat it is the
        kernel size itself.
        """
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= tau)
        if self.kind == HAT:
            return np.where(inside, (1.0 - x / tau) / tau, 0.0)
        return np.where(inside, self._profile_ext(x, tau), 0.0)

    def dprofile_dtau(self, x, tau: float):
        """Partial derivative of the profile in its size parameter."""
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= tau)
        if self.kind == HAT:
            return np.where(inside, (-1.0 + 2.0 * x / tau) / tau**2, 0.0)
        h = FD_REL_STEP * tau
        d = (self._profile_ext(x, tau + h) - self._profile_ext(x, tau - h)) / (2 * h)
        return np.where(inside, d, 0.0)

    def _profile_ext(self, x, tau: float):
        # continued by the edge value past the support, so the finite
        # difference sees no artificial jump at x = tau
        r = self.support_radius
        u = np.clip(np.asarray(x) * (r / tau), 0.0, r)
        return (r / tau) * self.evaluate(u)

    def mass(self) -> float:
        r = self.support_radius
        if not math.isfinite(r):
            return 1.0
        return integrate(self.evaluate, -r, r, self.breakpoints(), tol=1e-13)

    # discretisation ---------------------------------------------------------
    def sampled_weights(self, h: float) -> np.ndarray:
        """Kernel sampled at ``k h`` and renormalised to unit discrete mass."""
        r = self.support_radius if self.truncated else 8.0 * self.size
        n = int(math.floor(r / h))
        w = self.evaluate(h * np.arange(-n, n + 1))
        return w / w.sum()

    def cell_weights(self, h: float) -> np.ndarray:
        """Exact kernel mass of each cell ``[(k - 1/2) h, (k + 1/2) h]``."""
        r = self.support_radius if self.truncated else 8.0 * self.size
        n = int(math.ceil(r / h + 0.5))
        edges = h * (np.arange(-n, n + 2) - 0.5)
        w = np.diff(self.cdf(edges))
        return w / w.sum()

    # serialisation ----------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"kind": self.kind, "size": self.size}
        if self.kind == GAUSSIAN:
            d["truncation_radius"] = self.truncation_radius
        if self.kind == TABULATED:
            d["profile_x"] = list(self.profile_x)
            d["profile_p"] = list(self.profile_p)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        kind = d["kind"]
        if kind == HAT:
            return cls.hat(d["size"])
        if kind == GAUSSIAN:
            return cls.gaussian(d["size"], d.get("truncation_radius", 4.0))
        return cls.tabulated(d["profile_x"], d["profile_p"], size=d["size"])


def evaluate(k: Kernel, x):
    return k.evaluate(x)


def class_K_report(k: Kernel, n: int = 2001, tol: float = 1e-8) -> dict:
    """Each requirement of the unimodal class, checked on an ``n``-point grid."""
    report = {"compact": k.truncated}
    r = k.support_radius
    if not report["compact"]:
        report.update(symmetric=True, nonnegative=True, decreasing=True, half_mass=True)
        return report
    x = np.linspace(0.0, r, n)
    p = k.evaluate(x)
    report["symmetric"] = bool(np.max(np.abs(k.evaluate(-x) - p)) <= tol)
    report["nonnegative"] = bool(np.min(p) >= -tol)
    report["decreasing"] = bool(np.all(np.diff(p) <= tol))
    outside = r * (1.0 + np.linspace(1e-9, 1.0, 64))
    report["vanishes_outside"] = bool(np.max(np.abs(k.evaluate(outside))) <= tol)
    half = integrate(k.evaluate, 0.0, r, [b for b in k.breakpoints() if b > 0], tol=1e-12)
    report["half_mass"] = bool(abs(half - 0.5) <= tol)
    return report


def check_class_K(k: Kernel) -> bool:
    return all(class_K_report(k).values())


@dataclass
class KernelAdmissibility:
    in_K: bool
    in_K3: bool
    worst_J: float
    sufficient_condition: str
    continuous: bool = True
    evaluations: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "in_K": self.in_K,
            "in_K3": self.in_K3,
            "worst_J": self.worst_J,
            "sufficient_condition": self.sufficient_condition,
            "continuous": self.continuous,
            "evaluations": self.evaluations,
            "notes": list(self.notes),
        }


def _bar_blur(k: Kernel, c: float):
    """``phi * chi_[0, c]`` through the kernel CDF."""
    return lambda x: k.cdf(x) - k.cdf(np.asarray(x) - c)


def _profile_breaks(k: Kernel, tau: float) -> list[float]:
    if k.kind == TABULATED:
        return (np.asarray(k.profile_x) * (tau / k.size)).tolist()
    return []


def J_value(k: Kernel, tau: float, x: float, c: float, tol: float = 1e-13) -> float:
    """``J(sigma, tau, x, c)`` as ``psi_tau * (phi_sigma * chi_[0,c]) (x)``."""
    f = _bar_blur(k, c)
    kinks = [b for b in k.breakpoints()] + [c + b for b in k.breakpoints()]
    breaks = [abs(x - q) for q in kinks] + _profile_breaks(k, tau)

    def integrand(y):
        return k.dprofile_dtau(y, tau) * (f(x - y) + f(x + y))

    return integrate(integrand, 0.0, tau, breaks, tol=tol)


def J_direct(k: Kernel, tau: float, x: float, c: float, tol: float = 1e-11) -> float:
    """``J`` by nested quadrature of its defining double integral."""
    kinks = k.breakpoints()

    def g(y, w):
        return k.dprofile_dtau(y, tau) * (k.evaluate(y - w) + k.evaluate(y + w))

    def inner_breaks(y):
        return [y - b for b in kinks] + [b - y for b in kinks]

    return integrate2(
        g,
        (0.0, tau),
        lambda y: (x - c, x),
        outer_breaks=_profile_breaks(k, tau) + [abs(x - b) for b in kinks]
        + [abs(x - c - b) for b in kinks],
        inner_breaks=inner_breaks,
        tol=tol,
    )


def _dtau_monotonicity(k: Kernel, tau: float, n: int = 257) -> str:
    x = np.linspace(0.0, tau, n)[:-1]
    d = np.diff(k.dprofile_dtau(x, tau))
    scale = max(1.0, float(np.max(np.abs(k.dprofile_dtau(x, tau)))))
    inc = bool(np.all(d >= -1e-9 * scale))
    dec = bool(np.all(d <= 1e-9 * scale))
    if inc:
        return "a"
    if dec:
        return "b"
    return "direct-grid"


def check_condition_J(
    k: Kernel,
    tau_samples: Optional[Sequence[float]] = None,
    c_samples: Optional[Sequence[float]] = None,
    x_samples: Optional[int | Sequence[float]] = None,
    use_shortcuts: bool = True,
    tolerance: float = J_TOLERANCE,
) -> KernelAdmissibility:
    """Numerically test the double-convolution monotonicity condition.

    ``x_samples`` is either a count (spread over [0, c] for each c) or explicit
    fractions of c in [0, 1]. When the tau-derivative of the profile is
    monotone in x the check reduces to x = 0 (increasing) or x = c/2
    (decreasing).
    """
    sigma = k.support_radius
    in_K = check_class_K(k)
    if not k.truncated:
        return KernelAdmissibility(False, False, math.nan, "neither",
                                   notes=["kernel has no compact support"])
    taus = np.asarray(tau_samples if tau_samples is not None
                      else sigma * np.arange(1, 17) / 16.0)
    cs = np.asarray(c_samples if c_samples is not None
                    else np.linspace(2 * sigma, 10 * sigma, 8))
    if x_samples is None or isinstance(x_samples, int):
        fracs = np.linspace(0.0, 1.0, x_samples or 64)
    else:
        fracs = np.asarray(x_samples, dtype=float)

    notes = []
    continuous = bool(abs(float(k.evaluate(k.support_radius * (1 - 1e-12)))) <= 1e-6 / sigma)
    if not continuous:
        notes.append("kernel is discontinuous at the edge of its support")
    if k.kind != HAT:
        # finite-difference stability of the tau-derivative
        xs = np.linspace(0.0, sigma, 101)[:-1]
        d1 = k.dprofile_dtau(xs, sigma)
        h = FD_REL_STEP * sigma
        d2 = (k.profile(xs, sigma + 2 * h) - k.profile(xs, sigma - 2 * h)) / (4 * h)
        spread = float(np.max(np.abs(d1 - d2)) / max(1.0, np.max(np.abs(d1))))
        notes.append(f"finite-difference tau-derivative stability {spread:.2e}")

    modes = set()
    worst = -math.inf
    count = 0
    try:
        for tau in taus:
            mode = _dtau_monotonicity(k, float(tau)) if use_shortcuts else "direct-grid"
            modes.add(mode)
            for c in cs:
                if mode == "a":
                    xs = [0.0]
                elif mode == "b":
                    xs = [0.5 * c]
                else:
                    xs = fracs * c
                for x in xs:
                    worst = max(worst, J_value(k, float(tau), float(x), float(c)))
                    count += 1
    except QuadratureFailure:
        raise
    if len(modes) == 1:
        condition = modes.pop()
    else:
        condition = "direct-grid" if "direct-grid" in modes else "mixed"
    in_K3 = bool(in_K and continuous and worst <= tolerance)
    return KernelAdmissibility(in_K, in_K3, float(worst), condition, continuous, count, notes)
