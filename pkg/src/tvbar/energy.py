"""The three TV energies, the dual norm, and the empty-code thresholds."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .barcode import BarCode, total_variation
from .convolve import GridSignal, Signal, grid_convolve, hat_convolve
from .exceptions import EmptyBarCode, IncompatibleSignals
from .kernel import Kernel
from .piecewise import PiecewisePoly

FUNCTIONALS = ("F1", "F2", "F3")


@dataclass(frozen=True)
class EnergyParams:
    """Functional choice with its weights; ``rho`` is fixed by F1 and F2."""

    functional: str
    lam: float
    sigma: float
    rho: Optional[float] = None

    def __post_init__(self):
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"functional must be one of {FUNCTIONALS}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lambda must be finite and positive")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be finite and positive")
        rho = self.rho
        if self.functional == "F1":
            if rho not in (None, 0, 0.0):
                raise ValueError("F1 has rho = 0")
            rho = 0.0
        elif self.functional == "F2":
            if rho is not None and rho != self.sigma:
                raise ValueError("F2 has rho = sigma")
            rho = self.sigma
        elif rho is None or not rho > 0:
            raise ValueError("F3 needs rho > 0")
        object.__setattr__(self, "rho", float(rho))

    def with_lambda(self, lam: float) -> "EnergyParams":
        return EnergyParams(self.functional, lam, self.sigma, self.rho)


@dataclass(frozen=True)
class EnergyReport:
    tv_term: int
    fidelity: float
    total: float
    lam: float
    functional: str
    sigma: float
    rho: float

    @classmethod
    def build(cls, tv: int, fidelity: float, p: EnergyParams) -> "EnergyReport":
        fidelity = max(float(fidelity), 0.0)
        return cls(tv, fidelity, tv + p.lam * fidelity, p.lam, p.functional, p.sigma, p.rho)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "tv": d["tv_term"],
            "fidelity": d["fidelity"],
            "lambda": d["lam"],
            "total": d["total"],
            "functional": d["functional"],
            "sigma": d["sigma"],
            "rho": d["rho"],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def reblur(u: BarCode, rho: float) -> PiecewisePoly:
    """``phi_rho * u`` exactly (``u`` itself for rho = 0)."""
    if rho == 0:
        return PiecewisePoly.from_barcode(u)
    return hat_convolve(u, rho)


def fidelity(u: BarCode, f: Signal, p: EnergyParams, kernel: Optional[Kernel] = None) -> float:
    """``||phi_rho * u - f||^2``.

    Exact when ``f`` is piecewise polynomial and the deblurring kernel is the
    hat; otherwise both sides are compared on the grid of ``f``.
    """
    if isinstance(f, PiecewisePoly) and (kernel is None or kernel.kind == "hat"):
        return (reblur(u, p.rho) - f).norm_sq()
    if not isinstance(f, GridSignal):
        raise IncompatibleSignals(
            "a piecewise-polynomial observation needs the hat deblurring kernel; "
            "sample it onto a grid first"
        )
    spec = f.spec
    reach = 0.0 if p.rho == 0 else (kernel.support_radius if kernel else p.rho)
    if not u.is_empty():
        lo, hi = u.interfaces[0] - reach, u.interfaces[-1] + reach
        if lo < spec.x0 - 1e-9 * spec.h or hi > spec.x1 + 1e-9 * spec.h:
            raise IncompatibleSignals(
                f"phi_rho * u is supported on [{lo}, {hi}], outside the signal grid "
                f"[{spec.x0}, {spec.x1}]"
            )
    if p.rho == 0:
        model = u(spec.x)
    else:
        model = grid_convolve(u, kernel or Kernel.hat(p.rho), spec).samples
    return float(np.trapezoid((model - f.samples) ** 2, dx=spec.h))


def evaluate(u: BarCode, f: Signal, p: EnergyParams, kernel: Optional[Kernel] = None) -> EnergyReport:
    return EnergyReport.build(total_variation(u), fidelity(u, f, p, kernel), p)


def observation(z: BarCode, sigma: float) -> PiecewisePoly:
    """Noiseless hat-blurred observation ``f_sigma``."""
    return hat_convolve(z, sigma)


# dual norm ------------------------------------------------------------------------


def running_integral_range(f: Signal) -> tuple[float, float]:
    """``(inf F, sup F)`` for ``F(x) = int_{-inf}^x f``, including the tails."""
    if isinstance(f, GridSignal):
        F = np.concatenate([[0.0], np.cumsum(0.5 * (f.samples[1:] + f.samples[:-1]) * f.h)])
        return float(min(F.min(), 0.0)), float(max(F.max(), 0.0))
    F = f.antiderivative()
    pts = np.concatenate([f.knots, f.level_crossings(0.0)])
    vals = np.concatenate([F(pts), [0.0, f.integral()]])
    return float(vals.min()), float(vals.max())


def dual_norm(f: Signal) -> float:
    """Norm dual to the total variation: ``sup |int f v|`` over ``TV(v) <= 1``.

    Pairing with ``v`` gives ``-int F dv`` for the running integral ``F``, so
    the supremum is half the oscillation of ``F``.
    """
    lo, hi = running_integral_range(f)
    return 0.5 * (hi - lo)


class Thresholds(NamedTuple):
    lambda_star: float
    lambda_0: float


def trivial_thresholds(z: BarCode, p: EnergyParams) -> Thresholds:
    """Below ``lambda_star`` the empty code is the unique minimiser over BV;
    ``lambda_0 = 2 / ||f_sigma||^2`` is the cruder bound from TV >= 2."""
    if z.is_empty():
        raise EmptyBarCode("thresholds need a nonempty generating code")
    f = observation(z, p.sigma)
    g = f if p.rho == 0 else f.convolve_hat(p.rho)
    lam_star = 1.0 / (2.0 * dual_norm(g))
    lam_0 = 2.0 / f.norm_sq()
    if not lam_star < lam_0:
        raise ArithmeticError(f"lambda_star = {lam_star} is not below lambda_0 = {lam_0}")
    return Thresholds(lam_star, lam_0)
