"""Phase-field gradient flow for bar-code deblurring.

The field ``u`` on a padded uniform grid follows

    u_t = 2 eps u_xx - W'(u)/eps - 2 lam phi * (phi * u - f),   W = u^2 (1 - u)^2 / 2,

by explicit Euler, with ``u = 0`` held at both ends of the padded domain. The
flow is the L2 gradient of

    E(u) = int eps |u'|^2 + W(u)/eps + lam ||phi * u - f||^2,

which is monitored at checkpoints. Without a deblurring kernel (F1) the
fidelity term is ``2 lam (u - f)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import fft as sfft

from .barcode import BarCode
from .convolve import NOISE_GRID_PER_OMEGA, GridSignal, GridSpec, Signal, sample
from .exceptions import Diverged
from .kernel import Kernel

log = logging.getLogger(__name__)

BLOCKS_PER_OMEGA = 16
DIVERGENCE_BOUND = 10.0


@dataclass(frozen=True)
class NoiseConfig:
    amplitude: float = 0.1
    rng_seed: int = 0
    points_per_omega: int = NOISE_GRID_PER_OMEGA
    blocks_per_omega: int = BLOCKS_PER_OMEGA

    @property
    def block_len(self) -> int:
        return self.points_per_omega // self.blocks_per_omega


def add_noise(f: Signal, n: NoiseConfig, omega: float) -> GridSignal:
    """Block-constant uniform noise: every run of ``block_len`` grid points
    (aligned with x = 0) receives one value drawn from [-a, a]."""
    h = omega / n.points_per_omega
    if isinstance(f, GridSignal) and math.isclose(f.h, h, rel_tol=1e-9):
        g = f
    else:
        lo, hi = f.support
        g = sample(f, GridSpec.covering(lo, hi, h))
    if n.amplitude == 0:
        return g.with_samples(g.samples.copy())
    k = np.rint(g.x / g.h).astype(np.int64)
    block = np.floor_divide(k, n.block_len)
    rng = np.random.default_rng(n.rng_seed)
    first = int(block.min())
    values = rng.uniform(-n.amplitude, n.amplitude, size=int(block.max()) - first + 1)
    out = g.with_samples(g.samples + values[block - first], f"{g.provenance} + noise(a={n.amplitude})")
    out.meta = dict(g.meta, noise_amplitude=n.amplitude, noise_seed=n.rng_seed)
    return out


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    epsilon: float = 4e-4
    kernel_blur: Optional[Kernel] = None
    kernel_deblur: Optional[Kernel] = None
    dt: Union[float, str] = "auto"
    max_steps: int = 400_000
    steady_tol: float = 1e-8
    init: str = "zero"
    h: Optional[float] = None
    omega: Optional[float] = None
    pad: Optional[float] = None
    checkpoint_every: int = 100

    def __post_init__(self):
        if not self.lam > 0 or not self.epsilon > 0:
            raise ValueError("lambda and epsilon must be positive")
        if self.init not in ("zero", "half"):
            raise ValueError("init must be 'zero' or 'half'")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError("dt must be positive or 'auto'")

    def spacing(self, f: Signal) -> float:
        if self.h is not None:
            return self.h
        if self.omega is not None:
            return self.omega / NOISE_GRID_PER_OMEGA
        if isinstance(f, GridSignal):
            return f.h
        raise ValueError("grid spacing unknown: give h, omega, or a grid signal")

    def padding(self) -> float:
        if self.pad is not None:
            return self.pad
        radii = [k.support_radius for k in (self.kernel_blur, self.kernel_deblur) if k is not None]
        return max(radii + [0.0]) + 10 * self.epsilon

    def time_step(self, h: float) -> float:
        if self.dt == "auto":
            return 0.2 * min(h * h / (2 * self.epsilon), self.epsilon)
        return float(self.dt)


@dataclass
class SolverResult:
    u_field: GridSignal
    code: BarCode
    steps: int
    converged: bool
    energies: list = field(default_factory=list)
    residual: float = math.nan
    max_step_change: float = math.nan
    dt: float = math.nan

    def __iter__(self):
        return iter((self.u_field, self.code, self.steps))

    @property
    def energy_monotone(self) -> bool:
        e = np.asarray([v for _, v in self.energies])
        return bool(np.all(np.diff(e) <= 1e-12 * np.maximum(1.0, np.abs(e[1:]))))

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "converged": self.converged,
            "dt": self.dt,
            "residual": self.residual,
            "max_step_change": self.max_step_change,
            "energy_first": self.energies[0][1] if self.energies else None,
            "energy_last": self.energies[-1][1] if self.energies else None,
            "energy_monotone": self.energy_monotone if self.energies else None,
            "code": self.code.to_dict(),
        }


def double_well(u):
    return 0.5 * u * u * (1 - u) ** 2


def double_well_prime(u):
    return u * (1 - u) * (1 - 2 * u)


class _Blur:
    """Discrete ``phi *`` with a fixed FFT length; ``full`` and its adjoint."""

    def __init__(self, w: np.ndarray, n: int):
        self.w = w
        self.r = len(w) // 2
        self.n = n
        self.L = sfft.next_fast_len(n + 2 * len(w))
        self.W = sfft.rfft(w, self.L)
        self.rpsi = len(w) - 1

    def full(self, u):
        """``phi * u`` on the grid extended by the kernel radius each side."""
        return sfft.irfft(sfft.rfft(u, self.L) * self.W, self.L)[: self.n + 2 * self.r]

    def adjoint(self, v):
        """Adjoint of :meth:`full`, mapping back to the grid."""
        m = len(v)
        out = sfft.irfft(sfft.rfft(v, self.L) * self.W, self.L)
        return out[2 * self.r: 2 * self.r + m - 2 * self.r]


def threshold(x: np.ndarray, u: np.ndarray, h: float, level: float = 0.5) -> BarCode:
    """Bar code from the ``level`` crossings of a sampled field.

    Crossing positions are linearly interpolated; two crossings closer than
    ``2 h`` are dropped together as numerical chatter.
    """
    above = u > level
    idx = np.flatnonzero(above[1:] != above[:-1])
    pts = []
    for i in idx:
        t = (level - u[i]) / (u[i + 1] - u[i])
        pts.append(x[i] + t * (x[i + 1] - x[i]))
    merged = []
    for p in pts:
        if merged and p - merged[-1] < 2 * h:
            merged.pop()
        else:
            merged.append(p)
    if len(merged) % 2:
        merged = merged[:-1]
    out = np.clip(np.asarray(merged), 0.0, 1.0)
    keep = [v for v in out]
    # clipping can make neighbours coincide at the domain edge
    final = []
    for v in keep:
        if final and v - final[-1] < 1e-12:
            final.pop()
        else:
            final.append(float(v))
    if len(final) % 2:
        final = final[:-1]
    return BarCode(tuple(final))


def deblur(f: Signal, cfg: SolverConfig, progress: Optional[callable] = None) -> SolverResult:
    """Run the gradient flow from ``cfg.init`` to steady state or ``max_steps``."""
    h = cfg.spacing(f)
    pad = cfg.padding()
    spec = GridSpec.covering(-pad, 1.0 + pad, h)
    x = spec.x
    n = spec.n
    fs = sample(f, spec).samples
    dt = cfg.time_step(h)
    eps, lam = cfg.epsilon, cfg.lam

    # the linear part of the flow (diffusion and, with a deblurring kernel,
    # the Gram operator of the fidelity) is one convolution, applied by FFT
    if cfg.kernel_deblur is not None:
        blur = _Blur(cfg.kernel_deblur.sampled_weights(h), n)
        f_ext = np.concatenate([np.zeros(blur.r), fs, np.zeros(blur.r)])
        forcing = 2 * lam * blur.adjoint(f_ext)
        R, ker = blur.rpsi, -2 * lam * np.convolve(blur.w, blur.w)

        def fid_energy(u):
            return lam * h * float(np.sum((blur.full(u) - f_ext) ** 2))
    else:
        forcing = 2 * lam * fs
        R, ker = 1, np.array([0.0, -2 * lam, 0.0])

        def fid_energy(u):
            return lam * h * float(np.sum((u - fs) ** 2))
    stencil = (2 * eps / (h * h)) * np.array([1.0, -2.0, 1.0])
    # circular convolution is exact on [R, R + n) once L >= n + R
    L = sfft.next_fast_len(n + R, real=True)
    # pocketfft is quickest on powers of two
    L2 = 1 << (n + R - 1).bit_length()
    if L2 <= 1.15 * L:
        L = L2
    ker = ker.copy()
    ker[R - 1: R + 2] += stencil
    spectrum = sfft.rfft(ker, L)

    def energy(u):
        du = np.diff(np.concatenate([[0.0], u, [0.0]])) / h
        return eps * h * float(np.sum(du * du)) + h * float(np.sum(double_well(u))) / eps + fid_energy(u)

    buf = np.zeros(L)
    w2 = np.empty(n)

    def rhs(u):
        # u is zero at both ends, so zero extension is the Dirichlet condition
        buf[:n] = u
        out = sfft.irfft(sfft.rfft(buf) * spectrum, L)[R: R + n]
        out += forcing
        # W'(u)/eps = u (1 - 3u + 2u^2) / eps, in place
        w = np.multiply(u, 2.0, out=w2)
        w -= 3.0
        w *= u
        w += 1.0
        w *= u
        w *= 1.0 / eps
        out -= w
        out[0] = out[-1] = 0.0
        return out

    u = np.zeros(n) if cfg.init == "zero" else np.full(n, 0.5)
    u[0] = u[-1] = 0.0
    energies = [(0, energy(u))]
    converged = False
    change = math.inf
    step = 0
    while step < cfg.max_steps:
        du = rhs(u)
        du *= dt
        u += du
        step += 1
        change = float(np.max(np.abs(du)))
        if step % cfg.checkpoint_every == 0:
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > DIVERGENCE_BOUND:
                raise Diverged(f"|u| exceeded {DIVERGENCE_BOUND} after {step} steps")
            energies.append((step, energy(u)))
            if progress is not None:
                progress(step, change, energies[-1][1])
        if change < cfg.steady_tol:
            converged = True
            break
    if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > DIVERGENCE_BOUND:
        raise Diverged(f"|u| exceeded {DIVERGENCE_BOUND} after {step} steps")
    if energies[-1][0] != step:
        energies.append((step, energy(u)))
    if not converged:
        log.warning("solver stopped at max_steps=%d before reaching steady_tol", cfg.max_steps)
    residual = float(np.max(np.abs(rhs(u))))
    field_ = GridSignal(spec.x0, h, u, f"phase field (lam={lam}, eps={eps})",
                        {"steps": step, "converged": converged})
    return SolverResult(field_, threshold(x, u, h), step, converged, energies, residual, change, dt)
