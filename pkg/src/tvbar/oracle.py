"""Exhaustive minimisation over bar codes with interfaces on a uniform grid.

For a code with interfaces ``t_0 < ... < t_{2k-1}`` and signs
``s = (+1, -1, +1, ...)`` the fidelity is a quadratic form in the interfaces,

    ||phi * u - f||^2 = ||f||^2 + 2 sum_i s_i G(t_i) - sum_ij s_i s_j Psi(t_i - t_j),

where ``G`` is an antiderivative of ``phi * f`` and ``Psi'' = phi * phi`` is the
even second antiderivative (``|d|/2`` without deblurring). Tabulating ``G`` and
``Psi`` on the grid makes each candidate a handful of lookups. Candidates
within reach of the minimum are re-evaluated on the direct piecewise path
before ties are decided, so round-off in the expansion cannot decide a
winner.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .barcode import BarCode
from .convolve import GridSignal, Signal, grid_convolve, hat_convolve
from .energy import EnergyParams, EnergyReport, evaluate, fidelity, observation
from .exceptions import SearchBudgetExceeded
from .kernel import Kernel
from .piecewise import PiecewisePoly

DEFAULT_BUDGET = 5_000_000
TIE_TOLERANCE = 1e-10
CHUNK = 400_000
# candidates this close (relative to lambda * ||f||^2) are re-checked exactly
RECHECK_REL = 1e-9
RECHECK_CAP = 2000
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class SearchSpace:
    grid_points: int
    max_interfaces: int
    endpoint_constraint: Optional[tuple[int, int]] = None
    extra_candidates: tuple = ()

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("need at least two grid points")
        if self.max_interfaces % 2 or self.max_interfaces < 0:
            raise ValueError("max_interfaces must be an even non-negative integer")
        if self.max_interfaces > self.grid_points:
            raise ValueError("max_interfaces cannot exceed grid_points")
        object.__setattr__(self, "extra_candidates", tuple(self.extra_candidates))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_points)

    def size(self) -> int:
        m = self.grid_points
        n = 1 + sum(math.comb(m, 2 * k) for k in range(1, self.max_interfaces // 2 + 1))
        return n + len(self.extra_candidates)

    def snap(self, code: BarCode) -> BarCode:
        """Move every interface of ``code`` to its nearest grid point."""
        g = self.grid
        idx = np.abs(np.asarray(code.interfaces)[:, None] - g[None, :]).argmin(axis=1)
        return BarCode(tuple(g[idx].tolist()))


@dataclass
class OracleResult:
    minimizer: BarCode
    report: EnergyReport
    ties: list = field(default_factory=list)
    candidates_evaluated: int = 0
    best_by_count: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "minimizer": self.minimizer.to_dict(),
            "report": self.report.to_dict(),
            "ties": [t.to_dict() for t in self.ties],
            "candidates_evaluated": self.candidates_evaluated,
            "best_by_count": {
                str(k): {"code": c.to_dict(), "total": t} for k, (c, t) in sorted(self.best_by_count.items())
            },
        }


class _Plan:
    """Tabulated pieces of the quadratic form on the search grid."""

    def __init__(self, f: Signal, p: EnergyParams, grid: np.ndarray):
        self.grid = grid
        rho = p.rho
        if isinstance(f, PiecewisePoly):
            g = f if rho == 0 else f.convolve_hat(rho)
            self.G = g.antiderivative()(grid)
            self.f_sq = f.norm_sq()
        else:
            g = f if rho == 0 else grid_convolve(f, Kernel.hat(rho), f.spec)
            F = np.concatenate([[0.0], np.cumsum(0.5 * (g.samples[1:] + g.samples[:-1]) * g.h)])
            self.G = np.interp(grid, g.x, F, left=0.0, right=F[-1])
            self.f_sq = f.norm_sq()
        d = grid[:, None] - grid[None, :]
        if rho == 0:
            self.Psi = 0.5 * np.abs(d)
        else:
            psi = PiecewisePoly.hat(rho).convolve_hat(rho)
            F2 = psi.second_antiderivative_tail()
            self.Psi = F2(d) - 0.5 * d

    def fidelities(self, idx: np.ndarray) -> np.ndarray:
        """Fidelity of every row of interface indices."""
        n, w = idx.shape
        s = np.where(np.arange(w) % 2 == 0, 1.0, -1.0)
        out = np.full(n, self.f_sq)
        out += 2.0 * (self.G[idx] * s).sum(axis=1)
        for a in range(w):
            for b in range(w):
                out -= s[a] * s[b] * self.Psi[idx[:, a], idx[:, b]]
        return out


def _combos(m: int, w: int, endpoint, start: int = 0):
    """Lexicographic chunks of strictly increasing index tuples of width ``w``."""
    it = itertools.combinations(range(m), w)
    while True:
        block = list(itertools.islice(it, CHUNK))
        if not block:
            return
        arr = np.array(block, dtype=np.intp)
        if endpoint is not None:
            i, j = endpoint
            keep = (arr[:, 0] == 0) == bool(i)
            keep &= (arr[:, -1] == m - 1) == bool(j)
            arr = arr[keep]
        if len(arr):
            yield arr


@dataclass
class _Table:
    """Fidelities of all enumerated candidates, grouped by interface count."""

    grid: np.ndarray
    groups: list  # (width, index array, fidelity array)
    extras: list  # (code, fidelity)
    count: int
    f_sq: float


def _tabulate(space: SearchSpace, f: Signal, p: EnergyParams, budget: int, jobs: int) -> _Table:
    if space.size() > budget:
        raise SearchBudgetExceeded(
            f"search space has {space.size()} candidates, budget is {budget}"
        )
    grid = space.grid
    plan = _Plan(f, p, grid)
    m = space.grid_points
    groups = []
    count = 0
    ep = space.endpoint_constraint
    if ep is None or tuple(ep) == (0, 0):
        groups.append((0, np.zeros((1, 0), dtype=np.intp), np.array([plan.f_sq])))
        count += 1
    blocks = [(w, arr) for w in range(2, space.max_interfaces + 1, 2) for arr in _combos(m, w, ep)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fids = list(pool.map(lambda b: plan.fidelities(b[1]), blocks))
    else:
        fids = [plan.fidelities(arr) for _, arr in blocks]
    for (w, arr), fid in zip(blocks, fids):
        groups.append((w, arr, fid))
        count += len(arr)
    seen = set()
    extras = []
    for code in space.extra_candidates:
        if code.interfaces in seen or _enumerated(space, code):
            continue
        seen.add(code.interfaces)
        extras.append((code, fidelity(code, f, p)))
        count += 1
    return _Table(grid, groups, extras, count, plan.f_sq)


def _enumerated(space: SearchSpace, code: BarCode) -> bool:
    """True if ``code`` equals a grid candidate up to rounding."""
    if len(code) > space.max_interfaces:
        return False
    if code.is_empty():
        return space.endpoint_constraint in (None, (0, 0))
    g = space.grid
    x = np.asarray(code.interfaces)
    idx = np.abs(x[:, None] - g[None, :]).argmin(axis=1)
    if len(np.unique(idx)) < len(x) or np.max(np.abs(g[idx] - x)) > SNAP_TOL:
        return False
    ep = space.endpoint_constraint
    return ep is None or tuple(ep) == (int(idx[0] == 0), int(idx[-1] == len(g) - 1))


def _code(grid, idx_row) -> BarCode:
    return BarCode(tuple(grid[np.asarray(idx_row)].tolist()))


def _select(table: _Table, f: Signal, p: EnergyParams, tie_tolerance: float) -> OracleResult:
    lam = p.lam
    best = math.inf
    for w, _, fid in table.groups:
        best = min(best, w + lam * float(fid.min()))
    for code, fid in table.extras:
        best = min(best, len(code) + lam * fid)
    band = tie_tolerance + RECHECK_REL * lam * max(1.0, table.f_sq)
    near = {}
    best_by_count = {}
    for w, arr, fid in table.groups:
        tot = w + lam * fid
        j = int(np.argmin(tot))
        prev = best_by_count.get(w)
        if prev is None or tot[j] < prev[1]:
            best_by_count[w] = (_code(table.grid, arr[j]), float(tot[j]))
        for j in np.flatnonzero(tot <= best + band)[:RECHECK_CAP]:
            c = _code(table.grid, arr[j])
            near[c.interfaces] = c
    for code, fid in table.extras:
        tot = len(code) + lam * fid
        w = len(code)
        prev = best_by_count.get(w)
        if prev is None or tot < prev[1]:
            best_by_count[w] = (code, float(tot))
        if tot <= best + band:
            near[code.interfaces] = code
    exact = sorted(
        ((evaluate(c, f, p), c) for c in near.values()),
        key=lambda rc: (rc[0].total, rc[1].interfaces),
    )
    top_report, top = exact[0]
    ties = [c for r, c in exact[1:] if r.total - top_report.total <= tie_tolerance]
    # order-independent choice among ties: lexicographically first
    group = sorted([top] + ties, key=lambda c: c.interfaces)
    minimizer = group[0]
    report = top_report if minimizer is top else evaluate(minimizer, f, p)
    ties = group[1:]
    return OracleResult(minimizer, report, ties, table.count, best_by_count)


def minimize(
    space: SearchSpace,
    f: Signal,
    p: EnergyParams,
    budget: int = DEFAULT_BUDGET,
    tie_tolerance: float = TIE_TOLERANCE,
    jobs: int = 1,
) -> OracleResult:
    """Global minimiser of the energy over the enumerated codes."""
    return _select(_tabulate(space, f, p, budget, jobs), f, p, tie_tolerance)


def sweep_lambda(
    space: SearchSpace,
    z: BarCode,
    p_template: EnergyParams,
    lam_values: Sequence[float],
    f: Optional[Signal] = None,
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
) -> list[tuple[float, OracleResult]]:
    """Minimise for each lambda; fidelities are tabulated once."""
    if f is None:
        f = observation(z, p_template.sigma)
    table = _tabulate(space, f, p_template, budget, jobs)
    return [(float(lam), _select(table, f, p_template.with_lambda(lam), TIE_TOLERANCE)) for lam in lam_values]


def transition(sweep: list[tuple[float, OracleResult]]) -> Optional[float]:
    """First swept lambda at which the minimiser is no longer the empty code."""
    for lam, res in sweep:
        if not res.minimizer.is_empty():
            return lam
    return None
