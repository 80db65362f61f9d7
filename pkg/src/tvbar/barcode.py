"""Bar codes as sorted interface lists on [0, 1].

A bar code is the indicator function of a finite union of closed intervals
``[t0, t1] U [t2, t3] U ...`` inside [0, 1]. It vanishes outside [0, 1], so the
first interface always opens a bar and the interface count is even.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import EmptyBarCode, InfeasibleXDimension, InvalidBarCode

MIN_GAP = 1e-12

Endpoints = Optional[Tuple[int, int]]


@dataclass(frozen=True)
class BarCode:
    """Immutable bar code given by its interface positions."""

    interfaces: Tuple[float, ...] = ()

    def __post_init__(self):
        t = tuple(float(v) for v in self.interfaces)
        object.__setattr__(self, "interfaces", t)
        if len(t) % 2:
            raise InvalidBarCode(f"odd number of interfaces ({len(t)})")
        for v in t:
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise InvalidBarCode(f"interface {v!r} outside [0, 1]")
        for left, right in zip(t, t[1:]):
            if right - left < MIN_GAP:
                raise InvalidBarCode(
                    f"interfaces {left!r} and {right!r} closer than {MIN_GAP}"
                )

    @classmethod
    def from_bars(cls, bars: Iterable[Sequence[float]]) -> "BarCode":
        flat = []
        for a, b in bars:
            flat.extend((a, b))
        return cls(tuple(flat))

    @property
    def starts_with_bar(self) -> bool:
        """True when the code equals 1 immediately to the right of x = 0."""
        return bool(self.interfaces) and self.interfaces[0] == 0.0

    @property
    def ends_with_bar(self) -> bool:
        return bool(self.interfaces) and self.interfaces[-1] == 1.0

    @property
    def bars(self) -> list[Tuple[float, float]]:
        t = self.interfaces
        return [(t[i], t[i + 1]) for i in range(0, len(t), 2)]

    @property
    def spaces(self) -> list[Tuple[float, float]]:
        """Internal spaces, i.e. gaps between consecutive bars."""
        t = self.interfaces
        return [(t[i], t[i + 1]) for i in range(1, len(t) - 1, 2)]

    @property
    def n_bars(self) -> int:
        return len(self.interfaces) // 2

    def is_empty(self) -> bool:
        return not self.interfaces

    def __len__(self) -> int:
        return len(self.interfaces)

    def __call__(self, x):
        """Evaluate the indicator function (closed bars)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, b in self.bars:
            out[(x >= a) & (x <= b)] = 1.0
        return out

    def mass(self) -> float:
        return float(sum(b - a for a, b in self.bars))

    def to_dict(self) -> dict:
        return {
            "interfaces": list(self.interfaces),
            "starts_with_bar": self.starts_with_bar,
        }

    def to_json(self) -> str:
        # repr of a Python float is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BarCode":
        code = cls(tuple(data.get("interfaces", ())))
        flag = data.get("starts_with_bar")
        if flag is not None and bool(flag) != code.starts_with_bar:
            raise InvalidBarCode(
                "starts_with_bar does not match the interface list "
                f"(expected {code.starts_with_bar})"
            )
        return code

    @classmethod
    def from_json(cls, text: str) -> "BarCode":
        return cls.from_dict(json.loads(text))


def x_dimension(code: BarCode) -> float:
    """Width of the narrowest bar or internal space."""
    if code.is_empty():
        raise EmptyBarCode("x_dimension of an empty bar code")
    t = np.asarray(code.interfaces)
    return float(np.min(np.diff(t)))


def total_variation(code: BarCode) -> int:
    return len(code.interfaces)


def membership(code: BarCode, omega: float, endpoint_values: Endpoints = None) -> bool:
    """Whether ``code`` lies in B_omega (and B_omega^{ij} when requested)."""
    if not code.is_empty() and x_dimension(code) < omega:
        return False
    if endpoint_values is None:
        return True
    i, j = endpoint_values
    return int(code.starts_with_bar) == i and int(code.ends_with_bar) == j


@dataclass(frozen=True)
class GeneratorConfig:
    omega: float
    max_bars: int = 40
    endpoint_values: Endpoints = None
    rng_seed: int = 0
    max_width_factor: float = field(default=3.0, repr=False)

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")
        if self.max_bars < 1:
            raise ValueError("max_bars must be >= 1")
        if self.endpoint_values is not None:
            i, j = self.endpoint_values
            if i not in (0, 1) or j not in (0, 1):
                raise ValueError("endpoint values must be 0 or 1")


def generate(cfg: GeneratorConfig) -> BarCode:
    """Draw a random bar code in B_omega by sequential width placement.

    Bar and space widths are uniform in ``[omega, 3 omega]`` (clipped to the
    remaining room); the leftover length is used as a random leading offset.
    """
    omega = cfg.omega
    if omega * (2 * cfg.max_bars - 1) > 1.0 + 1e-15:
        raise InfeasibleXDimension(
            f"{cfg.max_bars} bars of width {omega} (with spaces) do not fit in [0, 1]"
        )
    rng = np.random.default_rng(cfg.rng_seed)
    i, j = cfg.endpoint_values if cfg.endpoint_values is not None else (None, None)
    # keep a sliver of room so a required leading/trailing space is non-empty
    reserve = 0.0
    if i == 0:
        reserve += min(omega, 1.0 - omega) * 1e-3
    if j == 0:
        reserve += min(omega, 1.0 - omega) * 1e-3
    budget = 1.0 - reserve
    hi_factor = cfg.max_width_factor
    # nudge above omega so cumulative rounding cannot produce a width < omega
    lo_w = omega * (1.0 + 1e-9)

    widths = []
    used = 0.0
    while True:
        room = budget - used
        if room < lo_w:
            break
        w = rng.uniform(lo_w, min(hi_factor * omega, room))
        widths.append(w)
        used += w
        if (len(widths) + 1) // 2 == cfg.max_bars:
            break
        # a space is only placed if one more bar still fits after it
        room = budget - used - lo_w
        if room < lo_w:
            break
        w = rng.uniform(lo_w, min(hi_factor * omega, room))
        widths.append(w)
        used += w
    if not widths:
        raise InfeasibleXDimension("no bar fits")

    slack = 1.0 - used
    if i == 1 and j == 1:
        offset = 0.0
        widths[-1] += slack
    elif i == 1:
        offset = 0.0
    elif j == 1:
        offset = slack
    else:
        lo = reserve / 2 if i == 0 else 0.0
        hi = slack - (reserve / 2 if j == 0 else 0.0)
        offset = rng.uniform(lo, hi) if hi > lo else lo

    interfaces = [offset]
    for w in widths:
        interfaces.append(interfaces[-1] + w)
    interfaces = np.clip(interfaces, 0.0, 1.0)
    if j == 1:
        interfaces[-1] = 1.0
    return BarCode(tuple(interfaces.tolist()))
