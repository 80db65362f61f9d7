"""Sufficient conditions under which the generating code is the unique
minimiser. A false verdict means "outside the proven regime", nothing more.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .exceptions import OutOfLemmaScope


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    strict: bool

    @property
    def satisfied(self) -> bool:
        return self.lhs < self.rhs if self.strict else self.lhs <= self.rhs

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": "<" if self.strict else "<=",
            "satisfied": self.satisfied,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class Certificate:
    functional: str
    omega: float
    sigma: float
    rho: float
    lam: float
    conditions: tuple = ()
    notes: tuple = field(default=())

    @property
    def verdict(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "omega": self.omega,
            "sigma": self.sigma,
            "rho": self.rho,
            "lambda": self.lam,
            "conditions": [c.to_dict() for c in self.conditions],
            "verdict": self.verdict,
            "status": "certified" if self.verdict else "outside proven regime",
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        rows = [f"{self.functional}  omega={self.omega:g} sigma={self.sigma:g} "
                f"rho={self.rho:g} lambda={self.lam:g}"]
        for c in self.conditions:
            rel = "<" if c.strict else "<="
            mark = "ok " if c.satisfied else "FAIL"
            rows.append(f"  [{mark}] {c.name:<28} {c.lhs:.6g} {rel} {c.rhs:.6g}  margin {c.margin:+.6g}")
        rows.append(f"  verdict: {'certified' if self.verdict else 'outside proven regime'}")
        rows.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(rows)


def certify_F1(omega: float, sigma: float, lam: float) -> Certificate:
    conds = (
        Condition("sigma <= omega", sigma, omega, strict=False),
        Condition("2/3 sigma + 2/lambda < omega", 2.0 * sigma / 3.0 + 2.0 / lam, omega, strict=True),
    )
    return Certificate("F1", omega, sigma, 0.0, lam, conds)


def certify_F2(omega: float, sigma: float, lam: float) -> Certificate:
    conds = (
        Condition("sigma <= omega/2", sigma, omega / 2.0, strict=False),
        Condition("2/lambda + 21/15 sigma < omega", 2.0 / lam + 21.0 * sigma / 15.0, omega, strict=True),
    )
    return Certificate("F2", omega, sigma, sigma, lam, conds)


def f3_bracket(sigma: float, rho: float) -> float:
    """``(-sigma^3 + 5 rho sigma^2 + 17 rho^3) / (15 rho^2)``."""
    return (-sigma**3 + 5.0 * rho * sigma**2 + 17.0 * rho**3) / (15.0 * rho**2)


def certify_F3(omega: float, sigma: float, rho: float, lam: float) -> Certificate:
    notes = ()
    if rho < sigma:
        notes = ("rho < sigma: no result is proven for this regime",)
    conds = (
        Condition("sigma <= rho", sigma, rho, strict=False),
        Condition("rho <= omega/2", rho, omega / 2.0, strict=False),
        Condition("2/lambda + bracket(rho,sigma) < omega", 2.0 / lam + f3_bracket(sigma, rho), omega, strict=True),
    )
    return Certificate("F3", omega, sigma, rho, lam, conds, notes)


def lemma_f(rho: float, sigma: float) -> float:
    """Two-branch function of the interface-count lemma."""
    if sigma <= rho:
        return (-sigma**3 + 5.0 * rho * sigma**2 + 10.0 * rho**3) / rho**2
    return (-rho**3 + 5.0 * sigma * rho**2 + 10.0 * sigma**3) / sigma**2


def unified_condition(omega: float, sigma: float, rho: float, lam: float) -> Certificate:
    """``2/lambda + (7 rho + f(rho, sigma))/15 < omega`` for rho, sigma <= omega/2."""
    if rho == 0:
        raise OutOfLemmaScope(
            "rho = 0 is outside this lemma; the F1 condition is its degenerate form"
        )
    if rho > omega / 2 or sigma > omega / 2:
        raise OutOfLemmaScope(f"rho and sigma must not exceed omega/2 = {omega / 2}")
    lhs = 2.0 / lam + (7.0 * rho + lemma_f(rho, sigma)) / 15.0
    conds = (Condition("2/lambda + (7 rho + f)/15 < omega", lhs, omega, strict=True),)
    return Certificate("F3", omega, sigma, rho, lam, conds)


def certify(functional: str, omega: float, sigma: float, lam: float, rho: float | None = None) -> Certificate:
    if functional == "F1":
        return certify_F1(omega, sigma, lam)
    if functional == "F2":
        return certify_F2(omega, sigma, lam)
    if functional == "F3":
        if rho is None:
            raise ValueError("F3 needs rho")
        return certify_F3(omega, sigma, rho, lam)
    raise ValueError(f"unknown functional {functional!r}")
