"""Named numerical checks with a tolerance and an expected outcome."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Check:
    """``value <= tolerance`` (or ``>=`` when ``comparison == "ge"``).

    ``expected="fail"`` marks checks whose failure is the finding, e.g. an
    assumption that is known not to hold for a chart.
    """

    name: str
    value: float
    tolerance: float
    comparison: str = "le"
    expected: str = "pass"

    @property
    def passed(self) -> bool:
        v = float(self.value)
        if math.isnan(v):
            return False
        return v <= self.tolerance if self.comparison == "le" else v >= self.tolerance

    @property
    def ok(self) -> bool:
        return self.passed == (self.expected == "pass")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "comparison": self.comparison,
            "pass": self.passed,
            "expected": self.expected,
        }

    def line(self) -> str:
        op = "<=" if self.comparison == "le" else ">="
        tag = "ok" if self.ok else "FAIL"
        exp = "" if self.expected == "pass" else " (expected: fail)"
        return f"[{tag}] {self.name}: {float(self.value):.6g} {op} {self.tolerance:g}{exp}"
