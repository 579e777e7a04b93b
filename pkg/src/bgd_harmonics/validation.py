"""Validation reports and small input-checking helpers."""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field


@dataclass
class CheckResult:
    name: str
    passed: bool
    message: str = ""
    value: float | None = None


@dataclass
class ValidationReport:
    """Ordered list of named pass/fail checks."""

    subject: str
    checks: list = field(default_factory=list)

    def check(self, name, passed, message="", value=None) -> bool:
        self.checks.append(CheckResult(name, bool(passed), "" if passed else message, value))
        return bool(passed)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def merge(self, other: ValidationReport) -> ValidationReport:
        self.checks.extend(other.checks)
        return self

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "ok": self.ok,
            "checks": [
                {"name": c.name, "passed": c.passed, "message": c.message, **({"value": c.value} if c.value is not None else {})}
                for c in self.checks
            ],
        }

    def __str__(self):
        lines = [f"{self.subject}: {'ok' if self.ok else 'FAILED'}"]
        for c in self.checks:
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}{': ' + c.message if c.message else ''}")
        return "\n".join(lines)


def check_positive(name, value, allow_zero=False):
    if not isinstance(value, numbers.Real) or value != value:
        raise ValueError(f"{name} must be a real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}, got {value!r}")
    return value


def check_depth(name, value, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
