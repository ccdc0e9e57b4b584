"""Small report containers returned by validation and diagnostic routines.

A failing check is valid data, not an exception; callers decide whether to
treat it as fatal (strict mode) or advisory.
"""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckItem:
    """One inequality or identity: ``lhs`` compared against ``rhs``."""

    name: str
    lhs: float
    rhs: float
    passed: bool
    note: str = ""


@dataclass
class CheckReport:
    items: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def add(self, name, lhs, rhs, passed, note=""):
        self.items.append(CheckItem(name, float(lhs), float(rhs), bool(passed), note))

    def failures(self):
        return [item for item in self.items if not item.passed]

    def summary(self) -> str:
        lines = []
        for item in self.items:
            status = "pass" if item.passed else "FAIL"
            note = f"  ({item.note})" if item.note else ""
            lines.append(f"[{status}] {item.name}: {item.lhs:.6g} vs {item.rhs:.6g}{note}")
        return "\n".join(lines)


@dataclass
class DiagnosticReport:
    """Outcome of a numerical diagnostic sweep.

    metric is the worst value observed: a max LHS/RHS ratio for inequality
    chains, a max residual for identity checks.
    """

    name: str
    passed: bool
    metric: float
    detail: CheckReport = field(default_factory=CheckReport)


@dataclass
class BoundReport:
    """Regret-bound verification result."""

    passed: bool
    bound: float
    comparator_regret: float
    regret: float
    slack: float
