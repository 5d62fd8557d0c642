"""Exception hierarchy for the hard-core model toolkit."""

from __future__ import annotations

from typing import Optional


class HardCoreError(Exception):
    """Base class for every error raised by this package."""


class CatalogError(HardCoreError, KeyError):
    """Unknown graph or model name."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class ParameterError(HardCoreError, ValueError):
    """Parameters outside their admissible range."""


class SupportMismatchError(HardCoreError):
    """A transition matrix whose positive entries do not match its graph."""


class SingularEvaluationError(HardCoreError, ZeroDivisionError):
    """Zero denominator while evaluating a local ratio."""


class InapplicableConditionError(HardCoreError):
    """The interval narrowing scheme does not apply to this matrix."""


class DiamondDomainError(HardCoreError, ValueError):
    """The inner expression of the diamond reduction is negative at ``v``."""

    def __init__(self, v: float, inner: float):
        super().__init__(f"eta undefined at v={v!r}: inner expression {inner!r} < 0")
        self.v = v
        self.inner = inner


class ScanRangeError(HardCoreError, ValueError):
    """A root scan range that cannot contain every root."""


class UnsupportedAssumptionError(HardCoreError):
    """Requested route needs an assumption the parameters do not meet."""


class EnumerationBudgetError(HardCoreError):
    """Configuration enumeration would exceed the configured budget."""

    def __init__(self, bound: int, budget: int):
        super().__init__(f"enumeration bound {bound} exceeds budget {budget}")
        self.bound = bound
        self.budget = budget


class DegenerateMeasureError(HardCoreError):
    """No admissible configuration carries positive weight."""


class ShapeMismatchError(HardCoreError, ValueError):
    """Trees or boundary fields of inconsistent shape."""

    def __init__(self, message: str, detail: Optional[str] = None):
        super().__init__(message if detail is None else f"{message}: {detail}")
