from __future__ import annotations

from typing import Any, List, Optional, Sequence, Tuple


class CCHError(Exception):
    """Base class for every failure the solver reports. `exit_code` is what the CLI returns."""

    exit_code: int = 1


class ConfigParseError(CCHError):
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(CCHError):
    exit_code = 3

    def __init__(self, issues: Sequence[Tuple[str, str]]):
        self.issues: List[Tuple[str, str]] = list(issues)
        lines = [f"{path}: {msg}" for path, msg in self.issues]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))

    @property
    def paths(self) -> List[str]:
        return [p for p, _ in self.issues]


class InvalidParameterError(CCHError, ValueError):
    exit_code = 3


class NonFiniteFieldError(CCHError, ValueError):
    exit_code = 3


class SymmetryError(CCHError, ValueError):
    exit_code = 3


class PsiDomainError(CCHError, ValueError):
    exit_code = 3


class BlowUpError(CCHError):
    exit_code = 4

    def __init__(self, message: str, snapshot: Any = None, partial: Any = None):
        super().__init__(message)
        self.snapshot = snapshot  # last good SolverState
        self.partial = partial    # RunResult up to the failure, if the driver had one


class InvariantViolation(CCHError):
    exit_code = 5

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invariant check failed: " + "; ".join(self.violations))


class ArtifactFormatError(CCHError):
    """A persisted snapshot, CSV or summary does not match its documented format."""

    exit_code = 2
