"""Exception types shared across the engine."""

from __future__ import annotations


class EventflowError(Exception):
    """Base class for all engine errors."""


class DomainError(EventflowError, ValueError):
    """An argument violates a numeric or structural precondition."""


class LoadError(EventflowError):
    """A data file failed to parse or validate."""

    def __init__(self, path: str, line: int | None, message: str):
        self.path = path
        self.line = line
        self.message = message
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


class NoPathError(EventflowError):
    """One or more origin-destination pairs are unreachable."""

    def __init__(self, pairs: list[tuple[str, str]]):
        self.pairs = sorted(pairs)
        listing = ", ".join(f"{o}->{d}" for o, d in self.pairs)
        super().__init__(f"no path for {len(self.pairs)} OD pair(s): {listing}")


class ValidationFailure(EventflowError):
    """A cross-file validation pass found violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            f"{len(self.violations)} validation violation(s):\n"
            + "\n".join(f"  - {v}" for v in self.violations)
        )
