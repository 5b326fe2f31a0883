"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class SubmaxError(Exception):
    """Base class for every error raised by submax."""


class InvalidConfiguration(SubmaxError, ValueError):
    """A parameter is outside its domain (machine count, epsilon, ...)."""


class DomainError(SubmaxError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class PreconditionError(SubmaxError, ValueError):
    """The caller broke a documented precondition (e.g. non-bases)."""


class SizeRefusal(SubmaxError, ValueError):
    """An exhaustive routine was asked to enumerate too large a lattice."""


class ContractViolation(SubmaxError, RuntimeError):
    """A plug-in or pipeline produced output that breaks its contract."""


class ParseError(SubmaxError, ValueError):
    """An instance or config file does not follow its grammar."""

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
