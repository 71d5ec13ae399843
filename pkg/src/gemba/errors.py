"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``UsageError`` -> 1, ``DataError`` and
subclasses -> 2, ``TransportError`` / ``AuthMissing`` / ``CacheMiss`` -> 3.
"""

from __future__ import annotations


class GembaError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(GembaError):
    """Bad invocation: unknown variant name, malformed config, missing flag."""


class DataError(GembaError):
    """Input data violates the declared format or an operation's precondition."""


# --- corpus ---------------------------------------------------------------

class MissingSourceFile(DataError):
    def __init__(self, path: str):
        super().__init__(f"missing source file: {path}")
        self.path = path


class LengthMismatch(DataError):
    def __init__(self, path: str, expected: int, found: int):
        super().__init__(f"{path}: expected {expected} lines, found {found}")
        self.path = path
        self.expected = expected
        self.found = found


class DuplicateSystem(DataError):
    def __init__(self, name: str, where: str):
        super().__init__(f"duplicate system {name!r} in {where}")
        self.name = name


class MalformedScoreLine(DataError):
    def __init__(self, path: str, line_no: int, line: str):
        super().__init__(f"{path}:{line_no}: malformed score line {line!r}")
        self.path = path
        self.line_no = line_no


# --- prompt rendering -----------------------------------------------------

class MissingReference(DataError):
    """A reference-based variant was rendered without a reference segment."""


class UnexpectedReference(DataError):
    """A reference segment was supplied to a reference-free variant."""


# --- answer normalization -------------------------------------------------

class UnknownLabel(DataError):
    def __init__(self, label: str):
        super().__init__(f"not a canonical quality class label: {label!r}")
        self.label = label


# --- backend --------------------------------------------------------------

class TransportError(GembaError):
    """HTTP failure that survived the backend's own retry budget."""

    def __init__(self, status: int | None, body: str):
        super().__init__(f"transport failure (status={status}): {body[:200]}")
        self.status = status
        self.body = body


class AuthMissing(GembaError):
    def __init__(self, env_var: str = "GEMBA_API_KEY"):
        super().__init__(f"no API key: set the {env_var} environment variable")
        self.env_var = env_var


class CacheMiss(GembaError):
    def __init__(self, key: str):
        super().__init__(f"replay cache has no entry for key {key}")
        self.key = key


class IoFailure(GembaError):
    """Wraps an OSError from cache or run-store writes."""


# --- meta-evaluation ------------------------------------------------------

class KeySetMismatch(DataError):
    def __init__(self, only_metric: set[str], only_human: set[str]):
        super().__init__(
            f"rankings cover different systems (metric-only={sorted(only_metric)}, "
            f"human-only={sorted(only_human)})"
        )


class TooFewSystems(DataError):
    def __init__(self, count: int):
        super().__init__(f"need at least 2 systems, got {count}")


class NoComparablePairs(DataError):
    """Every candidate comparison pair was dropped (e.g. all gold values tied)."""


class ZeroDenominator(DataError):
    """Tau-b denominator vanished: one axis is tied on every retained pair."""


class EmptyIntersection(DataError):
    """Run store and gold judgments share no (system, segment) support."""


class ManifestMismatch(DataError):
    """A run directory is being resumed with a different configuration."""
