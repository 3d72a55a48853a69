"""Exception hierarchy shared across the package.

Everything user-facing derives from StubnetError so the CLI can map the
whole family to exit code 1. NumericalError is deliberately outside that
family: it signals a solver breakdown that validation should have made
impossible, and the CLI reports it as an internal failure (exit code 2).
"""

from __future__ import annotations


class StubnetError(Exception):
    """Base class for invalid inputs, configs, and domain violations."""


class ParseError(StubnetError):
    """A tabular input row could not be parsed; message carries the line."""


class DuplicateEdgeError(ParseError):
    """The same (src, dst) pair appeared twice in an edge source."""


class DomainError(StubnetError):
    """A value lies outside its documented domain."""


class ConfigError(StubnetError):
    """A structurally valid request that cannot be satisfied as configured."""


class PreconditionError(StubnetError):
    """An operation was invoked on inputs that fail its preconditions."""


class NumericalError(Exception):
    """A linear solve failed to reach its required residual."""
