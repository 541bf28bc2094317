"""Typed error surface for the whole engine.

Every distinct way an input can be invalid gets its own exception class so
callers (and the CLI exit-code mapping) can tell validation failures apart
without parsing messages.
"""


class EngineError(Exception):
    """Base class for validation and input errors raised by this package."""


# -- vector / map math ------------------------------------------------------

class LengthMismatch(EngineError):
    pass


class ZeroNorm(EngineError):
    pass


class EmptyInput(EngineError):
    pass


class NegativeEntry(EngineError):
    pass


class SinglePixel(EngineError):
    pass


class ShapeMismatch(EngineError):
    pass


class MaskOutOfRange(EngineError):
    pass


class NonFiniteValues(EngineError):
    pass


# -- scale selection / prompting --------------------------------------------

class ClickOutOfBounds(EngineError):
    pass


class BadSchedule(EngineError):
    pass


class TooFewCandidates(EngineError):
    pass


class MissingFixture(EngineError):
    pass


class ZeroNormAnchor(EngineError):
    pass


class BoxOutOfBounds(EngineError):
    pass


class DuplicatePoint(EngineError):
    pass


# -- memory gate / simulator -------------------------------------------------

class EmptyInitialMask(EngineError):
    pass


class OutOfOrderWrite(EngineError):
    pass


class EmptyBank(EngineError):
    pass


class BadConfig(EngineError):
    pass


# -- fixture codec / manifest / CLI ------------------------------------------

class BadMagic(EngineError):
    pass


class BadHeader(EngineError):
    pass


class TruncatedPayload(EngineError):
    pass


class ShapeOverflow(EngineError):
    pass


class IoFailure(EngineError):
    pass


class SchemaViolation(EngineError):
    pass


class UsageError(EngineError):
    """Bad command line: unknown subcommand, missing flag, malformed value."""
