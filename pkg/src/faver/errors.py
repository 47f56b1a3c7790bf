"""Exception hierarchy shared across the faver pipeline."""

from __future__ import annotations


class FaverError(Exception):
    """Base class for all errors raised by this package."""


# --- spec-file / spec-model errors -----------------------------------------

class SpecSyntaxError(FaverError):
    """Malformed spec file. Carries the offending line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class SpecSemanticError(FaverError):
    """Structurally valid spec file violating a semantic rule
    (duplicate port, constraint on an unknown port, ...)."""


class ValidationError(FaverError):
    """Generator output rejected: it violates a contract the pipeline
    enforces (port preservation, stimulus coverage, empty plan, ...)."""


# --- generator client -------------------------------------------------------

class GeneratorError(FaverError):
    """Generator backend failure."""


class TransportError(GeneratorError):
    """Backend or external process unreachable / died mid-request."""


class GeneratorTimeout(TransportError):
    """Request exceeded the configured timeout."""


class MissingFixture(GeneratorError):
    """Scripted mock has no fixture for the requested (task, attempt)."""


# --- reference model --------------------------------------------------------

class ProtocolError(FaverError):
    """Malformed request or reply on the model runner protocol, or a
    step call that does not cover the model's input signature."""


class ModelFault(FaverError):
    """The reference model raised internally.  The message is reported
    verbatim in the verification report."""

    def __init__(self, message: str, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


# --- HDL interpreter --------------------------------------------------------

class HdlError(FaverError):
    """Base class for HDL front-end and simulation errors."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        loc = f"{line}:{col}: " if line is not None and col is not None else \
              f"line {line}: " if line is not None else ""
        super().__init__(loc + message)
        self.line = line
        self.col = col


class LexError(HdlError):
    pass


class ParseError(HdlError):
    pass


class UnsupportedConstruct(ParseError):
    """Source uses a named construct outside the supported subset."""

    def __init__(self, construct: str, line: int | None = None, col: int | None = None):
        super().__init__(f"unsupported construct: {construct}", line, col)
        self.construct = construct


class UndeclaredIdentifier(HdlError):
    pass


class MultipleDrivers(HdlError):
    pass


class CombinationalLoop(HdlError):
    pass


class EvaluationError(HdlError):
    pass


# --- VCD ingestion ----------------------------------------------------------

class VcdSyntaxError(FaverError):
    pass


class MissingSignal(FaverError):
    def __init__(self, name: str):
        super().__init__(f"signal not found in VCD: {name}")
        self.name = name


class FourStateValue(FaverError):
    """An x/z value was encountered; two-state traces cannot represent it."""

    def __init__(self, signal: str, time: int):
        super().__init__(f"four-state value on '{signal}' at time {time}")
        self.signal = signal
        self.time = time


# --- stimuli / co-simulation / metrics --------------------------------------

class MismatchedCases(FaverError):
    """Plan cases and refined stimulus cases do not correspond 1:1."""


class CoSimError(FaverError):
    pass


class TraceLengthMismatch(CoSimError):
    """After applying the latency offset, fewer than one cycle overlaps."""


class EmptySuite(CoSimError):
    pass


class DegenerateInput(FaverError):
    """Closed-form input outside its domain (zero denominator)."""


class LengthMismatch(FaverError):
    """Session outcomes and ground-truth verdicts do not line up."""


class SessionAborted(FaverError):
    """Generator failure mid-session; carries the partial outcome."""

    def __init__(self, message: str, partial_outcome=None):
        super().__init__(message)
        self.partial_outcome = partial_outcome
