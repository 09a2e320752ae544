"""Exception types shared across the toolkit."""


class BotguardError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(BotguardError):
    """Invalid parameters or configuration input."""


class OrderingError(BotguardError):
    """Non-monotone object ids or time regression in a stream."""


class UnknownObjectError(BotguardError):
    """Lookup of an object that is not live in the window."""


class GateError(BotguardError):
    """A flow reached the analyzer without an admitted session."""


class TraceParseError(BotguardError):
    """A trace or verdict file line could not be parsed."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IncompleteRunError(BotguardError):
    """Trace and verdict log do not describe the same complete run."""
