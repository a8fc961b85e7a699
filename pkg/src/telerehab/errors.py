"""Exception hierarchy shared across the engine.

Service code maps these onto HTTP status codes, so subclass rather than
raising bare ValueError from domain logic.
"""


class TelerehabError(Exception):
    """Base class for all engine errors."""


class ParseError(TelerehabError):
    """Malformed input document (bad JSON line, wrong field shape)."""


class ValidationError(TelerehabError):
    """Structurally parseable input violating a domain invariant."""


class DegenerateGeometryError(ValidationError):
    """Angle requested on coincident or zero-length joint vectors."""


class UnknownNameError(ValidationError):
    """Reference to a posture/movement/exercise name that is not defined."""


class ChainError(ValidationError):
    """Movement sequence whose endpoint postures do not connect."""


class SessionStateError(TelerehabError):
    """Illegal operation for the session engine's current state."""


class SimulationError(TelerehabError):
    """Streaming simulator faults."""


class ConnectionFailed(SimulationError):
    """Signaling handshake exhausted its retransmission budget."""


class ChannelFailure(SimulationError):
    """Reliable channel gave up on a message after the retry limit."""


class IntegrityError(TelerehabError):
    """Store write that would dangle a reference or break a constraint."""


class NotFoundError(TelerehabError):
    """Lookup of a document id that does not exist."""


class ConflictError(TelerehabError):
    """Write conflicting with an existing document."""
