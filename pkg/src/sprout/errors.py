"""Exception hierarchy shared across the package.

Domain errors (bad arguments, unresolvable state) derive from SproutError;
gateway transport failures derive from GatewayError so callers can treat
"the model is unreachable" uniformly regardless of which operation raised.
"""

from __future__ import annotations


class SproutError(Exception):
    """Base class for all domain errors."""


class NotFound(SproutError):
    """A referenced project or node id does not exist."""


class InvalidArgument(SproutError):
    """A precondition on arguments was violated."""


class Conflict(SproutError):
    """The operation clashes with the project's current run state."""


class GatewayError(SproutError):
    """Base class for LLM gateway failures."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class Unauthorized(GatewayError):
    """The remote service rejected the credential."""


class RateLimited(GatewayError):
    """The remote service kept returning 429 after all retries."""


class TransportError(GatewayError):
    """Network-level failure after all retries."""


class UnparseableResponse(SproutError):
    """Model output kept violating the structured format after re-asks."""


class MissingField(SproutError):
    """A required labeled field was absent from a structured response."""

    def __init__(self, field: str):
        super().__init__(f"missing field: {field}")
        self.field = field


class NonContiguousSelection(SproutError):
    """Grouped nodes must be adjacent along a single chain."""


class RootSelected(SproutError):
    """The synthetic root cannot be grouped, split, trimmed or refined."""


class ModelReturnedSingleParagraph(SproutError):
    """A split request needs at least two paragraphs back."""


class EmptyRewrite(SproutError):
    """A refinement produced a blank paragraph."""


class IntentMismatch(SproutError):
    """Adoption requires both nodes to share an intent key."""


class NotOnActiveChain(SproutError):
    """The operation only applies to nodes on the active chain."""


class SchemaError(SproutError):
    """A persisted document failed validation.

    ``pointer`` names the offending location, e.g. ``version`` or
    ``/tree/nodes/n3/anchor``.
    """

    def __init__(self, pointer: str, message: str = ""):
        super().__init__(f"schema error at {pointer}" + (f": {message}" if message else ""))
        self.pointer = pointer


class LengthMismatch(SproutError):
    """Predictions did not align 1:1 with corpus paragraphs."""
