"""Exception hierarchy shared across the platform."""


class PowerbenchError(Exception):
    """Base class for all platform errors."""


class ValidationError(PowerbenchError):
    """Malformed input: bad identifiers, out-of-bounds values, broken specs."""


class RangeError(ValidationError):
    """Numeric argument outside its permitted range."""


class NotFoundError(PowerbenchError):
    """Referenced node, device, job, or session does not exist."""


class StateError(PowerbenchError):
    """Operation not legal in the current state."""


class SafetyError(StateError):
    """Operation refused because it would violate a hardware-safety rule."""


class ExclusivityError(StateError):
    """A single-occupancy resource (monitor channel, session) is already taken."""


class PermissionError_(PowerbenchError):
    """Caller's role does not allow the operation."""


class RoutingError(PowerbenchError):
    """No usable automation backend for the requested dispatch."""


class EncodingError(PowerbenchError):
    """Input cannot be represented in the target wire format."""


class PartialDeliveryError(RoutingError):
    """Backend lost mid-dispatch; carries the delivered prefix."""

    def __init__(self, message: str, delivered: list):
        super().__init__(message)
        self.delivered = delivered
