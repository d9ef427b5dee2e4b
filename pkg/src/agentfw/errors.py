"""Exception hierarchy shared across the firewall services."""


class FirewallError(Exception):
    """Base class for all firewall errors."""


class DomainError(FirewallError):
    """An argument is outside its mathematical domain."""


class InvalidThresholds(FirewallError):
    """Decision thresholds must satisfy 0 < quarantine < block <= 1."""


class ParseError(FirewallError):
    """A document could not be parsed at all (malformed JSON etc.)."""


class ValidationError(FirewallError):
    """A document parsed but violates the rule-file contract."""


class StaleVersion(FirewallError):
    """Attempted to activate a rule set whose version does not advance."""


class UpstreamUnavailable(FirewallError):
    """Upstream connection failed or timed out."""


class MalformedUpstreamResponse(FirewallError):
    """Upstream answered with something that is not the wire format."""


class PayloadTooLarge(FirewallError):
    """Serialized envelope exceeds max_body_bytes."""


class ClockRegression(FirewallError):
    """A supposedly monotonic timestamp went backwards."""


class StorageFailure(FirewallError):
    """Durable write to the event log failed."""


class RangeError(FirewallError):
    """Requested log range does not exist."""


class NotFound(FirewallError):
    """Referenced item does not exist."""


class AlreadyResolved(FirewallError):
    """Quarantine item already left the pending state."""


class Unauthenticated(FirewallError):
    """No key presented, or the key is unknown."""


class Revoked(FirewallError):
    """The presented key exists but has been revoked."""


class Forbidden(FirewallError):
    """Authenticated principal lacks the role for this action."""


class UnknownRule(FirewallError):
    """Feedback referenced a rule id absent from the active set."""
