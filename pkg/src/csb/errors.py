"""Error vocabulary shared by the bus fabric, portal, gateway, and CLI.

Every failure that can cross a module or wire boundary is a ``CsbError``
carrying a stable machine-readable ``code``. The gateway maps codes to
HTTP statuses; the CLI maps statuses to exit codes.
"""


class CsbError(Exception):
    code = "InternalError"


class ConfigError(CsbError):
    code = "ConfigError"


class InvalidIdentifier(CsbError):
    """Tenant/app/bus identifier outside ``[a-z0-9_-]{1,64}``."""

    code = "InvalidIdentifier"


class InvalidToken(CsbError):
    """Signature check failed or the token binding does not match."""

    code = "InvalidToken"


class Congested(CsbError):
    """Queue at capacity; the publish was refused, never silently dropped.

    Callers may retry after the persister has drained the queue.
    """

    code = "Congested"


class PayloadTooLarge(CsbError):
    code = "PayloadTooLarge"


class AlreadyRegistered(CsbError):
    code = "AlreadyRegistered"


class UnknownApplication(CsbError):
    code = "UnknownApplication"


class TenantMismatch(CsbError):
    """Token is valid but bound to a different application."""

    code = "TenantMismatch"


class UnknownSubscription(CsbError):
    code = "UnknownSubscription"


class StorageError(CsbError):
    """Datastore write failed; unpersisted envelopes were re-queued."""

    code = "StorageError"


class PermissionDenied(CsbError):
    code = "PermissionDenied"


class InvalidSpec(CsbError):
    """Resource request with an unknown kind, spec key, or label key."""

    code = "InvalidSpec"


class UnknownRequest(CsbError):
    code = "UnknownRequest"


class InvalidTransition(CsbError):
    """Workflow event not legal in the request's current state."""

    code = "InvalidTransition"


class UnknownResource(CsbError):
    code = "UnknownResource"


class NegativePrice(CsbError):
    code = "NegativePrice"


class UnknownCurrency(CsbError):
    code = "UnknownCurrency"


class MissingPrice(CsbError):
    """No catalog version applies to a usage record's product."""

    code = "MissingPrice"


class Unauthorized(CsbError):
    """Missing or unknown API key."""

    code = "Unauthorized"


class BindError(CsbError):
    code = "BindError"


class InvalidRequest(CsbError):
    """Malformed HTTP request body or parameters."""

    code = "InvalidRequest"
