"""Common Service Bus fabric.

A multi-tenant message fabric: bounded FIFO buses with capability-token
access control, durable per-application logs, a governed portal for
resource requests and pay-as-you-go cost reporting, and an HTTP gateway
plus CLI on top.
"""

from .bus import (
    DEFAULT_QUEUE_CAPACITY,
    MAX_PAYLOAD_BYTES,
    BusInstance,
    Envelope,
    QueueState,
    Receipt,
)
from .clock import Clock, SystemClock, VirtualClock
from .datastore import Datastore
from .errors import (
    AlreadyRegistered,
    BindError,
    ConfigError,
    Congested,
    CsbError,
    InvalidIdentifier,
    InvalidRequest,
    InvalidSpec,
    InvalidToken,
    InvalidTransition,
    MissingPrice,
    NegativePrice,
    PayloadTooLarge,
    PermissionDenied,
    StorageError,
    TenantMismatch,
    Unauthorized,
    UnknownApplication,
    UnknownCurrency,
    UnknownRequest,
    UnknownResource,
    UnknownSubscription,
)
from .fabric import Fabric, Subscription
from .placement import PlacementPolicy, PlacementTable
from .portal import (
    Catalog,
    CatalogEntry,
    CostReport,
    CostRow,
    Portal,
    PortalAction,
    Principal,
    RequestEvent,
    RequestState,
    ResourceKind,
    ResourceRequest,
    Role,
    UsageRecord,
    check_permission,
    cost_report,
    dashboard_snapshot,
    record_cost,
)
from .tokens import Token, issue_token, verify_token

__version__ = "0.1.0"

__all__ = [
    "AlreadyRegistered",
    "BindError",
    "BusInstance",
    "Catalog",
    "CatalogEntry",
    "Clock",
    "ConfigError",
    "Congested",
    "CostReport",
    "CostRow",
    "CsbError",
    "Datastore",
    "DEFAULT_QUEUE_CAPACITY",
    "Envelope",
    "Fabric",
    "InvalidIdentifier",
    "InvalidRequest",
    "InvalidSpec",
    "InvalidToken",
    "InvalidTransition",
    "MAX_PAYLOAD_BYTES",
    "MissingPrice",
    "NegativePrice",
    "PayloadTooLarge",
    "PermissionDenied",
    "PlacementPolicy",
    "PlacementTable",
    "Portal",
    "PortalAction",
    "Principal",
    "QueueState",
    "Receipt",
    "RequestEvent",
    "RequestState",
    "ResourceKind",
    "ResourceRequest",
    "Role",
    "StorageError",
    "Subscription",
    "SystemClock",
    "TenantMismatch",
    "Token",
    "Unauthorized",
    "UnknownApplication",
    "UnknownCurrency",
    "UnknownRequest",
    "UnknownResource",
    "UnknownSubscription",
    "UsageRecord",
    "VirtualClock",
    "check_permission",
    "cost_report",
    "dashboard_snapshot",
    "issue_token",
    "record_cost",
    "verify_token",
]
