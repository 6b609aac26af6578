"""Governance portal over the fabric.

Role-based access control, an approval workflow for simulated
infrastructure resources, a versioned product catalog, pay-as-you-go
usage metering with integer-exact cost reports, and a dashboard snapshot
aggregating fabric and portal state into one document.

Money is integer minor currency units throughout; billing rounds up to
started hours. Resources are in-process records, not real cloud objects.
"""

from __future__ import annotations

import enum
import json
import os
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .clock import Clock, SystemClock
from .errors import (
    InvalidSpec,
    InvalidTransition,
    MissingPrice,
    NegativePrice,
    PermissionDenied,
    StorageError,
    UnknownCurrency,
    UnknownRequest,
    UnknownResource,
)

if TYPE_CHECKING:
    from .fabric import Fabric

MS_PER_HOUR = 3_600_000
SUPPORTED_CURRENCIES = frozenset({"INR", "USD", "EUR"})
AUDIT_LOG_NAME = "portal-audit.log"


class Role(enum.Enum):
    MANAGER = "manager"
    ADMIN = "admin"
    USER = "user"


class PortalAction(enum.Enum):
    SUBMIT_REQUEST = "SubmitRequest"
    APPROVE_REQUEST = "ApproveRequest"
    REJECT_REQUEST = "RejectRequest"
    PUBLISH_CONSUME_OWN = "PublishConsumeOwn"
    VIEW_OWN_REPORTS = "ViewOwnReports"
    VIEW_ALL_REPORTS = "ViewAllReports"
    VIEW_DASHBOARD = "ViewDashboard"
    SET_CATALOG_PRICE = "SetCatalogPrice"
    MANAGE_TENANTS = "ManageTenants"


_USER_ACTIONS = frozenset(
    {
        PortalAction.SUBMIT_REQUEST,
        PortalAction.PUBLISH_CONSUME_OWN,
        PortalAction.VIEW_OWN_REPORTS,
    }
)
_ADMIN_ACTIONS = _USER_ACTIONS | {
    PortalAction.MANAGE_TENANTS,
    PortalAction.SET_CATALOG_PRICE,
    PortalAction.VIEW_ALL_REPORTS,
    PortalAction.VIEW_DASHBOARD,
}
_MANAGER_ACTIONS = _ADMIN_ACTIONS | {
    PortalAction.APPROVE_REQUEST,
    PortalAction.REJECT_REQUEST,
}

PERMISSIONS: dict[Role, frozenset[PortalAction]] = {
    Role.USER: _USER_ACTIONS,
    Role.ADMIN: frozenset(_ADMIN_ACTIONS),
    Role.MANAGER: frozenset(_MANAGER_ACTIONS),
}


def check_permission(role: Role, action: PortalAction) -> bool:
    """Pure, total lookup in the permission matrix."""
    return action in PERMISSIONS.get(role, frozenset())


class ResourceKind(enum.Enum):
    COMPUTE = "Compute"
    VOLUME = "Volume"
    SNAPSHOT = "Snapshot"
    KEY_PAIR = "KeyPair"
    SECURITY_GROUP = "SecurityGroup"
    IP_ADDRESS = "IPAddress"


class RequestState(enum.Enum):
    PENDING = "Pending"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    PROVISIONED = "Provisioned"
    RELEASED = "Released"


class RequestEvent(enum.Enum):
    APPROVE = "approve"
    REJECT = "reject"
    PROVISION = "provision"
    RELEASE = "release"


# The complete workflow; every (state, event) pair not listed is illegal.
TRANSITIONS: dict[tuple[RequestState, RequestEvent], RequestState] = {
    (RequestState.PENDING, RequestEvent.APPROVE): RequestState.APPROVED,
    (RequestState.PENDING, RequestEvent.REJECT): RequestState.REJECTED,
    (RequestState.APPROVED, RequestEvent.PROVISION): RequestState.PROVISIONED,
    (RequestState.PROVISIONED, RequestEvent.RELEASE): RequestState.RELEASED,
}


def apply_event(request: "ResourceRequest", event: RequestEvent) -> RequestState:
    """Advance one request through the workflow, or refuse.

    Illegal (state, event) pairs raise InvalidTransition and leave the
    request untouched.
    """
    target = TRANSITIONS.get((request.state, event))
    if target is None:
        raise InvalidTransition(
            f"request {request.request_id} is {request.state.value}; "
            f"cannot {event.value}"
        )
    request.state = target
    return target

LABEL_KEYS = ("user", "account", "project", "department")

_COMMON_SPEC_KEYS = frozenset({"name", "size", "region", "description"})
ALLOWED_SPEC_KEYS: dict[ResourceKind, frozenset[str]] = {
    ResourceKind.COMPUTE: _COMMON_SPEC_KEYS | {"image", "vcpus"},
    ResourceKind.VOLUME: _COMMON_SPEC_KEYS | {"gb"},
    ResourceKind.SNAPSHOT: _COMMON_SPEC_KEYS | {"source_volume"},
    ResourceKind.KEY_PAIR: _COMMON_SPEC_KEYS | {"public_key"},
    ResourceKind.SECURITY_GROUP: _COMMON_SPEC_KEYS | {"rules"},
    ResourceKind.IP_ADDRESS: _COMMON_SPEC_KEYS | {"pool"},
}

_PRODUCT_PREFIX: dict[ResourceKind, str] = {
    ResourceKind.COMPUTE: "compute",
    ResourceKind.VOLUME: "volume",
    ResourceKind.SNAPSHOT: "snapshot",
    ResourceKind.KEY_PAIR: "keypair",
    ResourceKind.SECURITY_GROUP: "securitygroup",
    ResourceKind.IP_ADDRESS: "ipaddress",
}

DEFAULT_SIZE = "standard"


def product_code_for(kind: ResourceKind, spec: dict[str, str]) -> str:
    return f"{_PRODUCT_PREFIX[kind]}.{spec.get('size', DEFAULT_SIZE)}"


@dataclass(frozen=True)
class Principal:
    principal_id: str
    role: Role


@dataclass
class ResourceRequest:
    request_id: str
    requester: str
    kind: ResourceKind
    spec: dict[str, str]
    labels: dict[str, str]
    state: RequestState = RequestState.PENDING
    decided_by: str | None = None

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "requester": self.requester,
            "kind": self.kind.value,
            "spec": dict(self.spec),
            "labels": dict(self.labels),
            "state": self.state.value,
            "decided_by": self.decided_by,
        }


@dataclass(frozen=True)
class CatalogEntry:
    product_code: str
    unit_price_minor: int
    currency: str
    version: int
    created_ms: int

    def to_dict(self) -> dict:
        return {
            "product_code": self.product_code,
            "unit_price_minor": self.unit_price_minor,
            "currency": self.currency,
            "version": self.version,
            "created_ms": self.created_ms,
        }


@dataclass
class UsageRecord:
    resource_id: str
    product_code: str
    labels: dict[str, str]
    start_ms: int
    end_ms: int | None = None

    @property
    def closed(self) -> bool:
        return self.end_ms is not None

    def to_dict(self) -> dict:
        return {
            "resource_id": self.resource_id,
            "product_code": self.product_code,
            "labels": dict(self.labels),
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
        }


@dataclass(frozen=True)
class CostRow:
    group: str
    currency: str
    total_minor: int

    def to_dict(self) -> dict:
        return {"group": self.group, "currency": self.currency, "total_minor": self.total_minor}


@dataclass(frozen=True)
class CostReport:
    group_by: str
    rows: tuple[CostRow, ...]
    generated_at: int

    def to_dict(self) -> dict:
        return {
            "group_by": self.group_by,
            "rows": [row.to_dict() for row in self.rows],
            "generated_at": self.generated_at,
        }


class Catalog:
    """Versioned prices per product; old versions retained for audit."""

    def __init__(self) -> None:
        self._entries: dict[str, list[CatalogEntry]] = {}
        self._lock = threading.Lock()

    def set_price(self, product_code: str, unit_price_minor: int, currency: str, now_ms: int) -> CatalogEntry:
        if unit_price_minor < 0:
            raise NegativePrice(f"price must be >= 0, got {unit_price_minor}")
        if currency not in SUPPORTED_CURRENCIES:
            raise UnknownCurrency(
                f"currency {currency!r} not in {sorted(SUPPORTED_CURRENCIES)}"
            )
        with self._lock:
            history = self._entries.setdefault(product_code, [])
            entry = CatalogEntry(
                product_code=product_code,
                unit_price_minor=unit_price_minor,
                currency=currency,
                version=len(history) + 1,
                created_ms=now_ms,
            )
            history.append(entry)
        return entry

    def latest(self, product_code: str) -> CatalogEntry | None:
        with self._lock:
            history = self._entries.get(product_code)
            return history[-1] if history else None

    def latest_at(self, product_code: str, at_ms: int) -> CatalogEntry | None:
        """Highest version whose creation time is <= at_ms."""
        with self._lock:
            for entry in reversed(self._entries.get(product_code, [])):
                if entry.created_ms <= at_ms:
                    return entry
        return None

    def history(self, product_code: str) -> list[CatalogEntry]:
        with self._lock:
            return list(self._entries.get(product_code, []))

    def latest_entries(self) -> list[CatalogEntry]:
        with self._lock:
            return [history[-1] for _, history in sorted(self._entries.items()) if history]


def record_cost(record: UsageRecord, catalog: Catalog) -> tuple[str, int]:
    """Cost of one closed record: started hours x latest applicable price.

    Uses the newest catalog version created at or before the record's end
    time. Integer exact: ceil((end - start) / 1h) * unit_price_minor.
    """
    if record.end_ms is None:
        raise ValueError(f"usage record {record.resource_id} is still open")
    entry = catalog.latest_at(record.product_code, record.end_ms)
    if entry is None:
        raise MissingPrice(f"no price for product {record.product_code!r}")
    hours = -((record.start_ms - record.end_ms) // MS_PER_HOUR)  # ceil of duration/1h
    return entry.currency, hours * entry.unit_price_minor


def cost_report(group_by: str, records: Iterable[UsageRecord], catalog: Catalog, *, now_ms: int = 0) -> CostReport:
    """Group closed records by one label and total per (group, currency)."""
    if group_by not in LABEL_KEYS:
        raise ValueError(f"group_by must be one of {LABEL_KEYS}, got {group_by!r}")
    totals: dict[tuple[str, str], int] = {}
    for record in records:
        currency, cost = record_cost(record, catalog)
        key = (record.labels.get(group_by, ""), currency)
        totals[key] = totals.get(key, 0) + cost
    rows = tuple(
        CostRow(group=group, currency=currency, total_minor=total)
        for (group, currency), total in sorted(totals.items())
    )
    return CostReport(group_by=group_by, rows=rows, generated_at=now_ms)


class Portal:
    """Approval workflow, catalog, and metering state behind one lock.

    Transitions are atomic per request: when two decisions race, exactly
    one wins and the other gets InvalidTransition. Every lifecycle event
    is appended to ``<data_dir>/portal-audit.log`` (JSON lines) and
    flushed before the call returns.
    """

    def __init__(self, *, data_dir: str | Path, clock: Clock | None = None) -> None:
        self.clock = clock or SystemClock()
        self.catalog = Catalog()
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._audit_path = self._dir / AUDIT_LOG_NAME
        self._requests: dict[str, ResourceRequest] = {}
        self._resources: dict[str, str] = {}  # resource_id -> request_id
        self._usage: dict[str, UsageRecord] = {}  # resource_id -> record
        self._lock = threading.RLock()

    # -- audit ---------------------------------------------------------

    def _audit(self, request_id: str, event: str, principal: str) -> None:
        line = json.dumps(
            {
                "request_id": request_id,
                "event": event,
                "principal": principal,
                "ts_ms": self.clock.now_ms(),
            },
            separators=(",", ":"),
        )
        try:
            with self._audit_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageError(f"cannot append audit log: {exc}") from exc

    # -- workflow ------------------------------------------------------

    def _require(self, principal: Principal, action: PortalAction) -> None:
        if not check_permission(principal.role, action):
            raise PermissionDenied(
                f"role {principal.role.value} may not {action.value}"
            )

    def submit_request(
        self,
        principal: Principal,
        kind: ResourceKind | str,
        spec: dict[str, str] | None = None,
        labels: dict[str, str] | None = None,
    ) -> ResourceRequest:
        self._require(principal, PortalAction.SUBMIT_REQUEST)
        if not isinstance(kind, ResourceKind):
            try:
                kind = ResourceKind(kind)
            except ValueError:
                raise InvalidSpec(f"unknown resource kind {kind!r}") from None
        spec = dict(spec or {})
        unknown = set(spec) - ALLOWED_SPEC_KEYS[kind]
        if unknown:
            raise InvalidSpec(
                f"unknown spec key(s) {sorted(unknown)} for {kind.value}"
            )
        labels = dict(labels or {})
        bad_labels = set(labels) - set(LABEL_KEYS)
        if bad_labels:
            raise InvalidSpec(f"unknown label key(s) {sorted(bad_labels)}")
        full_labels = {
            "user": labels.get("user", principal.principal_id),
            "account": labels.get("account", "default"),
            "project": labels.get("project", "default"),
            "department": labels.get("department", "default"),
        }
        request = ResourceRequest(
            request_id=str(uuid.uuid4()),
            requester=principal.principal_id,
            kind=kind,
            spec=spec,
            labels=full_labels,
        )
        with self._lock:
            self._requests[request.request_id] = request
        self._audit(request.request_id, "submitted", principal.principal_id)
        return request

    def get_request(self, request_id: str) -> ResourceRequest:
        with self._lock:
            try:
                return self._requests[request_id]
            except KeyError:
                raise UnknownRequest(f"no request {request_id!r}") from None

    def list_requests(self, state: RequestState | None = None) -> list[ResourceRequest]:
        with self._lock:
            requests = list(self._requests.values())
        if state is not None:
            requests = [r for r in requests if r.state is state]
        return requests

    def decide_request(self, principal: Principal, request_id: str, decision: str) -> ResourceRequest:
        """Approve or reject a pending request; records who decided."""
        try:
            event = {"approve": RequestEvent.APPROVE, "reject": RequestEvent.REJECT}[decision]
        except KeyError:
            raise ValueError(f"decision must be 'approve' or 'reject', got {decision!r}") from None
        action = (
            PortalAction.APPROVE_REQUEST
            if event is RequestEvent.APPROVE
            else PortalAction.REJECT_REQUEST
        )
        self._require(principal, action)
        with self._lock:
            request = self.get_request(request_id)
            apply_event(request, event)
            request.decided_by = principal.principal_id
        self._audit(request_id, "approved" if decision == "approve" else "rejected", principal.principal_id)
        return request

    def provision(self, request_id: str) -> tuple[str, UsageRecord]:
        """Materialize an approved request and open its usage meter."""
        with self._lock:
            request = self.get_request(request_id)
            apply_event(request, RequestEvent.PROVISION)
            resource_id = f"r-{uuid.uuid4()}"
            usage = UsageRecord(
                resource_id=resource_id,
                product_code=product_code_for(request.kind, request.spec),
                labels=dict(request.labels),
                start_ms=self.clock.now_ms(),
            )
            self._resources[resource_id] = request_id
            self._usage[resource_id] = usage
        self._audit(request_id, "provisioned", request.requester)
        return resource_id, usage

    def release(self, resource_id: str) -> UsageRecord:
        """End a resource's life and close its usage record."""
        with self._lock:
            request_id = self._resources.get(resource_id)
            if request_id is None:
                raise UnknownResource(f"no resource {resource_id!r}")
            request = self.get_request(request_id)
            apply_event(request, RequestEvent.RELEASE)
            usage = self._usage[resource_id]
            usage.end_ms = self.clock.now_ms()
        self._audit(request_id, "released", request.requester)
        return usage

    def resource_request(self, resource_id: str) -> ResourceRequest:
        with self._lock:
            request_id = self._resources.get(resource_id)
            if request_id is None:
                raise UnknownResource(f"no resource {resource_id!r}")
            return self.get_request(request_id)

    # -- catalog and metering -------------------------------------------

    def set_price(self, principal: Principal, product_code: str, unit_price_minor: int, currency: str) -> CatalogEntry:
        self._require(principal, PortalAction.SET_CATALOG_PRICE)
        return self.catalog.set_price(product_code, unit_price_minor, currency, self.clock.now_ms())

    def usage_records(self, *, closed_only: bool = False) -> list[UsageRecord]:
        with self._lock:
            records = list(self._usage.values())
        if closed_only:
            records = [r for r in records if r.closed]
        return records

    def cost_report(self, group_by: str) -> CostReport:
        return cost_report(
            group_by,
            self.usage_records(closed_only=True),
            self.catalog,
            now_ms=self.clock.now_ms(),
        )

    # -- dashboard inputs ------------------------------------------------

    def request_counts(self) -> dict[str, int]:
        counts = {state.value: 0 for state in RequestState}
        with self._lock:
            for request in self._requests.values():
                counts[request.state.value] += 1
        return counts

    def resource_counts(self) -> dict[str, dict[str, int]]:
        """resources by kind and lifecycle state (Provisioned/Released)."""
        counts: dict[str, dict[str, int]] = {}
        with self._lock:
            for request_id in self._resources.values():
                request = self._requests[request_id]
                by_state = counts.setdefault(request.kind.value, {})
                by_state[request.state.value] = by_state.get(request.state.value, 0) + 1
        return counts

    def cumulative_cost(self) -> tuple[dict[str, int], int]:
        """Total cost per currency over closed records; also returns how
        many closed records had no applicable price (excluded from totals)."""
        totals: dict[str, int] = {}
        unpriced = 0
        for record in self.usage_records(closed_only=True):
            try:
                currency, cost = record_cost(record, self.catalog)
            except MissingPrice:
                unpriced += 1
                continue
            totals[currency] = totals.get(currency, 0) + cost
        return dict(sorted(totals.items())), unpriced


def dashboard_snapshot(fabric: "Fabric", portal: Portal) -> dict:
    """One health/workflow/cost/usage document for operator dashboards."""
    cost, unpriced = portal.cumulative_cost()
    return {
        "generated_at": portal.clock.now_ms(),
        "buses": {
            bus_id: state.to_dict() for bus_id, state in fabric.queue_metrics().items()
        },
        "apps": fabric.persisted_counts(),
        "requests": portal.request_counts(),
        "resources": portal.resource_counts(),
        "cost": cost,
        "unpriced_records": unpriced,
    }
