"""The multi-bus fabric.

Owns N bus instances, places each application on exactly one bus at
registration time, routes producer traffic to the right bus (the agent
role), persists drained envelopes into per-application datastore logs,
and serves consumers from those logs.

Delivery contract: a publish that returned a receipt is eventually
persisted (congestion refusals are the only unpersisted submissions), the
datastore deduplicates by msg_id so persist retries cannot double-write,
and consumers see each application's envelopes in bus_seq order 1..N with
no gaps and nothing from any other application.
"""

from __future__ import annotations

import secrets as _secrets
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from .bus import DEFAULT_QUEUE_CAPACITY, BusInstance, Envelope, QueueState, Receipt
from .clock import Clock, SystemClock
from .datastore import Datastore
from .errors import (
    AlreadyRegistered,
    ConfigError,
    InvalidToken,
    StorageError,
    TenantMismatch,
    UnknownApplication,
    UnknownSubscription,
)
from .placement import PlacementPolicy, PlacementTable, parse_policy
from .tokens import Token, issue_token, validate_identifier, verify_token

DEFAULT_PERSIST_BATCH = 256


@dataclass
class Subscription:
    """A consumer's ack cursor over one application's log."""

    sub_id: str
    token: Token
    app_id: str
    cursor: int = 0


@dataclass
class _Registration:
    tenant_id: str
    app_id: str
    bus_id: str
    token: Token


class Fabric:
    """N Common Service Buses behind one placement table and datastore."""

    def __init__(
        self,
        num_buses: int,
        *,
        capacity: int = DEFAULT_QUEUE_CAPACITY,
        policy: PlacementPolicy | str = PlacementPolicy.ROUND_ROBIN,
        data_dir: str | Path,
        secret: bytes | None = None,
        clock: Clock | None = None,
    ) -> None:
        if num_buses < 1:
            raise ConfigError(f"a fabric needs at least one bus, got {num_buses}")
        self._clock = clock or SystemClock()
        self._secret = secret if secret is not None else _secrets.token_bytes(32)
        self._policy = parse_policy(policy)
        self._buses: dict[str, BusInstance] = {
            f"b{i}": BusInstance(f"b{i}", secret=self._secret, capacity=capacity, clock=self._clock)
            for i in range(num_buses)
        }
        self._placement = PlacementTable(self._policy)
        self._datastore = Datastore(data_dir, clock=self._clock)
        self._registrations: dict[str, _Registration] = {}
        self._subscriptions: dict[str, Subscription] = {}
        self._lock = threading.Lock()

    @property
    def secret(self) -> bytes:
        return self._secret

    @property
    def datastore(self) -> Datastore:
        return self._datastore

    @property
    def placement(self) -> PlacementTable:
        return self._placement

    def bus_ids(self) -> list[str]:
        return sorted(self._buses, key=lambda b: int(b[1:]))

    def bus(self, bus_id: str) -> BusInstance:
        try:
            return self._buses[bus_id]
        except KeyError:
            raise ConfigError(f"no bus {bus_id!r} in this fabric") from None

    def register_application(self, tenant_id: str, app_id: str) -> Token:
        """Place a new application and hand back its capability token.

        Also creates the app's empty datastore log and a default
        subscription whose sub_id is the app_id.
        """
        validate_identifier(tenant_id, "tenant_id")
        validate_identifier(app_id, "app_id")
        with self._lock:
            if app_id in self._registrations:
                raise AlreadyRegistered(f"application {app_id!r} is already registered")
            loads = [(bus_id, len(self._buses[bus_id].assigned_apps)) for bus_id in self.bus_ids()]
            bus_id = self._placement.assign(app_id, loads)
            self._buses[bus_id].assigned_apps.add(app_id)
            self._datastore.create_log(app_id)
            # A recovered log resumes its gap-free bus_seq, not restarts it.
            self._buses[bus_id].resume_app_seq(app_id, self._datastore.max_seq(app_id))
            token = issue_token(tenant_id, app_id, bus_id, secret=self._secret, clock=self._clock)
            self._registrations[app_id] = _Registration(tenant_id, app_id, bus_id, token)
            self._subscriptions[app_id] = Subscription(sub_id=app_id, token=token, app_id=app_id)
        return token

    def registered_tenant(self, app_id: str) -> str | None:
        with self._lock:
            reg = self._registrations.get(app_id)
            return reg.tenant_id if reg else None

    def _check_binding(self, token: Token) -> str:
        """Verify signature and registration binding; return the placed bus id."""
        if not verify_token(token, self._secret):
            raise InvalidToken("token signature does not verify")
        with self._lock:
            reg = self._registrations.get(token.app_id)
        if reg is None:
            raise UnknownApplication(f"application {token.app_id!r} has no placement")
        if reg.tenant_id != token.tenant_id or reg.bus_id != token.bus_id:
            raise InvalidToken("token binding does not match the placement record")
        return reg.bus_id

    def agent_publish(self, token: Token, payload: bytes) -> Receipt:
        """Route one publish through the agent front-end to the app's bus."""
        bus_id = self._check_binding(token)
        return self._buses[bus_id].enqueue(token, payload)

    def persist_loop(self, bus_id: str, batch: int = DEFAULT_PERSIST_BATCH) -> int:
        """One persister pass: drain up to ``batch``, append, flush, commit.

        On a storage failure the unwritten tail goes back to the queue
        front in order (slots were reserved at drain time, so the requeue
        can never breach capacity) and StorageError propagates; the
        already-appended prefix stays persisted and a retry skips it via
        msg_id dedup.
        """
        if batch < 1:
            raise ValueError(f"batch must be positive, got {batch}")
        bus = self.bus(bus_id)
        envelopes = bus.drain(batch, reserve=True)
        if not envelopes:
            return 0
        persisted = 0
        touched: set[str] = set()
        try:
            for envelope in envelopes:
                self._datastore.append(envelope)
                touched.add(envelope.app_id)
                persisted += 1
        except StorageError:
            try:
                self._datastore.sync(touched)
            except StorageError:
                pass  # the original failure is the one worth reporting
            bus.release_reserved(persisted)
            bus.requeue_front(envelopes[persisted:])
            raise
        self._datastore.sync(touched)
        bus.release_reserved(len(envelopes))
        return persisted

    def persist_all(self, batch: int = DEFAULT_PERSIST_BATCH) -> int:
        """Quiesce: run persister passes until every queue is empty."""
        total = 0
        while True:
            moved = 0
            for bus_id in self.bus_ids():
                moved += self.persist_loop(bus_id, batch)
            total += moved
            if moved == 0 and all(
                self._buses[b].queue_metrics().depth == 0 for b in self.bus_ids()
            ):
                return total

    def _check_consumer(self, token: Token, app_id: str) -> None:
        if not verify_token(token, self._secret):
            raise InvalidToken("token signature does not verify")
        if token.app_id != app_id:
            raise TenantMismatch(f"token is bound to {token.app_id!r}, not {app_id!r}")
        self._check_binding(token)

    def consume(self, token: Token, app_id: str, after: int = 0, limit: int = 100) -> list[Envelope]:
        """Read persisted envelopes with bus_seq > after, ascending, <= limit."""
        self._check_consumer(token, app_id)
        return self._datastore.read(app_id, after=after, limit=limit)

    def subscribe(self, token: Token, app_id: str) -> Subscription:
        """Create an extra named cursor over an application's log."""
        self._check_consumer(token, app_id)
        sub = Subscription(sub_id=f"s-{uuid.uuid4()}", token=token, app_id=app_id)
        with self._lock:
            self._subscriptions[sub.sub_id] = sub
        return sub

    def subscription(self, sub_id: str) -> Subscription:
        with self._lock:
            try:
                return self._subscriptions[sub_id]
            except KeyError:
                raise UnknownSubscription(f"no subscription {sub_id!r}") from None

    def ack(self, sub_id: str, upto: int) -> int:
        """Advance a cursor monotonically, clamped to the persisted high water."""
        sub = self.subscription(sub_id)
        with self._lock:
            max_seq = self._datastore.max_seq(sub.app_id)
            sub.cursor = max(sub.cursor, min(upto, max_seq))
            return sub.cursor

    def queue_metrics(self) -> dict[str, QueueState]:
        return {bus_id: self._buses[bus_id].queue_metrics() for bus_id in self.bus_ids()}

    def persisted_counts(self) -> dict[str, int]:
        return self._datastore.persisted_counts()

    def close(self) -> None:
        self._datastore.close()
