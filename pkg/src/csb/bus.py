"""A single Common Service Bus instance.

One bounded FIFO queue fed by token-authenticated producers. Admission is
all or nothing: a publish either returns a receipt (after which the
envelope is never silently discarded) or raises. A full queue refuses
with ``Congested`` instead of shedding accepted data; refusal is the
caller's signal to back off and retry.

Sequence assignment and depth accounting are linearizable per bus: the
instance lock covers admission, both sequence counters, and the queue
itself, so concurrent producers get gap-free sequences and ``drain`` may
run concurrently with ``enqueue``.
"""

from __future__ import annotations

import base64
import threading
import uuid
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .clock import Clock, SystemClock
from .errors import ConfigError, Congested, InvalidToken, PayloadTooLarge
from .tokens import Token, validate_identifier, verify_token

MAX_PAYLOAD_BYTES = 256 * 1024
DEFAULT_QUEUE_CAPACITY = 1024


@dataclass(frozen=True, slots=True)
class Envelope:
    """One message in flight: identity, sequences, timestamp, payload.

    ``producer_seq`` counts accepted publishes per token (from 1, no gaps);
    ``bus_seq`` counts accepted publishes per application (from 1, no gaps)
    and defines the order consumers see.
    """

    msg_id: str
    tenant_id: str
    app_id: str
    producer_seq: int
    bus_seq: int
    ts_ms: int
    payload: bytes

    def to_json_dict(self) -> dict:
        """Datastore/wire shape; key set is part of the on-disk format."""
        return {
            "bus_seq": self.bus_seq,
            "msg_id": self.msg_id,
            "tenant_id": self.tenant_id,
            "app_id": self.app_id,
            "producer_seq": self.producer_seq,
            "ts_ms": self.ts_ms,
            "payload_b64": base64.urlsafe_b64encode(self.payload).decode("ascii"),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> Envelope:
        return cls(
            msg_id=obj["msg_id"],
            tenant_id=obj["tenant_id"],
            app_id=obj["app_id"],
            producer_seq=int(obj["producer_seq"]),
            bus_seq=int(obj["bus_seq"]),
            ts_ms=int(obj["ts_ms"]),
            payload=base64.urlsafe_b64decode(obj["payload_b64"].encode("ascii")),
        )


@dataclass(frozen=True, slots=True)
class Receipt:
    msg_id: str
    producer_seq: int
    bus_seq: int

    def to_dict(self) -> dict:
        return {
            "msg_id": self.msg_id,
            "producer_seq": self.producer_seq,
            "bus_seq": self.bus_seq,
        }


@dataclass(frozen=True, slots=True)
class QueueState:
    """Consistent snapshot: enqueued_total == drained_total + depth always."""

    capacity: int
    depth: int
    enqueued_total: int
    drained_total: int
    rejected_total: int

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "depth": self.depth,
            "enqueued_total": self.enqueued_total,
            "drained_total": self.drained_total,
            "rejected_total": self.rejected_total,
        }


class BusInstance:
    """Bounded queue plus per-application admission for one bus id."""

    def __init__(
        self,
        bus_id: str,
        *,
        secret: bytes,
        capacity: int = DEFAULT_QUEUE_CAPACITY,
        clock: Clock | None = None,
    ) -> None:
        validate_identifier(bus_id, "bus_id")
        if capacity < 1:
            raise ConfigError(f"queue capacity must be positive, got {capacity}")
        self.bus_id = bus_id
        self.assigned_apps: set[str] = set()
        self._secret = secret
        self._capacity = capacity
        self._clock = clock or SystemClock()
        self._queue: deque[Envelope] = deque()
        # Slots held by a drained-but-uncommitted persist batch. They still
        # count against capacity so a failed persist can always requeue
        # without overflowing the bound.
        self._reserved = 0
        self._next_producer_seq: dict[str, int] = {}
        self._next_bus_seq: dict[str, int] = {}
        self._enqueued_total = 0
        self._drained_total = 0
        self._rejected_total = 0
        self._lock = threading.Lock()

    @property
    def capacity(self) -> int:
        return self._capacity

    def resume_app_seq(self, app_id: str, last_seq: int) -> None:
        """Continue an app's bus_seq from a recovered log's high water."""
        if last_seq < 0:
            raise ValueError(f"last_seq must be non-negative, got {last_seq}")
        with self._lock:
            current = self._next_bus_seq.get(app_id, 0)
            self._next_bus_seq[app_id] = max(current, last_seq)

    def enqueue(self, token: Token, payload: bytes) -> Receipt:
        """Admit one message, assigning the next producer and bus sequences.

        Raises InvalidToken (bad signature or wrong bus), PayloadTooLarge,
        or Congested (queue at capacity; counters other than rejected_total
        untouched). Rejected publishes consume no sequence numbers.
        """
        if not verify_token(token, self._secret) or token.bus_id != self.bus_id:
            raise InvalidToken(f"token not valid for bus {self.bus_id}")
        data = bytes(payload)
        if len(data) > MAX_PAYLOAD_BYTES:
            raise PayloadTooLarge(f"payload is {len(data)} bytes, cap is {MAX_PAYLOAD_BYTES}")
        with self._lock:
            if len(self._queue) + self._reserved >= self._capacity:
                self._rejected_total += 1
                raise Congested(f"bus {self.bus_id} queue at capacity {self._capacity}")
            producer_seq = self._next_producer_seq.get(token.token_id, 0) + 1
            self._next_producer_seq[token.token_id] = producer_seq
            bus_seq = self._next_bus_seq.get(token.app_id, 0) + 1
            self._next_bus_seq[token.app_id] = bus_seq
            envelope = Envelope(
                msg_id=str(uuid.uuid4()),
                tenant_id=token.tenant_id,
                app_id=token.app_id,
                producer_seq=producer_seq,
                bus_seq=bus_seq,
                ts_ms=self._clock.now_ms(),
                payload=data,
            )
            self._queue.append(envelope)
            self._enqueued_total += 1
        return Receipt(envelope.msg_id, producer_seq, bus_seq)

    def drain(self, max_batch: int, *, reserve: bool = False) -> list[Envelope]:
        """Pop up to max_batch envelopes in FIFO (hence per-app bus_seq) order.

        Ownership transfers to the caller. With ``reserve=True`` the freed
        slots stay counted against capacity until ``release_reserved`` or
        ``requeue_front``; the persister uses this so a storage failure can
        put the batch back without breaching the queue bound.
        """
        if max_batch < 1:
            raise ValueError(f"max_batch must be positive, got {max_batch}")
        with self._lock:
            count = min(max_batch, len(self._queue))
            batch = [self._queue.popleft() for _ in range(count)]
            self._drained_total += count
            if reserve:
                self._reserved += count
        return batch

    def release_reserved(self, count: int) -> None:
        with self._lock:
            if count < 0 or count > self._reserved:
                raise ValueError(f"cannot release {count} of {self._reserved} reserved slots")
            self._reserved -= count

    def requeue_front(self, envelopes: Iterable[Envelope]) -> None:
        """Put a reserved drain batch back at the head of the queue, in order.

        Re-admission counts as a fresh enqueue so the conservation identity
        (enqueued_total == drained_total + depth) holds and all counters
        stay monotone.
        """
        batch = list(envelopes)
        if not batch:
            return
        with self._lock:
            if len(batch) > self._reserved:
                raise ValueError("requeue_front requires a batch drained with reserve=True")
            self._queue.extendleft(reversed(batch))
            self._enqueued_total += len(batch)
            self._reserved -= len(batch)

    def queue_metrics(self) -> QueueState:
        with self._lock:
            return QueueState(
                capacity=self._capacity,
                depth=len(self._queue),
                enqueued_total=self._enqueued_total,
                drained_total=self._drained_total,
                rejected_total=self._rejected_total,
            )
