"""Application-to-bus placement.

Placement is decided once, at registration; live re-placement is out of
scope. RoundRobin cycles through buses in id order so per-bus app counts
never differ by more than one; LeastLoaded picks the emptiest bus with
ties broken by lowest bus id (plain string comparison).
"""

from __future__ import annotations

import enum
import threading

from .errors import ConfigError


class PlacementPolicy(enum.Enum):
    ROUND_ROBIN = "round_robin"
    LEAST_LOADED = "least_loaded"


def parse_policy(value: str | PlacementPolicy) -> PlacementPolicy:
    if isinstance(value, PlacementPolicy):
        return value
    normalized = str(value).strip().lower().replace("-", "_")
    aliases = {
        "round_robin": PlacementPolicy.ROUND_ROBIN,
        "roundrobin": PlacementPolicy.ROUND_ROBIN,
        "least_loaded": PlacementPolicy.LEAST_LOADED,
        "leastloaded": PlacementPolicy.LEAST_LOADED,
    }
    try:
        return aliases[normalized]
    except KeyError:
        raise ConfigError(f"unknown placement policy {value!r}") from None


class PlacementTable:
    """Total map app_id -> bus_id over registered applications."""

    def __init__(self, policy: PlacementPolicy | str = PlacementPolicy.ROUND_ROBIN) -> None:
        self.policy = parse_policy(policy)
        self._table: dict[str, str] = {}
        self._registrations = 0
        self._lock = threading.Lock()

    def assign(self, app_id: str, bus_loads: list[tuple[str, int]]) -> str:
        """Pick and record a bus for app_id given (bus_id, app-count) pairs.

        bus_loads must arrive in bus-id order for RoundRobin to cycle
        deterministically.
        """
        if not bus_loads:
            raise ConfigError("cannot place an application with no buses")
        with self._lock:
            if self.policy is PlacementPolicy.ROUND_ROBIN:
                bus_id = bus_loads[self._registrations % len(bus_loads)][0]
            else:
                bus_id = min(bus_loads, key=lambda pair: (pair[1], pair[0]))[0]
            self._registrations += 1
            self._table[app_id] = bus_id
        return bus_id

    def bus_for(self, app_id: str) -> str | None:
        with self._lock:
            return self._table.get(app_id)

    def apps(self) -> dict[str, str]:
        with self._lock:
            return dict(self._table)
