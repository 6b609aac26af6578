"""Capacity benchmarks for the fabric.

Two modes share one metrics schema:

* virtual: a deterministic discrete-time model. Each tick, every app
  offers ``arrival_rate`` envelopes to its bus and every bus serves up to
  ``service_rate``. Service within a tick frees queue slots for that same
  tick's arrivals, so admission sees ``capacity - depth + served_now``
  room; depth is observed at tick end. Fractional rates become Bernoulli
  coin flips, integer rates use no randomness at all. Each app and each
  bus draws from its own seeded stream, so the same seed gives the same
  arrival sequence no matter how apps are placed, and a config always
  reproduces the same numbers. One tick reports as one millisecond.
* wallclock: a live fabric with producer threads and one rate-capped
  persister thread per bus, so adding buses adds real drain capacity.

Results serialize to CSV with a fixed column set.
"""

from __future__ import annotations

import csv
import json
import math
import random
import tempfile
import threading
import time
from collections import deque
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, Congested
from .fabric import Fabric
from .tokens import Token

CSV_COLUMNS = [
    "scenario",
    "buses",
    "apps",
    "offered",
    "accepted",
    "rejected",
    "persisted",
    "throughput",
    "p50_ms",
    "p99_ms",
    "max_depth",
]

MODES = ("virtual", "wallclock")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    buses: int
    apps: int
    capacity: int = 10
    ticks: int = 100
    arrival_rate: float = 1.0  # envelopes per app per tick
    service_rate: float = 1.0  # envelopes per bus per tick (virtual mode)
    seed: int = 0
    tick_ms: int = 1
    mode: str = "virtual"
    duration_s: float = 2.0  # wallclock production window
    producers_per_app: int = 1  # wallclock threads per app

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for attr in ("buses", "apps", "capacity", "ticks", "tick_ms", "producers_per_app"):
            if getattr(self, attr) < 1:
                raise ConfigError(f"{attr} must be positive, got {getattr(self, attr)}")
        if self.arrival_rate < 0 or self.service_rate <= 0 or self.duration_s <= 0:
            raise ConfigError("rates and duration must be positive")


@dataclass(frozen=True)
class RunMetrics:
    scenario: str
    buses: int
    apps: int
    offered: int
    accepted: int
    rejected: int
    persisted: int
    throughput: float  # persisted envelopes per second
    p50_ms: float
    p99_ms: float
    max_depth: int

    def to_row(self) -> list:
        return [getattr(self, column) for column in CSV_COLUMNS]

    def to_dict(self) -> dict:
        return {column: getattr(self, column) for column in CSV_COLUMNS}


VIRTUAL_SCENARIOS: tuple[ScenarioConfig, ...] = (
    ScenarioConfig(name="virtual-1bus", buses=1, apps=2),
    ScenarioConfig(name="virtual-2bus", buses=2, apps=2),
)

WALLCLOCK_SCENARIOS: tuple[ScenarioConfig, ...] = (
    ScenarioConfig(name="wall-1bus", buses=1, apps=4, capacity=1024, mode="wallclock"),
    ScenarioConfig(name="wall-2bus", buses=2, apps=4, capacity=1024, mode="wallclock"),
)


def percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile; 0.0 for an empty sample."""
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(0, math.ceil(q / 100.0 * len(ordered)) - 1)
    return float(ordered[rank])


def _draw_count(rng: random.Random, rate: float) -> int:
    base = int(rate)
    frac = rate - base
    if frac > 0 and rng.random() < frac:
        base += 1
    return base


def run_virtual(cfg: ScenarioConfig) -> RunMetrics:
    """Simulate the fabric's admission and service in fluid ticks."""
    apps_of: list[list[int]] = [[] for _ in range(cfg.buses)]
    for i in range(cfg.apps):
        apps_of[i % cfg.buses].append(i)  # same placement rule as the fabric
    arrival_rng = [random.Random(f"{cfg.seed}:app:{i}") for i in range(cfg.apps)]
    service_rng = [random.Random(f"{cfg.seed}:bus:{b}") for b in range(cfg.buses)]

    queues: list[deque[int]] = [deque() for _ in range(cfg.buses)]
    offered = accepted = rejected = persisted = 0
    max_depth = 0
    latencies: list[float] = []

    for tick in range(cfg.ticks):
        for b in range(cfg.buses):
            q = queues[b]
            arrivals = sum(
                _draw_count(arrival_rng[i], cfg.arrival_rate) for i in apps_of[b]
            )
            offered += arrivals
            servable = min(_draw_count(service_rng[b], cfg.service_rate), len(q) + arrivals)
            room = cfg.capacity - len(q) + servable
            admitted = min(arrivals, max(0, room))
            accepted += admitted
            rejected += arrivals - admitted
            q.extend([tick] * admitted)
            served = min(servable, len(q))
            for _ in range(served):
                latencies.append((tick - q.popleft()) * cfg.tick_ms)
            persisted += served
            max_depth = max(max_depth, len(q))

    elapsed_s = cfg.ticks * cfg.tick_ms / 1000.0
    return RunMetrics(
        scenario=cfg.name,
        buses=cfg.buses,
        apps=cfg.apps,
        offered=offered,
        accepted=accepted,
        rejected=rejected,
        persisted=persisted,
        throughput=persisted / elapsed_s,
        p50_ms=percentile(latencies, 50),
        p99_ms=percentile(latencies, 99),
        max_depth=max_depth,
    )


def _paced_persister(
    fabric: Fabric,
    bus_id: str,
    per_sec: float,
    stop: threading.Event,
    depths: list[int],
) -> None:
    # Token bucket: the bus can persist at most per_sec envelopes/second,
    # so drain capacity, not the producers' publish rate, is the limit.
    allowance = 0.0
    last = time.monotonic()
    while True:
        now = time.monotonic()
        allowance = min(allowance + (now - last) * per_sec, 512.0)
        last = now
        budget = int(allowance)
        moved = fabric.persist_loop(bus_id, budget) if budget >= 1 else 0
        allowance -= moved
        depths.append(fabric.bus(bus_id).queue_metrics().depth)
        if moved == 0:
            if stop.is_set() and fabric.bus(bus_id).queue_metrics().depth == 0:
                return
            time.sleep(0.001)


def _producer(
    fabric: Fabric,
    token: Token,
    payload: bytes,
    deadline: float,
    out: dict,
) -> None:
    offered = rejected = 0
    receipts: list[tuple[str, int]] = []
    while time.monotonic() < deadline:
        offered += 1
        publish_ms = time.time_ns() // 1_000_000
        try:
            receipt = fabric.agent_publish(token, payload)
        except Congested:
            rejected += 1
            time.sleep(0.0005)
            continue
        receipts.append((receipt.msg_id, publish_ms))
    out["offered"] = offered
    out["rejected"] = rejected
    out["receipts"] = receipts


def run_wallclock(
    cfg: ScenarioConfig,
    *,
    data_dir: str | Path | None = None,
    service_per_sec: float = 3000.0,
    payload_bytes: int = 512,
) -> RunMetrics:
    """Drive a real fabric with threads and measure end-to-end rates.

    Producers publish flat out for ``cfg.duration_s`` and back off briefly
    on congestion; persisters are capped at ``service_per_sec`` per bus.
    After the production window everything still queued is drained, so
    persisted equals accepted and per-envelope latency comes from the
    datastore's persist timestamps.
    """
    if data_dir is None:
        data_dir = tempfile.mkdtemp(prefix=f"csb-bench-{cfg.name}-")
    fabric = Fabric(cfg.buses, capacity=cfg.capacity, data_dir=data_dir)
    tokens = [
        fabric.register_application("bench", f"bench-app-{i}") for i in range(cfg.apps)
    ]
    payload = bytes(payload_bytes)
    stop = threading.Event()
    depths: list[int] = []
    persisters = [
        threading.Thread(
            target=_paced_persister,
            args=(fabric, bus_id, service_per_sec, stop, depths),
            name=f"bench-persist-{bus_id}",
        )
        for bus_id in fabric.bus_ids()
    ]
    results: list[dict] = [
        {} for _ in range(cfg.apps * cfg.producers_per_app)
    ]
    started = time.monotonic()
    deadline = started + cfg.duration_s
    producers = [
        threading.Thread(
            target=_producer,
            args=(fabric, tokens[i % cfg.apps], payload, deadline, results[i]),
            name=f"bench-producer-{i}",
        )
        for i in range(len(results))
    ]
    for thread in persisters + producers:
        thread.start()
    for thread in producers:
        thread.join()
    stop.set()
    for thread in persisters:
        thread.join()
    elapsed_s = time.monotonic() - started

    offered = sum(r["offered"] for r in results)
    rejected = sum(r["rejected"] for r in results)
    persisted = sum(fabric.persisted_counts().values())
    latencies: list[float] = []
    for r in results:
        for msg_id, publish_ms in r["receipts"]:
            done_ms = fabric.datastore.persisted_at_ms(msg_id)
            if done_ms is not None:
                latencies.append(float(done_ms - publish_ms))
    fabric.close()
    return RunMetrics(
        scenario=cfg.name,
        buses=cfg.buses,
        apps=cfg.apps,
        offered=offered,
        accepted=offered - rejected,
        rejected=rejected,
        persisted=persisted,
        throughput=persisted / elapsed_s,
        p50_ms=percentile(latencies, 50),
        p99_ms=percentile(latencies, 99),
        max_depth=max(depths, default=0),
    )


def run_scenario(cfg: ScenarioConfig, *, data_dir: str | Path | None = None) -> RunMetrics:
    if cfg.mode == "virtual":
        return run_virtual(cfg)
    return run_wallclock(cfg, data_dir=data_dir)


def throughput_ratio(baseline: RunMetrics, scaled: RunMetrics) -> float:
    return scaled.throughput / baseline.throughput


def compare(
    cfg_a: ScenarioConfig,
    cfg_b: ScenarioConfig,
    *,
    data_dir: str | Path | None = None,
) -> dict:
    """Run a pair that differs only in bus count and report both + ratios."""
    ignored = {"name", "buses"}
    for f in fields(ScenarioConfig):
        if f.name in ignored:
            continue
        if getattr(cfg_a, f.name) != getattr(cfg_b, f.name):
            raise ConfigError(
                f"scenarios differ in {f.name!r}; only the bus count may vary"
            )
    a = run_scenario(cfg_a, data_dir=data_dir)
    b = run_scenario(cfg_b, data_dir=data_dir)
    return {
        "a": a.to_dict(),
        "b": b.to_dict(),
        "throughput_ratio": throughput_ratio(a, b),
        "rejected_delta": b.rejected - a.rejected,
    }


def write_csv(path: str | Path, rows: list[RunMetrics]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.to_row())


def load_scenarios(path: str | Path) -> list[ScenarioConfig]:
    """Read scenario definitions from JSON: an object, a list, or
    {"scenarios": [...]}. Unknown keys are rejected."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if isinstance(raw, dict) and "scenarios" in raw:
        raw = raw["scenarios"]
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("scenario file must hold one scenario or a list of them")
    known = {f.name for f in fields(ScenarioConfig)}
    out: list[ScenarioConfig] = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ConfigError(f"scenario[{i}] must be a JSON object")
        unknown = set(item) - known
        if unknown:
            raise ConfigError(f"scenario[{i}] has unknown key(s) {sorted(unknown)}")
        if "name" not in item or "buses" not in item or "apps" not in item:
            raise ConfigError(f"scenario[{i}] needs at least name, buses, apps")
        try:
            out.append(ScenarioConfig(**item))
        except TypeError as exc:
            raise ConfigError(f"scenario[{i}]: {exc}") from exc
    return out


def run_suite(
    scenarios: list[ScenarioConfig] | tuple[ScenarioConfig, ...] = VIRTUAL_SCENARIOS,
    *,
    out_csv: str | Path | None = None,
    data_dir: str | Path | None = None,
) -> dict:
    """Run scenarios in order; with exactly two, also report the ratio."""
    rows = [
        run_scenario(
            cfg,
            data_dir=None if data_dir is None else Path(data_dir) / cfg.name,
        )
        for cfg in scenarios
    ]
    if out_csv is not None:
        write_csv(out_csv, rows)
    summary: dict = {"scenarios": [row.to_dict() for row in rows]}
    if len(rows) == 2:
        summary["throughput_ratio"] = throughput_ratio(rows[0], rows[1])
    return summary
