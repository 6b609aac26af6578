#!/usr/bin/env python3
"""Record gateway responses as JSON fixtures for the portal UI tests.

Runs one scripted scenario against a real in-process gateway and writes
every response the UI tests replay, so each number a test asserts on is a
number the gateway actually returned. Re-run after changing the gateway:

    python3 frontend/tests/record_fixtures.py
"""

from __future__ import annotations

import itertools
import json
import tempfile
import uuid
from pathlib import Path

from fastapi.testclient import TestClient

import csb.portal
from csb.clock import VirtualClock
from csb.gateway import ApiKeyEntry, GatewayConfig, create_app
from csb.portal import MS_PER_HOUR, Role

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"

ADMIN = {"X-CSB-Key": "fixture-admin"}
MANAGER = {"X-CSB-Key": "fixture-manager"}
USER = {"X-CSB-Key": "fixture-user"}


def deterministic_uuids() -> None:
    """Stable ids instead of random ones, so re-recording diffs cleanly."""
    counter = itertools.count(1)
    csb.portal.uuid.uuid4 = lambda: uuid.UUID(int=next(counter))  # type: ignore[assignment]


def save(name: str, status: int, body: object) -> None:
    path = FIXTURE_DIR / f"{name}.json"
    path.write_text(json.dumps({"status": status, "body": body}, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.name}: status {status}")


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    deterministic_uuids()
    clock = VirtualClock(1_755_000_000_000)
    with tempfile.TemporaryDirectory() as tmp:
        config = GatewayConfig(
            buses=2,
            queue_capacity=8,
            data_dir=f"{tmp}/data",
            api_keys=(
                ApiKeyEntry(key="fixture-admin", tenant="acme", role=Role.ADMIN),
                ApiKeyEntry(key="fixture-manager", tenant="acme", role=Role.MANAGER),
                ApiKeyEntry(key="fixture-user", tenant="acme", role=Role.USER),
            ),
        )
        app = create_app(config, clock=clock)
        client = TestClient(app)

        resp = client.get("/v1/whoami", headers=MANAGER)
        save("whoami_manager", resp.status_code, resp.json())
        resp = client.get("/v1/whoami", headers=USER)
        save("whoami_user", resp.status_code, resp.json())

        resp = client.get("/v1/dashboard", headers=MANAGER)
        save("dashboard_fresh", resp.status_code, resp.json())

        # Catalog: compute.small at 1000 INR, one product re-priced to v2.
        resp = client.put(
            "/v1/catalog/compute.small",
            headers=ADMIN,
            json={"unit_price_minor": 1000, "currency": "INR"},
        )
        save("catalog_put_compute_small", resp.status_code, resp.json())
        client.put(
            "/v1/catalog/volume.standard",
            headers=ADMIN,
            json={"unit_price_minor": 200, "currency": "USD"},
        )
        client.put(
            "/v1/catalog/volume.standard",
            headers=ADMIN,
            json={"unit_price_minor": 250, "currency": "USD"},
        )
        resp = client.put(
            "/v1/catalog/snapshot.standard",
            headers=ADMIN,
            json={"unit_price_minor": -40, "currency": "EUR"},
        )
        save("catalog_put_negative", resp.status_code, resp.json())
        resp = client.get("/v1/catalog", headers=USER)
        save("catalog_list", resp.status_code, resp.json())

        # Resource requests: three pending, then decisions and billing.
        def submit(kind: str, spec: dict, labels: dict) -> str:
            resp = client.post(
                "/v1/requests",
                headers=USER,
                json={"kind": kind, "spec": spec, "labels": labels},
            )
            assert resp.status_code == 201, resp.text
            return resp.json()["request_id"]

        r1 = submit("Compute", {"size": "small", "region": "eu-1"}, {"project": "atlas"})
        r2 = submit("Volume", {"size": "standard"}, {"project": "atlas", "department": "eng"})
        r3 = submit("Compute", {"size": "small"}, {"project": "zephyr"})

        resp = client.get("/v1/requests", headers=MANAGER, params={"state": "Pending"})
        save("requests_pending", resp.status_code, resp.json())

        resp = client.post(f"/v1/requests/{r1}/approve", headers=MANAGER)
        save("approve_response", resp.status_code, resp.json())

        resp = client.get("/v1/requests", headers=MANAGER, params={"state": "Pending"})
        save("requests_pending_after", resp.status_code, resp.json())

        resp = client.post(f"/v1/requests/{r1}/approve", headers=MANAGER)
        save("error_already_decided", resp.status_code, resp.json())

        resp = client.post(f"/v1/requests/{r2}/approve", headers=ADMIN)
        save("error_permission", resp.status_code, resp.json())

        # Bill two compute.small resources: 3h1ms -> 4h, 90min -> 2h.
        client.post(f"/v1/requests/{r3}/approve", headers=MANAGER)
        resp = client.post(f"/v1/requests/{r1}/provision", headers=MANAGER)
        assert resp.status_code == 200, resp.text
        res1 = resp.json()["resource_id"]
        resp = client.post(f"/v1/requests/{r3}/provision", headers=MANAGER)
        res3 = resp.json()["resource_id"]
        clock.advance(90 * 60 * 1000)
        client.post(f"/v1/resources/{res3}/release", headers=MANAGER)
        clock.advance(3 * MS_PER_HOUR + 1 - 90 * 60 * 1000)
        client.post(f"/v1/resources/{res1}/release", headers=MANAGER)

        # A fourth request stays Approved so every lifecycle state shows up.
        r4 = submit("Snapshot", {"name": "nightly"}, {"project": "atlas", "department": "ops"})
        client.post(f"/v1/requests/{r4}/approve", headers=MANAGER)

        resp = client.get("/v1/reports/cost", headers=MANAGER, params={"group_by": "project"})
        save("cost_report_project", resp.status_code, resp.json())

        # Bus traffic: 5 persisted messages on one app, a full queue plus
        # one refusal on the other.
        resp = client.post("/v1/apps", headers=ADMIN, json={"app": "billing-svc"})
        billing_token = resp.json()["wire"]
        resp = client.post("/v1/apps", headers=ADMIN, json={"app": "audit-svc"})
        audit_token = resp.json()["wire"]
        for i in range(5):
            resp = client.post(
                "/v1/apps/billing-svc/messages",
                headers=ADMIN,
                json={"token": billing_token, "payload_b64": "aGVsbG8="},
            )
            assert resp.status_code == 200, resp.text
        app.state.fabric.persist_all()
        statuses = []
        for i in range(9):
            resp = client.post(
                "/v1/apps/audit-svc/messages",
                headers=ADMIN,
                json={"token": audit_token, "payload_b64": "YXVkaXQ="},
            )
            statuses.append(resp.status_code)
        assert statuses.count(200) == 8 and statuses.count(429) == 1, statuses

        resp = client.get("/v1/dashboard", headers=MANAGER)
        save("dashboard_busy", resp.status_code, resp.json())


if __name__ == "__main__":
    main()
