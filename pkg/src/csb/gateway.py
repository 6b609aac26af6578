"""HTTP front door for the fabric and portal.

A FastAPI application under ``/v1``. Callers authenticate with a static
API key (``X-CSB-Key`` header) that binds them to a tenant and a portal
role. Bus operations additionally need the application's capability
token; its wire form contains a newline, which HTTP headers forbid, so
the token travels in the JSON body (publish) or as a query parameter
(consume). Domain errors map to stable HTTP statuses and a
``{"error": code, "detail": text}`` body, so clients can switch on the
code without parsing prose.

Each endpoint is a thin adapter: the response body is the serialized
result of the one fabric or portal call it wraps.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import secrets as _secrets
import socket
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bus import DEFAULT_QUEUE_CAPACITY
from .clock import Clock
from .errors import (
    BindError,
    ConfigError,
    CsbError,
    InvalidRequest,
    InvalidToken,
    PermissionDenied,
    StorageError,
    TenantMismatch,
    Unauthorized,
)
from .fabric import DEFAULT_PERSIST_BATCH, Fabric
from .portal import (
    LABEL_KEYS,
    Portal,
    PortalAction,
    Principal,
    RequestState,
    Role,
    check_permission,
    cost_report as build_cost_report,
    dashboard_snapshot,
)
from .tokens import Token

log = logging.getLogger("csb.gateway")

API_KEY_HEADER = "X-CSB-Key"

# One place for the error-code -> HTTP status contract.
STATUS_BY_CODE: dict[str, int] = {
    "Unauthorized": 401,
    "InvalidToken": 403,
    "PermissionDenied": 403,
    "TenantMismatch": 403,
    "AlreadyRegistered": 409,
    "InvalidTransition": 409,
    "Congested": 429,
    "UnknownApplication": 404,
    "UnknownSubscription": 404,
    "UnknownRequest": 404,
    "UnknownResource": 404,
    "InvalidSpec": 400,
    "NegativePrice": 400,
    "UnknownCurrency": 400,
    "PayloadTooLarge": 400,
    "InvalidIdentifier": 400,
    "InvalidRequest": 400,
    "ConfigError": 400,
    "MissingPrice": 400,
    "StorageError": 503,
    "BindError": 503,
}


@dataclass(frozen=True)
class ApiKeyEntry:
    key: str
    tenant: str
    role: Role


@dataclass(frozen=True)
class GatewayConfig:
    port: int = 8080
    host: str = "127.0.0.1"
    buses: int = 2
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    data_dir: str = "csb-data"
    secret_file: str | None = None  # default: <data_dir>/secret.key
    policy: str = "round_robin"
    persist_batch: int = DEFAULT_PERSIST_BATCH
    api_keys: tuple[ApiKeyEntry, ...] = ()

    @classmethod
    def from_dict(cls, raw: dict) -> "GatewayConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
        known = {
            "port", "host", "buses", "queue_capacity", "data_dir",
            "secret_file", "policy", "persist_batch", "api_keys",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config key(s) {sorted(unknown)}")
        entries: list[ApiKeyEntry] = []
        for i, item in enumerate(raw.get("api_keys", [])):
            if not isinstance(item, dict) or set(item) != {"key", "tenant", "role"}:
                raise ConfigError(
                    f"api_keys[{i}] must be an object with key/tenant/role"
                )
            try:
                role = Role(item["role"])
            except ValueError:
                raise ConfigError(
                    f"api_keys[{i}].role must be one of "
                    f"{[r.value for r in Role]}, got {item['role']!r}"
                ) from None
            entries.append(ApiKeyEntry(key=str(item["key"]), tenant=str(item["tenant"]), role=role))
        kwargs: dict = {"api_keys": tuple(entries)}
        for name, kind in (
            ("port", int), ("buses", int), ("queue_capacity", int),
            ("persist_batch", int), ("host", str), ("data_dir", str), ("policy", str),
        ):
            if name in raw:
                value = raw[name]
                if not isinstance(value, kind) or isinstance(value, bool):
                    raise ConfigError(f"config key {name!r} must be {kind.__name__}")
                kwargs[name] = value
        if raw.get("secret_file") is not None:
            kwargs["secret_file"] = str(raw["secret_file"])
        return cls(**kwargs)


def load_config(path: str | Path | None = None) -> GatewayConfig:
    """Read gateway config JSON from ``path`` or ``$CSB_CONFIG``."""
    path = path or os.environ.get("CSB_CONFIG")
    if not path:
        raise ConfigError("no config file given (flag or CSB_CONFIG)")
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return GatewayConfig.from_dict(raw)


def ensure_secret(path: str | Path) -> bytes:
    """Load the HMAC secret, generating and storing one on first run."""
    path = Path(path)
    try:
        if path.exists():
            secret = path.read_bytes()
            if secret:
                return secret
        path.parent.mkdir(parents=True, exist_ok=True)
        secret = _secrets.token_bytes(32)
        path.write_bytes(secret)
        return secret
    except OSError as exc:
        raise ConfigError(f"cannot manage secret file {path}: {exc}") from exc


class RegisterAppBody(BaseModel):
    app: str
    tenant: str | None = None


class PublishBody(BaseModel):
    token: str
    payload_b64: str


class AckBody(BaseModel):
    upto: int


class SubmitRequestBody(BaseModel):
    kind: str
    spec: dict[str, str] = {}
    labels: dict[str, str] = {}


class SetPriceBody(BaseModel):
    unit_price_minor: int
    currency: str


def _decode_b64(value: str) -> bytes:
    try:
        padded = value + "=" * (-len(value) % 4)
        return base64.b64decode(padded.encode("ascii"), altchars=b"-_", validate=True)
    except (ValueError, UnicodeEncodeError) as exc:
        raise InvalidRequest(f"payload_b64 is not valid base64url: {exc}") from None


def _principal_of(request: Request, key: str | None) -> Principal:
    entry: ApiKeyEntry | None = request.app.state.keyring.get(key or "")
    if entry is None:
        raise Unauthorized(f"missing or unknown {API_KEY_HEADER}")
    return Principal(principal_id=entry.tenant, role=entry.role)


def _parse_token(wire: str | None) -> Token:
    if not wire:
        raise InvalidToken("a capability token is required")
    return Token.from_wire(wire)


def _require(principal: Principal, action: PortalAction) -> None:
    if not check_permission(principal.role, action):
        raise PermissionDenied(f"role {principal.role.value} may not {action.value}")


def _check_caller_tenant(token: Token, principal: Principal) -> None:
    # The API key and the token must agree on whose data this is.
    if token.tenant_id != principal.principal_id:
        raise TenantMismatch(
            f"token tenant {token.tenant_id!r} is not caller tenant "
            f"{principal.principal_id!r}"
        )


def _persist_worker(fabric: Fabric, bus_id: str, batch: int, stop: threading.Event) -> None:
    while not stop.is_set():
        try:
            moved = fabric.persist_loop(bus_id, batch)
        except StorageError:
            log.exception("persist pass failed on %s; queue intact, retrying", bus_id)
            stop.wait(0.05)
            continue
        if moved == 0:
            stop.wait(0.002)


def create_app(config: GatewayConfig, *, clock: Clock | None = None) -> FastAPI:
    """Wire a fabric + portal and expose them over HTTP."""
    data_dir = Path(config.data_dir)
    secret = ensure_secret(config.secret_file or data_dir / "secret.key")
    fabric = Fabric(
        config.buses,
        capacity=config.queue_capacity,
        policy=config.policy,
        data_dir=data_dir / "logs",
        secret=secret,
        clock=clock,
    )
    portal = Portal(data_dir=data_dir, clock=clock)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = threading.Event()
        workers = [
            threading.Thread(
                target=_persist_worker,
                args=(fabric, bus_id, config.persist_batch, stop),
                name=f"persist-{bus_id}",
                daemon=True,
            )
            for bus_id in fabric.bus_ids()
        ]
        for worker in workers:
            worker.start()
        try:
            yield
        finally:
            stop.set()
            for worker in workers:
                worker.join(timeout=5)
            fabric.persist_all(config.persist_batch)  # nothing in flight is lost
            fabric.close()

    app = FastAPI(title="csb gateway", lifespan=lifespan)
    # The portal UI is static files on another origin; auth is a header key
    # (no cookies), so echoing any origin back is safe.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=[API_KEY_HEADER, "Content-Type"],
    )
    app.state.config = config
    app.state.fabric = fabric
    app.state.portal = portal
    app.state.keyring = {entry.key: entry for entry in config.api_keys}

    @app.exception_handler(CsbError)
    async def on_csb_error(request: Request, exc: CsbError) -> JSONResponse:
        status = STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content={"error": exc.code, "detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": "InvalidRequest", "detail": str(exc.errors())},
        )

    @app.get("/v1/healthz")
    async def healthz() -> dict:
        return {"status": "ok", "buses": len(fabric.bus_ids())}

    @app.get("/v1/whoami")
    async def whoami(
        request: Request,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        return {"tenant": principal.principal_id, "role": principal.role.value}

    @app.post("/v1/apps", status_code=201)
    async def register_app(
        request: Request,
        body: RegisterAppBody,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        tenant_id = body.tenant or principal.principal_id
        if tenant_id != principal.principal_id:
            _require(principal, PortalAction.MANAGE_TENANTS)
        token = fabric.register_application(tenant_id, body.app)
        return token.to_dict()

    @app.post("/v1/apps/{app_id}/messages")
    async def publish(
        request: Request,
        app_id: str,
        body: PublishBody,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        token = _parse_token(body.token)
        if token.app_id != app_id:
            raise InvalidToken(f"token is for application {token.app_id!r}, not {app_id!r}")
        _check_caller_tenant(token, principal)
        receipt = fabric.agent_publish(token, _decode_b64(body.payload_b64))
        return receipt.to_dict()

    @app.get("/v1/apps/{app_id}/messages")
    async def consume(
        request: Request,
        app_id: str,
        token: str | None = None,
        after: int = 0,
        limit: int = 100,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> list:
        principal = _principal_of(request, x_csb_key)
        parsed = _parse_token(token)
        _check_caller_tenant(parsed, principal)
        if after < 0 or limit < 1:
            raise InvalidRequest("after must be >= 0 and limit >= 1")
        envelopes = fabric.consume(parsed, app_id, after=after, limit=limit)
        return [env.to_json_dict() for env in envelopes]

    @app.post("/v1/subscriptions/{sub_id}/ack")
    async def ack(
        request: Request,
        sub_id: str,
        body: AckBody,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        sub = fabric.subscription(sub_id)
        if sub.token.tenant_id != principal.principal_id:
            raise TenantMismatch(
                f"subscription {sub_id!r} belongs to tenant {sub.token.tenant_id!r}"
            )
        return {"cursor": fabric.ack(sub_id, body.upto)}

    @app.get("/v1/metrics")
    async def metrics(
        request: Request,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        _principal_of(request, x_csb_key)
        return {
            "buses": {bus_id: state.to_dict() for bus_id, state in fabric.queue_metrics().items()},
            "apps": fabric.persisted_counts(),
        }

    @app.post("/v1/requests", status_code=201)
    async def submit_request(
        request: Request,
        body: SubmitRequestBody,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        created = portal.submit_request(principal, body.kind, body.spec, body.labels)
        return created.to_dict()

    @app.get("/v1/requests")
    async def list_requests(
        request: Request,
        state: str | None = None,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        _require(principal, PortalAction.VIEW_DASHBOARD)
        want: RequestState | None = None
        if state is not None:
            try:
                want = RequestState(state)
            except ValueError:
                raise InvalidRequest(
                    f"state must be one of {[s.value for s in RequestState]}"
                ) from None
        return {"requests": [r.to_dict() for r in portal.list_requests(want)]}

    @app.get("/v1/requests/{request_id}")
    async def get_request(
        request: Request,
        request_id: str,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        _principal_of(request, x_csb_key)
        return portal.get_request(request_id).to_dict()

    @app.post("/v1/requests/{request_id}/approve")
    async def approve_request(
        request: Request,
        request_id: str,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        return portal.decide_request(principal, request_id, "approve").to_dict()

    @app.post("/v1/requests/{request_id}/reject")
    async def reject_request(
        request: Request,
        request_id: str,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        return portal.decide_request(principal, request_id, "reject").to_dict()

    @app.post("/v1/requests/{request_id}/provision")
    async def provision(
        request: Request,
        request_id: str,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        _principal_of(request, x_csb_key)
        resource_id, usage = portal.provision(request_id)
        return {"resource_id": resource_id, "usage": usage.to_dict()}

    @app.post("/v1/resources/{resource_id}/release")
    async def release(
        request: Request,
        resource_id: str,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        _principal_of(request, x_csb_key)
        return portal.release(resource_id).to_dict()

    @app.put("/v1/catalog/{product_code}")
    async def set_price(
        request: Request,
        product_code: str,
        body: SetPriceBody,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        entry = portal.set_price(principal, product_code, body.unit_price_minor, body.currency)
        return entry.to_dict()

    @app.get("/v1/catalog")
    async def catalog(
        request: Request,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> list:
        _principal_of(request, x_csb_key)
        return [entry.to_dict() for entry in portal.catalog.latest_entries()]

    @app.get("/v1/reports/cost")
    async def cost_report(
        request: Request,
        group_by: str = "user",
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        if group_by not in LABEL_KEYS:
            raise InvalidRequest(f"group_by must be one of {list(LABEL_KEYS)}")
        if check_permission(principal.role, PortalAction.VIEW_ALL_REPORTS):
            return portal.cost_report(group_by).to_dict()
        _require(principal, PortalAction.VIEW_OWN_REPORTS)
        own = [
            record
            for record in portal.usage_records(closed_only=True)
            if record.labels.get("user") == principal.principal_id
        ]
        return build_cost_report(
            group_by, own, portal.catalog, now_ms=portal.clock.now_ms()
        ).to_dict()

    @app.get("/v1/dashboard")
    async def dashboard(
        request: Request,
        x_csb_key: str | None = Header(default=None, alias=API_KEY_HEADER),
    ) -> dict:
        principal = _principal_of(request, x_csb_key)
        _require(principal, PortalAction.VIEW_DASHBOARD)
        return dashboard_snapshot(fabric, portal)

    return app


def check_port_free(host: str, port: int) -> None:
    """Fail fast (BindError) when the listen address is taken."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()


def serve(config: GatewayConfig) -> None:
    """Run the gateway until interrupted; persisters drain on shutdown."""
    import uvicorn

    check_port_free(config.host, config.port)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
