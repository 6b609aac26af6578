"""Command line client for the gateway, plus local serve/bench.

Exit codes: 0 on success (2xx), 1 when the server refused the request
(4xx), 2 on server errors or transport failures (5xx, connect errors),
64 on bad usage (unknown flags, malformed key=value pairs).

Endpoint and API key come from ``--endpoint``/``--api-key`` or the
``CSB_ENDPOINT``/``CSB_API_KEY`` environment variables; flags win.
``--output json`` writes the raw response body to stdout, byte for byte,
for scripting; the default table mode renders lists of records as
aligned columns and everything else as indented JSON, with error detail
on stderr.
"""

from __future__ import annotations

import base64
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import httpx

from . import bench as bench_mod
from .errors import BindError, CsbError, StorageError
from .gateway import API_KEY_HEADER, load_config
from .gateway import serve as gateway_serve

DEFAULT_ENDPOINT = "http://127.0.0.1:8080"


@dataclass
class ClientContext:
    endpoint: str
    api_key: str | None
    output: str


def _exit_code(status: int) -> int:
    if status < 400:
        return 0
    if status < 500:
        return 1
    return 2


def _format_table(rows: list[dict]) -> str:
    columns = list(rows[0].keys())
    widths = {
        c: max(len(c), *(len(str(row.get(c, ""))) for row in rows)) for c in columns
    }
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    for row in rows:
        lines.append("  ".join(str(row.get(c, "")).ljust(widths[c]) for c in columns))
    return "\n".join(lines)


def _render_doc(doc) -> str:
    # Lists of flat records read better as columns; anything else as JSON.
    if (
        isinstance(doc, list)
        and doc
        and all(isinstance(r, dict) and not any(isinstance(v, (dict, list)) for v in r.values()) for r in doc)
    ):
        return _format_table(doc)
    if isinstance(doc, dict) and isinstance(doc.get("rows"), list) and doc["rows"]:
        head = {k: v for k, v in doc.items() if k != "rows"}
        meta = "  ".join(f"{k}={v}" for k, v in head.items())
        return f"{meta}\n{_format_table(doc['rows'])}"
    return json.dumps(doc, indent=2, sort_keys=True)


def _render(ctx: ClientContext, resp: httpx.Response) -> None:
    if ctx.output == "json":
        sys.stdout.buffer.write(resp.content)
        sys.stdout.buffer.flush()
        return
    try:
        doc = resp.json()
    except ValueError:
        click.echo(resp.text, err=resp.status_code >= 400)
        return
    if resp.status_code < 400:
        click.echo(_render_doc(doc))
    else:
        click.echo(
            f"error {resp.status_code} {doc.get('error')}: {doc.get('detail')}",
            err=True,
        )


def _call(
    ctx: ClientContext,
    method: str,
    path: str,
    *,
    json_body: dict | None = None,
    params: dict | None = None,
) -> int:
    headers = {API_KEY_HEADER: ctx.api_key} if ctx.api_key else {}
    url = ctx.endpoint.rstrip("/") + path
    try:
        resp = httpx.request(
            method, url, json=json_body, params=params, headers=headers, timeout=30.0
        )
    except httpx.HTTPError as exc:
        click.echo(f"transport error: {exc}", err=True)
        return 2
    _render(ctx, resp)
    return _exit_code(resp.status_code)


def _parse_pairs(pairs: tuple[str, ...], what: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise click.UsageError(f"{what} must look like key=value, got {pair!r}")
        out[key] = value
    return out


def _read_token(token: str | None, token_file: str | None) -> str:
    if token and token_file:
        raise click.UsageError("give either --token or --token-file, not both")
    if token:
        return token
    if token_file:
        # The wire form has one internal newline; only trailing ones
        # (from shell redirects) are safe to drop.
        return Path(token_file).read_text(encoding="utf-8").rstrip("\n")
    raise click.UsageError("a capability token is required (--token or --token-file)")


@click.group()
@click.option("--endpoint", envvar="CSB_ENDPOINT", default=DEFAULT_ENDPOINT, show_default=True, help="Gateway base URL.")
@click.option("--api-key", envvar="CSB_API_KEY", default=None, help="Value for the X-CSB-Key header.")
@click.option("--output", type=click.Choice(["table", "json"]), default="table", show_default=True, help="json: raw response body on stdout.")
@click.pass_context
def cli(ctx: click.Context, endpoint: str, api_key: str | None, output: str) -> None:
    """Talk to a Common Service Bus gateway."""
    ctx.obj = ClientContext(endpoint=endpoint, api_key=api_key, output=output)


@cli.command()
@click.option("--config", "config_path", envvar="CSB_CONFIG", default=None, help="Path to gateway config JSON.")
def serve(config_path: str | None) -> int:
    """Run the gateway in the foreground."""
    try:
        gateway_serve(load_config(config_path))
    except (BindError, StorageError) as exc:
        click.echo(f"error {exc.code}: {exc}", err=True)
        return 2
    except CsbError as exc:
        click.echo(f"error {exc.code}: {exc}", err=True)
        return 1
    return 0


@cli.group()
def app() -> None:
    """Application registration."""


@app.command("register")
@click.option("--name", required=True, help="Application id to enroll.")
@click.option("--tenant", default=None, help="Owning tenant; defaults to the API key's tenant.")
@click.option("--token-file", default=None, help="Also save the returned token wire string here.")
@click.pass_obj
def app_register(ctx: ClientContext, name: str, tenant: str | None, token_file: str | None) -> int:
    """Enroll an application and print its capability token."""
    body: dict = {"app": name}
    if tenant:
        body["tenant"] = tenant
    headers = {API_KEY_HEADER: ctx.api_key} if ctx.api_key else {}
    url = ctx.endpoint.rstrip("/") + "/v1/apps"
    try:
        resp = httpx.post(url, json=body, headers=headers, timeout=30.0)
    except httpx.HTTPError as exc:
        click.echo(f"transport error: {exc}", err=True)
        return 2
    if resp.status_code < 400 and token_file:
        Path(token_file).write_text(resp.json()["wire"], encoding="utf-8")
    _render(ctx, resp)
    return _exit_code(resp.status_code)


@cli.command()
@click.argument("app_id")
@click.option("--token", default=None, help="Token wire string.")
@click.option("--token-file", default=None, help="File holding the token wire string.")
@click.option("--data", default=None, help="UTF-8 payload.")
@click.option("--data-file", default=None, help="Read the payload from a file.")
@click.pass_obj
def publish(ctx: ClientContext, app_id: str, token: str | None, token_file: str | None, data: str | None, data_file: str | None) -> int:
    """Publish one envelope to an application's bus."""
    if (data is None) == (data_file is None):
        raise click.UsageError("give exactly one of --data or --data-file")
    payload = data.encode("utf-8") if data is not None else Path(data_file).read_bytes()
    body = {
        "token": _read_token(token, token_file),
        "payload_b64": base64.urlsafe_b64encode(payload).decode("ascii"),
    }
    return _call(ctx, "POST", f"/v1/apps/{app_id}/messages", json_body=body)


@cli.command()
@click.argument("app_id")
@click.option("--token", default=None)
@click.option("--token-file", default=None)
@click.option("--after", default=0, show_default=True, help="Only envelopes with bus_seq greater than this.")
@click.option("--limit", default=100, show_default=True)
@click.pass_obj
def consume(ctx: ClientContext, app_id: str, token: str | None, token_file: str | None, after: int, limit: int) -> int:
    """Read persisted envelopes for an application."""
    params = {
        "token": _read_token(token, token_file),
        "after": after,
        "limit": limit,
    }
    return _call(ctx, "GET", f"/v1/apps/{app_id}/messages", params=params)


@cli.command()
@click.argument("sub_id")
@click.argument("upto", type=int)
@click.pass_obj
def ack(ctx: ClientContext, sub_id: str, upto: int) -> int:
    """Advance a subscription cursor."""
    return _call(ctx, "POST", f"/v1/subscriptions/{sub_id}/ack", json_body={"upto": upto})


@cli.command()
@click.argument("kind")
@click.option("--spec", "spec_pairs", multiple=True, help="key=value, repeatable.")
@click.option("--label", "label_pairs", multiple=True, help="key=value, repeatable.")
@click.pass_obj
def request(ctx: ClientContext, kind: str, spec_pairs: tuple[str, ...], label_pairs: tuple[str, ...]) -> int:
    """Submit a resource request (goes to Pending)."""
    body = {
        "kind": kind,
        "spec": _parse_pairs(spec_pairs, "--spec"),
        "labels": _parse_pairs(label_pairs, "--label"),
    }
    return _call(ctx, "POST", "/v1/requests", json_body=body)


@cli.command()
@click.argument("request_id")
@click.pass_obj
def approve(ctx: ClientContext, request_id: str) -> int:
    """Approve a pending request (Manager only)."""
    return _call(ctx, "POST", f"/v1/requests/{request_id}/approve")


@cli.command()
@click.argument("request_id")
@click.pass_obj
def reject(ctx: ClientContext, request_id: str) -> int:
    """Reject a pending request (Manager only)."""
    return _call(ctx, "POST", f"/v1/requests/{request_id}/reject")


@cli.command()
@click.argument("request_id")
@click.pass_obj
def provision(ctx: ClientContext, request_id: str) -> int:
    """Materialize an approved request; starts metering."""
    return _call(ctx, "POST", f"/v1/requests/{request_id}/provision")


@cli.command()
@click.argument("resource_id")
@click.pass_obj
def release(ctx: ClientContext, resource_id: str) -> int:
    """Release a provisioned resource; stops metering."""
    return _call(ctx, "POST", f"/v1/resources/{resource_id}/release")


@cli.group()
def catalog() -> None:
    """Product price catalog."""


@catalog.command("set")
@click.argument("product_code")
@click.argument("unit_price_minor", type=int)
@click.argument("currency")
@click.pass_obj
def catalog_set(ctx: ClientContext, product_code: str, unit_price_minor: int, currency: str) -> int:
    """Publish a new price version for a product."""
    body = {"unit_price_minor": unit_price_minor, "currency": currency}
    return _call(ctx, "PUT", f"/v1/catalog/{product_code}", json_body=body)


@catalog.command("list")
@click.pass_obj
def catalog_list(ctx: ClientContext) -> int:
    """Show the latest price of every product."""
    return _call(ctx, "GET", "/v1/catalog")


@cli.command()
@click.option("--group-by", default="user", show_default=True, type=click.Choice(["user", "account", "project", "department"]))
@click.pass_obj
def report(ctx: ClientContext, group_by: str) -> int:
    """Cost report over closed usage records."""
    return _call(ctx, "GET", "/v1/reports/cost", params={"group_by": group_by})


@cli.command()
@click.pass_obj
def dashboard(ctx: ClientContext) -> int:
    """Fabric, workflow, and cost snapshot (Admin or Manager)."""
    return _call(ctx, "GET", "/v1/dashboard")


@cli.command()
@click.pass_obj
def metrics(ctx: ClientContext) -> int:
    """Queue counters and per-app persisted counts."""
    return _call(ctx, "GET", "/v1/metrics")


@cli.command()
@click.option("--config", "config_path", default=None, help="Scenario JSON; default is the built-in 1-bus vs 2-bus virtual pair.")
@click.option("--out", "out_csv", default=None, help="Write per-scenario metrics to this CSV.")
@click.option("--data-dir", default=None, help="Scratch dir for wallclock logs (default: temp dir).")
@click.pass_obj
def bench(ctx: ClientContext, config_path: str | None, out_csv: str | None, data_dir: str | None) -> int:
    """Run benchmark scenarios locally (no gateway involved)."""
    scenarios = (
        bench_mod.load_scenarios(config_path)
        if config_path
        else list(bench_mod.VIRTUAL_SCENARIOS)
    )
    summary = bench_mod.run_suite(scenarios, out_csv=out_csv, data_dir=data_dir)
    click.echo(json.dumps(summary, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        rc = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 64
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 130
    except CsbError as exc:
        click.echo(f"error {exc.code}: {exc}", err=True)
        return 1
    return rc if isinstance(rc, int) else 0


if __name__ == "__main__":
    sys.exit(main())
