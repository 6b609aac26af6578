import itertools
import json
import socket
import threading
import time

import httpx
import pytest

from csb.cli import _exit_code, _format_table, _parse_pairs, _read_token, _render_doc, main
from csb.gateway import ApiKeyEntry, GatewayConfig, create_app
from csb.portal import Role

COUNTER = itertools.count()


def fresh(prefix: str) -> str:
    return f"{prefix}-{next(COUNTER)}"


# -- helpers (no server) ------------------------------------------------------


def test_exit_code_bands():
    assert _exit_code(200) == 0
    assert _exit_code(201) == 0
    assert _exit_code(404) == 1
    assert _exit_code(429) == 1
    assert _exit_code(500) == 2
    assert _exit_code(503) == 2


def test_format_table_aligns_columns():
    rows = [
        {"name": "a", "value": 1},
        {"name": "longer", "value": 22},
    ]
    table = _format_table(rows).splitlines()
    assert table[0].split() == ["name", "value"]
    assert table[1].split() == ["a", "1"]
    assert table[2].split() == ["longer", "22"]
    assert len({line.index("1") for line in table[1:2]}) == 1


def test_render_doc_modes():
    flat_list = [{"a": 1, "b": 2}]
    assert "a" in _render_doc(flat_list).splitlines()[0]
    report = {"group_by": "user", "rows": [{"group": "u", "total_minor": 5}]}
    rendered = _render_doc(report)
    assert rendered.splitlines()[0] == "group_by=user"
    assert "total_minor" in rendered
    nested = {"buses": {"b0": {"depth": 0}}}
    assert json.loads(_render_doc(nested)) == nested
    assert _render_doc([]) == "[]"


def test_parse_pairs():
    assert _parse_pairs(("size=large", "gb=10"), "--spec") == {"size": "large", "gb": "10"}
    assert _parse_pairs((), "--spec") == {}
    assert _parse_pairs(("key=a=b",), "--spec") == {"key": "a=b"}
    import click

    with pytest.raises(click.UsageError):
        _parse_pairs(("nokey",), "--spec")
    with pytest.raises(click.UsageError):
        _parse_pairs(("=value",), "--spec")


def test_read_token_sources(tmp_path):
    import click

    assert _read_token("abc", None) == "abc"
    path = tmp_path / "token.txt"
    path.write_text("line1\nline2\n")
    assert _read_token(None, str(path)) == "line1\nline2"  # keeps the inner newline
    with pytest.raises(click.UsageError):
        _read_token("abc", str(path))
    with pytest.raises(click.UsageError):
        _read_token(None, None)


def test_usage_errors_exit_64(tmp_path):
    assert main(["no-such-command"]) == 64
    assert main(["--output", "yaml", "metrics"]) == 64
    assert main(["publish", "bank", "--token", "t"]) == 64  # no payload source
    assert (
        main(["publish", "bank", "--token", "t", "--data", "x", "--data-file", "y"]) == 64
    )
    assert main(["request", "Compute", "--spec", "nokey"]) == 64


def test_transport_error_exits_2(capsys):
    free = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    free.bind(("127.0.0.1", 0))
    port = free.getsockname()[1]
    free.close()
    assert main(["--endpoint", f"http://127.0.0.1:{port}", "metrics"]) == 2
    assert "transport error" in capsys.readouterr().err


def test_bench_offline_writes_csv(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert main(["bench", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["throughput_ratio"] == 2.0
    assert out.read_text().splitlines()[0].startswith("scenario,buses,apps,")


def test_bench_with_scenario_file(tmp_path, capsys):
    config = tmp_path / "scenario.json"
    config.write_text(json.dumps({"name": "solo", "buses": 1, "apps": 1, "ticks": 10}))
    assert main(["bench", "--config", str(config)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert [s["scenario"] for s in summary["scenarios"]] == ["solo"]
    assert "throughput_ratio" not in summary


def test_bench_bad_scenario_file_exits_1(tmp_path, capsys):
    config = tmp_path / "scenario.json"
    config.write_text(json.dumps({"name": "solo"}))
    assert main(["bench", "--config", str(config)]) == 1
    assert "error ConfigError" in capsys.readouterr().err


def test_serve_reports_missing_config(capsys, monkeypatch):
    monkeypatch.delenv("CSB_CONFIG", raising=False)
    assert main(["serve"]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_serve_bind_conflict_exits_2(tmp_path, capsys):
    holder = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    holder.bind(("127.0.0.1", 0))
    port = holder.getsockname()[1]
    holder.listen(1)
    config = tmp_path / "gw.json"
    config.write_text(json.dumps({"port": port, "data_dir": str(tmp_path / "data")}))
    try:
        assert main(["serve", "--config", str(config)]) == 2
    finally:
        holder.close()
    assert "BindError" in capsys.readouterr().err


# -- against a live gateway -----------------------------------------------------


@pytest.fixture(scope="module")
def gateway_url(tmp_path_factory):
    import uvicorn

    data_dir = tmp_path_factory.mktemp("cli-gw")
    config = GatewayConfig(
        buses=2,
        queue_capacity=256,
        data_dir=str(data_dir),
        api_keys=(
            ApiKeyEntry("k-user", "acme", Role.USER),
            ApiKeyEntry("k-admin", "acme", Role.ADMIN),
            ApiKeyEntry("k-mgr", "acme", Role.MANAGER),
        ),
    )
    app = create_app(config)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("gateway did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def run_as(url: str, key: str, *argv: str) -> int:
    return main(["--endpoint", url, "--api-key", key, *argv])


def test_register_publish_consume_ack_flow(gateway_url, tmp_path, capsys):
    app_id = fresh("teller")
    token_file = tmp_path / "token.txt"
    assert run_as(gateway_url, "k-user", "app", "register", "--name", app_id,
                  "--token-file", str(token_file)) == 0
    out = capsys.readouterr().out
    assert app_id in out
    wire = token_file.read_text()
    assert "\n" in wire

    assert run_as(gateway_url, "k-user", "publish", app_id,
                  "--token-file", str(token_file), "--data", "hello") == 0
    receipt = capsys.readouterr().out
    assert "bus_seq" in receipt

    deadline = time.monotonic() + 5
    while True:  # background persister makes the envelope readable shortly
        assert run_as(gateway_url, "k-user", "consume", app_id,
                      "--token-file", str(token_file)) == 0
        out = capsys.readouterr().out
        if app_id in out or time.monotonic() > deadline:
            break
        time.sleep(0.02)
    assert "payload_b64" in out

    assert run_as(gateway_url, "k-user", "ack", app_id, "1") == 0
    assert json.loads(capsys.readouterr().out) == {"cursor": 1}


def test_json_output_is_verbatim_body(gateway_url, tmp_path, capsys):
    app_id = fresh("raw")
    token_file = tmp_path / "token.txt"
    run_as(gateway_url, "k-user", "app", "register", "--name", app_id,
           "--token-file", str(token_file))
    capsys.readouterr()
    assert main(["--endpoint", gateway_url, "--api-key", "k-user", "--output", "json",
                 "consume", app_id, "--token-file", str(token_file)]) == 0
    cli_body = capsys.readouterr().out
    wire = token_file.read_text()
    direct = httpx.get(
        f"{gateway_url}/v1/apps/{app_id}/messages",
        params={"token": wire, "after": 0, "limit": 100},
        headers={"X-CSB-Key": "k-user"},
    )
    assert cli_body.encode() == direct.content


def test_cli_workflow_and_billing(gateway_url, capsys):
    assert run_as(gateway_url, "k-admin", "catalog", "set", "compute.large", "700", "USD") == 0
    assert json.loads(capsys.readouterr().out)["version"] >= 1

    assert run_as(gateway_url, "k-user", "request", "Compute",
                  "--spec", "size=large", "--label", "project=atlas") == 0
    request_id = json.loads(capsys.readouterr().out)["request_id"]

    assert run_as(gateway_url, "k-user", "approve", request_id) == 1  # wrong role
    assert "PermissionDenied" in capsys.readouterr().err

    assert run_as(gateway_url, "k-mgr", "approve", request_id) == 0
    assert json.loads(capsys.readouterr().out)["state"] == "Approved"

    assert run_as(gateway_url, "k-user", "provision", request_id) == 0
    resource_id = json.loads(capsys.readouterr().out)["resource_id"]

    assert run_as(gateway_url, "k-user", "release", resource_id) == 0
    assert json.loads(capsys.readouterr().out)["end_ms"] is not None

    assert run_as(gateway_url, "k-mgr", "reject", request_id) == 1  # already released
    assert "InvalidTransition" in capsys.readouterr().err

    assert run_as(gateway_url, "k-admin", "report", "--group-by", "project") == 0
    report_out = capsys.readouterr().out
    assert report_out.startswith("group_by=project")
    assert "atlas" in report_out

    assert run_as(gateway_url, "k-admin", "catalog", "list") == 0
    assert "compute.large" in capsys.readouterr().out

    assert run_as(gateway_url, "k-admin", "dashboard") == 0
    dashboard = json.loads(capsys.readouterr().out)
    assert "buses" in dashboard and "requests" in dashboard

    assert run_as(gateway_url, "k-user", "dashboard") == 1
    assert "PermissionDenied" in capsys.readouterr().err

    assert run_as(gateway_url, "k-user", "metrics") == 0
    assert "buses" in json.loads(capsys.readouterr().out)


def test_cli_auth_failures_exit_1(gateway_url, capsys):
    assert run_as(gateway_url, "k-wrong", "metrics") == 1
    assert "Unauthorized" in capsys.readouterr().err
    assert main(["--endpoint", gateway_url, "metrics"]) == 1  # no key at all
    capsys.readouterr()


def test_endpoint_and_key_from_environment(gateway_url, monkeypatch, capsys):
    monkeypatch.setenv("CSB_ENDPOINT", gateway_url)
    monkeypatch.setenv("CSB_API_KEY", "k-admin")
    assert main(["metrics"]) == 0
    assert "buses" in json.loads(capsys.readouterr().out)
