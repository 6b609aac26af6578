import pytest

from csb import Fabric, VirtualClock

TEST_SECRET = b"unit-test-secret-0123456789abcdef"


@pytest.fixture
def clock() -> VirtualClock:
    return VirtualClock(start_ms=1_000_000)


@pytest.fixture
def fabric(tmp_path, clock):
    f = Fabric(2, capacity=8, data_dir=tmp_path / "logs", secret=TEST_SECRET, clock=clock)
    yield f
    f.close()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance criteria verdicts after the captured output."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None) if module else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in results:
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}{suffix}")
