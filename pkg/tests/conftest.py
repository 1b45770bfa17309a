from __future__ import annotations

import socket
import time
from datetime import datetime, timezone
from pathlib import Path

import pytest

from agentloop.llm import ModelDescriptor, ModelRegistry, ScriptedRule
from agentloop.orchestrator import Runtime

from stubserver import StubToolServer

FIXTURES = Path(__file__).parent / "fixtures"

FROZEN_NOW = datetime(2023, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


class OutboundGuard:
    """Socket-level guard: only loopback connections are permitted."""

    def __init__(self) -> None:
        self.violations: list = []

    @staticmethod
    def _is_loopback(address) -> bool:
        if isinstance(address, (str, bytes)):  # unix domain socket
            return True
        host = str(address[0])
        return host == "localhost" or host.startswith("127.") or host in ("::1", "0.0.0.0")


@pytest.fixture(scope="session", autouse=True)
def outbound_guard():
    guard = OutboundGuard()
    real_connect = socket.socket.connect
    real_connect_ex = socket.socket.connect_ex

    def guarded_connect(self, address):
        if not guard._is_loopback(address):
            guard.violations.append(address)
            raise OSError(f"outbound connection blocked by test guard: {address}")
        return real_connect(self, address)

    def guarded_connect_ex(self, address):
        if not guard._is_loopback(address):
            guard.violations.append(address)
            return 111
        return real_connect_ex(self, address)

    socket.socket.connect = guarded_connect
    socket.socket.connect_ex = guarded_connect_ex
    _ACTIVE_GUARD["guard"] = guard
    try:
        yield guard
    finally:
        socket.socket.connect = real_connect
        socket.socket.connect_ex = real_connect_ex


@pytest.fixture(scope="session")
def suite_started_at():
    return time.monotonic()


def pytest_sessionfinish(session, exitstatus):
    # Belt and braces for the offline guarantee: any outbound connection
    # attempted at any point fails the whole run.
    guard = _ACTIVE_GUARD.get("guard")
    if guard is not None and guard.violations:
        print(f"\nOUTBOUND CONNECTIONS ATTEMPTED: {guard.violations}")
        session.exitstatus = 1


_ACTIVE_GUARD: dict = {}


@pytest.fixture(scope="session")
def stub_server():
    server = StubToolServer()
    server.start()
    try:
        yield server
    finally:
        server.stop()


def frozen_clock():
    return FROZEN_NOW


def make_scripted_runtime(
    rules: list[tuple[str, str]],
    default: str | None = None,
    clock=frozen_clock,
) -> Runtime:
    """Runtime backed by a scripted model; offline, frozen clock."""
    models = ModelRegistry(sleep=lambda _s: None)
    models.register_model(ModelDescriptor(model_id="m", provider_kind="scripted", default=True))
    models.attach_script(
        "m",
        [ScriptedRule(order=i, pattern=p, completion=c) for i, (p, c) in enumerate(rules)],
        default,
    )
    return Runtime(models=models, clock=clock, offline=True)


@pytest.fixture
def scripted_runtime_factory():
    return make_scripted_runtime
