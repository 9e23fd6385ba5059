import threading
import time

import pytest
import uvicorn

from nanogate import codec
from nanogate.ledger import SimLedger
from nanogate.mock_node import create_app as create_node_app


def key_address(i: int) -> str:
    return codec.encode_address(i.to_bytes(32, "big"))


class ServerThread:
    """Run an ASGI app on an ephemeral port in a background thread."""

    def __init__(self, app):
        config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.url = None

    def __enter__(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        self.url = f"http://127.0.0.1:{port}"
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


class MockNodeHandle:
    def __init__(self, ledger: SimLedger, url: str):
        self.ledger = ledger
        self.url = url


@pytest.fixture
def mock_node():
    ledger = SimLedger()
    with ServerThread(create_node_app(ledger)) as server:
        yield MockNodeHandle(ledger, server.url)
