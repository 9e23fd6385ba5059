import json

import pytest
from fastapi.testclient import TestClient

from nanogate.codec import RawAmount
from nanogate.service import (
    ConfigError,
    GateConfig,
    SessionLog,
    create_app,
    load_config,
)
from nanogate.store import CorruptStore

from conftest import key_address

PAYER = key_address(10)
DEPOSIT = key_address(20)
SECRET = "s" * 32


class Clock:
    def __init__(self, t=0):
        self.t = t

    def __call__(self):
        return self.t


def make_config(node_url, **overrides):
    values = dict(
        node_url=node_url,
        deposit_account=DEPOSIT,
        price_raw="1000",
        token_secret=SECRET,
    )
    values.update(overrides)
    return GateConfig(**values)


@pytest.fixture
def gate_env(mock_node):
    mock_node.ledger.mint(PAYER, RawAmount(10**9))
    clock = Clock()
    app = create_app(make_config(mock_node.url), clock=clock)
    return TestClient(app, raise_server_exceptions=False), mock_node, clock


def full_flow(client, node, pay=True, amount=None):
    session = client.post("/v1/sessions", json={"account": PAYER}).json()
    sid = session["session_id"]
    node.ledger.change_representative(PAYER, session["challenge_representative"])
    spec = client.post(f"/v1/sessions/{sid}/ownership/verify").json()
    if pay:
        node.ledger.send(PAYER, DEPOSIT,
                         amount or RawAmount.parse(spec["amount_raw"]))
    return sid, spec


class TestSessionEndpoints:
    def test_create_201(self, gate_env):
        client, _, _ = gate_env
        response = client.post("/v1/sessions", json={"account": PAYER})
        assert response.status_code == 201
        body = response.json()
        assert body["state"] == "awaiting_ownership"
        assert body["challenge_representative"].startswith("nano_")

    def test_create_distinct_challenges(self, gate_env):
        client, _, _ = gate_env
        reps = {client.post("/v1/sessions", json={"account": PAYER})
                .json()["challenge_representative"] for _ in range(3)}
        assert len(reps) == 3

    def test_invalid_address_400(self, gate_env):
        client, _, _ = gate_env
        bad = PAYER[:-1] + ("1" if PAYER[-1] != "1" else "3")
        response = client.post("/v1/sessions", json={"account": bad})
        assert response.status_code == 400
        assert response.json() == {"error": "invalid_address",
                                   "reason": "checksum_mismatch"}

    def test_unopened_404(self, gate_env):
        client, _, _ = gate_env
        response = client.post("/v1/sessions", json={"account": key_address(77)})
        assert response.status_code == 404
        assert response.json()["error"] == "account_not_found"

    def test_too_many_sessions_429(self, gate_env):
        client, _, _ = gate_env
        for _ in range(5):
            assert client.post("/v1/sessions", json={"account": PAYER}).status_code == 201
        assert client.post("/v1/sessions", json={"account": PAYER}).status_code == 429

    def test_node_down_503(self):
        clock = Clock()
        app = create_app(make_config("http://127.0.0.1:1"), clock=clock)
        client = TestClient(app, raise_server_exceptions=False)
        response = client.post("/v1/sessions", json={"account": PAYER})
        assert response.status_code == 503
        assert response.json()["error"] == "node_unavailable"

    def test_get_unknown_404(self, gate_env):
        client, _, _ = gate_env
        assert client.get("/v1/sessions/deadbeef").status_code == 404

    def test_get_view_progression(self, gate_env):
        client, node, _ = gate_env
        sid, _ = full_flow(client, node, pay=False)
        view = client.get(f"/v1/sessions/{sid}").json()
        assert view["state"] == "awaiting_payment"
        assert view["payment_uri"] == f"nano:{DEPOSIT}?amount=1000"
        assert "access_token" not in view and "token" not in view


class TestOwnershipEndpoint:
    def test_mismatch_409(self, gate_env):
        client, _, _ = gate_env
        sid = client.post("/v1/sessions", json={"account": PAYER}).json()["session_id"]
        response = client.post(f"/v1/sessions/{sid}/ownership/verify")
        assert response.status_code == 409
        body = response.json()
        assert body["error"] == "representative_mismatch"
        assert body["observed"] == PAYER

    def test_success_carries_payment_spec(self, gate_env):
        client, node, _ = gate_env
        sid, spec = full_flow(client, node, pay=False)
        assert spec["state"] == "awaiting_payment"
        assert spec["deposit_account"] == DEPOSIT
        assert spec["amount_raw"] == "1000"
        assert spec["pay_by"] == spec["expires_at"]

    def test_expired_410(self, gate_env):
        client, _, clock = gate_env
        sid = client.post("/v1/sessions", json={"account": PAYER}).json()["session_id"]
        clock.t = 10**9
        response = client.post(f"/v1/sessions/{sid}/ownership/verify")
        assert response.status_code == 410
        assert response.json()["error"] == "session_expired"


class TestPaymentEndpoint:
    def test_grant_200_with_token_once(self, gate_env):
        client, node, _ = gate_env
        sid, _ = full_flow(client, node)
        response = client.post(f"/v1/sessions/{sid}/payment/verify")
        assert response.status_code == 200
        body = response.json()
        assert body["state"] == "granted"
        assert body["access_token"].count(".") == 1
        # views never echo the token
        view = client.get(f"/v1/sessions/{sid}").json()
        assert "access_token" not in view and "token" not in view
        # a second verify on a granted session is a state error, not a re-issue
        assert client.post(f"/v1/sessions/{sid}/payment/verify").status_code == 409

    def test_no_payment_402(self, gate_env):
        client, node, _ = gate_env
        sid, _ = full_flow(client, node, pay=False)
        response = client.post(f"/v1/sessions/{sid}/payment/verify")
        assert response.status_code == 402
        assert response.json()["error"] == "payment_not_found"

    def test_underpaid_402(self, gate_env):
        client, node, _ = gate_env
        sid, _ = full_flow(client, node, amount=RawAmount(999))
        response = client.post(f"/v1/sessions/{sid}/payment/verify")
        assert response.status_code == 402
        assert response.json() == {"error": "underpaid", "best_amount": "999"}


class TestProtectedEndpoint:
    def grant(self, client, node):
        sid, _ = full_flow(client, node)
        return client.post(f"/v1/sessions/{sid}/payment/verify").json()["access_token"]

    def test_search_with_token(self, gate_env):
        client, node, _ = gate_env
        token = self.grant(client, node)
        response = client.get("/v1/protected/search", params={"q": "hello there"},
                              headers={"Authorization": f"Bearer {token}"})
        assert response.status_code == 200
        assert response.json()["result"]["word_count"] == 2

    def test_missing_header_401(self, gate_env):
        client, _, _ = gate_env
        assert client.get("/v1/protected/search", params={"q": "x"}).status_code == 401

    def test_tampered_token_401(self, gate_env):
        client, node, _ = gate_env
        token = self.grant(client, node)
        tampered = ("A" if token[0] != "A" else "B") + token[1:]
        response = client.get("/v1/protected/search", params={"q": "x"},
                              headers={"Authorization": f"Bearer {tampered}"})
        assert response.status_code == 401

    def test_expired_token_401(self, gate_env):
        client, node, clock = gate_env
        token = self.grant(client, node)
        clock.t = 10**9
        response = client.get("/v1/protected/search", params={"q": "x"},
                              headers={"Authorization": f"Bearer {token}"})
        assert response.status_code == 401
        assert response.json()["reason"] == "expired"


class TestHealth:
    def test_healthz(self, gate_env):
        client, _, _ = gate_env
        body = client.get("/healthz").json()
        assert body["node_reachable"] is True
        assert body["requests_served"] >= 1

    def test_healthz_node_down(self):
        app = create_app(make_config("http://127.0.0.1:1"))
        client = TestClient(app)
        assert client.get("/healthz").json()["node_reachable"] is False


class TestPersistence:
    def test_recovery_after_restart(self, mock_node, tmp_path):
        mock_node.ledger.mint(PAYER, RawAmount(10**9))
        data_dir = str(tmp_path / "gate-data")
        clock = Clock()
        config = make_config(mock_node.url, data_dir=data_dir)
        client = TestClient(create_app(config, clock=clock),
                            raise_server_exceptions=False)
        sid, _ = full_flow(client, mock_node)
        body = client.post(f"/v1/sessions/{sid}/payment/verify").json()
        assert body["state"] == "granted"

        # "restart": a fresh app over the same data_dir
        reborn = TestClient(create_app(config, clock=clock),
                            raise_server_exceptions=False)
        view = reborn.get(f"/v1/sessions/{sid}").json()
        assert view["state"] == "granted"
        # the already-consumed send never grants again
        second = reborn.post("/v1/sessions", json={"account": PAYER}).json()
        mock_node.ledger.change_representative(PAYER, second["challenge_representative"])
        reborn.post(f"/v1/sessions/{second['session_id']}/ownership/verify")
        response = reborn.post(f"/v1/sessions/{second['session_id']}/payment/verify")
        assert response.status_code == 402
        assert response.json()["error"] == "payment_not_found"

    def test_in_flight_sessions_keep_deadlines(self, mock_node, tmp_path):
        mock_node.ledger.mint(PAYER, RawAmount(10**9))
        config = make_config(mock_node.url, data_dir=str(tmp_path / "d"))
        clock = Clock()
        client = TestClient(create_app(config, clock=clock))
        session = client.post("/v1/sessions", json={"account": PAYER}).json()
        reborn = TestClient(create_app(config, clock=clock))
        view = reborn.get(f"/v1/sessions/{session['session_id']}").json()
        assert view["state"] == "awaiting_ownership"
        assert view["expires_at"] == session["expires_at"]

    def test_torn_final_line_tolerated(self, mock_node, tmp_path):
        data_dir = tmp_path / "d"
        data_dir.mkdir()
        (data_dir / "sessions.jsonl").write_text('{"event": "crea')
        config = make_config(mock_node.url, data_dir=str(data_dir))
        client = TestClient(create_app(config))
        assert client.get("/healthz").status_code == 200

    def test_corrupt_interior_line_refuses_startup(self, mock_node, tmp_path):
        data_dir = tmp_path / "d"
        data_dir.mkdir()
        (data_dir / "sessions.jsonl").write_text("junk\nmore junk\n")
        config = make_config(mock_node.url, data_dir=str(data_dir))
        with pytest.raises(CorruptStore):
            create_app(config)


class TestConfig:
    def test_file_plus_env_precedence(self, tmp_path):
        path = tmp_path / "gate.json"
        path.write_text(json.dumps({
            "deposit_account": DEPOSIT, "price_raw": "5",
            "token_secret": SECRET, "node_url": "http://file-node",
        }))
        config = load_config(str(path), env={"GATE_NODE_URL": "http://env-node",
                                             "GATE_PRICE_RAW": "9"})
        assert config.node_url == "http://env-node"
        assert config.price_raw == "9"
        assert config.deposit_account == DEPOSIT

    def test_env_only(self):
        config = load_config(env={
            "GATE_DEPOSIT_ACCOUNT": DEPOSIT, "GATE_PRICE_RAW": "5",
            "GATE_TOKEN_SECRET": SECRET,
        })
        assert config.price().value == 5

    def test_zero_price_refused(self):
        with pytest.raises(ConfigError, match="positive"):
            load_config(env={"GATE_DEPOSIT_ACCOUNT": DEPOSIT,
                             "GATE_PRICE_RAW": "0",
                             "GATE_TOKEN_SECRET": SECRET})

    def test_short_secret_refused(self):
        with pytest.raises(ConfigError, match="32 bytes"):
            load_config(env={"GATE_DEPOSIT_ACCOUNT": DEPOSIT,
                             "GATE_PRICE_RAW": "5",
                             "GATE_TOKEN_SECRET": "short"})

    def test_bad_deposit_refused(self):
        with pytest.raises(ConfigError, match="deposit_account"):
            load_config(env={"GATE_DEPOSIT_ACCOUNT": "nano_bad",
                             "GATE_PRICE_RAW": "5",
                             "GATE_TOKEN_SECRET": SECRET})

    def test_missing_required_refused(self):
        with pytest.raises(ConfigError):
            load_config(env={})
