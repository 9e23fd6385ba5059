import json
import threading

import pytest

from nanogate import tokens
from nanogate.store import ConsumedHashStore, CorruptStore

SECRET = b"s" * 32


class TestTokens:
    def test_round_trip(self):
        text = tokens.issue_token(SECRET, "abc", "nano_x", 100, 200)
        payload = tokens.verify_token(SECRET, text, now=150)
        assert payload["session_id"] == "abc"
        assert payload["payer"] == "nano_x"

    def test_expiry_boundary_exclusive(self):
        text = tokens.issue_token(SECRET, "abc", "nano_x", 100, 200)
        assert tokens.verify_token(SECRET, text, now=199)
        with pytest.raises(tokens.TokenInvalid, match="expired"):
            tokens.verify_token(SECRET, text, now=200)

    def test_wrong_secret(self):
        text = tokens.issue_token(SECRET, "abc", "nano_x", 100, 200)
        with pytest.raises(tokens.TokenInvalid, match="bad_signature"):
            tokens.verify_token(b"t" * 32, text, now=150)

    def test_single_edit_scan(self):
        """Every single-character edit anywhere in the token must be rejected."""
        text = tokens.issue_token(SECRET, "abc", "nano_x", 100, 200)
        alphabet = "AQgw.=~x0_-"  # includes base64 chars differing only in trailing bits
        for i in range(len(text)):
            for ch in alphabet:
                if ch == text[i]:
                    continue
                edited = text[:i] + ch + text[i + 1:]
                with pytest.raises(tokens.TokenInvalid):
                    tokens.verify_token(SECRET, edited, now=150)

    def test_truncation_rejected(self):
        text = tokens.issue_token(SECRET, "abc", "nano_x", 100, 200)
        with pytest.raises(tokens.TokenInvalid):
            tokens.verify_token(SECRET, text[:-1], now=150)
        with pytest.raises(tokens.TokenInvalid):
            tokens.verify_token(SECRET, "garbage", now=150)


class TestConsumedHashStore:
    def test_insert_if_absent(self, tmp_path):
        store = ConsumedHashStore(str(tmp_path / "consumed.jsonl"))
        assert store.consume("AA" * 32) is True
        assert store.consume("AA" * 32) is False
        assert "AA" * 32 in store

    def test_survives_restart(self, tmp_path):
        path = str(tmp_path / "consumed.jsonl")
        store = ConsumedHashStore(path)
        store.consume("AA" * 32)
        store.close()
        reopened = ConsumedHashStore(path)
        assert reopened.consume("AA" * 32) is False
        assert reopened.consume("BB" * 32) is True

    def test_race_one_winner(self):
        store = ConsumedHashStore()
        wins = []
        barrier = threading.Barrier(64)

        def attempt():
            barrier.wait()
            if store.consume("CC" * 32):
                wins.append(1)

        threads = [threading.Thread(target=attempt) for _ in range(64)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(wins) == 1

    def test_torn_final_line_ignored(self, tmp_path):
        path = tmp_path / "consumed.jsonl"
        path.write_text(json.dumps({"hash": "AA" * 32}) + "\n" + '{"hash": "BB')
        store = ConsumedHashStore(str(path))
        assert store.consume("AA" * 32) is False
        assert store.consume("BB" * 32) is True  # torn record never committed

    def test_corrupt_interior_line_refuses(self, tmp_path):
        path = tmp_path / "consumed.jsonl"
        path.write_text('not json\n' + json.dumps({"hash": "AA" * 32}) + "\n")
        with pytest.raises(CorruptStore):
            ConsumedHashStore(str(path))

    def test_ephemeral_mode(self):
        store = ConsumedHashStore()
        assert store.consume("DD" * 32) is True
        assert len(store) == 1
