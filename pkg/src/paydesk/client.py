"""Thin HTTP client for the RPC server (stdlib urllib only).

Used by the CLI `demo` command and the end-to-end tests; it talks to the
server exclusively through the public endpoints and the wire protocol.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from pathlib import Path
from typing import Optional, Sequence

from .ledger import TransactionKind
from .money import Money
from .protocol import Envelope, decode, encode
from .workflows import (
    DEPOSIT_CASH_LABEL,
    MENU_NAME_FOR,
    NoteBundle,
    WITHDRAW_CASH_LABEL,
    WORKFLOW_KEY,
    build_enter_amount,
    build_enter_pin,
    build_transmit,
    build_verify_pin,
)


class RpcError(Exception):
    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class RpcClient:
    def __init__(self, base_url: str, timeout: float = 10.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.token: Optional[str] = None
        self.account: Optional[str] = None
        self.card_account: Optional[str] = None

    def _request(self, method: str, path: str, body: str = "",
                 content_type: str = "application/json") -> tuple[int, str]:
        req = urllib.request.Request(self.base_url + path,
                                     data=body.encode("utf-8") if body else None,
                                     method=method)
        req.add_header("Content-Type", content_type)
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            return exc.code, exc.read().decode("utf-8")

    def healthz(self) -> dict:
        status, body = self._request("GET", "/healthz")
        if status != 200:
            raise RpcError(status, body)
        return json.loads(body)

    def login(self, username: str, password: str) -> dict:
        status, body = self._request(
            "POST", "/login", json.dumps({"username": username, "password": password}))
        if status != 200:
            raise RpcError(status, body)
        info = json.loads(body)
        self.token = info["token"]
        self.account = info.get("account")
        return info

    def insert_card(self, card_file, keystore_file) -> dict:
        card_obj = json.loads(Path(card_file).read_text(encoding="utf-8"))
        keystore = json.loads(Path(keystore_file).read_text(encoding="utf-8"))
        key_hex = keystore.get(card_obj["cardId"], "")
        status, body = self._request(
            "POST", "/card/insert",
            json.dumps({"card": card_obj, "secretKeyHex": key_hex}))
        if status != 200:
            raise RpcError(status, body)
        info = json.loads(body)
        self.card_account = info.get("accountId")
        return info

    def eject_card(self) -> None:
        status, body = self._request("POST", "/card/eject")
        if status != 200:
            raise RpcError(status, body)

    def rpc(self, envelope: Envelope) -> Envelope:
        status, body = self._request("POST", "/rpc", encode(envelope))
        if status != 200:
            raise RpcError(status, body)
        return decode(body)

    def drive_workflow(self, kind: TransactionKind, *, pin: str,
                       amount: Optional[Money] = None,
                       recipient: Optional[str] = None,
                       notes: Sequence[int] = ()) -> list[Envelope]:
        """Walk one transaction over /rpc; returns the interleaved transcript.

        Stops after the first response that carries an error, mirroring the
        stage machine on the server side.
        """
        card_account = self.card_account
        if card_account is None:
            raise RuntimeError("insert a card before starting a transaction")
        bundle: Optional[NoteBundle] = None
        if kind is TransactionKind.DEPOSIT:
            bundle = NoteBundle(tuple(notes))
            amount = bundle.total()
            to_label, from_label = recipient or card_account, DEPOSIT_CASH_LABEL
        elif kind is TransactionKind.WITHDRAW:
            if amount is None:
                raise ValueError("withdrawal needs an amount")
            to_label, from_label = WITHDRAW_CASH_LABEL, card_account
        else:
            if amount is None or recipient is None:
                raise ValueError(f"{kind.value} needs an amount and a recipient")
            to_label, from_label = recipient, card_account

        opener = build_enter_amount(kind, to_label, from_label, amount, notes=bundle)
        opener.extras[WORKFLOW_KEY] = MENU_NAME_FOR[kind]
        requests = [
            opener,
            build_enter_pin(kind),
            build_verify_pin(kind, pin),
            build_transmit(kind, to_label, from_label, amount),
        ]
        transcript: list[Envelope] = []
        for request in requests:
            response = self.rpc(request)
            request.extras.pop(WORKFLOW_KEY, None)  # plumbing, not wire texture
            transcript.append(request.redacted())
            transcript.append(response)
            if response.error is not None:
                break
        return transcript
