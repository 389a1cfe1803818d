"""Network front door: login, card tray, and RPC dispatch over HTTP.

Endpoints:
  POST /login        JSON {username, password} → bearer token
  POST /rpc          one wire envelope in, one wire envelope out
  POST /card/insert  present a virtual card (its file content plus key) for
                     mutual authentication and sync
  POST /card/eject   drop the card session
  GET  /healthz      build id and journal length

The /rpc body is the wire protocol itself: the client walks a transaction by
sending EnterAmount (carrying a "Workflow" selector), EnterPIN, VerifyPIN and
Transmit envelopes, and the server advances the corresponding workflow run.
Standalone VerifyPIN / VerifyAccount / CancelTransaction / AddCustomer / Login
envelopes are dispatched directly. Every /rpc request/response pair lands in
a JSON Lines audit log with PINs and passwords redacted.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from . import __version__, cardsim, workflows
from .cardsim import CardSession, ChallengeBroker, VirtualCard
from .ledger import (
    AccountNotFound,
    DuplicateAccount,
    DuplicateUsername,
    InsufficientFunds,
    InvalidPin,
    Ledger,
    LedgerConfig,
    NoMatchingTransaction,
    PinAttemptsExceeded,
    TransactionKind,
)
from .money import Money, MoneyError, rupees
from .protocol import (
    ERROR_INSUFFICIENT,
    ERROR_NOT_FOUND,
    ERROR_VERIFICATION,
    RESULT_NOT_ACCEPTED,
    RESULT_NOT_VERIFIED,
    RESULT_OK,
    RESULT_VERIFIED,
    Envelope,
    Method,
    ProtocolError,
    UnknownMethod,
    decode,
    encode,
)
from .store import Store
from .workflows import (
    DEFAULT_DENOMINATIONS,
    MENU_NAMES,
    WORKFLOW_KEY,
    NotAuthorized,
    Stage,
    TransactionWorkflow,
    WorkflowStateError,
)

ACCOUNT_EXISTS_TEXT = "Account Exists."


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    store_path: str = "paydesk-store"
    session_ttl_seconds: int = 900
    denominations: tuple[int, ...] = DEFAULT_DENOMINATIONS
    fsync: bool = True
    digest_iterations: int = 120_000

    def ledger_config(self) -> LedgerConfig:
        return LedgerConfig(digest_iterations=self.digest_iterations)

    @classmethod
    def load(cls, config_file: Optional[str] = None, *, env: Optional[dict] = None,
             port: Optional[int] = None, store_path: Optional[str] = None) -> "ServerConfig":
        """Defaults, then config file, then environment, then explicit flags."""
        import os

        env = os.environ if env is None else env
        cfg = cls()
        if config_file:
            raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
            cfg = replace(
                cfg,
                host=raw.get("host", cfg.host),
                port=raw.get("port", cfg.port),
                store_path=raw.get("storePath", cfg.store_path),
                session_ttl_seconds=raw.get("sessionTtlSeconds", cfg.session_ttl_seconds),
                denominations=tuple(raw.get("denominations", cfg.denominations)),
                fsync=raw.get("fsync", cfg.fsync),
                digest_iterations=raw.get("digestIterations", cfg.digest_iterations),
            )
        if env.get("PORT"):
            cfg = replace(cfg, port=int(env["PORT"]))
        if env.get("STORE_PATH"):
            cfg = replace(cfg, store_path=env["STORE_PATH"])
        if port is not None:
            cfg = replace(cfg, port=port)
        if store_path is not None:
            cfg = replace(cfg, store_path=store_path)
        return cfg


@dataclass
class OperatorSession:
    token: str
    customer_id: str
    account_id: str
    is_admin: bool
    expires_at: datetime
    card_session: Optional[CardSession] = None
    virtual_card: Optional[VirtualCard] = None
    workflow: Optional[TransactionWorkflow] = None


class AuthError(Exception):
    pass


class SessionExpired(AuthError):
    pass


class AuditLog:
    """Append-only JSON Lines log; one redacted request/response per line."""

    def __init__(self, path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def record(self, kind: str, request_obj, response_obj, status: int) -> None:
        line = json.dumps({
            "at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "kind": kind,
            "status": status,
            "request": request_obj,
            "response": response_obj,
        }, separators=(",", ":"))
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()


def _envelope_obj(envelope: Envelope) -> dict:
    """Redacted JSON object form of an envelope, for the audit log."""
    return json.loads(encode(envelope.redacted()))


class PaydeskApp:
    """All server behavior, independent of the HTTP plumbing."""

    def __init__(self, config: ServerConfig, ledger: Ledger, store: Store,
                 audit: AuditLog) -> None:
        self.config = config
        self.ledger = ledger
        self.store = store
        self.audit = audit
        self.broker = ChallengeBroker(ledger)
        self._sessions: dict[str, OperatorSession] = {}
        self._sessions_lock = threading.Lock()

    # -- sessions --------------------------------------------------------------

    def login(self, username: str, password: str) -> OperatorSession:
        customer = self.ledger.verify_password(username, password)
        if customer is None:
            raise AuthError("login failed")
        session = OperatorSession(
            token=secrets.token_hex(16),
            customer_id=customer.customer_id,
            account_id=customer.account_id,
            is_admin=customer.is_admin,
            expires_at=datetime.now(timezone.utc)
            + timedelta(seconds=self.config.session_ttl_seconds),
        )
        with self._sessions_lock:
            self._sweep_locked()
            self._sessions[session.token] = session
        return session

    def session_for(self, token: Optional[str]) -> OperatorSession:
        if not token:
            raise AuthError("missing bearer token")
        with self._sessions_lock:
            session = self._sessions.get(token)
            if session is None:
                raise AuthError("invalid token")
            if session.expires_at <= datetime.now(timezone.utc):
                del self._sessions[session.token]
                raise SessionExpired("session expired")
            return session

    def _sweep_locked(self) -> None:
        now = datetime.now(timezone.utc)
        for token in [t for t, s in self._sessions.items() if s.expires_at <= now]:
            del self._sessions[token]

    # -- card tray -------------------------------------------------------------

    def insert_card(self, session: OperatorSession, card_obj: dict,
                    secret_key_hex: str) -> dict:
        currency = self.ledger.config.currency
        try:
            key = bytes.fromhex(secret_key_hex)
        except ValueError:
            key = b""
        deltas = [
            cardsim.OfflineDelta(
                sequence_no=d["sequenceNo"],
                amount=Money(d["amountMinor"], currency),
                kind=TransactionKind(d.get("kind", "Withdraw")),
                recorded_at=datetime.strptime(d["recordedAt"], "%Y-%m-%dT%H:%M:%SZ")
                .replace(tzinfo=timezone.utc),
            )
            for d in card_obj.get("pendingDeltas", [])
        ]
        card = VirtualCard(
            card_id=card_obj["cardId"],
            card_number=card_obj["cardNumber"],
            account_id=card_obj["accountId"],
            status=cardsim.CardStatus(card_obj.get("status", "Active")),
            cached_balance=Money(card_obj.get("cachedBalanceMinor", 0), currency),
            secret_key=key,
            watermark=card_obj.get("watermark", 0),
            pending_deltas=deltas,
        )
        card_session = cardsim.mutual_authenticate(card, self.broker)
        session.card_session = card_session
        session.virtual_card = card
        session.workflow = None
        result = {
            "cardAuthenticated": card_session.card_authenticated,
            "serverAuthenticated": card_session.server_authenticated,
            "cardNumber": card.card_number,
            "accountId": card.account_id,
        }
        if card_session.transaction_capable:
            report = cardsim.sync_card(
                card_session, card, self.ledger,
                persist=lambda: self.store.save_identity(self.ledger))
            result["synced"] = True
            result["cachedBalanceMinor"] = card.cached_balance.minor_units
            result["watermark"] = card.watermark
            result["deltasApplied"] = len(report.applied)
            result["deltasRejected"] = [err for _, err in report.rejected]
        return result

    def eject_card(self, session: OperatorSession) -> None:
        session.card_session = None
        session.virtual_card = None
        session.workflow = None

    # -- rpc dispatch ------------------------------------------------------------

    def handle_rpc(self, request: Envelope, session: Optional[OperatorSession]) -> Envelope:
        if request.method is Method.LOGIN:
            return self._rpc_login(request)
        if session is None:
            raise AuthError("missing bearer token")
        if request.method in (Method.ENTER_AMOUNT, Method.ENTER_PIN,
                              Method.VERIFY_PIN, Method.TRANSMIT):
            return self._rpc_workflow(request, session)
        if request.method is Method.VERIFY_ACCOUNT:
            return self._rpc_verify_account(request)
        if request.method is Method.CANCEL_TRANSACTION:
            return self._rpc_cancel(request, session)
        if request.method is Method.ADD_CUSTOMER:
            return self._rpc_add_customer(request, session)
        raise UnknownMethod(request.method.value)

    def _reply(self, request: Envelope, *, result: str, error: Optional[str] = None,
               free_text: Optional[str] = None, extras: Optional[dict] = None) -> Envelope:
        return Envelope(
            method=request.method, result=result, error=error,
            to_account=request.to_account, from_account=request.from_account,
            amount=request.amount, free_text=free_text,
            timestamp=datetime.now(timezone.utc), extras=extras or {})

    def _rpc_login(self, request: Envelope) -> Envelope:
        username = request.free_text or request.extras.get("Username") or ""
        password = request.pin or request.extras.get("Password") or ""
        try:
            session = self.login(username, password)
        except AuthError:
            return self._reply(request, result=RESULT_NOT_VERIFIED,
                               error="Internal: login failed")
        return self._reply(request, result=RESULT_OK, extras={
            "Token": session.token,
            "ExpiresAt": session.expires_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "IsAdmin": "true" if session.is_admin else "false",
            "Account": session.account_id,
        })

    def _rpc_workflow(self, request: Envelope, session: OperatorSession) -> Envelope:
        if request.method is Method.ENTER_AMOUNT:
            selector = request.extras.pop(WORKFLOW_KEY, "Pay Over The Counter")
            kind = MENU_NAMES.get(selector)
            if kind is None:
                return self._reply(request, result=RESULT_NOT_ACCEPTED,
                                   error=f"Internal: unknown workflow {selector!r}")
            if session.card_session is None:
                return self._reply(request, result=RESULT_NOT_ACCEPTED,
                                   error="Internal: no card inserted")
            try:
                session.workflow = TransactionWorkflow(
                    kind, self.ledger, session.card_session,
                    denominations=self.config.denominations)
            except NotAuthorized as exc:
                return self._reply(request, result=RESULT_NOT_ACCEPTED,
                                   error=f"Internal: {exc}")
        elif request.method is Method.VERIFY_PIN and session.workflow is None:
            return self._rpc_verify_pin_standalone(request, session)
        if session.workflow is None:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: no transaction in progress")
        try:
            response = session.workflow.handle(request)
        except WorkflowStateError as exc:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error=f"Internal: {exc}")
        except PinAttemptsExceeded:
            session.workflow = None
            return self._reply(request, result=RESULT_NOT_VERIFIED,
                               error=ERROR_VERIFICATION)
        if session.workflow.run.stage in (Stage.DONE, Stage.FAILED):
            session.workflow = None
        return response

    def _rpc_verify_pin_standalone(self, request: Envelope,
                                   session: OperatorSession) -> Envelope:
        if session.card_session is None or not session.card_session.transaction_capable:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: no card inserted")
        card = self.ledger.find_card(session.card_session.card_id)
        customer = self.ledger.customer_for_account(card.account_id) if card else None
        try:
            ok = (customer is not None
                  and self.ledger.verify_pin(customer.customer_id, request.pin or ""))
        except PinAttemptsExceeded:
            ok = False
        if ok:
            session.card_session.pin_verified = True
            return self._reply(request, result=RESULT_VERIFIED)
        return self._reply(request, result=RESULT_NOT_VERIFIED, error=ERROR_VERIFICATION)

    def _rpc_verify_account(self, request: Envelope) -> Envelope:
        account_id = request.to_account or request.from_account or ""
        if self.ledger.verify_account(account_id):
            return self._reply(request, result=RESULT_VERIFIED,
                               free_text=ACCOUNT_EXISTS_TEXT)
        return self._reply(request, result=RESULT_NOT_VERIFIED, error=ERROR_NOT_FOUND)

    def _rpc_cancel(self, request: Envelope, session: OperatorSession) -> Envelope:
        if session.card_session is None or not session.card_session.transaction_capable:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: no card inserted")
        card = self.ledger.find_card(session.card_session.card_id)
        customer = self.ledger.customer_for_account(card.account_id) if card else None
        try:
            pin_ok = (customer is not None
                      and self.ledger.verify_pin(customer.customer_id, request.pin or ""))
        except PinAttemptsExceeded:
            pin_ok = False
        if not pin_ok:
            return self._reply(request, result=RESULT_NOT_VERIFIED,
                               error=ERROR_VERIFICATION)
        if request.amount is None:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: missing amount")
        counterparty = request.to_account or ""
        try:
            record = self.ledger.cancel(card.account_id, counterparty, request.amount)
        except NoMatchingTransaction:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: no matching transaction")
        except InsufficientFunds:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error=ERROR_INSUFFICIENT)
        except AccountNotFound:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error=ERROR_NOT_FOUND)
        return self._reply(request, result=RESULT_OK,
                           extras={"ReversalOf": str(record.reversal_of)})

    def _rpc_add_customer(self, request: Envelope, session: OperatorSession) -> Envelope:
        if not session.is_admin:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: admin capability required")
        extras = request.extras
        # decoding folds a top-level "PIN" key into the envelope field
        pin = extras.get("PIN") or request.pin or ""
        required = {"Name": extras.get("Name", ""),
                    "Username": extras.get("Username", ""),
                    "Password": extras.get("Password", ""),
                    "PIN": pin}
        missing = [key for key, value in required.items() if not value]
        if missing:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error=f"Internal: missing fields {', '.join(missing)}")
        try:
            initial = rupees(int(extras.get("InitialBalance", "0")),
                             self.ledger.config.currency)
        except ValueError:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error="Internal: bad InitialBalance")
        try:
            customer_id, account_id, card_id = self.ledger.add_customer(
                name=extras["Name"], username=extras["Username"],
                password=extras["Password"], pin=pin,
                initial_balance=initial,
                phone=extras.get("Phone", ""), office=extras.get("Office", ""),
                room=extras.get("Room", ""), email=extras.get("Email", ""),
                department=extras.get("Department", ""),
                account_id=extras.get("Account") or None)
        except (DuplicateUsername, DuplicateAccount, InvalidPin, MoneyError, ValueError) as exc:
            return self._reply(request, result=RESULT_NOT_ACCEPTED,
                               error=f"Internal: {exc}")
        self.store.save_identity(self.ledger)
        return self._reply(request, result=RESULT_OK, extras={
            "CustomerId": customer_id, "Account": account_id, "CardId": card_id})

    # -- http-facing text handlers ---------------------------------------------

    def rpc_text(self, body: str, token: Optional[str]) -> tuple[int, str]:
        """Full /rpc handling over wire text; returns (status, body)."""
        request: Optional[Envelope] = None
        request_audit: object = body[:2000]
        try:
            request = decode(body)
            request_audit = _envelope_obj(request)
        except UnknownMethod:
            status, payload = 400, {"Result": RESULT_NOT_ACCEPTED,
                                    "Error": "Internal: unknown method"}
            self.audit.record("rpc", request_audit, payload, status)
            return status, json.dumps(payload, indent=2)
        except ProtocolError:
            status, payload = 400, {"Result": RESULT_NOT_ACCEPTED,
                                    "Error": "Internal: bad request"}
            self.audit.record("rpc", request_audit, payload, status)
            return status, json.dumps(payload, indent=2)

        try:
            session = None
            if request.method is not Method.LOGIN:
                session = self.session_for(token)
            response = self.handle_rpc(request, session)
            status = 200
        except SessionExpired:
            status = 401
            response = self._reply(request, result=RESULT_NOT_ACCEPTED,
                                   error="Internal: session expired")
        except AuthError as exc:
            status = 401
            response = self._reply(request, result=RESULT_NOT_ACCEPTED,
                                   error=f"Internal: {exc}")
        except UnknownMethod:
            status = 400
            response = self._reply(request, result=RESULT_NOT_ACCEPTED,
                                   error="Internal: unknown method")
        self.audit.record("rpc", request_audit, _envelope_obj(response), status)
        return status, encode(response)

    def healthz(self) -> dict:
        return {
            "status": "ok",
            "build": __version__,
            "journalLength": self.ledger.last_tx_id,
        }


class _Handler(BaseHTTPRequestHandler):
    app: PaydeskApp  # set on the subclass created in build_server

    server_version = "paydesk"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet; the audit log is the record
        pass

    def _body(self) -> str:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length).decode("utf-8") if length else ""

    def _token(self) -> Optional[str]:
        header = self.headers.get("Authorization") or ""
        return header[len("Bearer "):] if header.startswith("Bearer ") else None

    def _send(self, status: int, body: str, content_type: str = "application/json") -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            self._send(200, json.dumps(self.app.healthz(), indent=2))
        else:
            self._send(404, json.dumps({"error": "not found"}))

    def do_POST(self) -> None:
        body = self._body()
        if self.path == "/rpc":
            status, text = self.app.rpc_text(body, self._token())
            self._send(status, text)
            return
        if self.path == "/login":
            try:
                creds = json.loads(body or "{}")
                session = self.app.login(str(creds.get("username", "")),
                                         str(creds.get("password", "")))
            except (json.JSONDecodeError, AuthError):
                self._send(401, json.dumps({"error": "login failed"}))
                return
            self._send(200, json.dumps({
                "token": session.token,
                "expiresAt": session.expires_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "isAdmin": session.is_admin,
                "account": session.account_id,
            }))
            return
        if self.path == "/card/insert":
            try:
                session = self.app.session_for(self._token())
            except AuthError as exc:
                self._send(401, json.dumps({"error": str(exc)}))
                return
            try:
                payload = json.loads(body or "{}")
                result = self.app.insert_card(
                    session, payload.get("card", {}),
                    str(payload.get("secretKeyHex", "")))
            except cardsim.CardError as exc:
                self._send(403, json.dumps(
                    {"error": f"{type(exc).__name__}", "detail": str(exc)}))
                return
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                self._send(400, json.dumps({"error": f"bad card payload: {exc}"}))
                return
            self._send(200, json.dumps(result))
            return
        if self.path == "/card/eject":
            try:
                session = self.app.session_for(self._token())
            except AuthError as exc:
                self._send(401, json.dumps({"error": str(exc)}))
                return
            self.app.eject_card(session)
            self._send(200, json.dumps({"ejected": True}))
            return
        self._send(404, json.dumps({"error": "not found"}))


class PaydeskServer:
    """A bound HTTP server plus its application state."""

    def __init__(self, config: ServerConfig, app: PaydeskApp,
                 httpd: ThreadingHTTPServer) -> None:
        self.config = config
        self.app = app
        self.httpd = httpd

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()

    def close(self) -> None:
        self.httpd.server_close()
        self.app.ledger.close()
        self.app.audit.close()


def build_server(config: ServerConfig) -> PaydeskServer:
    """Open the store, rebuild the ledger, and bind the port (fatal on error)."""
    store = Store(config.store_path)
    ledger = store.open_ledger(config.ledger_config(), fsync=config.fsync)
    audit = AuditLog(store.path / "audit.jsonl")
    app = PaydeskApp(config, ledger, store, audit)

    handler = type("BoundHandler", (_Handler,), {"app": app})
    httpd = ThreadingHTTPServer((config.host, config.port), handler)
    return PaydeskServer(config, app, httpd)


def serve(config: ServerConfig) -> None:
    """Run until interrupted; flushes and closes the journal on the way out."""
    server = build_server(config)
    print(f"paydesk listening on port {server.port} (store: {config.store_path})",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
