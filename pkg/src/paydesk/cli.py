"""Operator command line: serve, seed, replay, inspect, demo.

Every command is non-interactive and exits 0 only when its stated effect
held. `demo` drives a complete transaction against a running server through
the public HTTP interface and prints the canonical wire transcript.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import cardsim, store as store_mod
from .client import RpcClient, RpcError
from .ledger import AccountNotFound, Ledger, TransactionKind
from .money import rupees
from .protocol import RESULT_OK, RESULT_TRANSMISSION_SUCCESSFUL, encode
from .server import ServerConfig, serve
from .store import ReplayError, Store, StoreError, StoreNotEmpty, replay, state_hash

SEED_PIN = "1234"

DEMO_KINDS = {
    "potc": TransactionKind.POTC,
    "a2a": TransactionKind.A2A,
    "withdraw": TransactionKind.WITHDRAW,
    "deposit": TransactionKind.DEPOSIT,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paydesk",
                                     description="desk-scale card payment service")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the RPC server")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--store", default=None)
    p_serve.add_argument("--config", default=None)

    p_seed = sub.add_parser("seed", help="create the demo data set")
    p_seed.add_argument("--store", default="paydesk-store")
    p_seed.add_argument("--force", action="store_true",
                        help="re-initialize a non-empty store")

    p_replay = sub.add_parser("replay", help="rebuild state from a journal")
    p_replay.add_argument("path", help="journal file or store directory")

    p_inspect = sub.add_parser("inspect", help="show an account and its history")
    p_inspect.add_argument("account")
    p_inspect.add_argument("--store", default="paydesk-store")

    p_demo = sub.add_parser("demo", help="drive one transaction end to end")
    p_demo.add_argument("kind", choices=sorted(DEMO_KINDS))
    p_demo.add_argument("amount", nargs="?", type=int, default=100,
                        help="whole rupees (deposit: ignored when --notes given)")
    p_demo.add_argument("--server", default="http://127.0.0.1:8080")
    p_demo.add_argument("--store", default="paydesk-store",
                        help="store holding the card files and keystore")
    p_demo.add_argument("--username", default="1")
    p_demo.add_argument("--password", default="1")
    p_demo.add_argument("--card", default="1", help="card number to insert")
    p_demo.add_argument("--pin", default=SEED_PIN)
    p_demo.add_argument("--to", dest="recipient", default=None,
                        help="recipient account (payments default to Merchant, "
                             "deposits to the cardholder)")
    p_demo.add_argument("--notes", default=None,
                        help="deposit note list, e.g. 100,100")
    return parser


def cmd_serve(args) -> int:
    try:
        config = ServerConfig.load(args.config, port=args.port, store_path=args.store)
        serve(config)
    except (OSError, StoreError, ValueError) as exc:
        print(f"serve failed: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_seed(args) -> int:
    st = Store(args.store)
    st.initialize()
    if not st.is_empty():
        if not args.force:
            print(f"seed failed: store {args.store} is not empty "
                  "(use --force to re-initialize)", file=sys.stderr)
            return 1
        st.wipe()
    ledger = None
    try:
        ledger = st.open_ledger()
        rows = [
            # (name, username, password, pin, balance, admin)
            ("Rum", "rum", "rum", SEED_PIN, rupees(120), False),
            ("Merchant", "merchant", "merchant", "4321", rupees(0), False),
            ("Admin", "1", "1", "0000", rupees(0), True),
        ]
        for name, username, password, pin, balance, admin in rows:
            customer_id, account_id, card_id = ledger.add_customer(
                name, username, password, pin, balance, is_admin=admin)
            card = ledger.card(card_id)
            cardsim.save_card_file(cardsim.make_virtual_card(card),
                                   st.cards_dir / f"{card.card_number}.json")
            print(f"created customer {customer_id}: account {account_id}, "
                  f"card {card.card_number} ({card_id}), "
                  f"balance {balance}")
        st.save_identity(ledger)
        print(f"state hash {state_hash(ledger)}")
    except (StoreError, OSError) as exc:
        print(f"seed failed: {exc}", file=sys.stderr)
        return 1
    finally:
        if ledger is not None:
            ledger.close()
    return 0


def cmd_replay(args) -> int:
    path = Path(args.path)
    journal = path / Store.JOURNAL if path.is_dir() else path
    if not journal.exists():
        print(f"replay failed: no journal at {journal}", file=sys.stderr)
        return 1
    try:
        state = replay(journal)
    except ReplayError as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    print(f"{state.last_tx_id} records, total {state.total_minor_units()} minor units")
    print(f"state hash {state_hash(state)}")
    return 0


def cmd_inspect(args) -> int:
    st = Store(args.store)
    if st.is_empty():
        print(f"inspect failed: store {args.store} is empty", file=sys.stderr)
        return 1
    ledger = st.open_ledger(fsync=False)
    try:
        balance = ledger.balance(args.account)
    except AccountNotFound:
        print(f"inspect failed: no account {args.account!r}", file=sys.stderr)
        return 1
    finally:
        ledger.close()
    print(f"account {args.account}: {balance}")
    for record in ledger.records(args.account, limit=10):
        tail = f" (reverses {record.reversal_of})" if record.reversal_of else ""
        print(f"  tx {record.tx_id} {record.kind.value}: "
              f"{record.from_account} -> {record.to_account} "
              f"{record.amount}{tail}")
    return 0


def cmd_demo(args) -> int:
    kind = DEMO_KINDS[args.kind]
    st = Store(args.store)
    card_file = st.cards_dir / f"{args.card}.json"
    client = RpcClient(args.server)
    try:
        client.login(args.username, args.password)
        tray = client.insert_card(card_file, st.keystore_path)
        if not (tray.get("cardAuthenticated") and tray.get("serverAuthenticated")):
            print(f"demo failed: card authentication rejected: {tray}", file=sys.stderr)
            return 1
        notes = [int(n) for n in args.notes.split(",")] if args.notes else None
        if kind is TransactionKind.DEPOSIT and notes is None:
            notes = [args.amount]
        recipient = args.recipient
        if recipient is None and kind in (TransactionKind.POTC, TransactionKind.A2A):
            recipient = "Merchant"
        transcript = client.drive_workflow(
            kind, pin=args.pin, amount=rupees(args.amount),
            recipient=recipient, notes=notes or ())
    except (RpcError, OSError, RuntimeError, ValueError) as exc:
        print(f"demo failed: {exc}", file=sys.stderr)
        return 1
    for envelope in transcript:
        print(encode(envelope))
    final = transcript[-1]
    ok = final.result in (RESULT_OK, RESULT_TRANSMISSION_SUCCESSFUL) and final.error is None
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "seed": cmd_seed,
        "replay": cmd_replay,
        "inspect": cmd_inspect,
        "demo": cmd_demo,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
