"""paydesk: desk-scale secure debit-card payments.

Conserved-money ledger over an append-only journal, the PoS wire protocol
(strict emit, lenient parse), four transaction workflows, a software smart
card with mutual authentication, and an RPC server tying them together.
"""

__version__ = "0.1.0"
