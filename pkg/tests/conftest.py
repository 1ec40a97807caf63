from __future__ import annotations

from pathlib import Path

import pytest

from atsmatch.state import (
    BookSide,
    IncomingOrder,
    MarketState,
    OrderKind,
    PriceLevel,
    QueuedOrder,
    ResidentEntry,
    Side,
)

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

BUY, SELL = Side.BUY, Side.SELL


def limit(side, price, qty, oid):
    return IncomingOrder(OrderKind.LIMIT, side, price, oid, qty)


def market(side, qty, oid):
    return IncomingOrder(OrderKind.MARKET, side, 0, oid, qty)


def cancel(side, price, oid, qty=0):
    return IncomingOrder(OrderKind.CANCEL, side, price, oid, qty)


def side_of(side, levels):
    """Book side from ``{price: [(id, qty, arrival), ...]}``."""
    built = {p: PriceLevel(p, tuple(ResidentEntry(*e) for e in entries)) for p, entries in levels.items()}
    return BookSide(side, tuple(sorted(built)), built)


def make_state(buy=None, sell=None, queue=(), now=None):
    """Hand-built state. ``queue`` holds (order, arrival) pairs."""
    b, s = side_of(BUY, buy or {}), side_of(SELL, sell or {})
    q = tuple(QueuedOrder.stamp(o, t) for o, t in queue)
    if now is None:
        stamps = [t for _, t in queue]
        for side in (b, s):
            stamps += [e.arrival for lvl in side.levels.values() for e in lvl.fifo]
        now = max(stamps, default=-1) + 1
    return MarketState(q, b, s, now)


@pytest.fixture
def scenario_files():
    return sorted(SCENARIOS.glob("*.txt"))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    def record(n: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[n] = (passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
