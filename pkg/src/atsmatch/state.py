"""Market state: order queue, both book sides and the logical clock.

All types here are immutable. Transitions build new values and share
untouched structure (price levels, queued orders) with the previous state.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

MAX_PRICE = 10**9

Price = int
Qty = int
OrderId = int
LogicalTime = int


class Side(Enum):
    BUY = "buy"
    SELL = "sell"

    def dual(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class OrderKind(Enum):
    LIMIT = "limit"
    MARKET = "market"
    CANCEL = "cancel"


@dataclass(frozen=True, slots=True)
class IncomingOrder:
    """An instruction before it has been timestamped.

    ``price`` is carried for market orders but never consulted. ``qty`` is
    unused for cancels unless the engine runs with qty-matching cancels.
    """

    kind: OrderKind
    side: Side
    price: Price
    id: OrderId
    qty: Qty

    def __post_init__(self) -> None:
        if self.kind is not OrderKind.CANCEL and self.qty <= 0:
            raise ValueError(f"order {self.id}: qty must be positive, got {self.qty}")
        if self.qty < 0:
            raise ValueError(f"order {self.id}: qty must be nonnegative")
        if not 0 <= self.price <= MAX_PRICE:
            raise ValueError(f"order {self.id}: price {self.price} outside [0, {MAX_PRICE}]")
        if self.id < 0:
            raise ValueError(f"order id must be nonnegative, got {self.id}")


@dataclass(frozen=True, slots=True)
class QueuedOrder:
    kind: OrderKind
    side: Side
    price: Price
    id: OrderId
    qty: Qty
    arrival: LogicalTime

    @classmethod
    def stamp(cls, order: IncomingOrder, arrival: LogicalTime) -> "QueuedOrder":
        return cls(order.kind, order.side, order.price, order.id, order.qty, arrival)

    def with_qty(self, qty: Qty) -> "QueuedOrder":
        return QueuedOrder(self.kind, self.side, self.price, self.id, qty, self.arrival)


@dataclass(frozen=True, slots=True)
class ResidentEntry:
    id: OrderId
    qty: Qty
    arrival: LogicalTime


@dataclass(frozen=True, slots=True)
class PriceLevel:
    """FIFO of resident entries sharing one side and price."""

    price: Price
    fifo: tuple[ResidentEntry, ...]

    @property
    def head(self) -> ResidentEntry:
        return self.fifo[0]

    def append(self, entry: ResidentEntry) -> "PriceLevel":
        return PriceLevel(self.price, self.fifo + (entry,))

    @property
    def volume(self) -> Qty:
        return sum(e.qty for e in self.fifo)


@dataclass(frozen=True, slots=True)
class BookSide:
    """Active prices (ascending, no duplicates) plus one level per price.

    ``levels`` must not be mutated after construction; the ``with_*``
    helpers return new sides.
    """

    side: Side
    prices: tuple[Price, ...] = ()
    levels: Mapping[Price, PriceLevel] = field(default_factory=dict)
    # memo for well_formed(); never part of the value
    _audit: Optional[tuple] = field(default=None, compare=False, repr=False)

    def best(self) -> Optional[Price]:
        if not self.prices:
            return None
        return self.prices[-1] if self.side is Side.BUY else self.prices[0]

    def is_active(self, price: Price) -> bool:
        return price in self.prices

    def with_level(self, level: PriceLevel) -> "BookSide":
        """Insert or replace the level at ``level.price``."""
        levels = dict(self.levels)
        levels[level.price] = level
        prices = self.prices
        if level.price not in self.prices:
            i = bisect.bisect_left(prices, level.price)
            prices = prices[:i] + (level.price,) + prices[i:]
        return BookSide(self.side, prices, levels)

    def without_price(self, price: Price) -> "BookSide":
        levels = dict(self.levels)
        del levels[price]
        return BookSide(self.side, tuple(p for p in self.prices if p != price), levels)

    def depth(self) -> int:
        return len(self.prices)


@dataclass(frozen=True, slots=True)
class MarketState:
    queue: tuple[QueuedOrder, ...]
    buy: BookSide
    sell: BookSide
    now: LogicalTime

    def book(self, side: Side) -> BookSide:
        return self.buy if side is Side.BUY else self.sell

    def with_book(self, book: BookSide) -> "MarketState":
        if book.side is Side.BUY:
            return MarketState(self.queue, book, self.sell, self.now)
        return MarketState(self.queue, self.buy, book, self.now)

    @property
    def quiescent(self) -> bool:
        return not self.queue


def init() -> MarketState:
    """Empty queue, empty books, clock at zero."""
    return MarketState((), BookSide(Side.BUY), BookSide(Side.SELL), 0)


def best_bid(state: MarketState) -> Optional[Price]:
    return state.buy.best()


def best_ask(state: MarketState) -> Optional[Price]:
    return state.sell.best()


@dataclass(frozen=True)
class Violation:
    invariant: str
    location: str

    def __str__(self) -> str:
        return f"{self.invariant} at {self.location}"


def _audit_side(book: BookSide, expected: Side) -> tuple[list[Violation], int]:
    """Clock-independent violations of one side, plus its latest arrival.

    The result is memoized on the (immutable) side object.
    """
    cached = book._audit
    if cached is not None and cached[0] is expected:
        return cached[1], cached[2]
    where = expected.value
    out: list[Violation] = []
    latest = -1
    if book.side is not expected:
        out.append(Violation("book side tag", f"{where} book tagged {book.side.value}"))
    prices = book.prices
    if any(a >= b for a, b in zip(prices, prices[1:])):
        out.append(Violation("active prices strictly ascending", f"{where} {prices}"))
    levels = book.levels
    if len(prices) != len(levels) or any(p not in levels for p in prices):
        out.append(
            Violation(
                "activePrices/levels mismatch",
                f"{where} prices={sorted(set(prices))} levels={sorted(levels)}",
            )
        )
    for key, level in sorted(levels.items()):
        if level.price != key:
            out.append(Violation("level price equals key", f"{where}@{key} holds price {level.price}"))
        if not 0 <= key <= MAX_PRICE:
            out.append(Violation("price in range", f"{where}@{key}"))
        fifo = level.fifo
        if not fifo:
            out.append(Violation("price queues never empty", f"{where}@{key}"))
            continue
        prev = -1
        for e in fifo:
            if e.qty <= 0:
                out.append(Violation("resident qty positive", f"{where}@{key} id={e.id}"))
            if e.arrival <= prev:
                out.append(
                    Violation(
                        "fifo arrivals strictly ascending",
                        f"{where}@{key} {[x.arrival for x in fifo]}",
                    )
                )
                break
            prev = e.arrival
        latest = max(latest, max(e.arrival for e in fifo))
    object.__setattr__(book, "_audit", (expected, out, latest))
    return out, latest


def _check_side(book: BookSide, expected: Side, now: LogicalTime) -> list[Violation]:
    found, latest = _audit_side(book, expected)
    if latest < now:
        return list(found)
    late = [
        Violation("arrival before now", f"{expected.value}@{key} id={e.id} t={e.arrival}")
        for key, level in sorted(book.levels.items())
        for e in level.fifo
        if e.arrival >= now
    ]
    return found + late


def well_formed(state: MarketState) -> list[Violation]:
    """Every violated structural invariant; empty when the state is sound."""
    out = _check_side(state.buy, Side.BUY, state.now)
    out += _check_side(state.sell, Side.SELL, state.now)
    for i, q in enumerate(state.queue):
        loc = f"queue[{i}] id={q.id}"
        if q.arrival >= state.now:
            out.append(Violation("arrival before now", f"{loc} t={q.arrival}"))
        if q.kind is not OrderKind.CANCEL and q.qty <= 0:
            out.append(Violation("queued qty positive", loc))
    if state.now < 0:
        out.append(Violation("clock nonnegative", f"now={state.now}"))
    return out
