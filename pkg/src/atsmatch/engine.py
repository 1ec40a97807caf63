"""One-step transition function over :class:`MarketState`.

``step`` looks only at the front of the order queue and applies exactly one
rule. Multi-fill behaviour comes from stepping repeatedly; a partially
filled incoming order stays at the front with its original arrival stamp
and the clock does not move until the order leaves the queue.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from . import guards
from .state import (
    BookSide,
    IncomingOrder,
    MarketState,
    OrderId,
    OrderKind,
    Price,
    PriceLevel,
    Qty,
    QueuedOrder,
    ResidentEntry,
    Side,
)

DEFAULT_STEP_BUDGET = 1_000_000


class Rule(Enum):
    BEGIN = "begin"
    ENQUEUE = "enqueue"
    LIMIT_EMPTY = "limit/empty"
    LIMIT_QUEUE = "limit/queue"
    LIMIT_1 = "limit/1"
    LIMIT_2 = "limit/2"
    LIMIT_3 = "limit/3"
    LIMIT_4 = "limit/4"
    LIMIT_5 = "limit/5"
    MARKET_EMPTY = "market/empty"
    MARKET_1 = "market/1"
    MARKET_2 = "market/2"
    MARKET_3 = "market/3"
    MARKET_4 = "market/4"
    MARKET_5 = "market/5"
    CANCEL_IN_LIST_NIL = "cancel/inListNil"
    CANCEL_IN_LIST_CONS = "cancel/inListCons"
    CANCEL_NOT_IN_LIST_QUEUE = "cancel/notInListQueue"
    CANCEL_NOT_IN_LIST_ACTIVE = "cancel/notInListActive"


FILL_RULES = frozenset(
    {
        Rule.LIMIT_1, Rule.LIMIT_2, Rule.LIMIT_3, Rule.LIMIT_4, Rule.LIMIT_5,
        Rule.MARKET_1, Rule.MARKET_2, Rule.MARKET_3, Rule.MARKET_4, Rule.MARKET_5,
    }
)
# partial fills of the incoming order: it stays queued, the clock stays put
CLOCK_HOLD_RULES = frozenset({Rule.LIMIT_3, Rule.LIMIT_4, Rule.MARKET_3, Rule.MARKET_4})
# rules that can appear in a trace (begin is consumed by init())
TRACE_RULES = frozenset(Rule) - {Rule.BEGIN}

# plain attributes: enum hashing is slow on the exhaustive-check hot path
for _r in Rule:
    _r.label = _r.value
    _r.fills = _r in FILL_RULES
    _r.holds_clock = _r in CLOCK_HOLD_RULES
del _r

_LIMIT_FILL = (Rule.LIMIT_1, Rule.LIMIT_2, Rule.LIMIT_3, Rule.LIMIT_4, Rule.LIMIT_5)
_MARKET_FILL = (Rule.MARKET_1, Rule.MARKET_2, Rule.MARKET_3, Rule.MARKET_4, Rule.MARKET_5)


class EngineError(RuntimeError):
    """The engine met a state its rules cannot handle. Always a defect."""


class Fault(Enum):
    """Deliberate engine mutations used to show the checkers can fail."""

    SKIP_PRICE_REMOVAL = "skip-price-removal"
    WORST_PRICE = "worst-price"
    LIFO_PRIORITY = "lifo-priority"


@dataclass(frozen=True)
class EngineConfig:
    market_remainder: OrderKind = OrderKind.MARKET
    cancel_match_qty: bool = False
    fault: Optional[Fault] = None

    def __post_init__(self) -> None:
        if self.market_remainder not in (OrderKind.MARKET, OrderKind.LIMIT):
            raise ValueError("market remainder must be market or limit")


DEFAULT_CONFIG = EngineConfig()


@dataclass(frozen=True, slots=True)
class Fill:
    resting_id: OrderId
    incoming_id: OrderId
    price: Price
    qty: Qty
    resting_remainder: Qty
    incoming_remainder: Qty


@dataclass(frozen=True, slots=True)
class TransitionEvent:
    rule: Rule
    order_id: OrderId
    fill: Optional[Fill] = None
    time_advanced: bool = True
    note: Optional[str] = None


def submit(state: MarketState, order: IncomingOrder) -> tuple[MarketState, TransitionEvent]:
    """Timestamp ``order`` with the current clock and append it to the queue."""
    if order.kind is not OrderKind.CANCEL and order.qty <= 0:
        raise ValueError(f"order {order.id}: qty must be positive")
    queued = QueuedOrder.stamp(order, state.now)
    post = MarketState(state.queue + (queued,), state.buy, state.sell, state.now + 1)
    return post, TransitionEvent(Rule.ENQUEUE, order.id)


def step(
    state: MarketState, config: EngineConfig = DEFAULT_CONFIG
) -> Optional[tuple[MarketState, TransitionEvent]]:
    """Apply the single rule enabled by the front order; None when quiescent."""
    if not state.queue:
        return None
    front = state.queue[0]
    if front.kind is OrderKind.LIMIT:
        return _limit(state, front, config)
    if front.kind is OrderKind.MARKET:
        return _market(state, front, config)
    return _cancel(state, front, config)


def run_to_quiescence(
    state: MarketState,
    config: EngineConfig = DEFAULT_CONFIG,
    budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[MarketState, list[TransitionEvent]]:
    events = []
    for _ in range(budget):
        out = step(state, config)
        if out is None:
            return state, events
        state, ev = out
        events.append(ev)
    raise EngineError(f"step budget of {budget} exhausted with {len(state.queue)} orders queued")


def _pop_front(state: MarketState, buy: BookSide, sell: BookSide) -> MarketState:
    return MarketState(state.queue[1:], buy, sell, state.now + 1)


def _books(state: MarketState, side: Side) -> tuple[BookSide, BookSide]:
    """(own side, opposite side) for an order on ``side``."""
    if side is Side.BUY:
        return state.buy, state.sell
    return state.sell, state.buy


def _place(own: BookSide, other: BookSide) -> tuple[BookSide, BookSide]:
    return (own, other) if own.side is Side.BUY else (other, own)


def _limit(state: MarketState, front: QueuedOrder, config: EngineConfig):
    own, opp = _books(state, front.side)
    if config.fault is Fault.WORST_PRICE:
        acceptable = [
            p for p in opp.prices
            if (p <= front.price if front.side is Side.BUY else p >= front.price)
        ]
        x = _worst(front.side, acceptable)
    else:
        x = guards.exchange_price(front.side, opp.prices, front.price)
    if x is None:
        if not guards.storable(front.side, opp.prices, front.price):
            raise EngineError(f"order {front.id}: neither storable nor exchangeable")
        entry = ResidentEntry(front.id, front.qty, front.arrival)
        if not own.is_active(front.price):
            rule = Rule.LIMIT_EMPTY
            own = own.with_level(PriceLevel(front.price, (entry,)))
        else:
            rule = Rule.LIMIT_QUEUE
            own = own.with_level(_level(own, front.price).append(entry))
        buy, sell = _place(own, opp)
        return _pop_front(state, buy, sell), TransitionEvent(rule, front.id)
    return _exchange(state, front, own, opp, x, _LIMIT_FILL, config)


def _market(state: MarketState, front: QueuedOrder, config: EngineConfig):
    own, opp = _books(state, front.side)
    if not opp.prices:
        return _pop_front(state, state.buy, state.sell), TransitionEvent(
            Rule.MARKET_EMPTY, front.id
        )
    if config.fault is Fault.WORST_PRICE:
        x = _worst(front.side, opp.prices)
    else:
        x = guards.market_exchange_price(front.side, opp.prices)
    return _exchange(state, front, own, opp, x, _MARKET_FILL, config)


def _worst(side: Side, prices) -> Optional[Price]:
    if not prices:
        return None
    return max(prices) if side is Side.BUY else min(prices)


def _level(book: BookSide, price: Price) -> PriceLevel:
    level = book.levels.get(price)
    if level is None:
        raise EngineError(f"{book.side.value} price {price} is active but has no price queue")
    if not level.fifo:
        raise EngineError(f"{book.side.value} price queue at {price} is empty")
    return level


def _exchange(state, front, own, opp, x, rules, config):
    """Trade the front order against the priority resident at price ``x``.

    ``rules`` lists the five fill rules (equal/last, equal/more, greater/last,
    greater/more, less) for the order's kind.
    """
    level = _level(opp, x)
    pos = len(level.fifo) - 1 if config.fault is Fault.LIFO_PRIORITY else 0
    resident = level.fifo[pos]
    rest = level.fifo[:pos] + level.fifo[pos + 1 :]
    n, n_res = front.qty, resident.qty

    if n < n_res:
        left = ResidentEntry(resident.id, n_res - n, resident.arrival)
        opp = opp.with_level(PriceLevel(x, level.fifo[:pos] + (left,) + level.fifo[pos + 1 :]))
        buy, sell = _place(own, opp)
        fill = Fill(resident.id, front.id, x, n, n_res - n, 0)
        return _pop_front(state, buy, sell), TransitionEvent(rules[4], front.id, fill)

    if rest:
        opp = opp.with_level(PriceLevel(x, rest))
        last = False
    elif config.fault is Fault.SKIP_PRICE_REMOVAL and rules is _LIMIT_FILL and n == n_res:
        levels = dict(opp.levels)
        del levels[x]
        opp = BookSide(opp.side, opp.prices, levels)
        last = True
    else:
        opp = opp.without_price(x)
        last = True
    buy, sell = _place(own, opp)

    if n == n_res:
        fill = Fill(resident.id, front.id, x, n, 0, 0)
        rule = rules[0] if last else rules[1]
        return _pop_front(state, buy, sell), TransitionEvent(rule, front.id, fill)

    remainder = front.with_qty(n - n_res)
    if front.kind is OrderKind.MARKET and config.market_remainder is OrderKind.LIMIT:
        remainder = QueuedOrder(
            OrderKind.LIMIT, front.side, front.price, front.id, n - n_res, front.arrival
        )
    fill = Fill(resident.id, front.id, x, n_res, 0, n - n_res)
    post = MarketState((remainder,) + state.queue[1:], buy, sell, state.now)
    rule = rules[2] if last else rules[3]
    return post, TransitionEvent(rule, front.id, fill, time_advanced=False)


def _cancel(state: MarketState, front: QueuedOrder, config: EngineConfig):
    # a cancel's id names the resident it targets
    book = state.book(front.side)
    if not book.is_active(front.price):
        rule = Rule.CANCEL_NOT_IN_LIST_ACTIVE
    else:
        level = _level(book, front.price)
        head = level.fifo[0]
        qty_ok = not config.cancel_match_qty or head.qty == front.qty
        if len(level.fifo) == 1 and head.id == front.id and qty_ok:
            rule = Rule.CANCEL_IN_LIST_NIL
            book = book.without_price(front.price)
        else:
            shrunk = guards.fifo_remove(level, front.id)
            if shrunk is None:
                rule = Rule.CANCEL_NOT_IN_LIST_QUEUE
            elif not shrunk.fifo:
                raise EngineError(
                    f"cancel of {front.id} at {front.price}: qty {front.qty} does not match the "
                    f"resident's {head.qty}, and removing it would leave an empty price queue"
                )
            else:
                rule = Rule.CANCEL_IN_LIST_CONS
                book = book.with_level(shrunk)
    note = None
    if rule in (Rule.CANCEL_NOT_IN_LIST_ACTIVE, Rule.CANCEL_NOT_IN_LIST_QUEUE):
        elsewhere = _locate(state, front.id)
        if elsewhere is not None:
            note = f"id {front.id} is resident on {elsewhere[0].value} at {elsewhere[1]}"
    post = _pop_front(state, *_place(book, state.book(front.side.dual())))
    return post, TransitionEvent(rule, front.id, note=note)


def _locate(state: MarketState, order_id: OrderId) -> Optional[tuple[Side, Price]]:
    for book in (state.buy, state.sell):
        for price, level in book.levels.items():
            if any(e.id == order_id for e in level.fifo):
                return book.side, price
    return None
