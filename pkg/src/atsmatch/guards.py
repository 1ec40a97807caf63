"""Guard predicates consulted by the matching rules.

Each function is pure and answers one question about a book side: may an
order rest, at what price does it trade, how to drop an entry from a FIFO.
Active price collections are expected in ascending order.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .state import OrderId, Price, PriceLevel, Side


def dual(side: Side) -> Side:
    return side.dual()


def storable(side: Side, opposite_prices: Sequence[Price], limit: Price) -> bool:
    """True iff no opposite resident price is acceptable to a limit order.

    A buy at ``limit`` accepts any sell priced at or below it; a sell
    accepts any buy priced at or above it.
    """
    if side is Side.BUY:
        return all(p > limit for p in opposite_prices)
    return all(p < limit for p in opposite_prices)


def exchange_price(side: Side, opposite_prices: Sequence[Price], limit: Price) -> Optional[Price]:
    """Best opposite price if it is acceptable to the limit, else None."""
    if not opposite_prices:
        return None
    if side is Side.BUY:
        best = opposite_prices[0]
        return best if best <= limit else None
    best = opposite_prices[-1]
    return best if best >= limit else None


def market_exchange_price(side: Side, opposite_prices: Sequence[Price]) -> Optional[Price]:
    if not opposite_prices:
        return None
    return opposite_prices[0] if side is Side.BUY else opposite_prices[-1]


def fifo_remove(level: PriceLevel, order_id: OrderId) -> Optional[PriceLevel]:
    """Drop the entry with ``order_id``; None when the id is absent.

    The result may have an empty FIFO. Callers decide what that means.
    """
    for i, entry in enumerate(level.fifo):
        if entry.id == order_id:
            return PriceLevel(level.price, level.fifo[:i] + level.fifo[i + 1 :])
    return None
