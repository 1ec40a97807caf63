"""Deterministic price/time priority matching engine with executable safety checks."""
from .engine import (
    EngineConfig,
    EngineError,
    Fault,
    Fill,
    Rule,
    TransitionEvent,
    run_to_quiescence,
    step,
    submit,
)
from .state import (
    BookSide,
    IncomingOrder,
    MarketState,
    OrderKind,
    PriceLevel,
    QueuedOrder,
    ResidentEntry,
    Side,
    best_ask,
    best_bid,
    init,
    well_formed,
)

__version__ = "0.1.0"

__all__ = [
    "BookSide", "EngineConfig", "EngineError", "Fault", "Fill", "IncomingOrder",
    "MarketState", "OrderKind", "PriceLevel", "QueuedOrder", "ResidentEntry", "Rule",
    "Side", "TransitionEvent", "best_ask", "best_bid", "init", "run_to_quiescence",
    "step", "submit", "well_formed",
]
