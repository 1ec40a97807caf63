"""Scenario files and line-delimited JSON traces.

Scenario syntax, one instruction per line::

    limit  <buy|sell> <price> <qty> <id>
    market <buy|sell> <qty> <id>
    cancel <buy|sell> <price> <id> [qty]

``#`` starts a comment. A trace is a header object followed by one record
per transition, each a single JSON line with a fixed field order.
"""
from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from .checkers import Transition
from .engine import EngineConfig
from .state import IncomingOrder, MarketState, OrderKind, Side

TRACE_FORMAT = "atsmatch-trace"
TRACE_VERSION = 1


class ScenarioParseError(ValueError):
    def __init__(self, errors: Sequence[tuple[int, str]], source: str = "<scenario>") -> None:
        self.errors = list(errors)
        self.source = source
        lines = [f"{source}:{n}: {msg}" for n, msg in self.errors]
        super().__init__("\n".join(lines))


_SIDES = {"buy": Side.BUY, "sell": Side.SELL}


def _nat(tok: str, what: str) -> int:
    if not tok.isdigit():
        raise ValueError(f"{what} must be a nonnegative integer, got {tok!r}")
    return int(tok)


def parse_line(line: str) -> Optional[IncomingOrder]:
    """Parse one instruction; None for blank or comment-only lines."""
    body = line.split("#", 1)[0].split()
    if not body:
        return None
    verb, args = body[0].lower(), body[1:]
    if verb not in ("limit", "market", "cancel"):
        raise ValueError(f"unknown instruction {body[0]!r}")
    if not args or args[0].lower() not in _SIDES:
        raise ValueError(f"{verb}: side must be buy or sell")
    side = _SIDES[args[0].lower()]
    if verb == "limit":
        if len(args) != 4:
            raise ValueError("limit takes <side> <price> <qty> <id>")
        price, qty, oid = (_nat(t, w) for t, w in zip(args[1:], ("price", "qty", "id")))
        return IncomingOrder(OrderKind.LIMIT, side, price, oid, qty)
    if verb == "market":
        if len(args) != 3:
            raise ValueError("market takes <side> <qty> <id>")
        qty, oid = _nat(args[1], "qty"), _nat(args[2], "id")
        return IncomingOrder(OrderKind.MARKET, side, 0, oid, qty)
    if len(args) not in (3, 4):
        raise ValueError("cancel takes <side> <price> <id> [qty]")
    price, oid = _nat(args[1], "price"), _nat(args[2], "id")
    qty = _nat(args[3], "qty") if len(args) == 4 else 0
    return IncomingOrder(OrderKind.CANCEL, side, price, oid, qty)


def parse_scenario(text: str, source: str = "<scenario>") -> list[IncomingOrder]:
    orders, errors = [], []
    for n, line in enumerate(text.splitlines(), start=1):
        try:
            order = parse_line(line)
        except ValueError as exc:
            errors.append((n, str(exc)))
            continue
        if order is not None:
            orders.append(order)
    if errors:
        raise ScenarioParseError(errors, source)
    return orders


def read_scenario(path: Path | str) -> list[IncomingOrder]:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


def format_order(o: IncomingOrder) -> str:
    if o.kind is OrderKind.LIMIT:
        return f"limit {o.side.value} {o.price} {o.qty} {o.id}"
    if o.kind is OrderKind.MARKET:
        return f"market {o.side.value} {o.qty} {o.id}"
    tail = f" {o.qty}" if o.qty else ""
    return f"cancel {o.side.value} {o.price} {o.id}{tail}"


def digest(state: MarketState) -> dict:
    return {
        "bid": state.buy.best(),
        "ask": state.sell.best(),
        "buy_levels": len(state.buy.prices),
        "sell_levels": len(state.sell.prices),
    }


def record(seq: int, t: Transition) -> dict:
    ev = t.event
    fill = None
    if ev.fill is not None:
        f = ev.fill
        fill = {
            "resting_id": f.resting_id,
            "price": f.price,
            "qty": f.qty,
            "resting_remainder": f.resting_remainder,
            "incoming_remainder": f.incoming_remainder,
        }
    return {
        "seq": seq,
        "rule": ev.rule.value,
        "pre_time": t.pre.now,
        "post_time": t.post.now,
        "order_id": ev.order_id,
        "fill": fill,
        "digest": digest(t.post),
        "note": ev.note,
    }


def config_dict(config: EngineConfig, drain: str) -> dict:
    return {
        "drain": drain,
        "market_remainder": config.market_remainder.value,
        "cancel_match_qty": config.cancel_match_qty,
        "fault": config.fault.value if config.fault else None,
    }


def header(orders: Iterable[IncomingOrder], config: dict, created: Optional[str] = None) -> dict:
    if created is None:
        created = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "created": created,
        "config": config,
        "scenario": [format_order(o) for o in orders],
    }


def dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def write_trace(
    out: TextIO,
    orders: Sequence[IncomingOrder],
    trace: Sequence[Transition],
    config: dict,
    error: Optional[str] = None,
    created: Optional[str] = None,
) -> None:
    out.write(dumps(header(orders, config, created)) + "\n")
    for i, t in enumerate(trace):
        out.write(dumps(record(i, t)) + "\n")
    if error is not None:
        out.write(dumps({"seq": len(trace), "error": error}) + "\n")


@dataclass
class LoadedTrace:
    header: dict
    records: list[dict]

    @property
    def orders(self) -> list[IncomingOrder]:
        return parse_scenario("\n".join(self.header["scenario"]), "<trace header>")


def read_trace(path: Path | str) -> LoadedTrace:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trace")
    head = json.loads(lines[0])
    if head.get("format") != TRACE_FORMAT:
        raise ValueError(f"{path}: not an {TRACE_FORMAT} file")
    return LoadedTrace(head, [json.loads(line) for line in lines[1:] if line.strip()])


def normalize(text: str) -> str:
    """Trace text with the run timestamp blanked, for byte comparison."""
    lines = text.splitlines(keepends=True)
    if not lines:
        return text
    head = json.loads(lines[0])
    head["created"] = None
    return dumps(head) + "\n" + "".join(lines[1:])
