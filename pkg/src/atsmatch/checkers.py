"""Executable checks for the matching engine's safety properties.

State checks look at one snapshot, transition checks at a single
``(pre, event, post)`` triple, and trace checks at a whole run. Every check
returns a :class:`CheckReport`; a failing report always carries a
human-readable counterexample.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .engine import Rule, TransitionEvent
from .state import (
    LogicalTime,
    MarketState,
    OrderId,
    OrderKind,
    Price,
    QueuedOrder,
    ResidentEntry,
    Side,
    best_ask,
    best_bid,
    well_formed,
)


class IllFormedState(ValueError):
    pass


class MalformedTrace(ValueError):
    pass


class Transition(NamedTuple):
    pre: MarketState
    event: TransitionEvent
    post: MarketState


@dataclass(frozen=True)
class CheckReport:
    check: str
    passed: bool
    counterexample: Optional[str] = None

    def __post_init__(self) -> None:
        if self.passed != (self.counterexample is None):
            raise ValueError("a counterexample is present exactly when the check fails")

    def to_dict(self) -> dict:
        return {"check": self.check, "pass": self.passed, "counterexample": self.counterexample}


def _ok(name: str) -> CheckReport:
    return _PASS[name]


_PASS: dict[str, CheckReport] = {}


def _fail(name: str, why: str) -> CheckReport:
    return CheckReport(name, False, why)


for _name in (
    "well_formed", "nlc", "grammar_oracle", "time_discipline", "exchange_locality",
    "fill_at_bid_or_ask", "price_time_priority", "conservation",
):
    _PASS[_name] = CheckReport(_name, True)


# -- grammar membership ------------------------------------------------------


@dataclass(frozen=True)
class GrammarStart:
    queue: tuple[QueuedOrder, ...]
    buy_prices: tuple[Price, ...]
    sell_prices: tuple[Price, ...]
    time: LogicalTime


@dataclass(frozen=True)
class GrammarDerivation:
    """A generation of a state from the no-locked-or-crossed grammar.

    ``start`` records the arguments of the start rule; each entry of
    ``buy_steps``/``sell_steps`` is one price-queue emission, in the order the
    recursion over the active price list produces them.
    """

    start: GrammarStart
    buy_steps: tuple[tuple[Price, tuple[ResidentEntry, ...]], ...]
    sell_steps: tuple[tuple[Price, tuple[ResidentEntry, ...]], ...]


def _emit(prices, facts: dict):
    """One price-queue emission per listed price, consuming matching facts."""
    steps = []
    for p in prices:
        fifo = facts.pop(p, None)
        if fifo is None:
            return None
        steps.append((p, fifo))
    return tuple(steps)


def derive_membership(state: MarketState) -> Optional[GrammarDerivation]:
    """Rebuild a grammar derivation of ``state``, or None if none exists.

    Raises :class:`IllFormedState` for states that violate the structural
    invariants; those are outside the checker's domain.
    """
    problems = well_formed(state)
    if problems:
        raise IllFormedState("; ".join(map(str, problems)))
    return _derive(state)


def _derive(state: MarketState, build: bool = True):
    lb, ls = state.buy.prices, state.sell.prices
    # start rule guard; an empty side imposes no bound
    if lb and ls and not max(lb) < min(ls):
        return None
    # price-queue facts of the context, per side; at most one per price
    buy_facts = {p: level.fifo for p, level in state.buy.levels.items()}
    sell_facts = {p: level.fifo for p, level in state.sell.levels.items()}
    buy_steps = _emit(lb, buy_facts)
    sell_steps = _emit(ls, sell_facts)
    if buy_steps is None or sell_steps is None or buy_facts or sell_facts:
        return None
    if not build:
        return True
    start = GrammarStart(state.queue, tuple(lb), tuple(ls), state.now)
    return GrammarDerivation(start, buy_steps, sell_steps)


def direct_nlc(state: MarketState) -> bool:
    bid, ask = best_bid(state), best_ask(state)
    return bid is None or ask is None or bid < ask


def check_well_formed(state: MarketState) -> CheckReport:
    return _well_formed_report(well_formed(state))


def _well_formed_report(problems) -> CheckReport:
    if problems:
        return _fail("well_formed", "; ".join(map(str, problems)))
    return _PASS["well_formed"]


def check_nlc(state: MarketState) -> CheckReport:
    """No locked or crossed market, confirmed by both the grammar and bid < ask.

    A structurally broken state cannot be generated by the grammar at all,
    so it fails here rather than raising.
    """
    return _state_reports(state, well_formed(state))[0]


def check_oracle_agreement(state: MarketState) -> CheckReport:
    return _state_reports(state, well_formed(state))[1]


def _state_reports(state: MarketState, problems) -> tuple[CheckReport, CheckReport]:
    """(nlc, grammar_oracle) reports given the state's structural problems."""
    if problems:
        why = "state is not generable: " + "; ".join(map(str, problems))
        return _fail("nlc", why), _fail("grammar_oracle", why)
    by_grammar = _derive(state, build=False) is not None
    by_compare = direct_nlc(state)
    if by_grammar != by_compare:
        why = f"grammar={by_grammar} direct={by_compare} bid={best_bid(state)} ask={best_ask(state)}"
        return _fail("nlc", why), _fail("grammar_oracle", why)
    if not by_compare:
        return _fail("nlc", f"(bid, ask) = ({best_bid(state)}, {best_ask(state)})"), _PASS["grammar_oracle"]
    return _PASS["nlc"], _PASS["grammar_oracle"]


# -- single transitions ------------------------------------------------------


def _front(pre: MarketState, ev: TransitionEvent, name: str) -> QueuedOrder:
    if ev.fill is None:
        raise MalformedTrace(f"{name}: event {ev.rule.value} carries no fill")
    if not pre.queue or pre.queue[0].id != ev.order_id:
        raise MalformedTrace(f"{name}: order {ev.order_id} is not at the front of the queue")
    return pre.queue[0]


def check_exchange_locality(
    pre: MarketState, post: MarketState, ev: TransitionEvent
) -> CheckReport:
    """Only the price level at the fill price may change during an exchange."""
    name = "exchange_locality"
    _front(pre, ev, name)
    x = ev.fill.price
    for a, b in ((pre.buy, post.buy), (pre.sell, post.sell)):
        for p in set(a.levels) | set(b.levels):
            if p != x and a.levels.get(p) != b.levels.get(p):
                return _fail(name, f"{a.side.value} level {p} changed during a fill at {x}")
        if {p for p in a.prices if p != x} != {p for p in b.prices if p != x}:
            return _fail(name, f"{a.side.value} active prices changed away from {x}")
    return _ok(name)


def check_fill_at_bid_or_ask(pre: MarketState, ev: TransitionEvent) -> CheckReport:
    name = "fill_at_bid_or_ask"
    front = _front(pre, ev, name)
    want = best_ask(pre) if front.side is Side.BUY else best_bid(pre)
    if ev.fill.price != want:
        quote = "ask" if front.side is Side.BUY else "bid"
        return _fail(
            name,
            f"incoming {front.side.value} {ev.order_id} filled at {ev.fill.price}, {quote} was {want}",
        )
    return _ok(name)


def check_time_discipline(pre: MarketState, post: MarketState, ev: TransitionEvent) -> CheckReport:
    name = "time_discipline"
    holds = ev.rule.holds_clock
    if ev.time_advanced == holds:
        return _fail(name, f"{ev.rule.value} marked time_advanced={ev.time_advanced}")
    expected = pre.now + (1 if ev.time_advanced else 0)
    if post.now != expected:
        return _fail(name, f"{ev.rule.value} moved clock {pre.now} -> {post.now}")
    if (ev.fill is not None) != ev.rule.fills:
        return _fail(name, f"{ev.rule.value} fill presence is wrong")
    return _ok(name)


# -- traces ------------------------------------------------------------------


def check_price_time_priority(trace: Sequence[Transition]) -> CheckReport:
    """Each fill takes the oldest resident at the best opposite price, and one
    incoming order never improves its fill price across consecutive fills."""
    name = "price_time_priority"
    last: Optional[tuple[OrderId, Price]] = None
    for i, (pre, ev, post) in enumerate(trace):
        if ev.fill is None:
            last = None
            continue
        front = _front(pre, ev, name)
        resting = pre.book(front.side.dual())
        best = resting.best()
        if best is None or ev.fill.price != best:
            return _fail(name, f"step {i}: fill at {ev.fill.price} but best resting price is {best}")
        head = resting.levels[best].fifo[0]
        if ev.fill.resting_id != head.id:
            return _fail(
                name,
                f"step {i}: filled resident {ev.fill.resting_id} ahead of {head.id} "
                f"(arrival {head.arrival}) at {best}",
            )
        if last is not None and last[0] == ev.order_id:
            worse = ev.fill.price < last[1] if front.side is Side.BUY else ev.fill.price > last[1]
            if worse:
                return _fail(
                    name, f"step {i}: order {ev.order_id} fill price went {last[1]} -> {ev.fill.price}"
                )
        last = (ev.order_id, ev.fill.price)
    return _ok(name)


def _queued_qty(state: MarketState, order_id: OrderId) -> int:
    if state.queue and state.queue[0].id == order_id:
        return state.queue[0].qty
    return 0


def check_conservation(trace: Sequence[Transition]) -> CheckReport:
    """Per order id, submitted quantity = filled + resting + discarded (+ queued).

    Cancelled residents count as discarded. Each fill must also take the
    same quantity from the incoming order and from the resting book.
    """
    name = "conservation"
    submitted: defaultdict[OrderId, int] = defaultdict(int)
    filled: defaultdict[OrderId, int] = defaultdict(int)
    discarded: defaultdict[OrderId, int] = defaultdict(int)
    for i, (pre, ev, post) in enumerate(trace):
        if ev.rule is Rule.ENQUEUE:
            if not post.queue or post.queue[-1].id != ev.order_id:
                raise MalformedTrace(f"{name}: step {i} enqueue of {ev.order_id} not at queue tail")
            q = post.queue[-1]
            if q.kind is not OrderKind.CANCEL:
                submitted[q.id] += q.qty
        elif ev.fill is not None:
            f = ev.fill
            front = _front(pre, ev, name)
            resting = pre.book(front.side.dual())
            level = resting.levels.get(f.price)
            before = level.volume if level else 0
            after_level = post.book(front.side.dual()).levels.get(f.price)
            after = after_level.volume if after_level else 0
            taken_in = front.qty - _queued_qty(post, front.id)
            if before - after != f.qty or taken_in != f.qty:
                return _fail(
                    name,
                    f"step {i}: fill qty {f.qty}, book gave {before - after}, "
                    f"incoming gave {taken_in}",
                )
            if f.incoming_remainder != front.qty - f.qty or f.incoming_remainder < 0:
                return _fail(name, f"step {i}: incoming remainder {f.incoming_remainder} is wrong")
            filled[f.resting_id] += f.qty
            filled[f.incoming_id] += f.qty
        elif ev.rule is Rule.MARKET_EMPTY:
            discarded[ev.order_id] += pre.queue[0].qty
        elif ev.rule in (Rule.CANCEL_IN_LIST_NIL, Rule.CANCEL_IN_LIST_CONS):
            level = pre.book(pre.queue[0].side).levels[pre.queue[0].price]
            discarded[ev.order_id] += sum(e.qty for e in level.fifo if e.id == ev.order_id)
    final = trace[-1].post if trace else None
    resting: defaultdict[OrderId, int] = defaultdict(int)
    if final is not None:
        for book in (final.buy, final.sell):
            for level in book.levels.values():
                for e in level.fifo:
                    resting[e.id] += e.qty
        for q in final.queue:
            if q.kind is not OrderKind.CANCEL:
                resting[q.id] += q.qty
    for oid in sorted(set(submitted) | set(filled) | set(discarded) | set(resting)):
        accounted = filled[oid] + discarded[oid] + resting[oid]
        if submitted[oid] != accounted:
            return _fail(
                name,
                f"order {oid}: submitted {submitted[oid]} != filled {filled[oid]} + "
                f"resting {resting[oid]} + discarded {discarded[oid]}",
            )
    return _ok(name)


def transition_reports(pre: MarketState, ev: TransitionEvent, post: MarketState) -> list[CheckReport]:
    """All per-transition checks that apply to this event."""
    problems = well_formed(post)
    reports = [_well_formed_report(problems), *_state_reports(post, problems)]
    reports.append(check_time_discipline(pre, post, ev))
    if ev.fill is not None:
        reports.append(check_exchange_locality(pre, post, ev))
        reports.append(check_fill_at_bid_or_ask(pre, ev))
    return reports


def transition_failures(pre: MarketState, ev: TransitionEvent, post: MarketState) -> list[CheckReport]:
    """Only the failing reports of :func:`transition_reports`; the hot path of
    exhaustive search, where nearly every transition passes."""
    sound = not well_formed(post) and direct_nlc(post) and _derive(post, build=False) is not None
    if not sound:
        return [r for r in transition_reports(pre, ev, post) if not r.passed]
    out = []
    r = check_time_discipline(pre, post, ev)
    if not r.passed:
        out.append(r)
    if ev.fill is not None:
        for r in (check_exchange_locality(pre, post, ev), check_fill_at_bid_or_ask(pre, ev)):
            if not r.passed:
                out.append(r)
    return out


def trace_reports(trace: Sequence[Transition]) -> list[CheckReport]:
    return [check_price_time_priority(trace), check_conservation(trace)]


def first_failure(reports: Iterable[CheckReport]) -> Optional[CheckReport]:
    return next((r for r in reports if not r.passed), None)
