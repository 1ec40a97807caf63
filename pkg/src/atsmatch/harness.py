"""Scenario runner and exhaustive small-alphabet enumeration.

Two drain disciplines are supported. ``batch`` enqueues every order before
processing any; ``interleaved`` drains the queue after each submission.
The queue decouples arrival from processing, so both must satisfy every
check.
"""
from __future__ import annotations

import itertools
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

from . import checkers
from .checkers import CheckReport, Transition
from .engine import (
    DEFAULT_CONFIG,
    EngineConfig,
    EngineError,
    step,
    submit,
)
from .state import IncomingOrder, MarketState, OrderKind, Side, init

log = logging.getLogger(__name__)

CHECK_NAMES = (
    "well_formed",
    "nlc",
    "grammar_oracle",
    "time_discipline",
    "exchange_locality",
    "fill_at_bid_or_ask",
    "price_time_priority",
    "conservation",
)
ABSENT_ID = 0
DEFAULT_BUDGET = 2_000_000


class Mode(Enum):
    FIXED = "fixed"
    PERMUTATIONS = "permutations"
    RANDOM = "random"


class Drain(Enum):
    BATCH = "batch"
    INTERLEAVED = "interleaved"


@dataclass(frozen=True)
class Scenario:
    orders: tuple[IncomingOrder, ...]
    mode: Mode = Mode.FIXED
    shuffles: int = 0
    seed: int = 0
    drain: Drain = Drain.BATCH

    def __post_init__(self) -> None:
        # a cancel's id names its target, so only live orders must be unique
        ids = [o.id for o in self.orders if o.kind is not OrderKind.CANCEL]
        dupes = sorted(i for i, n in Counter(ids).items() if n > 1)
        if dupes:
            raise ValueError(f"duplicate order ids: {dupes}")
        if self.mode is Mode.RANDOM and self.shuffles < 1:
            raise ValueError("random mode needs at least one shuffle")

    def orderings(self) -> Iterator[tuple[IncomingOrder, ...]]:
        if self.mode is Mode.FIXED:
            yield self.orders
        elif self.mode is Mode.PERMUTATIONS:
            yield from itertools.permutations(self.orders)
        else:
            rng = random.Random(self.seed)
            for _ in range(self.shuffles):
                order = list(self.orders)
                rng.shuffle(order)
                yield tuple(order)


@dataclass
class RunResult:
    ordering: tuple[IncomingOrder, ...]
    final: MarketState
    trace: list[Transition]
    reports: list[CheckReport]
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(r.passed for r in self.reports)


class _Tally:
    """First failure per check name, across many transitions."""

    def __init__(self) -> None:
        self.first: dict[str, CheckReport] = {}

    def add(self, report: CheckReport) -> None:
        if not report.passed and report.check not in self.first:
            self.first[report.check] = report

    def reports(self) -> list[CheckReport]:
        return [self.first.get(name, CheckReport(name, True)) for name in CHECK_NAMES]


def _transition_checks(t: Transition) -> list[CheckReport]:
    return checkers.transition_reports(*t)


def execute(
    orders: Sequence[IncomingOrder],
    drain: Drain = Drain.BATCH,
    config: EngineConfig = DEFAULT_CONFIG,
    budget: int = 1_000_000,
) -> tuple[MarketState, list[Transition], Optional[str]]:
    """Run ``orders`` from ``init()``; returns (final, trace, engine error)."""
    state = init()
    trace: list[Transition] = []

    def drain_all() -> None:
        nonlocal state
        for _ in range(budget):
            out = step(state, config)
            if out is None:
                return
            trace.append(Transition(state, out[1], out[0]))
            state = out[0]
        raise EngineError(f"step budget of {budget} exhausted")

    try:
        for o in orders:
            post, ev = submit(state, o)
            trace.append(Transition(state, ev, post))
            state = post
            if drain is Drain.INTERLEAVED:
                drain_all()
        drain_all()
    except EngineError as exc:
        return state, trace, str(exc)
    return state, trace, None


def check_trace(trace: Sequence[Transition]) -> list[CheckReport]:
    tally = _Tally()
    for t in trace:
        for r in _transition_checks(t):
            tally.add(r)
    for r in checkers.trace_reports(trace):
        tally.add(r)
    return tally.reports()


def run_scenario(s: Scenario, config: EngineConfig = DEFAULT_CONFIG) -> list[RunResult]:
    results = []
    for ordering in s.orderings():
        final, trace, error = execute(ordering, s.drain, config)
        results.append(RunResult(ordering, final, trace, check_trace(trace), error))
    return results


# -- exhaustive enumeration ----------------------------------------------------


class BudgetExceeded(ValueError):
    def __init__(self, size: int, budget: int) -> None:
        super().__init__(f"search space has {size} sequences, budget is {budget}")
        self.size = size
        self.budget = budget


@dataclass(frozen=True)
class ExhaustiveConfig:
    """Order sequences of length 0..max_orders over a small alphabet.

    The order at position ``k`` (1-based) gets id ``k``. Cancels at position
    ``k`` target every earlier position's id plus the never-used id 0, on
    every side and price of the alphabet.
    """

    max_orders: int
    prices: tuple[int, ...]
    qtys: tuple[int, ...]
    kinds: frozenset[OrderKind] = frozenset({OrderKind.LIMIT})
    drains: tuple[Drain, ...] = (Drain.INTERLEAVED, Drain.BATCH)
    budget: int = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        if self.max_orders < 0:
            raise ValueError("max_orders must be nonnegative")
        if not self.prices or not self.qtys or not self.kinds or not self.drains:
            raise ValueError("alphabet components must be nonempty")
        if any(q <= 0 for q in self.qtys) or any(p < 0 for p in self.prices):
            raise ValueError("qtys must be positive and prices nonnegative")

    def choices(self, position: int) -> int:
        n = 0
        if OrderKind.LIMIT in self.kinds:
            n += 2 * len(self.prices) * len(self.qtys)
        if OrderKind.MARKET in self.kinds:
            n += 2 * len(self.qtys)
        if OrderKind.CANCEL in self.kinds:
            n += 2 * len(self.prices) * position
        return n

    def space_size(self) -> int:
        """Number of sequences enumerated per drain discipline."""
        total, width = 1, 1
        for k in range(1, self.max_orders + 1):
            width *= self.choices(k)
            total += width
        return total

    def alphabet(self, position: int) -> list[IncomingOrder]:
        out = []
        sides = (Side.BUY, Side.SELL)
        if OrderKind.LIMIT in self.kinds:
            for side, p, q in itertools.product(sides, sorted(self.prices), sorted(self.qtys)):
                out.append(IncomingOrder(OrderKind.LIMIT, side, p, position, q))
        if OrderKind.MARKET in self.kinds:
            for side, q in itertools.product(sides, sorted(self.qtys)):
                out.append(IncomingOrder(OrderKind.MARKET, side, 0, position, q))
        if OrderKind.CANCEL in self.kinds:
            targets = [ABSENT_ID, *range(1, position)]
            for side, p, t in itertools.product(sides, sorted(self.prices), targets):
                out.append(IncomingOrder(OrderKind.CANCEL, side, p, t, 0))
        return out

    def sequences(self) -> Iterator[tuple[IncomingOrder, ...]]:
        """Every sequence, in the same order the checker visits them."""

        def rec(prefix):
            yield prefix
            if len(prefix) < self.max_orders:
                for o in self.alphabet(len(prefix) + 1):
                    yield from rec(prefix + (o,))

        yield from rec(())


@dataclass
class Counterexample:
    drain: Drain
    orders: tuple[IncomingOrder, ...]
    reports: list[CheckReport]


@dataclass
class ExhaustiveSummary:
    space_size: int
    sequences: int = 0
    states: int = 0
    transitions: int = 0
    fills: int = 0
    rule_counts: Counter = field(default_factory=Counter)
    counterexample: Optional[Counterexample] = None

    @property
    def violations(self) -> int:
        return 0 if self.counterexample is None else 1

    @property
    def passed(self) -> bool:
        return self.counterexample is None


class _Found(Exception):
    def __init__(self, orders, reports) -> None:
        self.orders = orders
        self.reports = reports


class _Walker:
    """Depth-first walk of the sequence tree for one drain discipline."""

    def __init__(self, cfg: ExhaustiveConfig, drain: Drain, engine: EngineConfig,
                 summary: ExhaustiveSummary) -> None:
        self.cfg = cfg
        self.drain = drain
        self.engine = engine
        self.summary = summary
        self.alphabets = [cfg.alphabet(k) for k in range(1, cfg.max_orders + 1)]

    def _transition(self, t: Transition, orders) -> None:
        s = self.summary
        s.transitions += 1
        s.states += 1
        s.rule_counts[t.event.rule.label] += 1
        if t.event.fill is not None:
            s.fills += 1
        failed = checkers.transition_failures(*t)
        if failed:
            raise _Found(orders, failed)

    def _drain(self, state: MarketState, trace: list[Transition], orders) -> MarketState:
        start = len(trace)
        while True:
            try:
                out = step(state, self.engine)
            except EngineError as exc:
                raise _Found(orders, [CheckReport("engine", False, str(exc))]) from None
            if out is None:
                break
            t = Transition(state, out[1], out[0])
            trace.append(t)
            self._transition(t, orders)
            state = out[0]
        reports = (checkers.check_price_time_priority(trace[start:]), checkers.check_conservation(trace))
        failed = [r for r in reports if not r.passed]
        if failed:
            raise _Found(orders, failed)
        return state

    def walk(self) -> None:
        self.summary.states += 1
        self.summary.sequences += 1
        self._visit(init(), [], ())

    def _visit(self, state: MarketState, trace: list[Transition], orders) -> None:
        depth = len(orders)
        if depth == self.cfg.max_orders:
            return
        for o in self.alphabets[depth]:
            seq = orders + (o,)
            post, ev = submit(state, o)
            t = Transition(state, ev, post)
            path = trace + [t]
            self._transition(t, seq)
            if self.drain is Drain.INTERLEAVED:
                post = self._drain(post, path, seq)
            else:
                self._drain(post, list(path), seq)
            self.summary.sequences += 1
            self._visit(post, path, seq)


def failing_reports(orders, drain: Drain, engine: EngineConfig = DEFAULT_CONFIG) -> list[CheckReport]:
    """Every failing check (and any engine error) for one run of ``orders``."""
    _, trace, error = execute(orders, drain, engine)
    failed = [r for r in check_trace(trace) if not r.passed]
    if error is not None:
        failed.append(CheckReport("engine", False, error))
    return failed


def minimize_prefix(orders, drain: Drain, engine: EngineConfig = DEFAULT_CONFIG):
    """Shortest failing prefix of ``orders`` with its failing reports, or None."""
    for n in range(len(orders) + 1):
        failed = failing_reports(orders[:n], drain, engine)
        if failed:
            return orders[:n], failed
    return None


def exhaustive_check(cfg: ExhaustiveConfig, engine: EngineConfig = DEFAULT_CONFIG) -> ExhaustiveSummary:
    size = cfg.space_size()
    total = size * len(cfg.drains)
    if total > cfg.budget:
        raise BudgetExceeded(total, cfg.budget)
    log.info("enumerating %d sequences per drain discipline", size)
    summary = ExhaustiveSummary(space_size=total)
    for drain in cfg.drains:
        try:
            _Walker(cfg, drain, engine, summary).walk()
        except _Found as found:
            shrunk = minimize_prefix(found.orders, drain, engine)
            orders, reports = shrunk if shrunk else (found.orders, found.reports)
            summary.counterexample = Counterexample(drain, orders, reports)
            break
    return summary
