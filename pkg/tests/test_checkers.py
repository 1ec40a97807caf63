from __future__ import annotations

from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atsmatch.checkers import (
    CheckReport,
    IllFormedState,
    MalformedTrace,
    Transition,
    check_conservation,
    check_exchange_locality,
    check_fill_at_bid_or_ask,
    check_nlc,
    check_oracle_agreement,
    check_price_time_priority,
    check_time_discipline,
    check_well_formed,
    derive_membership,
    direct_nlc,
    transition_failures,
    transition_reports,
)
from atsmatch.engine import Rule, step
from atsmatch.harness import Drain, execute
from atsmatch.state import BookSide, MarketState, PriceLevel, init

from conftest import BUY, SELL, cancel, limit, make_state, market, side_of


def test_report_requires_counterexample_exactly_on_failure():
    with pytest.raises(ValueError):
        CheckReport("nlc", False)
    with pytest.raises(ValueError):
        CheckReport("nlc", True, "oops")
    assert CheckReport("nlc", False, "x").to_dict() == {"check": "nlc", "pass": False, "counterexample": "x"}


def test_initial_state_is_derivable():
    d = derive_membership(init())
    assert d is not None
    assert d.start.buy_prices == () and d.start.sell_prices == () and d.start.time == 0
    assert d.buy_steps == () and d.sell_steps == ()


def test_derivation_emits_one_step_per_active_price():
    s = make_state(buy={3: [(1, 1, 0)], 5: [(2, 1, 1)]}, sell={7: [(3, 2, 2)]})
    d = derive_membership(s)
    assert d.start.buy_prices == (3, 5) and d.start.sell_prices == (7,)
    assert [p for p, _ in d.buy_steps] == [3, 5]
    assert d.sell_steps[0][1][0].id == 3
    assert check_nlc(s).passed and check_oracle_agreement(s).passed


def test_one_sided_book_is_derivable():
    assert derive_membership(make_state(sell={1: [(1, 1, 0)], 9: [(2, 1, 1)]})) is not None


def test_locked_book_has_no_derivation():
    s = make_state(buy={5: [(1, 1, 0)]}, sell={5: [(2, 1, 1)]})
    assert derive_membership(s) is None
    r = check_nlc(s)
    assert not r.passed and r.counterexample == "(bid, ask) = (5, 5)"
    assert check_oracle_agreement(s).passed


def test_crossed_book_fails_with_quotes():
    s = make_state(buy={6: [(1, 1, 0)]}, sell={5: [(2, 1, 1)]})
    assert derive_membership(s) is None
    assert check_nlc(s).counterexample == "(bid, ask) = (6, 5)"


def test_ill_formed_state_raises_for_derivation_and_fails_checks():
    broken = MarketState((), BookSide(BUY, (4,), {}), side_of(SELL, {}), 0)
    with pytest.raises(IllFormedState, match="activePrices/levels mismatch"):
        derive_membership(broken)
    assert not check_well_formed(broken).passed
    r = check_nlc(broken)
    assert not r.passed and r.counterexample.startswith("state is not generable")


book_levels = st.dictionaries(
    st.integers(0, 8),
    st.lists(st.integers(1, 3), min_size=1, max_size=3),
    max_size=4,
)


def _state_from(buy, sell):
    ids = iter(range(1, 100))
    t = iter(range(0, 100))
    b = {p: [(next(ids), q, next(t)) for q in qs] for p, qs in buy.items()}
    s = {p: [(next(ids), q, next(t)) for q in qs] for p, qs in sell.items()}
    return make_state(buy=b, sell=s)


@settings(max_examples=500)
@given(book_levels, book_levels)
def test_grammar_agrees_with_direct_comparison(buy, sell):
    s = _state_from(buy, sell)
    assert (derive_membership(s) is not None) == direct_nlc(s)
    assert check_oracle_agreement(s).passed


# -- single transitions ------------------------------------------------------


def _fill_step(pre):
    post, ev = step(pre)
    assert ev.fill is not None
    return post, ev


def test_locality_passes_on_real_fill_and_flags_a_distant_change():
    pre = make_state(sell={10: [(1, 5, 0)], 12: [(2, 1, 1)]}, queue=[(limit(BUY, 10, 2, 3), 2)])
    post, ev = _fill_step(pre)
    assert check_exchange_locality(pre, post, ev).passed
    tampered = replace(post, sell=post.sell.without_price(12))
    r = check_exchange_locality(pre, tampered, ev)
    assert not r.passed and "level 12" in r.counterexample


def test_fill_at_bid_or_ask_flags_a_non_best_price():
    pre = make_state(sell={10: [(1, 5, 0)], 12: [(2, 1, 1)]}, queue=[(limit(BUY, 12, 1, 3), 2)])
    post, ev = _fill_step(pre)
    assert check_fill_at_bid_or_ask(pre, ev).passed
    bad = replace(ev, fill=replace(ev.fill, price=12))
    r = check_fill_at_bid_or_ask(pre, bad)
    assert r.counterexample == "incoming buy 3 filled at 12, ask was 10"


def test_fill_checks_reject_events_that_are_not_fills():
    pre = make_state(queue=[(limit(BUY, 1, 1, 1), 0)])
    post, ev = step(pre)
    with pytest.raises(MalformedTrace):
        check_fill_at_bid_or_ask(pre, ev)


def test_time_discipline_flags_wrong_clock_and_flag():
    pre = make_state(sell={10: [(1, 1, 0)]}, queue=[(market(BUY, 3, 2), 1)])
    post, ev = step(pre)
    assert ev.rule is Rule.MARKET_3 and check_time_discipline(pre, post, ev).passed
    r = check_time_discipline(pre, replace(post, now=post.now + 1), ev)
    assert "moved clock" in r.counterexample
    r = check_time_discipline(pre, post, replace(ev, time_advanced=True))
    assert "time_advanced=True" in r.counterexample


def test_transition_failures_matches_full_reports():
    pre = make_state(sell={10: [(1, 5, 0)]}, queue=[(limit(BUY, 10, 2, 3), 1)])
    post, ev = step(pre)
    assert transition_failures(pre, ev, post) == []
    assert all(r.passed for r in transition_reports(pre, ev, post))
    crossed = make_state(buy={11: [(3, 1, 1)]}, sell={10: [(1, 5, 0)]})
    failed = transition_failures(pre, ev, crossed)
    assert [r.check for r in failed] == [r.check for r in transition_reports(pre, ev, crossed) if not r.passed]
    assert "nlc" in [r.check for r in failed]


# -- traces ------------------------------------------------------------------


def _trace(orders, drain=Drain.BATCH):
    _, trace, error = execute(orders, drain)
    assert error is None
    return trace


def test_priority_and_conservation_hold_on_a_sweep():
    trace = _trace([
        limit(SELL, 10, 2, 1), limit(SELL, 10, 1, 2), limit(SELL, 11, 4, 3),
        limit(BUY, 11, 5, 4), cancel(SELL, 11, 3), market(SELL, 9, 5),
    ])
    assert check_price_time_priority(trace).passed
    assert check_conservation(trace).passed


def test_priority_flags_a_resident_taken_out_of_turn():
    trace = _trace([limit(SELL, 10, 2, 1), limit(SELL, 10, 2, 2), limit(BUY, 10, 1, 3)])
    i = next(i for i, t in enumerate(trace) if t.event.fill)
    pre, ev, post = trace[i]
    bad = replace(ev, fill=replace(ev.fill, resting_id=2))
    trace[i] = Transition(pre, bad, post)
    r = check_price_time_priority(trace)
    assert not r.passed and "ahead of 1" in r.counterexample


def test_conservation_flags_vanishing_quantity():
    trace = _trace([limit(SELL, 10, 2, 1), limit(BUY, 10, 1, 2)])
    pre, ev, post = trace[-1]
    leaky = replace(post, sell=post.sell.with_level(PriceLevel(10, ())).without_price(10))
    trace[-1] = Transition(pre, ev, leaky)
    r = check_conservation(trace)
    assert not r.passed and "book gave 2" in r.counterexample


def test_conservation_counts_discards_and_queued_remainders():
    trace = _trace([limit(SELL, 10, 1, 1), market(BUY, 3, 2)])
    rules = [t.event.rule for t in trace]
    assert Rule.MARKET_EMPTY in rules
    assert check_conservation(trace).passed
    # a prefix ending mid-order leaves the remainder in the queue
    cut = rules.index(Rule.MARKET_3) + 1
    assert check_conservation(trace[:cut]).passed


def test_empty_trace_passes_both_trace_checks():
    assert check_price_time_priority([]).passed and check_conservation([]).passed
