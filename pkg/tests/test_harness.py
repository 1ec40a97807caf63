from __future__ import annotations

import pytest

from atsmatch.engine import DEFAULT_CONFIG, EngineConfig, Fault, Rule
from atsmatch.harness import (
    ABSENT_ID,
    BudgetExceeded,
    Drain,
    ExhaustiveConfig,
    Mode,
    Scenario,
    execute,
    exhaustive_check,
    failing_reports,
    minimize_prefix,
    run_scenario,
)
from atsmatch.state import OrderKind

from conftest import BUY, SELL, cancel, limit, market

PAIR = (limit(SELL, 5, 2, 1), limit(BUY, 5, 2, 2))


def test_permutations_of_a_matched_pair():
    results = run_scenario(Scenario(PAIR, Mode.PERMUTATIONS))
    assert len(results) == 2
    for res in results:
        assert res.passed
        assert sum(t.event.fill is not None for t in res.trace) == 1


def test_fixed_mode_is_deterministic():
    orders = PAIR + (market(SELL, 1, 3), cancel(BUY, 5, 2))
    a, b = (run_scenario(Scenario(orders)) for _ in range(2))
    assert [t.event for t in a[0].trace] == [t.event for t in b[0].trace]
    assert a[0].final == b[0].final


def test_random_mode_is_reproducible_from_seed():
    orders = tuple(limit(BUY if i % 2 else SELL, 1 + i % 3, 1, i) for i in range(1, 7))
    first = [r.ordering for r in run_scenario(Scenario(orders, Mode.RANDOM, 5, seed=7))]
    again = [r.ordering for r in run_scenario(Scenario(orders, Mode.RANDOM, 5, seed=7))]
    other = [r.ordering for r in run_scenario(Scenario(orders, Mode.RANDOM, 5, seed=8))]
    assert first == again and len(first) == 5
    assert first != other


def test_scenario_validation():
    with pytest.raises(ValueError, match="duplicate"):
        Scenario((limit(BUY, 1, 1, 1), limit(SELL, 2, 1, 1)))
    with pytest.raises(ValueError, match="shuffle"):
        Scenario(PAIR, Mode.RANDOM, 0)
    # cancels name their target, so they may reuse a live id
    Scenario((limit(BUY, 1, 1, 1), cancel(BUY, 1, 1)))


@pytest.mark.parametrize("drain", list(Drain))
def test_interleaved_and_batch_agree_on_books(drain):
    orders = [limit(SELL, 3, 2, 1), limit(SELL, 4, 1, 2), market(BUY, 3, 3), limit(BUY, 2, 1, 4)]
    final, trace, error = execute(orders, drain)
    assert error is None
    assert final.sell.prices == () and final.buy.prices == (2,)


def test_engine_error_is_reported_not_raised():
    cfg = EngineConfig(cancel_match_qty=True)
    _, trace, error = execute([limit(BUY, 1, 1, 1), cancel(BUY, 1, 1, qty=5)], config=cfg)
    assert error is not None and "empty price queue" in error
    assert trace  # transitions before the error are kept


def test_alphabet_shape_and_absent_target():
    cfg = ExhaustiveConfig(3, (1, 2), (1,), frozenset(OrderKind))
    third = cfg.alphabet(3)
    assert len(third) == cfg.choices(3) == 2 * 2 + 2 + 2 * 2 * 3
    cancels = [o for o in third if o.kind is OrderKind.CANCEL]
    assert {o.id for o in cancels} == {ABSENT_ID, 1, 2}
    assert all(o.id == 3 for o in third if o.kind is not OrderKind.CANCEL)


def test_sequences_count_matches_space_size_and_are_unique():
    cfg = ExhaustiveConfig(3, (1, 2), (1, 2), frozenset(OrderKind))
    seqs = list(cfg.sequences())
    assert len(seqs) == cfg.space_size()
    assert len(set(seqs)) == len(seqs)
    assert seqs[0] == ()


def test_space_size_formula():
    cfg = ExhaustiveConfig(4, (1, 2, 3), (1, 2), frozenset(OrderKind))
    c = [cfg.choices(k) for k in range(1, 5)]
    assert c == [22, 28, 34, 40]
    assert cfg.space_size() == 1 + 22 + 22 * 28 + 22 * 28 * 34 + 22 * 28 * 34 * 40


def test_budget_refuses_before_running():
    cfg = ExhaustiveConfig(5, (1, 2, 3), (1, 2), frozenset(OrderKind), budget=1000)
    with pytest.raises(BudgetExceeded) as info:
        exhaustive_check(cfg)
    assert info.value.size == 2 * cfg.space_size()


def test_small_exhaustive_run_passes_and_counts():
    cfg = ExhaustiveConfig(3, (1, 2), (1,), frozenset({OrderKind.LIMIT}))
    summary = exhaustive_check(cfg)
    assert summary.passed and summary.violations == 0
    assert summary.sequences == summary.space_size == 2 * cfg.space_size()
    assert summary.fills > 0
    assert summary.rule_counts["limit/1"] > 0 and summary.rule_counts["enqueue"] > 0


def test_mixed_alphabet_reaches_every_rule():
    cfg = ExhaustiveConfig(3, (1, 2), (1, 2), frozenset(OrderKind), drains=(Drain.BATCH,))
    summary = exhaustive_check(cfg)
    assert summary.passed
    missing = [r.value for r in Rule if r is not Rule.BEGIN and summary.rule_counts[r.value] == 0]
    assert missing == []


@pytest.mark.parametrize(
    "fault, check",
    [
        (Fault.SKIP_PRICE_REMOVAL, "well_formed"),
        (Fault.WORST_PRICE, "fill_at_bid_or_ask"),
        (Fault.LIFO_PRIORITY, "price_time_priority"),
    ],
)
def test_faults_produce_minimal_counterexamples(fault, check):
    cfg = ExhaustiveConfig(3, (1, 2), (1, 2), frozenset({OrderKind.LIMIT}))
    summary = exhaustive_check(cfg, EngineConfig(fault=fault))
    cx = summary.counterexample
    assert cx is not None and not summary.passed
    assert check in [r.check for r in cx.reports]
    assert all(r.counterexample for r in cx.reports)
    # the reported prefix is the shortest failing one
    assert failing_reports(cx.orders, cx.drain, EngineConfig(fault=fault))
    assert not failing_reports(cx.orders[:-1], cx.drain, EngineConfig(fault=fault))
    assert failing_reports(cx.orders, cx.drain, DEFAULT_CONFIG) == []


def test_minimize_prefix_returns_none_when_clean():
    assert minimize_prefix(PAIR, Drain.BATCH) is None
