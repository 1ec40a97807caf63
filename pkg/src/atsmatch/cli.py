"""Command-line entry point: ``atsmatch run|check|enumerate|replay``.

Exit codes: 0 success, 1 parse failure or failed check, 2 engine error,
3 enumeration refused because the search space exceeds the budget.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import harness, plotting, traceio
from .engine import TRACE_RULES, EngineConfig, Fault, Rule
from .harness import BudgetExceeded, Drain, ExhaustiveConfig, Mode, Scenario
from .state import OrderKind

EXIT_OK, EXIT_FAIL, EXIT_ENGINE, EXIT_BUDGET = 0, 1, 2, 3

RULE_ORDER = [r.value for r in Rule if r in TRACE_RULES]

log = logging.getLogger("atsmatch")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _kinds(text: str) -> frozenset[OrderKind]:
    try:
        return frozenset(OrderKind(t.strip().lower()) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"kinds are limit, market, cancel; got {text!r}") from None


def _mode(text: str) -> tuple[Mode, int]:
    if text in ("fixed", "permutations"):
        return Mode(text), 0
    if text.startswith("random:"):
        try:
            k = int(text.split(":", 1)[1])
        except ValueError:
            k = 0
        if k > 0:
            return Mode.RANDOM, k
    raise argparse.ArgumentTypeError("mode is fixed, permutations or random:<k>")


def _engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--market-remainder", choices=["market", "limit"], default="market",
                   help="kind of the unfilled part of a market order that stays queued")
    p.add_argument("--cancel-match-qty", action="store_true",
                   help="a cancel only removes a lone resident whose qty equals the cancel's qty")
    p.add_argument("--inject-fault", choices=[f.value for f in Fault], default=None,
                   help=argparse.SUPPRESS)


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        market_remainder=OrderKind(args.market_remainder),
        cancel_match_qty=args.cancel_match_qty,
        fault=Fault(args.inject_fault) if args.inject_fault else None,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atsmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file and write its trace")
    run.add_argument("scenario", type=Path)
    run.add_argument("--trace-out", default="-", help="trace destination (default: stdout)")
    run.add_argument("--drain", choices=[d.value for d in Drain], default="batch")
    run.add_argument("--figure-out", type=Path, help="write a bid/ask/fill figure here")
    _engine_args(run)

    check = sub.add_parser("check", help="run a scenario with every checker at every step")
    check.add_argument("scenario", type=Path)
    check.add_argument("--mode", type=_mode, default=(Mode.FIXED, 0),
                       help="fixed, permutations or random:<k>")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--drain", choices=[d.value for d in Drain], default="batch")
    check.add_argument("--report-out", type=Path, help="write one TSV line per (ordering, check)")
    _engine_args(check)

    enum = sub.add_parser("enumerate", help="exhaustively check every short order sequence")
    enum.add_argument("--max-orders", type=int, required=True)
    enum.add_argument("--prices", type=_int_list, required=True)
    enum.add_argument("--qtys", type=_int_list, required=True)
    enum.add_argument("--kinds", type=_kinds, default=frozenset({OrderKind.LIMIT}))
    enum.add_argument("--drain", choices=["both", *(d.value for d in Drain)], default="both")
    enum.add_argument("--budget", type=int, default=harness.DEFAULT_BUDGET,
                      help="maximum number of sequences (over all drain disciplines)")
    enum.add_argument("--report-out", type=Path, help="write summary and rule counts as TSV")
    enum.add_argument("--figure-out", type=Path, help="write a rule-coverage figure here")
    _engine_args(enum)

    replay = sub.add_parser("replay", help="re-run a trace's scenario and compare traces")
    replay.add_argument("trace", type=Path)
    return parser


def _load(path: Path) -> Optional[list]:
    try:
        return traceio.read_scenario(path)
    except traceio.ScenarioParseError as exc:
        print(exc, file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
    return None


def render_trace(orders, drain: Drain, config: EngineConfig, created: Optional[str] = None):
    """Run ``orders`` and return (trace text, engine error)."""
    _, trace, error = harness.execute(orders, drain, config)
    buf = io.StringIO()
    traceio.write_trace(buf, orders, trace, traceio.config_dict(config, drain.value), error, created)
    return buf.getvalue(), error


def cmd_run(args) -> int:
    orders = _load(args.scenario)
    if orders is None:
        return EXIT_FAIL
    try:
        Scenario(tuple(orders))
    except ValueError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    config = _engine_config(args)
    text, error = render_trace(orders, Drain(args.drain), config)
    if args.trace_out == "-":
        sys.stdout.write(text)
    else:
        Path(args.trace_out).write_text(text, encoding="utf-8")
    if args.figure_out:
        records = [json.loads(line) for line in text.splitlines()[1:]]
        plotting.plot_quotes(records, args.figure_out, title=args.scenario.name)
    if error is not None:
        print(f"engine error: {error}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_OK


def cmd_check(args) -> int:
    orders = _load(args.scenario)
    if orders is None:
        return EXIT_FAIL
    mode, shuffles = args.mode
    try:
        scenario = Scenario(tuple(orders), mode, shuffles, args.seed, Drain(args.drain))
    except ValueError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    results = harness.run_scenario(scenario, _engine_config(args))
    lines = []
    failed = engine_failed = 0
    for i, res in enumerate(results):
        for r in res.reports:
            lines.append(f"{i}\t{r.check}\t{'pass' if r.passed else 'FAIL'}\t{r.counterexample or ''}")
        if res.error is not None:
            engine_failed += 1
            lines.append(f"{i}\tengine\tFAIL\t{res.error}")
        if not res.passed:
            failed += 1
            print(f"ordering {i}: " + " | ".join(traceio.format_order(o) for o in res.ordering))
            for r in res.reports:
                if not r.passed:
                    print(f"  FAIL {r.check}: {r.counterexample}")
            if res.error is not None:
                print(f"  ENGINE ERROR: {res.error}")
    if args.report_out:
        args.report_out.write_text("ordering\tcheck\tresult\tcounterexample\n" + "\n".join(lines) + "\n")
    print(f"{len(results)} ordering(s), {failed} failing")
    if engine_failed:
        return EXIT_ENGINE
    return EXIT_FAIL if failed else EXIT_OK


def summary_rows(summary: harness.ExhaustiveSummary, cfg: ExhaustiveConfig) -> list[tuple[str, str]]:
    rows = [
        ("max_orders", str(cfg.max_orders)),
        ("prices", ",".join(map(str, cfg.prices))),
        ("qtys", ",".join(map(str, cfg.qtys))),
        ("kinds", ",".join(k.value for k in OrderKind if k in cfg.kinds)),
        ("drains", ",".join(d.value for d in cfg.drains)),
        ("space_size", str(summary.space_size)),
        ("sequences", str(summary.sequences)),
        ("states", str(summary.states)),
        ("transitions", str(summary.transitions)),
        ("fills", str(summary.fills)),
        ("violations", str(summary.violations)),
    ]
    rows += [(f"rule:{r}", str(summary.rule_counts.get(r, 0))) for r in RULE_ORDER]
    cx = summary.counterexample
    if cx is not None:
        rows.append(("counterexample_drain", cx.drain.value))
        rows.append(("counterexample_orders", " | ".join(traceio.format_order(o) for o in cx.orders)))
        for r in cx.reports:
            rows.append((f"failed:{r.check}", r.counterexample or ""))
    return rows


def cmd_enumerate(args) -> int:
    drains = tuple(Drain) if args.drain == "both" else (Drain(args.drain),)
    # interleaved first: its prefix sharing reaches shallow counterexamples fastest
    drains = tuple(sorted(drains, key=lambda d: d is not Drain.INTERLEAVED))
    try:
        cfg = ExhaustiveConfig(args.max_orders, args.prices, args.qtys, args.kinds, drains, args.budget)
    except ValueError as exc:
        print(f"enumerate: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"search space: {cfg.space_size()} sequences x {len(drains)} drain discipline(s)")
    started = time.perf_counter()
    try:
        summary = harness.exhaustive_check(cfg, _engine_config(args))
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    log.info("enumeration took %.1fs", time.perf_counter() - started)
    rows = summary_rows(summary, cfg)
    for key, value in rows:
        if not key.startswith("rule:"):
            print(f"{key}\t{value}")
    if args.report_out:
        args.report_out.parent.mkdir(parents=True, exist_ok=True)
        args.report_out.write_text("".join(f"{k}\t{v}\n" for k, v in rows), encoding="utf-8")
    if args.figure_out:
        plotting.plot_rule_counts(summary.rule_counts, args.figure_out, RULE_ORDER,
                                  title=f"rule applications, {summary.sequences} sequences")
    cx = summary.counterexample
    if cx is None:
        return EXIT_OK
    return EXIT_ENGINE if all(r.check == "engine" for r in cx.reports) else EXIT_FAIL


def cmd_replay(args) -> int:
    try:
        loaded = traceio.read_trace(args.trace)
        orders = loaded.orders
    except (OSError, ValueError) as exc:
        print(f"{args.trace}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    cfg = loaded.header["config"]
    config = EngineConfig(
        market_remainder=OrderKind(cfg["market_remainder"]),
        cancel_match_qty=cfg["cancel_match_qty"],
        fault=Fault(cfg["fault"]) if cfg["fault"] else None,
    )
    text, _ = render_trace(orders, Drain(cfg["drain"]), config)
    original = args.trace.read_text(encoding="utf-8")
    if traceio.normalize(text) != traceio.normalize(original):
        print(f"{args.trace}: replay differs from recorded trace", file=sys.stderr)
        return EXIT_FAIL
    print(f"{args.trace}: replay identical ({len(loaded.records)} records)")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "enumerate": cmd_enumerate, "replay": cmd_replay}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
