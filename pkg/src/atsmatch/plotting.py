"""Figures written next to trace and enumeration reports."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    # keeps PNG/SVG output identical across runs
    "svg.hashsalt": "atsmatch",
    "path.simplify": False,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None,
                bbox_inches="tight")
    plt.close(fig)
    return path


def plot_quotes(records: Sequence[dict], path: Path, title: str = "") -> Path:
    """Bid and ask after every transition, with fills marked at their price."""
    seq = [r["seq"] for r in records if "rule" in r]
    bids = [r["digest"]["bid"] for r in records if "rule" in r]
    asks = [r["digest"]["ask"] for r in records if "rule" in r]
    fills = [(r["seq"], r["fill"]["price"], r["fill"]["qty"]) for r in records if r.get("fill")]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.2))
        nan = float("nan")
        ax.step(seq, [nan if b is None else b for b in bids], where="post", label="bid", color="tab:blue")
        ax.step(seq, [nan if a is None else a for a in asks], where="post", label="ask", color="tab:red")
        if fills:
            xs, ps, qs = zip(*fills)
            ax.scatter(xs, ps, s=[12 + 6 * q for q in qs], marker="x", color="k", label="fill", zorder=3)
        ax.set_xlabel("transition")
        ax.set_ylabel("price (ticks)")
        if title:
            ax.set_title(title)
        if seq:
            ax.legend(loc="best", frameon=False)
        return _save(fig, path)


def plot_rule_counts(counts: Mapping[str, int], path: Path, rules: Sequence[str], title: str = "") -> Path:
    """Horizontal bars, one per rule, in the order given by ``rules``."""
    values = [counts.get(r, 0) for r in rules]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 0.22 * len(rules) + 0.8))
        ax.barh(range(len(rules)), values, color=["tab:gray" if v else "tab:red" for v in values])
        ax.set_yticks(range(len(rules)), rules)
        ax.invert_yaxis()
        ax.set_xscale("symlog", linthresh=1)
        ax.set_xlabel("applications")
        if title:
            ax.set_title(title)
        return _save(fig, path)
