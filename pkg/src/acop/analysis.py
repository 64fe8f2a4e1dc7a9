"""Summaries of a results CSV: messages saved, utility categories, length histograms."""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .experiment import ResultRow

MUCH_MARGIN = 10.0
HIST_BIN_WIDTH = 10
MAX_MESSAGES = 401


class Category(str, enum.Enum):
    MUCH_BETTER = "much_better"
    BETTER = "better"
    EQUAL = "equal"
    WORSE = "worse"
    MUCH_WORSE = "much_worse"


def categorize_difference(diff: float, margin: float = MUCH_MARGIN) -> Category:
    if diff > margin:
        return Category.MUCH_BETTER
    if diff > 0:
        return Category.BETTER
    if diff < -margin:
        return Category.MUCH_WORSE
    if diff < 0:
        return Category.WORSE
    return Category.EQUAL


def categorize(acop: ResultRow, aop: ResultRow) -> Category:
    """Compare one configuration's ACOP outcome with its AOP twin.

    Equal when both agents got the same utility; otherwise the sign and
    size of the difference in summed utility decide. A zero sum difference
    with unequal utilities also lands in Equal.
    """
    if acop.utility_a == aop.utility_a and acop.utility_b == aop.utility_b:
        return Category.EQUAL
    return categorize_difference((acop.utility_a + acop.utility_b) - (aop.utility_a + aop.utility_b))


@dataclass(frozen=True)
class Pair:
    config_id: str
    strategy: str
    aop: ResultRow
    acop: ResultRow

    @property
    def saved(self) -> int:
        return self.aop.message_count - self.acop.message_count

    @property
    def possible(self) -> bool:
        return self.aop.n_solutions > 0


def pair_rows(rows: Iterable[ResultRow]) -> tuple[list[Pair], list[tuple[str, str]]]:
    """Match AOP and ACOP rows per (configuration, strategy); unmatched keys are returned apart."""
    grouped: dict[tuple[str, str], dict[str, ResultRow]] = defaultdict(dict)
    for row in rows:
        grouped[(row.config_id, row.strategy)][row.protocol] = row
    pairs, orphans = [], []
    for key in sorted(grouped):
        by_protocol = grouped[key]
        if "aop" in by_protocol and "acop" in by_protocol:
            pairs.append(Pair(key[0], key[1], by_protocol["aop"], by_protocol["acop"]))
        else:
            orphans.append(key)
    return pairs, orphans


def box_stats(values: Sequence[float]) -> dict[str, float]:
    """Mean, median, quartiles and 1.5 IQR whiskers clipped to the data."""
    if not len(values):
        return {"n": 0}
    a = np.asarray(values, dtype=np.float64)
    q1, median, q3 = np.percentile(a, [25, 50, 75])
    iqr = q3 - q1
    lo = a[a >= q1 - 1.5 * iqr].min()
    hi = a[a <= q3 + 1.5 * iqr].max()
    return {
        "n": int(a.size),
        "mean": float(a.mean()),
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "whisker_low": float(lo),
        "whisker_high": float(hi),
        "min": float(a.min()),
        "max": float(a.max()),
    }


def messages_saved(pairs: Sequence[Pair]) -> dict[str, dict[str, dict[str, float]]]:
    out: dict[str, dict[str, dict[str, float]]] = {}
    for strategy in sorted({p.strategy for p in pairs}):
        mine = [p for p in pairs if p.strategy == strategy]
        out[strategy] = {
            "all": box_stats([p.saved for p in mine]),
            "possible": box_stats([p.saved for p in mine if p.possible]),
            "impossible": box_stats([p.saved for p in mine if not p.possible]),
        }
    out["overall"] = {"all": box_stats([p.saved for p in pairs])}
    return out


def category_table(pairs: Sequence[Pair], per_agent: bool = False) -> dict[str, dict[str, float]]:
    """Percentage of configurations per category, for each strategy.

    With ``per_agent`` each agent's utility is categorised on its own and
    both count towards the total.
    """
    table = {}
    for strategy in sorted({p.strategy for p in pairs}):
        counts: Counter[Category] = Counter()
        for p in pairs:
            if p.strategy != strategy:
                continue
            if per_agent:
                counts[categorize_difference(p.acop.utility_a - p.aop.utility_a)] += 1
                counts[categorize_difference(p.acop.utility_b - p.aop.utility_b)] += 1
            else:
                counts[categorize(p.acop, p.aop)] += 1
        total = sum(counts.values())
        table[strategy] = {c.value: 100.0 * counts[c] / total for c in Category}
    return table


def length_histograms(rows: Iterable[ResultRow], bin_width: int = HIST_BIN_WIDTH) -> list[dict]:
    """Counts of negotiation lengths per strategy and protocol.

    ``log10_count`` is filled for non-empty bins so the frequencies can go
    straight onto a logarithmic axis.
    """
    counts: dict[tuple[str, str], Counter[int]] = defaultdict(Counter)
    for row in rows:
        counts[(row.strategy, row.protocol)][(row.message_count - 1) // bin_width] += 1
    n_bins = math.ceil(MAX_MESSAGES / bin_width)
    out = []
    for (strategy, protocol) in sorted(counts):
        c = counts[(strategy, protocol)]
        for b in range(n_bins):
            k = c.get(b, 0)
            out.append(
                {
                    "strategy": strategy,
                    "protocol": protocol,
                    "bin_low": b * bin_width + 1,
                    "bin_high": (b + 1) * bin_width,
                    "count": k,
                    "log10_count": math.log10(k) if k else "",
                }
            )
    return out


def analyze(rows: Sequence[ResultRow], per_agent: bool = False) -> dict:
    pairs, orphans = pair_rows(rows)
    return {
        "n_rows": len(rows),
        "n_pairs": len(pairs),
        "orphans": [list(o) for o in orphans],
        "messages_saved": messages_saved(pairs),
        "categories": category_table(pairs, per_agent),
        "categorization": "per_agent" if per_agent else "sum",
        "possible_fraction": (sum(p.possible for p in pairs) / len(pairs)) if pairs else None,
    }


def _write_csv(path: Path, fieldnames: Sequence[str], records: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)


def write_report(out_dir, rows: Sequence[ResultRow], per_agent: bool = False) -> dict:
    """Write ``summary.json`` and the plot-ready CSVs; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = analyze(rows, per_agent)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    box_fields = ["strategy", "split", "n", "mean", "median", "q1", "q3", "whisker_low", "whisker_high", "min", "max"]
    _write_csv(
        out / "messages_saved_box.csv",
        box_fields,
        (
            {"strategy": strategy, "split": split, **stats}
            for strategy, splits in summary["messages_saved"].items()
            for split, stats in splits.items()
        ),
    )
    _write_csv(
        out / "utility_categories.csv",
        ["strategy", "category", "percent"],
        (
            {"strategy": strategy, "category": cat, "percent": pct}
            for strategy, cats in summary["categories"].items()
            for cat, pct in cats.items()
        ),
    )
    _write_csv(
        out / "length_histogram.csv",
        ["strategy", "protocol", "bin_low", "bin_high", "count", "log10_count"],
        length_histograms(rows),
    )
    return summary


def format_summary(summary: dict) -> str:
    lines = [f"pairs: {summary['n_pairs']}  (orphans excluded: {len(summary['orphans'])})"]
    if summary["possible_fraction"] is not None:
        lines.append(f"possible configurations: {100 * summary['possible_fraction']:.2f}%")
    lines.append("messages saved by ACOP (AOP - ACOP):")
    for strategy, splits in summary["messages_saved"].items():
        for split, s in splits.items():
            if s.get("n"):
                lines.append(
                    f"  {strategy:<10} {split:<10} n={s['n']:<7} mean={s['mean']:8.2f} "
                    f"median={s['median']:6.1f} q1={s['q1']:6.1f} q3={s['q3']:6.1f}"
                )
    lines.append(f"utility, ACOP vs AOP ({summary['categorization']}), % of configurations:")
    for strategy, cats in summary["categories"].items():
        cells = "  ".join(f"{k}={v:6.2f}" for k, v in cats.items())
        lines.append(f"  {strategy:<10} {cells}")
    return "\n".join(lines)
