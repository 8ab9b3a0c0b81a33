"""Recall, specificity and per-group fairness tables.

A cell whose denominator is zero is "absent" (None), never 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .confidence import NEGATIVE, POSITIVE, Prediction, confidence_buckets
from .data import GEARS, REGIONS, CaseInfo, LabelKind

GEAR_TITLES = {
    "drifting_longline": "Longliners",
    "squid_jigger": "Squid jiggers",
    "trawler": "Trawlers",
    "purse_seiner": "Purse seiners",
}
REGION_TITLES = {"asia": "Asia", "other": "All others"}


@dataclass(frozen=True)
class Rate:
    value: float | None
    n: int

    def to_json(self) -> dict:
        return {"value": self.value, "n": self.n}


def _matches(info: CaseInfo, group_filter: Mapping[str, str] | None) -> bool:
    if not group_filter:
        return True
    return all(getattr(info, k) == v for k, v in group_filter.items())


def _as_map(predictions) -> dict[str, Prediction]:
    if isinstance(predictions, Mapping):
        return dict(predictions)
    return {p.case_id: p for p in predictions}


def _rate(predictions, labels: Mapping[str, CaseInfo], label: LabelKind, want: str,
          group_filter) -> Rate:
    preds = _as_map(predictions)
    hits = n = 0
    for case_id, info in labels.items():
        if info.label != label or case_id not in preds or not _matches(info, group_filter):
            continue
        n += 1
        hits += preds[case_id].label == want
    return Rate(hits / n if n else None, n)


def compute_recall(predictions, labels: Mapping[str, CaseInfo],
                   group_filter: Mapping[str, str] | None = None) -> Rate:
    """Share of Positive-labeled cases predicted positive."""
    return _rate(predictions, labels, LabelKind.POSITIVE, POSITIVE, group_filter)


def compute_specificity(predictions, labels: Mapping[str, CaseInfo],
                        group_filter: Mapping[str, str] | None = None) -> Rate:
    """Share of Negative-labeled cases predicted negative."""
    return _rate(predictions, labels, LabelKind.NEGATIVE, NEGATIVE, group_filter)


def prediction_share_table(predictions: Iterable[Prediction], labels: Mapping[str, CaseInfo]
                           ) -> dict:
    """Counts per (class, gear) with column shares, plus a Total column."""
    counts = {(cls, g): 0 for cls in (POSITIVE, NEGATIVE) for g in (*GEARS, "total")}
    for p in predictions:
        counts[(p.label, labels[p.case_id].gear)] += 1
        counts[(p.label, "total")] += 1
    table = {}
    for g in (*GEARS, "total"):
        col_total = counts[(POSITIVE, g)] + counts[(NEGATIVE, g)]
        table[g] = {
            cls: {"count": counts[(cls, g)],
                  "share": counts[(cls, g)] / col_total if col_total else None}
            for cls in (POSITIVE, NEGATIVE)
        }
        table[g]["total"] = col_total
    return table


def _grid(fn, predictions, labels) -> dict:
    rows = {}
    for g in (*GEARS, "all"):
        gear_f = {} if g == "all" else {"gear": g}
        rows[g] = {reg: fn(predictions, labels, {**gear_f, "region": reg}).to_json()
                   for reg in REGIONS}
        rows[g]["global"] = fn(predictions, labels, gear_f or None).to_json()
    return rows


def truth_metrics(predictions, truth: Mapping[str, bool]) -> dict:
    """Recall and specificity against a known ground truth (synthetic data)."""
    preds = _as_map(predictions)
    tp = fn = tn = fp = 0
    for case_id, is_pos in truth.items():
        if case_id not in preds:
            continue
        hit = preds[case_id].is_positive
        if is_pos:
            tp += hit
            fn += not hit
        else:
            fp += hit
            tn += not hit
    return {
        "recall": Rate(tp / (tp + fn) if tp + fn else None, tp + fn).to_json(),
        "specificity": Rate(tn / (tn + fp) if tn + fp else None, tn + fp).to_json(),
    }


def build_report(predictions: list[Prediction], labels: Mapping[str, CaseInfo],
                 cutoff: float = 0.8, truth: Mapping[str, bool] | None = None,
                 calibration: Mapping | None = None) -> dict:
    """Everything ``report.json`` holds, at full precision."""
    preds = _as_map(predictions)
    gears = {c: labels[c].gear for c in preds}
    buckets = confidence_buckets(predictions, gears, cutoff)
    conf = {}
    for cls in (POSITIVE, NEGATIVE):
        row = {}
        for g in GEARS:
            cell = buckets.get((g, cls))
            row[g] = {"confident": cell.confident if cell else 0, "total": cell.total if cell else 0}
        row["total"] = {"confident": sum(v["confident"] for v in row.values()),
                        "total": sum(v["total"] for v in row.values())}
        for v in row.values():
            v["share"] = v["confident"] / v["total"] if v["total"] else None
        conf[cls] = row
    report = {
        "n_predictions": len(preds),
        "global_recall": compute_recall(preds, labels).to_json(),
        "global_specificity": compute_specificity(preds, labels).to_json(),
        "recall": _grid(compute_recall, preds, labels),
        "specificity": _grid(compute_specificity, preds, labels),
        "prediction_share": prediction_share_table(predictions, labels),
        "confidence_cutoff": cutoff,
        "confidence": conf,
    }
    if calibration is not None:
        report["alpha_star"] = calibration.get("alpha_star")
        report["threshold"] = calibration.get("threshold")
    if truth is not None:
        report["truth"] = truth_metrics(preds, truth)
    return report


# markdown ---------------------------------------------------------------

ABSENT = "–"


def _pct(share: float | None) -> str:
    return ABSENT if share is None else f"{100 * share:.1f}%"


def _rate_cell(cell: dict) -> str:
    return ABSENT if cell["value"] is None else f"{cell['value']:.2f} ({cell['n']})"


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |",
           "|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|"]
    out += ["| " + " | ".join(r) + " |" for r in rows]
    return out


def render_markdown(report: dict) -> str:
    cols = [GEAR_TITLES[g] for g in GEARS] + ["Total"]
    keys = [*GEARS, "total"]
    lines = ["# PU risk model report", ""]
    if report.get("alpha_star") is not None:
        lines += [f"Estimated alpha*: {report['alpha_star']:.3f}; "
                  f"threshold t = {report['threshold']:.6f}.", ""]

    share = report["prediction_share"]
    lines += ["## Positive and negative predictions by gear", ""]
    rows = []
    for cls, title in ((POSITIVE, "Positive"), (NEGATIVE, "Negative")):
        rows.append([title] + [f"{share[k][cls]['count']} ({_pct(share[k][cls]['share'])})"
                               for k in keys])
    rows.append(["Total"] + [str(share[k]["total"]) for k in keys])
    lines += _table([""] + cols, rows) + [""]

    cutoff = report["confidence_cutoff"]
    lines += [f"## Predictions with more than {100 * cutoff:.0f}% confidence", ""]
    rows = []
    for cls, title in ((POSITIVE, "Positive"), (NEGATIVE, "Negative")):
        row = report["confidence"][cls]
        rows.append([title] + [f"{row[k]['confident']} ({_pct(row[k]['share'])})" for k in keys])
    lines += _table([""] + cols, rows) + [""]

    for name, title in (("recall", "Recall"), ("specificity", "Specificity")):
        grid = report[name]
        lines += [f"## {title} by gear and flag region (cases in parentheses)", ""]
        rows = [[GEAR_TITLES.get(g, "All gears")] + [_rate_cell(grid[g][c])
                                                     for c in (*REGIONS, "global")]
                for g in (*GEARS, "all")]
        lines += _table(["", *REGION_TITLES.values(), "Global"], rows) + [""]

    if "truth" in report:
        t = report["truth"]
        lines += ["## Against ground truth", "",
                  f"- recall: {_rate_cell(t['recall'])}",
                  f"- specificity: {_rate_cell(t['specificity'])}", ""]
    return "\n".join(lines)
