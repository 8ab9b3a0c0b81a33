"""Cross-validated scoring over seeds, folds and bags.

Trainable cases (positive/unlabeled) are scored only by the forests of the
fold that holds them out. Negative cases never enter a fold; for each
(seed, bag) they receive the mean score of that bag index's forests across
all folds, recorded with ``fold = -1``. Either way every case ends up with
``n_seeds * n_bags`` scores.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .cv import BagSpec, FoldPlan, SeedPlan, make_bags, make_folds
from .data import Dataset, LabelKind
from .errors import DataIOError, EmptyScoreList, ValidationError
from .features import SelectionMask, select_features
from .forest import ForestConfig, TrainedForest, train_forest

log = logging.getLogger(__name__)

NEGATIVE_FOLD = -1


@dataclass(frozen=True)
class ScoreEntry:
    case_id: str
    seed: int  # seed index
    fold: int
    bag: int
    score: float


@dataclass
class ScoreMatrix:
    entries: list[ScoreEntry]
    fold_plans: list[FoldPlan] = field(default_factory=list)
    bags: list[BagSpec] = field(default_factory=list)
    masks: dict[tuple[int, int, int], SelectionMask] = field(default_factory=dict)

    def __post_init__(self):
        self.entries.sort(key=lambda e: (e.case_id, e.seed, e.fold, e.bag))

    def by_case(self) -> dict[str, list[ScoreEntry]]:
        out: dict[str, list[ScoreEntry]] = {}
        for e in self.entries:
            out.setdefault(e.case_id, []).append(e)
        return out

    def scores(self) -> dict[str, list[float]]:
        return {c: [e.score for e in es] for c, es in self.by_case().items()}

    def avg_scores(self) -> dict[str, float]:
        return average_scores(self.scores())


def average_scores(scores: dict[str, Iterable[float]]) -> dict[str, float]:
    """Per-case arithmetic mean (correctly rounded sum, so order-independent)."""
    out = {}
    for case_id, vals in scores.items():
        vals = list(vals)
        if not vals:
            raise EmptyScoreList(f"case {case_id!r} has no scores")
        out[case_id] = math.fsum(vals) / len(vals)
    return out


@dataclass(frozen=True)
class _TaskResult:
    key: tuple[int, int, int]
    mask: SelectionMask
    test_scores: dict[str, float]
    negative_scores: np.ndarray
    forest: TrainedForest | None


def run_pipeline(dataset: Dataset, seed_plan: SeedPlan = SeedPlan(),
                 config: ForestConfig = ForestConfig(), n_folds: int = 5, n_bags: int = 10,
                 corr_threshold: float = 0.75, threads: int = 1,
                 on_forest: Callable[[TrainedForest], None] | None = None) -> ScoreMatrix:
    """Train ``len(seed_plan) * n_folds * n_bags`` forests and collect scores.

    ``threads`` only changes wall-clock time; results are identical for any
    value. ``on_forest`` receives each trained forest (e.g. to save it).
    """
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    neg_ids = dataset.ids_with_label(LabelKind.NEGATIVE)
    X_neg = dataset.rows(neg_ids)

    fold_plans, bags = [], []
    for s, master in enumerate(seed_plan.master_seeds):
        plan = make_folds(dataset, master, n_folds)
        fold_plans.append(plan)
        bags.extend(make_bags(plan, dataset, master, n_bags, seed_index=s))

    def task(bag: BagSpec) -> _TaskResult:
        plan = fold_plans[bag.seed_index]
        mask = select_features(dataset.rows(bag.case_ids), dataset.catalog, corr_threshold)
        forest = train_forest(bag, dataset, mask, config)
        test = plan.test_ids(bag.fold_index)
        test_scores = dict(zip(test, forest.predict_scores(dataset.rows(test)).tolist()))
        neg = forest.predict_scores(X_neg) if neg_ids else np.empty(0)
        return _TaskResult(bag.key, mask, test_scores, neg, forest if on_forest else None)

    results: dict[tuple[int, int, int], _TaskResult] = {}
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            for res in ex.map(task, bags):
                results[res.key] = res
                if on_forest:
                    on_forest(res.forest)
    else:
        for bag in bags:
            res = task(bag)
            results[res.key] = res
            if on_forest:
                on_forest(res.forest)
            log.debug("forest %s done", res.key)

    entries = []
    for key in sorted(results):
        s, f, b = key
        for case_id, score in results[key].test_scores.items():
            entries.append(ScoreEntry(case_id, s, f, b, score))
    for s in range(len(seed_plan)):
        for b in range(n_bags):
            per_fold = np.stack([results[(s, f, b)].negative_scores for f in range(n_folds)])
            for k, case_id in enumerate(neg_ids):
                entries.append(ScoreEntry(case_id, s, NEGATIVE_FOLD, b,
                                          math.fsum(per_fold[:, k]) / n_folds))
    return ScoreMatrix(entries, fold_plans, bags, {k: r.mask for k, r in results.items()})


# file formats -------------------------------------------------------------

def write_scores_csv(matrix: ScoreMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "seed", "fold", "bag", "score"])
        for e in matrix.entries:
            w.writerow([e.case_id, e.seed, e.fold, e.bag, repr(e.score)])


def write_avg_scores_csv(matrix: ScoreMatrix, path) -> None:
    scores = matrix.scores()
    avg = average_scores(scores)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "avg_score", "n_scores"])
        for case_id in sorted(avg):
            w.writerow([case_id, repr(avg[case_id]), len(scores[case_id])])


def read_scores_csv(path) -> ScoreMatrix:
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read scores {path}: {exc.strerror}") from exc
    try:
        entries = [ScoreEntry(r["case_id"], int(r["seed"]), int(r["fold"]), int(r["bag"]),
                              float(r["score"])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed scores file ({exc})") from None
    return ScoreMatrix(entries)


def read_avg_scores_csv(path) -> dict[str, float]:
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read average scores {path}: {exc.strerror}") from exc
    try:
        return {r["case_id"]: float(r["avg_score"]) for r in rows}
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed average-score file ({exc})") from None
