"""Per-case classification and Beta-distribution confidence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .betainc import betainc
from .errors import DataIOError, TooFewScores, ValidationError

DEGENERATE_VARIANCE = 1e-12
POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class BetaFit:
    a: float
    b: float


def fit_beta(scores: Sequence[float]) -> BetaFit | None:
    """Method-of-moments Beta fit; None when the moments admit no Beta.

    Uses the sample (n - 1) variance. Degenerate means variance below 1e-12
    or at least m * (1 - m).
    """
    x = [float(s) for s in scores]
    n = len(x)
    if n < 2:
        raise TooFewScores(f"Beta fit needs at least 2 scores, got {n}")
    m = math.fsum(x) / n
    v = math.fsum((s - m) ** 2 for s in x) / (n - 1)
    if v < DEGENERATE_VARIANCE or v >= m * (1.0 - m):
        return None
    k = m * (1.0 - m) / v - 1.0
    return BetaFit(m * k, (1.0 - m) * k)


@dataclass(frozen=True)
class Prediction:
    case_id: str
    avg_score: float
    label: str  # POSITIVE | NEGATIVE
    beta: BetaFit | None
    confidence: float

    @property
    def is_positive(self) -> bool:
        return self.label == POSITIVE


def beta_confidence(fit: BetaFit, t: float, positive: bool) -> float:
    """Mass of Beta(a, b) on the predicted class's side of ``t``."""
    below = betainc(fit.a, fit.b, t)
    return 1.0 - below if positive else below


def classify_with_confidence(scores: Sequence[float], avg: float, t: float,
                             case_id: str = "") -> Prediction:
    """Class by ``avg > t``; confidence is the fitted Beta mass on the class side of ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"threshold must lie in [0, 1], got {t}")
    positive = avg > t
    fit = fit_beta(scores)
    if fit is None:
        same_side = all(s > t for s in scores) if positive else all(s < t for s in scores)
        conf = 1.0 if same_side else 0.5
    else:
        conf = beta_confidence(fit, t, positive)
    return Prediction(case_id, avg, POSITIVE if positive else NEGATIVE, fit, conf)


def predict_all(scores: Mapping[str, Sequence[float]], avg: Mapping[str, float],
                t: float) -> list[Prediction]:
    return [classify_with_confidence(scores[c], avg[c], t, c) for c in sorted(scores)]


@dataclass(frozen=True)
class BucketCell:
    confident: int
    total: int

    @property
    def share(self) -> float | None:
        return self.confident / self.total if self.total else None


def confidence_buckets(predictions: Iterable[Prediction], groups: Mapping[str, str],
                       cutoff: float = 0.8) -> dict[tuple[str, str], BucketCell]:
    """Per (group, class): how many predictions have confidence > cutoff."""
    tally: dict[tuple[str, str], list[int]] = {}
    for p in predictions:
        cell = tally.setdefault((groups[p.case_id], p.label), [0, 0])
        cell[0] += p.confidence > cutoff
        cell[1] += 1
    return {k: BucketCell(*v) for k, v in tally.items()}


PREDICTION_COLUMNS = ["case_id", "avg_score", "class", "beta_a", "beta_b", "confidence"]


def write_predictions_csv(predictions: Iterable[Prediction], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for p in predictions:
            a, b = (repr(p.beta.a), repr(p.beta.b)) if p.beta else ("", "")
            w.writerow([p.case_id, repr(p.avg_score), p.label, a, b, repr(p.confidence)])


def read_predictions_csv(path) -> list[Prediction]:
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read predictions {path}: {exc.strerror}") from exc
    out = []
    try:
        for r in rows:
            beta = BetaFit(float(r["beta_a"]), float(r["beta_b"])) if r["beta_a"] else None
            if r["class"] not in (POSITIVE, NEGATIVE):
                raise ValueError(f"unknown class {r['class']!r}")
            out.append(Prediction(r["case_id"], float(r["avg_score"]), r["class"], beta,
                                  float(r["confidence"])))
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed predictions file ({exc})") from None
    return out
