"""Synthetic PU datasets with known ground truth.

Sizes: with ``P`` total positives in the trainable pool, ``label_fraction * P``
are labeled and the rest hide in the unlabeled pool at rate ``true_alpha``,
so ``L = n * lf * alpha / (lf * alpha + 1 - lf)`` labeled positives and
``U = n - L`` unlabeled cases, each unlabeled case positive with probability
``true_alpha``. With ``label_fraction == 1`` no positive is left unlabeled;
``true_alpha`` then only sets the labeled share ``L = alpha * n`` and
the unlabeled pool is all negatives.

``separation`` is the Euclidean distance between the two component means,
spread evenly over the ``n_features`` informative coordinates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DEFAULT_CATALOG, GEARS, REGIONS, Dataset, FeatureCatalog, LabelKind, VesselYearRecord
from .errors import DataIOError, InfeasibleConfig

TRUE_POSITIVE = "true_positive"
TRUE_NEGATIVE = "true_negative"


@dataclass(frozen=True)
class SynthConfig:
    n_total: int = 2000
    true_alpha: float = 0.3
    label_fraction: float = 0.5
    separation: float = 2.0  # distance between component means, in unit standard deviations
    n_features: int = 1      # informative numeric features sharing the gap; the rest are noise
    n_sources: int = 40
    seed: int = 0
    n_certified_negatives: int = 0
    n_folds: int = 5

    def sizes(self) -> tuple[int, int]:
        """(labeled positives, unlabeled) in the trainable pool."""
        n, a, lf = self.n_total - self.n_certified_negatives, self.true_alpha, self.label_fraction
        n_lab = round(a * n) if lf == 1 else round(n * lf * a / (lf * a + 1 - lf))
        return n_lab, n - n_lab

    def validate(self, catalog: FeatureCatalog) -> None:
        if not 0 < self.true_alpha < 1:
            raise InfeasibleConfig("true_alpha must lie in (0, 1)")
        if not 0 < self.label_fraction <= 1:
            raise InfeasibleConfig("label_fraction must lie in (0, 1]")
        if self.separation < 0:
            raise InfeasibleConfig("separation must be >= 0")
        if not 1 <= self.n_features <= len(catalog.numeric_names):
            raise InfeasibleConfig(
                f"n_features must lie in [1, {len(catalog.numeric_names)}]")
        if self.n_sources < self.n_folds:
            raise InfeasibleConfig(f"need at least {self.n_folds} sources")
        if self.n_certified_negatives < 0:
            raise InfeasibleConfig("n_certified_negatives must be >= 0")
        n_lab, n_unl = self.sizes()
        if n_lab < self.n_folds:
            raise InfeasibleConfig(f"only {n_lab} labeled positives; need one per fold")
        if n_unl < n_lab:
            raise InfeasibleConfig("unlabeled pool smaller than the labeled positives")


def generate(config: SynthConfig, catalog: FeatureCatalog = DEFAULT_CATALOG
             ) -> tuple[Dataset, dict[str, str]]:
    """Build a dataset and its truth map (case_id -> true_positive/true_negative)."""
    config.validate(catalog)
    rng = np.random.default_rng(config.seed)
    n_lab, n_unl = config.sizes()
    n_neg = config.n_certified_negatives
    n = n_lab + n_unl + n_neg

    labels = [LabelKind.POSITIVE] * n_lab + [LabelKind.UNLABELED] * n_unl + [LabelKind.NEGATIVE] * n_neg
    hidden_rate = 0.0 if config.label_fraction == 1 else config.true_alpha
    hidden = rng.random(n_unl) < hidden_rate
    is_pos = np.concatenate([np.ones(n_lab, bool), hidden, np.zeros(n_neg, bool)])

    numeric = catalog.numeric_names
    X = rng.standard_normal((n, len(numeric)))
    X[is_pos, :config.n_features] += config.separation / np.sqrt(config.n_features)

    # round-robin group assignment over a seeded shuffle
    n_train = n_lab + n_unl
    order = rng.permutation(n_train)
    source = np.empty(n_train, dtype=np.int64)
    source[order] = np.arange(n_train) % config.n_sources
    gear_idx = np.empty(n, dtype=np.int64)
    gear_idx[rng.permutation(n)] = np.arange(n) % len(GEARS)
    region_idx = np.empty(n, dtype=np.int64)
    region_idx[rng.permutation(n)] = np.arange(n) % len(REGIONS)
    device = rng.random(n) < 0.5
    foc = rng.random(n) < 0.3

    n_pos_sources = len(set(source[:n_lab].tolist()))
    if n_pos_sources < config.n_folds:
        raise InfeasibleConfig(f"labeled positives span only {n_pos_sources} sources")

    width = len(str(n))
    records, truth = [], {}
    for i in range(n):
        gear = GEARS[gear_idx[i]]
        num = iter(X[i].tolist())
        feats = []
        for spec in catalog:
            if spec.is_numeric:
                feats.append(next(num))
            elif spec.name == "ais_device_type":
                feats.append("B" if device[i] else "A")
            elif spec.name == "fishing_gear":
                feats.append(gear)
            elif spec.name == "flag_of_convenience":
                feats.append("yes" if foc[i] else "no")
            else:
                feats.append(spec.allowed_values[0])
        case_id = f"syn{i:0{width}d}"
        src = f"src{source[i]:03d}" if i < n_train else f"cert{i - n_train:0{width}d}"
        records.append(VesselYearRecord(case_id, 2012 + i % 9, labels[i], src, gear,
                                        REGIONS[region_idx[i]], tuple(feats)))
        truth[case_id] = TRUE_POSITIVE if is_pos[i] else TRUE_NEGATIVE
    return Dataset(catalog, records), truth


def write_truth_csv(truth: dict[str, str], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "truth"])
        for case_id in sorted(truth):
            w.writerow([case_id, truth[case_id]])


def read_truth_csv(path) -> dict[str, bool]:
    """Truth file as case_id -> is_positive."""
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            return {r["case_id"]: r["truth"] == TRUE_POSITIVE for r in csv.DictReader(fh)}
    except OSError as exc:
        raise DataIOError(f"cannot read truth file {path}: {exc.strerror}") from exc
