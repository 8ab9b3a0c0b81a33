"""Probability random forest trained on one positive-vs-unlabeled bag.

Tree induction is CART (Gini, midpoint thresholds, ``mtry`` candidate
features drawn per node) via scikit-learn's ``DecisionTreeClassifier``.
Bootstrapping, per-tree seeding, storage and prediction live here, so a
trained forest is a plain set of flat arrays with no estimator objects.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .cv import BagSpec, derive_seed
from .data import Dataset, LabelKind, VesselYearRecord
from .errors import CatalogMismatch, DataIOError, DegenerateBag, ValidationError
from .features import SelectionMask

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None  # None: floor(sqrt(p)) over the selected columns
    min_node_size: int = 1
    max_depth: int | None = None
    bootstrap_fraction: float = 1.0
    replace: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.min_node_size < 1:
            raise ValidationError("min_node_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValidationError("mtry must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")
        if not 0 < self.bootstrap_fraction <= (math.inf if self.replace else 1.0):
            raise ValidationError("bootstrap_fraction out of range")

    def resolve_mtry(self, p: int) -> int:
        m = self.mtry if self.mtry is not None else max(1, math.isqrt(p))
        if not 1 <= m <= p:
            raise ValidationError(f"mtry={m} outside [1, {p}]")
        return m


@dataclass(frozen=True)
class TrainedForest:
    """Flat-array forest. Node ids are global; ``feature == -1`` marks a leaf.

    ``feature`` indexes the full design matrix, so prediction takes the
    dataset's design rows as-is.
    """

    roots: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_columns: int
    mask: SelectionMask
    config: ForestConfig
    provenance: dict

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def tree_depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for node in range(len(self.feature)):  # children always follow parents
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def predict_scores(self, X: np.ndarray, chunk_cells: int = 2_000_000) -> np.ndarray:
        """Mean leaf positive proportion over trees for each row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_columns:
            raise CatalogMismatch(
                f"forest expects {self.n_columns} design columns, got shape {X.shape}")
        # splits were learned on float32 copies of the data
        X = X.astype(np.float32).astype(np.float64)
        out = np.empty(X.shape[0])
        step = max(1, chunk_cells // self.n_trees)
        for lo in range(0, X.shape[0], step):
            out[lo:lo + step] = self._leaf_values(X[lo:lo + step]).mean(axis=0)
        return out

    def _leaf_values(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        node = np.repeat(self.roots[:, None], n, axis=1)
        rows = np.arange(n)[None, :]
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            x = X[rows, np.where(inner, feat, 0)]
            go_left = x <= self.threshold[node]
            child = np.where(go_left, self.left[node], self.right[node])
            node = np.where(inner, child, node)
        return self.value[node]

    def predict_score(self, record: VesselYearRecord, dataset: Dataset) -> float:
        if len(record.features) != len(dataset.catalog):
            raise CatalogMismatch("record does not conform to the catalog")
        X = dataset.catalog.encode([record.features])
        return float(self.predict_scores(X)[0])

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "purisk-forest",
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "mask": self.mask.to_dict(),
            "provenance": self.provenance,
            "n_columns": self.n_columns,
            "roots": self.roots.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedForest":
        if d.get("format") != "purisk-forest" or d.get("version") != FORMAT_VERSION:
            raise DataIOError("unsupported forest file format")
        return cls(
            roots=np.array(d["roots"], dtype=np.int64),
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            value=np.array(d["value"], dtype=np.float64),
            n_columns=d["n_columns"],
            mask=SelectionMask.from_dict(d["mask"]),
            config=ForestConfig(**d["config"]),
            provenance=d["provenance"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TrainedForest":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise DataIOError(f"cannot read forest {path}: {exc.strerror}") from exc


def _fit_tree(X: np.ndarray, y: np.ndarray, cols: np.ndarray, config: ForestConfig,
              mtry: int, tree_seed: int):
    n = len(y)
    rng = np.random.default_rng(tree_seed)
    n_draw = max(1, round(config.bootstrap_fraction * n))
    if config.replace:
        idx = rng.integers(0, n, size=n_draw)
    else:
        idx = np.sort(rng.choice(n, size=n_draw, replace=False))
    clf = DecisionTreeClassifier(
        criterion="gini",
        max_features=mtry,
        min_samples_split=max(2, config.min_node_size + 1),
        max_depth=config.max_depth,
        random_state=tree_seed >> 33,
    )
    clf.fit(X[idx], y[idx])
    t = clf.tree_
    counts = t.value[:, 0, :]
    if len(clf.classes_) == 2:
        pos = counts[:, 1] / counts.sum(axis=1)
    else:
        pos = np.full(t.node_count, float(clf.classes_[0] == 1))
    leaf = t.children_left < 0
    feature = np.where(leaf, -1, cols[np.maximum(t.feature, 0)])
    return feature, t.threshold.copy(), t.children_left, t.children_right, np.where(leaf, pos, 0.0)


def train_forest(bag: BagSpec, dataset: Dataset, mask: SelectionMask,
                 config: ForestConfig = ForestConfig(), seed: int | None = None,
                 threads: int = 1) -> TrainedForest:
    """Fit one forest to a bag; deterministic in (bag, mask, config, seed)."""
    seed = bag.seed if seed is None else seed
    ids = sorted(bag.case_ids)  # row identity, not input order, drives the bootstrap
    labels = [dataset.records[dataset.index[c]].label for c in ids]
    y = np.array([lab == LabelKind.POSITIVE for lab in labels], dtype=np.int64)
    if y.min() == y.max():
        raise DegenerateBag(f"bag {bag.key} contains a single class")
    cols = mask.kept_columns(dataset.catalog.design_columns)
    X = np.ascontiguousarray(dataset.rows(ids)[:, cols], dtype=np.float32)
    mtry = config.resolve_mtry(len(cols))

    def fit(t):
        return _fit_tree(X, y, cols, config, mtry,
                         derive_seed(seed, bag.fold_index, bag.bag_index, t))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            trees = list(ex.map(fit, range(config.n_trees)))
    else:
        trees = [fit(t) for t in range(config.n_trees)]

    offsets = np.cumsum([0] + [len(tr[0]) for tr in trees])
    return TrainedForest(
        roots=offsets[:-1].astype(np.int64),
        feature=np.concatenate([tr[0] for tr in trees]).astype(np.int64),
        threshold=np.concatenate([tr[1] for tr in trees]),
        left=np.concatenate([np.where(tr[2] < 0, -1, tr[2] + o) for tr, o in zip(trees, offsets)]),
        right=np.concatenate([np.where(tr[3] < 0, -1, tr[3] + o) for tr, o in zip(trees, offsets)]),
        value=np.concatenate([tr[4] for tr in trees]),
        n_columns=len(dataset.catalog.design_columns),
        mask=mask,
        config=config,
        provenance={"seed": seed, "seed_index": bag.seed_index,
                    "fold": bag.fold_index, "bag": bag.bag_index},
    )
