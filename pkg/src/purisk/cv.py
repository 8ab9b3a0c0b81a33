"""Source-grouped folds, 1:1 downsampled bags and seed derivation."""

from __future__ import annotations

import hashlib
import struct
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .data import Dataset, LabelKind
from .errors import FoldWithoutPositives, NotEnoughUnlabeled, TooFewSources, ValidationError

DEFAULT_SEEDS = (1, 2, 3)
NOT_APPLICABLE = -1


def derive_seed(master_seed: int, fold: int = NOT_APPLICABLE, bag: int = NOT_APPLICABLE,
                tree: int = NOT_APPLICABLE) -> int:
    """Stable 64-bit sub-stream seed for (master, fold, bag, tree).

    Unused coordinates are -1. The value depends only on its arguments,
    never on execution order or worker count.
    """
    payload = struct.pack("<Qqqq", master_seed & 0xFFFFFFFFFFFFFFFF, fold, bag, tree)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SeedPlan:
    master_seeds: tuple[int, ...] = DEFAULT_SEEDS

    def __post_init__(self):
        object.__setattr__(self, "master_seeds", tuple(int(s) for s in self.master_seeds))
        if not self.master_seeds:
            raise ValidationError("at least one master seed is required")
        for s in self.master_seeds:
            if not 0 <= s < 2**64:
                raise ValidationError(f"master seed {s} is not a 64-bit unsigned integer")

    def __len__(self) -> int:
        return len(self.master_seeds)


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    seed: int
    assignments: dict[str, int]
    groups: dict[str, int]

    def test_ids(self, fold: int) -> list[str]:
        return sorted(c for c, f in self.assignments.items() if f == fold)

    def train_ids(self, fold: int) -> list[str]:
        return sorted(c for c, f in self.assignments.items() if f != fold)

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.n_folds
        for f in self.assignments.values():
            sizes[f] += 1
        return sizes


@dataclass(frozen=True)
class BagSpec:
    seed_index: int
    seed: int
    fold_index: int
    bag_index: int
    positive_ids: tuple[str, ...]
    unlabeled_ids: tuple[str, ...]

    @property
    def case_ids(self) -> tuple[str, ...]:
        return self.positive_ids + self.unlabeled_ids

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.seed_index, self.fold_index, self.bag_index)


def trainable_ids(dataset: Dataset) -> list[str]:
    return [r.case_id for r in dataset.records if r.label != LabelKind.NEGATIVE]


def make_folds(dataset: Dataset, seed: int, n_folds: int = 5) -> FoldPlan:
    """Assign whole source groups of trainable cases to folds.

    Groups holding a positive are placed first (in shuffled order), then the
    rest; each group goes to the currently smallest fold (lowest index on
    ties). Placing positive groups first puts at least one positive in every
    fold whenever positives span >= n_folds sources.
    """
    if n_folds < 2:
        raise ValidationError(f"n_folds must be >= 2, got {n_folds}")
    members: dict[str, list[str]] = defaultdict(list)
    has_pos: dict[str, bool] = defaultdict(bool)
    for r in dataset.records:
        if r.label == LabelKind.NEGATIVE:
            continue
        members[r.source_id].append(r.case_id)
        has_pos[r.source_id] |= r.label == LabelKind.POSITIVE
    if len(members) < n_folds:
        raise TooFewSources(f"{len(members)} distinct sources, need at least {n_folds}")

    rng = np.random.default_rng(derive_seed(seed))
    pos_sources = sorted(s for s in members if has_pos[s])
    other_sources = sorted(s for s in members if not has_pos[s])
    if len(pos_sources) < n_folds:
        raise FoldWithoutPositives(
            f"positives span {len(pos_sources)} sources; every one of {n_folds} folds needs one")
    order = [pos_sources[i] for i in rng.permutation(len(pos_sources))]
    order += [other_sources[i] for i in rng.permutation(len(other_sources))]

    sizes = [0] * n_folds
    groups = {}
    for src in order:
        f = min(range(n_folds), key=lambda k: (sizes[k], k))
        groups[src] = f
        sizes[f] += len(members[src])
    assignments = {c: groups[src] for src, ids in members.items() for c in ids}
    plan = FoldPlan(n_folds, seed, assignments, groups)

    pos_folds = {assignments[c] for c in dataset.ids_with_label(LabelKind.POSITIVE)}
    if len(pos_folds) < n_folds:
        raise FoldWithoutPositives("a fold received no positive case")
    return plan


def make_bags(fold_plan: FoldPlan, dataset: Dataset, seed: int, n_bags: int = 10,
              seed_index: int = 0) -> list[BagSpec]:
    """Draw ``n_bags`` 1:1 bags per fold from that fold's training side."""
    if n_bags < 1:
        raise ValidationError(f"n_bags must be >= 1, got {n_bags}")
    labels = {r.case_id: r.label for r in dataset.records}
    bags = []
    for fold in range(fold_plan.n_folds):
        train = fold_plan.train_ids(fold)
        pos = tuple(c for c in train if labels[c] == LabelKind.POSITIVE)
        pool = [c for c in train if labels[c] == LabelKind.UNLABELED]
        if not pos:
            raise FoldWithoutPositives(f"fold {fold}: training side has no positives")
        if len(pool) < len(pos):
            raise NotEnoughUnlabeled(
                f"fold {fold}: {len(pool)} unlabeled training cases for {len(pos)} positives")
        for bag in range(n_bags):
            rng = np.random.default_rng(derive_seed(seed, fold, bag))
            pick = np.sort(rng.choice(len(pool), size=len(pos), replace=False))
            bags.append(BagSpec(seed_index, seed, fold, bag, pos, tuple(pool[i] for i in pick)))
    return bags


def plans_to_json(fold_plans: list[FoldPlan], bags: list[BagSpec]) -> dict:
    """Serializable audit record of folds and bags (``folds.json``)."""
    return {
        "master_seeds": [p.seed for p in fold_plans],
        "folds": [
            {
                "seed": i,
                "assignments": [{"case_id": c, "fold": f} for c, f in sorted(p.assignments.items())],
            }
            for i, p in enumerate(fold_plans)
        ],
        "bags": [
            {"seed": b.seed_index, "fold": b.fold_index, "bag": b.bag_index,
             "sampled_unlabeled_ids": list(b.unlabeled_ids)}
            for b in bags
        ],
    }
