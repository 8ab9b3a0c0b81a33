"""Vessel-year dataset model, feature catalog and CSV ingestion."""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataIOError,
    DuplicateCaseId,
    InvalidCategoricalValue,
    MissingColumn,
    NonFiniteValue,
    UnknownLabel,
    ValidationError,
)

GEARS = ("drifting_longline", "squid_jigger", "trawler", "purse_seiner")
REGIONS = ("asia", "other")
ID_COLUMNS = ("case_id", "year", "label", "source_id", "gear", "region")


class LabelKind(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNLABELED = "unlabeled"

    @classmethod
    def parse(cls, text: str) -> "LabelKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UnknownLabel(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "numeric" | "categorical"
    allowed_values: tuple[str, ...] | None = None
    reference: str | None = None  # categorical level without an indicator column

    @property
    def is_numeric(self) -> bool:
        return self.kind == "numeric"

    def indicator_levels(self) -> tuple[str, ...]:
        assert self.allowed_values is not None
        return tuple(v for v in self.allowed_values if v != self.reference)


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered feature list; the order fixes column order everywhere."""

    entries: tuple[FeatureSpec, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def numeric_names(self) -> list[str]:
        return [e.name for e in self.entries if e.is_numeric]

    def index(self, name: str) -> int:
        return self.names.index(name)

    @cached_property
    def design_columns(self) -> list[str]:
        """Column names of the numeric design matrix (one-hot in catalog order)."""
        cols = []
        for e in self.entries:
            if e.is_numeric:
                cols.append(e.name)
            else:
                cols.extend(f"{e.name}={lvl}" for lvl in e.indicator_levels())
        return cols

    @cached_property
    def design_numeric_mask(self) -> np.ndarray:
        """True for design columns that come from numeric features."""
        mask = []
        for e in self.entries:
            if e.is_numeric:
                mask.append(True)
            else:
                mask.extend([False] * len(e.indicator_levels()))
        return np.array(mask, dtype=bool)

    def encode(self, rows: Sequence[Sequence]) -> np.ndarray:
        """Expand raw feature vectors into the float design matrix."""
        out = np.zeros((len(rows), len(self.design_columns)), dtype=np.float64)
        col = 0
        for j, e in enumerate(self.entries):
            if e.is_numeric:
                out[:, col] = [r[j] for r in rows]
                col += 1
            else:
                values = [r[j] for r in rows]
                for lvl in e.indicator_levels():
                    out[:, col] = [v == lvl for v in values]
                    col += 1
        return out


def _num(name: str) -> FeatureSpec:
    return FeatureSpec(name, "numeric")


DEFAULT_CATALOG = FeatureCatalog((
    FeatureSpec("ais_device_type", "categorical", ("A", "B"), reference="A"),
    _num("avg_gap_distance_km"),
    _num("avg_distance_from_port_km"),
    _num("avg_distance_from_shore_km"),
    _num("avg_encounter_duration_h"),
    _num("avg_gap_length_days"),
    _num("avg_loitering_duration_h"),
    _num("avg_daily_fishing_hours"),
    _num("avg_voyage_duration_h"),
    _num("engine_power_kw"),
    FeatureSpec("fishing_gear", "categorical", GEARS, reference="drifting_longline"),
    FeatureSpec("flag_of_convenience", "categorical", ("yes", "no"), reference="no"),
    _num("max_distance_from_port_km"),
    _num("max_distance_from_shore_km"),
    _num("n_ais_positions"),
    _num("n_encounters"),
    _num("n_encounters_forced_labor_vessels"),
    _num("fishing_hours"),
    _num("fishing_hours_foreign_eez"),
    _num("fishing_hours_high_seas"),
    _num("n_foreign_port_visits"),
    _num("n_gaps_12h"),
    _num("hours_at_sea"),
    _num("n_loitering_events"),
    _num("n_poc_port_visits"),
    _num("n_voyages"),
    _num("tonnage_gt"),
    _num("total_distance_km"),
    _num("vessel_length_m"),
))


@dataclass(frozen=True)
class VesselYearRecord:
    case_id: str
    year: int
    label: LabelKind
    source_id: str
    gear: str
    region: str
    features: tuple


@dataclass(frozen=True)
class Dataset:
    catalog: FeatureCatalog
    records: tuple[VesselYearRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for i, r in enumerate(self.records):
            if r.case_id in seen:
                raise DuplicateCaseId(f"row {i + 1}: duplicate case_id {r.case_id!r}")
            seen.add(r.case_id)
            if not r.source_id:
                raise ValidationError(f"row {i + 1}: empty source_id")

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def index(self) -> dict[str, int]:
        return {r.case_id: i for i, r in enumerate(self.records)}

    @cached_property
    def design(self) -> np.ndarray:
        """Float design matrix in record order; read-only."""
        X = self.catalog.encode([r.features for r in self.records])
        X.flags.writeable = False
        return X

    def rows(self, case_ids: Iterable[str]) -> np.ndarray:
        return self.design[[self.index[c] for c in case_ids]]

    def ids_with_label(self, label: LabelKind) -> list[str]:
        return [r.case_id for r in self.records if r.label == label]

    def label_counts(self) -> Counter:
        return Counter(r.label for r in self.records)


def validate_record(rec: VesselYearRecord, catalog: FeatureCatalog, row: int) -> None:
    if len(rec.features) != len(catalog):
        raise ValidationError(f"row {row}: expected {len(catalog)} features, got {len(rec.features)}")
    if rec.gear not in GEARS:
        raise InvalidCategoricalValue(f"row {row}, column 'gear': invalid value {rec.gear!r}")
    if rec.region not in REGIONS:
        raise InvalidCategoricalValue(f"row {row}, column 'region': invalid value {rec.region!r}")
    for spec, value in zip(catalog, rec.features):
        if spec.is_numeric:
            if not isinstance(value, float) or not math.isfinite(value):
                raise NonFiniteValue(f"row {row}, column {spec.name!r}: non-finite value {value!r}")
        elif value not in spec.allowed_values:
            raise InvalidCategoricalValue(
                f"row {row}, column {spec.name!r}: invalid value {value!r}")
    if "fishing_gear" in catalog.names and rec.features[catalog.index("fishing_gear")] != rec.gear:
        raise InvalidCategoricalValue(
            f"row {row}, column 'fishing_gear': disagrees with gear {rec.gear!r}")


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NonFiniteValue(f"row {row}, column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise NonFiniteValue(f"row {row}, column {column!r}: non-finite value {text!r}")
    return value


def load_dataset(path, catalog: FeatureCatalog = DEFAULT_CATALOG) -> Dataset:
    """Read and validate a vessel-year CSV. Row numbers in errors are 1-based data rows."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read dataset {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, no header") from None
        expected = list(ID_COLUMNS) + catalog.names
        missing = [c for c in expected if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        pos = {c: header.index(c) for c in expected}

        records = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            try:
                label = LabelKind.parse(row[pos["label"]])
            except UnknownLabel as exc:
                raise UnknownLabel(f"row {row_no}, column 'label': {exc}") from None
            try:
                year = int(row[pos["year"]])
            except ValueError:
                raise ValidationError(f"row {row_no}, column 'year': not an integer") from None
            feats = []
            for spec in catalog:
                cell = row[pos[spec.name]]
                feats.append(_parse_float(cell, row_no, spec.name) if spec.is_numeric else cell)
            rec = VesselYearRecord(
                case_id=row[pos["case_id"]],
                year=year,
                label=label,
                source_id=row[pos["source_id"]],
                gear=row[pos["gear"]],
                region=row[pos["region"]],
                features=tuple(feats),
            )
            validate_record(rec, catalog, row_no)
            records.append(rec)
    return Dataset(catalog, records)


def write_dataset(dataset: Dataset, path) -> None:
    """Write a dataset in the ingestion schema; floats use round-trip repr."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ID_COLUMNS) + dataset.catalog.names)
        for r in dataset.records:
            feats = [repr(v) if isinstance(v, float) else v for v in r.features]
            w.writerow([r.case_id, r.year, r.label.value, r.source_id, r.gear, r.region, *feats])


@dataclass(frozen=True)
class GroupCountTable:
    """Record counts per (gear, region, label) cell."""

    counts: dict[tuple[str, str, LabelKind], int]

    def get(self, gear: str, region: str, label: LabelKind) -> int:
        return self.counts.get((gear, region, label), 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def label_total(self, label: LabelKind) -> int:
        return sum(n for (_, _, lab), n in self.counts.items() if lab == label)


def summarize(dataset: Dataset) -> GroupCountTable:
    counts = {(g, reg, lab): 0 for g in GEARS for reg in REGIONS for lab in LabelKind}
    for r in dataset.records:
        counts[(r.gear, r.region, r.label)] += 1
    return GroupCountTable(counts)


@dataclass(frozen=True)
class CaseInfo:
    """What evaluation needs to know about a case besides its scores."""

    label: LabelKind
    gear: str
    region: str


def case_info(dataset: Dataset) -> dict[str, CaseInfo]:
    return {r.case_id: CaseInfo(r.label, r.gear, r.region) for r in dataset.records}


def write_labels_csv(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "label", "gear", "region"])
        for r in sorted(dataset.records, key=lambda r: r.case_id):
            w.writerow([r.case_id, r.label.value, r.gear, r.region])


def read_labels_csv(path) -> dict[str, CaseInfo]:
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read labels {path}: {exc.strerror}") from exc
    out = {}
    for i, r in enumerate(rows, start=1):
        try:
            info = CaseInfo(LabelKind.parse(r["label"]), r["gear"], r["region"])
        except KeyError as exc:
            raise MissingColumn(f"{path}: missing column {exc}") from None
        if info.gear not in GEARS or info.region not in REGIONS:
            raise InvalidCategoricalValue(f"{path}, row {i}: invalid gear/region")
        out[r["case_id"]] = info
    return out
