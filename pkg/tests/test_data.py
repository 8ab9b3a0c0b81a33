import csv

import numpy as np
import pytest

from purisk.data import (DEFAULT_CATALOG, GEARS, ID_COLUMNS, REGIONS, Dataset, LabelKind,
                         case_info, load_dataset, read_labels_csv, summarize, write_dataset,
                         write_labels_csv)
from purisk.errors import (DataIOError, DuplicateCaseId, InvalidCategoricalValue, MissingColumn,
                           NonFiniteValue, UnknownLabel)
from purisk.synth import SynthConfig, generate

from conftest import GROUP_TABLE, grouped_dataset, make_dataset, make_record


def _write_rows(path, records, mutate=None):
    header = list(ID_COLUMNS) + DEFAULT_CATALOG.names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in records:
            row = [r.case_id, r.year, r.label.value, r.source_id, r.gear, r.region,
                   *[repr(v) if isinstance(v, float) else v for v in r.features]]
            row = dict(zip(header, row))
            if mutate:
                mutate(row)
            w.writerow([row[h] for h in header])


FOUR = [make_record("a", "positive", "r1"), make_record("b", "unlabeled", "r2"),
        make_record("c", "negative", "cert", gear="squid_jigger", region="other"),
        make_record("d", "unlabeled", "r2", numeric=[1.5, -2.0])]


class TestCatalog:
    def test_default_catalog_shape(self):
        assert len(DEFAULT_CATALOG) == 29
        assert len(DEFAULT_CATALOG.numeric_names) == 26
        # two binary indicators plus three non-reference gears
        assert len(DEFAULT_CATALOG.design_columns) == 31
        assert "fishing_gear=squid_jigger" in DEFAULT_CATALOG.design_columns
        assert "fishing_gear=drifting_longline" not in DEFAULT_CATALOG.design_columns

    def test_encode_one_hot(self):
        rec = make_record("x", "unlabeled", "s", numeric=[3.0], gear="trawler", device="B",
                          foc="yes")
        X = DEFAULT_CATALOG.encode([rec.features])
        cols = DEFAULT_CATALOG.design_columns
        row = dict(zip(cols, X[0]))
        assert row["fishing_gear=trawler"] == 1.0
        assert row["fishing_gear=squid_jigger"] == 0.0
        assert row["ais_device_type=B"] == 1.0
        assert row["flag_of_convenience=yes"] == 1.0
        assert row[DEFAULT_CATALOG.numeric_names[0]] == 3.0
        assert DEFAULT_CATALOG.design_numeric_mask.sum() == 26


class TestLoad:
    def test_four_rows(self, tmp_path):
        p = tmp_path / "d.csv"
        _write_rows(p, FOUR)
        ds = load_dataset(p)
        assert len(ds) == 4
        assert [r.label for r in ds.records] == [LabelKind.POSITIVE, LabelKind.UNLABELED,
                                                 LabelKind.NEGATIVE, LabelKind.UNLABELED]
        num = [v for v in ds.records[3].features if isinstance(v, float)]
        assert num[:2] == [1.5, -2.0]

    def test_empty_numeric_cell_names_row_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        col = DEFAULT_CATALOG.numeric_names[4]

        def blank(row):
            if row["case_id"] == "b":
                row[col] = ""
        _write_rows(p, FOUR, blank)
        with pytest.raises(NonFiniteValue, match=rf"row 2.*{col}"):
            load_dataset(p)

    @pytest.mark.parametrize("value", ["nan", "inf", "-inf"])
    def test_non_finite(self, tmp_path, value):
        p = tmp_path / "d.csv"
        col = DEFAULT_CATALOG.numeric_names[0]
        _write_rows(p, FOUR, lambda row: row.__setitem__(col, value))
        with pytest.raises(NonFiniteValue):
            load_dataset(p)

    def test_unknown_label(self, tmp_path):
        p = tmp_path / "d.csv"
        _write_rows(p, FOUR, lambda row: row.__setitem__("label", "maybe"))
        with pytest.raises(UnknownLabel, match="row 1"):
            load_dataset(p)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("case_id,year,label\nx,2015,positive\n")
        with pytest.raises(MissingColumn, match="source_id"):
            load_dataset(p)

    def test_bad_categorical(self, tmp_path):
        p = tmp_path / "d.csv"
        _write_rows(p, FOUR, lambda row: row.__setitem__("ais_device_type", "C"))
        with pytest.raises(InvalidCategoricalValue, match="ais_device_type"):
            load_dataset(p)

    def test_gear_column_must_agree_with_feature(self, tmp_path):
        p = tmp_path / "d.csv"
        _write_rows(p, FOUR[:1], lambda row: row.__setitem__("fishing_gear", "squid_jigger"))
        with pytest.raises(InvalidCategoricalValue, match="fishing_gear"):
            load_dataset(p)

    def test_duplicate_case_id(self, tmp_path):
        p = tmp_path / "d.csv"
        _write_rows(p, [FOUR[0], FOUR[0]])
        with pytest.raises(DuplicateCaseId):
            load_dataset(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIOError, match="nope.csv"):
            load_dataset(tmp_path / "nope.csv")


class TestRoundTrip:
    def test_synthetic_125_rows_bitwise(self, tmp_path):
        ds, _ = generate(SynthConfig(n_total=125, n_sources=10, seed=11))
        assert len(ds) == 125
        p = tmp_path / "d.csv"
        write_dataset(ds, p)
        back = load_dataset(p)
        assert back.records == ds.records
        np.testing.assert_array_equal(back.design, ds.design)

    def test_labels_sidecar(self, tmp_path):
        ds = make_dataset([(r.case_id, r.label.value, r.source_id) for r in FOUR])
        write_labels_csv(ds, tmp_path / "labels.csv")
        assert read_labels_csv(tmp_path / "labels.csv") == case_info(ds)

    def test_design_is_read_only(self):
        ds = make_dataset([("a", "positive", "s")])
        with pytest.raises(ValueError):
            ds.design[0, 0] = 1.0


class TestSummarize:
    @pytest.mark.slow
    def test_reference_group_counts(self):
        table = summarize(grouped_dataset(GROUP_TABLE))
        assert table.get("drifting_longline", "asia", LabelKind.POSITIVE) == 30
        assert table.get("drifting_longline", "asia", LabelKind.UNLABELED) == 12850
        assert table.label_total(LabelKind.POSITIVE) == 72
        assert table.label_total(LabelKind.NEGATIVE) == 53
        assert table.label_total(LabelKind.UNLABELED) == 107256
        assert table.total == 107381
        for (g, reg), (p, n, u) in GROUP_TABLE.items():
            assert (table.get(g, reg, LabelKind.POSITIVE), table.get(g, reg, LabelKind.NEGATIVE),
                    table.get(g, reg, LabelKind.UNLABELED)) == (p, n, u)

    def test_empty(self):
        table = summarize(Dataset(DEFAULT_CATALOG, []))
        assert table.total == 0
        assert all(table.get(g, r, lab) == 0 for g in GEARS for r in REGIONS for lab in LabelKind)

    def test_matches_generator_bookkeeping(self):
        cfg = SynthConfig(n_total=400, n_sources=10, seed=5, n_certified_negatives=12)
        ds, _ = generate(cfg)
        table = summarize(ds)
        n_lab, n_unl = cfg.sizes()
        assert table.label_total(LabelKind.POSITIVE) == n_lab
        assert table.label_total(LabelKind.UNLABELED) == n_unl
        assert table.label_total(LabelKind.NEGATIVE) == 12
        for g in GEARS:
            for reg in REGIONS:
                for lab in LabelKind:
                    expect = sum(r.gear == g and r.region == reg and r.label == lab
                                 for r in ds.records)
                    assert table.get(g, reg, lab) == expect
