"""Shared builders for small hand-made datasets."""

import numpy as np
import pytest

from purisk.data import DEFAULT_CATALOG, Dataset, LabelKind, VesselYearRecord
from purisk.synth import SynthConfig, generate

N_NUMERIC = len(DEFAULT_CATALOG.numeric_names)


def make_record(case_id, label, source_id, numeric=None, gear="trawler", region="asia",
                year=2015, device="A", foc="no"):
    """A record in the default catalog; unspecified numeric features are 0.0."""
    numeric = [0.0] * N_NUMERIC if numeric is None else [float(v) for v in numeric]
    numeric += [0.0] * (N_NUMERIC - len(numeric))
    it = iter(numeric)
    feats = []
    for spec in DEFAULT_CATALOG:
        if spec.is_numeric:
            feats.append(next(it))
        elif spec.name == "ais_device_type":
            feats.append(device)
        elif spec.name == "fishing_gear":
            feats.append(gear)
        else:
            feats.append(foc)
    return VesselYearRecord(case_id, year, LabelKind(label), source_id, gear, region, tuple(feats))


def make_dataset(rows):
    """``rows``: iterables of make_record positional/keyword arguments."""
    return Dataset(DEFAULT_CATALOG, [make_record(*r) if not isinstance(r, dict) else make_record(**r)
                                     for r in rows])


def pu_dataset(n_pos=20, n_unl=60, n_sources=10, n_neg=0, shift=4.0, seed=0):
    """Positives shifted on the first numeric feature; sources round-robin."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_pos):
        x = rng.standard_normal(N_NUMERIC)
        x[0] += shift
        rows.append(dict(case_id=f"p{i:03d}", label="positive", source_id=f"s{i % n_sources}",
                         numeric=x))
    for i in range(n_unl):
        rows.append(dict(case_id=f"u{i:03d}", label="unlabeled",
                         source_id=f"s{(i + 3) % n_sources}", numeric=rng.standard_normal(N_NUMERIC)))
    for i in range(n_neg):
        rows.append(dict(case_id=f"n{i:03d}", label="negative", source_id=f"cert{i}",
                         numeric=rng.standard_normal(N_NUMERIC)))
    return make_dataset(rows)


# vessel-years per (gear, region): (positive, negative, unlabeled)
GROUP_TABLE = {
    ("drifting_longline", "asia"): (30, 0, 12850),
    ("drifting_longline", "other"): (10, 0, 8037),
    ("squid_jigger", "asia"): (14, 0, 5221),
    ("squid_jigger", "other"): (0, 0, 801),
    ("purse_seiner", "asia"): (6, 0, 1078),
    ("purse_seiner", "other"): (1, 0, 4232),
    ("trawler", "asia"): (9, 0, 6150),
    ("trawler", "other"): (2, 53, 68887),
}


def grouped_dataset(counts):
    """Dataset with the given per-(gear, region) label counts and all-zero features.

    Case ids are ``{gear}|{region}|{label}|{k}`` so tests can recover the cell.
    """
    proto = {g: make_record("proto", "unlabeled", "s", gear=g).features
             for g, _ in counts}
    recs = []
    for (gear, region), per_label in counts.items():
        for label, n in zip(("positive", "negative", "unlabeled"), per_label):
            for k in range(n):
                recs.append(VesselYearRecord(f"{gear}|{region}|{label}|{k}", 2015, LabelKind(label),
                                             f"src{k % 50}", gear, region, proto[gear]))
    return Dataset(DEFAULT_CATALOG, recs)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthConfig(n_total=300, n_sources=12, seed=3, n_certified_negatives=20))
