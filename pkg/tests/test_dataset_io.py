"""Corpus parsing, scaling and grouped-fold tests."""

import io
import math

import numpy as np
import pytest

from pdadsv.dataset_io import (
    Dataset,
    Record,
    apply_scaler,
    dataset_fingerprint,
    fit_scaler,
    grouped_folds,
    parse_dataset_csv,
)
from pdadsv.errors import (
    EmptyDataset,
    MissingColumn,
    NonNumericValue,
    ReplicationMismatch,
    TooFewSubjects,
)
from pdadsv.signal_features import FEATURE_NAMES

from .synth import make_corpus_csv


def small_csv(rows):
    header = "ID,Recording,Status," + ",".join(n.upper() for n in FEATURE_NAMES)
    return io.StringIO("\n".join([header] + rows) + "\n")


def row(subject, rep, label, base=0.0):
    feats = ",".join(f"{base + i * 0.1:.3f}" for i in range(32))
    return f"{subject},{rep},{label},{feats}"


def make_dataset(n_subjects, labels=None, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for s in range(n_subjects):
        label = labels[s] if labels is not None else s % 2
        for rep in range(1, 4):
            records.append(Record(f"S{s}", rep, rng.normal(size=32), label))
    return Dataset(records)


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def test_header_only_is_empty():
    with pytest.raises(EmptyDataset):
        parse_dataset_csv(small_csv([]))


def test_two_subjects_six_records():
    ds = parse_dataset_csv(small_csv(
        [row("A", r, 0) for r in (1, 2, 3)] + [row("B", r, 1) for r in (1, 2, 3)]))
    assert len(ds) == 6
    assert ds.subjects() == ["A", "B"]
    assert list(ds.labels()) == [0, 0, 0, 1, 1, 1]
    assert ds.records[0].replication_idx == 1


def test_incomplete_subject_strict_raises():
    with pytest.raises(ReplicationMismatch):
        parse_dataset_csv(small_csv(
            [row("A", 1, 0), row("A", 2, 0)] + [row("B", r, 1) for r in (1, 2, 3)]))


def test_incomplete_subject_lenient_drops():
    with pytest.warns(UserWarning):
        ds = parse_dataset_csv(small_csv(
            [row("A", 1, 0), row("A", 2, 0)] + [row("B", r, 1) for r in (1, 2, 3)]),
            strict=False)
    assert ds.subjects() == ["B"]


def test_missing_column_named():
    header = "ID,Recording,Status," + ",".join(n.upper() for n in FEATURE_NAMES[:-1])
    stream = io.StringIO(header + "\n")
    with pytest.raises(MissingColumn, match="GNE"):
        parse_dataset_csv(stream)


def test_non_numeric_cell_reports_row_and_column():
    bad = row("A", 1, 0).replace("0.000", "oops", 1)
    with pytest.raises(NonNumericValue) as exc:
        parse_dataset_csv(small_csv([bad, row("A", 2, 0), row("A", 3, 0)]))
    assert exc.value.row == 1


def test_label_must_be_binary():
    with pytest.raises(NonNumericValue):
        parse_dataset_csv(small_csv(
            [row("A", 1, 2), row("A", 2, 2), row("A", 3, 2)]))


def test_extra_columns_ignored_and_uci_names_matched():
    ds = parse_dataset_csv(io.StringIO(make_corpus_csv(n_subjects=4, extra_columns=True)))
    assert len(ds) == 12
    assert ds.feature_names == list(FEATURE_NAMES)


def test_replication_column_optional():
    header = "ID,Status," + ",".join(n.upper() for n in FEATURE_NAMES)
    rows = [f"A,0,{','.join('1.0' for _ in range(32))}" for _ in range(3)]
    ds = parse_dataset_csv(io.StringIO("\n".join([header] + rows) + "\n"),
                           mapping={"replication": ""})
    assert [r.replication_idx for r in ds.records] == [1, 2, 3]


# --------------------------------------------------------------------------
# scaler
# --------------------------------------------------------------------------

def test_constant_column_scales_to_zero():
    ds = make_dataset(4)
    for r in ds.records:
        r.features[5] = 7.5
    params = fit_scaler(ds)
    scaled = np.array([apply_scaler(r.features, params) for r in ds.records])
    assert np.all(scaled[:, 5] == 0.0)
    assert params.std[5] == 1.0


def test_scaled_columns_standardized():
    ds = make_dataset(10, seed=3)
    params = fit_scaler(ds)
    scaled = np.array([apply_scaler(r.features, params) for r in ds.records])
    assert np.max(np.abs(scaled.mean(axis=0))) < 1e-9
    assert np.max(np.abs(scaled.var(axis=0) - 1.0)) < 1e-9


def test_scaler_roundtrip():
    ds = make_dataset(6, seed=4)
    params = fit_scaler(ds)
    v = ds.records[7].features
    back = apply_scaler(v, params) * params.std + params.mean
    assert np.max(np.abs(back - v)) < 1e-12


def test_scaler_empty_raises():
    with pytest.raises(EmptyDataset):
        fit_scaler(Dataset([]))


# --------------------------------------------------------------------------
# grouped folds
# --------------------------------------------------------------------------

def test_leave_one_subject_out():
    ds = make_dataset(8)
    folds = grouped_folds(ds, 8, seed=1)
    assert len(folds) == 8
    for f in folds:
        assert len(f) == 3
        assert len({ds.records[i].subject_id for i in f}) == 1


def test_no_subject_straddles_folds():
    ds = make_dataset(11)
    folds = grouped_folds(ds, 4, seed=2)
    seen = {}
    for fold_no, fold in enumerate(folds):
        for i in fold:
            sid = ds.records[i].subject_id
            assert seen.setdefault(sid, fold_no) == fold_no


def test_folds_partition_all_records():
    ds = make_dataset(9)
    folds = grouped_folds(ds, 3, seed=5)
    joined = np.sort(np.concatenate(folds))
    assert np.array_equal(joined, np.arange(len(ds)))


def test_class_balance_by_enumeration():
    # oracle: per fold and class, subject counts must be floor or ceil of n_c/k
    for n_subjects in range(4, 21):
        for k in (2, 3, 4):
            if k > n_subjects:
                continue
            labels = [1 if i < (n_subjects + 1) // 2 else 0 for i in range(n_subjects)]
            ds = make_dataset(n_subjects, labels=labels, seed=n_subjects)
            folds = grouped_folds(ds, k, seed=7)
            for cls in (0, 1):
                n_c = sum(1 for v in labels if v == cls)
                per_fold = []
                for fold in folds:
                    subs = {ds.records[i].subject_id for i in fold
                            if ds.records[i].label == cls}
                    per_fold.append(len(subs))
                assert sum(per_fold) == n_c
                assert all(v in (math.floor(n_c / k), math.ceil(n_c / k))
                           for v in per_fold)


def test_folds_deterministic():
    ds = make_dataset(12)
    a = grouped_folds(ds, 5, seed=9)
    b = grouped_folds(ds, 5, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = grouped_folds(ds, 5, seed=10)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_too_few_subjects():
    ds = make_dataset(3)
    with pytest.raises(TooFewSubjects):
        grouped_folds(ds, 4, seed=0)
    with pytest.raises(TooFewSubjects):
        grouped_folds(ds, 1, seed=0)


def test_fingerprint_changes_with_content():
    a = make_dataset(4, seed=0)
    b = make_dataset(4, seed=1)
    assert dataset_fingerprint(a) == dataset_fingerprint(a)
    assert dataset_fingerprint(a) != dataset_fingerprint(b)
