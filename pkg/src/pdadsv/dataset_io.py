"""Corpus ingestion, feature standardization and subject-grouped folds.

Recordings come in triples (three repetitions per subject), so every split in
this module operates on whole subjects: no subject's recordings may straddle a
train/test boundary.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    NonNumericValue,
    ReplicationMismatch,
    TooFewSubjects,
)
from .signal_features import FEATURE_NAMES

REPLICATIONS_PER_SUBJECT = 3

# Column names used by the public replicated-acoustic-features corpus. Override
# any entry with a key=value mapping file when ingesting differently shaped CSVs.
DEFAULT_COLUMN_MAPPING = {
    "subject": "ID",
    "replication": "Recording",
    "label": "Status",
    **{f"mfcc{i}": f"MFCC{i}" for i in range(13)},
    **{f"delta{i}": f"Delta{i}" for i in range(13)},
    "hnr05": "HNR05",
    "hnr15": "HNR15",
    "hnr25": "HNR25",
    "hnr35": "HNR35",
    "hnr38": "HNR38",
    "gne": "GNE",
}


@dataclass(frozen=True)
class Record:
    subject_id: str
    replication_idx: int
    features: np.ndarray  # 32 floats
    label: int            # 0 healthy, 1 positive


@dataclass
class Dataset:
    records: list
    feature_names: list = field(default_factory=lambda: list(FEATURE_NAMES))

    def __len__(self):
        return len(self.records)

    def feature_matrix(self) -> np.ndarray:
        return np.array([r.features for r in self.records])

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=int)

    def subject_ids(self) -> list:
        return [r.subject_id for r in self.records]

    def subjects(self) -> list:
        """Distinct subject ids in first-appearance order."""
        seen = {}
        for r in self.records:
            seen.setdefault(r.subject_id, None)
        return list(seen)

    def subset(self, indices) -> "Dataset":
        return Dataset([self.records[i] for i in indices], list(self.feature_names))


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray  # floored so every entry is positive


def parse_dataset_csv(stream, mapping=None, strict=True) -> Dataset:
    """Read a labeled feature CSV into a Dataset.

    `mapping` assigns CSV column names to the roles subject/replication/label
    and the 32 canonical feature names; unmapped columns are ignored. Header
    matching is exact first, then case-insensitive. When the replication
    column is absent (mapped to ""), repetitions are numbered by order of
    appearance within each subject.

    Strict mode demands exactly three same-label recordings per subject;
    lenient mode drops offending subjects with a warning.
    """
    mapping = {**DEFAULT_COLUMN_MAPPING, **(mapping or {})}
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("no header row")
    header = [h.strip() for h in header]
    lower = {h.lower(): i for i, h in reversed(list(enumerate(header)))}
    exact = {h: i for i, h in reversed(list(enumerate(header)))}

    def col_index(role):
        name = mapping[role]
        if name == "":
            return None
        if name in exact:
            return exact[name]
        if name.lower() in lower:
            return lower[name.lower()]
        return None

    roles = ["subject", "label"] + list(FEATURE_NAMES)
    indices = {role: col_index(role) for role in roles}
    missing = [mapping[r] for r in roles if indices[r] is None]
    if missing:
        raise MissingColumn(f"columns not found in header: {', '.join(missing)}")
    repl_idx = col_index("replication")

    records = []
    counts = {}
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        subject = row[indices["subject"]].strip()

        def number(role):
            cell = row[indices[role]].strip()
            try:
                return float(cell)
            except ValueError:
                raise NonNumericValue(row_no, mapping[role])

        label_val = number("label")
        if label_val not in (0.0, 1.0):
            raise NonNumericValue(row_no, mapping["label"])
        feats = np.array([number(name) for name in FEATURE_NAMES])
        if repl_idx is not None:
            cell = row[repl_idx].strip()
            try:
                replication = int(float(cell))
            except ValueError:
                raise NonNumericValue(row_no, mapping["replication"])
        else:
            replication = counts.get(subject, 0) + 1
        counts[subject] = counts.get(subject, 0) + 1
        records.append(Record(subject, replication, feats, int(label_val)))

    if not records:
        raise EmptyDataset("no data rows")

    by_subject = {}
    for r in records:
        by_subject.setdefault(r.subject_id, []).append(r)
    bad = {
        s: rs for s, rs in by_subject.items()
        if len(rs) != REPLICATIONS_PER_SUBJECT or len({x.label for x in rs}) != 1
    }
    if bad:
        if strict:
            subject, rs = next(iter(bad.items()))
            raise ReplicationMismatch(subject, len(rs))
        warnings.warn(
            f"dropping {len(bad)} subject(s) without 3 consistent recordings: "
            f"{sorted(bad)}", stacklevel=2)
        records = [r for r in records if r.subject_id not in bad]
        if not records:
            raise EmptyDataset("no subjects left after dropping invalid ones")
    return Dataset(records)


def fit_scaler(ds: Dataset) -> ScalerParams:
    """Column-wise z-score parameters; near-constant columns get unit std so
    they scale to exactly zero."""
    if len(ds) == 0:
        raise EmptyDataset("cannot fit scaler on empty dataset")
    x = ds.feature_matrix()
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return ScalerParams(mean=mean, std=std)


def apply_scaler(values: np.ndarray, params: ScalerParams) -> np.ndarray:
    return (np.asarray(values, dtype=float) - params.mean) / params.std


def grouped_folds(ds: Dataset, k: int, seed: int) -> list:
    """k disjoint test-index sets grouping by subject and stratifying by label.

    Subjects are shuffled per class with the seed, then dealt round-robin onto
    folds with a cursor that continues across classes, so per-class fold counts
    differ by at most one and k == n_subjects degenerates to
    leave-one-subject-out.
    """
    subjects = ds.subjects()
    if k < 2 or k > len(subjects):
        raise TooFewSubjects(f"need 2 <= k <= {len(subjects)} subjects, got k={k}")
    label_of = {r.subject_id: r.label for r in ds.records}
    rng = np.random.default_rng(seed)
    assignment = {}
    cursor = 0
    for cls in (0, 1):
        members = sorted(s for s in subjects if label_of[s] == cls)
        for i in rng.permutation(len(members)):
            assignment[members[i]] = cursor % k
            cursor += 1
    folds = [[] for _ in range(k)]
    for idx, r in enumerate(ds.records):
        folds[assignment[r.subject_id]].append(idx)
    return [np.array(f, dtype=int) for f in folds]


def dataset_fingerprint(ds: Dataset) -> str:
    """Stable content hash used to stamp trained model bundles."""
    import hashlib
    h = hashlib.sha256()
    for r in ds.records:
        h.update(r.subject_id.encode())
        h.update(str(r.replication_idx).encode())
        h.update(str(r.label).encode())
        h.update(np.ascontiguousarray(r.features).tobytes())
    return h.hexdigest()
