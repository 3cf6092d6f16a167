"""Loading, validation and standardization of longitudinal data.

A dataset is an ordered list of subjects, each with strictly increasing
observation times and one response value per time.  CSV input is long
format (one row per observation); subjects are ordered by id so the
in-memory dataset does not depend on the row order of the file.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SubjectRecord",
    "LongitudinalDataset",
    "StandardizationRecord",
    "load_csv",
    "save_csv",
    "standardize",
    "filter_min_visits",
]


@dataclass
class SubjectRecord:
    """One subject's observation times and responses."""

    sid: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.values.ndim != 1:
            raise ValueError(f"subject {self.sid!r}: times and values must be 1-d")
        if len(self.times) != len(self.values):
            raise ValueError(
                f"subject {self.sid!r}: {len(self.times)} times but "
                f"{len(self.values)} values"
            )
        if len(self.times) == 0:
            raise ValueError(f"subject {self.sid!r} has no observations")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError(
                f"subject {self.sid!r}: times must be strictly increasing"
            )

    @property
    def n_obs(self) -> int:
        return len(self.times)


@dataclass
class LongitudinalDataset:
    """Ordered collection of subjects."""

    subjects: list

    def __post_init__(self):
        ids = [s.sid for s in self.subjects]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate subject ids: {dup}")

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_obs(self) -> int:
        return sum(s.n_obs for s in self.subjects)

    def ids(self) -> list:
        return [s.sid for s in self.subjects]

    def pooled_times(self) -> np.ndarray:
        if not self.subjects:
            raise ValueError("dataset has no subjects")
        return np.concatenate([s.times for s in self.subjects])

    def pooled_values(self) -> np.ndarray:
        if not self.subjects:
            raise ValueError("dataset has no subjects")
        return np.concatenate([s.values for s in self.subjects])


@dataclass(frozen=True)
class StandardizationRecord:
    """Pooled mean and standard deviation used to scale responses."""

    mean: float
    scale: float

    def transform(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def inverse(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.mean

    def inverse_scale(self, values):
        """Map standardized spreads (e.g. standard errors) back."""
        return np.asarray(values, dtype=float) * self.scale


def load_csv(path, id_col: str = "id", time_col: str = "time",
             value_col: str = "value") -> LongitudinalDataset:
    """Read a long-format CSV into a dataset.

    Rows may appear in any order.  Duplicate (id, time) pairs and
    non-numeric fields are reported with their line number.
    """
    per_subject: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        for col in (id_col, time_col, value_col):
            if col not in reader.fieldnames:
                raise ValueError(
                    f"{path}: missing column {col!r} "
                    f"(found {reader.fieldnames})"
                )
        for lineno, row in enumerate(reader, start=2):
            sid = row[id_col]
            try:
                t = float(row[time_col])
                y = float(row[value_col])
            except (TypeError, ValueError):
                raise ValueError(
                    f"{path} line {lineno}: non-numeric time or value "
                    f"({row[time_col]!r}, {row[value_col]!r})"
                ) from None
            bucket = per_subject.setdefault(sid, {})
            if t in bucket:
                raise ValueError(
                    f"{path} line {lineno}: duplicate time {t} for "
                    f"subject {sid!r}"
                )
            bucket[t] = y

    if not per_subject:
        raise ValueError(f"{path}: no data rows")
    subjects = []
    for sid in sorted(per_subject):
        times = np.array(sorted(per_subject[sid]))
        values = np.array([per_subject[sid][t] for t in times])
        subjects.append(SubjectRecord(sid=sid, times=times, values=values))
    return LongitudinalDataset(subjects=subjects)


def save_csv(dataset: LongitudinalDataset, path, id_col: str = "id",
             time_col: str = "time", value_col: str = "value") -> None:
    """Write a dataset back to long-format CSV (round-trips with load)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([id_col, time_col, value_col])
        for subj in dataset.subjects:
            for t, y in zip(subj.times, subj.values):
                writer.writerow([subj.sid, repr(float(t)), repr(float(y))])


def standardize(dataset: LongitudinalDataset):
    """Center and scale pooled responses to mean 0, sd 1 (ddof=1).

    Returns the transformed dataset and the record needed to map fitted
    curves back to the original units.
    """
    pooled = dataset.pooled_values()
    if len(pooled) < 2:
        raise ValueError("standardization needs at least two observations")
    mean = float(np.mean(pooled))
    scale = float(np.std(pooled, ddof=1))
    if scale == 0.0:
        raise ValueError("responses are constant; cannot standardize")
    record = StandardizationRecord(mean=mean, scale=scale)
    subjects = [
        SubjectRecord(sid=s.sid, times=s.times.copy(),
                      values=record.transform(s.values))
        for s in dataset.subjects
    ]
    return LongitudinalDataset(subjects=subjects), record


def filter_min_visits(dataset: LongitudinalDataset,
                      min_visits: int) -> LongitudinalDataset:
    """Drop subjects with fewer than ``min_visits`` observations."""
    kept = [s for s in dataset.subjects if s.n_obs >= min_visits]
    if not kept:
        warnings.warn(
            f"no subjects have at least {min_visits} visits; "
            "result is empty",
            stacklevel=2,
        )
    return LongitudinalDataset(subjects=kept)
