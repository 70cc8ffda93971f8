"""Threshold parameterization for ordinal manifests.

Each ordinal column with L levels carries L-1 entries: a base threshold
followed by strictly positive increments ("deviations"), so the cumulative
thresholds are increasing by construction whenever the increments stay
positive.  Entries are (value, free, label) like any other model cell; fixing
every entry pins the column entirely (the censored-biomarker case, where the
single threshold sits at the assay's limit of detection).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np

INCREMENT_LOWER_BOUND = 1e-4


@dataclass(frozen=True)
class ThresholdEntry:
    value: float
    free: bool
    label: str | None = None


@dataclass(frozen=True)
class ColumnThresholds:
    """Base + increments for one ordinal column."""

    entries: tuple[ThresholdEntry, ...]

    @property
    def nlevels(self) -> int:
        return len(self.entries) + 1

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries], dtype=float)

    def cumulative(self, values: np.ndarray | None = None) -> np.ndarray:
        v = self.values() if values is None else np.asarray(values, dtype=float)
        return np.cumsum(v)

    @staticmethod
    def free_defaults(column: str, nlevels: int, label_base: str | None = None,
                      base_start: float = 0.0, increment_start: float = 1.0
                      ) -> "ColumnThresholds":
        base = label_base if label_base is not None else column
        entries = [ThresholdEntry(base_start, True, f"thr1_{base}")]
        for j in range(2, nlevels):
            entries.append(ThresholdEntry(increment_start, True, f"thr{j}_{base}"))
        return ColumnThresholds(tuple(entries))

    @staticmethod
    def fixed(cumulative: Sequence[float]) -> "ColumnThresholds":
        cum = np.asarray(cumulative, dtype=float)
        if len(cum) == 0:
            raise ValueError("need at least one threshold")
        if np.any(np.diff(cum) <= 0):
            raise ValueError("cumulative thresholds must be strictly increasing")
        vals = np.concatenate([[cum[0]], np.diff(cum)])
        return ColumnThresholds(tuple(ThresholdEntry(float(v), False) for v in vals))


@dataclass(frozen=True)
class ThresholdSet:
    columns: dict[str, ColumnThresholds] = field(default_factory=dict)

    def __contains__(self, column: str) -> bool:
        return column in self.columns

    def __getitem__(self, column: str) -> ColumnThresholds:
        return self.columns[column]

    def items(self) -> Iterator[tuple[str, ColumnThresholds]]:
        return iter(self.columns.items())

    def with_column(self, column: str, thr: ColumnThresholds) -> "ThresholdSet":
        cols = dict(self.columns)
        cols[column] = thr
        return ThresholdSet(cols)

    def with_fixed(self, fixed: Mapping[str, Sequence[float]]) -> "ThresholdSet":
        """Replace columns by fully fixed thresholds at the given cumulative values."""
        out = self
        for col, cum in fixed.items():
            existing = self.columns.get(col)
            if existing is not None and len(cum) != len(existing.entries):
                raise ValueError(
                    f"{col}: expected {len(existing.entries)} thresholds, got {len(cum)}")
            out = out.with_column(col, ColumnThresholds.fixed(cum))
        return out

    def free_entry_count(self) -> int:
        return sum(e.free for _, t in self.items() for e in t.entries)


def empty_thresholds() -> ThresholdSet:
    return ThresholdSet({})
