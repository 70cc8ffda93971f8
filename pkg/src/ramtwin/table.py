"""Rectangular datasets with continuous and ordinal columns.

Missing values are ``nan`` in continuous columns and ``-1`` in ordinal code
arrays.  CSV input uses empty fields or the literal ``NA`` as missing markers;
non-numeric CSV columns become ordinal with levels in sorted order unless an
explicit level order is supplied.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

MISSING_CODE = -1


@dataclass(frozen=True)
class ContinuousColumn:
    values: np.ndarray  # float64, nan = missing

    @property
    def nrows(self) -> int:
        return len(self.values)

    def observed(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True)
class OrdinalColumn:
    levels: tuple[str, ...]
    codes: np.ndarray  # int64, -1 = missing

    @property
    def nrows(self) -> int:
        return len(self.codes)

    def observed(self) -> np.ndarray:
        return self.codes >= 0

    def labels(self) -> np.ndarray:
        out = np.empty(len(self.codes), dtype=object)
        for i, c in enumerate(self.codes):
            out[i] = self.levels[c] if c >= 0 else None
        return out


Column = ContinuousColumn | OrdinalColumn


class ColumnTable:
    """Named, row-aligned columns. Immutable by convention; transforms copy."""

    def __init__(self, columns: Mapping[str, Column]):
        self._columns: dict[str, Column] = dict(columns)
        lengths = {c.nrows for c in self._columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns differ in length: {sorted(lengths)}")
        self._nrows = lengths.pop() if lengths else 0
        for name, col in self._columns.items():
            if isinstance(col, OrdinalColumn):
                codes = col.codes
                bad = (codes >= len(col.levels)) | ((codes < 0) & (codes != MISSING_CODE))
                if bad.any():
                    raise ValueError(f"ordinal column {name!r} has out-of-range codes")

    @property
    def nrows(self) -> int:
        return self._nrows

    @property
    def names(self) -> list[str]:
        return list(self._columns)

    def __contains__(self, name: str) -> bool:
        return name in self._columns

    def __getitem__(self, name: str) -> Column:
        return self._columns[name]

    def column_names(self) -> list[str]:
        return list(self._columns)

    def is_continuous(self, name: str) -> bool:
        return isinstance(self._columns[name], ContinuousColumn)

    def is_ordinal(self, name: str) -> bool:
        return isinstance(self._columns[name], OrdinalColumn)

    def continuous(self, name: str) -> np.ndarray:
        col = self._columns[name]
        if not isinstance(col, ContinuousColumn):
            raise TypeError(f"column {name!r} is not continuous")
        return col.values

    def ordinal(self, name: str) -> OrdinalColumn:
        col = self._columns[name]
        if not isinstance(col, OrdinalColumn):
            raise TypeError(f"column {name!r} is not ordinal")
        return col

    def with_columns(self, updates: Mapping[str, Column]) -> "ColumnTable":
        cols = dict(self._columns)
        cols.update(updates)
        return ColumnTable(cols)

    def select(self, names: Iterable[str]) -> "ColumnTable":
        return ColumnTable({n: self._columns[n] for n in names})

    def take(self, rows: np.ndarray) -> "ColumnTable":
        out: dict[str, Column] = {}
        for name, col in self._columns.items():
            if isinstance(col, ContinuousColumn):
                out[name] = ContinuousColumn(col.values[rows])
            else:
                out[name] = OrdinalColumn(col.levels, col.codes[rows])
        return ColumnTable(out)

    # -- conversion ---------------------------------------------------------

    @staticmethod
    def from_dataframe(df: pd.DataFrame,
                       ordinal_levels: Mapping[str, Sequence[str]] | None = None
                       ) -> "ColumnTable":
        ordinal_levels = dict(ordinal_levels or {})
        cols: dict[str, Column] = {}
        for name in df.columns:
            s = df[name]
            if name in ordinal_levels:
                levels = tuple(str(v) for v in ordinal_levels[name])
                cols[name] = _ordinal_from_strings(s, levels)
            elif pd.api.types.is_numeric_dtype(s):
                cols[name] = ContinuousColumn(s.to_numpy(dtype=np.float64, na_value=np.nan))
            else:
                observed = s.dropna().astype(str)
                levels = tuple(sorted(observed.unique()))
                cols[name] = _ordinal_from_strings(s, levels)
        return ColumnTable(cols)

    def to_dataframe(self) -> pd.DataFrame:
        data = {}
        for name, col in self._columns.items():
            if isinstance(col, ContinuousColumn):
                data[name] = col.values
            else:
                data[name] = col.labels()
        return pd.DataFrame(data)

    @staticmethod
    def from_csv(path_or_buf, ordinal_levels: Mapping[str, Sequence[str]] | None = None
                 ) -> "ColumnTable":
        df = pd.read_csv(path_or_buf, na_values=["NA"], keep_default_na=True)
        return ColumnTable.from_dataframe(df, ordinal_levels)

    def to_csv(self, path_or_buf=None) -> str | None:
        df = self.to_dataframe()
        return df.to_csv(path_or_buf, index=False, na_rep="NA")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    # JSON wire format used by the service layer.
    def to_json_dict(self) -> dict:
        columns = []
        for name, col in self._columns.items():
            if isinstance(col, ContinuousColumn):
                vals = [None if np.isnan(v) else float(v) for v in col.values]
                columns.append({"name": name, "kind": "continuous", "values": vals})
            else:
                codes = [None if c < 0 else int(c) for c in col.codes]
                columns.append({"name": name, "kind": "ordinal",
                                "levels": list(col.levels), "codes": codes})
        return {"nrows": self.nrows, "columns": columns}

    @staticmethod
    def from_json_dict(doc: Mapping) -> "ColumnTable":
        cols: dict[str, Column] = {}
        for entry in doc["columns"]:
            name = entry["name"]
            if entry["kind"] == "continuous":
                vals = np.array([np.nan if v is None else float(v) for v in entry["values"]],
                                dtype=np.float64)
                cols[name] = ContinuousColumn(vals)
            elif entry["kind"] == "ordinal":
                codes = np.array([MISSING_CODE if c is None else int(c) for c in entry["codes"]],
                                 dtype=np.int64)
                cols[name] = OrdinalColumn(tuple(entry["levels"]), codes)
            else:
                raise ValueError(f"unknown column kind {entry['kind']!r}")
        return ColumnTable(cols)

    def __repr__(self) -> str:
        return f"ColumnTable({self.nrows} rows, columns={self.names})"


def _ordinal_from_strings(s: pd.Series, levels: tuple[str, ...]) -> OrdinalColumn:
    index = {lev: i for i, lev in enumerate(levels)}
    codes = np.full(len(s), MISSING_CODE, dtype=np.int64)
    for i, v in enumerate(s):
        if pd.isna(v):
            continue
        key = str(v)
        if key not in index:
            raise ValueError(f"value {key!r} not among declared levels {levels}")
        codes[i] = index[key]
    return OrdinalColumn(levels, codes)
