"""Data-preparation transforms: censored bin/cont pairing, covariate
placeholders for definition variables, residualization, wide-twin scaling,
and twin-data summaries.

All transforms are table-in/table-out and never change the row count.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .table import ColumnTable, ContinuousColumn, OrdinalColumn

PLACEHOLDER = 99999.0
BIN_LEVELS = ("<low>", "<high>")


class DataPrepError(ValueError):
    pass


# -- censored bin/cont pairing -------------------------------------------------


def make_bin_cont_pair(data: ColumnTable,
                       vars: Sequence[str],
                       censp: float,
                       suffixes: Sequence[str] | None = None) -> ColumnTable:
    """Split censored columns into an ordinal below-LOD indicator and a
    continuous remainder.

    For each source column: value < censp codes the bin column ``<low>`` and
    blanks the cont column; value >= censp blanks the bin column and copies
    the value; missing stays missing in both.  With suffixes, the bin/cont tag
    is inserted before the suffix (X1 + _T1 -> X1bin_T1).
    """
    targets: list[tuple[str, str, str]] = []
    for v in vars:
        if suffixes:
            for s in suffixes:
                targets.append((f"{v}{s}", f"{v}bin{s}", f"{v}cont{s}"))
        else:
            targets.append((v, f"{v}bin", f"{v}cont"))

    new_cols: dict[str, object] = {}
    for source, bin_name, cont_name in targets:
        if source not in data:
            raise DataPrepError(f"column {source!r} not found")
        if not data.is_continuous(source):
            raise DataPrepError(f"column {source!r} must be continuous")
        x = data.continuous(source)
        below = x < censp
        codes = np.where(below, 0, -1).astype(np.int64)
        codes[np.isnan(x)] = -1
        cont = np.where(np.isnan(x) | below, np.nan, x)
        new_cols[bin_name] = OrdinalColumn(BIN_LEVELS, codes)
        new_cols[cont_name] = ContinuousColumn(cont)
    return data.with_columns(new_cols)


# -- covariate placeholders ------------------------------------------------------


def update_covariate_placeholders(data: ColumnTable,
                                  covar: str,
                                  pheno: str,
                                  suffixes: Sequence[str] = ("_T1", "_T2")
                                  ) -> ColumnTable:
    """Insert the 99999 placeholder where a twin misses the covariate but the
    cotwin has it, blanking that twin's phenotype cell.

    Rows where every twin misses the covariate are left untouched; the
    likelihood layer drops them through its definition-variable precondition.
    Applying the transform twice equals applying it once.
    """
    if covar == pheno:
        raise DataPrepError("covar and pheno must name different variables")
    cov_cols, phe_cols = [], []
    for s in suffixes:
        c, p = f"{covar}{s}", f"{pheno}{s}"
        if c not in data or p not in data:
            raise DataPrepError(f"missing suffixed column {c!r} or {p!r}")
        if not data.is_continuous(c):
            raise DataPrepError(f"covariate column {c!r} must be continuous")
        cov_cols.append(data.continuous(c).copy())
        phe_cols.append(data[p])

    observed = [~np.isnan(c) for c in cov_cols]
    any_other = []
    for i in range(len(suffixes)):
        others = [observed[j] for j in range(len(suffixes)) if j != i]
        any_other.append(np.logical_or.reduce(others))

    out: dict[str, object] = {}
    for i, s in enumerate(suffixes):
        fill = ~observed[i] & any_other[i]
        cov = cov_cols[i]
        cov[fill] = PLACEHOLDER
        out[f"{covar}{s}"] = ContinuousColumn(cov)
        phe = phe_cols[i]
        if isinstance(phe, ContinuousColumn):
            vals = phe.values.copy()
            vals[fill] = np.nan
            out[f"{pheno}{s}"] = ContinuousColumn(vals)
        else:
            codes = phe.codes.copy()
            codes[fill] = -1
            out[f"{pheno}{s}"] = OrdinalColumn(phe.levels, codes)
    return data.with_columns(out)


@dataclass(frozen=True)
class PlaceholderWarning:
    row: int
    column: str
    message: str


def validate_placeholders(data: ColumnTable,
                          covar: str,
                          pheno: str,
                          suffixes: Sequence[str] = ("_T1", "_T2")
                          ) -> list[PlaceholderWarning]:
    """Flag rows where the 99999 placeholder coexists with an observed
    phenotype for the same twin (the coding error that otherwise surfaces as
    strange estimates downstream)."""
    out: list[PlaceholderWarning] = []
    for s in suffixes:
        c, p = f"{covar}{s}", f"{pheno}{s}"
        if c not in data or p not in data:
            raise DataPrepError(f"missing suffixed column {c!r} or {p!r}")
        cov = data.continuous(c)
        phe = data[p]
        phe_obs = (~np.isnan(phe.values) if isinstance(phe, ContinuousColumn)
                   else phe.codes >= 0)
        bad = np.where((cov == PLACEHOLDER) & phe_obs)[0]
        for r in bad:
            out.append(PlaceholderWarning(
                int(r), c,
                f"row {int(r)}: {c} holds the 99999 placeholder but {p} is "
                "observed; placeholder rows must not carry phenotype data"))
    return out


# -- residualization --------------------------------------------------------------

_POWER_RE = re.compile(r"^I\(\s*([A-Za-z._][A-Za-z0-9._]*)\s*\^\s*(\d+)\s*\)$")


@dataclass(frozen=True)
class _Term:
    kind: str               # main | power | interaction
    names: tuple[str, ...]
    power: int = 1

    def column_name(self) -> str:
        if self.kind == "power":
            return f"I({self.names[0]}^{self.power})"
        return ":".join(self.names)

    def values(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        if self.kind == "power":
            return columns[self.names[0]] ** self.power
        out = columns[self.names[0]].copy()
        for n in self.names[1:]:
            out = out * columns[n]
        return out


def parse_formula(formula: str) -> tuple[str, list[_Term]]:
    """Parse 'y ~ a + b*c + I(a^2)' into the DV name and design terms.

    Supported operators: '~' (regressed on), '+' (main effects), '*' (main
    effects plus interaction), and I(name^k) power terms.
    """
    if "~" not in formula:
        raise DataPrepError(f"formula {formula!r} lacks '~'")
    lhs, rhs = formula.split("~", 1)
    dv = lhs.strip()
    if not dv or not re.fullmatch(r"[A-Za-z._][A-Za-z0-9._]*", dv):
        raise DataPrepError(f"bad dependent variable in formula: {lhs.strip()!r}")
    terms: list[_Term] = []

    def push(t: _Term):
        if all(t != u for u in terms):
            terms.append(t)

    for chunk in _split_terms(rhs):
        chunk = chunk.strip()
        if not chunk:
            raise DataPrepError("empty term in formula")
        m = _POWER_RE.match(chunk)
        if m:
            push(_Term("power", (m.group(1),), int(m.group(2))))
            continue
        if "*" in chunk:
            factors = [f.strip() for f in chunk.split("*")]
            for f in factors:
                _check_name(f)
                push(_Term("main", (f,)))
            push(_Term("interaction", tuple(factors)))
            continue
        _check_name(chunk)
        push(_Term("main", (chunk,)))
    return dv, terms


def _split_terms(rhs: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in rhs:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "+" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _check_name(name: str) -> None:
    if not re.fullmatch(r"[A-Za-z._][A-Za-z0-9._]*", name):
        raise DataPrepError(f"unsupported term syntax: {name!r}")


def residualize(data: ColumnTable,
                var: str | Sequence[str] | None = None,
                covs: Sequence[str] | None = None,
                formula: str | None = None,
                suffixes: Sequence[str] | None = None) -> ColumnTable:
    """Replace dependent variables by their OLS residuals (intercept included).

    Accepts either ``var`` + ``covs`` or a ``formula``.  With suffixes, one
    pooled regression is fit across all suffix copies so every copy gets the
    same coefficients.  Rows with a missing regressor or DV keep their row but
    receive a missing residual.  Ordinal DVs are refused: definition variables
    moderate the latent scale instead of pre-regressing it out.
    """
    if formula is not None:
        if var is not None or covs is not None:
            raise DataPrepError("give either a formula or var/covs, not both")
        dv, terms = parse_formula(formula)
        dvs = [dv]
    else:
        if var is None or covs is None:
            raise DataPrepError("need var and covs (or a formula)")
        dvs = [var] if isinstance(var, str) else list(var)
        terms = [_Term("main", (c,)) for c in covs]

    updates: dict[str, ContinuousColumn] = {}
    for dv in dvs:
        dv_cols = [f"{dv}{s}" for s in suffixes] if suffixes else [dv]
        for col in dv_cols:
            if col not in data:
                raise DataPrepError(f"dependent column {col!r} not found")
            if not data.is_continuous(col):
                raise DataPrepError(
                    f"column {col!r} is ordinal; residualization is undefined on "
                    "the liability scale - use definition variables instead")
        term_cols: list[list[np.ndarray]] = []
        y_parts: list[np.ndarray] = []
        for idx, col in enumerate(dv_cols):
            suffix = suffixes[idx] if suffixes else ""
            colmap: dict[str, np.ndarray] = {}
            for t in terms:
                for n in t.names:
                    src = f"{n}{suffix}" if suffixes else n
                    if src not in data:
                        raise DataPrepError(f"covariate column {src!r} not found")
                    if not data.is_continuous(src):
                        raise DataPrepError(f"covariate {src!r} must be continuous")
                    colmap[n] = data.continuous(src)
            term_cols.append([t.values(colmap) for t in terms])
            y_parts.append(data.continuous(col))

        y = np.concatenate(y_parts)
        X_terms = [np.concatenate([tc[j] for tc in term_cols])
                   for j in range(len(terms))]

        keep_terms, dropped = [], []
        for t, xv in zip(terms, X_terms):
            finite = xv[~np.isnan(xv)]
            if finite.size and np.nanstd(xv) == 0.0:
                dropped.append(t.column_name())
            else:
                keep_terms.append((t, xv))
        if dropped:
            warnings.warn(f"dropping constant regressor(s) {dropped}; "
                          "fitting the remaining design", stacklevel=2)

        X = np.column_stack([np.ones_like(y)] + [xv for _, xv in keep_terms])
        complete = ~np.isnan(X).any(axis=1) & ~np.isnan(y)
        if complete.sum() < X.shape[1]:
            raise DataPrepError(f"too few complete rows to fit {dv!r}")
        beta, _, rank, _ = np.linalg.lstsq(X[complete], y[complete], rcond=None)
        if rank < X.shape[1]:
            raise DataPrepError(
                f"rank-deficient design for {dv!r}: covariates are collinear")
        resid = np.full_like(y, np.nan)
        resid[complete] = y[complete] - X[complete] @ beta

        offset = 0
        for col, part in zip(dv_cols, y_parts):
            updates[col] = ContinuousColumn(resid[offset:offset + len(part)].copy())
            offset += len(part)
    return data.with_columns(updates)


# -- wide-twin scaling -------------------------------------------------------------


def scale_wide_twin(data: ColumnTable,
                    base_names: Sequence[str],
                    suffixes: Sequence[str] = ("_T1", "_T2")) -> ColumnTable:
    """Standardize each base variable by the mean/SD pooled across its suffix
    copies, keeping twins on one scale (per-column scaling would erase
    within-pair mean differences)."""
    updates: dict[str, ContinuousColumn] = {}
    for base in base_names:
        cols = [f"{base}{s}" for s in suffixes]
        for c in cols:
            if c not in data:
                raise DataPrepError(f"column {c!r} not found")
            if not data.is_continuous(c):
                raise DataPrepError(f"column {c!r} is ordinal; scaling refused")
        pooled = np.concatenate([data.continuous(c) for c in cols])
        pooled = pooled[~np.isnan(pooled)]
        if pooled.size < 2:
            raise DataPrepError(f"{base!r}: not enough observed values to scale")
        mean = float(np.mean(pooled))
        sd = float(np.std(pooled, ddof=1))
        if sd == 0.0:
            raise DataPrepError(f"{base!r}: zero pooled variance")
        for c in cols:
            updates[c] = ContinuousColumn((data.continuous(c) - mean) / sd)
    return data.with_columns(updates)


# -- twin summaries -----------------------------------------------------------------

DEFAULT_MZ_LABELS = ("MZMM", "MZFF")
DEFAULT_DZ_LABELS = ("DZMM", "DZFF", "DZOS")


def summarize_twin_data(data: ColumnTable,
                        base_names: Sequence[str],
                        suffixes: Sequence[str] = ("_T1", "_T2"),
                        zygosity: str = "zygosity",
                        mz_labels: Sequence[str] = DEFAULT_MZ_LABELS,
                        dz_labels: Sequence[str] = DEFAULT_DZ_LABELS
                        ) -> pd.DataFrame:
    """Per-variable summary: pair count, pooled mean/SD, and MZ/DZ cross-twin
    Pearson correlations."""
    if zygosity not in data:
        raise DataPrepError(f"zygosity column {zygosity!r} not found")
    zyg = data[zygosity]
    labels = zyg.labels() if isinstance(zyg, OrdinalColumn) else \
        np.array([None if np.isnan(v) else str(v) for v in zyg.values], dtype=object)
    known = set(mz_labels) | set(dz_labels)
    present = {str(v) for v in labels if v is not None}
    unknown = present - known
    if unknown:
        raise DataPrepError(f"unknown zygosity label(s) {sorted(unknown)}; "
                            f"configure mz_labels/dz_labels")
    is_mz = np.array([v in set(mz_labels) for v in labels])
    is_dz = np.array([v in set(dz_labels) for v in labels])

    if len(suffixes) < 2:
        raise DataPrepError("need two twin suffixes for cross-twin correlations")
    s1, s2 = suffixes[0], suffixes[1]
    rows = []
    for base in base_names:
        c1, c2 = f"{base}{s1}", f"{base}{s2}"
        if c1 not in data or c2 not in data:
            raise DataPrepError(f"missing twin columns for {base!r}")
        x1, x2 = data.continuous(c1), data.continuous(c2)
        pooled = np.concatenate([x1, x2])
        pooled = pooled[~np.isnan(pooled)]
        complete = ~np.isnan(x1) & ~np.isnan(x2)
        rows.append({
            "variable": base,
            "n_pairs": int(complete.sum()),
            "mean": float(np.mean(pooled)) if pooled.size else np.nan,
            "sd": float(np.std(pooled, ddof=1)) if pooled.size > 1 else np.nan,
            "rMZ": _pearson(x1, x2, complete & is_mz),
            "rDZ": _pearson(x1, x2, complete & is_dz),
        })
    return pd.DataFrame(rows)


def _pearson(x1: np.ndarray, x2: np.ndarray, rows: np.ndarray) -> float:
    if rows.sum() < 2:
        return float("nan")
    a, b = x1[rows], x2[rows]
    sa, sb = np.std(a), np.std(b)
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])
