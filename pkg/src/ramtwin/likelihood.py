"""Full-information likelihood for grouped RAM models.

Each data row contributes the -2 log likelihood of its observed subvector:
the expected covariance is trimmed to the observed entries, continuous parts
use the multivariate normal density, ordinal parts the rectangle probability
of the conditional (on observed continuous) normal over threshold intervals,
and joint rows multiply density by conditional probability.

Rows are bucketed by (continuous pattern, ordinal pattern, definition-variable
values).  Buckets without ordinals or definition variables are reduced to
sufficient statistics at bind time, so the per-evaluation cost does not grow
with the row count; definition-variable buckets re-materialize the moment
matrices per distinct row, recomputing (I - A)^-1 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from .mvn import mvn_rectangle, NotPositiveDefiniteError, RectangleError
from .ram import (GroupedModel, ModelError, ParameterVector, RamModel,
                  SingularModelError, moments_from_matrices, pack_parameters)
from .table import ColumnTable, ContinuousColumn, OrdinalColumn
from .thresholds import ThresholdSet

LN_2PI = math.log(2.0 * math.pi)
INF = float("inf")

STATUS_OK = "ok"
STATUS_NON_PD = "non-pd-covariance"
STATUS_THRESHOLD = "threshold-order"
STATUS_SINGULAR = "singular-structure"


class LikelihoodError(ModelError):
    pass


class ThresholdOrderError(LikelihoodError):
    pass


@dataclass
class RowCounts:
    used: int = 0
    dropped_missing_defvar: int = 0
    dropped_empty: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_missing_defvar + self.dropped_empty


@dataclass
class _Bucket:
    cont_idx: np.ndarray          # indices into manifest order
    ord_idx: np.ndarray
    defrow: tuple[float, ...] | None
    n: int
    # sufficient statistics (continuous-only buckets)
    mean: np.ndarray | None = None
    scatter: np.ndarray | None = None    # sum of outer products about the mean
    # raw data (buckets with ordinals)
    X: np.ndarray | None = None          # n x len(cont_idx)
    codes: np.ndarray | None = None      # unique code combos, u x len(ord_idx)
    code_counts: np.ndarray | None = None
    code_rows: list[np.ndarray] | None = None  # row indices of X per combo


class _GroupState:
    """Bound data, pattern buckets, and theta-injection maps for one group."""

    def __init__(self, name: str, model: RamModel, data: ColumnTable,
                 thresholds: ThresholdSet, theta_index: Mapping[str, int]):
        self.name = name
        self.model = model
        self.counts = RowCounts()

        manifests = model.manifests
        for col in manifests:
            if col not in data:
                raise LikelihoodError(
                    f"group {name!r}: data lacks manifest column {col!r}")
        for col in model.defvars:
            if col not in data:
                raise LikelihoodError(
                    f"group {name!r}: data lacks definition variable column {col!r}")
            if not data.is_continuous(col):
                raise LikelihoodError(
                    f"group {name!r}: definition variable {col!r} must be numeric")

        self.ord_cols = [c for c in manifests if data.is_ordinal(c)]
        for col in self.ord_cols:
            if col not in thresholds:
                raise LikelihoodError(
                    f"group {name!r}: ordinal manifest {col!r} has no thresholds")
            nlev = len(data.ordinal(col).levels)
            if thresholds[col].nlevels != nlev:
                raise LikelihoodError(
                    f"group {name!r}: {col!r} has {nlev} levels but "
                    f"{thresholds[col].nlevels - 1}+1 thresholds")

        n = data.nrows
        k = len(manifests)
        values = np.full((n, k), np.nan)
        codes = np.full((n, k), -1, dtype=np.int64)
        is_ord = np.zeros(k, dtype=bool)
        for j, col in enumerate(manifests):
            c = data[col]
            if isinstance(c, ContinuousColumn):
                values[:, j] = c.values
            else:
                codes[:, j] = c.codes
                is_ord[j] = True
        obs = np.where(is_ord[None, :], codes >= 0, ~np.isnan(values))
        self.is_ord = is_ord

        defmat = None
        if model.defvars:
            defmat = np.column_stack([data.continuous(c) for c in model.defvars])

        # threshold injection: per ordinal manifest, base values + theta slots
        self.thr_base: dict[str, np.ndarray] = {}
        self.thr_slots: dict[str, list[tuple[int, int]]] = {}
        for col in self.ord_cols:
            entries = thresholds[col].entries
            self.thr_base[col] = np.array([e.value for e in entries])
            slots = []
            for pos, e in enumerate(entries):
                if e.free and e.label in theta_index:
                    slots.append((pos, theta_index[e.label]))
            self.thr_slots[col] = slots

        # theta injection maps for A, S, M
        m = model
        self.A0 = m.A_val.copy()
        self.S0 = m.S_val.copy()
        self.M0 = m.M_val.copy()
        a_ij, a_t, s_ij, s_t, m_i, m_t = [], [], [], [], [], []
        nv = m.nvar
        for i in range(nv):
            for j in range(nv):
                lab = m.A_lab[i, j]
                if m.A_free[i, j] and lab in theta_index:
                    a_ij.append((i, j)); a_t.append(theta_index[lab])
                lab = m.S_lab[i, j]
                if m.S_free[i, j] and lab in theta_index:
                    s_ij.append((i, j)); s_t.append(theta_index[lab])
            lab = m.M_lab[i]
            if m.M_free[i] and lab in theta_index:
                m_i.append(i); m_t.append(theta_index[lab])
        self.a_pos = (np.array([x for x, _ in a_ij], dtype=int),
                      np.array([y for _, y in a_ij], dtype=int), np.array(a_t, dtype=int))
        self.s_pos = (np.array([x for x, _ in s_ij], dtype=int),
                      np.array([y for _, y in s_ij], dtype=int), np.array(s_t, dtype=int))
        self.m_pos = (np.array(m_i, dtype=int), np.array(m_t, dtype=int))

        # definition-cell injection (per defvar column -> positions)
        self.def_cells: list[tuple[int, list]] = []
        for di, col in enumerate(model.defvars):
            self.def_cells.append((di, model.def_labeled_cells(col)))

        # -- bucket rows ------------------------------------------------------
        keep_rows = []
        for r in range(n):
            if defmat is not None and np.isnan(defmat[r]).any():
                self.counts.dropped_missing_defvar += 1
                continue
            if not obs[r].any():
                self.counts.dropped_empty += 1
                continue
            keep_rows.append(r)
        self.counts.used = len(keep_rows)

        buckets: dict[tuple, list[int]] = {}
        for r in keep_rows:
            cont_i = tuple(np.where(obs[r] & ~is_ord)[0])
            ord_i = tuple(np.where(obs[r] & is_ord)[0])
            defkey = tuple(defmat[r]) if defmat is not None else None
            buckets.setdefault((cont_i, ord_i, defkey), []).append(r)

        self.buckets: list[_Bucket] = []
        for (cont_i, ord_i, defkey), rows in buckets.items():
            rows = np.array(rows, dtype=int)
            ci = np.array(cont_i, dtype=int)
            oi = np.array(ord_i, dtype=int)
            b = _Bucket(ci, oi, defkey, len(rows))
            if len(oi) == 0:
                X = values[np.ix_(rows, ci)]
                b.mean = X.mean(axis=0)
                D = X - b.mean
                b.scatter = D.T @ D
            else:
                b.X = values[np.ix_(rows, ci)] if len(ci) else np.zeros((len(rows), 0))
                O = codes[np.ix_(rows, oi)]
                uniq, inv = np.unique(O, axis=0, return_inverse=True)
                b.codes = uniq
                b.code_counts = np.bincount(inv, minlength=len(uniq))
                b.code_rows = [np.where(inv == u)[0] for u in range(len(uniq))]
            self.buckets.append(b)

        self.ord_positions = {col: j for j, col in enumerate(manifests) if is_ord[j]}

    # -- evaluation ---------------------------------------------------------

    def materialize(self, theta: np.ndarray, defrow: tuple[float, ...] | None):
        A = self.A0.copy()
        S = self.S0.copy()
        M = self.M0.copy()
        ai, aj, at = self.a_pos
        if len(at):
            A[ai, aj] = theta[at]
        si, sj, st = self.s_pos
        if len(st):
            S[si, sj] = theta[st]
            S[sj, si] = theta[st]
        mi, mt = self.m_pos
        if len(mt):
            M[mi] = theta[mt]
        if defrow is not None:
            for di, cells in self.def_cells:
                v = defrow[di]
                for mat, i, j in cells:
                    if mat == "A":
                        A[i, j] = v
                    elif mat == "S":
                        S[i, j] = S[j, i] = v
                    else:
                        M[i] = v
        return A, S, M

    def cumulative_thresholds(self, theta: np.ndarray) -> dict[int, np.ndarray]:
        """Manifest index -> increasing cumulative thresholds; raises on disorder."""
        out = {}
        for col in self.ord_cols:
            devs = self.thr_base[col].copy()
            for pos, t in self.thr_slots[col]:
                devs[pos] = theta[t]
            if len(devs) > 1 and np.any(devs[1:] <= 0.0):
                raise ThresholdOrderError(
                    f"group {self.name!r}: non-positive threshold increment for {col!r}")
            out[self.ord_positions[col]] = np.cumsum(devs)
        return out


def _neg2ll_sufficient(mu, sigma, n, mean, scatter) -> float:
    k = len(mu)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("trimmed covariance not positive definite")
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    Z = scipy.linalg.solve_triangular(L, (mean - mu), lower=True, check_finite=False)
    quad_mean = float(Z @ Z)
    W = scipy.linalg.solve_triangular(L, scatter, lower=True, check_finite=False)
    W = scipy.linalg.solve_triangular(L, W.T, lower=True, check_finite=False)
    trace = float(np.trace(W))
    return n * (k * LN_2PI + logdet + quad_mean) + trace


def _code_bounds(codes: np.ndarray, cum_list: list[np.ndarray]):
    """Rows of lower/upper rectangle bounds from ordinal codes."""
    n, ko = codes.shape
    lower = np.full((n, ko), -np.inf)
    upper = np.full((n, ko), np.inf)
    for j in range(ko):
        cum = cum_list[j]
        cj = codes[:, j]
        has_low = cj > 0
        lower[has_low, j] = cum[cj[has_low] - 1]
        has_up = cj < len(cum)
        upper[has_up, j] = cum[cj[has_up]]
    return lower, upper


def _rectangle_many(mu_rows: np.ndarray, sigma: np.ndarray,
                    lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Rectangle probabilities per row; 1-d vectorized, higher dims looped."""
    n, ko = lower.shape
    if ko == 1:
        var = sigma[0, 0]
        if var <= 0:
            raise NotPositiveDefiniteError("conditional ordinal variance not positive")
        sd = math.sqrt(var)
        lo = (lower[:, 0] - mu_rows[:, 0]) / sd
        hi = (upper[:, 0] - mu_rows[:, 0]) / sd
        return ndtr(hi) - ndtr(lo)
    out = np.empty(n)
    for r in range(n):
        out[r] = mvn_rectangle(mu_rows[r], sigma, lower[r], upper[r])
    return out


class FimlEvaluator:
    """Reusable -2 log-likelihood evaluator over packed parameter values."""

    def __init__(self, gm: GroupedModel):
        for gname, grp in gm.groups.items():
            if grp.data is None:
                raise LikelihoodError(f"group {gname!r} has no bound dataset")
        self.theta0 = pack_parameters(gm)
        index = {lab: k for k, lab in enumerate(self.theta0.labels)}
        self.groups = [
            _GroupState(gname, grp.model, grp.data, grp.thresholds, index)
            for gname, grp in gm.groups.items()
        ]
        self.last_status = STATUS_OK

    @property
    def row_counts(self) -> dict[str, RowCounts]:
        return {g.name: g.counts for g in self.groups}

    def value(self, theta: np.ndarray) -> float:
        self.last_status = STATUS_OK
        theta = np.asarray(theta, dtype=float)
        parts: list[float] = []
        try:
            for g in self.groups:
                parts.append(self._group_value(g, theta))
        except NotPositiveDefiniteError:
            self.last_status = STATUS_NON_PD
            return INF
        except ThresholdOrderError:
            self.last_status = STATUS_THRESHOLD
            return INF
        except SingularModelError:
            self.last_status = STATUS_SINGULAR
            return INF
        return math.fsum(parts)

    def value_at(self, theta: ParameterVector | Mapping[str, float]) -> float:
        if isinstance(theta, ParameterVector):
            mapping = theta.as_dict()
        else:
            mapping = dict(theta)
        vals = self.theta0.values.copy()
        for k, lab in enumerate(self.theta0.labels):
            if lab in mapping:
                vals[k] = mapping[lab]
        return self.value(vals)

    def _group_value(self, g: _GroupState, theta: np.ndarray) -> float:
        cum = g.cumulative_thresholds(theta) if g.ord_cols else {}
        moments_cache: dict = {}

        def moments(defrow):
            key = defrow
            got = moments_cache.get(key)
            if got is None:
                A, S, M = g.materialize(theta, defrow)
                got = moments_from_matrices(A, S, M, g.model.nmanifest)
                moments_cache[key] = got
            return got

        parts: list[float] = []
        for b in g.buckets:
            mu, sigma = moments(b.defrow)
            parts.append(self._bucket_value(b, mu, sigma, cum))
        return math.fsum(parts)

    def _bucket_value(self, b: _Bucket, mu: np.ndarray, sigma: np.ndarray,
                      cum: dict[int, np.ndarray]) -> float:
        ci, oi = b.cont_idx, b.ord_idx
        if len(oi) == 0:
            mu_c = mu[ci]
            S_cc = sigma[np.ix_(ci, ci)]
            return _neg2ll_sufficient(mu_c, S_cc, b.n, b.mean, b.scatter)

        cum_list = [cum[j] for j in oi]
        mu_o = mu[oi]
        S_oo = sigma[np.ix_(oi, oi)]
        total = 0.0
        if len(ci) == 0:
            lower, upper = _code_bounds(b.codes, cum_list)
            p = _rectangle_many(np.tile(mu_o, (len(b.codes), 1)), S_oo, lower, upper)
            if np.any(p <= 0.0) or not np.all(np.isfinite(p)):
                raise NotPositiveDefiniteError("zero rectangle probability")
            return float(-2.0 * (b.code_counts @ np.log(p)))

        mu_c = mu[ci]
        S_cc = sigma[np.ix_(ci, ci)]
        S_oc = sigma[np.ix_(oi, ci)]
        try:
            L = np.linalg.cholesky(S_cc)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("trimmed covariance not positive definite")
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        D = b.X - mu_c
        Z = scipy.linalg.solve_triangular(L, D.T, lower=True, check_finite=False)
        quad = np.sum(Z * Z, axis=0)
        kc = len(ci)
        total += float(b.n * (kc * LN_2PI + logdet) + np.sum(quad))

        # conditional ordinal block given the observed continuous entries
        W = scipy.linalg.solve_triangular(L, S_oc.T, lower=True, check_finite=False)
        S_cond = S_oo - W.T @ W
        S_cond = (S_cond + S_cond.T) / 2.0
        mu_cond = mu_o + (W.T @ Z).T

        lower_u, upper_u = _code_bounds(b.codes, cum_list)
        logp = 0.0
        for u, rows in enumerate(b.code_rows):
            p = _rectangle_many(mu_cond[rows],
                                S_cond,
                                np.tile(lower_u[u], (len(rows), 1)),
                                np.tile(upper_u[u], (len(rows), 1)))
            if np.any(p <= 0.0) or not np.all(np.isfinite(p)):
                raise NotPositiveDefiniteError("zero rectangle probability")
            logp += float(np.sum(np.log(p)))
        total += -2.0 * logp
        return total


# -- public one-shot entry points ---------------------------------------------


def total_neg2ll(gm: GroupedModel,
                 theta: ParameterVector | Mapping[str, float] | None = None) -> float:
    """-2 ln L summed over groups and rows at the given parameter values."""
    ev = FimlEvaluator(gm)
    if theta is None:
        return ev.value(ev.theta0.values)
    return ev.value_at(theta)


def row_neg2ll(model: RamModel,
               theta: ParameterVector | Mapping[str, float] | None,
               thresholds: ThresholdSet | None,
               row: Mapping[str, object]) -> float:
    """-2 ln L of a single data row's observed subvector.

    ``row`` maps column names to values: floats for continuous manifests and
    definition variables, integer codes for ordinal manifests, ``None`` for
    missing.  Rows with nothing observed contribute 0.
    """
    thresholds = thresholds or ThresholdSet({})
    defrow = None
    if model.defvars:
        defrow = {}
        for col in model.defvars:
            v = row.get(col)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                raise LikelihoodError(f"definition variable {col!r} missing from row")
            defrow[col] = float(v)
    mu, sigma = model.expected_moments(theta, defrow)

    cont_idx, cont_vals, ord_idx, ord_cum, lower, upper = [], [], [], [], [], []
    for j, col in enumerate(model.manifests):
        if col in thresholds.columns:
            v = row.get(col)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                continue
            thr = thresholds[col]
            devs = thr.values()
            if len(devs) > 1 and np.any(devs[1:] <= 0.0):
                raise ThresholdOrderError(f"non-positive threshold increment for {col!r}")
            cum = np.cumsum(devs)
            code = int(v) if not isinstance(v, str) else None
            if code is None:
                raise LikelihoodError(
                    f"ordinal value for {col!r} must be an integer code here")
            if not 0 <= code <= len(cum):
                raise LikelihoodError(f"ordinal code {code} out of range for {col!r}")
            ord_idx.append(j)
            lower.append(cum[code - 1] if code > 0 else -np.inf)
            upper.append(cum[code] if code < len(cum) else np.inf)
        else:
            v = row.get(col)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                continue
            cont_idx.append(j)
            cont_vals.append(float(v))

    if not cont_idx and not ord_idx:
        return 0.0

    total = 0.0
    if cont_idx:
        ci = np.array(cont_idx, dtype=int)
        x = np.array(cont_vals)
        mu_c = mu[ci]
        S_cc = sigma[np.ix_(ci, ci)]
        try:
            L = np.linalg.cholesky(S_cc)
        except np.linalg.LinAlgError:
            return INF
        z = scipy.linalg.solve_triangular(L, x - mu_c, lower=True, check_finite=False)
        total += len(ci) * LN_2PI + 2.0 * float(np.sum(np.log(np.diag(L)))) + float(z @ z)

    if ord_idx:
        oi = np.array(ord_idx, dtype=int)
        mu_o = mu[oi]
        S_oo = sigma[np.ix_(oi, oi)]
        if cont_idx:
            S_oc = sigma[np.ix_(oi, np.array(cont_idx))]
            W = scipy.linalg.solve_triangular(L, S_oc.T, lower=True, check_finite=False)
            mu_o = mu_o + W.T @ z
            S_oo = S_oo - W.T @ W
            S_oo = (S_oo + S_oo.T) / 2.0
        try:
            p = mvn_rectangle(mu_o, S_oo, np.array(lower), np.array(upper))
        except (NotPositiveDefiniteError, RectangleError):
            return INF
        if p <= 0.0:
            return INF
        total += -2.0 * math.log(p)
    return total
