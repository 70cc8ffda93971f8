"""Minimize the grouped -2 log-likelihood and report estimates.

Quasi-Newton (L-BFGS-B) with central-difference gradients; rejected regions
(non-PD covariance, singular structure, threshold disorder) evaluate to a
large finite value so the line search backs off.  Standard errors come from a
central-difference Hessian of -2 lnL: cov = 2 H^-1.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize
from scipy.stats import chi2 as chi2_dist

from .likelihood import FimlEvaluator, RowCounts, STATUS_OK
from .ram import GroupedModel, ModelError, ParameterVector, label_kinds

BIG = 1e10  # rejected-step value; one order softer than inf keeps the
            # line-search interpolation usable
GRAD_REL_STEP = 1e-6
HESS_STEP_FLOOR = 1e-4
RESTART_CYCLES = 40

STATUS_CONVERGED = "converged"
STATUS_ITERATION_LIMIT = "iteration-limit"
STATUS_FLAT = "flat-region"
STATUS_NON_PD_HESSIAN = "non-PD-Hessian"


class FitError(ModelError):
    pass


@dataclass
class FitOptions:
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-6
    seed: int = 0
    multi_start: int = 5
    compute_se: bool = True
    start_values: Mapping[str, float] | None = None


@dataclass
class Estimate:
    label: str
    value: float
    se: float | None = None
    kind: str = ""
    at_bound: bool = False


@dataclass
class FitResult:
    estimates: list[Estimate]
    neg2ll: float
    nfree: int
    status: str
    rows: dict[str, RowCounts]
    theta: ParameterVector
    evaluations: int = 0
    se_message: str | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def aic(self) -> float:
        return self.neg2ll + 2.0 * self.nfree

    @property
    def converged(self) -> bool:
        return self.status in (STATUS_CONVERGED, STATUS_NON_PD_HESSIAN)

    def estimate(self, label: str) -> float:
        for e in self.estimates:
            if e.label == label:
                return e.value
        raise KeyError(label)

    def estimates_dict(self) -> dict[str, float]:
        return {e.label: e.value for e in self.estimates}


class _Objective:
    def __init__(self, ev: FimlEvaluator):
        self.ev = ev
        self.calls = 0
        self.barrier = BIG

    def __call__(self, x: np.ndarray) -> float:
        self.calls += 1
        v = self.ev.value(x)
        if not math.isfinite(v):
            return self.barrier
        if v >= self.barrier / 10.0:
            self.barrier = 100.0 * v
        return v

    def grad(self, x: np.ndarray) -> np.ndarray:
        g = np.empty(len(x))
        for i in range(len(x)):
            h = GRAD_REL_STEP * max(1.0, abs(x[i]))
            xp = x.copy(); xp[i] += h
            xm = x.copy(); xm[i] -= h
            g[i] = (self(xp) - self(xm)) / (2.0 * h)
        return g

    def with_grad(self, x: np.ndarray):
        return self(x), self.grad(x)


def fit(gm: GroupedModel, options: FitOptions | None = None) -> FitResult:
    """Fit all free parameters by FIML; deterministic given options."""
    opts = options or FitOptions()
    ev = FimlEvaluator(gm)
    theta0 = ev.theta0
    if len(theta0) == 0:
        raise FitError("model has no free parameters")
    if opts.start_values:
        theta0 = theta0.updated(opts.start_values)
    obj = _Objective(ev)
    bounds = theta0.bounds_list()
    has_bounds = any(b != (None, None) for b in bounds)
    rng = np.random.default_rng(opts.seed)

    x0 = theta0.values.copy()
    f0 = obj(x0)
    tries = 0
    while not _finite(f0, obj) and tries < opts.multi_start:
        x0 = theta0.values + rng.normal(scale=0.1 + 0.2 * tries, size=len(theta0))
        x0 = _project(x0, bounds)
        f0 = obj(x0)
        tries += 1
    if not _finite(f0, obj):
        raise FitError("likelihood is undefined at the start values and "
                       f"{opts.multi_start} jittered fallbacks")

    def cycles(start: np.ndarray):
        """L-BFGS-B with fresh-memory restarts until improvement stalls."""
        x, f_prev, last = start, math.inf, None
        for _ in range(RESTART_CYCLES):
            last = scipy.optimize.minimize(
                obj.with_grad, x, jac=True, method="L-BFGS-B",
                bounds=bounds if has_bounds else None,
                options={"maxiter": opts.max_iterations,
                         "gtol": opts.gradient_tolerance,
                         "ftol": 1e-12,
                         "maxfun": 50 * opts.max_iterations})
            x = last.x
            if f_prev - last.fun < 1e-9 * max(1.0, abs(last.fun)):
                break
            f_prev = last.fun
        return x, float(last.fun), last

    best_x, best_f, best_res = None, math.inf, None
    start = x0
    for attempt in range(opts.multi_start + 1):
        x, f, res = cycles(start)
        if f < best_f:
            best_x, best_f, best_res = x.copy(), f, res
        if res.success and _finite(f, obj):
            break
        start = _project(best_x + rng.normal(scale=0.2, size=len(best_x)), bounds)

    if best_f > f0:  # never report worse than the start
        best_x, best_f = x0, f0

    final_value = ev.value(best_x)
    status = STATUS_CONVERGED
    if not best_res.success:
        msg = str(best_res.message)
        status = STATUS_ITERATION_LIMIT if "ITERATION" in msg.upper() or \
            "EVALUATION" in msg.upper() else STATUS_FLAT
    if not math.isfinite(final_value):
        status = STATUS_FLAT

    theta_hat = theta0.with_values(best_x)
    kinds = label_kinds(gm)
    estimates = [Estimate(lab, float(v), None, kinds.get(lab, ""))
                 for lab, v in zip(theta_hat.labels, theta_hat.values)]
    for e, (lo, hi) in zip(estimates, bounds):
        if (lo is not None and abs(e.value - lo) < 1e-8) or \
           (hi is not None and abs(e.value - hi) < 1e-8):
            e.at_bound = True

    result = FitResult(
        estimates=estimates,
        neg2ll=float(final_value),
        nfree=len(theta_hat),
        status=status,
        rows=ev.row_counts,
        theta=theta_hat,
        evaluations=obj.calls,
    )
    if ev.last_status != STATUS_OK:
        result.diagnostics.append(f"final evaluation status: {ev.last_status}")

    if opts.compute_se and status == STATUS_CONVERGED:
        ses, message = standard_errors(gm, theta_hat, evaluator=ev)
        if ses is None:
            result.status = STATUS_NON_PD_HESSIAN
            result.se_message = message
        else:
            for e in result.estimates:
                e.se = ses.get(e.label)
                if e.at_bound:
                    result.diagnostics.append(
                        f"parameter {e.label!r} at an active bound; SE unreliable")
    return result


def _finite(f: float, obj: _Objective) -> bool:
    return math.isfinite(f) and f < obj.barrier


def _project(x: np.ndarray, bounds) -> np.ndarray:
    out = x.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None:
            out[i] = max(out[i], lo)
        if hi is not None:
            out[i] = min(out[i], hi)
    return out


def standard_errors(gm: GroupedModel, theta_hat: ParameterVector,
                    evaluator: FimlEvaluator | None = None
                    ) -> tuple[dict[str, float] | None, str | None]:
    """SEs from the central-difference Hessian of -2 lnL at theta_hat.

    Returns ``(ses, None)`` or ``(None, reason)`` when the Hessian is not
    positive definite.  Duplicate-label cells share one entry by construction.
    """
    ev = evaluator or FimlEvaluator(gm)
    order = {lab: k for k, lab in enumerate(ev.theta0.labels)}
    x = ev.theta0.values.copy()
    for lab, v in theta_hat.as_dict().items():
        if lab in order:
            x[order[lab]] = v
    p = len(x)
    h = np.maximum(HESS_STEP_FLOOR, HESS_STEP_FLOOR * np.abs(x))

    def f(y):
        v = ev.value(y)
        if not math.isfinite(v):
            raise FitError("likelihood undefined near the solution; no SEs")
        return v

    f0 = f(x)
    H = np.empty((p, p))
    try:
        for i in range(p):
            xp = x.copy(); xp[i] += h[i]
            xm = x.copy(); xm[i] -= h[i]
            H[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i])
        for i in range(p):
            for j in range(i):
                xpp = x.copy(); xpp[i] += h[i]; xpp[j] += h[j]
                xpm = x.copy(); xpm[i] += h[i]; xpm[j] -= h[j]
                xmp = x.copy(); xmp[i] -= h[i]; xmp[j] += h[j]
                xmm = x.copy(); xmm[i] -= h[i]; xmm[j] -= h[j]
                H[i, j] = H[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / \
                    (4.0 * h[i] * h[j])
    except FitError as e:
        return None, str(e)

    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None, "Hessian of -2 lnL is not positive definite"
    Hinv = np.linalg.inv(H)
    variances = 2.0 * np.diag(Hinv)
    if np.any(variances <= 0):
        return None, "Hessian of -2 lnL is not positive definite"
    ses = {lab: float(math.sqrt(v)) for lab, v in zip(ev.theta0.labels, variances)}
    return ses, None


def lrt(full: FitResult, nested: FitResult) -> tuple[float, int, float]:
    """Likelihood-ratio test of a nested model against the full model.

    chi2 = nested.neg2ll - full.neg2ll, df = difference in free parameters.
    Models with equal fit and equal size return (0, 0, 1.0).
    """
    chi2 = nested.neg2ll - full.neg2ll
    df = full.nfree - nested.nfree
    if chi2 < -1e-6:
        raise FitError(f"nested model fits better (chi2 = {chi2:.3g}); "
                       "models are not nested or one fit did not converge")
    chi2 = max(chi2, 0.0)
    if df <= 0:
        if df == 0 and chi2 <= 1e-6:
            return 0.0, 0, 1.0
        raise FitError(f"nested model must have fewer free parameters (df = {df})")
    return chi2, df, float(chi2_dist.sf(chi2, df))


# -- summaries -----------------------------------------------------------------

_KIND_ORDER = {"A": 0, "S": 1, "M": 2, "threshold": 3, "": 4}


def summary_rows(result: FitResult) -> list[dict]:
    rows = [{"label": e.label, "estimate": e.value, "se": e.se, "matrix": e.kind}
            for e in result.estimates]
    rows.sort(key=lambda r: (_KIND_ORDER.get(r["matrix"], 9), r["label"]))
    return rows


def summary_table(result: FitResult, fmt: str = "tsv") -> str:
    """Flat (label, estimate, SE) table plus fit indices; tsv, csv, or json."""
    rows = summary_rows(result)
    if fmt == "json":
        doc = {
            "estimates": rows,
            "neg2ll": result.neg2ll,
            "nfree": result.nfree,
            "aic": result.aic,
            "status": result.status,
            "rows": {g: {"used": c.used, "dropped": c.dropped}
                     for g, c in result.rows.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True)
    sep = "," if fmt == "csv" else "\t"
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=sep, lineterminator="\n")
    w.writerow(["label", "estimate", "se", "matrix"])
    for r in rows:
        w.writerow([r["label"], f"{r['estimate']:.10g}",
                    "" if r["se"] is None else f"{r['se']:.6g}", r["matrix"]])
    w.writerow([])
    w.writerow(["neg2ll", f"{result.neg2ll:.10g}"])
    w.writerow(["nfree", result.nfree])
    w.writerow(["aic", f"{result.aic:.10g}"])
    w.writerow(["status", result.status])
    for g, c in result.rows.items():
        w.writerow([f"rows_{g}", f"used={c.used}", f"dropped={c.dropped}"])
    return buf.getvalue()
