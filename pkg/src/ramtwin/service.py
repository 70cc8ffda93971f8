"""FastAPI service wrapping the modeling engine.

Endpoints mirror the batch workflows: parse path syntax, run data-prep
transforms, simulate datasets, and fit models.  Everything is JSON-in /
JSON-out; the CLI is a thin client of this app (in-process by default).
"""

from __future__ import annotations

import math
import warnings

from fastapi import FastAPI, HTTPException

from . import __version__
from .dataprep import (DataPrepError, make_bin_cont_pair, residualize,
                       scale_wide_twin, summarize_twin_data,
                       update_covariate_placeholders, validate_placeholders)
from .designs import build_design
from .estimator import FitError, FitOptions, fit, summary_rows
from .likelihood import LikelihoodError
from .parser import OnyxParseError, parse_exchange, parse_onyx_export
from .paths import PathError
from .ram import ModelError, fix_parameters
from .schemas import (BinContRequest, EstimateModel, FitRequest, FitResponse,
                      GroupRowsModel, ParsePathsRequest, ParsePathsResponse,
                      PlaceholderRequest, PlaceholderResponse,
                      ResidualizeRequest, ScaleRequest, SimulateRequest,
                      SimulateResponse, SummarizeRequest, SummarizeResponse,
                      TableModel, TableResponse)
from .simulate import SimSpec, SimulationError, simulate
from .table import ColumnTable

app = FastAPI(title="ramtwin", version=__version__,
              description="RAM-parameterized SEM with FIML, definition "
                          "variables, censored joint distributions, and "
                          "twin/causal model builders.")

_USER_ERRORS = (ModelError, DataPrepError, PathError, OnyxParseError,
                LikelihoodError, SimulationError, FitError, ValueError, KeyError)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except _USER_ERRORS as e:
        raise HTTPException(status_code=422, detail=str(e)) from e


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/v1/parse-paths", response_model=ParsePathsResponse)
def parse_paths(req: ParsePathsRequest) -> ParsePathsResponse:
    if (req.text is None) == (req.document is None):
        raise HTTPException(status_code=422,
                            detail="give exactly one of 'text' or 'document'")
    if req.text is not None:
        parsed = _guard(parse_onyx_export, req.text)
    else:
        parsed = _guard(parse_exchange, req.document.to_doc())
    return ParsePathsResponse.from_parsed(req.name, parsed)


@app.post("/v1/prep/bin-cont", response_model=TableResponse)
def prep_bin_cont(req: BinContRequest) -> TableResponse:
    out = _guard(make_bin_cont_pair, req.table.to_table(), req.vars, req.censp,
                 req.suffixes)
    return TableResponse(table=TableModel.from_table(out))


@app.post("/v1/prep/placeholder", response_model=PlaceholderResponse)
def prep_placeholder(req: PlaceholderRequest) -> PlaceholderResponse:
    table = req.table.to_table()
    if req.validate_only:
        flags = _guard(validate_placeholders, table, req.covar, req.pheno,
                       req.suffixes)
        return PlaceholderResponse(table=req.table,
                                   warnings=[w.message for w in flags])
    out = _guard(update_covariate_placeholders, table, req.covar, req.pheno,
                 req.suffixes)
    flags = _guard(validate_placeholders, out, req.covar, req.pheno, req.suffixes)
    return PlaceholderResponse(table=TableModel.from_table(out),
                               warnings=[w.message for w in flags])


@app.post("/v1/prep/residualize", response_model=TableResponse)
def prep_residualize(req: ResidualizeRequest) -> TableResponse:
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = _guard(residualize, req.table.to_table(),
                     var=req.var, covs=req.covs, formula=req.formula,
                     suffixes=req.suffixes)
        notes = [str(w.message) for w in caught]
    return TableResponse(table=TableModel.from_table(out), warnings=notes)


@app.post("/v1/prep/scale", response_model=TableResponse)
def prep_scale(req: ScaleRequest) -> TableResponse:
    out = _guard(scale_wide_twin, req.table.to_table(), req.vars, req.suffixes)
    return TableResponse(table=TableModel.from_table(out))


@app.post("/v1/prep/summarize", response_model=SummarizeResponse)
def prep_summarize(req: SummarizeRequest) -> SummarizeResponse:
    df = _guard(summarize_twin_data, req.table.to_table(), req.vars,
                req.suffixes, req.zygosity, req.mz_labels, req.dz_labels)
    rows = df.to_dict(orient="records")
    for row in rows:  # NaN is not valid JSON
        for k, v in row.items():
            if isinstance(v, float) and math.isnan(v):
                row[k] = None
    return SummarizeResponse(rows=rows)


@app.post("/v1/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
    spec = SimSpec(design=req.design, truth=req.truth, n=req.n, seed=req.seed,
                   params=req.parameters, censor=req.censor,
                   missing=req.missing,
                   ordinal_thresholds=req.ordinal_thresholds)
    result = _guard(simulate, spec)
    return SimulateResponse(
        tables={g: TableModel.from_table(t) for g, t in result.tables.items()},
        theta=result.theta, truth=result.truth)


def run_fit_request(req: FitRequest) -> FitResponse:
    """Shared by the endpoint and in-process callers (the CLI test client)."""
    datasets: dict[str, ColumnTable] = {g: t.to_table()
                                        for g, t in req.datasets.items()}
    for step in req.prep:
        targets = step.datasets or list(datasets)
        for gname in targets:
            if gname not in datasets:
                raise ModelError(f"prep step {step.op!r}: no dataset {gname!r}")
            datasets[gname] = _apply_prep(step.op, datasets[gname], step.params)
    gm = build_design(req.design, req.parameters, datasets)
    if req.fixed_thresholds:
        gm = gm.fix_thresholds(req.fixed_thresholds)
    if req.fixes:
        gm = fix_parameters(gm, req.fixes)
    opts = FitOptions(max_iterations=req.options.max_iterations,
                      gradient_tolerance=req.options.gradient_tolerance,
                      seed=req.options.seed,
                      multi_start=req.options.multi_start,
                      compute_se=req.options.compute_se,
                      start_values=req.options.start_values or None)
    result = fit(gm, opts)
    return FitResponse(
        estimates=[EstimateModel(label=r["label"], estimate=r["estimate"],
                                 se=r["se"], matrix=r["matrix"])
                   for r in summary_rows(result)],
        neg2ll=result.neg2ll,
        nfree=result.nfree,
        aic=result.aic,
        status=result.status,
        converged=result.converged,
        rows={g: GroupRowsModel(used=c.used, dropped=c.dropped)
              for g, c in result.rows.items()},
        diagnostics=list(result.diagnostics),
    )


def _apply_prep(op: str, table: ColumnTable, params: dict) -> ColumnTable:
    if op == "bin-cont":
        return make_bin_cont_pair(table, params["vars"], params["censp"],
                                  params.get("suffixes"))
    if op == "placeholder":
        return update_covariate_placeholders(table, params["covar"],
                                             params["pheno"],
                                             params.get("suffixes", ("_T1", "_T2")))
    if op == "residualize":
        return residualize(table, var=params.get("var"), covs=params.get("covs"),
                           formula=params.get("formula"),
                           suffixes=params.get("suffixes"))
    if op == "scale":
        return scale_wide_twin(table, params["vars"],
                               params.get("suffixes", ("_T1", "_T2")))
    raise ModelError(f"unknown prep op {op!r}")


@app.post("/v1/fit", response_model=FitResponse)
def fit_endpoint(req: FitRequest) -> FitResponse:
    return _guard(run_fit_request, req)
