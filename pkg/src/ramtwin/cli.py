"""Batch front end: a thin client of the HTTP service.

Every subcommand builds a JSON request and posts it to the service app —
in-process over an ASGI transport by default, or to a remote server via
``--server``.  File handling (CSV datasets, config files, atomic output
writes) lives here; modeling stays behind the API.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click
import httpx

from .schemas import TableModel
from .table import ColumnTable

REPORT_FORMATS = ("tsv", "csv", "json")


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    # in-process bridge into the ASGI app; no network involved
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient

    from .service import app  # deferred; keeps --help fast
    return TestClient(app, raise_server_exceptions=False)


def _fail(message: str, code: int = 2):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _post(client: httpx.Client, url: str, payload: dict) -> dict:
    resp = client.post(url, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        _fail(f"{url}: {detail}")
    return resp.json()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _stable_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_csv(path: str, ordinal: dict | None) -> ColumnTable:
    if not os.path.exists(path):
        _fail(f"input file not found: {path}")
    try:
        return ColumnTable.from_csv(path, ordinal)
    except Exception as e:
        _fail(f"{path}: {e}")


def _load_paths_file(path: str) -> dict:
    """Dispatch by extension: .R/.onyx parse as Onyx export, .json as exchange."""
    if not os.path.exists(path):
        _fail(f"paths file not found: {path}")
    suffix = Path(path).suffix.lower()
    text = Path(path).read_text()
    if suffix == ".json":
        return {"paths_doc": json.loads(text)}
    if suffix in (".r", ".onyx", ".txt", ""):
        return {"paths_text": text}
    _fail(f"cannot tell the paths format of {path!r}; use .R/.onyx or .json")


def _estimates_table(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return _stable_json(doc)
    sep = "," if fmt == "csv" else "\t"
    lines = [sep.join(["label", "estimate", "se", "matrix"])]
    for e in doc["estimates"]:
        se = "" if e.get("se") is None else f"{e['se']:.6g}"
        lines.append(sep.join([e["label"], f"{e['estimate']:.10g}", se,
                               e.get("matrix", "")]))
    lines.append("")
    lines.append(sep.join(["neg2ll", f"{doc['neg2ll']:.10g}"]))
    lines.append(sep.join(["nfree", str(doc["nfree"])]))
    lines.append(sep.join(["aic", f"{doc['aic']:.10g}"]))
    lines.append(sep.join(["status", doc["status"]]))
    for g, c in sorted(doc["rows"].items()):
        lines.append(sep.join([f"rows_{g}", f"used={c['used']}",
                               f"dropped={c['dropped']}"]))
    return "\n".join(lines) + "\n"


@click.group()
def main() -> None:
    """Path-based SEM with FIML, twin/causal builders, and data prep."""


@main.command("fit")
@click.option("--config", required=True, type=click.Path(), help="run config JSON")
@click.option("--paths", "paths_file", type=click.Path(),
              help="path-syntax file (.R/.onyx Onyx export or .json exchange)")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", type=click.Path(), default=None, help="output directory")
@click.option("--report", type=click.Choice(REPORT_FORMATS), default="tsv")
@click.option("--allow-nonconverged", is_flag=True, default=False)
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def fit_cmd(config, paths_file, seed, out, report, allow_nonconverged, server):
    """Build the configured design, bind datasets, and fit by FIML."""
    if not os.path.exists(config):
        _fail(f"config not found: {config}")
    try:
        cfg = json.loads(Path(config).read_text())
    except json.JSONDecodeError as e:
        _fail(f"{config}: invalid JSON ({e})")

    params = dict(cfg.get("parameters", {}))
    if cfg.get("name"):
        params.setdefault("name", cfg["name"])
    if paths_file:
        params.update(_load_paths_file(paths_file))
    elif "paths_file" in params:
        params.update(_load_paths_file(params.pop("paths_file")))

    ordinal = cfg.get("ordinal") or {}
    datasets = {}
    for gname, path in (cfg.get("datasets") or {}).items():
        table = _load_csv(path, ordinal)
        datasets[gname] = TableModel.from_table(table).model_dump()

    options = dict(cfg.get("fit", {}))
    if seed is not None:
        options["seed"] = seed
    request = {
        "design": cfg.get("design") or _fail("config lacks 'design'"),
        "parameters": params,
        "datasets": datasets,
        "prep": cfg.get("prep", []),
        "fixed_thresholds": cfg.get("fixed_thresholds", {}),
        "fixes": cfg.get("fixes", {}),
        "options": options,
    }
    with _client(server) as client:
        doc = _post(client, "/v1/fit", request)

    if out:
        outdir = Path(out)
        _atomic_write(outdir / f"estimates.{report}", _estimates_table(doc, report))
        _atomic_write(outdir / "result.json", _stable_json(doc))
    else:
        click.echo(_estimates_table(doc, report), nl=False)

    for note in doc.get("diagnostics", []):
        click.echo(f"note: {note}", err=True)
    if not doc["converged"] and not allow_nonconverged:
        click.echo(f"non-converged fit (status {doc['status']}); "
                   "pass --allow-nonconverged to accept", err=True)
        sys.exit(1)


@main.command("simulate")
@click.option("--config", required=True, type=click.Path(), help="simulation config JSON")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", required=True, type=click.Path(), help="output directory")
@click.option("--server", default=None)
def simulate_cmd(config, seed, out, server):
    """Draw datasets from a design at known truth; writes CSVs plus truth.json."""
    if not os.path.exists(config):
        _fail(f"config not found: {config}")
    cfg = json.loads(Path(config).read_text())
    request = {
        "design": cfg.get("design") or _fail("config lacks 'design'"),
        "parameters": cfg.get("parameters", {}),
        "truth": cfg.get("truth", {}),
        "n": cfg.get("n") or _fail("config lacks per-group 'n'"),
        "seed": seed if seed is not None else cfg.get("seed", 0),
        "censor": cfg.get("censor", {}),
        "missing": cfg.get("missing", {}),
        "ordinal_thresholds": cfg.get("ordinal_thresholds", {}),
    }
    with _client(server) as client:
        doc = _post(client, "/v1/simulate", request)
    outdir = Path(out)
    for gname, table_doc in sorted(doc["tables"].items()):
        table = TableModel.model_validate(table_doc).to_table()
        _atomic_write(outdir / f"{gname}.csv", table.to_csv_text())
    _atomic_write(outdir / "truth.json",
                  _stable_json({"truth": doc["truth"], "theta": doc["theta"]}))
    click.echo(f"wrote {len(doc['tables'])} dataset(s) to {outdir}")


@main.group("prep")
def prep_group() -> None:
    """Data-preparation transforms (CSV in, CSV out)."""


def _prep_io(args_out):
    def decorate(fn):
        fn = click.option("--server", default=None)(fn)
        if args_out:
            fn = click.option("--out", required=True, type=click.Path())(fn)
        fn = click.option("--levels", type=click.Path(), default=None,
                          help="JSON sidecar declaring ordinal level order")(fn)
        fn = click.option("--data", required=True, type=click.Path())(fn)
        return fn
    return decorate


def _read_table_arg(data, levels) -> dict:
    ordinal = json.loads(Path(levels).read_text()) if levels else None
    table = _load_csv(data, ordinal)
    return TableModel.from_table(table).model_dump()


def _write_table(doc: dict, out: str) -> None:
    table = TableModel.model_validate(doc).to_table()
    _atomic_write(Path(out), table.to_csv_text())


@prep_group.command("bin-cont")
@_prep_io(args_out=True)
@click.option("--vars", required=True, help="comma-separated source columns")
@click.option("--censp", required=True, type=float, help="limit of detection")
@click.option("--suffixes", default=None, help="twin suffixes, e.g. _T1,_T2")
def prep_bin_cont(data, levels, out, server, vars, censp, suffixes):
    """Split censored columns into below-LOD ordinal + continuous remainder."""
    request = {"table": _read_table_arg(data, levels),
               "vars": vars.split(","), "censp": censp,
               "suffixes": suffixes.split(",") if suffixes else None}
    with _client(server) as client:
        doc = _post(client, "/v1/prep/bin-cont", request)
    _write_table(doc["table"], out)


@prep_group.command("placeholder")
@_prep_io(args_out=True)
@click.option("--covar", required=True)
@click.option("--pheno", required=True)
@click.option("--suffixes", default="_T1,_T2")
@click.option("--validate-only", is_flag=True, default=False)
def prep_placeholder(data, levels, out, server, covar, pheno, suffixes, validate_only):
    """Insert 99999 covariate placeholders (and flag misuse)."""
    request = {"table": _read_table_arg(data, levels), "covar": covar,
               "pheno": pheno, "suffixes": suffixes.split(","),
               "validate_only": validate_only}
    with _client(server) as client:
        doc = _post(client, "/v1/prep/placeholder", request)
    for w in doc.get("warnings", []):
        click.echo(f"warning: {w}", err=True)
    if not validate_only:
        _write_table(doc["table"], out)


@prep_group.command("residualize")
@_prep_io(args_out=True)
@click.option("--var", default=None, help="comma-separated dependent variables")
@click.option("--covs", default=None, help="comma-separated covariates")
@click.option("--formula", default=None, help='e.g. "mpg ~ cyl + I(cyl^2) + disp"')
@click.option("--suffixes", default=None)
def prep_residualize(data, levels, out, server, var, covs, formula, suffixes):
    """Replace dependent variables by their OLS residuals."""
    request = {"table": _read_table_arg(data, levels),
               "var": var.split(",") if var else None,
               "covs": covs.split(",") if covs else None,
               "formula": formula,
               "suffixes": suffixes.split(",") if suffixes else None}
    with _client(server) as client:
        doc = _post(client, "/v1/prep/residualize", request)
    for w in doc.get("warnings", []):
        click.echo(f"warning: {w}", err=True)
    _write_table(doc["table"], out)


@prep_group.command("scale")
@_prep_io(args_out=True)
@click.option("--vars", required=True, help="comma-separated base names")
@click.option("--suffixes", default="_T1,_T2")
def prep_scale(data, levels, out, server, vars, suffixes):
    """Standardize wide twin columns by pooled mean/SD."""
    request = {"table": _read_table_arg(data, levels), "vars": vars.split(","),
               "suffixes": suffixes.split(",")}
    with _client(server) as client:
        doc = _post(client, "/v1/prep/scale", request)
    _write_table(doc["table"], out)


@prep_group.command("summarize")
@_prep_io(args_out=False)
@click.option("--vars", required=True, help="comma-separated base names")
@click.option("--suffixes", default="_T1,_T2")
@click.option("--zygosity", default="zygosity")
@click.option("--mz-labels", default="MZMM,MZFF")
@click.option("--dz-labels", default="DZMM,DZFF,DZOS")
@click.option("--report", type=click.Choice(REPORT_FORMATS), default="tsv")
def prep_summarize(data, levels, server, vars, suffixes, zygosity,
                   mz_labels, dz_labels, report):
    """Per-variable twin summary: N pairs, mean, SD, rMZ, rDZ."""
    request = {"table": _read_table_arg(data, levels), "vars": vars.split(","),
               "suffixes": suffixes.split(","), "zygosity": zygosity,
               "mz_labels": mz_labels.split(","), "dz_labels": dz_labels.split(",")}
    with _client(server) as client:
        doc = _post(client, "/v1/prep/summarize", request)
    rows = doc["rows"]
    if report == "json":
        click.echo(_stable_json(rows), nl=False)
        return
    sep = "," if report == "csv" else "\t"
    cols = ["variable", "n_pairs", "mean", "sd", "rMZ", "rDZ"]
    click.echo(sep.join(cols))
    for row in rows:
        click.echo(sep.join("" if row.get(c) is None else str(row.get(c))
                            for c in cols))


@main.command("parse-paths")
@click.option("--paths", "paths_file", required=True, type=click.Path(),
              help="path-syntax file (.R/.onyx Onyx export or .json exchange)")
@click.option("--name", default="model")
@click.option("--out", type=click.Path(), default=None,
              help="write the exchange JSON here (default: stdout)")
@click.option("--server", default=None)
def parse_paths_cmd(paths_file, name, out, server):
    """Convert Onyx-exported path syntax to the exchange JSON document."""
    request = dict(_load_paths_file(paths_file))
    payload = {"name": name}
    if "paths_text" in request:
        payload["text"] = request["paths_text"]
    else:
        payload["document"] = request["paths_doc"]
    with _client(server) as client:
        doc = _post(client, "/v1/parse-paths", payload)
    for d in doc.get("diagnostics", []):
        click.echo(f"note: line {d['line']}: {d['message']}", err=True)
    text = _stable_json(doc["document"])
    if out:
        _atomic_write(Path(out), text)
    else:
        click.echo(text, nl=False)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve_cmd(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("ramtwin.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
