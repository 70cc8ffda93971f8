"""Generate synthetic datasets with known parameters for every builder.

The generator draws from the multivariate normal implied by the built model
at the supplied truth values, so simulation and fitting share one moment map
by construction (closed-form cross-checks for the twin designs live in the
test suite to guard the circularity).  Streams split deterministically per
group from the spec seed, making output bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fnmatch import fnmatch
from typing import Mapping

import numpy as np

from .dataprep import make_bin_cont_pair
from .designs import build_design
from .ram import GroupedModel, ModelError, pack_parameters
from .table import ColumnTable, ContinuousColumn, OrdinalColumn


class SimulationError(ModelError):
    pass


@dataclass
class SimSpec:
    design: str
    truth: dict[str, float]
    n: dict[str, int]
    seed: int = 0
    params: dict = field(default_factory=dict)
    censor: dict[str, float] = field(default_factory=dict)      # column -> LOD
    missing: dict[str, float] = field(default_factory=dict)     # column -> MCAR rate
    ordinal_thresholds: dict[str, list[float]] = field(default_factory=dict)
    zygosity_column: str | None = "zygosity"


@dataclass
class SimResult:
    tables: dict[str, ColumnTable]
    theta: dict[str, float]           # full label -> value map actually used
    truth: dict[str, float]


def _expand_truth(labels: list[str], truth: Mapping[str, float]) -> dict[str, float]:
    """Resolve glob-style truth keys (e.g. 'x2y_*') against the label set."""
    out: dict[str, float] = {}
    for key, value in truth.items():
        if any(ch in key for ch in "*?["):
            hits = [lab for lab in labels if fnmatch(lab, key)]
            if not hits:
                raise SimulationError(f"truth pattern {key!r} matches no labels")
            for lab in hits:
                out[lab] = float(value)
        else:
            if key not in labels:
                raise SimulationError(f"truth label {key!r} not a free parameter; "
                                      f"known labels: {sorted(labels)[:12]}...")
            out[key] = float(value)
    return out


def simulate(spec: SimSpec) -> SimResult:
    if spec.design == "mvn":
        return _simulate_mvn(spec)
    gm = build_design(spec.design, spec.params)
    return simulate_from_model(gm, spec)


def simulate_from_model(gm: GroupedModel, spec: SimSpec) -> SimResult:
    pv = pack_parameters(gm)
    resolved = _expand_truth(list(pv.labels), spec.truth)
    theta = pv.updated(resolved).as_dict()

    unknown = set(spec.n) - set(gm.groups)
    if unknown:
        raise SimulationError(f"unknown group(s) in n: {sorted(unknown)}; "
                              f"model has {list(gm.groups)}")

    seeds = np.random.SeedSequence(spec.seed).spawn(len(gm.groups))
    tables: dict[str, ColumnTable] = {}
    for (gname, grp), child in zip(gm.groups.items(), seeds):
        if gname not in spec.n:
            continue
        model = grp.model
        if model.defvars:
            raise SimulationError(
                "simulation of models with definition variables is not supported")
        mu, sigma = model.expected_moments(theta)
        eigmin = float(np.linalg.eigvalsh(sigma).min())
        if eigmin < -1e-9 * max(1.0, float(np.diag(sigma).max())):
            raise SimulationError(
                f"group {gname!r}: implied covariance not positive definite "
                "at the supplied truth")
        rng = np.random.default_rng(child)
        n = int(spec.n[gname])
        # svd factorization tolerates the positive-semidefinite case
        draws = rng.multivariate_normal(mu, sigma, size=n, method="svd")
        cols: dict[str, object] = {}
        if spec.zygosity_column:
            cols[spec.zygosity_column] = OrdinalColumn(
                (gname,), np.zeros(n, dtype=np.int64))
        for j, col in enumerate(model.manifests):
            x = draws[:, j].copy()
            if col in spec.ordinal_thresholds:
                cuts = np.asarray(spec.ordinal_thresholds[col], dtype=float)
                codes = np.searchsorted(cuts, x).astype(np.int64)
                levels = tuple(f"L{i}" for i in range(len(cuts) + 1))
                cols[col] = OrdinalColumn(levels, codes)
            else:
                cols[col] = ContinuousColumn(x)
        table = ColumnTable(cols)

        for col, rate in spec.missing.items():
            if col in table and table.is_continuous(col):
                x = table.continuous(col).copy()
                mask = rng.random(n) < float(rate)
                x[mask] = np.nan
                table = table.with_columns({col: ContinuousColumn(x)})

        censored = [c for c in spec.censor if c in table]
        for col in censored:
            table = make_bin_cont_pair(table, [col], spec.censor[col])
        tables[gname] = table
    return SimResult(tables=tables, theta=theta, truth=dict(resolved))


def _simulate_mvn(spec: SimSpec) -> SimResult:
    """Plain multivariate-normal design: params carry names/mu/sigma."""
    names = list(spec.params["names"])
    mu = np.asarray(spec.params["mu"], dtype=float)
    sigma = np.atleast_2d(np.asarray(spec.params["sigma"], dtype=float))
    seeds = np.random.SeedSequence(spec.seed).spawn(max(len(spec.n), 1))
    tables = {}
    for (gname, n), child in zip(spec.n.items(), seeds):
        rng = np.random.default_rng(child)
        draws = rng.multivariate_normal(mu, sigma, size=int(n), method="cholesky")
        cols = {name: ContinuousColumn(draws[:, j].copy())
                for j, name in enumerate(names)}
        table = ColumnTable(cols)
        for col, rate in spec.missing.items():
            if col in table:
                x = table.continuous(col).copy()
                mask = rng.random(int(n)) < float(rate)
                x[mask] = np.nan
                table = table.with_columns({col: ContinuousColumn(x)})
        for col, lod in spec.censor.items():
            if col in table:
                table = make_bin_cont_pair(table, [col], lod)
        tables[gname] = table
    return SimResult(tables=tables, theta={}, truth={})
