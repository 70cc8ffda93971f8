"""Pydantic request/response models for the HTTP service.

Tables travel as columns (null = missing); path documents use the canonical
exchange field names (from, to, arrows, free, value, label, defn).
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .parser import ParsedPathSet
from .paths import PathSpec
from .table import ColumnTable


class ColumnModel(BaseModel):
    name: str
    kind: Literal["continuous", "ordinal"]
    values: Optional[list[Optional[float]]] = None
    levels: Optional[list[str]] = None
    codes: Optional[list[Optional[int]]] = None


class TableModel(BaseModel):
    nrows: int
    columns: list[ColumnModel]

    @classmethod
    def from_table(cls, table: ColumnTable) -> "TableModel":
        return cls.model_validate(table.to_json_dict())

    def to_table(self) -> ColumnTable:
        return ColumnTable.from_json_dict(self.model_dump())


class PathModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    src: str = Field(alias="from")
    to: Optional[str] = None
    arrows: int = 1
    free: bool = True
    value: Optional[float] = None
    label: Optional[str] = None
    defn: bool = False

    @classmethod
    def from_spec(cls, spec: PathSpec) -> "PathModel":
        return cls.model_validate(spec.to_json_dict())

    def to_spec(self) -> PathSpec:
        return PathSpec.from_json_dict(self.model_dump(by_alias=True))


class ExchangeModel(BaseModel):
    """The canonical model-exchange document."""

    name: str = "model"
    manifests: list[str] = []
    latents: list[str] = []
    defvars: list[str] = []
    paths: list[PathModel] = []

    def to_doc(self) -> dict:
        return self.model_dump(by_alias=True)


class DiagnosticModel(BaseModel):
    line: int = 0
    message: str


class ParsePathsRequest(BaseModel):
    text: Optional[str] = None           # Onyx/OpenMx path syntax
    document: Optional[ExchangeModel] = None
    name: str = "model"


class ParsePathsResponse(BaseModel):
    document: ExchangeModel
    diagnostics: list[DiagnosticModel] = []

    @classmethod
    def from_parsed(cls, name: str, parsed: ParsedPathSet) -> "ParsePathsResponse":
        doc = ExchangeModel(
            name=name,
            manifests=parsed.declared_manifests,
            latents=parsed.declared_latents,
            defvars=[p.src for p in parsed.paths if p.defn],
            paths=[PathModel.from_spec(p) for p in parsed.paths],
        )
        return cls(document=doc,
                   diagnostics=[DiagnosticModel(line=line, message=msg)
                                for line, msg in parsed.diagnostics])


class FitOptionsModel(BaseModel):
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-6
    seed: int = 0
    multi_start: int = 5
    compute_se: bool = True
    start_values: dict[str, float] = {}


class PrepStepModel(BaseModel):
    op: Literal["bin-cont", "placeholder", "residualize", "scale"]
    datasets: Optional[list[str]] = None     # default: every bound dataset
    params: dict = {}


class FitRequest(BaseModel):
    design: str
    parameters: dict = {}
    datasets: dict[str, TableModel]
    prep: list[PrepStepModel] = []
    fixed_thresholds: dict[str, list[float]] = {}
    fixes: dict[str, float] = {}
    options: FitOptionsModel = FitOptionsModel()


class EstimateModel(BaseModel):
    label: str
    estimate: float
    se: Optional[float] = None
    matrix: str = ""


class GroupRowsModel(BaseModel):
    used: int
    dropped: int


class FitResponse(BaseModel):
    estimates: list[EstimateModel]
    neg2ll: float
    nfree: int
    aic: float
    status: str
    converged: bool
    rows: dict[str, GroupRowsModel]
    diagnostics: list[str] = []


class SimulateRequest(BaseModel):
    design: str
    parameters: dict = {}
    truth: dict[str, float] = {}
    n: dict[str, int]
    seed: int = 0
    censor: dict[str, float] = {}
    missing: dict[str, float] = {}
    ordinal_thresholds: dict[str, list[float]] = {}


class SimulateResponse(BaseModel):
    tables: dict[str, TableModel]
    theta: dict[str, float]
    truth: dict[str, float]


class BinContRequest(BaseModel):
    table: TableModel
    vars: list[str]
    censp: float
    suffixes: Optional[list[str]] = None


class PlaceholderRequest(BaseModel):
    table: TableModel
    covar: str
    pheno: str
    suffixes: list[str] = ["_T1", "_T2"]
    validate_only: bool = False


class PlaceholderResponse(BaseModel):
    table: TableModel
    warnings: list[str] = []


class ResidualizeRequest(BaseModel):
    table: TableModel
    var: Optional[list[str]] = None
    covs: Optional[list[str]] = None
    formula: Optional[str] = None
    suffixes: Optional[list[str]] = None


class ScaleRequest(BaseModel):
    table: TableModel
    vars: list[str]
    suffixes: list[str] = ["_T1", "_T2"]


class SummarizeRequest(BaseModel):
    table: TableModel
    vars: list[str]
    suffixes: list[str] = ["_T1", "_T2"]
    zygosity: str = "zygosity"
    mz_labels: list[str] = ["MZMM", "MZFF"]
    dz_labels: list[str] = ["DZMM", "DZFF", "DZOS"]


class SummarizeResponse(BaseModel):
    rows: list[dict]


class TableResponse(BaseModel):
    table: TableModel
    warnings: list[str] = []
