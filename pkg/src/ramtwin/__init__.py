"""RAM-parameterized SEM with FIML, definition variables, censored joint
distributions, and high-level twin/causal model builders."""

__version__ = "0.1.0"

from .paths import PathSpec, ONE
from .table import ColumnTable, ContinuousColumn, OrdinalColumn
from .thresholds import ColumnThresholds, ThresholdSet
from .ram import (GroupedModel, Group, ParameterVector, RamModel,
                  fix_parameters, pack_parameters, reachable_defvar_targets,
                  unpack_parameters)
from .parser import ParsedPathSet, parse_exchange, parse_onyx_export
from .mvn import mvn_rectangle
from .likelihood import FimlEvaluator, row_neg2ll, total_neg2ll
from .estimator import FitOptions, FitResult, fit, lrt, standard_errors, summary_table
from .builders.common import build_ram
from .builders.twinmaker import build_ace, cholesky_ace_paths, twin_maker
from .builders.clpm import build_clpm
from .builders.mrdoc import build_mrdoc
from .builders.sexlim import build_sexlim
from .designs import build_design
from .simulate import SimSpec, SimResult, simulate
from .dataprep import (make_bin_cont_pair, residualize, scale_wide_twin,
                       summarize_twin_data, update_covariate_placeholders,
                       validate_placeholders)

__all__ = [
    "PathSpec", "ONE", "ColumnTable", "ContinuousColumn", "OrdinalColumn",
    "ColumnThresholds", "ThresholdSet", "GroupedModel", "Group",
    "ParameterVector", "RamModel", "fix_parameters", "pack_parameters",
    "reachable_defvar_targets", "unpack_parameters", "ParsedPathSet",
    "parse_exchange", "parse_onyx_export", "mvn_rectangle", "FimlEvaluator",
    "row_neg2ll", "total_neg2ll", "FitOptions", "FitResult", "fit", "lrt",
    "standard_errors", "summary_table", "build_ram", "build_ace",
    "cholesky_ace_paths", "twin_maker", "build_clpm", "build_mrdoc",
    "build_sexlim", "build_design", "SimSpec", "SimResult", "simulate",
    "make_bin_cont_pair", "residualize", "scale_wide_twin",
    "summarize_twin_data", "update_covariate_placeholders",
    "validate_placeholders",
]
