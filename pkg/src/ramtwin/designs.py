"""Map design names + JSON-friendly parameters onto the model builders.

This is the single dispatch point shared by the service, the CLI, and the
simulators, so a config that fits a model can also drive its simulation.
"""

from __future__ import annotations

from typing import Mapping

from .builders.common import BuilderError, build_ram
from .builders.clpm import build_clpm
from .builders.mrdoc import build_mrdoc
from .builders.sexlim import build_sexlim
from .builders.twinmaker import build_ace, twin_maker
from .parser import parse_exchange, parse_onyx_export
from .ram import GroupedModel
from .table import ColumnTable

DESIGNS = ("ace", "clpm", "riclpm", "doc", "mrdoc", "mrdoc2", "sexlim",
           "ram", "paths")


def _resolve_paths(params: Mapping):
    if "paths_doc" in params:
        return parse_exchange(dict(params["paths_doc"]))
    if "paths_text" in params:
        return parse_onyx_export(str(params["paths_text"]))
    raise BuilderError("path-based designs need 'paths_doc' (exchange format) "
                       "or 'paths_text' (Onyx export)")


def build_design(design: str,
                 params: Mapping,
                 datasets: Mapping[str, ColumnTable] | None = None
                 ) -> GroupedModel:
    datasets = dict(datasets or {})
    design = design.lower()
    name = params.get("name")

    if design == "ace":
        return build_ace(name or "ACE",
                         selDVs=params["selDVs"],
                         mzData=datasets.get("MZ"),
                         dzData=datasets.get("DZ"),
                         sep=params.get("sep", "_T"),
                         dzAr=params.get("dzAr", 0.5),
                         dzCr=params.get("dzCr", 1.0))
    if design in ("clpm", "riclpm"):
        return build_clpm(waves=int(params["waves"]),
                          variant="RICLPM" if design == "riclpm" else "CLPM",
                          data=datasets.get("ALL"),
                          x_base=params.get("x_base", "X"),
                          y_base=params.get("y_base", "Y"),
                          name=name,
                          equate_innovations=params.get("equate_innovations", False))
    if design in ("doc", "mrdoc", "mrdoc2"):
        variant = {"doc": "DoC", "mrdoc": "MRDoC", "mrdoc2": "MRDoC2"}[design]
        return build_mrdoc(pheno=params["pheno"],
                           prss=params.get("prss", []),
                           mzData=datasets.get("MZ"),
                           dzData=datasets.get("DZ"),
                           variant=variant,
                           sibling_mode=params.get("sibling_mode", False),
                           sibData=datasets.get("SIB"),
                           sep=params.get("sep", "_T"),
                           dzAr=params.get("dzAr", 0.5),
                           dzCr=params.get("dzCr", 1.0),
                           name=name)
    if design == "sexlim":
        return build_sexlim(selDVs=params["selDVs"],
                            sep=params.get("sep", "_T"),
                            mzmData=datasets.get("MZM"),
                            dzmData=datasets.get("DZM"),
                            mzfData=datasets.get("MZF"),
                            dzfData=datasets.get("DZF"),
                            dzoData=datasets.get("DZO"),
                            A_or_C=params.get("A_or_C", "A"),
                            variant=params.get("variant", "Nonscalar"),
                            dzAr=params.get("dzAr", 0.5),
                            dzCr=params.get("dzCr", 1.0),
                            name=name)
    if design == "paths":
        return twin_maker(name or "twin_model",
                          _resolve_paths(params),
                          mzData=datasets.get("MZ"),
                          dzData=datasets.get("DZ"),
                          sep=params.get("sep", "_T"),
                          dzAr=params.get("dzAr", 0.5),
                          dzCr=params.get("dzCr", 1.0),
                          manifests=params.get("manifests"),
                          latents=params.get("latents"))
    if design == "ram":
        return build_ram(name or "ram_model",
                         _resolve_paths(params),
                         data=datasets.get("ALL"),
                         manifests=params.get("manifests"),
                         latents=params.get("latents"))
    raise BuilderError(f"unknown design {design!r}; choose from {DESIGNS}")
