"""Shared machinery for the model builders."""

from __future__ import annotations

import math
import re
from typing import Sequence

from ..parser import ParsedPathSet
from ..paths import ONE, PathSpec
from ..ram import GroupedModel, Group, ModelError, RamModel
from ..table import ColumnTable
from ..thresholds import ColumnThresholds, ThresholdSet

ACE_LATENT_RE = re.compile(r"^([ace])(\d+)$")


class BuilderError(ModelError):
    pass


def normalize_labels(paths: Sequence[PathSpec]) -> list[PathSpec]:
    """Assign canonical labels to free unlabeled paths.

    Twin builders duplicate path sets per twin; labeling first makes the
    duplicated cells share one parameter.
    """
    out = []
    for p in paths:
        if p.defn or not p.free or p.label is not None:
            out.append(p)
            continue
        if p.src == ONE:
            label = f"mean_{p.dst}"
        elif p.arrows == 1:
            label = f"{p.src}_to_{p.dst}"
        else:
            a, b = sorted((p.src, p.dst))
            label = f"{a}_with_{b}"
        out.append(PathSpec(p.src, p.dst, p.arrows, p.free, p.value, label, p.defn))
    return out


def split_parsed(paths) -> tuple[list[PathSpec], list[str], list[str]]:
    if isinstance(paths, ParsedPathSet):
        return list(paths.paths), list(paths.declared_manifests), list(paths.declared_latents)
    return list(paths), [], []


def infer_variables(paths: Sequence[PathSpec],
                    declared_manifests: Sequence[str],
                    declared_latents: Sequence[str],
                    observed_names: set[str]) -> tuple[list[str], list[str]]:
    """Split path variables into manifests and latents.

    Declarations win; otherwise a variable is manifest iff it matches an
    observed column name.
    """
    if declared_manifests or declared_latents:
        return list(declared_manifests), list(declared_latents)
    seen: list[str] = []
    for p in paths:
        if p.defn:
            continue
        for v in (p.src, p.dst):
            if v != ONE and v is not None and v not in seen:
                seen.append(v)
    manifests = [v for v in seen if v in observed_names]
    latents = [v for v in seen if v not in observed_names]
    return manifests, latents


def default_thresholds(model: RamModel, data: ColumnTable | None,
                       strip_suffixes: Sequence[str] = ()) -> ThresholdSet:
    """Free default thresholds for every ordinal manifest in the bound data.

    Labels use the column name with any twin suffix stripped, so thresholds
    equate across twins (and across groups) by label.
    """
    cols: dict[str, ColumnThresholds] = {}
    if data is None:
        return ThresholdSet(cols)
    for col in model.manifests:
        if col in data and data.is_ordinal(col):
            base = col
            for suf in strip_suffixes:
                if base.endswith(suf):
                    base = base[: -len(suf)]
                    break
            nlev = len(data.ordinal(col).levels)
            cols[col] = ColumnThresholds.free_defaults(col, nlev, label_base=base)
    return ThresholdSet(cols)


def require_columns(data: ColumnTable, columns: Sequence[str], where: str) -> None:
    missing = [c for c in columns if c not in data]
    if missing:
        raise BuilderError(f"{where}: dataset lacks column(s) {missing}")


def build_ram(name: str, paths, data: ColumnTable | None = None,
              manifests: Sequence[str] | None = None,
              latents: Sequence[str] | None = None,
              group_name: str = "ALL") -> GroupedModel:
    """Single-group RAM model straight from a path set (no twin transform)."""
    specs, decl_m, decl_l = split_parsed(paths)
    specs = normalize_labels(specs)
    if manifests is None or latents is None:
        observed = set(data.column_names()) if data is not None else set()
        inf_m, inf_l = infer_variables(specs, decl_m, decl_l, observed)
        manifests = manifests if manifests is not None else inf_m
        latents = latents if latents is not None else inf_l
    if not manifests:
        raise BuilderError(f"{name}: no manifest variables resolved")
    model = RamModel.from_paths(name, manifests, latents, specs)
    thresholds = default_thresholds(model, data)
    return GroupedModel(name, {group_name: Group(model, data, thresholds)})


# -- correlated-factor construction for fixed pair correlations ----------------


def add_correlated_component(paths: list[PathSpec],
                             latents: list[str],
                             traits: Sequence[str],
                             sep_tags: tuple[str, str],
                             target_of,
                             loading_label_of,
                             corr_label_of,
                             pair_r: float,
                             prefix: str) -> None:
    """Wire one variance component (A or C) for a pair of relatives.

    Each trait gets a unit-variance factor per relative; the factor pair for a
    trait correlates at the fixed ``pair_r``, and cross-trait correlations are
    free cells sharing ``corr_label_of(v, w, tag)`` everywhere they appear, so
    the implied cross-relative cross-trait block is pair_r times the within
    block.  ``tag`` is None for cells shared by the pair and the relative's
    suffix for relative-specific cells (only reachable when pair_r <= 0).

    pair_r == 1 collapses the pair to one shared factor; 0 < pair_r < 1 uses a
    pair factor plus relative-unique factors behind fixed sqrt loadings;
    pair_r <= 0 wires independent factors per relative.  In the middle branch
    within- and cross-relative correlations are proportional by construction,
    which is exactly what makes the fixed scaling expressible with label
    equality alone.
    """
    t1, t2 = sep_tags
    if pair_r >= 1.0:
        for v in traits:
            f = f"{prefix}_{v}"
            latents.append(f)
            paths.append(PathSpec(f, f, 2, False, 1.0))
            for tag in (t1, t2):
                paths.append(PathSpec(f, target_of(v, tag), 1, True, None,
                                      loading_label_of(v, tag)))
        for i, v in enumerate(traits):
            for w in traits[i + 1:]:
                paths.append(PathSpec(f"{prefix}_{v}", f"{prefix}_{w}", 2, True,
                                      0.0, corr_label_of(v, w, None)))
        return

    if pair_r <= 0.0:
        for tag in (t1, t2):
            for v in traits:
                f = f"{prefix}_{v}{tag}"
                latents.append(f)
                paths.append(PathSpec(f, f, 2, False, 1.0))
                paths.append(PathSpec(f, target_of(v, tag), 1, True, None,
                                      loading_label_of(v, tag)))
            for i, v in enumerate(traits):
                for w in traits[i + 1:]:
                    paths.append(PathSpec(f"{prefix}_{v}{tag}", f"{prefix}_{w}{tag}",
                                          2, True, 0.0, corr_label_of(v, w, tag)))
        return

    sr = math.sqrt(pair_r)
    su = math.sqrt(1.0 - pair_r)
    for v in traits:
        pair = f"{prefix}p_{v}"
        latents.append(pair)
        paths.append(PathSpec(pair, pair, 2, False, 1.0))
        for tag in (t1, t2):
            uniq = f"{prefix}u_{v}{tag}"
            comp = f"{prefix}c_{v}{tag}"
            latents.extend([uniq, comp])
            paths.append(PathSpec(uniq, uniq, 2, False, 1.0))
            paths.append(PathSpec(comp, comp, 2, False, 0.0))
            paths.append(PathSpec(pair, comp, 1, False, sr))
            paths.append(PathSpec(uniq, comp, 1, False, su))
            paths.append(PathSpec(comp, target_of(v, tag), 1, True, None,
                                  loading_label_of(v, tag)))
    for i, v in enumerate(traits):
        for w in traits[i + 1:]:
            lab = corr_label_of(v, w, None)
            paths.append(PathSpec(f"{prefix}p_{v}", f"{prefix}p_{w}", 2, True, 0.0, lab))
            for tag in (t1, t2):
                paths.append(PathSpec(f"{prefix}u_{v}{tag}", f"{prefix}u_{w}{tag}",
                                      2, True, 0.0, lab))
