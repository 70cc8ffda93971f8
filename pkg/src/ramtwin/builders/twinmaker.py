"""Transform a single-person path specification into a two-group twin model.

Variance-component latents must follow the a1, a2, ..., c1, ..., e1, ...
naming convention: the builder duplicates the path set per twin, then adds
cross-twin covariances between matching a-latents (1 in MZ, dzAr in DZ) and
c-latents (1 in MZ, dzCr in DZ), and none between e-latents.  Every labeled
parameter equates across twins and groups through its label.
"""

from __future__ import annotations

from typing import Sequence

from ..paths import PathSpec
from ..ram import GroupedModel, Group, RamModel
from ..table import ColumnTable
from .common import (ACE_LATENT_RE, BuilderError, default_thresholds,
                     infer_variables, normalize_labels, require_columns,
                     split_parsed)


def twin_maker(name: str,
               paths,
               mzData: ColumnTable | None = None,
               dzData: ColumnTable | None = None,
               sep: str = "_T",
               dzAr: float = 0.5,
               dzCr: float = 1.0,
               manifests: Sequence[str] | None = None,
               latents: Sequence[str] | None = None) -> GroupedModel:
    if not 0.0 < dzAr <= 1.0 or not 0.0 < dzCr <= 1.0:
        raise BuilderError("dzAr and dzCr must lie in (0, 1]")
    specs, decl_m, decl_l = split_parsed(paths)
    specs = normalize_labels(specs)

    if manifests is None or latents is None:
        observed: set[str] = set()
        for data in (mzData, dzData):
            if data is not None:
                for c in data.column_names():
                    for i in (1, 2):
                        suf = f"{sep}{i}"
                        if c.endswith(suf):
                            observed.add(c[: -len(suf)])
        inf_m, inf_l = infer_variables(specs, decl_m, decl_l, observed)
        manifests = manifests if manifests is not None else inf_m
        latents = latents if latents is not None else inf_l
    manifests = list(manifests)
    latents = list(latents)
    if not manifests:
        raise BuilderError(f"{name}: could not resolve any manifest variables; "
                           "declare them or bind data with twin-suffixed columns")

    ace = [(v, m.group(1)) for v in latents for m in [ACE_LATENT_RE.match(v)] if m]
    if not any(kind in ("a", "c", "e") for _, kind in ace):
        raise BuilderError(
            f"{name}: nothing to constrain; no latents follow the a1/c1/e1 "
            "variance-component naming pattern")

    def twin_vars(i: int) -> tuple[list[str], list[str]]:
        suf = f"{sep}{i}"
        return [v + suf for v in manifests], [v + suf for v in latents]

    man1, lat1 = twin_vars(1)
    man2, lat2 = twin_vars(2)
    all_man = man1 + man2
    all_lat = lat1 + lat2

    base_paths = [p.suffixed(f"{sep}1") for p in specs] + \
                 [p.suffixed(f"{sep}2") for p in specs]

    def cross_paths(rA: float, rC: float) -> list[PathSpec]:
        out = []
        for v, kind in ace:
            if kind == "e":
                continue
            r = rA if kind == "a" else rC
            out.append(PathSpec(f"{v}{sep}1", f"{v}{sep}2", 2, False, r))
        return out

    groups = {}
    for gname, data, rA, rC in (("MZ", mzData, 1.0, 1.0),
                                ("DZ", dzData, dzAr, dzCr)):
        model = RamModel.from_paths(f"{name}_{gname}", all_man, all_lat,
                                    base_paths + cross_paths(rA, rC))
        if data is not None:
            require_columns(data, all_man, f"{name}/{gname}")
        thresholds = default_thresholds(model, data,
                                        strip_suffixes=(f"{sep}1", f"{sep}2"))
        groups[gname] = Group(model, data, thresholds)
    return GroupedModel(name, groups)


def cholesky_ace_paths(base_names: Sequence[str]) -> tuple[list[PathSpec], list[str]]:
    """Cholesky ACE path set for twin_maker: factors a1.., c1.., e1.. with
    lower-triangular free loadings, unit fixed factor variances, free means."""
    k = len(base_names)
    if k == 0:
        raise BuilderError("need at least one phenotype")
    paths: list[PathSpec] = []
    latents: list[str] = []
    for kind in ("a", "c", "e"):
        for j in range(1, k + 1):
            f = f"{kind}{j}"
            latents.append(f)
            paths.append(PathSpec(f, f, 2, False, 1.0, f"VAR_{f}"))
            for i in range(j, k + 1):
                start = 0.6 if i == j else 0.1
                paths.append(PathSpec(f, base_names[i - 1], 1, True, start,
                                      f"{kind}{i}{j}"))
    for v in base_names:
        paths.append(PathSpec("one", v, 1, True, 0.0, f"mean_{v}"))
    return paths, latents


def build_ace(name: str,
              selDVs: Sequence[str],
              mzData: ColumnTable | None = None,
              dzData: ColumnTable | None = None,
              sep: str = "_T",
              dzAr: float = 0.5,
              dzCr: float = 1.0) -> GroupedModel:
    """Cholesky ACE twin model over the given phenotype base names."""
    paths, latents = cholesky_ace_paths(selDVs)
    return twin_maker(name, paths, mzData, dzData, sep=sep, dzAr=dzAr, dzCr=dzCr,
                      manifests=list(selDVs), latents=latents)
