"""Five-group sex-limitation twin models in a correlated-factors framework.

Groups: MZM, DZM, MZF, DZF, DZO (twin 1 male, twin 2 female in DZO).  Means
and variances equate across birth order within each zygosity group; means are
free to differ by sex in every variant.

Variants (nested, free-parameter counts strictly increasing):

* ``Homogeneity`` — one set of paths and inter-trait correlations for both
  sexes.
* ``Scalar``      — sex-specific path magnitudes, a single set of Ra/Rc/Re.
* ``Nonscalar``   — sex-specific magnitudes; sex-specific correlations on the
  chosen component (A or C) and on E, with the DZO cross-sex cells of the
  chosen component freed (the qualitative effect).  The other of A/C keeps
  correlations shared across sexes so its fixed DZO scaling stays expressible
  through label equality.

DZO cross-sex free cells absorb the dzAr/dzCr scale: a reported ``ra_o_v_w``
is the covariance between the male and female factors, i.e. dzAr times the
cross-sex correlation under the usual additive interpretation.
"""

from __future__ import annotations

from typing import Callable, Sequence

from ..paths import ONE, PathSpec
from ..ram import GroupedModel, Group, RamModel
from ..table import ColumnTable
from .common import (BuilderError, add_correlated_component, default_thresholds,
                     require_columns)

VARIANTS = ("Homogeneity", "Scalar", "Nonscalar")


def build_sexlim(selDVs: Sequence[str],
                 sep: str = "_T",
                 mzmData: ColumnTable | None = None,
                 dzmData: ColumnTable | None = None,
                 mzfData: ColumnTable | None = None,
                 dzfData: ColumnTable | None = None,
                 dzoData: ColumnTable | None = None,
                 A_or_C: str = "A",
                 variant: str = "Nonscalar",
                 dzAr: float = 0.5,
                 dzCr: float = 1.0,
                 name: str | None = None) -> GroupedModel:
    canon = {v.lower(): v for v in VARIANTS}
    if variant.lower() not in canon:
        raise BuilderError(f"unknown sex-limitation variant {variant!r}; "
                           f"choose from {VARIANTS}")
    variant = canon[variant.lower()]
    if A_or_C not in ("A", "C"):
        raise BuilderError('A_or_C must be "A" or "C"')
    if not selDVs:
        raise BuilderError("selDVs must name at least one phenotype")
    if not 0.0 < dzAr <= 1.0 or not 0.0 < dzCr <= 1.0:
        raise BuilderError("dzAr and dzCr must lie in (0, 1]")
    name = name or f"sexlim_{variant}_{A_or_C}"

    traits = list(selDVs)
    tags = (f"{sep}1", f"{sep}2")
    manifests = [f"{v}{t}" for t in tags for v in traits]
    chosen = A_or_C.lower()

    def path_label(kind: str, sex: str, v: str) -> str:
        if variant == "Homogeneity":
            return f"{kind}_{v}"
        return f"{kind}_{sex}_{v}"

    def corr_label(kind: str, sex: str, v: str, w: str) -> str:
        sex_specific = variant == "Nonscalar" and (kind == chosen or kind == "e")
        if sex_specific:
            return f"r{kind}_{sex}_{v}_{w}"
        return f"r{kind}_{v}_{w}"

    def ordered(v: str, w: str) -> tuple[str, str]:
        return (v, w) if traits.index(v) <= traits.index(w) else (w, v)

    def build_group(gname: str, data: ColumnTable | None,
                    sex_of: Callable[[str], str], rA: float, rC: float,
                    qualitative: bool) -> Group:
        paths: list[PathSpec] = []
        latents: list[str] = []

        for kind, pair_r in (("a", rA), ("c", rC), ("e", 0.0)):
            if qualitative and kind == chosen:
                _add_free_cross_component(paths, latents, traits, tags, sex_of,
                                          kind, path_label, corr_label, ordered,
                                          pair_r)
                continue

            def corr_label_of(v, w, tag, _k=kind):
                v, w = ordered(v, w)
                sex = sex_of(tag) if tag is not None else sex_of(tags[0])
                return corr_label(_k, sex, v, w)

            add_correlated_component(
                paths, latents, traits, tags,
                target_of=lambda v, tag: f"{v}{tag}",
                loading_label_of=lambda v, tag, _k=kind: path_label(_k, sex_of(tag), v),
                corr_label_of=corr_label_of,
                pair_r=pair_r,
                prefix=kind.upper())

        for tag in tags:
            for v in traits:
                paths.append(PathSpec(ONE, f"{v}{tag}", 1, True, 0.0,
                                      f"mean_{sex_of(tag)}_{v}"))

        model = RamModel.from_paths(f"{name}_{gname}", manifests, latents, paths)
        if data is not None:
            require_columns(data, manifests, f"{name}/{gname}")
        thresholds = default_thresholds(model, data, strip_suffixes=tags)
        return Group(model, data, thresholds)

    qualitative = variant == "Nonscalar"
    groups = {
        "MZM": build_group("MZM", mzmData, lambda t: "m", 1.0, 1.0, False),
        "DZM": build_group("DZM", dzmData, lambda t: "m", dzAr, dzCr, False),
        "MZF": build_group("MZF", mzfData, lambda t: "f", 1.0, 1.0, False),
        "DZF": build_group("DZF", dzfData, lambda t: "f", dzAr, dzCr, False),
        "DZO": build_group("DZO", dzoData,
                           lambda t: "m" if t == tags[0] else "f",
                           dzAr, dzCr, qualitative),
    }
    return GroupedModel(name, groups)


def _add_free_cross_component(paths, latents, traits, tags, sex_of, kind,
                              path_label, corr_label, ordered, pair_r) -> None:
    """Chosen component in the DZO group under Nonscalar: per-sex factors with
    sex-specific within correlations and fully free cross-sex cells."""
    for tag in tags:
        sex = sex_of(tag)
        for v in traits:
            f = f"{kind.upper()}q_{v}{tag}"
            latents.append(f)
            paths.append(PathSpec(f, f, 2, False, 1.0))
            paths.append(PathSpec(f, f"{v}{tag}", 1, True, None,
                                  path_label(kind, sex, v)))
        for i, v in enumerate(traits):
            for w in traits[i + 1:]:
                paths.append(PathSpec(f"{kind.upper()}q_{v}{tag}",
                                      f"{kind.upper()}q_{w}{tag}", 2, True, 0.0,
                                      corr_label(kind, sex, *ordered(v, w))))
    t1, t2 = tags
    for v in traits:
        for w in traits:
            ov, ow = ordered(v, w)
            start = pair_r if v == w else 0.0
            paths.append(PathSpec(f"{kind.upper()}q_{v}{t1}",
                                  f"{kind.upper()}q_{w}{t2}", 2, True, start,
                                  f"r{kind}_o_{ov}_{ow}"))
