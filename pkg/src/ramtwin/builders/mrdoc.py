"""Direction-of-causation twin models with polygenic-score instruments.

Background trait covariance uses a per-twin Cholesky decomposition (labels
a11/a21/a22, c.., e..), with cross-twin factor correlations fixed at 1 (MZ)
and dzAr/dzCr (DZ).  Cross-trait confounding is carried by the second-row
loadings, so "unique-environment confounding fixed at zero" means e21 = 0.

Variants:

* ``DoC``    — no instruments; one causal path g1 (exposure -> outcome) plus
  free a21/c21 confounding, e21 fixed at 0.
* ``MRDoC``  — one instrument: instrument -> exposure (b1), a free direct
  pleiotropy path instrument -> outcome (b2), e21 fixed at 0.
* ``MRDoC2`` — two instruments (one per phenotype), causal paths in both
  directions (g1, g2), all background confounding free (a21, c21, e21), and
  no pleiotropy paths.

``sibling_mode`` (MRDoC2 only) replaces A and C by a single familial
component F whose cross-sibling correlation is a free parameter, over one
group of sibling pairs.
"""

from __future__ import annotations

from typing import Sequence

from ..paths import ONE, PathSpec
from ..ram import GroupedModel, Group, RamModel
from ..table import ColumnTable
from .common import BuilderError, default_thresholds, require_columns

VARIANTS = ("DoC", "MRDoC", "MRDoC2")
_INSTRUMENTS = {"DoC": 0, "MRDoC": 1, "MRDoC2": 2}


def build_mrdoc(pheno: Sequence[str],
                prss: Sequence[str] = (),
                mzData: ColumnTable | None = None,
                dzData: ColumnTable | None = None,
                variant: str = "MRDoC",
                sibling_mode: bool = False,
                sibData: ColumnTable | None = None,
                sep: str = "_T",
                dzAr: float = 0.5,
                dzCr: float = 1.0,
                name: str | None = None) -> GroupedModel:
    canon = {v.lower(): v for v in VARIANTS}
    if variant.lower() not in canon:
        raise BuilderError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    variant = canon[variant.lower()]
    if len(pheno) != 2:
        raise BuilderError("pheno must name (exposure, outcome)")
    want = _INSTRUMENTS[variant]
    if len(prss) != want:
        raise BuilderError(f"{variant} requires exactly {want} instrument(s), "
                           f"got {len(prss)}")
    if sibling_mode and variant != "MRDoC2":
        raise BuilderError("sibling_mode is identified only for MRDoC2")
    name = name or variant

    expo, outc = pheno
    tags = (f"{sep}1", f"{sep}2")
    manifests = [f"{v}{t}" for t in tags for v in (expo, outc, *prss)]

    def person_paths(t: str, bg: str) -> tuple[list[PathSpec], list[str]]:
        """Within-person wiring for one twin/sibling; bg is 'ace' or 'fe'."""
        paths: list[PathSpec] = []
        latents: list[str] = []
        e21_free = variant == "MRDoC2"
        components = ("f", "e") if bg == "fe" else ("a", "c", "e")
        for kind in components:
            f1, f2 = f"{kind}1{t}", f"{kind}2{t}"
            latents += [f1, f2]
            paths.append(PathSpec(f1, f1, 2, False, 1.0))
            paths.append(PathSpec(f2, f2, 2, False, 1.0))
            paths.append(PathSpec(f1, f"{expo}{t}", 1, True, 0.6, f"{kind}11"))
            cross_free = e21_free if kind == "e" else True
            paths.append(PathSpec(f1, f"{outc}{t}", 1, cross_free,
                                  0.1 if cross_free else 0.0, f"{kind}21"))
            paths.append(PathSpec(f2, f"{outc}{t}", 1, True, 0.6, f"{kind}22"))
        paths.append(PathSpec(f"{expo}{t}", f"{outc}{t}", 1, True, 0.0, "g1"))
        if variant == "MRDoC2":
            paths.append(PathSpec(f"{outc}{t}", f"{expo}{t}", 1, True, 0.0, "g2"))
        if variant == "MRDoC":
            prs = prss[0]
            paths.append(PathSpec(f"{prs}{t}", f"{expo}{t}", 1, True, 0.3, "b1"))
            paths.append(PathSpec(f"{prs}{t}", f"{outc}{t}", 1, True, 0.0, "b2"))
        elif variant == "MRDoC2":
            paths.append(PathSpec(f"{prss[0]}{t}", f"{expo}{t}", 1, True, 0.3, "b1"))
            paths.append(PathSpec(f"{prss[1]}{t}", f"{outc}{t}", 1, True, 0.3, "b2"))
        for prs in prss:
            paths.append(PathSpec(f"{prs}{t}", f"{prs}{t}", 2, True, 1.0,
                                  f"var_{prs}"))
        if len(prss) == 2:
            paths.append(PathSpec(f"{prss[0]}{t}", f"{prss[1]}{t}", 2, True, 0.0,
                                  f"cov_{prss[0]}_{prss[1]}"))
        for v in (expo, outc, *prss):
            paths.append(PathSpec(ONE, f"{v}{t}", 1, True, 0.0, f"mean_{v}"))
        return paths, latents

    def cross_twin(gtag: str, rA: float, rC: float, bg: str) -> list[PathSpec]:
        t1, t2 = tags
        out = []
        if bg == "fe":
            for idx in (1, 2):
                out.append(PathSpec(f"f{idx}{t1}", f"f{idx}{t2}", 2, True, 0.4, "rfs"))
        else:
            for kind, r in (("a", rA), ("c", rC)):
                for idx in (1, 2):
                    out.append(PathSpec(f"{kind}{idx}{t1}", f"{kind}{idx}{t2}",
                                        2, False, r))
        # instrument block: free cross-twin covariances per group
        for prs in prss:
            out.append(PathSpec(f"{prs}{t1}", f"{prs}{t2}", 2, True, 0.3,
                                f"cov{gtag}_{prs}"))
        if len(prss) == 2:
            p1, p2 = prss
            for a, b in ((p1, p2), (p2, p1)):
                out.append(PathSpec(f"{a}{t1}", f"{b}{t2}", 2, True, 0.0,
                                    f"cov{gtag}_x_{p1}_{p2}"))
        return out

    def build_group(gname: str, gtag: str, data, rA, rC, bg) -> Group:
        paths: list[PathSpec] = []
        latents: list[str] = []
        for t in tags:
            p, l = person_paths(t, bg)
            paths += p
            latents += l
        paths += cross_twin(gtag, rA, rC, bg)
        model = RamModel.from_paths(f"{name}_{gname}", manifests, latents, paths)
        if data is not None:
            require_columns(data, manifests, f"{name}/{gname}")
        thresholds = default_thresholds(model, data, strip_suffixes=tags)
        return Group(model, data, thresholds)

    if sibling_mode:
        data = sibData if sibData is not None else mzData
        groups = {"SIB": build_group("SIB", "sib", data, 0.0, 0.0, "fe")}
    else:
        groups = {"MZ": build_group("MZ", "mz", mzData, 1.0, 1.0, "ace"),
                  "DZ": build_group("DZ", "dz", dzData, dzAr, dzCr, "ace")}
    return GroupedModel(name, groups)
