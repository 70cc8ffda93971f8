import numpy as np
import pytest

from ramtwin.builders.common import BuilderError
from ramtwin.builders.mrdoc import build_mrdoc
from ramtwin.designs import build_design
from ramtwin.estimator import FitOptions, fit
from ramtwin.likelihood import FimlEvaluator
from ramtwin.paths import PathSpec
from ramtwin.ram import (GroupedModel, Group, RamModel, fix_parameters,
                         pack_parameters)
from ramtwin.simulate import SimSpec, simulate

P1 = {"pheno": ["BMI", "SBP"], "prss": ["PRS_BMI"]}
TRUTH1 = {"a11": .6, "a21": .15, "a22": .55, "c11": .5, "c21": .1, "c22": .45,
          "e11": .45, "e22": .4, "g1": .2, "b1": .3, "b2": .1,
          "var_PRS_BMI": 1.0, "covmz_PRS_BMI": 0.9, "covdz_PRS_BMI": 0.45,
          "mean_*": 0.0}


def test_instrument_arity_enforced():
    with pytest.raises(BuilderError, match="exactly 1"):
        build_mrdoc(["X", "Y"], [], variant="MRDoC")
    with pytest.raises(BuilderError, match="exactly 2"):
        build_mrdoc(["X", "Y"], ["P"], variant="MRDoC2")
    with pytest.raises(BuilderError, match="exactly 0"):
        build_mrdoc(["X", "Y"], ["P"], variant="DoC")
    with pytest.raises(BuilderError, match="pheno"):
        build_mrdoc(["X"], ["P"], variant="MRDoC")


def test_sibling_mode_only_mrdoc2():
    with pytest.raises(BuilderError, match="sibling_mode"):
        build_mrdoc(["X", "Y"], ["P"], variant="MRDoC", sibling_mode=True)


def test_mrdoc_frees_pleiotropy_and_fixes_re():
    gm = build_mrdoc(["BMI", "SBP"], ["PRS_BMI"], variant="MRDoC")
    labels = set(pack_parameters(gm).labels)
    assert {"b1", "g1", "b2", "a21", "c21"} <= labels
    assert "e21" not in labels        # unique-environment confounding pinned at 0
    assert "g2" not in labels
    mz = gm.groups["MZ"].model
    i, j = mz.index("SBP_T1"), mz.index("e1_T1")
    assert mz.A_val[i, j] == 0.0 and not mz.A_free[i, j]


def test_mrdoc2_frees_confounding_no_pleiotropy():
    gm = build_mrdoc(["BMI", "SBP"], ["PRS_BMI", "PRS_SBP"], variant="MRDoC2")
    labels = set(pack_parameters(gm).labels)
    assert {"g1", "g2", "e21", "b1", "b2"} <= labels
    mz = gm.groups["MZ"].model
    # no direct path from instrument 1 to the outcome
    i, j = mz.index("SBP_T1"), mz.index("PRS_BMI_T1")
    assert mz.A_val[i, j] == 0.0 and not mz.A_free[i, j]


def test_cross_twin_fixed_correlations():
    gm = build_mrdoc(["BMI", "SBP"], ["PRS_BMI"], variant="MRDoC", dzAr=0.5)
    mz, dz = gm.groups["MZ"].model, gm.groups["DZ"].model
    i, j = mz.index("a1_T1"), mz.index("a1_T2")
    assert mz.S_val[i, j] == 1.0 and dz.S_val[i, j] == 0.5
    i, j = mz.index("c2_T1"), mz.index("c2_T2")
    assert mz.S_val[i, j] == 1.0 and dz.S_val[i, j] == 1.0
    i, j = mz.index("e1_T1"), mz.index("e1_T2")
    assert mz.S_val[i, j] == 0.0


def test_instrument_covariances_group_specific():
    gm = build_mrdoc(["BMI", "SBP"], ["PRS_BMI"], variant="MRDoC")
    labels = pack_parameters(gm).labels
    assert "covmz_PRS_BMI" in labels and "covdz_PRS_BMI" in labels
    assert labels.count("var_PRS_BMI") == 1


def test_sibling_mode_builds_familial_component():
    gm = build_mrdoc(["X", "Y"], ["PX", "PY"], variant="MRDoC2",
                     sibling_mode=True)
    assert list(gm.groups) == ["SIB"]
    labels = set(pack_parameters(gm).labels)
    assert {"f11", "f21", "f22", "rfs", "e21"} <= labels
    assert "a11" not in labels and "c11" not in labels


@pytest.mark.slow
def test_mrdoc_recovery():
    spec = SimSpec(design="mrdoc", truth=TRUTH1, n={"MZ": 4000, "DZ": 4000},
                   seed=11, params=P1)
    res = simulate(spec)
    gm = build_design("mrdoc", P1, res.tables)
    r = fit(gm, FitOptions(compute_se=False))
    assert r.converged
    assert r.estimate("g1") == pytest.approx(0.2, abs=0.05)
    assert r.estimate("b2") == pytest.approx(0.1, abs=0.05)


def instrument_block_model(prs: str, gname: str, gtag: str) -> RamModel:
    man = [f"{prs}_T1", f"{prs}_T2"]
    paths = [PathSpec(man[0], man[0], 2, True, 1.0, f"var_{prs}"),
             PathSpec(man[1], man[1], 2, True, 1.0, f"var_{prs}"),
             PathSpec(man[0], man[1], 2, True, 0.3, f"cov{gtag}_{prs}"),
             PathSpec("one", man[0], 1, True, 0.0, f"mean_{prs}"),
             PathSpec("one", man[1], 1, True, 0.0, f"mean_{prs}")]
    return RamModel.from_paths(f"inst_{gname}", man, [], paths)


def test_doc_restriction_reproduces_neg2ll():
    """Fixing b1 = b2 = 0 factorizes the likelihood into the DoC phenotype
    part plus a saturated instrument block."""
    spec = SimSpec(design="mrdoc", truth=TRUTH1, n={"MZ": 400, "DZ": 400},
                   seed=31, params=P1)
    res = simulate(spec)
    gm_r = fix_parameters(build_design("mrdoc", P1, res.tables),
                          {"b1": 0.0, "b2": 0.0})
    r = fit(gm_r, FitOptions(compute_se=False))
    est = r.estimates_dict()

    gm_doc = build_design("doc", {"pheno": ["BMI", "SBP"]}, res.tables)
    v_doc = FimlEvaluator(gm_doc).value_at(est)
    gm_inst = GroupedModel("inst", {
        "MZ": Group(instrument_block_model("PRS_BMI", "MZ", "mz"), res.tables["MZ"]),
        "DZ": Group(instrument_block_model("PRS_BMI", "DZ", "dz"), res.tables["DZ"])})
    v_inst = FimlEvaluator(gm_inst).value_at(est)
    assert abs(r.neg2ll - (v_doc + v_inst)) < 1e-6

    r_doc = fit(gm_doc, FitOptions(compute_se=False))
    assert r_doc.neg2ll == pytest.approx(v_doc, abs=1e-3)
