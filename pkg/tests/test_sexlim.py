import numpy as np
import pytest

from ramtwin.builders.common import BuilderError
from ramtwin.builders.sexlim import build_sexlim
from ramtwin.ram import pack_parameters
from ramtwin.table import ColumnTable, ContinuousColumn

TRAITS = ["tri", "bic"]
GROUPS = ("MZM", "DZM", "MZF", "DZF", "DZO")


def test_parameter_counts_strictly_increase():
    counts = {}
    for variant in ("Homogeneity", "Scalar", "Nonscalar"):
        gm = build_sexlim(TRAITS, variant=variant)
        counts[variant] = len(pack_parameters(gm))
    assert counts["Homogeneity"] < counts["Scalar"] < counts["Nonscalar"]


def test_five_groups_present():
    gm = build_sexlim(TRAITS, variant="Scalar")
    assert tuple(gm.groups) == GROUPS


def test_input_validation():
    with pytest.raises(BuilderError, match="A_or_C"):
        build_sexlim(TRAITS, A_or_C="B")
    with pytest.raises(BuilderError, match="unknown"):
        build_sexlim(TRAITS, variant="Other")
    with pytest.raises(BuilderError, match="at least one"):
        build_sexlim([])
    with pytest.raises(BuilderError, match="dzAr"):
        build_sexlim(TRAITS, dzAr=1.5)


def test_missing_group_rejected():
    tbl = ColumnTable({f"{v}{s}": ContinuousColumn(np.zeros(4))
                       for v in TRAITS for s in ("_T1", "_T2")})
    gm = build_sexlim(TRAITS, mzmData=tbl, dzmData=tbl, mzfData=tbl,
                      dzfData=tbl, dzoData=None)
    from ramtwin.likelihood import FimlEvaluator, LikelihoodError
    with pytest.raises(LikelihoodError, match="no bound dataset"):
        FimlEvaluator(gm)


def homogeneity_theta():
    vals = {"ra_tri_bic": .3, "rc_tri_bic": .2, "re_tri_bic": .1}
    for v in TRAITS:
        vals[f"a_{v}"] = .6
        vals[f"c_{v}"] = .4
        vals[f"e_{v}"] = .5
        vals[f"mean_m_{v}"] = .1
        vals[f"mean_f_{v}"] = .2
    return vals


def test_homogeneity_moment_identities():
    gm = build_sexlim(TRAITS, variant="Homogeneity", dzAr=0.5, dzCr=1.0)
    vals = homogeneity_theta()
    a = np.array([.6, .6]); c = np.array([.4, .4]); e = np.array([.5, .5])
    Ra = np.array([[1, .3], [.3, 1]])
    Rc = np.array([[1, .2], [.2, 1]])
    Re = np.array([[1, .1], [.1, 1]])
    A = np.outer(a, a) * Ra
    C = np.outer(c, c) * Rc
    E = np.outer(e, e) * Re
    for g, rA, rC in (("MZM", 1, 1), ("DZM", .5, 1), ("MZF", 1, 1),
                      ("DZF", .5, 1), ("DZO", .5, 1)):
        mu, sig = gm.groups[g].model.expected_moments(vals)
        assert np.allclose(sig[:2, :2], A + C + E, atol=1e-12)
        assert np.allclose(sig[:2, 2:], rA * A + rC * C, atol=1e-12)
    mu, _ = gm.groups["DZO"].model.expected_moments(vals)
    assert mu[0] == pytest.approx(.1)   # male twin first
    assert mu[2] == pytest.approx(.2)   # female twin second


def test_nonscalar_dzo_chosen_block_free():
    gm = build_sexlim(TRAITS, variant="Nonscalar", A_or_C="A")
    pv = pack_parameters(gm)
    assert {"ra_o_tri_tri", "ra_o_bic_bic", "ra_o_tri_bic"} <= set(pv.labels)
    assert {"ra_m_tri_bic", "ra_f_tri_bic", "re_m_tri_bic", "re_f_tri_bic",
            "rc_tri_bic"} <= set(pv.labels)
    # chosen on C swaps roles
    gm_c = build_sexlim(TRAITS, variant="Nonscalar", A_or_C="C")
    labels_c = set(pack_parameters(gm_c).labels)
    assert {"rc_o_tri_tri", "rc_m_tri_bic", "ra_tri_bic"} <= labels_c


def test_nonscalar_dzo_cross_block_values():
    gm = build_sexlim(TRAITS, variant="Nonscalar", A_or_C="A", dzCr=1.0)
    pv = pack_parameters(gm)
    vals = dict.fromkeys(pv.labels, 0.0)
    for v in TRAITS:
        for s in ("m", "f"):
            vals[f"a_{s}_{v}"] = .6
            vals[f"c_{s}_{v}"] = .4
            vals[f"e_{s}_{v}"] = .5
    vals.update({"ra_m_tri_bic": .3, "ra_f_tri_bic": .25, "rc_tri_bic": .2,
                 "re_m_tri_bic": .1, "re_f_tri_bic": .15,
                 "ra_o_tri_tri": .41, "ra_o_bic_bic": .43, "ra_o_tri_bic": .07})
    _, sig = gm.groups["DZO"].model.expected_moments(vals)
    am = np.array([.6, .6]); af = np.array([.6, .6])
    cm = np.array([.4, .4]); cf = np.array([.4, .4])
    Rao = np.array([[.41, .07], [.07, .43]])
    Rc = np.array([[1, .2], [.2, 1]])
    expected = np.outer(am, af) * Rao + np.outer(cm, cf) * Rc
    assert np.allclose(sig[:2, 2:], expected, atol=1e-12)


def test_scalar_sex_specific_paths_shared_correlations():
    gm = build_sexlim(TRAITS, variant="Scalar")
    labels = set(pack_parameters(gm).labels)
    assert {"a_m_tri", "a_f_tri", "ra_tri_bic"} <= labels
    assert "ra_m_tri_bic" not in labels and "ra_o_tri_tri" not in labels


def test_dzcr_quarter_builds_and_scales_c_block():
    gm = build_sexlim(["t"], variant="Homogeneity", dzCr=0.25)
    vals = {"a_t": .6, "c_t": .4, "e_t": .5, "mean_m_t": 0.0, "mean_f_t": 0.0}
    _, s_dzf = gm.groups["DZF"].model.expected_moments(vals)
    assert s_dzf[0, 1] == pytest.approx(0.5 * .36 + 0.25 * .16, abs=1e-12)


def test_univariate_counts():
    counts = [len(pack_parameters(build_sexlim(["t"], variant=v)))
              for v in ("Homogeneity", "Scalar", "Nonscalar")]
    assert counts == [5, 8, 9]
