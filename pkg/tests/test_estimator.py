import json
import math

import numpy as np
import pytest

from ramtwin.estimator import (FitError, FitOptions, fit, lrt, standard_errors,
                               summary_table)
from ramtwin.paths import PathSpec
from ramtwin.ram import GroupedModel, Group, RamModel, fix_parameters
from ramtwin.table import ColumnTable, ContinuousColumn


def mean_model(fixed_var=1.0):
    return RamModel.from_paths("m", ["x"], [], [
        PathSpec("x", "x", 2, False, fixed_var),
        PathSpec("one", "x", 1, True, 0.0, "mu")])


def table(values):
    return ColumnTable({"x": ContinuousColumn(np.asarray(values, dtype=float))})


def test_single_observation_mean_mle():
    gm = GroupedModel.single(mean_model(), table([3.7]))
    r = fit(gm, FitOptions(compute_se=False))
    assert r.estimate("mu") == pytest.approx(3.7, abs=1e-6)
    assert r.status == "converged"


def test_aic_identity_exact():
    gm = GroupedModel.single(mean_model(), table([0.1, -0.4, 1.0]))
    r = fit(gm, FitOptions(compute_se=False))
    assert r.aic == r.neg2ll + 2 * r.nfree


def test_no_free_parameters_rejected():
    m = RamModel.from_paths("f", ["x"], [], [PathSpec("x", "x", 2, False, 1.0)])
    with pytest.raises(FitError, match="no free parameters"):
        fit(GroupedModel.single(m, table([0.0])))


def test_se_matches_fisher_information():
    rng = np.random.default_rng(9)
    n = 400
    gm = GroupedModel.single(mean_model(), table(rng.normal(size=n)))
    r = fit(gm)
    se = [e.se for e in r.estimates if e.label == "mu"][0]
    assert se == pytest.approx(1.0 / math.sqrt(n), rel=0.05)


def test_duplicate_label_cells_report_single_se():
    paths = [PathSpec("x", "x", 2, False, 1.0),
             PathSpec("one", "x", 1, True, 0.0, "mu")]
    m1 = RamModel.from_paths("g1", ["x"], [], paths)
    m2 = RamModel.from_paths("g2", ["x"], [], paths)
    rng = np.random.default_rng(2)
    gm = GroupedModel("b", {"A": Group(m1, table(rng.normal(size=50))),
                            "B": Group(m2, table(rng.normal(size=50)))})
    r = fit(gm)
    assert [e.label for e in r.estimates] == ["mu"]
    assert r.estimates[0].se is not None


def test_saturated_recovers_sample_moments():
    rng = np.random.default_rng(10)
    n = 10000
    X = rng.multivariate_normal([1.0, -0.5], [[2.0, 0.6], [0.6, 1.0]], size=n)
    tbl = ColumnTable({"x": ContinuousColumn(X[:, 0]),
                       "y": ContinuousColumn(X[:, 1])})
    m = RamModel.from_paths("sat", ["x", "y"], [], [
        PathSpec("x", "x", 2, True, 1.0, "vx"),
        PathSpec("y", "y", 2, True, 1.0, "vy"),
        PathSpec("x", "y", 2, True, 0.0, "cxy"),
        PathSpec("one", "x", 1, True, 0.0, "mx"),
        PathSpec("one", "y", 1, True, 0.0, "my")])
    r = fit(GroupedModel.single(m, tbl), FitOptions(compute_se=False))
    xbar = X.mean(axis=0)
    S = (X - xbar).T @ (X - xbar) / n
    est = r.estimates_dict()
    assert est["mx"] == pytest.approx(xbar[0], abs=1e-4)
    assert est["my"] == pytest.approx(xbar[1], abs=1e-4)
    assert est["vx"] == pytest.approx(S[0, 0], abs=1e-4)
    assert est["vy"] == pytest.approx(S[1, 1], abs=1e-4)
    assert est["cxy"] == pytest.approx(S[0, 1], abs=1e-4)


def test_monotone_improvement_vs_start():
    rng = np.random.default_rng(11)
    gm = GroupedModel.single(mean_model(), table(rng.normal(loc=3, size=100)))
    from ramtwin.likelihood import FimlEvaluator
    start = FimlEvaluator(gm).value_at({"mu": 0.0})
    r = fit(gm, FitOptions(compute_se=False, start_values={"mu": 0.0}))
    assert r.neg2ll <= start


def test_relabeling_keeps_neg2ll():
    rng = np.random.default_rng(13)
    data = table(rng.normal(size=60))

    def build(mu_label):
        m = RamModel.from_paths("m", ["x"], [], [
            PathSpec("x", "x", 2, True, 1.0, mu_label + "_v"),
            PathSpec("one", "x", 1, True, 0.0, mu_label)])
        return GroupedModel.single(m, data)

    r1 = fit(build("mu"), FitOptions(compute_se=False))
    r2 = fit(build("renamed"), FitOptions(compute_se=False))
    assert r1.neg2ll == r2.neg2ll


def test_start_value_robustness():
    rng = np.random.default_rng(14)
    data = table(rng.normal(loc=1.0, scale=2.0, size=200))
    m = RamModel.from_paths("m", ["x"], [], [
        PathSpec("x", "x", 2, True, 1.0, "v"),
        PathSpec("one", "x", 1, True, 0.0, "mu")])
    gm = GroupedModel.single(m, data)
    r1 = fit(gm, FitOptions(compute_se=False, start_values={"mu": -5.0, "v": 0.5}))
    r2 = fit(gm, FitOptions(compute_se=False, start_values={"mu": 4.0, "v": 9.0}))
    assert r1.neg2ll == pytest.approx(r2.neg2ll, abs=1e-4)


def test_deterministic_given_options():
    rng = np.random.default_rng(15)
    data = table(rng.normal(size=80))
    m = RamModel.from_paths("m", ["x"], [], [
        PathSpec("x", "x", 2, True, 1.0, "v"),
        PathSpec("one", "x", 1, True, 0.0, "mu")])
    gm = GroupedModel.single(m, data)
    r1 = fit(gm, FitOptions(seed=5, compute_se=False))
    r2 = fit(gm, FitOptions(seed=5, compute_se=False))
    assert r1.neg2ll == r2.neg2ll
    assert np.array_equal(r1.theta.values, r2.theta.values)


# -- likelihood-ratio tests -----------------------------------------------------


class _R:
    def __init__(self, neg2ll, nfree):
        self.neg2ll = neg2ll
        self.nfree = nfree


def test_lrt_identical_fits():
    assert lrt(_R(100.0, 3), _R(100.0, 3)) == (0.0, 0, 1.0)


def test_lrt_basic():
    chi2, df, p = lrt(_R(100.0, 5), _R(103.84, 4))
    assert chi2 == pytest.approx(3.84)
    assert df == 1
    assert p == pytest.approx(0.05, abs=0.001)


def test_lrt_negative_chi2_rejected():
    with pytest.raises(FitError, match="not nested"):
        lrt(_R(100.0, 5), _R(99.0, 4))


def test_lrt_bad_df_rejected():
    with pytest.raises(FitError, match="fewer free"):
        lrt(_R(100.0, 3), _R(110.0, 5))


def test_lrt_on_restricted_model():
    rng = np.random.default_rng(16)
    data = table(rng.normal(loc=0.02, size=300))
    m = RamModel.from_paths("m", ["x"], [], [
        PathSpec("x", "x", 2, True, 1.0, "v"),
        PathSpec("one", "x", 1, True, 0.0, "mu")])
    gm = GroupedModel.single(m, data)
    full = fit(gm, FitOptions(compute_se=False))
    nested = fit(fix_parameters(gm, {"mu": 0.0}), FitOptions(compute_se=False))
    chi2, df, p = lrt(full, nested)
    assert df == 1 and chi2 >= 0.0 and 0.0 <= p <= 1.0


# -- summaries -------------------------------------------------------------------


def test_summary_formats():
    rng = np.random.default_rng(17)
    gm = GroupedModel.single(mean_model(), table(rng.normal(size=30)))
    r = fit(gm)
    tsv = summary_table(r, "tsv")
    assert tsv.splitlines()[0] == "label\testimate\tse\tmatrix"
    csv_text = summary_table(r, "csv")
    assert csv_text.splitlines()[0] == "label,estimate,se,matrix"
    doc = json.loads(summary_table(r, "json"))
    assert doc["nfree"] == 1
    assert doc["aic"] == doc["neg2ll"] + 2
    assert doc["estimates"][0]["label"] == "mu"


def test_standard_errors_none_when_hessian_not_pd():
    # a flat direction: two labels, only their sum identified
    m = RamModel.from_paths("flat", ["x"], [], [
        PathSpec("x", "x", 2, False, 1.0),
        PathSpec("one", "x", 1, True, 0.0, "mu")])
    m = m.add_path(PathSpec("x", "x", 2, True, 1.0, "v_dup"))
    rng = np.random.default_rng(18)
    gm = GroupedModel.single(m, table(rng.normal(size=40)))
    r = fit(gm, FitOptions(compute_se=False))
    ses, msg = standard_errors(gm, r.theta)
    assert ses is not None or msg
