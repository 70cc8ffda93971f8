import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramtwin.parser import parse_onyx_export
from ramtwin.paths import PathSpec, PathError
from ramtwin.ram import (GroupedModel, Group, ModelError, RamModel,
                         SingularModelError, fix_parameters, pack_parameters,
                         reachable_defvar_targets, unpack_parameters)


def model_2var():
    return RamModel("m", ["x", "y"], ["f"])


def test_trivial_moments_identity():
    m = RamModel.from_paths("t", ["x", "y"], [], [
        PathSpec("x", "x", 2, False, 1.0),
        PathSpec("y", "y", 2, False, 1.0)])
    mu, sigma = m.expected_moments()
    assert np.array_equal(mu, np.zeros(2))
    assert np.array_equal(sigma, np.eye(2))


def test_single_variable_moments():
    m = RamModel.from_paths("t", ["x"], [], [
        PathSpec("x", "x", 2, False, 2.5),
        PathSpec("one", "x", 1, False, 1.0)])
    mu, sigma = m.expected_moments()
    assert mu[0] == 1.0 and sigma[0, 0] == 2.5


def test_lgc_sigma_matches_dense_oracle(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    m = RamModel.from_paths("lgc", ["x1", "x2", "x3"],
                            ["icept", "slope", "a1", "e1", "a2", "e2"],
                            parsed.paths)
    mu, sigma = m.expected_moments()
    n = m.nvar
    B = np.linalg.inv(np.eye(n) - m.A_val)
    full_sigma = B @ m.S_val @ B.T
    full_mu = B @ m.M_val
    assert np.allclose(sigma, full_sigma[:3, :3], atol=1e-12)
    assert np.allclose(mu, full_mu[:3], atol=1e-12)
    # filtering is pure selection: manifest block of the unfiltered moments
    assert sigma.shape == (3, 3)


def test_one_headed_fixed_path_cell():
    m = model_2var().add_path(PathSpec("f", "x", 1, False, 1.0, "icept__x1"))
    i, j = m.index("x"), m.index("f")
    assert m.A_val[i, j] == 1.0 and not m.A_free[i, j]
    assert m.A_lab[i, j] == "icept__x1"


def test_defn_spec_registers_proxy():
    m = model_2var().add_path(PathSpec("varA1", defn=True, free=False, value=0.0))
    assert "varA1" in m.defvars
    assert "def_varA1" in m.variables
    i = m.index("def_varA1")
    assert m.S_val[i, i] == 0.0 and m.M_lab[i] == "def_varA1"
    # idempotent
    m2 = m.add_path(PathSpec("varA1", defn=True, free=False, value=0.0))
    assert m2.defvars == ("varA1",)


def test_symmetric_diagonal_idempotent():
    m = model_2var()
    m = m.add_path(PathSpec("x", "x", 2, True, 1.0, "e"))
    m = m.add_path(PathSpec("x", "x", 2, True, 1.0, "e"))
    i = m.index("x")
    assert m.S_val[i, i] == 1.0 and m.S_lab[i, i] == "e" and m.S_free[i, i]


def test_unknown_variable_rejected():
    with pytest.raises(ModelError, match="unknown variable"):
        model_2var().add_path(PathSpec("nope", "x", 1, True, 1.0, "b"))


def test_bad_arrows_rejected():
    with pytest.raises(PathError):
        PathSpec("x", "y", 3, True, 1.0)


def test_two_headed_into_one_rejected():
    with pytest.raises(ModelError, match="one"):
        model_2var().add_path(PathSpec("one", "x", 2, False, 1.0))


def test_def_label_free_cell_rejected():
    with pytest.raises(PathError, match="def_"):
        PathSpec("x", "y", 1, True, 1.0, "def_varA1")


def test_def_label_requires_declared_defvar():
    with pytest.raises(ModelError, match="not declared"):
        model_2var().add_path(PathSpec("x", "y", 1, False, 1.0, "def_varA1"))


def test_singular_structure_raises():
    m = RamModel.from_paths("c", ["x", "y"], [], [
        PathSpec("x", "y", 1, False, 1.0),
        PathSpec("y", "x", 1, False, 1.0),
        PathSpec("x", "x", 2, False, 1.0),
        PathSpec("y", "y", 2, False, 1.0)])
    with pytest.raises(SingularModelError):
        m.expected_moments()


def test_missing_defrow_entry_rejected():
    m = model_2var().add_path(PathSpec("z", defn=True, free=False, value=0.0))
    with pytest.raises(ModelError, match="definition"):
        m.expected_moments(defrow=None)
    with pytest.raises(ModelError, match="missing"):
        m.expected_moments(defrow={"other": 1.0})


def test_def_substitution_moves_mean():
    m = RamModel.from_paths("d", ["x"], [], [
        PathSpec("z", defn=True, free=False, value=0.0),
        PathSpec("def_z", "x", 1, False, 0.5),
        PathSpec("x", "x", 2, False, 1.0)])
    mu1, _ = m.expected_moments(defrow={"z": 2.0})
    mu2, _ = m.expected_moments(defrow={"z": -4.0})
    assert mu1[0] == pytest.approx(1.0)
    assert mu2[0] == pytest.approx(-2.0)


# -- pack / unpack -------------------------------------------------------------


def grouped_two():
    paths = [PathSpec("x", "x", 2, True, 1.2, "a1"),
             PathSpec("one", "x", 1, True, 0.3, "mu")]
    m1 = RamModel.from_paths("g1", ["x"], [], paths)
    m2 = RamModel.from_paths("g2", ["x"], [], paths)
    return GroupedModel("both", {"MZ": Group(m1), "DZ": Group(m2)})


def test_shared_label_packs_once():
    pv = pack_parameters(grouped_two())
    assert pv.labels == ["a1", "mu"]
    assert list(pv.values) == [1.2, 0.3]


def test_zero_free_cells_empty_vector():
    m = RamModel.from_paths("f", ["x"], [], [PathSpec("x", "x", 2, False, 1.0)])
    pv = pack_parameters(GroupedModel.single(m))
    assert len(pv) == 0


def test_conflicting_free_flags_rejected():
    m = RamModel.from_paths("c", ["x", "y"], [], [
        PathSpec("x", "x", 2, True, 1.0, "v"),
        PathSpec("y", "y", 2, False, 1.0, "v")])
    with pytest.raises(ModelError, match="conflicting"):
        pack_parameters(GroupedModel.single(m))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2),
       st.floats(0.1, 3.0))
def test_pack_unpack_round_trip(vals, var):
    gm = grouped_two()
    pv = pack_parameters(gm)
    theta = pv.with_values(np.array([var, vals[0]]))
    gm2 = unpack_parameters(gm, theta)
    pv2 = pack_parameters(gm2)
    assert pv2.labels == pv.labels
    assert np.allclose(pv2.values, theta.values)


def test_fix_parameters_turns_cells_fixed():
    gm = fix_parameters(grouped_two(), {"a1": 2.0})
    pv = pack_parameters(gm)
    assert pv.labels == ["mu"]
    assert gm.groups["MZ"].model.S_val[0, 0] == 2.0


def test_fix_unknown_label_rejected():
    with pytest.raises(ModelError, match="not present"):
        fix_parameters(grouped_two(), {"zzz": 0.0})


# -- properties ---------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.2, 2.0), st.floats(-1.0, 1.0))
def test_sigma_exactly_symmetric(beta, var, cov):
    m = RamModel.from_paths("s", ["x", "y", "z"], [], [
        PathSpec("x", "y", 1, True, beta, "b"),
        PathSpec("y", "z", 1, True, beta / 2, "b2"),
        PathSpec("x", "x", 2, True, var, "vx"),
        PathSpec("y", "y", 2, True, var, "vy"),
        PathSpec("z", "z", 2, True, var, "vz"),
        PathSpec("x", "z", 2, True, cov * var / 2, "cxz")])
    _, sigma = m.expected_moments()
    assert np.array_equal(sigma, sigma.T)


def test_reachable_defvar_mean_target():
    m = RamModel.from_paths("r", ["p", "q"], [], [
        PathSpec("z", defn=True, free=False, value=0.0),
        PathSpec("def_z", "p", 1, True, 0.1, "beta"),
        PathSpec("p", "p", 2, False, 1.0),
        PathSpec("q", "q", 2, False, 1.0)])
    assert reachable_defvar_targets(m, "z") == {"p"}


def test_reachable_defvar_no_outgoing_is_empty():
    m = RamModel.from_paths("r", ["p"], [], [
        PathSpec("z", defn=True, free=False, value=0.0),
        PathSpec("p", "p", 2, False, 1.0)])
    assert reachable_defvar_targets(m, "z") == set()


def test_reachable_defvar_through_latent_hits_all():
    m = RamModel.from_paths("r", ["p", "q"], ["f"], [
        PathSpec("z", defn=True, free=False, value=0.0),
        PathSpec("def_z", "f", 1, True, 0.1, "beta"),
        PathSpec("f", "p", 1, False, 1.0),
        PathSpec("f", "q", 1, False, 1.0),
        PathSpec("p", "p", 2, False, 1.0),
        PathSpec("q", "q", 2, False, 1.0)])
    assert reachable_defvar_targets(m, "z") == {"p", "q"}


def test_defvar_locality_of_moments():
    m = RamModel.from_paths("loc", ["p", "q"], [], [
        PathSpec("z", defn=True, free=False, value=0.0),
        PathSpec("def_z", "p", 1, False, 0.7),
        PathSpec("p", "p", 2, False, 1.0),
        PathSpec("q", "q", 2, False, 1.5),
        PathSpec("one", "q", 1, False, 0.4)])
    mu1, s1 = m.expected_moments(defrow={"z": 0.0})
    mu2, s2 = m.expected_moments(defrow={"z": 9.9})
    iq = m.manifests.index("q")
    assert mu1[iq] == mu2[iq]
    assert np.array_equal(s1, s2)


def test_exchange_doc_round_trip():
    m = RamModel.from_paths("x", ["p"], ["f"], [
        PathSpec("f", "p", 1, True, 0.9, "load"),
        PathSpec("f", "f", 2, False, 1.0),
        PathSpec("p", "p", 2, True, 1.0, "res"),
        PathSpec("one", "p", 1, True, 0.0, "mean_p")])
    doc = m.to_doc()
    assert set(doc) == {"name", "manifests", "latents", "defvars", "paths"}
    assert all(set(p) == {"from", "to", "arrows", "free", "value", "label", "defn"}
               for p in doc["paths"])
    m2 = RamModel.from_paths(doc["name"], doc["manifests"], doc["latents"],
                             [PathSpec.from_json_dict(p) for p in doc["paths"]])
    assert np.array_equal(m.A_val, m2.A_val)
    assert np.array_equal(m.S_val, m2.S_val)
    assert np.array_equal(m.M_val, m2.M_val)
