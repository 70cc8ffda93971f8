import pytest

from ramtwin.parser import OnyxParseError, parse_exchange, parse_onyx_export
from ramtwin.paths import PathError, PathSpec, model_doc
from ramtwin.ram import GroupedModel, RamModel, pack_parameters


def test_lgc_listing_expands_to_23_paths(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    assert len(parsed.paths) == 23
    # expansion count = sum over statements of max(len(to), 1)
    assert sum(1 for p in parsed.paths if p.arrows == 1) == 16
    assert sum(1 for p in parsed.paths if p.arrows == 2) == 7
    # the three residuals share the "e" label
    residuals = [p for p in parsed.paths if p.label == "e"]
    assert len(residuals) == 3
    assert all(p.arrows == 2 and p.free for p in residuals)


def test_lgc_declarations_recovered(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    assert parsed.declared_manifests == ["x1", "x2", "x3"]
    assert parsed.declared_latents == ["icept", "slope", "a1", "e1", "a2", "e2"]


def test_lgc_source_order_preserved(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    first = parsed.paths[:3]
    assert [p.dst for p in first] == ["x1", "x2", "x3"]
    assert all(p.src == "icept" for p in first)
    assert parsed.paths[-1].src == "one" and parsed.paths[-1].dst == "x3"


def test_lgc_shared_label_packs_to_one_parameter(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    m = RamModel.from_paths("lgc", parsed.declared_manifests,
                            parsed.declared_latents, parsed.paths)
    pv = pack_parameters(GroupedModel.single(m))
    assert pv.labels.count("e") == 1


def test_lgc_diagnostics_mention_mxdata(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    assert any("mxData" in msg for _, msg in parsed.diagnostics)


def test_fixed_symmetric_path():
    parsed = parse_onyx_export(
        'mxPath(from="a1", to=c("a1"), free=c(FALSE), value=c(1.0), '
        'arrows=2, label=c("VAR_a1"))')
    assert parsed.paths == [PathSpec("a1", "a1", 2, False, 1.0, "VAR_a1")]


def test_empty_string_gives_empty_set():
    parsed = parse_onyx_export("")
    assert parsed.paths == [] and parsed.diagnostics == []


def test_scalar_broadcast():
    parsed = parse_onyx_export(
        'mxPath(from="one", to=c("x1","x2","x3"), free=F, value=0, arrows=1)')
    assert len(parsed.paths) == 3
    assert all(not p.free and p.value == 0.0 for p in parsed.paths)


def test_uncommented_mxdata_warns_not_errors():
    parsed = parse_onyx_export(
        'mxData(modelData, type = "raw")\n'
        'mxPath(from="x", to=c("x"), arrows=2, free=c(TRUE), value=c(1.0))')
    assert len(parsed.paths) == 1
    assert any("mxData" in m for _, m in parsed.diagnostics)


def test_wrapper_statements_produce_diagnostics_not_failures():
    parsed = parse_onyx_export(
        'model <- mxModel("m", type="RAM")\n'
        'require("OpenMx");\n'
        'mxPath(from="x", to=c("x"), arrows=2, free=c(T), value=c(1))')
    assert len(parsed.paths) == 1
    assert parsed.diagnostics


def test_vector_length_mismatch_rejected():
    with pytest.raises(OnyxParseError, match="does not match"):
        parse_onyx_export('mxPath(from="a", to=c("x","y"), free=c(TRUE, TRUE, TRUE))')


def test_unknown_keyword_rejected():
    with pytest.raises(OnyxParseError, match="unknown keyword"):
        parse_onyx_export('mxPath(from="a", to=c("x"), wibble=1)')


def test_unbalanced_parens_rejected():
    with pytest.raises(OnyxParseError):
        parse_onyx_export('mxPath(from="a", to=c("x"')


def test_defn_keyword_supported():
    parsed = parse_onyx_export("umxPath(defn = 'defvar')")
    assert parsed.paths == [PathSpec("defvar", defn=True, free=False, value=0.0)]


# -- exchange format ------------------------------------------------------------


def exchange_doc():
    return model_doc("m", ["x1"], ["f"], [
        PathSpec("f", "x1", 1, True, 0.9, "load"),
        PathSpec("x1", "x1", 2, True, 1.0, "res"),
    ])


def test_exchange_round_trip_is_lossless():
    doc = exchange_doc()
    parsed = parse_exchange(doc)
    out = model_doc(doc["name"], parsed.declared_manifests, parsed.declared_latents,
                    parsed.paths)
    assert out == doc


def test_lgc_listing_round_trips_through_exchange(lgc_listing):
    parsed = parse_onyx_export(lgc_listing)
    doc = model_doc("lgc", parsed.declared_manifests, parsed.declared_latents,
                    parsed.paths)
    parsed2 = parse_exchange(doc)
    assert parsed2.paths == parsed.paths


def test_empty_paths_document():
    parsed = parse_exchange({"name": "m", "manifests": [], "latents": [],
                             "defvars": [], "paths": []})
    assert parsed.paths == []


def test_arrows_out_of_domain_rejected():
    doc = exchange_doc()
    doc["paths"][0]["arrows"] = 3
    with pytest.raises(PathError, match="arrows"):
        parse_exchange(doc)


def test_unknown_path_field_rejected():
    doc = exchange_doc()
    doc["paths"][0]["extra"] = 1
    with pytest.raises(PathError, match="unknown"):
        parse_exchange(doc)
