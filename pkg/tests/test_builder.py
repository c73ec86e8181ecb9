import jsonschema
import numpy as np
import pytest

from stericzip.builder import (
    BuildRecipe,
    assemble_fibril,
    build_model,
    find_clashes,
    load_template,
    strand_axes,
)
from stericzip.errors import AddressError, ParseError, StructureError
from stericzip.structure import Atom, Chain, Residue, Structure, parse_pdb
from stericzip.transforms import OPTIMIZED_SHEET_TRANSLATION, SHEET_FLIP, AffineTransform, apply


@pytest.fixture(scope="module")
def template(fixture_pdb_text):
    return parse_pdb(fixture_pdb_text)


@pytest.fixture(scope="module")
def model1(template):
    return build_model(BuildRecipe.for_model(1, optimizer="lbfgs"), template)


def test_bundled_template_matches_fixture(template):
    assert load_template() == template


def test_recipe_json_round_trip(schema):
    r = BuildRecipe.for_model(3, seed=9, config={"saec.generations": 20})
    doc = r.to_json()
    jsonschema.validate(doc, schema("recipe"))
    assert BuildRecipe.from_json(doc) == r
    assert r.optimizer_config().saec.generations == 20


@pytest.mark.parametrize(
    "change",
    [
        {"sequence": "AGA"},
        {"sequence": "AGAAAV"},
        {"transform": "other"},
        {"optimizer": "newton"},
        {"contact_distance": -1.0},
        {"template": "x.pdb", "fetch_id": "3NHD"},
        {"edges": [["s0", "q1"]]},
        {"sensors": ["not an address"]},
        {"config": {"sa.nope": 1}},
    ],
)
def test_recipe_validation(change):
    with pytest.raises((ValueError, ParseError)):
        BuildRecipe.for_model(1, **change)


def test_recipe_from_json_errors():
    with pytest.raises(ParseError):
        BuildRecipe.from_json("{")
    with pytest.raises(ParseError):
        BuildRecipe.from_json({"model": 1, "colour": "red"})
    with pytest.raises(ParseError):
        BuildRecipe.from_json({"model": 1, "seed": "x", "optimizer": "nope"})


def test_model1_contacts(model1, schema):
    core, report, result = model1
    assert core.chain_ids == ("A", "B", "G", "H")
    assert report.objective_final <= 1e-8
    for e in report.edges:
        assert e.optimized == pytest.approx(3.4, abs=1e-3)
    # template coordinates carry 3-decimal rounding
    assert [e.initial for e in report.edges] == pytest.approx([7.82, 9.04, 8.36], abs=0.01)
    assert report.sheet2_source == "template"
    doc = report.to_json()
    jsonschema.validate(doc, schema("contact-report"))
    assert doc["contacts"][0]["u"] == "H3.ALA.CB"


def test_model1_sequence_threaded(model1):
    core = model1.core
    for c in "ABGH":
        assert core.chain(c).sequence == ("ALA", "GLY", "ALA", "ALA", "ALA", "ALA")


def test_sheet2_is_rigid_image(model1):
    core, report, _ = model1
    tf = AffineTransform(SHEET_FLIP, OPTIMIZED_SHEET_TRANSLATION)
    image = apply(tf, core.select_chains("AB"), {"A": "G", "B": "H"})
    np.testing.assert_array_equal(core.select_chains("GH").coordinates(), image.coordinates())
    assert tuple(report.translation) == OPTIMIZED_SHEET_TRANSLATION


def test_hbonds_kept(model1):
    report = model1.report
    assert report.hbonds_retained_fraction == 1.0
    assert report.hbond_counts.get("A-B", 0) > 0


def test_derived_transform(template):
    out = build_model(BuildRecipe.for_model(1, optimizer="lbfgs", transform="derived"), template)
    rep = out.report
    np.testing.assert_array_equal(rep.translation, rep.derived_translation)
    # per sensor, the emitted point misses the solved one by exactly that pair's spread
    for e, spread in zip(rep.edges[:2], rep.derived_spread):
        assert abs(e.emitted - e.optimized) <= spread + 1e-9


def test_template_without_sheet2(template):
    plain = template.select_chains("AB")
    out = build_model(BuildRecipe.for_model(2, optimizer="lbfgs"), plain)
    assert out.report.sheet2_source == "template-transform"
    assert any(i.infeasible for i in out.report.infeasibility)


def test_bad_addresses(template):
    with pytest.raises(AddressError):
        build_model(BuildRecipe.for_model(1, optimizer="lbfgs", sensors=("A3.CB", "H5.CB")), template)
    with pytest.raises(AddressError):
        build_model(BuildRecipe.for_model(1, optimizer="lbfgs"), template.select_chains("B"))


def test_assemble_fibril(model1):
    fibril = assemble_fibril(model1.core)
    assert fibril.chain_ids == tuple("ABCDEFGHIJKL")
    assert fibril.n_atoms() == 12 * sum(1 for _ in model1.core.chain("A").atoms())
    with pytest.raises(StructureError):
        assemble_fibril(model1.core.select_chains("ABG"))


def test_find_clashes():
    def chain(cid, x):
        return Chain(cid, (Residue("ALA", 1, (Atom(1, "CA", "C", (x, 0.0, 0.0)), Atom(2, "CB", "C", (x, 1.0, 0.0)))),))

    s = Structure((chain("A", 0.0), chain("B", 1.5)))
    clashes = find_clashes(s)
    assert [c[2] for c in clashes] == pytest.approx([1.5, 1.5, 13**0.5 / 2, 13**0.5 / 2])
    assert all(a[0] != b[0] for a, b, _ in clashes)  # same-chain CA-CB (1.0) ignored


def test_strand_axes(template):
    axes = strand_axes(template, ["A", "G"])
    for axis in axes.values():
        assert axis.cosine >= 1 - 1e-6
        assert axis.n_points == 6
    one = Structure((Chain("A", (template.chain("A").residues[0],)),))
    with pytest.raises(StructureError):
        strand_axes(one, ["A"])


def test_five_residue_window(template):
    r = BuildRecipe.for_model(
        1, sequence="AGAAA", window=(127, 131), anchors=("B5.CB", "B3.CB"),
        sensors=("H3.CB", "H5.CB"), optimizer="lbfgs",
    )
    core = build_model(r, template).core
    assert [x.seq for x in core.chain("A").residues] == [1, 2, 3, 4, 5]
    with pytest.raises(AddressError):
        build_model(BuildRecipe.for_model(1, sequence="AGAAA", window=(127, 131), optimizer="lbfgs"), template)
