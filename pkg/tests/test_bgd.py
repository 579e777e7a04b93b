import copy
import math

import numpy as np
import pytest

from bgd_harmonics.bgd import (
    BD,
    AdmissibleWord,
    BgdSpec,
    DomainTraceSet,
    assemble_domain_network,
    boundary_depth_diagnostic,
    domain_trace_fixed_point,
    enumerate_words,
    flux_transfer_matrices,
    format_word,
    parse_word,
    validate_bgd,
)
from bgd_harmonics.exceptions import CountOverflow, MissingTrace, NoConvergence, WordNotAdmissible
from bgd_harmonics.network import trace
from bgd_harmonics.pcf import CanonicalVertex
from bgd_harmonics.registry import EXAMPLES

SQ69 = math.sqrt(69.0)


def spec_of(name, edit=None):
    doc = copy.deepcopy(EXAMPLES[name].document)
    if edit:
        edit(doc)
    return BgdSpec.from_json(doc)


def failed(spec):
    return {c.name: c.message for c in validate_bgd(spec).failures}


@pytest.mark.parametrize("name", list(EXAMPLES))
def test_examples_validate(name):
    rep = validate_bgd(EXAMPLES[name].spec())
    assert rep.ok, rep.failures


def test_missing_full_cell_fails_coverage():
    def edit(doc):
        doc["domains"][0]["full_cells"] = []

    bad = failed(spec_of("sg-bottom", edit))
    assert "domain[1].level1_connected" in bad
    assert "domain[1].v0_membership" in bad


def test_vicsek_edge_without_rotation_is_inconsistent():
    def edit(doc):
        doc["edges"][3]["symmetry"] = None

    bad = failed(spec_of("vicsek", edit))
    assert "domain[2].membership_consistent" in bad


def test_v0_closure_names_edge():
    def edit(doc):
        doc["domains"][1]["in_v0"] = []

    bad = failed(spec_of("sg-cut", edit))
    assert "edges [2]" in bad["domain[1].v0_closure"]


def test_domain_without_edges_is_invalid():
    def edit(doc):
        doc["edges"] = [e for e in doc["edges"] if e["from"] != 1]

    bad = failed(spec_of("sg-bottom", edit))
    assert "domain[1].edges_nonempty" in bad


def test_letter_used_twice_and_full_cell_clash():
    def edit(doc):
        doc["edges"].append({"from": 1, "to": 1, "letter": 3, "symmetry": None})
        doc["edges"].append({"from": 1, "to": 1, "letter": 1, "symmetry": None})

    bad = failed(spec_of("sg-bottom", edit))
    assert "domain[1].letters_unique" in bad
    assert "domain[1].cells_disjoint" in bad


def test_boundary_depth_diagnostic():
    assert boundary_depth_diagnostic(EXAMPLES["sg-cut"].spec(), 6) == (1, [])


# --------------------------------------------------------------- words


def test_enumerate_words_examples():
    sgb = EXAMPLES["sg-bottom"].spec()
    assert [w.label for w in enumerate_words(sgb, 0, 2)] == ["g1g1", "g1g2", "g2g1", "g2g2"]
    assert [w.label for w in enumerate_words(sgb, 0, 0)] == ["-"]
    cut = EXAMPLES["sg-cut"].spec()
    assert [w.label for w in enumerate_words(cut, 0, 2)] == ["g1g1", "g1g2", "g2g3"]
    vic = EXAMPLES["vicsek"].spec()
    assert [w.label for w in enumerate_words(vic, 1, 1)] == ["g3", "g4", "g5"]


def test_enumerate_words_cap():
    with pytest.raises(CountOverflow):
        enumerate_words(EXAMPLES["hexagasket"].spec(), 0, 12, cap=1000)


def test_word_parsing_and_admissibility():
    cut = EXAMPLES["sg-cut"].spec()
    w = parse_word(cut, 0, "g1g2")
    assert w.edges == (0, 1) and w.target == 1 and w.label == "g1g2"
    assert parse_word(cut, 0, "1.2") == w
    assert format_word(()) == "-"
    with pytest.raises(WordNotAdmissible):
        parse_word(cut, 0, "g2g1")
    with pytest.raises(WordNotAdmissible):
        parse_word(cut, 0, "gx")


def test_word_rate_and_transform():
    vic = EXAMPLES["vicsek"].spec()
    w = AdmissibleWord(vic, 1, (3, 0))  # g4 (letter 3, rotation) then g1
    assert w.rate == pytest.approx(1.0 / 9.0)
    tr = w.transform
    # the rotation acts on the later letters and the boundary point
    assert tr((), 0) == ((2, 1), 1)
    assert w.parent.edges == (3,)
    assert w.suffix(1).edges == (0,) and w.suffix(1).source == 0


# ---------------------------------------------------------------- traces


def test_sg_bottom_assembly_conductance(solved):
    s = solved("sg-bottom")
    net, nmap = assemble_domain_network(s.spec, 0, s.traces.traces)
    red = trace(net, [nmap.v0_nodes[2], BD])
    assert red.conductance(nmap.v0_nodes[2], BD) == pytest.approx(7.0 / 3.0, abs=1e-9)
    assert s.traces.resistance(0, 2) == pytest.approx(3.0 / 7.0, abs=1e-9)


def test_hexagasket_assembly_shares_boundary_node(solved):
    s = solved("hexagasket")
    net, nmap = assemble_domain_network(s.spec, 0, s.traces.traces)
    assert list(net.nodes).count(BD) == 1
    assert len(nmap.copies) == 2
    for rec in nmap.copies:
        assert any(BD in (a, b) for a, b, _ in rec.conductances)
    ps = s.spec.hs.structure
    # the copy through letter 1 attaches its p_5 at F_1(p_5)
    assert nmap.copies[0].attachments[4] == ps.canonicalize((0,), 4)


def test_missing_trace():
    spec = EXAMPLES["sg-bottom"].spec()
    with pytest.raises(MissingTrace):
        assemble_domain_network(spec, 0, {})


def test_huge_tolerance_returns_short_start():
    spec = EXAMPLES["sg-bottom"].spec()
    ts = domain_trace_fixed_point(spec, tol=1e6)
    assert ts.iterations == 0
    assert ts.traces[0].network.conductance(2, BD) > 0


def test_no_convergence():
    with pytest.raises(NoConvergence) as info:
        domain_trace_fixed_point(EXAMPLES["sg-cut"].spec(), tol=1e-10, max_iter=2)
    assert info.value.iterations == 2 and info.value.width > 1e-10


@pytest.mark.parametrize("name", list(EXAMPLES))
def test_bracket_nested_and_monotone(name):
    spec = EXAMPLES[name].spec()
    ts = domain_trace_fixed_point(spec, tol=1e-10, record_history=True)
    hist = ts.history
    assert hist[-1]["width"] < 1e-10
    for t, snap in enumerate(hist):
        for i, (rs, rc) in enumerate(zip(snap["short"], snap["cut"])):
            for key in rs:
                assert rc[key] >= rs[key] - 1e-12
                if t:
                    assert rs[key] >= hist[t - 1]["short"][i][key] - 1e-12
                    assert rc[key] <= hist[t - 1]["cut"][i][key] + 1e-12


def test_trace_set_json_round_trip(solved):
    s = solved("vicsek")
    back = DomainTraceSet.from_json(s.spec, s.traces.to_json())
    assert back.iterations == s.traces.iterations
    assert back.resistance(1, 3) == pytest.approx(s.traces.resistance(1, 3), abs=1e-15)


def test_spec_json_round_trip():
    spec = EXAMPLES["vicsek"].spec()
    back = BgdSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()
    assert back.fingerprint() == spec.fingerprint()


# ---------------------------------------------------------------- fluxes


def test_sg_bottom_matrices(solved):
    m = solved("sg-bottom").flux.matrices
    expect = np.zeros((3, 3))
    expect[2, 2] = 0.5
    assert np.abs(m - expect).max() < 1e-9


def test_sg_cut_matrices(solved):
    m = solved("sg-cut").flux.matrices
    assert m[0, 0, 0] == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert m[1, 0, 0] == pytest.approx(1.0, abs=1e-9)
    assert m[1, 0, 2] == pytest.approx(-1.0 / 3.0, abs=1e-9)
    assert np.allclose(m[2][[0, 2]], [[2 / 3, 0, 1 / 3], [1 / 3, 0, 2 / 3]], atol=1e-9)


def test_vicsek_matrices(solved):
    m = solved("vicsek").flux.matrices
    assert m[2, 3, 2] == pytest.approx((SQ69 - 7) / 4, abs=1e-9)
    assert m[3, 3, 3] == pytest.approx((SQ69 - 7) / 4, abs=1e-9)
    assert m[4, 3, 3] == pytest.approx((9 - SQ69) / 2, abs=1e-9)


def test_zero_rows_and_columns(example):
    spec, m = example.spec, example.flux.matrices
    q = spec.hs.boundary_size
    for e, edge in enumerate(spec.edges):
        for k in range(q):
            if k not in spec.domains[edge.source].in_v0:
                assert not m[e, k].any()
            if k not in spec.domains[edge.target].in_v0:
                assert not m[e, :, k].any()


def test_row_sums_and_positivity(example):
    spec, m = example.spec, example.flux.matrices
    for i, k in example.points():
        sums = [m[e, k].sum() for e in spec.edges_from(i)]
        assert all(s > 0 for s in sums)
        assert sum(sums) == pytest.approx(1.0, abs=1e-10)


def test_product_row_sums_nonnegative(example):
    spec, m = example.spec, example.flux.matrices
    for i, k in example.points():
        for w in enumerate_words(spec, i, 4):
            row = np.eye(spec.hs.boundary_size)[k]
            for e in w.edges:
                row = row @ m[e]
            assert row.sum() >= -1e-12


def test_resistance_agrees_with_potential(solved):
    s = solved("sg-bottom")
    v = s.flux.potentials[(0, 2)]
    assert v[CanonicalVertex((), 2)] == pytest.approx(3.0 / 7.0, abs=1e-9)
    assert s.flux.resistances[(0, 2)] == pytest.approx(3.0 / 7.0, abs=1e-9)
