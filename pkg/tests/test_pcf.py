import copy
import itertools

import numpy as np
import pytest

from bgd_harmonics.exceptions import DisconnectedBase, IncompatibleStructure, InvalidStructure, InvalidSymmetry
from bgd_harmonics.network import trace
from bgd_harmonics.pcf import (
    CanonicalVertex,
    HarmonicStructure,
    PcfStructure,
    Symmetry,
    apply_symmetry,
    build_level_network,
    canonicalize,
    validate_structure,
)
from bgd_harmonics.registry import HEXAGASKET, SG, VICSEK

SG_HS = HarmonicStructure.from_json(SG)
VICSEK_HS = HarmonicStructure.from_json(VICSEK)
V0 = [CanonicalVertex((), k) for k in range(3)]


def sg_point(word, p):
    """Planar coordinates of F_word(p_p) on the gasket with corners at the unit triangle."""
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    x = corners[p]
    for a in reversed(word):
        x = (x + corners[a]) / 2
    return tuple(np.round(x, 12))


def test_sg_glued_midpoint():
    ps = SG_HS.structure
    assert canonicalize(ps, ((0,), 1)) == canonicalize(ps, ((1,), 0))


def test_sg_fixed_point_reduces_to_boundary():
    ps = SG_HS.structure
    assert canonicalize(ps, ((0, 0), 0)) == CanonicalVertex((), 0)
    assert canonicalize(ps, ((0,) * 7, 0)) == CanonicalVertex((), 0)


def test_sg_distinct_level2_points():
    ps = SG_HS.structure
    assert canonicalize(ps, ((0, 1), 2)) != canonicalize(ps, ((1, 0), 2))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sg_canonicalization_matches_coordinates(n):
    ps = SG_HS.structure
    addrs = [(w, p) for w in itertools.product(range(3), repeat=n) for p in range(3)]
    for a, b in itertools.combinations(addrs, 2):
        same_point = sg_point(*a) == sg_point(*b)
        assert (ps.canonicalize(*a) == ps.canonicalize(*b)) == same_point


def test_canonicalization_idempotent_and_congruent():
    ps = SG_HS.structure
    for w in itertools.product(range(3), repeat=2):
        for p in range(3):
            v = ps.canonicalize(w, p)
            assert ps.canonicalize(v.word, v.point) == v
    # identified addresses stay identified under a common prefix
    for prefix in itertools.product(range(3), repeat=2):
        assert ps.canonicalize(prefix + (0,), 1) == ps.canonicalize(prefix + (1,), 0)


@pytest.mark.parametrize("n", range(0, 5))
def test_sg_node_count(n):
    assert len(build_level_network(SG_HS, n)) == 3 * (3**n + 1) // 2


def test_sg_level0_and_level1_conductances():
    net0 = build_level_network(SG_HS, 0)
    assert np.allclose(net0.weights.toarray(), np.ones((3, 3)) - np.eye(3))
    net1 = build_level_network(SG_HS, 1)
    assert len(net1) == 6
    assert np.allclose(sorted(g for _, _, g in net1.edges()), [5.0 / 3.0] * 9)


@pytest.mark.parametrize("doc", [SG, HEXAGASKET, VICSEK], ids=["sg", "hexagasket", "vicsek"])
@pytest.mark.parametrize("n", [1, 2])
def test_trace_of_level_network_is_base(doc, n):
    hs = HarmonicStructure.from_json(doc)
    net = build_level_network(hs, n)
    red = trace(net, [CanonicalVertex((), k) for k in range(hs.boundary_size)])
    assert np.abs(red.weights.toarray() - hs.base_conductance).max() < 1e-10


def test_validate_passes_examples():
    for doc in (SG, HEXAGASKET, VICSEK):
        assert validate_structure(HarmonicStructure.from_json(doc)).ok


def test_wrong_renormalization_is_incompatible():
    doc = copy.deepcopy(SG)
    doc["renorm"] = [0.5, 0.5, 0.5]
    with pytest.raises(IncompatibleStructure) as info:
        validate_structure(HarmonicStructure.from_json(doc))
    assert info.value.deviation > 1e-3
    rep = validate_structure(HarmonicStructure.from_json(doc), raise_on_error=False)
    assert not rep.ok and [c.name for c in rep.failures] == ["compatible"]


def test_disconnected_base():
    doc = copy.deepcopy(SG)
    doc["conductance"] = [[0, 1, 0], [1, 0, 0], [0, 0, 0]]
    with pytest.raises(DisconnectedBase):
        validate_structure(HarmonicStructure.from_json(doc))


def test_single_letter_structure_rejected():
    with pytest.raises(InvalidStructure):
        PcfStructure(1, 2, (0, 0), frozenset())


def test_glue_identifying_boundary_points_reported():
    doc = copy.deepcopy(SG)
    doc["glue_pairs"] = doc["glue_pairs"] + [[[1, 1], [2, 2]]]
    rep = validate_structure(HarmonicStructure.from_json(doc), raise_on_error=False)
    assert "boundary_points_distinct" in [c.name for c in rep.failures]


def test_irregular_renorm_reported():
    doc = copy.deepcopy(SG)
    doc["renorm"] = [1.2, 0.6, 0.6]
    rep = validate_structure(HarmonicStructure.from_json(doc), raise_on_error=False)
    assert "regular" in [c.name for c in rep.failures]


def test_json_round_trip():
    back = HarmonicStructure.from_json(VICSEK_HS.to_json())
    assert back.to_json() == VICSEK_HS.to_json()


def test_rate_is_product():
    assert SG_HS.rate((0, 1, 2)) == pytest.approx(0.6**3)


# ------------------------------------------------------------- symmetries

ROT = VICSEK_HS.symmetries[0]


def test_identity_symmetry():
    ident = Symmetry.identity(5, 4)
    assert apply_symmetry(VICSEK_HS, ident, ((0, 4, 2), 3)) == ((0, 4, 2), 3)


def test_vicsek_rotation_order_four():
    assert not ROT.power(2).is_identity
    assert ROT.power(4).is_identity
    addr = ((0, 4), 1)
    out = addr
    for _ in range(4):
        out = apply_symmetry(VICSEK_HS, ROT, out)
    assert out == addr


def test_vicsek_rotation_on_address():
    # (word 1, point 2) -> (word 2, point 3), 1-based
    assert apply_symmetry(VICSEK_HS, ROT, ((0,), 1)) == ((1,), 2)


def test_symmetry_commutes_with_canonicalize():
    ps = VICSEK_HS.structure
    for w in itertools.product(range(5), repeat=2):
        for p in range(4):
            for other_w in itertools.product(range(5), repeat=2):
                for r in range(4):
                    if ps.canonicalize(w, p) != ps.canonicalize(other_w, r):
                        continue
                    a = apply_symmetry(VICSEK_HS, ROT, (w, p))
                    b = apply_symmetry(VICSEK_HS, ROT, (other_w, r))
                    assert ps.canonicalize(*a) == ps.canonicalize(*b)


def test_symmetry_preserves_level_network_conductances():
    net = build_level_network(VICSEK_HS, 2)
    ps = VICSEK_HS.structure
    for p, q, g in net.edges():
        a = ps.canonicalize(*apply_symmetry(VICSEK_HS, ROT, (p.word, p.point)))
        b = ps.canonicalize(*apply_symmetry(VICSEK_HS, ROT, (q.word, q.point)))
        assert net.conductance(a, b) == pytest.approx(g)


def test_invalid_symmetry_rejected():
    bad = Symmetry((1, 0, 2, 3, 4), (1, 0, 2, 3))
    with pytest.raises(InvalidSymmetry):
        apply_symmetry(VICSEK_HS, bad, ((0,), 0))
