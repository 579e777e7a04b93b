"""Compiled-in example structures and domain families.

Indices in the documents below are 1-based, as in every JSON input.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from .bgd import BgdSpec

SQ69 = math.sqrt(69.0)

SG = {
    "alphabet_size": 3,
    "boundary_size": 3,
    "fixed_point_letter": [1, 2, 3],
    "glue_pairs": [[[1, 2], [2, 1]], [[2, 3], [3, 2]], [[1, 3], [3, 1]]],
    "conductance": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
    "renorm": [0.6, 0.6, 0.6],
    "symmetries": [],
}


def _hexagon_conductance():
    by_distance = {1: 1.0, 2: 2.0 / 7.0, 3: 1.0 / 7.0}
    return [[0.0 if p == q else by_distance[min((p - q) % 6, (q - p) % 6)] for q in range(6)] for p in range(6)]


HEXAGASKET = {
    "alphabet_size": 6,
    "boundary_size": 6,
    "fixed_point_letter": [1, 2, 3, 4, 5, 6],
    # F_i(p_{i+2}) = F_{i+1}(p_{i-1}), indices mod 6
    "glue_pairs": [[[i + 1, (i + 2) % 6 + 1], [(i + 1) % 6 + 1, (i - 1) % 6 + 1]] for i in range(6)],
    "conductance": _hexagon_conductance(),
    "renorm": [3.0 / 7.0] * 6,
    "symmetries": [],
}

VICSEK = {
    "alphabet_size": 5,
    "boundary_size": 4,
    "fixed_point_letter": [1, 2, 3, 4],
    # the centre cell F_5 touches corner cell k at F_5(p_k) = F_k(p_{k+2})
    "glue_pairs": [[[5, k + 1], [k + 1, (k + 2) % 4 + 1]] for k in range(4)],
    "conductance": [[0 if p == q else 1 for q in range(4)] for p in range(4)],
    "renorm": [1.0 / 3.0] * 5,
    # quarter turn about the centre: p_k -> p_{k+1}
    "symmetries": [{"letter_perm": [2, 3, 4, 1, 5], "boundary_perm": [2, 3, 4, 1]}],
}


@dataclass(frozen=True)
class Golden:
    """Reference value; ``provenance`` is ``PUBLISHED`` (closed form from the literature) or ``DERIVED``."""

    value: object
    provenance: str


@dataclass(frozen=True)
class ExampleEntry:
    name: str
    description: str
    document: dict
    golden: dict = field(default_factory=dict)

    def spec(self) -> BgdSpec:
        return BgdSpec.from_json(copy.deepcopy(self.document))


def _matrix(q, entries):
    m = [[0.0] * q for _ in range(q)]
    for (a, b), x in entries.items():
        m[a - 1][b - 1] = x
    return m


EXAMPLES = {
    "sg-bottom": ExampleEntry(
        "sg-bottom",
        "Sierpinski gasket above its bottom edge; the domain is F_1(Omega) u F_2(Omega) u F_3(K)",
        {
            "structure": SG,
            "domains": [{"in_v0": [3], "full_cells": [3]}],
            "edges": [{"from": 1, "to": 1, "letter": 1, "symmetry": None}, {"from": 1, "to": 1, "letter": 2, "symmetry": None}],
        },
        {
            "resistance": Golden({(1, 3): 3.0 / 7.0}, "PUBLISHED"),
            "matrices": Golden([_matrix(3, {(3, 3): 0.5}), _matrix(3, {(3, 3): 0.5})], "PUBLISHED"),
        },
    ),
    "sg-cut": ExampleEntry(
        "sg-cut",
        "Sierpinski gasket cut by the vertical line through p_3 (domain 1) and K minus p_2 (domain 2)",
        {
            "structure": SG,
            "domains": [{"in_v0": [1], "full_cells": []}, {"in_v0": [1, 3], "full_cells": [1, 3]}],
            "edges": [
                {"from": 1, "to": 1, "letter": 3, "symmetry": None},
                {"from": 1, "to": 2, "letter": 1, "symmetry": None},
                {"from": 2, "to": 2, "letter": 2, "symmetry": None},
            ],
        },
        {
            "matrices": Golden(
                [
                    _matrix(3, {(1, 1): 1.0 / 3.0}),
                    _matrix(3, {(1, 1): 1.0, (1, 3): -1.0 / 3.0}),
                    _matrix(3, {(1, 1): 2.0 / 3.0, (1, 3): 1.0 / 3.0, (3, 1): 1.0 / 3.0, (3, 3): 2.0 / 3.0}),
                ],
                "PUBLISHED",
            ),
        },
    ),
    "hexagasket": ExampleEntry(
        "hexagasket",
        "Hexagasket above the diameter p_1 p_4",
        {
            "structure": HEXAGASKET,
            "domains": [{"in_v0": [5, 6], "full_cells": [5, 6]}],
            "edges": [{"from": 1, "to": 1, "letter": 1, "symmetry": None}, {"from": 1, "to": 1, "letter": 4, "symmetry": None}],
        },
        {
            "matrices": Golden(
                [
                    _matrix(6, {(5, 5): 1.0 / 3.0, (6, 5): 2.0 / 3.0}),
                    _matrix(6, {(5, 6): 2.0 / 3.0, (6, 6): 1.0 / 3.0}),
                ],
                "PUBLISHED",
            ),
        },
    ),
    "vicsek": ExampleEntry(
        "vicsek",
        "Vicsek set minus its bottom edge (domain 1) and minus its bottom and right edges (domain 2)",
        {
            "structure": VICSEK,
            "domains": [{"in_v0": [3, 4], "full_cells": [3, 4, 5]}, {"in_v0": [4], "full_cells": [4, 5]}],
            "edges": [
                {"from": 1, "to": 1, "letter": 1, "symmetry": None},
                {"from": 1, "to": 1, "letter": 2, "symmetry": None},
                {"from": 2, "to": 1, "letter": 1, "symmetry": None},
                {"from": 2, "to": 1, "letter": 3, "symmetry": 1},
                {"from": 2, "to": 2, "letter": 2, "symmetry": None},
            ],
        },
        {
            "matrices": Golden(
                [
                    _matrix(4, {(3, 3): 0.5, (4, 3): 0.5}),
                    _matrix(4, {(3, 4): 0.5, (4, 4): 0.5}),
                    _matrix(4, {(4, 3): (SQ69 - 7) / 4}),
                    _matrix(4, {(4, 4): (SQ69 - 7) / 4}),
                    _matrix(4, {(4, 4): (9 - SQ69) / 2}),
                ],
                "PUBLISHED",
            ),
        },
    ),
}


def get_example(name: str) -> ExampleEntry:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None


def example_names() -> list:
    return list(EXAMPLES)
