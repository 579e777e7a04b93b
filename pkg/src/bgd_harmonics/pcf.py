"""Post-critically finite self-similar structures with a regular harmonic structure.

Letters and boundary indices are 0-based in memory; JSON documents use the
1-based numbering common in the literature and are converted on load.

A vertex of ``V_n`` is addressed by ``(word, p)``, meaning ``F_word(p_p)``.
Because boundary points are fixed points of single maps and cells only meet
at images of boundary points, every vertex has a unique normal form: strip
trailing letters while the last level-1 vertex is a boundary point, then
replace the last ``(letter, p)`` by the smallest member of its glue class.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    DepthOverflow,
    DisconnectedBase,
    IncompatibleStructure,
    InvalidStructure,
    InvalidSymmetry,
)
from .network import ElectricNetwork, trace
from .validation import ValidationReport

DEFAULT_NODE_CAP = 2_000_000


@dataclass(frozen=True, order=True)
class CanonicalVertex:
    """Normal-form address of a vertex; ``depth`` is the first level it appears in."""

    word: tuple[int, ...]
    point: int

    @property
    def depth(self) -> int:
        return len(self.word)

    def __str__(self):
        w = "".join(str(a + 1) for a in self.word) if all(a < 9 for a in self.word) else ".".join(
            str(a + 1) for a in self.word
        )
        return f"F{w}(p{self.point + 1})" if self.word else f"p{self.point + 1}"


@dataclass(frozen=True)
class Symmetry:
    """Combinatorial symmetry ``kappa`` with ``kappa o F_i = F_{s(i)} o kappa``."""

    letter_perm: tuple[int, ...]
    boundary_perm: tuple[int, ...]

    @classmethod
    def identity(cls, n_letters: int, n_boundary: int) -> Symmetry:
        return cls(tuple(range(n_letters)), tuple(range(n_boundary)))

    def compose(self, other: Symmetry) -> Symmetry:
        """Return ``self o other``."""
        return Symmetry(
            tuple(self.letter_perm[a] for a in other.letter_perm),
            tuple(self.boundary_perm[a] for a in other.boundary_perm),
        )

    def power(self, n: int) -> Symmetry:
        out = Symmetry.identity(len(self.letter_perm), len(self.boundary_perm))
        for _ in range(n):
            out = self.compose(out)
        return out

    @property
    def is_identity(self) -> bool:
        return self.letter_perm == tuple(range(len(self.letter_perm))) and self.boundary_perm == tuple(
            range(len(self.boundary_perm))
        )


@dataclass(frozen=True)
class PcfStructure:
    alphabet_size: int
    boundary_size: int
    fixed_point_letter: tuple[int, ...]
    glue_pairs: frozenset

    def __post_init__(self):
        n, q = self.alphabet_size, self.boundary_size
        if n < 2:
            raise InvalidStructure(f"alphabet_size must be >= 2, got {n}")
        if q < 2:
            raise InvalidStructure(f"boundary_size must be >= 2, got {q}")
        if len(self.fixed_point_letter) != q:
            raise InvalidStructure("fixed_point_letter needs one letter per boundary point")
        if any(not 0 <= a < n for a in self.fixed_point_letter):
            raise InvalidStructure("fixed_point_letter out of range")
        pairs = frozenset(frozenset(map(tuple, pair)) for pair in self.glue_pairs)
        for pair in pairs:
            if len(pair) != 2:
                raise InvalidStructure(f"glue pair {sorted(pair)} must join two distinct cell vertices")
            (i, p), (j, r) = sorted(pair)
            if i == j:
                raise InvalidStructure(f"glue pair {sorted(pair)} joins a cell to itself")
            if not (0 <= i < n and 0 <= j < n and 0 <= p < q and 0 <= r < q):
                raise InvalidStructure(f"glue pair {sorted(pair)} out of range")
        object.__setattr__(self, "glue_pairs", pairs)

    @cached_property
    def _v1_classes(self):
        """Union-find over level-1 vertex addresses ``(letter, p)``."""
        parent = {(i, p): (i, p) for i in range(self.alphabet_size) for p in range(self.boundary_size)}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for pair in self.glue_pairs:
            a, b = sorted(pair)
            parent[find(b)] = find(a)
        classes = {}
        for x in parent:
            classes.setdefault(find(x), []).append(x)
        rep, bpoint = {}, {}
        for members in classes.values():
            members.sort()
            fixed = [p for (i, p) in members if self.fixed_point_letter[p] == i]
            for x in members:
                rep[x] = members[0]
                bpoint[x] = fixed
        return rep, bpoint, classes

    def v1_class(self, letter: int, point: int) -> list:
        rep, _, classes = self._v1_classes
        return [m for m in classes.values() if rep[(letter, point)] in m][0]

    def boundary_glue_conflicts(self) -> list:
        """Level-1 classes that identify two distinct boundary points."""
        _, bpoint, classes = self._v1_classes
        return [sorted(m) for m in classes.values() if len(bpoint[m[0]]) > 1]

    def canonicalize(self, word, point: int) -> CanonicalVertex:
        return _canonicalize(self, tuple(word), int(point))

    def level1_quotient_connected(self) -> bool:
        rep, _, _ = self._v1_classes
        labels = {}
        edges = []
        for i in range(self.alphabet_size):
            ids = [labels.setdefault(rep[(i, p)], len(labels)) for p in range(self.boundary_size)]
            edges += [(ids[0], b) for b in ids[1:]]
        adj = np.zeros((len(labels), len(labels)))
        for a, b in edges:
            adj[a, b] = adj[b, a] = 1
        return connected_components(adj, directed=False)[0] == 1


@lru_cache(maxsize=1 << 20)
def _canonicalize(ps: PcfStructure, word: tuple, point: int) -> CanonicalVertex:
    rep, bpoint, _ = ps._v1_classes
    while word:
        key = (word[-1], point)
        fixed = bpoint[key]
        if fixed:
            word, point = word[:-1], fixed[0]
            continue
        letter, p = rep[key]
        return CanonicalVertex(word[:-1] + (letter,), p)
    return CanonicalVertex((), point)


def canonicalize(ps: PcfStructure, addr) -> CanonicalVertex:
    """Normal form of the address ``(word, p)``; equal iff same point of ``V_n``."""
    word, point = addr
    return ps.canonicalize(word, point)


@dataclass(frozen=True, eq=False)
class HarmonicStructure:
    structure: PcfStructure
    base_conductance: np.ndarray
    renorm: np.ndarray
    symmetries: tuple[Symmetry, ...] = field(default=())

    def __post_init__(self):
        q, n = self.structure.boundary_size, self.structure.alphabet_size
        c0 = np.array(self.base_conductance, dtype=float)
        r = np.array(self.renorm, dtype=float)
        if c0.shape != (q, q):
            raise InvalidStructure(f"conductance must be {q}x{q}")
        if r.shape != (n,):
            raise InvalidStructure(f"renorm must have {n} entries")
        if not np.allclose(c0, c0.T) or (c0 < 0).any() or np.any(np.diag(c0) != 0):
            raise InvalidStructure("conductance must be symmetric, nonnegative, zero diagonal")
        c0.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "base_conductance", c0)
        object.__setattr__(self, "renorm", r)
        object.__setattr__(self, "symmetries", tuple(self.symmetries))

    @property
    def alphabet_size(self):
        return self.structure.alphabet_size

    @property
    def boundary_size(self):
        return self.structure.boundary_size

    def rate(self, word) -> float:
        return float(np.prod([self.renorm[a] for a in word])) if len(word) else 1.0

    def base_network(self) -> ElectricNetwork:
        return build_level_network(self, 0)

    @classmethod
    def from_json(cls, doc) -> HarmonicStructure:
        if isinstance(doc, str):
            doc = json.loads(doc)
        n, q = int(doc["alphabet_size"]), int(doc["boundary_size"])
        ps = PcfStructure(
            n,
            q,
            tuple(int(a) - 1 for a in doc["fixed_point_letter"]),
            frozenset(frozenset((int(i) - 1, int(p) - 1) for i, p in pair) for pair in doc["glue_pairs"]),
        )
        syms = tuple(
            Symmetry(tuple(int(a) - 1 for a in s["letter_perm"]), tuple(int(a) - 1 for a in s["boundary_perm"]))
            for s in doc.get("symmetries", [])
        )
        return cls(ps, np.array(doc["conductance"], dtype=float), np.array(doc["renorm"], dtype=float), syms)

    def to_json(self) -> dict:
        ps = self.structure
        return {
            "alphabet_size": ps.alphabet_size,
            "boundary_size": ps.boundary_size,
            "fixed_point_letter": [a + 1 for a in ps.fixed_point_letter],
            "glue_pairs": sorted([[i + 1, p + 1] for i, p in sorted(pair)] for pair in ps.glue_pairs),
            "conductance": self.base_conductance.tolist(),
            "renorm": self.renorm.tolist(),
            "symmetries": [
                {"letter_perm": [a + 1 for a in s.letter_perm], "boundary_perm": [a + 1 for a in s.boundary_perm]}
                for s in self.symmetries
            ],
        }


def build_level_network(hs: HarmonicStructure, n: int, node_cap: int = DEFAULT_NODE_CAP) -> ElectricNetwork:
    """Network on ``V_n`` whose energy is ``E_n``.

    Each ``n``-cell ``F_w(K)`` adds ``c0(p, q) / r_w`` between the images of
    ``p_p`` and ``p_q``.
    """
    if n < 0:
        raise ValueError("depth must be nonnegative")
    ps = hs.structure
    q = ps.boundary_size
    pairs = [(p, s, hs.base_conductance[p, s]) for p in range(q) for s in range(p + 1, q) if hs.base_conductance[p, s] > 0]
    nodes = {}
    edges = []
    for word in itertools.product(range(ps.alphabet_size), repeat=n):
        rate = hs.rate(word)
        verts = [ps.canonicalize(word, p) for p in range(q)]
        for v in verts:
            nodes.setdefault(v, None)
        if len(nodes) > node_cap:
            raise DepthOverflow(f"level-{n} network exceeds {node_cap} nodes")
        edges += [(verts[p], verts[s], g / rate) for p, s, g in pairs]
    return ElectricNetwork.from_edges(edges, list(nodes))


def _check_symmetry(hs: HarmonicStructure, sym: Symmetry) -> list[str]:
    ps = hs.structure
    n, q = ps.alphabet_size, ps.boundary_size
    problems = []
    if sorted(sym.letter_perm) != list(range(n)) or sorted(sym.boundary_perm) != list(range(q)):
        return ["permutations have the wrong size or repeat entries"]
    s, sigma = sym.letter_perm, sym.boundary_perm
    c0 = hs.base_conductance
    if not np.allclose(c0[np.ix_(sigma, sigma)], c0):
        problems.append("does not preserve base conductances")
    if not np.allclose(hs.renorm[list(s)], hs.renorm):
        problems.append("does not preserve renormalization factors")
    for pair in ps.glue_pairs:
        (i, p), (j, r) = sorted(pair)
        if frozenset({(s[i], sigma[p]), (s[j], sigma[r])}) not in ps.glue_pairs:
            problems.append(f"maps glue pair {sorted(pair)} outside the glue relation")
            break
    for k in range(q):
        if ps.fixed_point_letter[sigma[k]] != s[ps.fixed_point_letter[k]]:
            problems.append(f"moves the fixed-point letter of boundary point {k}")
            break
    return problems


def validate_symmetry(hs: HarmonicStructure, sym: Symmetry) -> None:
    problems = _check_symmetry(hs, sym)
    if problems:
        raise InvalidSymmetry("; ".join(problems))


def apply_symmetry(ps_or_hs, sym: Symmetry, addr, validate: bool = True):
    """Map ``(word, p)`` to ``(s(word), sigma(p))``."""
    if validate and isinstance(ps_or_hs, HarmonicStructure):
        validate_symmetry(ps_or_hs, sym)
    word, p = addr
    return tuple(sym.letter_perm[a] for a in word), sym.boundary_perm[p]


def level1_trace_deviation(hs: HarmonicStructure) -> float:
    """Max entrywise gap between the trace of ``E_1`` to ``V_0`` and ``c0``."""
    net1 = build_level_network(hs, 1)
    v0 = [CanonicalVertex((), k) for k in range(hs.boundary_size)]
    red = trace(net1, v0)
    got = red.weights.toarray()
    return float(np.abs(got - hs.base_conductance).max())


def validate_structure(hs: HarmonicStructure, tol: float = 1e-12, raise_on_error: bool = True) -> ValidationReport:
    """Check every harmonic-structure invariant; see :class:`ValidationReport`.

    Raises :class:`DisconnectedBase` or :class:`IncompatibleStructure` for the
    two fatal failures unless ``raise_on_error`` is false.
    """
    ps = hs.structure
    report = ValidationReport("harmonic_structure")
    c0 = hs.base_conductance
    base_ok = connected_components(c0 > 0, directed=False)[0] == 1
    report.check("base_connected", base_ok, "(V_0, c0) must be connected")
    report.check("regular", bool(np.all((hs.renorm > 0) & (hs.renorm < 1))), "all r_i must lie in (0, 1)")
    conflicts = ps.boundary_glue_conflicts()
    report.check("boundary_points_distinct", not conflicts, f"glue identifies boundary points: {conflicts}")
    report.check("level1_connected", ps.level1_quotient_connected(), "level-1 cell graph is disconnected")
    for a, sym in enumerate(hs.symmetries):
        problems = _check_symmetry(hs, sym)
        report.check(f"symmetry[{a}]", not problems, "; ".join(problems))
    deviation = None
    if base_ok and not conflicts:
        deviation = level1_trace_deviation(hs)
        report.check(
            "compatible",
            deviation <= tol,
            f"trace of E_1 deviates from c0 by {deviation:.3e} (tol {tol:.1e})",
            value=deviation,
        )
    if raise_on_error:
        if not base_ok:
            raise DisconnectedBase("base network (V_0, c0) is disconnected")
        if deviation is not None and deviation > tol:
            raise IncompatibleStructure(
                f"trace of E_1 to V_0 deviates from c0 by {deviation:.3e}", deviation=deviation, report=report
            )
    return report
