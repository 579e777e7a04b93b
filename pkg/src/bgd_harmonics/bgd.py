"""Domain families with the boundary graph-directed property.

A spec lists, per domain ``Omega_i``, the boundary points it contains, the
level-1 cells it contains entirely, and one edge per level-1 cell that
meets both the domain and its boundary. An edge ``i -> j`` with letter ``k``
and symmetry ``kappa`` says that the part of ``Omega_i`` inside ``F_k(K)`` is
``F_k(kappa(Omega_j))``.

Everything here is combinatorial plus finite network algebra: the trace of
each domain onto its boundary points and a shorted boundary node ``BD`` is
the fixed point of the one-level assembly map, and flux transfer matrices
are read off a single Dirichlet solve on the assembled network.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import (
    CountOverflow,
    DegenerateDomain,
    Disconnection,
    DisconnectedAssembly,
    InvalidSpec,
    MissingTrace,
    NoConvergence,
    WordNotAdmissible,
)
from .network import ElectricNetwork, dirichlet_solve, resistance_matrix, trace
from .pcf import CanonicalVertex, HarmonicStructure, Symmetry, validate_symmetry
from .validation import ValidationReport, check_depth, check_positive

log = logging.getLogger(__name__)

BD = "bd"
DEFAULT_WORD_CAP = 1_000_000


@dataclass(frozen=True)
class BgdEdge:
    source: int
    target: int
    letter: int
    symmetry: Symmetry | None = None
    symmetry_index: int | None = None

    def perms(self, n_letters, n_boundary):
        sym = self.symmetry or Symmetry.identity(n_letters, n_boundary)
        return sym.letter_perm, sym.boundary_perm


@dataclass(frozen=True)
class Domain:
    in_v0: frozenset
    full_cells: frozenset

    def __post_init__(self):
        object.__setattr__(self, "in_v0", frozenset(int(k) for k in self.in_v0))
        object.__setattr__(self, "full_cells", frozenset(int(k) for k in self.full_cells))


@dataclass(frozen=True, eq=False)
class BgdSpec:
    hs: HarmonicStructure
    domains: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "edges", tuple(self.edges))
        n, q, p = self.hs.alphabet_size, self.hs.boundary_size, len(self.domains)
        if p < 1:
            raise InvalidSpec("at least one domain is required")
        for a, d in enumerate(self.domains):
            if any(not 0 <= k < q for k in d.in_v0):
                raise InvalidSpec(f"domain {a + 1}: in_v0 index out of range")
            if any(not 0 <= k < n for k in d.full_cells):
                raise InvalidSpec(f"domain {a + 1}: full cell letter out of range")
        for e, edge in enumerate(self.edges):
            if not (0 <= edge.source < p and 0 <= edge.target < p):
                raise InvalidSpec(f"edge {e + 1}: domain index out of range")
            if not 0 <= edge.letter < n:
                raise InvalidSpec(f"edge {e + 1}: letter out of range")

    @property
    def domain_count(self) -> int:
        return len(self.domains)

    @cached_property
    def _out_edges(self):
        out = [[] for _ in self.domains]
        for e, edge in enumerate(self.edges):
            out[edge.source].append(e)
        return tuple(tuple(x) for x in out)

    def edges_from(self, i: int) -> tuple:
        return self._out_edges[i]

    @classmethod
    def from_json(cls, doc, hs: HarmonicStructure | None = None) -> BgdSpec:
        """Load a spec; ``doc`` may embed the structure under ``"structure"``."""
        if isinstance(doc, str):
            doc = json.loads(doc)
        if hs is None:
            if "structure" not in doc:
                raise InvalidSpec("no harmonic structure given")
            hs = HarmonicStructure.from_json(doc["structure"])
        domains = [Domain([k - 1 for k in d["in_v0"]], [k - 1 for k in d["full_cells"]]) for d in doc["domains"]]
        edges = []
        for e, ed in enumerate(doc["edges"]):
            idx = ed.get("symmetry")
            sym = None
            if idx is not None:
                if not 1 <= idx <= len(hs.symmetries):
                    raise InvalidSpec(f"edge {e + 1}: symmetry index {idx} out of range")
                sym = hs.symmetries[idx - 1]
            edges.append(BgdEdge(ed["from"] - 1, ed["to"] - 1, ed["letter"] - 1, sym, None if idx is None else idx - 1))
        return cls(hs, domains, edges)

    def to_json(self) -> dict:
        return {
            "structure": self.hs.to_json(),
            "domains": [{"in_v0": sorted(k + 1 for k in d.in_v0), "full_cells": sorted(k + 1 for k in d.full_cells)} for d in self.domains],
            "edges": [
                {
                    "from": e.source + 1,
                    "to": e.target + 1,
                    "letter": e.letter + 1,
                    "symmetry": None if e.symmetry_index is None else e.symmetry_index + 1,
                }
                for e in self.edges
            ],
        }

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class AddressTransform:
    """Combinatorial map ``(w, l) -> (prefix + s(w), sigma(l))``."""

    prefix: tuple
    letter_perm: tuple
    boundary_perm: tuple

    def __call__(self, word, point):
        return self.prefix + tuple(self.letter_perm[a] for a in word), self.boundary_perm[point]

    def compose(self, other: AddressTransform) -> AddressTransform:
        """Return ``self o other``."""
        return AddressTransform(
            self.prefix + tuple(self.letter_perm[a] for a in other.prefix),
            tuple(self.letter_perm[a] for a in other.letter_perm),
            tuple(self.boundary_perm[a] for a in other.boundary_perm),
        )


def edge_transform(spec: BgdSpec, e: int) -> AddressTransform:
    edge = spec.edges[e]
    s, sigma = edge.perms(spec.hs.alphabet_size, spec.hs.boundary_size)
    return AddressTransform((edge.letter,), tuple(s), tuple(sigma))


@dataclass(frozen=True, eq=False)
class AdmissibleWord:
    spec: BgdSpec
    source: int
    edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(int(e) for e in self.edges))
        at = self.source
        for t, e in enumerate(self.edges):
            if not 0 <= e < len(self.spec.edges):
                raise WordNotAdmissible(f"unknown edge index {e + 1}")
            if self.spec.edges[e].source != at:
                raise WordNotAdmissible(f"edge {e + 1} at position {t + 1} does not start at domain {at + 1}")
            at = self.spec.edges[e].target

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        return isinstance(other, AdmissibleWord) and (self.source, self.edges) == (other.source, other.edges)

    def __hash__(self):
        return hash((self.source, self.edges))

    def __lt__(self, other):
        return (self.source, self.edges) < (other.source, other.edges)

    @property
    def target(self) -> int:
        return self.spec.edges[self.edges[-1]].target if self.edges else self.source

    @property
    def rate(self) -> float:
        return self.spec.hs.rate([self.spec.edges[e].letter for e in self.edges])

    @property
    def transform(self) -> AddressTransform:
        n, q = self.spec.hs.alphabet_size, self.spec.hs.boundary_size
        out = AddressTransform((), tuple(range(n)), tuple(range(q)))
        for e in self.edges:
            out = out.compose(edge_transform(self.spec, e))
        return out

    @property
    def parent(self) -> AdmissibleWord:
        if not self.edges:
            raise ValueError("empty word has no parent")
        return AdmissibleWord(self.spec, self.source, self.edges[:-1])

    def extend(self, e: int) -> AdmissibleWord:
        return AdmissibleWord(self.spec, self.source, self.edges + (e,))

    def suffix(self, start: int) -> AdmissibleWord:
        src = self.spec.edges[self.edges[start]].source if start < len(self.edges) else self.target
        return AdmissibleWord(self.spec, src, self.edges[start:])

    @property
    def label(self) -> str:
        return format_word(self.edges)

    def __repr__(self):
        return f"AdmissibleWord(domain={self.source + 1}, {self.label})"


def format_word(edges) -> str:
    return "".join(f"g{e + 1}" for e in edges) if len(edges) else "-"


def parse_word(spec: BgdSpec, source: int, text: str) -> AdmissibleWord:
    """Inverse of :func:`format_word`; accepts ``g1g2``, ``1.2`` or ``-``."""
    import re

    text = text.strip()
    if text in ("", "-"):
        return AdmissibleWord(spec, source, ())
    if text.startswith("g"):
        parts = re.fullmatch(r"(g\d+)+", text) and re.findall(r"g(\d+)", text)
    else:
        parts = re.fullmatch(r"\d+(\.\d+)*", text) and text.split(".")
    if not parts:
        raise WordNotAdmissible(f"cannot parse word {text!r}")
    return AdmissibleWord(spec, source, [int(p) - 1 for p in parts])


def enumerate_words(spec: BgdSpec, i: int, m: int, cap: int = DEFAULT_WORD_CAP) -> list:
    """All admissible words of length ``m`` from domain ``i``, lexicographic in edge order."""
    check_depth("m", m)
    level = [()]
    at = [i]
    for _ in range(m):
        nxt, nat = [], []
        for w, d in zip(level, at):
            for e in spec.edges_from(d):
                nxt.append(w + (e,))
                nat.append(spec.edges[e].target)
        if len(nxt) > cap:
            raise CountOverflow(f"more than {cap} admissible words of length {m}")
        level, at = nxt, nat
    return [AdmissibleWord(spec, i, w) for w in level]


# ---------------------------------------------------------------- validation


def level1_membership(spec: BgdSpec, i: int):
    """Membership of level-1 vertices in ``Omega_i`` by the cell rule.

    Returns ``(member, conflicts)`` where ``member`` maps a canonical vertex
    to True/False and ``conflicts`` lists vertices whose membership depends
    on the cell used to reach them.
    """
    hs, dom = spec.hs, spec.domains[i]
    ps = hs.structure
    votes = {}
    for k in range(ps.alphabet_size):
        edge_here = [e for e in spec.edges_from(i) if spec.edges[e].letter == k]
        for p in range(ps.boundary_size):
            v = ps.canonicalize((k,), p)
            if k in dom.full_cells:
                inside = True
            elif edge_here:
                edge = spec.edges[edge_here[0]]
                _, sigma = edge.perms(ps.alphabet_size, ps.boundary_size)
                ell = sigma.index(p)
                inside = ell in spec.domains[edge.target].in_v0
            else:
                inside = False
            votes.setdefault(v, set()).add(inside)
    member = {v: True in s for v, s in votes.items()}
    conflicts = sorted(v for v, s in votes.items() if len(s) > 1)
    return member, conflicts


def validate_bgd(spec: BgdSpec, depth: int = 12) -> ValidationReport:
    """Check every combinatorial invariant of ``spec``; never raises on failures."""
    hs = spec.hs
    ps = hs.structure
    report = ValidationReport("bgd_spec")
    for e, edge in enumerate(spec.edges):
        if edge.symmetry is not None:
            try:
                validate_symmetry(hs, edge.symmetry)
                report.check(f"edge[{e + 1}].symmetry", True)
            except Exception as exc:
                report.check(f"edge[{e + 1}].symmetry", False, str(exc))
    for i, dom in enumerate(spec.domains):
        tag = f"domain[{i + 1}]"
        out = spec.edges_from(i)
        letters = [spec.edges[e].letter for e in out]
        report.check(f"{tag}.edges_nonempty", bool(out), "domain has no outgoing edge")
        dup = sorted({a + 1 for a in letters if letters.count(a) > 1})
        report.check(f"{tag}.letters_unique", not dup, f"letters {dup} used by more than one edge")
        clash = sorted(a + 1 for a in set(letters) & dom.full_cells)
        report.check(f"{tag}.cells_disjoint", not clash, f"letters {clash} are both full cells and edge cells")
        if dom.in_v0:
            bad = [e + 1 for e in out if not spec.domains[spec.edges[e].target].in_v0]
            report.check(
                f"{tag}.v0_closure",
                not bad,
                f"edges {bad} lead to domains without boundary points although domain {i + 1} has some",
            )
        member, conflicts = level1_membership(spec, i)
        report.check(
            f"{tag}.membership_consistent",
            not conflicts,
            f"glued level-1 vertices with inconsistent membership: {[str(v) for v in conflicts]}",
        )
        rule = {k for k in range(ps.boundary_size) if member.get(CanonicalVertex((), k), False)}
        report.check(
            f"{tag}.v0_membership",
            rule == set(dom.in_v0),
            f"in_v0 {sorted(k + 1 for k in dom.in_v0)} differs from cell rule {sorted(k + 1 for k in rule)}",
        )
        ok, msg = _level1_connected(spec, i, member)
        report.check(f"{tag}.level1_connected", ok, msg)
    n0, bad_depths = boundary_depth_diagnostic(spec, depth)
    report.check(
        "deep_domains_meet_v0",
        n0 is not None,
        f"words of length {bad_depths[-1] if bad_depths else '?'} end in domains without boundary points",
        value=n0,
    )
    return report


def _level1_connected(spec, i, member):
    """Connectivity of full cells and edge attachments, with attachments joined through BD."""
    hs = spec.hs
    ps = hs.structure
    dom = spec.domains[i]
    edges = []
    nodes = {BD}
    for k in dom.full_cells:
        vs = [ps.canonicalize((k,), p) for p in range(ps.boundary_size)]
        nodes.update(vs)
        edges += [(vs[0], v, 1.0) for v in vs[1:]]
    for e in spec.edges_from(i):
        edge = spec.edges[e]
        _, sigma = edge.perms(ps.alphabet_size, ps.boundary_size)
        for ell in spec.domains[edge.target].in_v0:
            v = ps.canonicalize((edge.letter,), sigma[ell])
            nodes.add(v)
            edges.append((v, BD, 1.0))
    for k in dom.in_v0:
        nodes.add(CanonicalVertex((), k))
    if not dom.full_cells and not spec.edges_from(i):
        return False, "domain has neither full cells nor edges"
    net = ElectricNetwork.from_edges(edges, sorted(nodes, key=str))
    if net.is_connected():
        return True, ""
    comp = net.components()
    lonely = [str(p) for p, c in zip(net.nodes, comp) if c != comp[net.index(BD)]]
    return False, f"level-1 pieces not connected to the rest: {lonely[:6]}"


def boundary_depth_diagnostic(spec: BgdSpec, depth: int):
    """Smallest ``n0 <= depth`` after which every word ends in a domain meeting ``V_0``.

    Returns ``(n0 or None, depths that fail)``. Only lengths up to ``depth``
    are inspected.
    """
    reach = set(range(spec.domain_count))
    bad = []
    for n in range(1, depth + 1):
        reach = {spec.edges[e].target for d in reach for e in spec.edges_from(d)}
        if any(not spec.domains[d].in_v0 for d in reach):
            bad.append(n)
    n0 = (bad[-1] + 1) if bad else 1
    return (n0 if n0 <= depth else None), bad


# ----------------------------------------------------------------- traces


@dataclass(frozen=True, eq=False)
class DomainTrace:
    """Reduced network of ``Omega_i`` on its boundary points and ``BD``.

    ``shorted`` lists boundary indices that the approximation merged into
    ``BD``; they are absent from ``network``.
    """

    domain: int
    network: ElectricNetwork
    shorted: frozenset = frozenset()

    def resistance_table(self, in_v0) -> dict:
        """Effective resistances between all pairs of ``in_v0`` points and ``BD``."""
        labels = sorted(in_v0) + [BD]
        net_res = resistance_matrix(self.network)
        where = {p: self.network.index(p) for p in self.network.nodes}
        out = {}
        for a in labels:
            for b in labels:
                if a == b:
                    continue
                xa = BD if a in self.shorted else a
                xb = BD if b in self.shorted else b
                out[(a, b)] = 0.0 if xa == xb else float(net_res[where[xa], where[xb]])
        return out


@dataclass(frozen=True, eq=False)
class DomainTraceSet:
    spec: BgdSpec
    traces: tuple
    cut_traces: tuple
    iterations: int
    width: float
    tol: float
    history: tuple = field(default=())

    def __getitem__(self, i):
        return self.traces[i]

    def resistance(self, i: int, k: int) -> float:
        """``R(BD, p_k)`` in the converged short-side trace of domain ``i``."""
        return self.traces[i].resistance_table(self.spec.domains[i].in_v0)[(k, BD)]

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "width": self.width,
            "tol": self.tol,
            "traces": [
                {"domain": t.domain + 1, "shorted": sorted(k + 1 for k in t.shorted), "network": _trace_json(t.network)}
                for t in self.traces
            ],
            "cut_traces": [
                {"domain": t.domain + 1, "shorted": sorted(k + 1 for k in t.shorted), "network": _trace_json(t.network)}
                for t in self.cut_traces
            ],
        }

    @classmethod
    def from_json(cls, spec: BgdSpec, doc) -> DomainTraceSet:
        def load(items):
            return tuple(
                DomainTrace(t["domain"] - 1, _trace_from_json(t["network"]), frozenset(k - 1 for k in t["shorted"])) for t in items
            )

        return cls(spec, load(doc["traces"]), load(doc["cut_traces"]), doc["iterations"], doc["width"], doc["tol"])


def _trace_json(net):
    lab = lambda p: "bd" if p == BD else p + 1  # noqa: E731
    return {"nodes": [lab(p) for p in net.nodes], "edges": [[lab(p), lab(q), g] for p, q, g in net.edges()]}


def _trace_from_json(doc):
    lab = lambda p: BD if p == "bd" else p - 1  # noqa: E731
    return ElectricNetwork.from_edges(((lab(p), lab(q), g) for p, q, g in doc["edges"]), [lab(p) for p in doc["nodes"]])


@dataclass(frozen=True)
class CopyRecord:
    """One edge copy inside an assembled domain network."""

    edge: int
    attachments: dict  # copy label l -> assembly node
    conductances: tuple  # (assembly node a, assembly node b, g) after scaling


@dataclass(frozen=True)
class NodeMap:
    domain: int
    v0_nodes: dict  # k -> assembly node (BD when shorted)
    copies: tuple


def assemble_domain_network(spec: BgdSpec, i: int, traces) -> tuple:
    """One-level decomposition of ``Omega_i`` with edge cells replaced by trace copies.

    ``traces`` maps a domain index to its :class:`DomainTrace` (a sequence
    works). Returns ``(network, NodeMap)``.
    """
    hs = spec.hs
    ps = hs.structure
    dom = spec.domains[i]
    c0 = hs.base_conductance
    q = ps.boundary_size
    merged = {}
    raw = []
    for k in sorted(dom.full_cells):
        vs = [ps.canonicalize((k,), p) for p in range(q)]
        raw += [(vs[a], vs[b], c0[a, b] / hs.renorm[k]) for a in range(q) for b in range(a + 1, q) if c0[a, b] > 0]
    copy_specs = []
    for e in spec.edges_from(i):
        edge = spec.edges[e]
        try:
            t = traces[edge.target]
        except (KeyError, IndexError) as exc:
            raise MissingTrace(f"no trace for domain {edge.target + 1} needed by edge {e + 1}") from exc
        if t is None:
            raise MissingTrace(f"no trace for domain {edge.target + 1} needed by edge {e + 1}")
        _, sigma = edge.perms(ps.alphabet_size, q)
        attach = {}
        for ell in sorted(spec.domains[edge.target].in_v0):
            node = ps.canonicalize((edge.letter,), sigma[ell])
            attach[ell] = node
            if ell in t.shorted:
                merged[node] = BD
        scale = 1.0 / hs.renorm[edge.letter]
        local = [(attach.get(a, BD) if a != BD else BD, attach.get(b, BD) if b != BD else BD, g * scale) for a, b, g in t.network.edges()]
        copy_specs.append((e, attach, local))
        raw += local

    def m(x):
        return merged.get(x, x)

    kept = [ps.canonicalize((), k) for k in sorted(dom.in_v0)]
    nodes = [BD] + sorted({m(x) for a, b, _ in raw for x in (a, b)} - {BD} | {m(v) for v in kept} - {BD})
    net = ElectricNetwork.from_edges(((m(a), m(b), g) for a, b, g in raw), nodes)
    copies = tuple(
        CopyRecord(e, {ell: m(v) for ell, v in attach.items()}, tuple((m(a), m(b), g) for a, b, g in local if m(a) != m(b)))
        for e, attach, local in copy_specs
    )
    v0_nodes = {k: m(ps.canonicalize((), k)) for k in sorted(dom.in_v0)}
    return net, NodeMap(i, v0_nodes, copies)


def _reduce_assembly(spec, i, net, nmap) -> DomainTrace:
    kept = [v for v in nmap.v0_nodes.values() if v != BD] + [BD]
    try:
        red = trace(net, kept)
    except Disconnection as exc:
        raise DisconnectedAssembly(f"domain {i + 1}: {exc}") from exc
    shorted = frozenset(k for k, v in nmap.v0_nodes.items() if v == BD)
    relabel = {v: k for k, v in nmap.v0_nodes.items() if v != BD}
    relabel[BD] = BD
    return DomainTrace(i, red.relabel(relabel), shorted)


def short_initial_trace(spec: BgdSpec, i: int) -> DomainTrace:
    """Assembly of ``Omega_i`` with every edge cell's attachments merged into ``BD``."""
    empty = {d: DomainTrace(d, ElectricNetwork([BD], np.zeros((1, 1))), frozenset(spec.domains[d].in_v0)) for d in range(spec.domain_count)}
    net, nmap = assemble_domain_network(spec, i, empty)
    return _reduce_assembly(spec, i, net, nmap)


def cut_initial_trace(spec: BgdSpec, i: int) -> DomainTrace:
    """Base network on ``V_0`` with points outside ``Omega_i`` merged into ``BD``.

    This lower bound (in the order of quadratic forms) holds because the
    energy of any function on ``K`` dominates the base energy of its
    restriction to ``V_0``.
    """
    hs = spec.hs
    inside = spec.domains[i].in_v0
    lab = [k if k in inside else BD for k in range(hs.boundary_size)]
    c0 = hs.base_conductance
    q = hs.boundary_size
    edges = [(lab[a], lab[b], c0[a, b]) for a in range(q) for b in range(a + 1, q) if lab[a] != lab[b]]
    net = ElectricNetwork.from_edges(edges, sorted(inside) + [BD])
    return DomainTrace(i, net)


def _bracket_width(spec, shorts, cuts):
    width = 0.0
    for i, (ts, tc) in enumerate(zip(shorts, cuts)):
        inside = spec.domains[i].in_v0
        if not inside:
            continue
        rs = ts.resistance_table(inside)
        rc = tc.resistance_table(inside)
        for key in rs:
            a, b = rs[key], rc[key]
            if np.isinf(b) or np.isinf(a):
                return np.inf
            width = max(width, abs(b - a))
    return width


def domain_trace_fixed_point(spec: BgdSpec, tol: float = 1e-10, max_iter: int = 10_000, record_history: bool = False) -> DomainTraceSet:
    """Iterate the assembly map from a shorted and a cut start until the resistance bracket closes.

    All domains update together each round. Returns the short-side traces;
    ``width`` is the final maximum gap between cut-side and short-side
    effective resistances.
    """
    check_positive("tol", tol)
    check_depth("max_iter", max_iter)
    p = spec.domain_count
    try:
        shorts = tuple(short_initial_trace(spec, i) for i in range(p))
    except DisconnectedAssembly as exc:
        raise DegenerateDomain(str(exc)) from exc
    cuts = tuple(cut_initial_trace(spec, i) for i in range(p))
    width = _bracket_width(spec, shorts, cuts)
    history = [_snapshot(spec, shorts, cuts, width)] if record_history else []
    it = 0
    while not width < tol:
        if it >= max_iter:
            raise NoConvergence(f"bracket width {width:.3e} after {it} iterations", width=width, iterations=it)
        try:
            shorts = tuple(_reduce_assembly(spec, i, *assemble_domain_network(spec, i, shorts)) for i in range(p))
            cuts = tuple(_reduce_assembly(spec, i, *assemble_domain_network(spec, i, cuts)) for i in range(p))
        except DisconnectedAssembly as exc:
            raise DegenerateDomain(str(exc)) from exc
        it += 1
        width = _bracket_width(spec, shorts, cuts)
        if record_history:
            history.append(_snapshot(spec, shorts, cuts, width))
    for i, t in enumerate(shorts):
        if spec.domains[i].in_v0 and not t.network.is_connected():
            raise DegenerateDomain(f"domain {i + 1}: trace network is disconnected")
    log.debug("trace fixed point: %d iterations, width %.3e", it, width)
    return DomainTraceSet(spec, shorts, cuts, it, float(width), tol, tuple(history))


def _snapshot(spec, shorts, cuts, width):
    return {
        "width": width,
        "short": [t.resistance_table(spec.domains[i].in_v0) for i, t in enumerate(shorts)],
        "cut": [t.resistance_table(spec.domains[i].in_v0) for i, t in enumerate(cuts)],
    }


# ------------------------------------------------------------------ fluxes


@dataclass(frozen=True, eq=False)
class FluxTransferSet:
    """Flux transfer matrices, one ``Q x Q`` matrix per edge.

    ``potentials[(i, k)]`` is the normalized potential ``v`` on the assembly
    of ``Omega_i`` (unit flux into ``p_k``); ``resistances[(i, k)]`` is
    ``R(BD, p_k)``.
    """

    spec: BgdSpec
    matrices: np.ndarray
    potentials: dict
    resistances: dict
    width: float = 0.0

    def __getitem__(self, e):
        return self.matrices[e]

    def __len__(self):
        return len(self.matrices)

    def to_json(self) -> list:
        return [{"edge": e + 1, "matrix": [[float(x) for x in row] for row in m]} for e, m in enumerate(self.matrices)]

    def with_matrices(self, matrices) -> FluxTransferSet:
        return FluxTransferSet(self.spec, np.asarray(matrices, dtype=float), self.potentials, self.resistances, self.width)


def flux_transfer_matrices(spec: BgdSpec, traces: DomainTraceSet) -> FluxTransferSet:
    """Solve the unit-flux problem in each assembled domain and read off copy-local fluxes."""
    q = spec.hs.boundary_size
    mats = np.zeros((len(spec.edges), q, q))
    potentials, resistances = {}, {}
    for i, dom in enumerate(spec.domains):
        if not dom.in_v0:
            continue
        net, nmap = assemble_domain_network(spec, i, traces.traces)
        for k in sorted(dom.in_v0):
            pk = nmap.v0_nodes[k]
            if pk == BD:
                raise DegenerateDomain(f"domain {i + 1}: p_{k + 1} is shorted to the boundary")
            phi = dirichlet_solve(net, {BD: 0.0, pk: 1.0})
            flux = sum(g * (1.0 - phi[x]) for x, g in net.neighbors(pk).items())
            if not flux > 0:
                raise DegenerateDomain(f"domain {i + 1}: no flux reaches p_{k + 1}")
            v = {x: val / flux for x, val in phi.items()}
            potentials[(i, k)] = v
            resistances[(i, k)] = 1.0 / flux
            for rec in nmap.copies:
                for ell, a in rec.attachments.items():
                    s = 0.0
                    for x, y, g in rec.conductances:
                        if x == a:
                            s += g * (v[a] - v[y])
                        elif y == a:
                            s += g * (v[a] - v[x])
                    mats[rec.edge, k, ell] = s
    return FluxTransferSet(spec, mats, potentials, resistances, traces.width)
