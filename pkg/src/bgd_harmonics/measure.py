"""Boundary hitting measures as matrix products, Poisson values and boundary energies.

For ``p_k`` in ``Omega_i`` the mass of the cylinder of an admissible word
``g_1 ... g_m`` is ``e_k^T M_{g_1} ... M_{g_m} 1``. Every routine below works
with a :class:`~bgd_harmonics.bgd.FluxTransferSet`; ``harmonic_energy`` also
needs the converged domain traces.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bgd import BD, AdmissibleWord, DomainTraceSet, FluxTransferSet, enumerate_words, format_word, parse_word
from .exceptions import CountOverflow, DepthMismatch, DepthOverflow, MissingV0Data, NoComparablePoints, WordNotAdmissible
from .network import ElectricNetwork, dirichlet_solve
from .pcf import HarmonicStructure
from .validation import check_depth

DEFAULT_WORD_CAP = 1_000_000


@dataclass(frozen=True, eq=False)
class CylinderMeasureContext:
    """The measure ``mu_{i,k}`` generated by a flux transfer set."""

    flux: FluxTransferSet
    domain: int
    point: int

    def __post_init__(self):
        spec = self.flux.spec
        if not 0 <= self.domain < spec.domain_count:
            raise ValueError(f"domain index {self.domain + 1} out of range")
        if self.point not in spec.domains[self.domain].in_v0:
            raise ValueError(f"p_{self.point + 1} is not a boundary point inside domain {self.domain + 1}")

    @property
    def spec(self):
        return self.flux.spec

    @property
    def matrices(self) -> np.ndarray:
        return self.flux.matrices


def _as_word(spec, i, word) -> AdmissibleWord:
    if isinstance(word, AdmissibleWord):
        if word.source != i:
            raise WordNotAdmissible(f"word starts at domain {word.source + 1}, expected {i + 1}")
        return word
    if isinstance(word, str):
        return parse_word(spec, i, word)
    return AdmissibleWord(spec, i, tuple(word))


def _row_product(matrices, q, k, edges):
    row = np.zeros(q)
    row[k] = 1.0
    for e in edges:
        row = row @ matrices[e]
    return row


def cylinder_measure(ctx: CylinderMeasureContext, word) -> float:
    """``mu_{i,k}`` of the cylinder of ``word``; the empty word gives 1."""
    w = _as_word(ctx.spec, ctx.domain, word)
    return float(_row_product(ctx.matrices, ctx.spec.hs.boundary_size, ctx.point, w.edges).sum())


def _row_vectors(spec, matrices, i, k, m, cap=DEFAULT_WORD_CAP):
    """Row vectors ``e_k^T M_w`` for every ``w`` in ``Gamma_m(i)``, in lexicographic order."""
    q = spec.hs.boundary_size
    start = np.zeros(q)
    start[k] = 1.0
    level = [((), i, start)]
    for _ in range(m):
        nxt = []
        for w, d, row in level:
            for e in spec.edges_from(d):
                nxt.append((w + (e,), spec.edges[e].target, row @ matrices[e]))
        if len(nxt) > cap:
            raise CountOverflow(f"more than {cap} admissible words of length {m}")
        level = nxt
    return level


def measure_vector(ctx: CylinderMeasureContext, m: int, cap: int = DEFAULT_WORD_CAP) -> dict:
    """Masses of all depth-``m`` cylinders, keyed by :class:`AdmissibleWord` in lexicographic order."""
    check_depth("m", m)
    spec = ctx.spec
    return {
        AdmissibleWord(spec, ctx.domain, w): float(row.sum())
        for w, _, row in _row_vectors(spec, ctx.matrices, ctx.domain, ctx.point, m, cap)
    }


def measure_to_csv(vec: Mapping) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["word", "probability"])
    for w, x in vec.items():
        writer.writerow([w.label, f"{x:.17g}"])
    return buf.getvalue()


def cumulative_distribution(vec: Mapping) -> list:
    """``(index, cumulative mass)`` pairs in lexicographic word order, starting at ``(0, 0)``."""
    out = [(0, 0.0)]
    total = 0.0
    for a, x in enumerate(vec.values(), start=1):
        total += x
        out.append((a, total))
    return out


def cumulative_json(vec: Mapping) -> str:
    return json.dumps(
        {"words": [w.label for w in vec], "cumulative": [[a, float(f"{c:.17g}")] for a, c in cumulative_distribution(vec)]}
    )


# ------------------------------------------------------------ simple functions


@dataclass(frozen=True, eq=False)
class SimpleBoundaryFunction:
    """Boundary function constant on each depth-``depth`` cylinder of ``Omega_domain``."""

    spec: object
    domain: int
    depth: int
    values: dict  # edge tuple -> value

    def __post_init__(self):
        check_depth("depth", self.depth)
        words = {w.edges for w in enumerate_words(self.spec, self.domain, self.depth)}
        vals = {}
        for key, x in self.values.items():
            w = _as_word(self.spec, self.domain, key)
            if len(w) != self.depth:
                raise DepthMismatch(f"word {w.label} has length {len(w)}, expected {self.depth}")
            vals[w.edges] = float(x)
        missing = words - set(vals)
        if missing:
            raise DepthMismatch(f"no value for {len(missing)} cylinder(s), e.g. {format_word(sorted(missing)[0])}")
        object.__setattr__(self, "values", {w: vals[w] for w in sorted(words)})

    def __getitem__(self, word):
        return self.values[_as_word(self.spec, self.domain, word).edges]

    @classmethod
    def constant(cls, spec, i, c, depth=0):
        return cls(spec, i, depth, {w.edges: c for w in enumerate_words(spec, i, depth)})

    @classmethod
    def indicator(cls, spec, i, word):
        w = _as_word(spec, i, word)
        return cls(spec, i, len(w), {x.edges: float(x.edges == w.edges) for x in enumerate_words(spec, i, len(w))})

    @classmethod
    def random(cls, spec, i, depth, rng):
        words = enumerate_words(spec, i, depth)
        return cls(spec, i, depth, {w.edges: float(x) for w, x in zip(words, rng.standard_normal(len(words)))})

    def scaled(self, a=1.0, b=0.0) -> SimpleBoundaryFunction:
        return SimpleBoundaryFunction(self.spec, self.domain, self.depth, {w: a * x + b for w, x in self.values.items()})

    def to_json(self) -> dict:
        return {format_word(w): x for w, x in self.values.items()}

    @classmethod
    def from_json(cls, spec, i, doc, depth=None):
        if isinstance(doc, str):
            doc = json.loads(doc)
        vals = {parse_word(spec, i, k).edges: v for k, v in doc.items()}
        lengths = {len(w) for w in vals}
        if depth is None:
            if len(lengths) != 1:
                raise DepthMismatch("words of different lengths")
            depth = lengths.pop()
        return cls(spec, i, depth, vals)


def poisson_value(ctx: CylinderMeasureContext, f: SimpleBoundaryFunction) -> float:
    """Value at ``p_k`` of the harmonic extension of ``f``: ``sum_g f_g mu(g)``."""
    if f.domain != ctx.domain:
        raise DepthMismatch("boundary function lives on a different domain")
    vec = _row_vectors(ctx.spec, ctx.matrices, ctx.domain, ctx.point, f.depth)
    return float(sum(f.values[w] * row.sum() for w, _, row in vec))


def poisson_value_extended(ctx: CylinderMeasureContext, f: SimpleBoundaryFunction, v0_data: Mapping) -> float:
    """Poisson value plus the correction ``sum_x v(x) (du)_x`` over ``Omega_i`` cap ``V_0``.

    ``v0_data`` maps each boundary index ``x`` inside the domain either to a
    pair ``(v(x), (du)_x)`` or to ``(du)_x`` alone, in which case ``v(x)`` is
    taken from the normalized potential stored in the flux set.
    """
    i, k = ctx.domain, ctx.point
    pot = ctx.flux.potentials[(i, k)]
    hs = ctx.spec.hs
    total = poisson_value(ctx, f)
    for x in sorted(ctx.spec.domains[i].in_v0):
        if x not in v0_data:
            raise MissingV0Data(f"no data for p_{x + 1}")
        item = v0_data[x]
        if np.ndim(item) == 0:
            vx, du = pot[hs.structure.canonicalize((), x)], float(item)
        else:
            vx, du = map(float, item)
        total += vx * du
    return float(total)


def selfsimilar_decomposition_residual(ctx: CylinderMeasureContext, m: int, matrices=None) -> float:
    """Largest gap in ``mu_{i,k}(g eta) = sum_l M_g(k, l) mu_{T(g), l}(eta)`` over depth-``m`` cylinders.

    The left side always uses the context's matrices; ``matrices``, if
    given, is used on the right side, so a tampered set shows up as a
    nonzero residual.
    """
    check_depth("m", m, minimum=1)
    spec = ctx.spec
    q = spec.hs.boundary_size
    rhs_m = ctx.matrices if matrices is None else np.asarray(matrices, dtype=float)
    lhs = measure_vector(ctx, m)
    tails = {}
    worst = 0.0
    for w, mass in lhs.items():
        g, eta = w.edges[0], w.edges[1:]
        j = spec.edges[g].target
        if (j, eta) not in tails:
            tails[(j, eta)] = np.array([_row_product(rhs_m, q, ell, eta).sum() for ell in range(q)])
        rhs = float(rhs_m[g][ctx.point] @ tails[(j, eta)])
        worst = max(worst, abs(mass - rhs))
    return worst


def measure_equivalence_ratio(flux: FluxTransferSet, i: int, k: int, k2: int, m: int) -> tuple:
    """Extremes of ``mu_{i,k} / mu_{i,k2}`` over depth-``m`` cylinders with positive denominator."""
    check_depth("m", m, minimum=1)
    inside = flux.spec.domains[i].in_v0
    if len(inside) < 2:
        raise NoComparablePoints(f"domain {i + 1} contains fewer than two boundary points")
    a = measure_vector(CylinderMeasureContext(flux, i, k), m)
    b = measure_vector(CylinderMeasureContext(flux, i, k2), m)
    ratios = [a[w] / b[w] for w in a if b[w] > 0]
    if not ratios:
        raise NoComparablePoints("no cylinder has positive mass under the second measure")
    return float(min(ratios)), float(max(ratios))


# ---------------------------------------------------------------- energies


def boundary_mean_table(flux: FluxTransferSet, f: SimpleBoundaryFunction) -> dict:
    """``f_{g, p}`` for every word ``g`` of length ``<= depth`` as a ``Q``-vector over ``p``.

    Entries for ``p`` outside ``Omega_{T(g)}`` carry no meaning.
    """
    spec = flux.spec
    q = spec.hs.boundary_size
    table = {}
    layers = [[w.edges for w in enumerate_words(spec, f.domain, d)] for d in range(f.depth + 1)]
    for w in layers[f.depth]:
        table[w] = np.full(q, f.values[w])
    for d in range(f.depth - 1, -1, -1):
        for w in layers[d]:
            tgt = spec.edges[w[-1]].target if w else f.domain
            acc = np.zeros(q)
            for e in spec.edges_from(tgt):
                acc += flux.matrices[e] @ table[w + (e,)]
            table[w] = acc
    return table


def boundary_mean(flux: FluxTransferSet, word, p: int, f: SimpleBoundaryFunction) -> float:
    """Mean of ``f`` over the cylinder of ``word`` under ``mu_{T(word), p}``."""
    w = _as_word(flux.spec, f.domain, word)
    if len(w) > f.depth:
        raise DepthMismatch(f"word length {len(w)} exceeds the depth {f.depth} of f")
    if p not in flux.spec.domains[w.target].in_v0:
        raise ValueError(f"p_{p + 1} is not inside domain {w.target + 1}")
    if len(w) == f.depth:
        return f.values[w.edges]
    vec = np.zeros(flux.spec.hs.boundary_size)
    vec[p] = 1.0
    total = 0.0
    for row_w, _, row in _row_vectors(flux.spec, flux.matrices, w.target, p, f.depth - len(w)):
        total += row.sum() * f.values[w.edges + row_w]
    return float(total)


def energy_functional(flux: FluxTransferSet, i: int, f: SimpleBoundaryFunction) -> float:
    """Boundary energy: weighted squared differences of cylinder means over sibling pairs.

    Sums, for each word ``g`` of length below the depth of ``f``, the
    quantity ``(1/r_g) sum (f_{xi,p} - f_{eta,q})^2`` over ordered pairs of
    children ``xi, eta`` of ``g`` (``xi = eta`` included) and boundary points
    ``p``, ``q`` inside their target domains. Deeper words add nothing.
    """
    if f.domain != i:
        raise DepthMismatch("boundary function lives on a different domain")
    spec = flux.spec
    table = boundary_mean_table(flux, f)
    total = 0.0
    for d in range(f.depth):
        for w in enumerate_words(spec, i, d):
            vals = []
            for e in spec.edges_from(w.target):
                pts = sorted(spec.domains[spec.edges[e].target].in_v0)
                vals.extend(table[w.edges + (e,)][pts])
            x = np.asarray(vals)
            # sum over ordered pairs of (a - b)^2 = 2 n sum a^2 - 2 (sum a)^2
            s = 2.0 * len(x) * float(x @ x) - 2.0 * float(x.sum()) ** 2
            total += max(s, 0.0) / w.rate
    return total


def harmonic_energy_network(traces: DomainTraceSet, i: int, f: SimpleBoundaryFunction, node_cap: int = 2_000_000):
    """Network of ``Omega_i`` expanded to the depth of ``f`` with one pinned node per cylinder.

    Returns ``(network, pinned values)``.
    """
    spec = traces.spec
    hs = spec.hs
    ps = hs.structure
    q = ps.boundary_size
    c0 = hs.base_conductance
    pairs = [(a, b, c0[a, b]) for a in range(q) for b in range(a + 1, q) if c0[a, b] > 0]
    edges = []
    pinned = {}
    nodes = set()
    stack = [AdmissibleWord(spec, i, ())]
    while stack:
        w = stack.pop()
        tr = w.transform
        dom = spec.domains[w.target]
        rate = w.rate
        for k in sorted(dom.full_cells):
            vs = [ps.canonicalize(*tr((k,), p)) for p in range(q)]
            edges += [(vs[a], vs[b], g / (rate * hs.renorm[k])) for a, b, g in pairs]
            nodes.update(vs)
        for e in spec.edges_from(w.target):
            child = w.extend(e)
            if len(child) < f.depth:
                stack.append(child)
                continue
            label = ("cyl", child.edges)
            pinned[label] = f.values[child.edges]
            t = traces.traces[child.target]
            ctr = child.transform
            attach = {BD: label}
            for ell in spec.domains[child.target].in_v0:
                attach[ell] = label if ell in t.shorted else ps.canonicalize(*ctr((), ell))
            scale = 1.0 / child.rate
            edges += [(attach[a], attach[b], g * scale) for a, b, g in t.network.edges()]
            nodes.update(attach.values())
        if len(nodes) > node_cap:
            raise DepthOverflow(f"expanded network exceeds {node_cap} nodes")
    order = sorted((x for x in nodes if not isinstance(x, tuple) or x[:1] != ("cyl",)), key=str)
    order += sorted(pinned)
    return ElectricNetwork.from_edges(edges, order), pinned


def harmonic_energy(traces: DomainTraceSet, i: int, f: SimpleBoundaryFunction, node_cap: int = 2_000_000) -> float:
    """Energy of the harmonic extension of ``f`` to ``Omega_i``.

    Exact up to the accuracy of the domain traces, because each depth-``m0``
    cylinder carries constant data and the trace preserves minimal energies.
    """
    if f.domain != i:
        raise DepthMismatch("boundary function lives on a different domain")
    net, pinned = harmonic_energy_network(traces, i, f, node_cap)
    if len(set(pinned.values())) <= 1:
        return 0.0
    u = dirichlet_solve(net, pinned)
    return max(net.energy(u), 0.0)


def harmonic_space_diagnostics(hs: HarmonicStructure) -> tuple:
    """Comparison constants between three norms on harmonic functions modulo constants.

    Returns ``(c1, C1, c2, C2)`` with ``c1 <= E[u] / sum_{p,q} (u(p)-u(q))^2 <= C1``
    and ``c2 <= E[u] / sum_p (du)_p^2 <= C2``; the pair sum is over ordered pairs.
    """
    c0 = hs.base_conductance
    q = c0.shape[0]
    lap = np.diag(c0.sum(axis=1)) - c0
    pair = 2.0 * (q * np.eye(q) - np.ones((q, q)))
    basis = scipy.linalg.null_space(np.ones((1, q)))
    e = basis.T @ lap @ basis
    a = basis.T @ pair @ basis
    b = basis.T @ lap @ lap @ basis
    r1 = scipy.linalg.eigh(e, a, eigvals_only=True)
    r2 = scipy.linalg.eigh(e, b, eigvals_only=True)
    return float(r1.min()), float(r1.max()), float(r2.min()), float(r2.max())
