"""Independent checks: direct depth-n solves and seeded random walks.

Nothing here uses the trace fixed point or the flux transfer matrices. A
domain is expanded through its admissible words down to depth ``n``; full
cells become scaled base networks (exact by compatibility), and each depth-n
boundary piece is either shorted into its depth-``m`` class node or replaced
by a cut cell whose outside vertices sit on the class node.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bgd import AdmissibleWord, BgdSpec, enumerate_words
from .exceptions import CapHit, DepthOverflow, DisconnectedApproximation
from .pcf import CanonicalVertex
from .network import ElectricNetwork, _harmonic_columns
from .validation import check_depth

DEFAULT_NODE_CAP = 2_000_000
STEP_CAP = 10**8
MODES = ("short", "cut")


@dataclass(frozen=True, eq=False)
class ApproxDomainNetwork:
    spec: BgdSpec
    domain: int
    depth: int
    class_depth: int
    mode: str
    network: ElectricNetwork
    classes: dict  # edge tuple of length class_depth -> node label
    v0_nodes: dict  # k -> node label (a class label if shorted)

    @property
    def node_count(self) -> int:
        return len(self.network)

    def class_words(self) -> list:
        return [AdmissibleWord(self.spec, self.domain, w) for w in self.classes]


def build_approx_network(spec: BgdSpec, i: int, n: int, m: int, mode: str = "short", node_cap: int = DEFAULT_NODE_CAP) -> ApproxDomainNetwork:
    check_depth("m", m, minimum=1)
    check_depth("n", n, minimum=m)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    hs = spec.hs
    ps = hs.structure
    q = ps.boundary_size
    c0 = hs.base_conductance
    pairs = [(a, b, c0[a, b]) for a in range(q) for b in range(a + 1, q) if c0[a, b] > 0]
    classes = {w.edges: ("class", w.edges) for w in enumerate_words(spec, i, m)}
    owner = {}
    edges = []
    leaves = []
    stack = [AdmissibleWord(spec, i, ())]
    count = 0
    while stack:
        w = stack.pop()
        tr = w.transform
        rate = w.rate
        for k in sorted(spec.domains[w.target].full_cells):
            vs = [ps.canonicalize(*tr((k,), p)) for p in range(q)]
            edges += [(vs[a], vs[b], g / (rate * hs.renorm[k])) for a, b, g in pairs]
            count += len(vs)
        for e in reversed(spec.edges_from(w.target)):
            child = w.extend(e)
            if len(child) < n:
                stack.append(child)
            else:
                leaves.append(child)
        if count + len(leaves) * q > 4 * node_cap:
            raise DepthOverflow(f"depth-{n} approximation exceeds the node cap {node_cap}")
    for leaf in leaves:
        label = classes[leaf.edges[:m]]
        ctr = leaf.transform
        inside = spec.domains[leaf.target].in_v0
        verts = [ps.canonicalize(*ctr((), p)) for p in range(q)]
        if mode == "short":
            for p in inside:
                prev = owner.setdefault(verts[p], label)
                if prev != label:
                    raise ValueError(f"vertex {verts[p]} lies in two boundary classes {prev[1]} and {label[1]}")
        else:
            lab = [verts[p] if p in inside else label for p in range(q)]
            edges += [(lab[a], lab[b], g / leaf.rate) for a, b, g in pairs if lab[a] != lab[b]]

    def node(x):
        return owner.get(x, x)

    net_edges = [(node(a), node(b), g) for a, b, g in edges if node(a) != node(b)]
    v0 = {k: node(ps.canonicalize((), k)) for k in sorted(spec.domains[i].in_v0)}
    verts = {x for a, b, _ in net_edges for x in (a, b)} | set(v0.values())
    labels = sorted((x for x in verts if isinstance(x, CanonicalVertex)), key=_sort_key)
    labels += list(classes.values())
    if len(labels) > node_cap:
        raise DepthOverflow(f"depth-{n} approximation has {len(labels)} nodes, cap {node_cap}")
    net = ElectricNetwork.from_edges(net_edges, labels)
    if not net.is_connected():
        raise DisconnectedApproximation(f"depth-{n} approximation of domain {i + 1} ({mode}) is disconnected")
    return ApproxDomainNetwork(spec, i, n, m, mode, net, classes, v0)


def _sort_key(x):
    return (x.word, x.point)


def direct_hitting(approx: ApproxDomainNetwork, k: int) -> dict:
    """Probability that the walk from ``p_k`` is first absorbed in each class."""
    start = approx.v0_nodes[k]
    net = approx.network
    labels = list(approx.classes.values())
    words = approx.class_words()
    if start in labels:
        return {w: float(lab == start) for w, lab in zip(words, labels)}
    bidx = np.array([net.index(c) for c in labels])
    cols = _harmonic_columns(net, bidx, np.eye(len(labels)))
    row = cols[net.index(start)]
    return {w: float(x) for w, x in zip(words, row)}


def direct_poisson(approx: ApproxDomainNetwork, k: int, class_values, v0_flux=None) -> float:
    """Value at ``p_k`` of the solution with class data ``class_values`` and prescribed
    Neumann derivatives ``v0_flux`` (boundary index -> (du)_x) at points of ``V_0``."""
    net = approx.network
    labels = list(approx.classes.values())
    vals = np.array([class_values[w] for w in approx.classes], dtype=float)
    src = np.zeros(len(net))
    for x, du in (v0_flux or {}).items():
        src[net.index(approx.v0_nodes[x])] += du
    bidx = np.array([net.index(c) for c in labels])
    mask = np.ones(len(net), dtype=bool)
    mask[bidx] = False
    iidx = np.flatnonzero(mask)
    lap = net.laplacian().tocsr()
    u = np.zeros(len(net))
    u[bidx] = vals
    if iidx.size:
        a = lap[iidx][:, iidx]
        b = src[iidx] - lap[iidx][:, bidx] @ vals
        u[iidx] = spla.spsolve(sp.csc_matrix(a), b)
    return float(u[net.index(approx.v0_nodes[k])])


# ------------------------------------------------------------ random walks

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed: int, walkers, step: int) -> np.ndarray:
    """Uniform [0, 1) draws that depend only on ``(seed, walker, step)``."""
    with np.errstate(over="ignore"):
        s = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
        z = _mix(s ^ (np.asarray(walkers, dtype=np.uint64) * _GAMMA))
        z = _mix(z + np.uint64(step) * _C2 + _GAMMA)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class WalkConfig:
    seed: int = 0
    walkers: int = 10_000
    step_cap: int = STEP_CAP

    def __post_init__(self):
        check_depth("walkers", self.walkers, minimum=1)
        check_depth("step_cap", self.step_cap, minimum=1)


@dataclass(frozen=True)
class _WalkTable:
    nbr: np.ndarray
    cum: np.ndarray
    absorbing: np.ndarray
    class_of: np.ndarray


def _walk_table(approx):
    net = approx.network
    w = net.weights.tocsr()
    w.sort_indices()
    n = len(net)
    deg = np.diff(w.indptr)
    width = max(int(deg.max()), 1)
    nbr = np.zeros((n, width), dtype=np.int64)
    cum = np.full((n, width), 2.0)
    for a in range(n):
        lo, hi = w.indptr[a], w.indptr[a + 1]
        if hi == lo:
            continue
        g = w.data[lo:hi]
        c = np.cumsum(g) / g.sum()
        c[-1] = 1.0
        nbr[a, : hi - lo] = w.indices[lo:hi]
        nbr[a, hi - lo :] = w.indices[hi - 1]
        cum[a, : hi - lo] = c
    labels = list(approx.classes.values())
    absorbing = np.zeros(n, dtype=bool)
    class_of = np.full(n, -1, dtype=np.int64)
    for c, lab in enumerate(labels):
        a = net.index(lab)
        absorbing[a] = True
        class_of[a] = c
    return _WalkTable(nbr, cum, absorbing, class_of)


def _run_walkers(table, start, seed, walker_ids, step_cap):
    pos = np.full(walker_ids.size, start, dtype=np.int64)
    ids = walker_ids.copy()
    out = np.full(walker_ids.size, -1, dtype=np.int64)
    slot = np.arange(walker_ids.size)
    step = 0
    alive = ~table.absorbing[pos]
    out[~alive] = table.class_of[pos[~alive]]
    pos, ids, slot = pos[alive], ids[alive], slot[alive]
    while pos.size:
        if step >= step_cap:
            raise CapHit(f"{pos.size} walker(s) still running after {step_cap} steps")
        u = counter_uniform(seed, ids, step)
        choice = (table.cum[pos] <= u[:, None]).sum(axis=1)
        pos = table.nbr[pos, choice]
        step += 1
        done = table.absorbing[pos]
        if done.any():
            out[slot[done]] = table.class_of[pos[done]]
            keep = ~done
            pos, ids, slot = pos[keep], ids[keep], slot[keep]
    return out


def random_walk_hitting(approx: ApproxDomainNetwork, cfg: WalkConfig, k: int, threads: int = 1) -> dict:
    """Monte Carlo hitting frequencies with binomial standard errors.

    Walker ``w`` draws its ``t``-th step from a hash of ``(seed, w, t)``, so the
    result does not depend on ``threads``.
    """
    table = _walk_table(approx)
    start = approx.network.index(approx.v0_nodes[k])
    ids = np.arange(cfg.walkers, dtype=np.int64)
    chunks = np.array_split(ids, max(1, int(threads)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_walkers(table, start, cfg.seed, c, cfg.step_cap), chunks))
    else:
        parts = [_run_walkers(table, start, cfg.seed, c, cfg.step_cap) for c in chunks]
    hits = np.concatenate(parts)
    counts = np.bincount(hits, minlength=len(approx.classes))
    freq = counts / cfg.walkers
    err = np.sqrt(freq * (1 - freq) / cfg.walkers)
    return {w: (float(p), float(s)) for w, p, s in zip(approx.class_words(), freq, err)}


# ------------------------------------------------------------ convergence


@dataclass
class ConvergenceRow:
    n: int
    mode: str
    max_discrepancy: float
    node_count: int
    solve_ms: float


@dataclass
class ConvergenceTable:
    domain: int
    point: int
    class_depth: int
    rows: list = field(default_factory=list)

    def discrepancies(self, mode: str) -> list:
        return [r.max_discrepancy for r in self.rows if r.mode == mode]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "mode", "max_discrepancy", "node_count", "solve_ms"])
        for r in self.rows:
            wr.writerow([r.n, r.mode, f"{r.max_discrepancy:.17g}", r.node_count, f"{r.solve_ms:.3f}"])
        return buf.getvalue()


def richardson_report(spec: BgdSpec, i: int, k: int, m: int, n_list, reference: dict, modes=MODES) -> ConvergenceTable:
    """Direct hitting at each depth in ``n_list`` against ``reference`` (word -> mass).

    ``reference`` is normally the matrix-product measure; keeping it an
    argument keeps this module free of the flux pipeline.
    """
    ref = {(w.edges if isinstance(w, AdmissibleWord) else tuple(w)): x for w, x in reference.items()}
    table = ConvergenceTable(i, k, m)
    for n in n_list:
        for mode in modes:
            t0 = time.perf_counter()
            approx = build_approx_network(spec, i, n, m, mode)
            hit = direct_hitting(approx, k)
            ms = 1000 * (time.perf_counter() - t0)
            gap = max(abs(x - ref[w.edges]) for w, x in hit.items())
            table.rows.append(ConvergenceRow(n, mode, float(gap), approx.node_count, ms))
    return table
