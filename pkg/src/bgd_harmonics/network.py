"""Finite electric networks: Dirichlet solves, traces with shorting, resistances.

A network is a finite set of hashable node labels together with a symmetric
nonnegative conductance matrix. Everything here works on the weighted graph
Laplacian ``L = diag(W 1) - W``; small eliminations use dense LAPACK, larger
ones a sparse LU.
"""

from __future__ import annotations

import json
from collections.abc import Hashable, Iterable, Mapping

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .exceptions import Disconnection, SolveFailure

EPS_DROP = 1e-15
SOLVE_TOL = 1e-12
DENSE_LIMIT = 600


class ElectricNetwork:
    """Immutable weighted graph with symmetric conductances.

    Parameters
    ----------
    nodes : sequence of hashable
        Node labels, in the order used for every matrix.
    weights : array_like or sparse matrix, shape (n, n)
        Symmetric conductances with zero diagonal.
    """

    def __init__(self, nodes, weights):
        self._nodes = tuple(nodes)
        self._index = {p: a for a, p in enumerate(self._nodes)}
        if len(self._index) != len(self._nodes):
            raise ValueError("duplicate node labels")
        n = len(self._nodes)
        if n <= DENSE_LIMIT:
            # small networks: validate densely, sparse arithmetic overhead dominates here
            d = weights.toarray() if sp.issparse(weights) else np.array(weights, dtype=float).reshape(n, n)
            d = np.asarray(d, dtype=float).copy()
            np.fill_diagonal(d, 0.0)
            if (d < 0).any():
                raise ValueError("conductances must be nonnegative")
            if np.abs(d - d.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(d).max(initial=0.0)):
                raise ValueError("conductance matrix must be symmetric")
            self._w = sp.csr_matrix(d)
            return
        w = sp.csr_matrix(weights, dtype=float, shape=(n, n))
        w = (w - sp.diags(w.diagonal())).tocsr()
        w.eliminate_zeros()
        if w.nnz:
            if w.data.min() < 0:
                raise ValueError("conductances must be nonnegative")
            if abs(w - w.T).max() > 1e-12 * max(1.0, abs(w).max()):
                raise ValueError("conductance matrix must be symmetric")
        self._w = w

    @classmethod
    def from_edges(cls, edges: Iterable, nodes=None) -> ElectricNetwork:
        """Build a network from ``(p, q, g)`` triples; repeated edges add up."""
        labels = list(nodes) if nodes is not None else []
        index = {p: a for a, p in enumerate(labels)}
        rows, cols, vals = [], [], []
        for p, q, g in edges:
            if p == q or g == 0:
                continue
            for x in (p, q):
                if x not in index:
                    index[x] = len(labels)
                    labels.append(x)
            rows += [index[p], index[q]]
            cols += [index[q], index[p]]
            vals += [g, g]
        n = len(labels)
        w = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        w.sum_duplicates()
        return cls(labels, w)

    @property
    def nodes(self) -> tuple:
        return self._nodes

    @property
    def weights(self) -> sp.csr_matrix:
        return self._w

    def __len__(self):
        return len(self._nodes)

    def __contains__(self, p):
        try:
            return p in self._index
        except TypeError:
            return False

    def __repr__(self):
        return f"ElectricNetwork(n_nodes={len(self)}, n_edges={self._w.nnz // 2})"

    def index(self, p: Hashable) -> int:
        return self._index[p]

    def conductance(self, p, q) -> float:
        return float(self._w[self._index[p], self._index[q]])

    def edges(self):
        """Yield ``(p, q, g)`` once per edge, in node order."""
        coo = sp.triu(self._w, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        for a, b, g in zip(coo.row[order], coo.col[order], coo.data[order]):
            yield self._nodes[a], self._nodes[b], float(g)

    def neighbors(self, p):
        a = self._index[p]
        row = self._w.getrow(a)
        return {self._nodes[b]: float(g) for b, g in zip(row.indices, row.data)}

    def laplacian(self) -> sp.csr_matrix:
        deg = np.asarray(self._w.sum(axis=1)).ravel()
        return (sp.diags(deg) - self._w).tocsr()

    def vector(self, u: Mapping) -> np.ndarray:
        return np.array([u[p] for p in self._nodes], dtype=float)

    def energy(self, u) -> float:
        """Return ``1/2 sum_{p,q} g(p,q) (u(p) - u(q))^2``."""
        x = self.vector(u) if isinstance(u, Mapping) else np.asarray(u, dtype=float)
        return float(x @ (self.laplacian() @ x))

    def components(self) -> np.ndarray:
        _, labels = connected_components(self._w, directed=False)
        return labels

    def is_connected(self) -> bool:
        return len(self) <= 1 or connected_components(self._w, directed=False)[0] == 1

    def scaled(self, factor: float) -> ElectricNetwork:
        return ElectricNetwork(self._nodes, self._w * factor)

    def relabel(self, mapping) -> ElectricNetwork:
        fn = mapping.get if isinstance(mapping, Mapping) else mapping
        return ElectricNetwork([fn(p) for p in self._nodes], self._w)

    def to_json(self) -> dict:
        return {
            "nodes": [_jsonable(p) for p in self._nodes],
            "edges": [[_jsonable(p), _jsonable(q), g] for p, q, g in self.edges()],
        }

    @classmethod
    def from_json(cls, doc) -> ElectricNetwork:
        if isinstance(doc, str):
            doc = json.loads(doc)
        nodes = [_unjson(p) for p in doc["nodes"]]
        return cls.from_edges(((_unjson(p), _unjson(q), g) for p, q, g in doc["edges"]), nodes)


def _jsonable(p):
    if isinstance(p, (str, int, float)):
        return p
    if isinstance(p, tuple):
        return [_jsonable(x) for x in p]
    return str(p)


def _unjson(p):
    return tuple(_unjson(x) for x in p) if isinstance(p, list) else p


def _solve_block(a, b):
    """Solve ``a x = b`` for a symmetric positive definite block."""
    if a.shape[0] == 0:
        return np.zeros_like(b)
    if a.shape[0] <= DENSE_LIMIT:
        dense = a.toarray() if sp.issparse(a) else np.asarray(a)
        try:
            return scipy.linalg.solve(dense, b, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SolveFailure(str(exc)) from exc
    lu = spla.splu(sp.csc_matrix(a))
    return lu.solve(np.asarray(b, dtype=float))


def _check_residual(a, x, b, tol):
    r = a @ x - b
    scale = abs(a).max() * np.abs(x).max() + np.abs(b).max() + 1e-300
    err = np.abs(r).max() / scale
    if not np.isfinite(err) or err > tol:
        raise SolveFailure(f"relative residual {err:.3e} exceeds {tol:.1e}")


def dirichlet_solve(net: ElectricNetwork, boundary_values: Mapping, tol: float = SOLVE_TOL) -> dict:
    """Harmonic extension of ``boundary_values`` to every node of ``net``.

    The returned potential agrees with the data on the boundary set and has
    zero Neumann derivative at every other node.
    """
    if not boundary_values:
        raise ValueError("boundary set must be nonempty")
    bidx = np.array([net.index(p) for p in boundary_values], dtype=int)
    ub = np.array([float(v) for v in boundary_values.values()])
    u = _harmonic_columns(net, bidx, ub[:, None], tol)[:, 0]
    return dict(zip(net.nodes, u))


def _harmonic_columns(net, bidx, ub, tol=SOLVE_TOL):
    """Harmonic extensions for several boundary data columns at once."""
    n = len(net)
    mask = np.ones(n, dtype=bool)
    mask[bidx] = False
    iidx = np.flatnonzero(mask)
    lap = net.laplacian()
    out = np.zeros((n, ub.shape[1]))
    out[bidx] = ub
    if iidx.size == 0:
        return out
    _require_reachable(net, bidx, SolveFailure)
    a = lap[iidx][:, iidx]
    b = -(lap[iidx][:, bidx] @ ub)
    x = _solve_block(a, b)
    _check_residual(a, x, b, tol)
    out[iidx] = x
    return out


def _require_reachable(net, kept_idx, exc):
    labels = net.components()
    ok = np.zeros(labels.max() + 1, dtype=bool)
    ok[labels[np.asarray(kept_idx, dtype=int)]] = True
    if not ok.all():
        bad = np.flatnonzero(~ok[labels])
        raise exc(f"{bad.size} node(s) lie in components touching no kept node, e.g. {net.nodes[bad[0]]!r}")


def trace(net: ElectricNetwork, kept: Iterable, shorts: Mapping | None = None) -> ElectricNetwork:
    """Schur-complement reduction of ``net`` onto ``kept``.

    ``shorts`` maps a class label to a group of nodes held at a common
    potential; each group becomes a single node of the result. Nodes listed
    in a group are kept automatically. Every other node is eliminated.
    """
    shorts = dict(shorts or {})
    target = {}
    order = []
    for label, group in shorts.items():
        for p in group:
            if p in target:
                raise ValueError(f"node {p!r} appears in two short classes")
            target[p] = label
    for p in kept:
        if p not in target:
            target[p] = p
        if target[p] not in order:
            order.append(target[p])
    for label in shorts:
        if label not in order:
            order.append(label)

    n = len(net)
    class_id = {c: a for a, c in enumerate(order)}
    nk = len(order)
    qmap = np.empty(n, dtype=int)
    elim = [a for a, p in enumerate(net.nodes) if p not in target]
    for a, p in enumerate(net.nodes):
        if p in target:
            qmap[a] = class_id[target[p]]
    for b, a in enumerate(elim):
        qmap[a] = nk + b
    proj = sp.csr_matrix((np.ones(n), (np.arange(n), qmap)), shape=(n, nk + len(elim)))
    wq = (proj.T @ net.weights @ proj).tocsr()
    quotient = ElectricNetwork(list(order) + [net.nodes[a] for a in elim], wq)
    if elim:
        _require_reachable(quotient, np.arange(nk), Disconnection)
    lap = quotient.laplacian()
    kk = lap[:nk][:, :nk].toarray()
    if elim:
        ke = lap[:nk][:, nk:]
        ee = lap[nk:][:, nk:]
        x = _solve_block(ee, ke.T.toarray())
        schur = kk - ke @ x
    else:
        schur = kk
    g = -np.asarray(schur)
    np.fill_diagonal(g, 0.0)
    g = 0.5 * (g + g.T)
    g[g < EPS_DROP] = 0.0
    return ElectricNetwork(order, g)


def effective_resistance(net: ElectricNetwork, a, b) -> float:
    """Effective resistance between node classes ``a`` and ``b``.

    Each argument is a single node label or a collection of labels shorted
    together. Returns ``inf`` when the classes are disconnected.
    """
    ga = _as_group(net, a)
    gb = _as_group(net, b)
    if set(ga) & set(gb):
        raise ValueError("classes must be disjoint")
    keep = set(ga) | set(gb)
    comp = net.components()
    touched = {comp[net.index(p)] for p in keep}
    sub_nodes = [p for p in net.nodes if comp[net.index(p)] in touched]
    sub = _subnetwork(net, sub_nodes)
    red = trace(sub, [], {"A": ga, "B": gb})
    g = red.conductance("A", "B")
    return np.inf if g <= 0 else 1.0 / g


def _as_group(net, x):
    if x in net:
        return [x]
    return list(x)


def _subnetwork(net, labels):
    idx = np.array([net.index(p) for p in labels], dtype=int)
    return ElectricNetwork(labels, net.weights[idx][:, idx])


def resistance_matrix(net: ElectricNetwork) -> np.ndarray:
    """All pairwise effective resistances (``inf`` across components)."""
    n = len(net)
    out = np.full((n, n), np.inf)
    lap = net.laplacian().toarray()
    comp = net.components()
    for c in np.unique(comp):
        idx = np.flatnonzero(comp == c)
        pinv = np.linalg.pinv(lap[np.ix_(idx, idx)], hermitian=True)
        d = np.diag(pinv)
        out[np.ix_(idx, idx)] = d[:, None] + d[None, :] - 2 * pinv
    np.fill_diagonal(out, 0.0)
    return out


def neumann_derivative(net: ElectricNetwork, u: Mapping, p) -> float:
    """Net flux ``sum_q g(p, q) (u(p) - u(q))`` out of node ``p``."""
    up = u[p]
    return float(sum(g * (up - u[q]) for q, g in net.neighbors(p).items()))


def neumann_vector(net: ElectricNetwork, u: Mapping) -> dict:
    x = net.vector(u)
    return dict(zip(net.nodes, net.laplacian() @ x))
