"""scikit-learn style facade over the trace, flux and Poisson pipeline.

``fit`` takes a domain family (a :class:`BgdSpec`, a JSON document or a
registry name) and computes traces and flux transfer matrices. Rows of the
matrices passed to ``transform``/``predict`` are simple boundary functions:
one column per depth-``depth`` cylinder of the chosen domain, in
lexicographic word order.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bgd import BgdSpec, domain_trace_fixed_point, enumerate_words, flux_transfer_matrices
from .measure import CylinderMeasureContext, SimpleBoundaryFunction, energy_functional, harmonic_energy, measure_vector


def load_spec(obj) -> BgdSpec:
    if isinstance(obj, BgdSpec):
        return obj
    if isinstance(obj, str) and not obj.lstrip().startswith("{"):
        from .registry import get_example

        return get_example(obj).spec()
    return BgdSpec.from_json(obj)


class HarmonicMeasureEstimator(TransformerMixin, BaseEstimator):
    """Poisson values of simple boundary functions on one domain.

    Parameters
    ----------
    domain : int
        0-based domain index.
    depth : int
        Cylinder depth of the boundary functions.
    tol, max_iter : float, int
        Stopping rule of the trace fixed point.
    point : int or None
        0-based boundary index used by ``predict``; defaults to the smallest
        boundary index inside the domain.
    """

    def __init__(self, domain=0, depth=1, tol=1e-10, max_iter=10_000, point=None):
        self.domain = domain
        self.depth = depth
        self.tol = tol
        self.max_iter = max_iter
        self.point = point

    def fit(self, X, y=None):
        spec = load_spec(X)
        if not 0 <= self.domain < spec.domain_count:
            raise ValueError(f"domain {self.domain} out of range")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        self.spec_ = spec
        self.traces_ = domain_trace_fixed_point(spec, self.tol, self.max_iter)
        self.flux_ = flux_transfer_matrices(spec, self.traces_)
        self.matrices_ = self.flux_.matrices
        self.n_iter_ = self.traces_.iterations
        self.bracket_width_ = self.traces_.width
        self.points_ = sorted(spec.domains[self.domain].in_v0)
        self.words_ = enumerate_words(spec, self.domain, self.depth)
        self.n_features_in_ = len(self.words_)
        self.resistances_ = {k: self.flux_.resistances[(self.domain, k)] for k in self.points_}
        return self

    def _functions(self, X):
        check_is_fitted(self, "flux_")
        X = check_array(X, ensure_2d=True, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns (one per cylinder), got {X.shape[1]}")
        return [
            SimpleBoundaryFunction(self.spec_, self.domain, self.depth, {w.edges: x for w, x in zip(self.words_, row)})
            for row in X
        ]

    def cylinder_weights(self, point=None) -> np.ndarray:
        """Hitting masses of the depth-``depth`` cylinders from ``p_point``."""
        check_is_fitted(self, "flux_")
        k = self._point(point)
        vec = measure_vector(CylinderMeasureContext(self.flux_, self.domain, k), self.depth)
        return np.array(list(vec.values()))

    def _point(self, point):
        k = self.point if point is None else point
        k = self.points_[0] if k is None else k
        if k not in self.points_:
            raise ValueError(f"boundary index {k} is not inside domain {self.domain}")
        return k

    def transform(self, X):
        """Poisson values at every boundary point inside the domain; shape ``(n, len(points_))``."""
        check_is_fitted(self, "flux_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns (one per cylinder), got {X.shape[1]}")
        if not self.points_:
            return np.zeros((X.shape[0], 0))
        w = np.stack([self.cylinder_weights(k) for k in self.points_], axis=1)
        return X @ w

    def predict(self, X):
        """Poisson values at ``p_point``."""
        check_is_fitted(self, "flux_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns (one per cylinder), got {X.shape[1]}")
        return X @ self.cylinder_weights()

    def energies(self, X):
        """``(harmonic_energy, energy_functional)`` per row."""
        fs = self._functions(X)
        return np.array([(harmonic_energy(self.traces_, self.domain, f), energy_functional(self.flux_, self.domain, f)) for f in fs])
