"""Scikit-learn style front-end for the shape codec."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_dims, check_label_volume
from .basis import build_basis_matrix
from .codec import ShapeEncoding, encode_instance
from .pipeline import assemble_instances
from .sampling import fibonacci_lattice, repulsion_optimize


class SphericalHarmonicShapeEncoder(TransformerMixin, BaseEstimator):
    """Encode labeled instance volumes as SH coefficient rows.

    ``fit`` builds the angular sampling pattern and basis matrix (no data
    needed); ``transform`` maps a label volume to an ``(n_instances,
    3 + R)`` array of centroid coordinates and coefficients, and
    ``inverse_transform`` voxelizes such rows back into a label volume.

    Parameters
    ----------
    l_max : int
        Maximum SH order; the basis has ``(l_max + 1)**2`` functions.
    n_orientations : int
        Number of angular sampling directions.
    repulsion_iters : int
        Electrostatic-repulsion refinement iterations applied to the
        Fibonacci initialization (0 keeps the raw lattice).
    seed : int
        Recorded on the orientation set for provenance.
    """

    def __init__(self, l_max=5, n_orientations=5000, repulsion_iters=0, seed=0):
        self.l_max = l_max
        self.n_orientations = n_orientations
        self.repulsion_iters = repulsion_iters
        self.seed = seed

    def fit(self, X=None, y=None):
        orientations = fibonacci_lattice(self.n_orientations, seed=self.seed)
        if self.repulsion_iters > 0:
            orientations = repulsion_optimize(orientations,
                                              max_iters=self.repulsion_iters)
        self.orientations_ = orientations
        self.basis_ = build_basis_matrix(orientations, self.l_max)
        return self

    def _check_fitted(self):
        if not hasattr(self, "basis_"):
            raise NotFittedError("call fit before transform")

    def transform(self, X):
        self._check_fitted()
        X = check_label_volume(X)
        ids = [int(k) for k in np.unique(X) if k > 0]
        rows = np.empty((len(ids), 3 + self.basis_.function_count))
        for i, k in enumerate(ids):
            enc = encode_instance(X, k, self.orientations_, self.basis_)
            rows[i, :3] = enc.centroid
            rows[i, 3:] = enc.coefficients
        self.instance_ids_ = ids
        return rows

    def inverse_transform(self, Xt, dims):
        self._check_fitted()
        Xt = np.atleast_2d(np.asarray(Xt, dtype=float))
        if Xt.shape[1] != 3 + self.basis_.function_count:
            raise ValueError(
                f"expected rows of length {3 + self.basis_.function_count}"
            )
        dims = check_dims(dims)
        encodings = [
            ShapeEncoding(centroid=row[:3], l_max=self.l_max,
                          coefficients=row[3:])
            for row in Xt
        ]
        detections = [np.clip(np.round(e.centroid), 0,
                              np.asarray(dims) - 1).astype(int)
                      for e in encodings]
        return assemble_instances(detections, encodings, dims).labels
