"""Scikit-learn style estimator front end.

Wraps the deletion-loop fit in a clusterer with the usual ``fit`` /
``predict`` / ``fit_predict`` surface so it composes with pipelines and
model-selection tooling.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .gauges import make_gauge
from .ldca import ldca_k
from .model import DEDUP_TOL, DataSet, assign
from .solvers import SolverConfig

__all__ = ["GaugeFusionClustering"]


class GaugeFusionClustering(ClusterMixin, BaseEstimator):
    """Gauge-distance clustering with automatic cluster-count selection.

    Starts from ``k0`` prototypes seeded k-means++ style under the gauge,
    alternates smoothed DC solves with deletion of prototypes that own no
    points, and keeps whatever survives.  The fusion weight pulls prototypes
    together (stronger fusion, fewer clusters); the smoothing parameter
    controls the accuracy of the differentiable surrogate.

    Parameters
    ----------
    k0 : int
        Initial (over-specified) number of prototypes.
    fusion : float
        Fusion weight (lambda).  Zero disables the penalty and with it the
        model-order reduction.
    smoothing : float
        Smoothing parameter (mu) of the gauge surrogate; must be positive.
    gauge : str or Gauge
        Gauge spec ("l1", "l2", "linf", "wl2:...", "poly:<csv>") or instance.
    algorithm : {"dca", "bdca", "midca"}
        Inner solver variant.
    tol, max_iter : float, int
        Inner stopping controls (Frobenius step norm / iteration cap).
    random_state : int
        Seed for the k-means++ style initialization.

    Attributes
    ----------
    cluster_centers_ : ndarray of shape (k_eff-ish, d)
        Surviving prototypes.
    labels_ : ndarray of shape (n,)
        Nearest-prototype label per training point.
    k_eff_ : int
        Effective cluster count (distinct surviving prototypes owning points).
    trace_ : list of SolverTrace
        Inner traces, one per deletion round.
    """

    def __init__(
        self,
        k0=10,
        fusion=0.3,
        smoothing=0.05,
        gauge="l2",
        algorithm="dca",
        tol=1e-6,
        max_iter=500,
        dedup_tol=DEDUP_TOL,
        random_state=0,
    ):
        self.k0 = k0
        self.fusion = fusion
        self.smoothing = smoothing
        self.gauge = gauge
        self.algorithm = algorithm
        self.tol = tol
        self.max_iter = max_iter
        self.dedup_tol = dedup_tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        data = DataSet(X)
        gauge = make_gauge(self.gauge, data.dim)
        cfg = SolverConfig(tol=self.tol, max_iter=self.max_iter)
        res = ldca_k(
            data,
            self.k0,
            self.fusion,
            self.smoothing,
            gauge,
            cfg,
            inner=self.algorithm,
            seed=self.random_state,
            dedup_tol=self.dedup_tol,
        )
        self.gauge_ = gauge
        self.cluster_centers_ = res.prototypes
        self.labels_ = res.labels
        self.k_eff_ = res.k_eff
        self.trace_ = res.traces
        self.converged_ = res.converged
        self.n_features_in_ = data.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return assign(DataSet(X), self.cluster_centers_, self.gauge_).primary
