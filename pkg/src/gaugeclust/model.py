"""Problem instance and objective evaluation for fusion-penalized gauge clustering.

The model places k prototype rows X against n data rows A and minimizes

    sum_i min_l rho(x_l - a_i)  +  (lambda n / 2) sum_{s<t} ||x_s - x_t||^2.

This module evaluates the exact objective, its smoothed counterpart, the
convex/concave split used by the DC solvers, nearest-prototype assignment
and effective-cluster counting.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataSet",
    "Assignment",
    "pairwise_gauge",
    "objective",
    "smoothed_objective",
    "convex_part",
    "concave_part",
    "assign",
    "effective_clusters",
    "center_spread",
    "fusion_penalty",
]

#: relative tie tolerance when collecting nearest-prototype index sets
TIE_RTOL = 1e-12

#: default tolerance for merging near-identical prototype rows
DEDUP_TOL = 1e-8


@dataclass
class DataSet:
    """Demand points as an (n, d) row matrix with optional integer labels."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError("points must be a nonempty 2-D row matrix")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("all data rows must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.points.shape[0],):
                raise ValueError("labels must have one entry per data row")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass
class Assignment:
    """Nearest-prototype assignment of data points.

    ``primary`` holds the smallest nearest index per point, ``nearest_sets``
    the full tied index set per point, and ``members`` the index set of
    points owning each prototype under the primary labels.
    """

    primary: np.ndarray
    nearest_sets: list = field(repr=False)
    members: list = field(repr=False)

    @property
    def cluster_sizes(self):
        return np.array([len(m) for m in self.members])


def _as_matrix(X, dim, name):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"{name} must be a nonempty 2-D row matrix")
    if X.shape[1] != dim:
        raise ValueError(f"{name} has dim {X.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def pairwise_gauge(data, X, gauge, mu=None):
    """(n, k) matrix of gauge distances rho(x_l - a_i), smoothed when mu is set."""
    A = data.points
    X = _as_matrix(X, gauge.dim, "prototypes")
    diff = X[None, :, :] - A[:, None, :]
    if mu is None:
        return gauge.value(diff)
    return gauge.smooth_value(diff, mu)


def fusion_penalty(X, lam, n):
    """Quadratic fusion term (lambda n / 2) sum_{s<t} ||x_s - x_t||^2."""
    k = X.shape[0]
    if k == 1:
        return 0.0
    sq = np.sum(X * X, axis=1)
    gram = X @ X.T
    pair_sq = sq[:, None] + sq[None, :] - 2.0 * gram
    return 0.5 * lam * n * 0.5 * np.sum(pair_sq)  # each pair counted twice


def objective(data, X, lam, gauge):
    """Exact objective value of the fusion-penalized gauge location model."""
    X = _as_matrix(X, gauge.dim, "prototypes")
    dist = pairwise_gauge(data, X, gauge)
    return float(np.sum(np.min(dist, axis=1)) + fusion_penalty(X, lam, data.n))


def smoothed_objective(data, X, lam, mu, gauge):
    """Smoothed objective: the max-of-sums term collapses to a min of rho_mu."""
    X = _as_matrix(X, gauge.dim, "prototypes")
    dist = pairwise_gauge(data, X, gauge, mu=mu)
    return float(np.sum(np.min(dist, axis=1)) + fusion_penalty(X, lam, data.n))


def convex_part(data, X, lam, mu, gauge):
    """Convex component: (1/2mu) sum_{i,l} ||x_l - a_i||^2 plus the fusion term."""
    X = _as_matrix(X, gauge.dim, "prototypes")
    diff = X[None, :, :] - data.points[:, None, :]
    quad = np.sum(diff * diff) / (2.0 * mu)
    return float(quad + fusion_penalty(X, lam, data.n))


def concave_part(data, X, lam, mu, gauge, smooth_h2=True):
    """Concave component h = h1 + h2 of the smoothed DC split.

    h1 is the summed squared distance of (x_l - a_i)/mu to the polar set,
    scaled by mu/2.  h2 is the per-point max over omitted indices of the
    remaining gauge terms; with ``smooth_h2`` (the default, consistent with
    the smoothed objective) those terms use rho_mu, otherwise the exact rho.
    For k = 1 the omitted-index sum is empty and h2 = 0.
    """
    X = _as_matrix(X, gauge.dim, "prototypes")
    diff = X[None, :, :] - data.points[:, None, :]
    w = diff / mu
    p = gauge.polar_project(w)
    h1 = (mu / 2.0) * np.sum((w - p) ** 2)
    k = X.shape[0]
    if k == 1:
        return float(h1)
    dist = pairwise_gauge(data, X, gauge, mu=mu if smooth_h2 else None)
    # max_r sum_{l != r} rho(x_l - a_i) = row_sum - min_l rho(x_l - a_i)
    h2 = np.sum(np.sum(dist, axis=1) - np.min(dist, axis=1))
    return float(h1 + h2)


def assign(data, X, gauge):
    """Nearest-prototype assignment with smallest-index tie-breaking.

    Ties in the nearest sets are resolved with a relative tolerance on the
    gauge values; primary labels always take the smallest tied index.
    """
    X = _as_matrix(X, gauge.dim, "prototypes")
    dist = pairwise_gauge(data, X, gauge)
    best = np.min(dist, axis=1)
    tol = TIE_RTOL * (1.0 + np.abs(best))
    tied = dist <= (best + tol)[:, None]
    primary = np.argmax(tied, axis=1)  # first True = smallest index
    nearest_sets = [np.nonzero(row)[0] for row in tied]
    members = [np.nonzero(primary == l)[0] for l in range(X.shape[0])]
    return Assignment(primary=primary, nearest_sets=nearest_sets, members=members)


def _dedup_groups(X, tol):
    """Group prototype indices whose rows coincide within tol (union by chains)."""
    k = X.shape[0]
    group = -np.ones(k, dtype=int)
    reps = []
    for l in range(k):
        for gi, r in enumerate(reps):
            if np.linalg.norm(X[l] - X[r]) <= tol:
                group[l] = gi
                break
        else:
            group[l] = len(reps)
            reps.append(l)
    return [np.nonzero(group == gi)[0] for gi in range(len(reps))]


def effective_clusters(data, X, gauge, dedup_tol=DEDUP_TOL):
    """Count effective clusters: merged prototype classes owning >= 1 point.

    Prototype rows within ``dedup_tol`` of each other are merged into one
    class; a class counts if the union of nearest sets over its members is
    nonempty.  The count never exceeds min(k, n).
    """
    if dedup_tol < 0:
        raise ValueError("dedup_tol must be nonnegative")
    X = _as_matrix(X, gauge.dim, "prototypes")
    groups = _dedup_groups(X, dedup_tol)
    a = assign(data, X, gauge)
    hit = np.zeros(X.shape[0], dtype=bool)
    for sets in a.nearest_sets:
        hit[sets] = True
    count = sum(1 for g in groups if np.any(hit[g]))
    return count, groups


def center_spread(X):
    """Total pairwise prototype spread sum_{l<j} ||x_l - x_j||."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    k = X.shape[0]
    if k == 1:
        return 0.0
    iu = np.triu_indices(k, 1)
    return float(np.sum(np.linalg.norm(X[iu[0]] - X[iu[1]], axis=1)))
