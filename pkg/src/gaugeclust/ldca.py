"""Outer loop: prototype deletion, seeding, and the warm-started parameter path.

The outer loop repeatedly solves the inner DC problem, assigns every point to
its nearest surviving prototype (smallest index on ties), deletes prototypes
owning no points, and stops once no deletion occurs.  The path runner sweeps
a paired schedule of increasing fusion weight and decreasing smoothing,
warm-starting every step from the previous step's survivors.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .model import DEDUP_TOL, assign, center_spread, effective_clusters
from .solvers import SolverConfig, SolverError, bdca_solve, dca_solve, midca_solve

__all__ = [
    "PathSchedule",
    "PathRecord",
    "LdcaResult",
    "geomspace",
    "kmeanspp_init",
    "ldca_k",
    "run_path",
    "merge_duplicates",
    "longest_constant_run",
    "modal_k",
    "path_records_to_csv",
    "path_records_to_json",
]

#: outer cap on deletion rounds within a single fit
MAX_DELETION_ROUNDS = 50

_SOLVERS = {"dca": dca_solve, "bdca": bdca_solve, "midca": midca_solve}

#: fixed column order of exported path records
PATH_COLUMNS = [
    "step",
    "lambda",
    "mu",
    "k_eff",
    "size_min",
    "size_max",
    "size_mean",
    "size_std",
    "ari",
    "center_spread",
    "converged",
]


def geomspace(a, b, num):
    """Geometric progression from a to b inclusive with a constant ratio."""
    if not (a > 0 and b > 0):
        raise ValueError("geomspace endpoints must be positive")
    if num < 1:
        raise ValueError("num must be a positive integer")
    if num == 1:
        return np.array([float(a)])
    v = np.geomspace(a, b, num)
    v[0], v[-1] = a, b  # endpoints exact
    return v


@dataclass
class PathSchedule:
    """Paired (fusion, smoothing) schedules traversed sequentially."""

    lambdas: np.ndarray
    mus: np.ndarray

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.mus = np.asarray(self.mus, dtype=float)
        if self.lambdas.shape != self.mus.shape or self.lambdas.ndim != 1:
            raise ValueError("schedules must be 1-D arrays of equal length")
        if len(self.lambdas) > 1:
            if not np.all(np.diff(self.lambdas) > 0):
                raise ValueError("fusion schedule must be strictly increasing")
            if not np.all(np.diff(self.mus) < 0):
                raise ValueError("smoothing schedule must be strictly decreasing")

    def __len__(self):
        return len(self.lambdas)

    @classmethod
    def default(cls, num=100, lam_lo=1e-2, lam_hi=2.0, mu_hi=2.0, mu_lo=1e-4):
        return cls(geomspace(lam_lo, lam_hi, num), geomspace(mu_hi, mu_lo, num))


@dataclass
class PathRecord:
    """Per-step summary along the warm-started path."""

    step: int
    lam: float
    mu: float
    k_eff: int
    size_min: int
    size_max: int
    size_mean: float
    size_std: float
    ari: float | None
    center_spread: float
    converged: bool
    prototypes: np.ndarray | None = field(default=None, repr=False, compare=False)
    #: true when the inner solve raised instead of returning a fit
    failed: bool = field(default=False, compare=False)

    def row(self):
        return {
            "step": self.step,
            "lambda": self.lam,
            "mu": self.mu,
            "k_eff": self.k_eff,
            "size_min": self.size_min,
            "size_max": self.size_max,
            "size_mean": self.size_mean,
            "size_std": self.size_std,
            "ari": "" if self.ari is None else self.ari,
            "center_spread": self.center_spread,
            "converged": self.converged,
        }


@dataclass
class LdcaResult:
    """Outcome of one deletion-loop fit."""

    prototypes: np.ndarray
    k_eff: int
    labels: np.ndarray
    traces: list
    converged: bool
    deletion_rounds: int


def kmeanspp_init(data, k0, gauge, seed):
    """Seed k0 prototypes from the data rows, k-means++ style under the gauge.

    The first row is uniform; each further row is drawn with probability
    proportional to the squared gauge distance to the nearest chosen
    prototype.  Deterministic for a fixed seed.
    """
    n = data.n
    if not 1 <= k0 <= n:
        raise ValueError(f"k0 must lie in [1, {n}], got {k0}")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d_min = gauge.value(data.points[chosen[0]][None, :] - data.points)
    while len(chosen) < k0:
        weights = d_min**2
        total = weights.sum()
        if total > 0:
            probs = weights / total
            idx = int(rng.choice(n, p=probs))
        else:  # all remaining points coincide with a chosen prototype
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        d_new = gauge.value(data.points[idx][None, :] - data.points)
        d_min = np.minimum(d_min, d_new)
    return data.points[chosen].copy()


def ldca_k(
    data,
    k0,
    lam,
    mu,
    gauge,
    cfg=None,
    inner="dca",
    seed=0,
    X0=None,
    dedup_tol=DEDUP_TOL,
):
    """Inner solves alternated with deletion of prototypes owning no points.

    Points are assigned by primary (smallest-index) nearest labels before
    each deletion, so exactly coincident prototypes collapse onto the
    smallest index.  Returns surviving prototypes, the effective-cluster
    count, final labels and the inner traces.
    """
    cfg = cfg or SolverConfig()
    solver = _SOLVERS[inner]
    X = kmeanspp_init(data, k0, gauge, seed) if X0 is None else np.asarray(X0, dtype=float).copy()
    traces = []
    converged = True
    rounds = 0
    for rounds in range(1, MAX_DELETION_ROUNDS + 1):
        try:
            X, trace = solver(data, X, lam, mu, gauge, cfg)
        except SolverError as exc:
            raise SolverError(f"inner solve failed in deletion round {rounds}: {exc}") from exc
        traces.append(trace)
        converged = trace.converged
        a = assign(data, X, gauge)
        keep = [l for l in range(X.shape[0]) if len(a.members[l]) > 0]
        if len(keep) == X.shape[0]:
            break
        X = X[keep]
    a = assign(data, X, gauge)
    k_eff, _ = effective_clusters(data, X, gauge, dedup_tol)
    return LdcaResult(
        prototypes=X,
        k_eff=k_eff,
        labels=a.primary,
        traces=traces,
        converged=converged,
        deletion_rounds=rounds,
    )


def merge_duplicates(X, dedup_tol=DEDUP_TOL):
    """Drop prototype rows within dedup_tol of an earlier row (keep smallest index)."""
    keep = []
    for l in range(X.shape[0]):
        if all(np.linalg.norm(X[l] - X[r]) > dedup_tol for r in keep):
            keep.append(l)
    return X[keep]


def run_path(
    data,
    schedule=None,
    k0=10,
    gauge=None,
    cfg=None,
    seed=0,
    inner="dca",
    dedup_tol=DEDUP_TOL,
    keep_prototypes=False,
):
    """Warm-started traversal of the paired parameter schedule.

    Step t+1 starts from step t's surviving prototypes (duplicates within
    ``dedup_tol`` merged, smallest index kept).  A failed step is recorded as
    non-converged and the path continues from the last good prototypes.
    """
    from .data import ari as ari_score

    schedule = schedule or PathSchedule.default()
    cfg = cfg or SolverConfig()
    X = kmeanspp_init(data, k0, gauge, seed)
    records = []
    for t in range(len(schedule)):
        lam, mu = float(schedule.lambdas[t]), float(schedule.mus[t])
        try:
            res = ldca_k(
                data, X.shape[0], lam, mu, gauge, cfg,
                inner=inner, X0=X, dedup_tol=dedup_tol,
            )
        except SolverError:
            records.append(
                PathRecord(
                    step=t, lam=lam, mu=mu,
                    k_eff=X.shape[0], size_min=0, size_max=0,
                    size_mean=0.0, size_std=0.0, ari=None,
                    center_spread=center_spread(X), converged=False,
                    prototypes=X.copy() if keep_prototypes else None,
                    failed=True,
                )
            )
            continue
        sizes = np.array([len(m) for m in assign(data, res.prototypes, gauge).members])
        sizes = sizes[sizes > 0]
        rec_ari = None
        if data.labels is not None:
            rec_ari = ari_score(data.labels, res.labels)
        X = merge_duplicates(res.prototypes, dedup_tol)
        records.append(
            PathRecord(
                step=t, lam=lam, mu=mu, k_eff=res.k_eff,
                size_min=int(sizes.min()), size_max=int(sizes.max()),
                size_mean=float(sizes.mean()), size_std=float(sizes.std()),
                ari=rec_ari, center_spread=center_spread(res.prototypes),
                converged=res.converged,
                prototypes=X.copy() if keep_prototypes else None,
            )
        )
    return records


def longest_constant_run(k_values, burn_in_frac=0.1):
    """Longest constant run of k after burn-in: (k, run_length, post_burn_len)."""
    k_values = list(k_values)
    start = int(np.floor(burn_in_frac * len(k_values)))
    tail = k_values[start:]
    if not tail:
        return None, 0, 0
    best_k, best_len = tail[0], 0
    cur_k, cur_len = tail[0], 0
    for k in tail:
        if k == cur_k:
            cur_len += 1
        else:
            cur_k, cur_len = k, 1
        if cur_len > best_len:
            best_k, best_len = cur_k, cur_len
    return best_k, best_len, len(tail)


def modal_k(k_values):
    """Most frequent k (smallest on ties)."""
    vals, counts = np.unique(np.asarray(list(k_values)), return_counts=True)
    return int(vals[np.argmax(counts)])


def path_records_to_csv(records, fileobj=None):
    """Write path records as CSV in the fixed column order."""
    out = fileobj or io.StringIO()
    writer = csv.DictWriter(out, fieldnames=PATH_COLUMNS)
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())
    if fileobj is None:
        return out.getvalue()
    return None


def path_records_to_json(records, **kwargs):
    return json.dumps([rec.row() for rec in records], **kwargs)
