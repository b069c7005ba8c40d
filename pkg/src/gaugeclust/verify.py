"""Independent correctness oracles.

These checks deliberately avoid the solver code paths: a multiresolution
grid search certifies global values on tiny 1-D instances, a convex
per-center subproblem check implements the necessary local-optimality
condition (necessary only -- a pass does not certify optimality), a
randomized probe audits the data-Lipschitz bound of the optimal value, and
the descent audit replays the per-iteration inequality from a solver trace.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .model import assign

__all__ = [
    "brute_force_global",
    "check_center_optimality",
    "value_stability_probe",
    "descent_audit",
    "OptimalityReport",
    "CenterCheck",
    "DescentAuditResult",
]

#: accuracy the grid oracle is trusted to (used as slack by downstream checks)
ORACLE_VALUE_SLACK = 1e-4

#: per-axis grid density by tuple size (denser axes when there are fewer)
_GRID_POINTS = {1: 2000, 2: 300, 3: 120}
_GRID_ROUNDS = 3
_POLISH_SWEEPS = 50

#: smoothing used when minimizing the convex per-center subproblem
SUBPROBLEM_MU = 1e-6


def _objective_1d(a, xs, lam, n, gauge):
    """Exact objective at one center tuple (1-D data)."""
    dists = gauge.value((np.subtract.outer(xs, a))[..., None])  # (k, n)
    fid = float(np.sum(np.min(dists, axis=0)))
    pen = 0.0
    for s in range(len(xs)):
        for t in range(s + 1, len(xs)):
            pen += (xs[s] - xs[t]) ** 2
    return fid + 0.5 * lam * n * pen


def _suffix_join(vals_lo, vals_hi):
    """Index pairs (i, j) with vals_lo[i] <= vals_hi[j], both inputs sorted.

    Valid j form a suffix of vals_hi per i, so the pairs come from a
    searchsorted plus a vectorized concatenated-arange.
    """
    starts = np.searchsorted(vals_hi, vals_lo, side="left")
    counts = len(vals_hi) - starts
    lo_idx = np.repeat(np.arange(len(vals_lo)), counts)
    ends = np.cumsum(counts)
    offsets = np.repeat(starts - np.concatenate(([0], ends[:-1])), counts)
    hi_idx = np.arange(int(ends[-1]) if len(ends) else 0) + offsets
    return lo_idx, hi_idx


def _ordered_index_tuples(grids):
    """Index tuples into per-axis grids with nondecreasing center values."""
    k = len(grids)
    if k == 1:
        return np.arange(len(grids[0]))[:, None]
    if k == 2:
        i1, i2 = _suffix_join(grids[0], grids[1])
        return np.stack([i1, i2], axis=1)
    i2, i3 = _suffix_join(grids[1], grids[2])
    # grids[1][i2] is nondecreasing by construction, so join against it
    i1, pair = _suffix_join(grids[0], grids[1][i2])
    return np.stack([i1, i2[pair], i3[pair]], axis=1)


def _grid_eval(data, grids, idx, lam, gauge):
    """Objective over candidate index tuples, via per-axis distance tables."""
    a = data.points[:, 0]
    k = len(grids)
    tables = [gauge.value((g[:, None] - a[None, :])[..., None]) for g in grids]
    d = tables[0][idx[:, 0]].copy()
    for j in range(1, k):
        np.minimum(d, tables[j][idx[:, j]], out=d)
    f = d.sum(axis=1)
    xs = [grids[j][idx[:, j]] for j in range(k)]
    for s in range(k):
        for t in range(s + 1, k):
            f += 0.5 * lam * data.n * (xs[s] - xs[t]) ** 2
    return f


def brute_force_global(data, k, lam, gauge, resolution=1e-6):
    """Certified global minimum of tiny 1-D instances by grid refinement.

    Searches ordered center tuples over the data hull padded by 10% of its
    span, refining the per-axis grids around the incumbent until the spacing
    reaches ``resolution``, then polishing coordinatewise.  Returns
    (value, centers).
    """
    if data.dim != 1:
        raise ValueError("the brute-force oracle only handles 1-D data")
    if not 1 <= k <= 3:
        raise ValueError("the brute-force oracle only handles k <= 3")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    a = data.points[:, 0]
    span = max(a.max() - a.min(), 1e-12)
    lo_dom, hi_dom = a.min() - 0.1 * span, a.max() + 0.1 * span
    lo = np.full(k, lo_dom)
    hi = np.full(k, hi_dom)
    points = _GRID_POINTS[k]
    best_x, best_f = None, np.inf
    rounds = 0
    while True:
        rounds += 1
        grids = [np.linspace(lo[j], hi[j], points) for j in range(k)]
        idx_tuples = _ordered_index_tuples(grids)
        f = _grid_eval(data, grids, idx_tuples, lam, gauge)
        best = int(np.argmin(f))
        if f[best] < best_f:
            best_f = float(f[best])
            best_x = np.array([grids[j][idx_tuples[best, j]] for j in range(k)])
        spacing = (hi - lo) / (points - 1)
        # refine until the spacing is within reach of the polish step
        if (rounds >= _GRID_ROUNDS and np.max(spacing) <= 4.0 * resolution) or rounds >= 10:
            break
        lo = np.clip(best_x - 2 * spacing, lo_dom, hi_dom)
        hi = np.clip(best_x + 2 * spacing, lo_dom, hi_dom)
    # coordinatewise polish at the terminal step size
    step = max(resolution, 1e-6)
    x = best_x.copy()
    for _ in range(_POLISH_SWEEPS):
        moved = False
        for j in range(k):
            for delta in (-step, step):
                trial = x.copy()
                trial[j] += delta
                f_trial = _objective_1d(a, trial, lam, data.n, gauge)
                if f_trial < best_f:
                    best_f, x = f_trial, trial
                    moved = True
        if not moved:
            break
    return best_f, np.sort(x)


@dataclass
class CenterCheck:
    """Per-center outcome of the necessary-condition check."""

    index: int
    center: list
    minimizer: list
    gap: float
    passed: bool


@dataclass
class OptimalityReport:
    """Outcome of the per-center convex subproblem check.

    The condition is necessary, not sufficient: ``passed`` certifies only
    that no center can be improved with the others held fixed.  When some
    point has tied nearest centers the check's premise (a unique assignment
    that stays fixed under small center moves) fails and the report is
    marked inapplicable.
    """

    applicable: bool
    singleton: list
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return self.applicable and all(c.passed for c in self.checks)

    def to_json(self, **kwargs):
        return json.dumps(
            {
                "applicable": self.applicable,
                "passed": self.passed,
                "necessary_condition_only": True,
                "singleton": self.singleton,
                "checks": [asdict(c) for c in self.checks],
            },
            **kwargs,
        )


def _minimize_center_subproblem(points, anchors, lam, n, gauge, x0):
    """Minimize the smoothed per-center function phi from several starts."""

    def fun_grad(x):
        if points.shape[0]:
            diff = x[None, :] - points
            val = float(np.sum(gauge.smooth_value(diff, SUBPROBLEM_MU)))
            grad = np.sum(gauge.smooth_gradient(diff, SUBPROBLEM_MU), axis=0)
        else:
            val, grad = 0.0, np.zeros_like(x)
        if anchors.shape[0]:
            dd = x[None, :] - anchors
            val += 0.5 * lam * n * float(np.sum(dd * dd))
            grad = grad + lam * n * np.sum(dd, axis=0)
        return val, grad

    starts = [x0] + [p for p in points]
    best_x, best_val = None, np.inf
    for start in starts:
        res = minimize(
            fun_grad, np.asarray(start, dtype=float), jac=True,
            method="L-BFGS-B",
            options={"maxiter": 10_000, "ftol": 1e-16, "gtol": 1e-10},
        )
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x
    if best_x is None:
        raise RuntimeError("per-center subproblem minimization failed")
    return best_x


def check_center_optimality(data, Xbar, lam, gauge, tol=1e-6):
    """Necessary-condition check: each center must minimize its convex subproblem.

    For each center the subproblem sums the gauge distances to its assigned
    points plus the quadratic pull toward the other (fixed) centers.  The
    reported gap is the exact-objective improvement available; negative gaps
    beyond round-off cannot occur by convexity.
    """
    Xbar = np.asarray(Xbar, dtype=float)
    if Xbar.ndim == 1:
        Xbar = Xbar[:, None]
    a = assign(data, Xbar, gauge)
    singleton = [len(s) == 1 for s in a.nearest_sets]
    report = OptimalityReport(applicable=all(singleton), singleton=singleton)
    k = Xbar.shape[0]
    for l in range(k):
        members = data.points[a.members[l]]
        anchors = np.delete(Xbar, l, axis=0)

        def phi(x):
            val = float(np.sum(gauge.value(x[None, :] - members))) if members.shape[0] else 0.0
            if anchors.shape[0]:
                dd = x[None, :] - anchors
                val += 0.5 * lam * data.n * float(np.sum(dd * dd))
            return val

        x_star = _minimize_center_subproblem(
            members, anchors, lam, data.n, gauge, Xbar[l]
        )
        gap = phi(Xbar[l]) - phi(x_star)
        report.checks.append(
            CenterCheck(
                index=l,
                center=Xbar[l].tolist(),
                minimizer=x_star.tolist(),
                gap=float(gap),
                passed=bool(gap <= tol),
            )
        )
    return report


def value_stability_probe(data_a, data_b, k, lam, gauge, resolution=1e-6):
    """Audit the data-Lipschitz bound of the optimal value on a 1-D pair.

    Both optimal values come from the grid oracle; the bound is
    |V(A) - V(B)| <= ||F polar|| sqrt(n) ||A - B||_F plus twice the oracle's
    value slack.
    """
    if data_a.points.shape != data_b.points.shape:
        raise ValueError("the two instances must have identical shapes")
    va, _ = brute_force_global(data_a, k, lam, gauge, resolution)
    vb, _ = brute_force_global(data_b, k, lam, gauge, resolution)
    lhs = abs(va - vb)
    _, norm_polar = gauge.norm_bounds()
    rhs = norm_polar * np.sqrt(data_a.n) * np.linalg.norm(data_a.points - data_b.points)
    return lhs, float(rhs), bool(lhs <= rhs + 2 * ORACLE_VALUE_SLACK)


@dataclass
class DescentAuditResult:
    passed: bool
    worst_slack: float
    fail_index: int | None = None

    def to_json(self, **kwargs):
        return json.dumps(asdict(self), **kwargs)


def descent_audit(trace, n, mu, rel_tol=1e-9):
    """Replay the per-iteration descent inequality from a plain DC trace.

    Checks f(X_t) - f(X_{t+1}) >= (n / 2 mu) ||dX||_F^2 up to a relative
    slack, recomputed from the recorded objective and step-norm sequences.
    """
    f_seq = [trace.f_init] + list(trace.f_mu) if trace.f_init is not None else list(trace.f_mu)
    steps = list(trace.step_norm)
    worst = np.inf
    offset = len(f_seq) - len(steps)  # 1 when the initial objective is present
    for t, step in enumerate(steps):
        if t + offset - 1 < 0:
            continue
        f_prev = f_seq[t + offset - 1]
        f_next = f_seq[t + offset]
        slack = f_prev - f_next - (n / (2.0 * mu)) * step**2
        allowed = -rel_tol * (1.0 + abs(f_prev))
        worst = min(worst, slack)
        if slack < allowed:
            return DescentAuditResult(passed=False, worst_slack=float(slack), fail_index=t)
    if not steps:
        worst = 0.0
    return DescentAuditResult(passed=True, worst_slack=float(worst))
