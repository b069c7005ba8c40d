"""Minkowski gauge distances and their polar-set machinery.

A gauge is determined by a compact convex set F with the origin in its
interior.  Everything the solvers need reduces to four primitives: the gauge
value rho(z), the Euclidean projection onto the polar set of F, a subgradient
selection for rho, and the norm bounds ||F|| and ||F polar||.  The smoothed
surrogate

    rho_mu(z) = ||z||^2 / (2 mu) - (mu / 2) * dist(z / mu; F_polar)^2

and its gradient (the projection of z / mu onto the polar set) are derived
from the projection primitive, so subclasses only implement the four
primitives above.

All operations accept stacked inputs of shape (..., dim) and are pure
functions of their arguments.
"""

import numpy as np
from scipy.optimize import brentq, linprog

__all__ = [
    "Gauge",
    "L1Ball",
    "L2Ball",
    "LinfBall",
    "WeightedL2Ball",
    "PolytopeVertices",
    "GaugeError",
    "make_gauge",
    "load_polytope_csv",
]


class GaugeError(ValueError):
    """Raised for invalid gauge definitions or failed polar projections."""


def _check_dim(gauge, z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != gauge.dim:
        raise GaugeError(
            f"dimension mismatch: gauge has dim {gauge.dim}, "
            f"input has dim {z.shape[-1]}"
        )
    return z


class Gauge:
    """Base class: gauge of a compact convex set F with 0 in its interior."""

    def __init__(self, dim):
        if dim < 1:
            raise GaugeError("gauge dimension must be a positive integer")
        self.dim = int(dim)

    def value(self, z):
        """Gauge value rho(z) = inf{t >= 0 : z in t F}, for stacked z."""
        raise NotImplementedError

    def polar_project(self, v):
        """Euclidean projection of v onto the polar set of F."""
        raise NotImplementedError

    def subgradient(self, z):
        """A subgradient of rho at z: a maximizer of <v, z> over the polar set.

        At z = 0 the zero vector is returned (0 always lies in the polar set).
        """
        raise NotImplementedError

    def norm_bounds(self):
        """Return (sup ||x|| over F, sup ||v|| over the polar of F)."""
        raise NotImplementedError

    def smooth_value(self, z, mu):
        """Nesterov-smoothed gauge rho_mu(z), elementwise over stacked z."""
        z = _check_dim(self, z)
        _check_mu(mu)
        w = z / mu
        p = self.polar_project(w)
        sq = np.sum(z * z, axis=-1)
        dist_sq = np.sum((w - p) ** 2, axis=-1)
        return sq / (2.0 * mu) - (mu / 2.0) * dist_sq

    def smooth_gradient(self, z, mu):
        """Gradient of rho_mu at z: the projection of z / mu onto the polar set."""
        z = _check_dim(self, z)
        _check_mu(mu)
        return self.polar_project(z / mu)

    def polar_contains(self, v, tol=1e-9):
        """Membership test for the polar set, within tolerance."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def _check_mu(mu):
    if not mu > 0:
        raise GaugeError(f"smoothing parameter must be positive, got {mu}")


class L2Ball(Gauge):
    """Euclidean unit ball; the gauge is the Euclidean norm."""

    def value(self, z):
        z = _check_dim(self, z)
        return np.linalg.norm(z, axis=-1)

    def polar_project(self, v):
        v = _check_dim(self, v)
        nrm = np.linalg.norm(v, axis=-1, keepdims=True)
        scale = np.where(nrm > 1.0, np.where(nrm > 0, 1.0 / np.maximum(nrm, 1e-300), 1.0), 1.0)
        return v * scale

    def subgradient(self, z):
        z = _check_dim(self, z)
        nrm = np.linalg.norm(z, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(nrm > 0, z / np.maximum(nrm, 1e-300), 0.0)
        return g

    def norm_bounds(self):
        return 1.0, 1.0

    def polar_contains(self, v, tol=1e-9):
        v = _check_dim(self, v)
        return np.linalg.norm(v, axis=-1) <= 1.0 + tol


class L1Ball(Gauge):
    """ell_1 unit ball; the gauge is the ell_1 norm, the polar the ell_inf ball."""

    def value(self, z):
        z = _check_dim(self, z)
        return np.sum(np.abs(z), axis=-1)

    def polar_project(self, v):
        v = _check_dim(self, v)
        return np.clip(v, -1.0, 1.0)

    def subgradient(self, z):
        z = _check_dim(self, z)
        # Maximizing vertex of the ell_inf ball; zero coordinates break ties
        # to -1 (lexicographically smallest vertex), except at z = 0.
        g = np.where(z > 0, 1.0, -1.0)
        zero = np.all(z == 0, axis=-1, keepdims=True)
        return np.where(zero, 0.0, g)

    def norm_bounds(self):
        return 1.0, float(np.sqrt(self.dim))

    def polar_contains(self, v, tol=1e-9):
        v = _check_dim(self, v)
        return np.max(np.abs(v), axis=-1) <= 1.0 + tol


class LinfBall(Gauge):
    """ell_inf unit ball; the gauge is the max norm, the polar the ell_1 ball."""

    def value(self, z):
        z = _check_dim(self, z)
        return np.max(np.abs(z), axis=-1)

    def polar_project(self, v):
        v = _check_dim(self, v)
        return _project_l1_ball(v)

    def subgradient(self, z):
        z = _check_dim(self, z)
        a = np.abs(z)
        m = np.max(a, axis=-1, keepdims=True)
        # Smallest coordinate index attaining the max; vertex sign(z_i) e_i.
        idx = np.argmax(a, axis=-1)
        g = np.zeros_like(z)
        s = np.sign(np.take_along_axis(z, idx[..., None], axis=-1))
        np.put_along_axis(g, idx[..., None], s, axis=-1)
        zero = m == 0
        return np.where(zero, 0.0, g)

    def norm_bounds(self):
        return float(np.sqrt(self.dim)), 1.0

    def polar_contains(self, v, tol=1e-9):
        v = _check_dim(self, v)
        return np.sum(np.abs(v), axis=-1) <= 1.0 + tol


def _project_l1_ball(v, radius=1.0):
    """Euclidean projection onto the ell_1 ball, batched over leading axes.

    Sort-based thresholding (Duchi et al. style) applied along the last axis.
    """
    a = np.abs(v)
    inside = np.sum(a, axis=-1) <= radius
    if np.all(inside):
        return v.copy()
    u = np.sort(a, axis=-1)[..., ::-1]
    cs = np.cumsum(u, axis=-1)
    j = np.arange(1, v.shape[-1] + 1)
    cond = u * j > (cs - radius)
    rho = np.sum(cond, axis=-1)  # >= 1 whenever outside the ball
    rho_safe = np.maximum(rho, 1)
    theta = (np.take_along_axis(cs, rho_safe[..., None] - 1, axis=-1)[..., 0] - radius) / rho_safe
    proj = np.sign(v) * np.maximum(a - theta[..., None], 0.0)
    return np.where(inside[..., None], v, proj)


class WeightedL2Ball(Gauge):
    """Ellipsoid {x : sum_i w_i x_i^2 <= 1} with positive weights.

    The gauge is rho(x) = sqrt(sum_i w_i x_i^2); the polar set is the
    ellipsoid {v : sum_i v_i^2 / w_i <= 1}.
    """

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise GaugeError("weights must be a 1-D sequence of positive reals")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise GaugeError("all ellipsoid weights must be finite and positive")
        super().__init__(weights.size)
        self.weights = weights

    def value(self, z):
        z = _check_dim(self, z)
        return np.sqrt(np.sum(self.weights * z * z, axis=-1))

    def subgradient(self, z):
        z = _check_dim(self, z)
        val = self.value(z)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(val > 0, self.weights * z / np.maximum(val, 1e-300), 0.0)
        return g

    def polar_project(self, v):
        v = _check_dim(self, v)
        flat = v.reshape(-1, self.dim)
        out = flat.copy()
        c = self.weights  # polar constraint: sum v_i^2 / w_i <= 1
        lhs = np.sum(flat * flat / c, axis=-1)
        for idx in np.nonzero(lhs > 1.0)[0]:
            out[idx] = _project_ellipsoid(flat[idx], c)
        return out.reshape(v.shape)

    def norm_bounds(self):
        return float(1.0 / np.sqrt(np.min(self.weights))), float(np.sqrt(np.max(self.weights)))

    def polar_contains(self, v, tol=1e-9):
        v = _check_dim(self, v)
        return np.sum(v * v / self.weights, axis=-1) <= 1.0 + tol


def _project_ellipsoid(v, c):
    """Project v onto {y : sum y_i^2 / c_i <= 1}, assuming v lies outside.

    KKT gives y_i = v_i / (1 + t / c_i) with t > 0 the root of the monotone
    secular equation sum y_i^2 / c_i = 1, solved by bracketed root-finding.
    """

    def phi(t):
        y = v / (1.0 + t / c)
        return np.sum(y * y / c) - 1.0

    hi = 1.0
    while phi(hi) > 0:
        hi *= 2.0
        if hi > 1e18:  # pragma: no cover - c, v finite makes this unreachable
            raise GaugeError("ellipsoid projection failed to bracket the root")
    t = brentq(phi, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return v / (1.0 + t / c)


class PolytopeVertices(Gauge):
    """Gauge of the convex hull of an explicit vertex list.

    The origin must lie strictly inside the hull (checked via the hull's
    facet inequalities with a 1e-9 interior margin).  The polar set is the
    polyhedron {v : <v, vertex_j> <= 1 for all j}; projection onto it is
    computed by projected gradient on the dual nonnegative quadratic program.
    """

    #: projection loop controls
    PROJ_TOL = 1e-10
    PROJ_MAX_ITER = 10_000
    INTERIOR_MARGIN = 1e-9

    def __init__(self, vertices):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[0] < 2:
            raise GaugeError("need a 2-D array with at least two vertices")
        if not np.all(np.isfinite(vertices)):
            raise GaugeError("polytope vertices must be finite")
        super().__init__(vertices.shape[1])
        self.vertices = vertices
        self._inradius = self._check_interior_origin()
        m = vertices @ vertices.T
        self._proj_step = 1.0 / max(np.linalg.eigvalsh(m)[-1], 1e-300)

    def _check_interior_origin(self):
        v = self.vertices
        if self.dim == 1:
            lo, hi = float(v.min()), float(v.max())
            if lo >= -self.INTERIOR_MARGIN or hi <= self.INTERIOR_MARGIN:
                raise GaugeError("origin is not strictly inside the hull")
            return min(-lo, hi)
        from scipy.spatial import ConvexHull, QhullError

        try:
            hull = ConvexHull(v)
        except QhullError as exc:
            raise GaugeError(f"degenerate vertex set (empty interior): {exc}") from exc
        # Facets are a x + b <= 0; the ball B(0, r) fits iff r ||a|| <= -b.
        a = hull.equations[:, :-1]
        b = hull.equations[:, -1]
        r = float(np.min(-b / np.linalg.norm(a, axis=1)))
        if r <= self.INTERIOR_MARGIN:
            raise GaugeError(
                f"origin is not strictly inside the hull (inradius {r:.3e})"
            )
        return r

    def value(self, z):
        z = _check_dim(self, z)
        flat = z.reshape(-1, self.dim)
        out = np.array([self._value_single(row) for row in flat])
        return out.reshape(z.shape[:-1])

    def _value_single(self, z):
        if not np.any(z):
            return 0.0
        # min t s.t. z in t * hull:  variables (theta, t), theta >= 0,
        # V^T theta = z, 1^T theta = t.
        m = self.vertices.shape[0]
        a_eq = self.vertices.T
        res = linprog(
            c=np.ones(m),
            A_eq=a_eq,
            b_eq=z,
            bounds=[(0, None)] * m,
            method="highs",
        )
        if not res.success:
            raise GaugeError(f"gauge value LP failed: {res.message}")
        return float(res.fun)

    def subgradient(self, z):
        z = _check_dim(self, z)
        flat = z.reshape(-1, self.dim)
        out = np.array([self._subgradient_single(row) for row in flat])
        return out.reshape(z.shape)

    def _subgradient_single(self, z):
        if not np.any(z):
            return np.zeros(self.dim)
        # max <v, z> over the polar polyhedron {V v <= 1}.
        res = linprog(
            c=-z,
            A_ub=self.vertices,
            b_ub=np.ones(self.vertices.shape[0]),
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        if not res.success:
            raise GaugeError(f"gauge subgradient LP failed: {res.message}")
        return res.x

    def polar_project(self, v):
        v = _check_dim(self, v)
        flat = np.atleast_2d(v.reshape(-1, self.dim))
        vert = self.vertices
        slack = flat @ vert.T - 1.0  # (b, m)
        outside = np.max(slack, axis=-1) > 0
        out = flat.copy()
        if np.any(outside):
            out[outside] = self._project_batch(flat[outside])
        return out.reshape(v.shape)

    def _project_batch(self, w):
        """Dual projected gradient: min 0.5 th' M th - th' (V w - 1), th >= 0."""
        vert = self.vertices
        m = vert @ vert.T
        c = w @ vert.T - 1.0
        theta = np.zeros_like(c)
        step = self._proj_step
        prev = w - theta @ vert
        for _ in range(self.PROJ_MAX_ITER):
            theta = np.maximum(0.0, theta - step * (theta @ m - c))
            cur = w - theta @ vert
            if np.max(np.abs(cur - prev)) < self.PROJ_TOL:
                feas = np.max(cur @ vert.T - 1.0)
                if feas <= self.PROJ_TOL:
                    return cur
            prev = cur
        residual = float(np.max(prev @ vert.T - 1.0))
        raise GaugeError(
            f"polar projection did not converge within {self.PROJ_MAX_ITER} "
            f"iterations (feasibility residual {residual:.3e})"
        )

    def norm_bounds(self):
        norm_f = float(np.max(np.linalg.norm(self.vertices, axis=1)))
        return norm_f, 1.0 / self._inradius

    def polar_contains(self, v, tol=1e-9):
        v = _check_dim(self, v)
        return np.max(v @ self.vertices.T, axis=-1) <= 1.0 + tol


def load_polytope_csv(path):
    """Build a PolytopeVertices gauge from a CSV file with one vertex per row."""
    vertices = np.loadtxt(path, delimiter=",", ndmin=2)
    return PolytopeVertices(vertices)


def make_gauge(spec, dim):
    """Parse a gauge spec string into a Gauge of the given dimension.

    Accepted forms: "l1", "l2", "linf", "wl2:w1,w2,...", "poly:<vertices.csv>".
    A Gauge instance is passed through after a dimension check.
    """
    if isinstance(spec, Gauge):
        if spec.dim != dim:
            raise GaugeError(f"gauge has dim {spec.dim}, expected {dim}")
        return spec
    name = spec.strip().lower()
    if name == "l1":
        return L1Ball(dim)
    if name == "l2":
        return L2Ball(dim)
    if name == "linf":
        return LinfBall(dim)
    if name.startswith("wl2:"):
        weights = np.array([float(tok) for tok in name[4:].split(",")])
        g = WeightedL2Ball(weights)
        if g.dim != dim:
            raise GaugeError(f"weight list has length {g.dim}, expected {dim}")
        return g
    if spec.strip().startswith("poly:"):
        g = load_polytope_csv(spec.strip()[5:])
        if g.dim != dim:
            raise GaugeError(f"polytope vertices have dim {g.dim}, expected {dim}")
        return g
    raise GaugeError(f"unrecognized gauge spec {spec!r}")
