import json

import numpy as np
import pytest

from gaugeclust.gauges import L1Ball, L2Ball, LinfBall
from gaugeclust.model import DataSet, concave_part, convex_part, smoothed_objective
from gaugeclust.solvers import (
    SolverConfig,
    SolverError,
    bdca_solve,
    constants,
    dca_solve,
    dca_update,
    grad_g,
    midca_solve,
    subgradient_h,
)


def random_instance(rng, n_max=12, k_max=5, d_max=3):
    n = int(rng.integers(2, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    d = int(rng.integers(1, d_max + 1))
    data = DataSet(rng.normal(size=(n, d)))
    X = rng.normal(size=(k, d))
    lam = float(rng.uniform(0.0, 1.0))
    mu = float(rng.uniform(0.02, 1.0))
    return data, X, lam, mu


def dense_dca_solve(data, Y, lam, mu, k):
    """Reference: assemble and solve the full (kd, kd) linear system."""
    n, d = data.n, data.dim
    centroid = data.points.mean(axis=0)
    lap = k * np.eye(k) - np.ones((k, k))  # complete-graph Laplacian
    H = (n / mu) * np.eye(k * d) + lam * n * np.kron(lap, np.eye(d))
    rhs = (Y + (n / mu) * centroid).ravel()
    return np.linalg.solve(H, rhs).reshape(k, d)


class TestConfig:
    def test_defaults_valid(self):
        cfg = SolverConfig()
        assert cfg.tol == 1e-6 and cfg.max_iter == 500
        assert cfg.inertial_depth == 2

    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            SolverConfig(tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(ls_beta=1.0)
        with pytest.raises(ValueError):
            SolverConfig(inertial_coeffs=(0.6, 0.5))
        with pytest.raises(ValueError):
            SolverConfig(inertial_coeffs=(-0.1,))


class TestConstants:
    def test_formulas(self):
        gamma, lip = constants(450, 3, 1.0, 0.1)
        assert gamma == pytest.approx(4500.0)
        assert lip == pytest.approx(5850.0)

    def test_zero_fusion(self):
        gamma, lip = constants(10, 4, 0.0, 0.5)
        assert gamma == lip

    def test_bounds_along_eigendirections(self):
        # constant-row perturbations realize gamma, mean-zero rows realize L
        rng = np.random.default_rng(0)
        data = DataSet(rng.normal(size=(7, 2)))
        X = rng.normal(size=(3, 2))
        lam, mu = 0.4, 0.2
        gamma, lip = constants(data.n, 3, lam, mu)
        const_dir = np.tile(rng.normal(size=(1, 2)), (3, 1))
        diff = grad_g(data, X + const_dir, lam, mu) - grad_g(data, X, lam, mu)
        assert np.linalg.norm(diff) == pytest.approx(
            gamma * np.linalg.norm(const_dir), rel=1e-9
        )
        zero_mean = rng.normal(size=(3, 2))
        zero_mean -= zero_mean.mean(axis=0)
        diff = grad_g(data, X + zero_mean, lam, mu) - grad_g(data, X, lam, mu)
        assert np.linalg.norm(diff) == pytest.approx(
            lip * np.linalg.norm(zero_mean), rel=1e-9
        )

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            constants(0, 1, 0.1, 0.1)
        with pytest.raises(ValueError):
            constants(1, 1, 0.1, 0.0)


class TestGradG:
    def test_zero_at_centroid(self):
        rng = np.random.default_rng(1)
        data = DataSet(rng.normal(size=(6, 2)))
        X = np.tile(data.points.mean(axis=0), (3, 1))
        np.testing.assert_allclose(grad_g(data, X, 0.7, 0.3), 0.0, atol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(2)
        eps = 1e-6
        for _ in range(10):
            data, X, lam, mu = random_instance(rng)
            g = L2Ball(data.dim)
            grad = grad_g(data, X, lam, mu)
            fd = np.zeros_like(X)
            for p in range(X.shape[0]):
                for j in range(X.shape[1]):
                    e = np.zeros_like(X)
                    e[p, j] = eps
                    fd[p, j] = (
                        convex_part(data, X + e, lam, mu, g)
                        - convex_part(data, X - e, lam, mu, g)
                    ) / (2 * eps)
            np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-5)

    def test_affine_increment(self):
        # grad_g(X') - grad_g(X) = (n/mu) dX + lam n L_G dX exactly
        rng = np.random.default_rng(3)
        data, X, lam, mu = random_instance(rng)
        k = X.shape[0]
        dX = rng.normal(size=X.shape)
        lap = k * np.eye(k) - np.ones((k, k))
        expected = (data.n / mu) * dX + lam * data.n * (lap @ dX)
        got = grad_g(data, X + dX, lam, mu) - grad_g(data, X, lam, mu)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


class TestSubgradientOracle:
    def test_single_center_is_smooth_part_only(self):
        rng = np.random.default_rng(4)
        data = DataSet(rng.normal(size=(5, 2)))
        X = rng.normal(size=(1, 2))
        mu = 0.3
        g = L2Ball(2)
        w = (X[None, :, :] - data.points[:, None, :]) / mu
        y1 = np.sum(w - g.polar_project(w), axis=0)
        np.testing.assert_allclose(subgradient_h(data, X, 0.5, mu, g), y1)

    def test_center_on_point_contributes_zero(self):
        data = DataSet(np.array([[1.0, 1.0]]))
        g = L2Ball(2)
        X = np.array([[1.0, 1.0]])
        np.testing.assert_allclose(subgradient_h(data, X, 0.2, 0.1, g), 0.0, atol=1e-12)

    @pytest.mark.parametrize("smooth_h2", [True, False])
    def test_subgradient_inequality(self, smooth_h2):
        # h(X') >= h(X) + <Y, X' - X> for the concave part's subgradient
        rng = np.random.default_rng(5)
        for _ in range(25):
            data, X, lam, mu = random_instance(rng)
            g = (L1Ball, L2Ball, LinfBall)[int(rng.integers(3))](data.dim)
            Y = subgradient_h(data, X, lam, mu, g, smooth_h2=smooth_h2)
            hX = concave_part(data, X, lam, mu, g, smooth_h2=smooth_h2)
            for _ in range(4):
                Xp = X + rng.normal(size=X.shape)
                hXp = concave_part(data, Xp, lam, mu, g, smooth_h2=smooth_h2)
                gap = hXp - hX - np.sum(Y * (Xp - X))
                assert gap >= -1e-9 * (1 + abs(hX) + abs(hXp))


class TestClosedFormUpdate:
    def test_matches_dense_solve(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            data, X, lam, mu = random_instance(rng)
            k = X.shape[0]
            Y = rng.normal(size=(k, data.dim))
            got = dca_update(data, Y, lam, mu, k)
            ref = dense_dca_solve(data, Y, lam, mu, k)
            assert np.linalg.norm(got - ref) <= 1e-10 * (1 + np.linalg.norm(ref))

    def test_gradient_residual(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            data, X, lam, mu = random_instance(rng)
            k = X.shape[0]
            Y = rng.normal(size=(k, data.dim))
            X_new = dca_update(data, Y, lam, mu, k)
            residual = np.linalg.norm(grad_g(data, X_new, lam, mu) - Y)
            assert residual <= 1e-10 * (1 + np.linalg.norm(Y))

    def test_single_center_formula(self):
        rng = np.random.default_rng(8)
        data = DataSet(rng.normal(size=(6, 3)))
        Y = rng.normal(size=(1, 3))
        mu = 0.4
        expected = (mu / data.n) * Y + data.points.mean(axis=0)
        np.testing.assert_allclose(dca_update(data, Y, 0.9, mu, 1), expected)

    def test_identical_rows_stay_identical(self):
        rng = np.random.default_rng(9)
        data = DataSet(rng.normal(size=(4, 2)))
        Y = np.tile(rng.normal(size=(1, 2)), (3, 1))
        out = dca_update(data, Y, 0.3, 0.2, 3)
        assert np.ptp(out, axis=0) == pytest.approx(0.0, abs=1e-14)


class TestDcaSolve:
    def test_descent_and_monotone(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            data, X0, lam, mu = random_instance(rng, n_max=20)
            g = L2Ball(data.dim)
            X, trace = dca_solve(data, X0, lam, mu, g, SolverConfig(max_iter=200))
            f = np.array(trace.f_mu)
            assert np.all(np.diff(f) <= 1e-9 * (1 + np.abs(f[:-1])))
            for t, step in enumerate(trace.step_norm):
                prev = trace.f_init if t == 0 else trace.f_mu[t - 1]
                slack = prev - trace.f_mu[t] - (data.n / (2 * mu)) * step**2
                assert slack >= -1e-9 * (1 + abs(prev))

    def test_fixed_point_returns_quickly(self):
        rng = np.random.default_rng(11)
        data = DataSet(rng.normal(size=(8, 2)))
        g = L2Ball(2)
        X0 = rng.normal(size=(2, 2))
        X, _ = dca_solve(data, X0, 0.3, 0.2, g, SolverConfig(max_iter=2000))
        X2, trace = dca_solve(data, X, 0.3, 0.2, g)
        assert trace.converged and len(trace) == 1
        np.testing.assert_allclose(X2, X, atol=1e-5)

    def test_critical_point_residual(self):
        rng = np.random.default_rng(12)
        data = DataSet(rng.normal(size=(10, 2)))
        g = L2Ball(2)
        X, trace = dca_solve(
            data, rng.normal(size=(3, 2)), 0.3, 0.2, g, SolverConfig(tol=1e-10, max_iter=5000)
        )
        assert trace.converged
        Y = subgradient_h(data, X, 0.3, 0.2, g)
        res = np.linalg.norm(grad_g(data, X, 0.3, 0.2) - Y)
        assert res <= 1e-8 * (1 + np.linalg.norm(Y))

    def test_step_sum_finite(self):
        rng = np.random.default_rng(13)
        data, X0, lam, mu = random_instance(rng)
        g = L1Ball(data.dim)
        _, trace = dca_solve(data, X0, lam, mu, g)
        assert np.isfinite(np.sum(np.square(trace.step_norm)))

    def test_trace_serialization(self):
        rng = np.random.default_rng(14)
        data, X0, lam, mu = random_instance(rng)
        g = L2Ball(data.dim)
        _, trace = dca_solve(data, X0, lam, mu, g, SolverConfig(max_iter=5))
        records = json.loads(trace.to_json())
        assert [r["iter"] for r in records] == list(range(len(trace)))
        assert set(records[0]) == {"iter", "f_mu", "step_norm", "descent_slack", "gamma_ls"}


class TestBoostedSolvers:
    def test_bdca_armijo_and_monotone(self):
        rng = np.random.default_rng(15)
        cfg = SolverConfig(max_iter=200)
        for _ in range(5):
            data, X0, lam, mu = random_instance(rng, n_max=20)
            g = L2Ball(data.dim)
            _, trace = bdca_solve(data, X0, lam, mu, g, cfg)
            f = np.array(trace.f_mu)
            assert np.all(np.diff(f) <= 1e-9 * (1 + np.abs(f[:-1])))
            assert all(s >= -1e-9 * (1 + abs(v)) for s, v in zip(trace.descent_slack, f))

    def test_bdca_at_least_dca_decrease(self):
        # from the same iterate, the accepted line-search point cannot be
        # worse than the plain DC point it searches through
        rng = np.random.default_rng(16)
        for _ in range(10):
            data, X0, lam, mu = random_instance(rng)
            g = L2Ball(data.dim)
            cfg = SolverConfig(max_iter=1)
            Xd, _ = dca_solve(data, X0, lam, mu, g, cfg)
            Xb, trace = bdca_solve(data, X0, lam, mu, g, cfg)
            if len(trace):
                fd = smoothed_objective(data, Xd, lam, mu, g)
                assert trace.f_mu[-1] <= fd + 1e-9 * (1 + abs(fd))

    def test_midca_depth_zero_equals_bdca(self):
        rng = np.random.default_rng(17)
        data, X0, lam, mu = random_instance(rng)
        g = L2Ball(data.dim)
        cfg = SolverConfig(max_iter=30, inertial_coeffs=())
        Xm, tm = midca_solve(data, X0, lam, mu, g, cfg)
        Xb, tb = bdca_solve(data, X0, lam, mu, g, cfg)
        np.testing.assert_array_equal(Xm, Xb)
        np.testing.assert_array_equal(tm.f_mu, tb.f_mu)

    def test_midca_competitive_with_dca(self):
        # both solvers find critical points of a nonconvex problem, so the
        # momentum variant can land on a different (occasionally worse) one;
        # competitiveness is asserted in aggregate over paired runs
        rng = np.random.default_rng(18)
        diffs = []
        for _ in range(20):
            data, X0, lam, mu = random_instance(rng)
            g = L2Ball(data.dim)
            cfg = SolverConfig(max_iter=2000, tol=1e-8)
            Xd, _ = dca_solve(data, X0, lam, mu, g, cfg)
            Xm, _ = midca_solve(data, X0, lam, mu, g, cfg)
            fd = smoothed_objective(data, Xd, lam, mu, g)
            fm = smoothed_objective(data, Xm, lam, mu, g)
            diffs.append(fm - fd)
        diffs = np.array(diffs)
        assert np.median(diffs) <= 1e-6
        assert np.mean(diffs <= 1e-6) >= 0.5

    def test_midca_monotone(self):
        rng = np.random.default_rng(19)
        data, X0, lam, mu = random_instance(rng, n_max=15)
        g = LinfBall(data.dim)
        _, trace = midca_solve(data, X0, lam, mu, g, SolverConfig(max_iter=150))
        f = np.array(trace.f_mu)
        assert np.all(np.diff(f) <= 1e-9 * (1 + np.abs(f[:-1])))

    def test_gamma_recorded(self):
        rng = np.random.default_rng(20)
        data, X0, lam, mu = random_instance(rng)
        g = L2Ball(data.dim)
        _, trace = bdca_solve(data, X0, lam, mu, g, SolverConfig(max_iter=20))
        assert all(gm is not None and 0 < gm <= 1.0 for gm in trace.gamma_ls)


class TestFailureModes:
    def test_nonfinite_data_rejected_upfront(self):
        with pytest.raises(ValueError):
            DataSet(np.array([[np.inf]]))

    def test_nonfinite_start_rejected(self):
        data = DataSet(np.zeros((2, 1)))
        with pytest.raises(ValueError):
            dca_solve(data, np.array([[np.nan]]), 0.1, 0.1, L1Ball(1))
