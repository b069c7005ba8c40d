import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from gaugeclust.data import (
    GENERATORS,
    LAPLACE3_CENTERS,
    LAPLACE4_CENTERS,
    ari,
    gen_gauss4,
    gen_laplace3,
    gen_laplace4,
    generate,
    load_csv,
    save_csv,
    standardize,
)
from gaugeclust.model import DataSet


class TestGenerators:
    def test_laplace3_shape_and_counts(self):
        data = gen_laplace3(seed=0)
        assert data.points.shape == (450, 2)
        np.testing.assert_array_equal(np.bincount(data.labels), [150, 150, 150])

    def test_laplace3_cluster_means(self):
        data = gen_laplace3(seed=0)
        for c, center in enumerate(LAPLACE3_CENTERS):
            mean = data.points[data.labels == c].mean(axis=0)
            assert np.max(np.abs(mean - center)) < 0.1

    def test_laplace4_shape_and_means(self):
        data = gen_laplace4(seed=0)
        assert data.points.shape == (400, 2)
        np.testing.assert_array_equal(np.bincount(data.labels), [100] * 4)
        for c, center in enumerate(LAPLACE4_CENTERS):
            mean = data.points[data.labels == c].mean(axis=0)
            assert np.max(np.abs(mean - center)) < 0.15

    def test_gauss4_centroid_construction(self):
        data = gen_gauss4(seed=0)
        assert data.points.shape == (800, 2)
        np.testing.assert_array_equal(np.bincount(data.labels), [200] * 4)
        means = np.array(
            [data.points[data.labels == c].mean(axis=0) for c in range(4)]
        )
        # the fourth center is the exact centroid of the first three
        np.testing.assert_allclose(means[3], means[:3].mean(axis=0), atol=0.2)

    def test_deterministic_per_seed(self):
        for name in GENERATORS:
            a = generate(name, seed=5)
            b = generate(name, seed=5)
            np.testing.assert_array_equal(a.points, b.points)
            np.testing.assert_array_equal(a.labels, b.labels)

    def test_seeds_differ(self):
        for name in GENERATORS:
            a = generate(name, seed=0)
            b = generate(name, seed=1)
            assert not np.array_equal(a.points, b.points)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            generate("bogus")

    def test_laplace_scale(self):
        # Laplace(0, b) has variance 2 b^2; check the pooled noise variance
        data = gen_laplace3(seed=0)
        noise = np.concatenate(
            [data.points[data.labels == c] - LAPLACE3_CENTERS[c] for c in range(3)]
        )
        assert np.var(noise) == pytest.approx(2 * 0.25**2, rel=0.15)


class TestCsv:
    def test_round_trip_with_labels(self, tmp_path):
        data = gen_laplace4(seed=0)
        path = tmp_path / "d.csv"
        save_csv(data, path)
        back = load_csv(path, has_labels=True)
        np.testing.assert_allclose(back.points, data.points)
        np.testing.assert_array_equal(back.labels, data.labels)

    def test_minimal_unlabeled(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0\n1\n")
        data = load_csv(path)
        assert data.n == 2 and data.dim == 1 and data.labels is None

    def test_header_autodetected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\n1,2\n3,4\n")
        data = load_csv(path)
        np.testing.assert_allclose(data.points, [[1, 2], [3, 4]])

    def test_iris_fixture(self):
        data = load_csv("tests/fixtures/iris.csv", has_labels=True)
        assert data.points.shape == (150, 4)
        assert len(np.unique(data.labels)) == 3

    def test_non_numeric_cell_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(ValueError, match="line 2"):
            load_csv(path)

    def test_ragged_row_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(ValueError, match="line 2"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("\n")
        with pytest.raises(ValueError, match="no data"):
            load_csv(path)


class TestStandardize:
    def test_two_point_column(self):
        out = standardize(DataSet(np.array([0.0, 2.0])))
        np.testing.assert_allclose(out.points[:, 0], [-1.0, 1.0])

    def test_moments(self):
        rng = np.random.default_rng(0)
        out = standardize(DataSet(rng.normal(2.0, 3.0, size=(50, 3))))
        np.testing.assert_allclose(out.points.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.points.std(axis=0), 1.0, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        once = standardize(DataSet(rng.normal(size=(20, 2))))
        twice = standardize(once)
        np.testing.assert_allclose(twice.points, once.points, atol=1e-12)

    def test_constant_column_zeroed(self):
        out = standardize(DataSet(np.array([[1.0, 5.0], [2.0, 5.0]])))
        np.testing.assert_allclose(out.points[:, 1], 0.0)

    def test_labels_preserved(self):
        out = standardize(DataSet(np.array([[0.0], [1.0]]), labels=[1, 0]))
        np.testing.assert_array_equal(out.labels, [1, 0])

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            standardize(DataSet(np.array([[1.0]])))


class TestAri:
    def test_identical(self):
        assert ari([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0

    def test_relabel_invariance(self):
        a = [0, 0, 1, 1, 2]
        b = [5, 5, 9, 9, 7]
        assert ari(a, b) == 1.0

    def test_hand_computed_value(self):
        # contingency table [[1,1],[1,1]]: sum_ij C(n_ij,2)=0, sum_a=sum_b=2,
        # total C(4,2)=6, expected=2*2/6=2/3, max=2 -> (0-2/3)/(2-2/3) = -1/2
        assert ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 3, size=30)
        b = rng.integers(0, 4, size=30)
        assert ari(a, b) == pytest.approx(ari(b, a))

    def test_matches_sklearn(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.integers(0, 4, size=50)
            b = rng.integers(0, 3, size=50)
            assert ari(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)

    def test_trivial_partitions(self):
        assert ari([0, 0, 0], [1, 1, 1]) == 1.0

    def test_rejects_mismatch(self):
        with pytest.raises(ValueError):
            ari([0, 1], [0, 1, 2])
        with pytest.raises(ValueError):
            ari([0], [0])
