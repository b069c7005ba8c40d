"""Synthetic benchmark generators, CSV ingestion, standardization, and ARI.

Generators draw Laplace noise by inverse-CDF transform of uniforms from a
seeded PCG64 stream, one cluster at a time in a fixed order, so output is
bit-reproducible per seed and platform-independent.
"""

import numpy as np

from .model import DataSet

__all__ = [
    "gen_laplace3",
    "gen_laplace4",
    "gen_gauss4",
    "generate",
    "load_csv",
    "save_csv",
    "standardize",
    "ari",
    "GENERATORS",
]

LAPLACE3_CENTERS = np.array([(-3.0, 0.0), (3.0, 0.0), (0.0, np.sqrt(27.0))])
LAPLACE4_CENTERS = np.array([(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0)])
LAPLACE_SCALE = 0.25

# Gaussian geometry: outer triangle plus a cluster at its centroid.  The
# centroid placement is the adversarial part; the remaining constants are
# fixed here for reproducibility.
GAUSS4_OUTER = np.array([(0.0, 0.0), (4.0, 0.0), (2.0, 3.464)])
GAUSS4_SIGMA = 0.7


def _laplace(rng, scale, size):
    """Inverse-CDF Laplace(0, scale) from uniform draws."""
    u = rng.uniform(-0.5, 0.5, size=size)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def _laplace_clusters(centers, per_cluster, scale, seed):
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for c, center in enumerate(centers):
        noise = _laplace(rng, scale, size=(per_cluster, centers.shape[1]))
        points.append(center + noise)
        labels.append(np.full(per_cluster, c))
    return DataSet(np.vstack(points), np.concatenate(labels))


def gen_laplace3(seed=0):
    """Three well-separated Laplace clusters, 150 points each (n=450, d=2)."""
    return _laplace_clusters(LAPLACE3_CENTERS, 150, LAPLACE_SCALE, seed)


def gen_laplace4(seed=0):
    """Four Laplace clusters on a unit-square-like grid, 100 points each."""
    return _laplace_clusters(LAPLACE4_CENTERS, 100, LAPLACE_SCALE, seed)


def gen_gauss4(seed=0):
    """Four Gaussian clusters, the fourth at the centroid of the other three.

    200 samples per cluster with isotropic noise; the centroid placement
    creates overlapping attraction basins on purpose.
    """
    centers = np.vstack([GAUSS4_OUTER, GAUSS4_OUTER.mean(axis=0)])
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for c, center in enumerate(centers):
        points.append(center + GAUSS4_SIGMA * rng.standard_normal((200, 2)))
        labels.append(np.full(200, c))
    return DataSet(np.vstack(points), np.concatenate(labels))


GENERATORS = {
    "laplace3": gen_laplace3,
    "laplace4": gen_laplace4,
    "gauss4": gen_gauss4,
}


def generate(name, seed=0):
    """Dispatch a named generator."""
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(
            f"unknown generator {name!r}; choose from {sorted(GENERATORS)}"
        ) from None
    return gen(seed)


def _is_numeric_row(fields):
    try:
        [float(tok) for tok in fields]
    except ValueError:
        return False
    return True


def load_csv(path, has_labels=False):
    """Load a rectangular numeric CSV, optionally with a trailing label column.

    A non-numeric first row is treated as a header.  Malformed rows raise
    with their line number.
    """
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [tok.strip() for tok in line.split(",")]
            if lineno == 1 and not _is_numeric_row(fields):
                continue  # header
            if not _is_numeric_row(fields):
                raise ValueError(f"{path}: non-numeric value on line {lineno}")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ValueError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {width}"
                )
            rows.append([float(tok) for tok in fields])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    mat = np.array(rows)
    if has_labels:
        if mat.shape[1] < 2:
            raise ValueError(f"{path}: label column requested but only one column present")
        return DataSet(mat[:, :-1], mat[:, -1].astype(int))
    return DataSet(mat)


def save_csv(data, path):
    """Write a DataSet as CSV, labels (if any) in the trailing column."""
    mat = data.points
    fmt = ["%.17g"] * mat.shape[1]
    if data.labels is not None:
        mat = np.column_stack([mat, data.labels])
        fmt.append("%d")
    np.savetxt(path, mat, delimiter=",", fmt=fmt)


def standardize(data):
    """Center each column and scale to unit population standard deviation.

    Zero-variance columns are left at zero.  Idempotent up to rounding.
    """
    if data.n < 2:
        raise ValueError("standardization needs at least two rows")
    mean = data.points.mean(axis=0)
    std = data.points.std(axis=0)  # population (1/n) convention
    scaled = np.where(std > 0, (data.points - mean) / np.where(std > 0, std, 1.0), 0.0)
    return DataSet(scaled, data.labels)


def ari(labels_a, labels_b):
    """Adjusted Rand Index by pair counting from the contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be 1-D arrays of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two samples")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) // 2

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(np.int64(n))
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:  # both partitions trivial
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
