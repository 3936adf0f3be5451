"""Scalar kernels, Gram-block assembly, and the multi-view block kernel.

All Gram routines return dense float64 matrices.  For ``precomputed``
kernels the "points" are integer row/column ids into the stored matrix,
so the same code paths work for kernels supplied as CSV files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.spatial.distance

CHI2_EPS = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """A scalar kernel: gaussian / chi_squared / linear / precomputed."""

    kind: str
    gamma: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)
    source: str | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "chi_squared", "linear", "precomputed"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("gaussian", "chi_squared"):
            if self.gamma is None or not self.gamma > 0:
                raise ValueError(f"{self.kind} kernel needs gamma > 0")
        if self.kind == "precomputed":
            mat = self.matrix
            if mat is None:
                raise ValueError("precomputed kernel needs a matrix")
            if not np.all(np.isfinite(mat)):
                raise ValueError("precomputed kernel matrix has non-finite entries")
            if mat.shape[0] == mat.shape[1]:
                scale = max(np.abs(mat).max(), 1.0)
                if np.abs(mat - mat.T).max() > 1e-12 * scale:
                    raise ValueError("square precomputed kernel matrix must be symmetric")


def gaussian(gamma):
    return KernelSpec("gaussian", gamma=float(gamma))


def chi_squared(gamma):
    return KernelSpec("chi_squared", gamma=float(gamma))


def linear():
    return KernelSpec("linear")


def precomputed(matrix, source=None):
    return KernelSpec("precomputed", matrix=np.asarray(matrix, dtype=float), source=source)


def load_precomputed(path):
    """Load a header-free CSV kernel matrix (n rows x n' cols, dataset order)."""
    mat = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    return precomputed(mat, source=str(path))


def parse_kernel(text):
    """Parse a ``kind[:param]`` kernel description, e.g. ``gaussian:0.04``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "gaussian":
        return gaussian(float(arg))
    if name in ("chi2", "chi_squared"):
        return chi_squared(float(arg))
    if name == "linear":
        return linear()
    if name == "precomputed":
        if not arg:
            raise ValueError("precomputed kernel needs a file path: precomputed:PATH")
        return load_precomputed(arg)
    raise ValueError(f"unknown kernel {text!r}")


def kernel_label(spec):
    """Round-trippable text form of a kernel spec (inverse of parse_kernel)."""
    if spec.kind == "gaussian":
        return f"gaussian:{spec.gamma:.17g}"
    if spec.kind == "chi_squared":
        return f"chi_squared:{spec.gamma:.17g}"
    if spec.kind == "linear":
        return "linear"
    if spec.source is None:
        raise ValueError("precomputed kernel without a source path cannot be labeled")
    return f"precomputed:{spec.source}"


def _check_point(x):
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("kernel input has non-finite entries")
    return x


def eval_kernel(spec, x, t):
    """Evaluate K(x, t) for a single pair of points."""
    x = _check_point(x)
    t = _check_point(t)
    if spec.kind == "precomputed":
        return float(spec.matrix[int(x[0]), int(t[0])])
    if x.shape != t.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {t.shape}")
    if spec.kind == "gaussian":
        d2 = float(np.sum((x - t) ** 2))
        return float(np.exp(-spec.gamma * d2))
    if spec.kind == "chi_squared":
        d = float(np.sum((x - t) ** 2 / (x + t + CHI2_EPS)))
        return float(np.exp(-spec.gamma * d))
    return float(np.dot(x, t))


def sq_distances(A, B):
    """Pairwise squared Euclidean distances by direct differencing.

    Exact zeros for identical points (the Gram-expansion shortcut is not).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return scipy.spatial.distance.cdist(A, B, "sqeuclidean")


def pairwise(spec, A, B):
    """Kernel matrix between the rows of A and the rows of B.

    For precomputed kernels A and B are integer index vectors (or n x 1
    arrays of ids).
    """
    if spec.kind == "precomputed":
        ai = np.asarray(A).reshape(len(A), -1)[:, 0].astype(int)
        bi = np.asarray(B).reshape(len(B), -1)[:, 0].astype(int)
        return spec.matrix[np.ix_(ai, bi)]
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("kernel input has non-finite entries")
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "gaussian":
        return np.exp(-spec.gamma * sq_distances(A, B))
    # chi-squared: sum_i (a_i-b_i)^2 / (a_i+b_i+eps)
    n, p = A.shape
    out = np.empty((n, B.shape[0]))
    for i in range(n):
        diff = A[i][None, :] - B
        summ = A[i][None, :] + B + CHI2_EPS
        out[i] = np.exp(-spec.gamma * (diff * diff / summ).sum(1))
    return out


@dataclass
class GramMatrix:
    """Dense kernel block together with the point indices it was built from."""

    values: np.ndarray
    row_points: np.ndarray
    col_points: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.row_points = np.asarray(self.row_points, dtype=int)
        self.col_points = np.asarray(self.col_points, dtype=int)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Gram matrix has non-finite entries")
        if self.is_square_same_points():
            scale = max(np.abs(self.values).max(), 1.0)
            if np.abs(self.values - self.values.T).max() > 1e-12 * scale:
                raise ValueError("Gram over identical row/col points must be symmetric")

    def is_square_same_points(self):
        return self.row_points.shape == self.col_points.shape and np.array_equal(
            self.row_points, self.col_points
        )


def _resolve_rows(X, rows):
    n = len(X)
    if rows is None:
        return np.arange(n)
    idx = np.asarray(rows, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"index out of range for {n} points")
    return idx


def point_ids(X):
    """Matrix row ids of an index-column point set (precomputed kernels)."""
    return np.asarray(X).reshape(len(X), -1)[:, 0].astype(int)


def gram(spec, X, rows=None, cols=None):
    """Assemble the Gram block K[rows, cols] over the points X.

    rows/cols index into X; rows defaults to all points and cols to rows.
    X is an (n, d) array; for precomputed kernels it is a column of
    matrix row ids.
    """
    ri = _resolve_rows(X, rows)
    ci = ri if cols is None else _resolve_rows(X, cols)
    if spec.kind == "precomputed":
        ids = point_ids(X)
        values = spec.matrix[np.ix_(ids[ri], ids[ci])]
    else:
        X = np.asarray(X, dtype=float)
        values = pairwise(spec, X[ri], X[ci])
    if np.array_equal(ri, ci):
        values = 0.5 * (values + values.T)
    return GramMatrix(values, ri, ci)


@dataclass(frozen=True)
class MultiViewKernel:
    """One scalar kernel per view plus the column range of each view.

    view_slices are (start, stop) pairs into the input vector; they must
    be disjoint and cover increasing column ranges.
    """

    specs: tuple
    view_slices: tuple

    def __post_init__(self):
        if len(self.specs) < 1 or len(self.specs) != len(self.view_slices):
            raise ValueError("need one view slice per kernel spec")
        stops = [s[1] for s in self.view_slices]
        starts = [s[0] for s in self.view_slices]
        for (a, b) in self.view_slices:
            if not 0 <= a < b:
                raise ValueError(f"bad view slice ({a}, {b})")
        for prev_stop, start in zip(stops, starts[1:]):
            if start < prev_stop:
                raise ValueError("view slices must be disjoint and increasing")
        kinds = {spec.kind == "precomputed" for spec in self.specs}
        if len(kinds) > 1:
            raise ValueError("cannot mix precomputed and parametric views")

    @property
    def n_views(self):
        return len(self.specs)


def multiview_pairwise(mvk, A, B):
    """Block kernel between two point sets: block (p, q) is the v x v
    diagonal matrix of per-view kernel values between points A_p and B_q.

    Layout is point-major: row index (p*v + i) addresses view i of point p.
    For precomputed per-view kernels A and B are index vectors.
    """
    v = mvk.n_views
    out = np.zeros((len(A) * v, len(B) * v))
    for i, (spec, (a, b)) in enumerate(zip(mvk.specs, mvk.view_slices)):
        if spec.kind == "precomputed":
            out[i::v, i::v] = pairwise(spec, A, B)
            continue
        Av = np.atleast_2d(np.asarray(A, dtype=float))
        Bv = np.atleast_2d(np.asarray(B, dtype=float))
        if b > Av.shape[1] or b > Bv.shape[1]:
            raise ValueError(f"view slice ({a}, {b}) exceeds input dimension")
        out[i::v, i::v] = pairwise(spec, Av[:, a:b], Bv[:, a:b])
    return out


def multiview_gram(mvk, X, rows=None, cols=None):
    """multiview_pairwise restricted to rows/cols of one dataset."""
    ri = _resolve_rows(X, rows)
    ci = ri if cols is None else _resolve_rows(X, cols)
    if all(spec.kind == "precomputed" for spec in mvk.specs):
        ids = point_ids(X)
        values = multiview_pairwise(mvk, ids[ri], ids[ci])
    else:
        Xv = np.asarray(X, dtype=float)
        values = multiview_pairwise(mvk, Xv[ri], Xv[ci])
    if np.array_equal(ri, ci):
        values = 0.5 * (values + values.T)
    return GramMatrix(values, ri, ci)


def as_matrix(K):
    """Accept a GramMatrix or a plain array and return the dense values."""
    if isinstance(K, GramMatrix):
        return K.values
    return np.asarray(K, dtype=float)
