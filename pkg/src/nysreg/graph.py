"""Weight matrices, graph Laplacians, and multi-view block penalties."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import sq_distances


@dataclass(frozen=True)
class GraphPenalty:
    """A symmetric nonnegative weight matrix with its Laplacian L = D - W.

    kind is one of single_view / multiview_block / between_view.
    """

    W: np.ndarray
    L: np.ndarray
    kind: str = "single_view"

    def __post_init__(self):
        L = self.L
        scale = max(np.abs(L).max(), 1.0)
        if np.abs(L - L.T).max() > 1e-10 * scale:
            raise ValueError("Laplacian must be symmetric")
        if np.abs(L.sum(axis=1)).max() > 1e-10 * scale:
            raise ValueError("Laplacian rows must sum to zero")

    @property
    def size(self):
        return self.L.shape[0]


def exp_weights(X, b, rows=None, knn=None):
    """Exponential weight matrix w_ij = exp(-||x_i - x_j||^2 / (4 b)).

    Optionally truncate each row to its knn largest off-diagonal entries and
    re-symmetrize by elementwise max (the dense formula is the default).
    """
    if not b > 0:
        raise ValueError("weight parameter b must be positive")
    X = np.asarray(X, dtype=float)
    if rows is not None:
        X = X[np.asarray(rows, dtype=int)]
    W = np.exp(-sq_distances(X, X) / (4.0 * b))
    np.fill_diagonal(W, 1.0)
    if knn is not None:
        n = W.shape[0]
        k = min(int(knn), n - 1)
        keep = np.zeros_like(W, dtype=bool)
        off = W - np.eye(n)  # diagonal never competes for the top-k
        top = np.argsort(off, axis=1)[:, n - k:]
        np.put_along_axis(keep, top, True, axis=1)
        W = np.where(keep, W, 0.0)
        W = np.maximum(W, W.T)
        np.fill_diagonal(W, 1.0)
    return W


def laplacian(W, kind="single_view"):
    """Unnormalized Laplacian L = D - W with D_ii = sum_j w_ij."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    scale = max(np.abs(W).max(), 1.0)
    if np.abs(W - W.T).max() > 1e-10 * scale:
        raise ValueError("weight matrix must be symmetric")
    if W.min() < 0:
        raise ValueError("weight matrix must be nonnegative")
    L = np.diag(W.sum(axis=1)) - W
    L = 0.5 * (L + L.T)
    return GraphPenalty(W=W, L=L, kind=kind)


def between_view_operator(v):
    """The v x v agreement penalty M_v = v I - 1 1^T (eigenvalues 0, v, ..., v)."""
    v = int(v)
    if v < 1:
        raise ValueError("need at least one view")
    return v * np.eye(v) - np.ones((v, v))


def multiview_block_laplacian(per_view_Ls):
    """Assemble the (n v) x (n v) block Laplacian whose (i, j) block is
    diag(L^1_ij, ..., L^v_ij), point-major layout.
    """
    Ls = [p.L if isinstance(p, GraphPenalty) else np.asarray(p, dtype=float) for p in per_view_Ls]
    Ws = [p.W if isinstance(p, GraphPenalty) else None for p in per_view_Ls]
    if not Ls:
        raise ValueError("need at least one per-view Laplacian")
    n = Ls[0].shape[0]
    for L in Ls:
        if L.shape != (n, n):
            raise ValueError("all per-view Laplacians must share the same size")
    v = len(Ls)
    big_L = np.zeros((n * v, n * v))
    big_W = np.zeros((n * v, n * v))
    for i, L in enumerate(Ls):
        big_L[i::v, i::v] = L
        if Ws[i] is not None:
            big_W[i::v, i::v] = Ws[i]
    return GraphPenalty(W=big_W, L=big_L, kind="multiview_block")


def penalty_matrix(penalty):
    """The quadratic-form matrix of a penalty (GraphPenalty.L or a raw matrix)."""
    if isinstance(penalty, GraphPenalty):
        return penalty.L
    return np.asarray(penalty, dtype=float)
