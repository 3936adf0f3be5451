"""Multi-view learning with a combination operator.

Each of the v views gets its own predictor component; a weight vector c
on the sphere ||c|| = alpha merges them into one output.  The fit solves
the blockwise system

    ((J (x) c c^T) + m lb (I (x) M_v) + m lw L) G A + m la A = Y_c

(point-major block layout), where J masks the labeled points, M_v is the
between-view agreement penalty and L the block graph Laplacian.  With a
landmark subset the same functional is minimized over the landmark span
through symmetric normal equations and a pseudoinverse.

When several kernel levels are supplied, the per-level estimators are
combined by the linear functional strategy from :mod:`.aggregation`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import aggregate_predictions
from .graph import between_view_operator, penalty_matrix
from .kernels import as_matrix, multiview_gram, multiview_pairwise, point_ids
from .solver import _pseudo_solve_sym, _solve_general


@dataclass(frozen=True)
class CombinationWeights:
    """View weights constrained to the sphere of radius alpha."""

    c: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "c", c)
        if abs(np.linalg.norm(c) - self.alpha) > 1e-10:
            raise ValueError("weights must lie on the sphere ||c|| = alpha")

    @classmethod
    def uniform(cls, v, alpha=1.0):
        return cls(np.full(v, alpha / np.sqrt(v)), alpha)


def assemble_B(G_ns, c, lambda_b, lambda_w, L, m, n):
    """Left factor of the multi-view system applied to the Gram block.

    G_ns is the (n v) x (s v) multi-view Gram; returns
    ((J (x) c c^T) + m lb (I (x) M_v) + m lw L) G_ns without materializing
    the (n v) x (n v) Kronecker factors.
    """
    G = as_matrix(G_ns)
    c = np.asarray(c.c if isinstance(c, CombinationWeights) else c, dtype=float).ravel()
    v = c.size
    if G.shape[0] != n * v:
        raise ValueError(f"Gram block has {G.shape[0]} rows, expected n*v = {n * v}")
    blocks = G.reshape(n, v, G.shape[1])
    out = np.zeros_like(blocks)
    cct = np.outer(c, c)
    out[:m] = np.einsum("uv,nvs->nus", cct, blocks[:m])
    if lambda_b != 0.0:
        Mv = between_view_operator(v)
        out += (m * lambda_b) * np.einsum("uv,nvs->nus", Mv, blocks)
    out = out.reshape(n * v, G.shape[1])
    if lambda_w != 0.0:
        out += (m * lambda_w) * (penalty_matrix(L) @ G)
    return out


def build_y_c(y, n, c):
    """Stacked target matrix: block i is c y_i^T for labeled i, zero after."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    c = np.asarray(c.c if isinstance(c, CombinationWeights) else c, dtype=float).ravel()
    m, P = y.shape
    out = np.zeros((n * c.size, P))
    out[: m * c.size] = np.einsum("v,mp->mvp", c, y).reshape(m * c.size, P)
    return out


@dataclass
class MultiViewModel:
    """Per-level coefficient matrices plus the view-combination weights."""

    coefficients: list
    kernels: list
    weights: CombinationWeights
    landmark_indices: np.ndarray
    landmark_points: np.ndarray
    lambda_a: float
    lambda_b: float
    lambda_w: float
    labeled_count: int
    class_count: int
    level_weights: np.ndarray = None

    def __post_init__(self):
        if self.level_weights is None:
            self.level_weights = np.ones(len(self.coefficients)) / max(len(self.coefficients), 1)

    @property
    def n_views(self):
        return self.weights.c.size

    def view_scores(self, query, level=0):
        """Per-view predictions at the query points, shape (q, v, P)."""
        G_qs = multiview_pairwise(self.kernels[level], query, self.landmark_points)
        F = G_qs @ self.coefficients[level]
        return F.reshape(len(query), self.n_views, self.class_count)

    def combined_scores(self, query, level=None):
        """C f(t) per query point; level=None aggregates levels with cbar."""
        if level is not None:
            return np.einsum("qvp,v->qp", self.view_scores(query, level), self.weights.c)
        out = None
        for w, r in zip(self.level_weights, range(len(self.coefficients))):
            scores = self.combined_scores(query, level=r)
            out = w * scores if out is None else out + w * scores
        return out

    def optimize_weights(self, X_val, y_val, iters=25, restarts=5, seed=0):
        """Re-tune the view weights on held-out data, estimator kept fixed."""
        scores = sum(w * self.view_scores(X_val, r)
                     for r, w in enumerate(self.level_weights))
        self.weights = optimize_combination(scores, y_val, self.weights.alpha,
                                            iters, restarts, seed)
        return self.weights


def fit_multiview(X, y, kernels, weights, lambda_a, lambda_b, lambda_w, L,
                  landmarks=None):
    """Fit one coefficient matrix per kernel level and combine the levels.

    X: all n inputs (labeled first), y: (m, P) labels with the +1 slot
    marking the class and -1 elsewhere.  L is the (n v) x (n v) block
    Laplacian.  landmarks=None uses every point (the square solve);
    otherwise the fit is restricted to the landmark span.
    """
    if not lambda_a > 0:
        raise ValueError("lambda_a must be positive")
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    m, P = y.shape
    n = len(X)
    c = weights.c
    v = c.size
    if landmarks is None:
        landmarks = np.arange(n)
    else:
        landmarks = np.asarray(landmarks, dtype=int)
    full = landmarks.size == n and np.array_equal(landmarks, np.arange(n))
    Y_c = build_y_c(y, n, c)

    coeffs = []
    for mvk in kernels:
        if mvk.n_views != v:
            raise ValueError("weight vector length must match the number of views")
        G_ns = multiview_gram(mvk, X, rows=None, cols=landmarks).values
        if full:
            B = assemble_B(G_ns, weights, lambda_b, lambda_w, L, m, n)
            A = _solve_general(B + (m * lambda_a) * np.eye(n * v), Y_c, "multi-view fit")
        else:
            BG = assemble_B(G_ns, weights, lambda_b, lambda_w, L, m, n)
            G_ss = G_ns.reshape(n, v, -1)[landmarks].reshape(landmarks.size * v, -1)
            sys = G_ns.T @ BG + (m * lambda_a) * G_ss
            A = _pseudo_solve_sym(sys, G_ns.T @ Y_c, "multi-view Nystrom fit")
        coeffs.append(A)

    if all(spec.kind == "precomputed" for spec in kernels[0].specs):
        ids = point_ids(X)
        points = ids[landmarks].reshape(-1, 1).astype(float)
        train_points = ids.reshape(-1, 1).astype(float)
    else:
        points = np.asarray(X, dtype=float)[landmarks]
        train_points = np.asarray(X, dtype=float)
    model = MultiViewModel(coeffs, list(kernels), weights, landmarks, points,
                           lambda_a, lambda_b, lambda_w, m, P)
    if len(coeffs) > 1:
        per_level = [model.combined_scores(train_points, level=r) for r in range(len(coeffs))]
        cbar, _, _ = aggregate_predictions(per_level, y)
        model.level_weights = cbar
    else:
        model.level_weights = np.ones(1)
    return model


def _validation_loss(scores, y, c):
    combined = np.einsum("qvp,v->qp", scores, c)
    return float(np.mean(np.sum((combined - y) ** 2, axis=1)))


def optimize_combination(scores, y, alpha=1.0, iters=25, restarts=5, seed=0):
    """Tune the view weights on the sphere against validation data.

    scores: (q, v, P) per-view predictions of a fixed estimator on the
    validation points, y: (q, P) validation labels.  Runs projected
    coordinate descent (iters sweeps) from the uniform vector plus random
    restarts and returns the best weights seen; the result never loses to
    the uniform start.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if scores.shape[0] == 0:
        raise ValueError("validation set is empty")
    v = scores.shape[1]
    if v == 1:
        return CombinationWeights(np.array([alpha]), alpha)

    rng = np.random.default_rng(seed)
    starts = [CombinationWeights.uniform(v, alpha).c]
    for _ in range(restarts - 1):
        raw = rng.standard_normal(v)
        starts.append(alpha * raw / np.linalg.norm(raw))

    best_c, best_loss = None, np.inf

    def consider(c):
        nonlocal best_c, best_loss
        loss = _validation_loss(scores, y, c)
        if loss < best_loss:
            best_c, best_loss = c.copy(), loss
        return loss

    for start in starts:
        c = start.copy()
        loss = consider(c)
        step = 0.5 * alpha
        for _ in range(iters):
            improved = False
            for i in range(v):
                for sign in (1.0, -1.0):
                    cand = c.copy()
                    cand[i] += sign * step
                    norm = np.linalg.norm(cand)
                    if norm == 0.0:
                        continue
                    cand *= alpha / norm
                    if _validation_loss(scores, y, cand) < loss - 1e-15:
                        c = cand
                        loss = consider(c)
                        improved = True
            if not improved:
                step *= 0.5
    return CombinationWeights(best_c, alpha)


def classify_multiview(model, query):
    """1-based class indices: argmax of the combined scores, first index wins ties."""
    scores = model.combined_scores(query)
    return np.argmax(scores, axis=1) + 1
