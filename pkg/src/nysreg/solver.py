"""Closed-form fitting of manifold-regularized least squares.

Two routes to the same minimizer:

* matrix route -- ``fit_full_manifold`` (all n expansion points) and
  ``fit_nystrom`` (expansion restricted to s landmark points, solved
  through a symmetrized pseudoinverse);
* operator route -- ``oracle_solve_explicit`` solves the regularized
  normal equation directly in an explicit finite-dimensional feature
  space.  It exists so the matrix route can be cross-checked at test
  scale and is exact for any feature map inducing the same kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .graph import penalty_matrix
from .kernels import as_matrix, gram, pairwise, point_ids

SYMMETRY_TOL = 1e-8
PINV_RELATIVE_CUTOFF = 1e-12


class NumericalError(RuntimeError):
    """Linear solve failed or produced an untrustworthy result."""


@dataclass(frozen=True)
class RegularizationConfig:
    """Penalty weights: ambient lambda0 plus (lambda_j, penalty) graph terms.

    laplacian_scaling picks the convention for the graph terms in the
    normal equations: ``times_m`` inserts the labeled count m next to
    each lambda_j (the default), ``none`` leaves the bare lambda_j.
    """

    lambda0: float
    graph_penalties: tuple = field(default=())
    laplacian_scaling: str = "times_m"

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        for lam, _ in self.graph_penalties:
            if lam < 0:
                raise ValueError("graph penalty weights must be nonnegative")
        if self.laplacian_scaling not in ("times_m", "none"):
            raise ValueError("laplacian_scaling must be 'times_m' or 'none'")

    def graph_scale(self, m):
        return float(m) if self.laplacian_scaling == "times_m" else 1.0


def select_landmarks(n, s, seed=None, mode="uniform"):
    """Choose s landmark indices out of n points.

    ``uniform`` draws without replacement and requires a seed so runs are
    reproducible; ``first_s`` takes the first s points deterministically.
    """
    if not 1 <= s <= n:
        raise ValueError(f"subsample size {s} not in [1, {n}]")
    if mode == "first_s":
        return np.arange(s)
    if mode != "uniform":
        raise ValueError(f"unknown landmark mode {mode!r}")
    if seed is None:
        raise ValueError("uniform landmark selection requires a seed")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=s, replace=False))


def _as_labels(y):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    return y


def _solve_general(A, rhs, what):
    try:
        with np.errstate(all="ignore"):  # bad solves are caught below
            c = scipy.linalg.solve(A, rhs)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        cond = np.linalg.cond(A)
        raise NumericalError(f"{what}: singular system (cond estimate {cond:.3e})") from exc
    residual = np.linalg.norm(A @ c - rhs)
    scale = max(np.linalg.norm(rhs), 1.0)
    if not np.all(np.isfinite(c)) or residual > 1e-6 * scale:
        cond = np.linalg.cond(A)
        raise NumericalError(
            f"{what}: unreliable solve, relative residual {residual / scale:.3e} "
            f"(cond estimate {cond:.3e})"
        )
    return c


def fit_full_manifold(K_n, y_n, m, lambda_a, lambda_i, L=None, laplacian_scaling="times_m"):
    """Coefficients of the full n-point manifold solution.

    Solves (J K + lambda_a m I + lambda_i mu L K) c = y for the n x P
    zero-padded label matrix y (rows past m must be zero), where J masks
    the labeled rows and mu is m or 1 depending on laplacian_scaling.
    The system is genuinely nonsymmetric and solved by dense LU.
    """
    K = as_matrix(K_n)
    n = K.shape[0]
    if K.shape != (n, n):
        raise ValueError("K_n must be square over all n points")
    y = _as_labels(y_n)
    if y.shape[0] != n:
        raise ValueError("y_n must have one (possibly zero) row per point")
    if not 0 < m <= n:
        raise ValueError(f"labeled count {m} not in [1, {n}]")
    if np.any(y[m:] != 0):
        raise ValueError("label rows past the labeled count must be zero")
    if not lambda_a > 0:
        raise ValueError("lambda_a must be positive")

    A = K.copy()
    A[m:, :] = 0.0  # J K
    A[np.diag_indices(n)] += lambda_a * m
    if lambda_i != 0.0 and L is not None:
        mu = float(m) if laplacian_scaling == "times_m" else 1.0
        A += (lambda_i * mu) * (penalty_matrix(L) @ K)
    return _solve_general(A, y, "full manifold fit")


def full_manifold_objective(K_n, y_n, m, coefficients, lambda_a, lambda_i, L=None,
                            laplacian_scaling="times_m"):
    """Value of the n-point regularized functional at the given coefficients."""
    K = as_matrix(K_n)
    c = _as_labels(coefficients)
    y = _as_labels(y_n)
    f = K @ c
    data = np.sum((f[:m] - y[:m]) ** 2) / m
    ambient = lambda_a * float(np.sum(c * (K @ c)))
    intrinsic = 0.0
    if lambda_i != 0.0 and L is not None:
        scale = 1.0 if laplacian_scaling == "times_m" else 1.0 / m
        intrinsic = lambda_i * scale * float(np.sum(f * (penalty_matrix(L) @ f)))
    return data + ambient + intrinsic


def _pseudo_solve_sym(A, rhs, what):
    """Eigendecomposition pseudoinverse with a relative spectrum cutoff."""
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > SYMMETRY_TOL * scale:
        raise NumericalError(f"{what}: system matrix asymmetry exceeds {SYMMETRY_TOL:g}")
    A = 0.5 * (A + A.T)
    try:
        w, V = scipy.linalg.eigh(A)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"{what}: eigendecomposition failed") from exc
    cutoff = PINV_RELATIVE_CUTOFF * max(np.abs(w).max(), 0.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return V @ (inv[:, None] * (V.T @ rhs))


@dataclass
class NystromModel:
    """Kernel expansion over landmark points: f(x) = sum_j K(x, p_j) c_j."""

    landmark_indices: np.ndarray
    landmark_points: np.ndarray
    coefficients: np.ndarray
    kernel: object
    config: RegularizationConfig

    def __post_init__(self):
        self.landmark_indices = np.asarray(self.landmark_indices, dtype=int)
        self.coefficients = _as_labels(self.coefficients)
        if self.landmark_indices.size < 1:
            raise ValueError("model needs at least one landmark")
        if len(np.unique(self.landmark_indices)) != self.landmark_indices.size:
            raise ValueError("landmark indices must be distinct")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("coefficients must be finite")

    @property
    def output_dim(self):
        return self.coefficients.shape[1]

    def predict(self, query):
        """Predictions (one row per query point) of the kernel expansion."""
        K_q = pairwise(self.kernel, query, self.landmark_points)
        return K_q @ self.coefficients


def predict(model, query):
    return model.predict(query)


def fit_nystrom(X, y, kernel, landmarks, config):
    """Fit the multi-penalty scheme restricted to the landmark span.

    X holds all n points (labeled first), y the m labeled outputs.  Graph
    penalty matrices in config must be n x n over the rows of X.  The
    normal-equation matrix is symmetrized and inverted by eigenvalue
    cutoff (relative 1e-12).
    """
    y = _as_labels(y)
    m = y.shape[0]
    n = len(X)
    landmarks = np.asarray(landmarks, dtype=int)
    if landmarks.size == 0:
        raise ValueError("landmark set is empty")
    K_ns = gram(kernel, X, rows=None, cols=landmarks).values
    K_ms = K_ns[:m]
    K_ss = K_ns[landmarks]
    if not np.any(K_ss):
        raise ValueError("degenerate kernel: landmark Gram block is all zero")

    A = K_ms.T @ K_ms + (config.lambda0 * m) * K_ss
    mu = config.graph_scale(m)
    for lam, penalty in config.graph_penalties:
        if lam == 0.0:
            continue
        M = penalty_matrix(penalty)
        if M.shape[0] != n:
            raise ValueError(f"graph penalty is {M.shape[0]} x {M.shape[0]}, expected {n}")
        A += (lam * mu) * (K_ns.T @ (M @ K_ns))
    coeffs = _pseudo_solve_sym(A, K_ms.T @ y, "Nystrom fit")

    if getattr(kernel, "kind", None) == "precomputed":
        points = point_ids(X)[landmarks].reshape(-1, 1).astype(float)
    else:
        points = np.asarray(X, dtype=float)[landmarks]
    return NystromModel(landmarks, points, coeffs, kernel, config)


def nystrom_objective(X, y, model, coefficients=None):
    """Regularized objective of a landmark expansion at given coefficients.

    Evaluates (1/m) sum ||f(x_i) - y_i||^2 + lambda0 ||f||^2 + graph terms
    (graph terms carry 1/m under the 'none' scaling so the minimizer
    matches the fitted normal equations).
    """
    y = _as_labels(y)
    m = y.shape[0]
    c = model.coefficients if coefficients is None else _as_labels(coefficients)
    config = model.config
    K_ns = gram(model.kernel, X, rows=None, cols=model.landmark_indices).values
    K_ss = K_ns[model.landmark_indices]
    f_all = K_ns @ c
    value = np.sum((f_all[:m] - y) ** 2) / m
    value += config.lambda0 * float(np.sum(c * (K_ss @ c)))
    obj_scale = 1.0 if config.laplacian_scaling == "times_m" else 1.0 / m
    for lam, penalty in config.graph_penalties:
        if lam == 0.0:
            continue
        M = penalty_matrix(penalty)
        value += lam * obj_scale * float(np.sum(f_all * (M @ f_all)))
    return float(value)


@dataclass
class ExplicitFeatureProblem:
    """A finite-dimensional realization of the learning problem.

    features is the n x d map of every point into R^d (the induced kernel
    is the plain inner product), labels are the first labeled_count rows'
    outputs.  Intended for test-scale oracle solves (d small).
    """

    features: np.ndarray
    labels: np.ndarray
    labeled_count: int
    config: RegularizationConfig

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = _as_labels(self.labels)
        if self.labels.shape[0] != self.labeled_count:
            raise ValueError("labels must cover exactly the labeled points")


def oracle_solve_explicit(problem, landmarks):
    """Direct operator-equation solve in the explicit feature space.

    Builds the sampling operator over the labeled points (adjoint carries
    the 1/m factor), the orthogonal projection onto the landmark feature
    span, and the graph operators, then solves

        (P S*S P + lambda0 I + sum_j lambda_j P Bj*Bj P) w = P S* y

    column by column.  Returns the d x P weight matrix; predictions are
    features @ w.
    """
    Phi = problem.features
    m = problem.labeled_count
    y = problem.labels
    config = problem.config
    n, d = Phi.shape
    landmarks = np.asarray(landmarks, dtype=int)

    Phi_m = Phi[:m]
    StS = Phi_m.T @ Phi_m / m
    Sty = Phi_m.T @ y / m

    U, sv, _ = np.linalg.svd(Phi[landmarks].T, full_matrices=False)
    rank = int(np.sum(sv > max(sv.max(), 0.0) * 1e-12)) if sv.size else 0
    basis = U[:, :rank]
    P = basis @ basis.T

    A = P @ StS @ P + config.lambda0 * np.eye(d)
    op_scale = 1.0 if config.laplacian_scaling == "times_m" else 1.0 / m
    for lam, penalty in config.graph_penalties:
        if lam == 0.0:
            continue
        M = penalty_matrix(penalty)
        BtB = op_scale * (Phi.T @ (M @ Phi))
        A += lam * (P @ BtB @ P)
    rhs = P @ Sty
    try:
        return scipy.linalg.solve(0.5 * (A + A.T), rhs, assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericalError("explicit oracle solve failed") from exc
