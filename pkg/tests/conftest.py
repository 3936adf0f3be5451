"""Shared oracles and instance builders.

The quadratic-minimization oracle reconstructs any quadratic from
function evaluations alone (exact for quadratics, no truncation error),
so solver outputs can be checked against direct minimization without
reusing the solver's own linear algebra.  Objective evaluators below go
through eval_kernel loops on purpose.
"""

import numpy as np
import pytest

from nysreg import graph, kernels, solver


def quadratic_minimize(q, dim):
    """Minimize a quadratic given only as a callable.

    Reconstructs q(c) = 0.5 c^T A c + b^T c + q0 from evaluations at 0,
    +-e_i and e_i + e_j, then solves A c = -b by least squares.
    """
    q0 = q(np.zeros(dim))
    e = np.eye(dim)
    qp = np.array([q(e[i]) for i in range(dim)])
    qm = np.array([q(-e[i]) for i in range(dim)])
    b = (qp - qm) / 2.0
    A = np.empty((dim, dim))
    for i in range(dim):
        A[i, i] = qp[i] + qm[i] - 2.0 * q0
        for j in range(i + 1, dim):
            qij = q(e[i] + e[j])
            A[i, j] = A[j, i] = qij - qp[i] - qp[j] + q0
    c, *_ = np.linalg.lstsq(A, -b, rcond=None)
    return c


def kernel_matrix_loops(spec, A, B):
    """Entrywise Gram assembly through eval_kernel (oracle path)."""
    out = np.empty((len(A), len(B)))
    for i in range(len(A)):
        for j in range(len(B)):
            out[i, j] = kernels.eval_kernel(spec, A[i], B[j])
    return out


def nystrom_objective_loops(X, y, spec, landmarks, c, lambda0, penalties,
                            scaling="times_m"):
    """Objective of the landmark expansion, built from scratch.

    Predictions, RKHS norm and graph terms all come from eval_kernel
    loops; nothing is shared with the solver path.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    m = y.shape[0]
    c = np.asarray(c, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    pts = X[np.asarray(landmarks, dtype=int)]
    K_ns = kernel_matrix_loops(spec, X, pts)
    K_ss = kernel_matrix_loops(spec, pts, pts)
    f_all = K_ns @ c
    value = np.sum((f_all[:m] - y) ** 2) / m
    value += lambda0 * float(np.sum(c * (K_ss @ c)))
    graph_scale = 1.0 if scaling == "times_m" else 1.0 / m
    for lam, M in penalties:
        M = M.L if isinstance(M, graph.GraphPenalty) else M
        value += lam * graph_scale * float(np.sum(f_all * (M @ f_all)))
    return float(value)


def full_objective_loops(X, y_pad, m, spec, c, lambda_a, lambda_i, L,
                         scaling="times_m"):
    """Objective of the full n-point expansion, from eval_kernel loops."""
    n = len(X)
    return nystrom_objective_loops(
        X, y_pad[:m], spec, np.arange(n), c, lambda_a,
        [(lambda_i, L)] if lambda_i else [], scaling)


def random_instance(seed, n=10, d=4, P=2, s=None, m=None, lambda0=None,
                    n_penalties=1, scaling="times_m"):
    """A random explicit-feature problem with matching kernel-side pieces.

    The feature map is the data itself under the linear kernel, so the
    matrix route (fit_nystrom) and the operator route
    (oracle_solve_explicit) describe the same RKHS problem exactly.
    """
    rng = np.random.default_rng(seed)
    m = m if m is not None else max(2, int(0.7 * n))
    s = s if s is not None else max(1, n // 2)
    Phi = rng.standard_normal((n, d))
    y = rng.standard_normal((m, P))
    penalties = []
    for _ in range(n_penalties):
        W = graph.exp_weights(Phi, b=float(rng.uniform(0.2, 2.0)))
        penalties.append((float(rng.uniform(0.05, 0.8)), graph.laplacian(W)))
    lam0 = lambda0 if lambda0 is not None else float(rng.uniform(1e-3, 0.5))
    config = solver.RegularizationConfig(lam0, tuple(penalties), scaling)
    landmarks = solver.select_landmarks(n, s, seed=seed + 1)
    return Phi, y, m, landmarks, config


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
