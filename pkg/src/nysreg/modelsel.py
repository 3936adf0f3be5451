"""Spectral diagnostics, theoretical parameter rules, and grid search.

The empirical integral operator is approximated by K/n throughout; all
quantities here are the computable finite-sample versions of their
population counterparts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graph import exp_weights, laplacian
from .kernels import as_matrix, gram, pairwise
from .solver import RegularizationConfig, _pseudo_solve_sym, select_landmarks


def _psd_spectrum(K):
    K = as_matrix(K)
    n = K.shape[0]
    w = scipy.linalg.eigvalsh(0.5 * (K + K.T) / n)
    if w.size and w[0] < -1e-8 * max(w[-1], 0.0):
        raise ValueError("kernel matrix is not PSD within tolerance")
    return np.clip(w, 0.0, None), n


def effective_dimension(K, gamma):
    """Trace of (K/n + gamma I)^{-1} (K/n): the effective dimension at gamma."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    w, _ = _psd_spectrum(K)
    return float(np.sum(w / (w + gamma)))


def point_leverage(K, gamma):
    """Per-point ridge leverage scores; they sum to the effective dimension."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    K = as_matrix(K)
    n = K.shape[0]
    Kn = 0.5 * (K + K.T) / n
    lev = np.diag(scipy.linalg.solve(Kn + gamma * np.eye(n), Kn, assume_a="pos"))
    return np.clip(lev, 0.0, None)


def estimate_n_inf(K, gamma):
    """Largest per-point complexity n * max leverage (empirical N_inf)."""
    K = as_matrix(K)
    return float(K.shape[0] * point_leverage(K, gamma).max())


def nystrom_gap(K_nn, K_ns, K_ss):
    """Squared projection gap of the landmark span: the top eigenvalue of
    the kernel Schur complement (K_nn - K_ns K_ss^+ K_ns^T) / n, clipped at 0.
    """
    K_nn = as_matrix(K_nn)
    K_ns = as_matrix(K_ns)
    K_ss = as_matrix(K_ss)
    n = K_nn.shape[0]
    if K_ns.shape[0] != n or K_ns.shape[1] != K_ss.shape[0] or K_ss.shape[0] != K_ss.shape[1]:
        raise ValueError("inconsistent Gram block shapes")
    solved = _pseudo_solve_sym(K_ss, K_ns.T, "Nystrom gap")
    schur = (K_nn - K_ns @ solved) / n
    schur = 0.5 * (schur + schur.T)
    top = scipy.linalg.eigvalsh(schur, subset_by_index=(n - 1, n - 1))[0]
    return float(max(top, 0.0))


@dataclass(frozen=True)
class RateRuleConfig:
    """Holder smoothness exponent r, optional spectral decay b, sample size m."""

    r: float
    m: int
    b: float | None = None

    def __post_init__(self):
        if not 0 <= self.r <= 1:
            raise ValueError("smoothness exponent r must lie in [0, 1]")
        if self.b is not None and not self.b > 1:
            raise ValueError("decay exponent b must exceed 1")
        if self.m < 2:
            raise ValueError("sample size must be at least 2")


def parameter_rule(cfg):
    """Theory-driven (lambda0, lambda_j) for sample size m.

    Without a decay exponent lambda0 = m^(-1/(2r+2)); with decay b it is
    m^(-b/(2br+b+1)).  Either way lambda_j = lambda0^(3/2 + r) and lambda0
    is capped at 1.
    """
    if cfg.b is None:
        exponent = 1.0 / (2.0 * cfg.r + 2.0)
    else:
        exponent = cfg.b / (2.0 * cfg.b * cfg.r + cfg.b + 1.0)
    lambda0 = min(float(cfg.m) ** (-exponent), 1.0)
    lambda_j = lambda0 ** (1.5 + cfg.r)
    return lambda0, lambda_j


def check_sample_condition(m, kappa_sq, lambda0, eta):
    """True when 8 kappa^2 log(4/eta) / sqrt(m) <= lambda0.

    eta is a confidence level, nominally in (0, 1); any value below 4
    keeps the log factor positive and is accepted.
    """
    if m <= 0 or kappa_sq <= 0 or lambda0 <= 0 or not 0 < eta < 4:
        raise ValueError("all arguments must be positive with 0 < eta < 4")
    return bool(8.0 * kappa_sq / math.sqrt(m) * math.log(4.0 / eta) <= lambda0)


def recommend_subsample_size(lambda0, delta, kappa_sq, n_inf):
    """Smallest landmark count satisfying the subsampling bound,
    max(67, 5 N_inf(lambda0/3)) * log(12 kappa^2 / (lambda0 delta)), at least 1.
    """
    if lambda0 <= 0 or delta <= 0 or kappa_sq <= 0 or n_inf < 0:
        raise ValueError("inputs must be positive")
    log_term = math.log(12.0 * kappa_sq / (lambda0 * delta))
    s = max(67.0 * log_term, 5.0 * n_inf * log_term)
    return max(int(math.ceil(s)), 1)


@dataclass
class DiagnosticsReport:
    effective_dimension: float
    leverages: np.ndarray
    nystrom_gap_sq: float
    kappa_sq: float
    sample_condition_ok: bool


def diagnostics(K_nn, gamma, landmarks=None, m=None, eta=0.05, lambda0=None):
    """Bundle the spectral diagnostics of a kernel matrix at scale gamma.

    landmarks (if given) feed the Nystrom gap; m and lambda0 (default
    gamma) feed the sample-size condition.
    """
    K = as_matrix(K_nn)
    n = K.shape[0]
    eff = effective_dimension(K, gamma)
    lev = point_leverage(K, gamma)
    if abs(lev.sum() - eff) > 1e-8 * max(eff, 1.0):
        raise ValueError("leverage/effective-dimension trace identity violated")
    gap = 0.0
    if landmarks is not None:
        lm = np.asarray(landmarks, dtype=int)
        gap = nystrom_gap(K, K[:, lm], K[np.ix_(lm, lm)])
    kappa_sq = float(np.diag(K).max())
    lam = gamma if lambda0 is None else lambda0
    ok = check_sample_condition(m if m is not None else n, kappa_sq, lam, eta)
    return DiagnosticsReport(eff, lev, gap, kappa_sq, ok)


def grid_search(dataset, kernel, lambda0_grid, lambda1_grid, folds, seed,
                graph_b=1e-3, subsample=None, scheme="shuffled",
                laplacian_scaling="times_m"):
    """Cross-validated search over the (lambda0, lambda1) grid.

    Classification (labels all +-1) scores by misclassification rate,
    anything else by mean squared error.  Ties break toward the smallest
    lambda0, then lambda1, so permuting the grids cannot change the
    winner.  Returns (best, rows) where rows are (lambda0, lambda1, fold,
    metric) tuples.
    """
    from .data import kfold_split  # local import to keep module deps one-way

    lambda0_grid = sorted(float(v) for v in lambda0_grid)
    lambda1_grid = sorted(float(v) for v in lambda1_grid)
    if not lambda0_grid or not lambda1_grid:
        raise ValueError("parameter grids must be nonempty")
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.Y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n = dataset.m  # search uses the labeled points only
    splits = kfold_split(n, folds, scheme=scheme, seed=seed)
    classify = bool(np.all(np.isin(y[:n], (-1.0, 1.0))))
    rng = np.random.default_rng(seed)

    rows = []
    scores = {(l0, l1): [] for l0 in lambda0_grid for l1 in lambda1_grid}
    for fold_id, (train, test) in enumerate(splits):
        X_tr, y_tr = X[train], y[train]
        X_te, y_te = X[test], y[test]
        n_tr = len(train)
        s = n_tr if subsample is None else min(subsample, n_tr)
        lm = select_landmarks(n_tr, s, seed=int(rng.integers(2**32)))
        K_tr = gram(kernel, X_tr).values
        K_ns = K_tr[:, lm]
        K_ss = K_ns[lm]
        K_te = pairwise(kernel, X_te, X_tr[lm])
        E_data = K_ns.T @ K_ns
        L = laplacian(exp_weights(X_tr, graph_b)).L
        E_graph = K_ns.T @ (L @ K_ns)
        mu = n_tr if laplacian_scaling == "times_m" else 1.0
        for l0 in lambda0_grid:
            for l1 in lambda1_grid:
                A = E_data + (l0 * n_tr) * K_ss + (l1 * mu) * E_graph
                coef = _pseudo_solve_sym(A, K_ns.T @ y_tr, "grid-search fit")
                pred = K_te @ coef
                if classify:
                    lab = np.where(pred >= 0.0, 1.0, -1.0)
                    metric = float(np.mean(lab != y_te))
                else:
                    metric = float(np.mean((pred - y_te) ** 2))
                rows.append((l0, l1, fold_id, metric))
                scores[(l0, l1)].append(metric)

    ranked = sorted(scores, key=lambda k: (float(np.mean(scores[k])), k[0], k[1]))
    best_l0, best_l1 = ranked[0]
    best = {
        "lambda0": best_l0,
        "lambda1": best_l1,
        "mean_metric": float(np.mean(scores[(best_l0, best_l1)])),
        "metric": "misclassification" if classify else "mse",
        "config": RegularizationConfig(best_l0, laplacian_scaling=laplacian_scaling),
    }
    return best, rows


def write_cv_table(rows, path):
    """CSV dump of grid-search rows: lambda0, lambda1, fold, metric."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda0", "lambda1", "fold", "metric"])
        for l0, l1, fold, metric in rows:
            writer.writerow([f"{l0:.17g}", f"{l1:.17g}", fold, f"{metric:.17g}"])
