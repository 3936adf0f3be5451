"""Confusion metrics, the cross-validation driver, and the rate harness."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .aggregation import aggregate_predictions, quadratic_proxy
from .data import benchmark_folds, gen_synthetic, kfold_split, target_values
from .graph import exp_weights, laplacian
from .kernels import gram
from .modelsel import RateRuleConfig, parameter_rule
from .solver import (
    NumericalError,
    RegularizationConfig,
    _pseudo_solve_sym,
    fit_full_manifold,
    fit_nystrom,
    select_landmarks,
)


def decide(scores):
    """Sign decision rule: +1 where f(x) >= 0, else -1."""
    return np.where(np.asarray(scores, dtype=float) >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self):
        return self.tp + self.fn + self.fp + self.tn


def confusion(predictions, labels):
    """Count the four cells with +1 as the positive class."""
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(labels, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError("predictions and labels must have equal length")
    for name, arr in (("predictions", p), ("labels", t)):
        if not np.all(np.isin(arr, (-1.0, 1.0))):
            raise ValueError(f"{name} must take values in {{-1, +1}}")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        fn=int(np.sum((p == -1) & (t == 1))),
        fp=int(np.sum((p == 1) & (t == -1))),
        tn=int(np.sum((p == -1) & (t == -1))),
    )


@dataclass(frozen=True)
class Metrics:
    """Exact rational metrics; a metric with zero denominator is None."""

    accuracy: Fraction
    precision: Fraction | None
    sensitivity: Fraction | None
    specificity: Fraction | None
    f_measure: Fraction | None

    def as_floats(self):
        return {
            name: (float(v) if v is not None else None)
            for name, v in vars(self).items()
        }


def metrics(cm):
    """accuracy, precision, sensitivity (TPR), specificity (TNR), F-measure."""
    if cm.total == 0:
        raise ValueError("cannot compute metrics of an empty confusion matrix")

    def frac(num, den):
        return Fraction(num, den) if den > 0 else None

    return Metrics(
        accuracy=Fraction(cm.tp + cm.tn, cm.total),
        precision=frac(cm.tp, cm.tp + cm.fp),
        sensitivity=frac(cm.tp, cm.tp + cm.fn),
        specificity=frac(cm.tn, cm.fp + cm.tn),
        f_measure=frac(2 * cm.tp, 2 * cm.tp + cm.fn + cm.fp),
    )


# ---------------------------------------------------------------------------
# Cross-validation driver


@dataclass
class CVRow:
    protocol: str
    estimator: str
    fold: int
    subsample: int | None
    mean_accuracy: float
    std_accuracy: float
    proxy_ok: bool | None = None


def _accuracy(pred, y):
    if y.shape[1] == 1:
        return float(np.mean(decide(pred[:, 0]) == y[:, 0]))
    return float(np.mean(np.argmax(pred, axis=1) == np.argmax(y, axis=1)))


def run_cv(dataset, kernel, lambda0, lambda1, graph_b, folds=10,
           sizes=(10, 50, 250), redraws=50, seed=0,
           protocol="paper_sequential", include_full=True,
           laplacian_scaling="times_m", knn=None):
    """Per-fold accuracy of the full, subsampled, and aggregated estimators.

    protocol: 'paper_sequential' trains on each leading block and tests on
    the last one; 'kfold_sequential' / 'kfold_shuffled' run standard k-fold.
    Each landmark redraw refits every subsample size and aggregates that
    redraw's models; rows report mean/std accuracy over redraws.
    """
    X = np.asarray(dataset.X, dtype=float)
    Y = dataset.Y
    n_labeled = dataset.m
    if protocol == "paper_sequential":
        cells = benchmark_folds(n_labeled, folds)
    elif protocol == "kfold_sequential":
        cells = kfold_split(n_labeled, folds)
    elif protocol == "kfold_shuffled":
        cells = kfold_split(n_labeled, folds, scheme="shuffled", seed=seed)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    if getattr(kernel, "kind", None) == "precomputed" and lambda1 > 0:
        raise ValueError("graph penalties need coordinate features, not a precomputed kernel")

    rng = np.random.default_rng(seed)
    rows = []
    for fold_id, (train, test) in enumerate(cells):
        X_tr, y_tr = X[train], Y[train]
        y_te = Y[test]
        m = len(train)
        K_tr = gram(kernel, X, rows=train).values
        K_te = gram(kernel, X, rows=test, cols=train).values
        L = None
        LK = None
        if lambda1 > 0:
            L = laplacian(exp_weights(X_tr, graph_b, knn=knn)).L
            LK = L @ K_tr

        if include_full:
            c_single = fit_full_manifold(K_tr, y_tr, m, lambda0, 0.0)
            rows.append(CVRow(protocol, "full_single", fold_id, None,
                              _accuracy(K_te @ c_single, y_te), 0.0))
            c_multi = fit_full_manifold(K_tr, y_tr, m, lambda0, lambda1, L,
                                        laplacian_scaling)
            rows.append(CVRow(protocol, "full_multi", fold_id, None,
                              _accuracy(K_te @ c_multi, y_te), 0.0))

        mu = float(m) if laplacian_scaling == "times_m" else 1.0
        acc = {s: [] for s in sizes}
        acc_agg = []
        proxy_ok = True
        for _ in range(redraws):
            member_train, member_test = [], []
            for s in sizes:
                lm = select_landmarks(m, min(s, m), seed=int(rng.integers(2**32)))
                K_ns = K_tr[:, lm]
                A = K_ns.T @ K_ns + (lambda0 * m) * K_ns[lm]
                if lambda1 > 0:
                    A += (lambda1 * mu) * (K_ns.T @ LK[:, lm])
                coef = _pseudo_solve_sym(A, K_ns.T @ y_tr, "CV Nystrom fit")
                train_pred = K_ns @ coef
                test_pred = K_te[:, lm] @ coef
                acc[s].append(_accuracy(test_pred, y_te))
                member_train.append(train_pred)
                member_test.append(test_pred)
            cbar, Hbar, hbar = aggregate_predictions(member_train, y_tr)
            agg_test = sum(w * p for w, p in zip(cbar, member_test))
            acc_agg.append(_accuracy(agg_test, y_te))
            q_agg = quadratic_proxy(Hbar, hbar, cbar)
            q_best = min(quadratic_proxy(Hbar, hbar, e) for e in np.eye(len(sizes)))
            proxy_ok = proxy_ok and q_agg <= q_best + 1e-10

        for s in sizes:
            vals = np.array(acc[s])
            rows.append(CVRow(protocol, f"nystrom_s{s}", fold_id, s,
                              float(vals.mean()), float(vals.std())))
        vals = np.array(acc_agg)
        rows.append(CVRow(protocol, "aggregated", fold_id, None,
                          float(vals.mean()), float(vals.std()), proxy_ok))
    return rows


def write_cv_long(rows, path):
    """Machine-readable long format, 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["protocol", "estimator", "fold", "subsample",
                         "mean_accuracy", "std_accuracy", "proxy_ok"])
        for r in rows:
            writer.writerow([
                r.protocol, r.estimator, r.fold,
                "" if r.subsample is None else r.subsample,
                f"{r.mean_accuracy:.17g}", f"{r.std_accuracy:.17g}",
                "" if r.proxy_ok is None else int(r.proxy_ok),
            ])


def write_cv_summary(rows, path):
    """Human table: estimator x fold cells holding 'mean (std)' percents."""
    estimators = []
    folds = []
    for r in rows:
        if r.estimator not in estimators:
            estimators.append(r.estimator)
        if r.fold not in folds:
            folds.append(r.fold)
    cells = {(r.estimator, r.fold): r for r in rows}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator"] + [f"fold{f + 1}" for f in folds])
        for est in estimators:
            line = [est]
            for f in folds:
                r = cells.get((est, f))
                line.append("" if r is None else
                            f"{100 * r.mean_accuracy:.4g} ({100 * r.std_accuracy:.4g})")
            writer.writerow(line)


# ---------------------------------------------------------------------------
# Empirical convergence-rate harness


@dataclass
class RateReport:
    sample_sizes: tuple
    errors: np.ndarray
    slope: float
    theoretical_exponent: float
    per_trial_slopes: np.ndarray


def theoretical_exponent(r, b=None):
    """Predicted log-log slope of the prediction-norm error."""
    if b is None:
        return -(2.0 * r + 1.0) / (4.0 * r + 4.0)
    return -(2.0 * b * r + b) / (4.0 * b * r + 2.0 * b + 2.0)


def default_subsample(m):
    """Landmark budget for the harness: ceil(2 sqrt(m) log m), capped at m."""
    return min(int(math.ceil(2.0 * math.sqrt(m) * math.log(m))), m)


def rate_experiment(target, cfg, sizes, trials, seed, graph_b=0.25,
                    test_points=2000):
    """Measure how the prediction error decays with the labeled count.

    For each size m the penalties come from parameter_rule, the landmark
    count from default_subsample, and the error is the root mean square
    deviation from the noiseless target on fresh uniform test points.
    The fitted slope is the per-trial least-squares slope of log error
    against log m, averaged over trials.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 3 or any(s < 50 for s in sizes):
        raise ValueError("need at least 3 sample sizes of at least 50 points")
    if sorted(sizes) != list(sizes):
        raise ValueError("sample sizes must be increasing")
    errors = np.zeros((trials, len(sizes)))
    root = np.random.SeedSequence(seed)
    for t, trial_seq in enumerate(root.spawn(trials)):
        seeds = [s.generate_state(1)[0] for s in trial_seq.spawn(3 * len(sizes))]
        for i, m in enumerate(sizes):
            lambda0, lambda1 = parameter_rule(RateRuleConfig(r=cfg.r, b=cfg.b, m=m))
            ds, _ = gen_synthetic(target, m, m, seed=seeds[3 * i])
            lm = select_landmarks(m, default_subsample(m), seed=int(seeds[3 * i + 1]))
            # 1/m^2 keeps the graph operator bounded as m grows, so the
            # rule-driven lambda1 stays a perturbation of the ridge term
            L = laplacian(exp_weights(ds.X, graph_b) / m**2)
            config = RegularizationConfig(lambda0, ((lambda1, L),))
            model = fit_nystrom(ds.X, ds.Y, target.kernel, lm, config)
            X_test = np.random.default_rng(seeds[3 * i + 2]).random(
                (test_points, ds.X.shape[1]))
            resid = model.predict(X_test)[:, 0] - target_values(target, X_test)
            err = float(np.sqrt(np.mean(resid ** 2)))
            if not err > 0.0:
                raise NumericalError(f"degenerate zero-error fit at m={m}")
            errors[t, i] = err
    logs = np.log(np.asarray(sizes, dtype=float))
    per_trial = np.array([np.polyfit(logs, np.log(errors[t]), 1)[0]
                          for t in range(trials)])
    return RateReport(sizes, errors.mean(axis=0), float(per_trial.mean()),
                      theoretical_exponent(cfg.r, cfg.b), per_trial)


def write_rate_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_size", "mean_error"])
        for m, err in zip(report.sample_sizes, report.errors):
            writer.writerow([m, f"{err:.17g}"])
        writer.writerow(["fitted_slope", f"{report.slope:.17g}"])
        writer.writerow(["theoretical_exponent", f"{report.theoretical_exponent:.17g}"])
