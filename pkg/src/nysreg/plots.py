"""Figure rendering for the CLI report commands.

Every report command writes a PNG next to its CSV output.  The library
modules stay figure-free; this is the only place matplotlib is touched.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_diagnostics(gammas, effective_dims, trace_bounds, leverages, path):
    """Effective dimension over the gamma grid plus the leverage profile."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.loglog(gammas, effective_dims, "o-", label="effective dimension")
    ax1.loglog(gammas, trace_bounds, "--", color="gray", label="trace bound")
    ax1.set_xlabel(r"$\gamma$")
    ax1.set_ylabel("effective dimension")
    ax1.legend(fontsize=8)
    ax2.plot(np.sort(leverages)[::-1], lw=1)
    ax2.set_xlabel("point (sorted)")
    ax2.set_ylabel("leverage")
    ax2.set_title("leverage profile", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_cv_accuracy(rows, path):
    """Mean accuracy per estimator with std error bars, grouped by fold."""
    estimators = []
    for r in rows:
        if r.estimator not in estimators:
            estimators.append(r.estimator)
    fig, ax = plt.subplots(figsize=(7, 4))
    for est in estimators:
        sub = [r for r in rows if r.estimator == est]
        folds = [r.fold + 1 for r in sub]
        means = [100 * r.mean_accuracy for r in sub]
        stds = [100 * r.std_accuracy for r in sub]
        ax.errorbar(folds, means, yerr=stds, marker="o", capsize=3, label=est)
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_rate(report, path):
    """Log-log error decay with the fitted and theoretical slopes."""
    m = np.asarray(report.sample_sizes, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(m, report.errors, "o-", label="measured error")
    anchor = report.errors[0]
    ax.loglog(m, anchor * (m / m[0]) ** report.slope, "--",
              label=f"fitted slope {report.slope:.3f}")
    ax.loglog(m, anchor * (m / m[0]) ** report.theoretical_exponent, ":",
              label=f"theory slope {report.theoretical_exponent:.3f}")
    ax.set_xlabel("labeled sample size m")
    ax.set_ylabel("prediction-norm error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
