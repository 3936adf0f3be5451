"""Linear functional strategy: combine several fitted models into one.

The combination weights solve Hbar c = hbar where Hbar averages pairwise
prediction inner products over all n points and hbar averages
label-prediction inner products over the m labeled points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

HBAR_RELATIVE_CUTOFF = 1e-10


def aggregate_predictions(member_predictions, y):
    """Combination weights from stacked member predictions.

    member_predictions: list of (n, P) prediction matrices on the same n
    points, labeled points first.  y: (m, P) labels.  Returns
    (cbar, Hbar, hbar); a singular Hbar falls back to the eigenvalue-
    cutoff pseudoinverse, so duplicated members are fine.
    """
    if not member_predictions:
        raise ValueError("no members to aggregate")
    preds = []
    for p in member_predictions:
        p = np.asarray(p, dtype=float)
        preds.append(p[:, None] if p.ndim == 1 else p)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n = preds[0].shape[0]
    m = y.shape[0]
    ell = len(preds)
    Hbar = np.empty((ell, ell))
    for i in range(ell):
        for j in range(i, ell):
            Hbar[i, j] = Hbar[j, i] = np.sum(preds[i] * preds[j]) / n
    hbar = np.array([np.sum(y * p[:m]) / m for p in preds])

    w, V = scipy.linalg.eigh(Hbar)
    cutoff = HBAR_RELATIVE_CUTOFF * max(np.abs(w).max(), 0.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    cbar = V @ (inv * (V.T @ hbar))
    return cbar, Hbar, hbar


def quadratic_proxy(Hbar, hbar, c):
    """Q(c) = c^T Hbar c - 2 c^T hbar, the empirical aggregation objective."""
    c = np.asarray(c, dtype=float)
    return float(c @ Hbar @ c - 2.0 * c @ hbar)


@dataclass
class AggregatedModel:
    """Fixed linear combination of member models with weights cbar."""

    members: list
    cbar: np.ndarray
    Hbar: np.ndarray
    hbar: np.ndarray

    def predict(self, query):
        out = self.cbar[0] * self.members[0].predict(query)
        for w, member in zip(self.cbar[1:], self.members[1:]):
            out = out + w * member.predict(query)
        return out

    def proxy(self, c=None):
        return quadratic_proxy(self.Hbar, self.hbar, self.cbar if c is None else c)


def aggregate_lfs(members, dataset):
    """Aggregate fitted models over a dataset (X all n points, Y labeled).

    dataset may be any object with X, Y and labeled-count m attributes.
    """
    if not members:
        raise ValueError("no members to aggregate")
    preds = [member.predict(dataset.X) for member in members]
    cbar, Hbar, hbar = aggregate_predictions(preds, dataset.Y)
    return AggregatedModel(list(members), cbar, Hbar, hbar)


def predict_aggregate(agg, query):
    return agg.predict(query)
