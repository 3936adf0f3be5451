"""Dataset ingestion, NSL-KDD preprocessing, fold splitting, synthetic targets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .kernels import pairwise

PROTOCOL_MAP = {"tcp": 0, "udp": 1, "icmp": 2}
NSLKDD_ATTRIBUTES = 41
NSLKDD_CATEGORICAL = (1, 2, 3)  # protocol_type, service, flag


class DataError(ValueError):
    """Input file failed to parse or violates the expected layout."""


@dataclass
class Dataset:
    """Inputs X (labeled rows first), labels Y for the first m rows."""

    X: np.ndarray
    Y: np.ndarray
    m: int
    view_slices: tuple | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim == 1:
            self.Y = self.Y[:, None]
        if not 0 <= self.m <= len(self.X):
            raise DataError(f"labeled count {self.m} out of range for {len(self.X)} rows")
        if self.Y.shape[0] != self.m:
            raise DataError("label rows must match the labeled count")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise DataError("dataset has non-finite entries")

    @property
    def n(self):
        return len(self.X)

    @property
    def d(self):
        return self.X.shape[1]


def index_points(n):
    """Point set for precomputed kernels: a column of matrix row ids."""
    return np.arange(n, dtype=float).reshape(-1, 1)


def _read_rows(path, header=False):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(field.strip() for field in r)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows


def _parse_numeric(rows, path):
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i + 1}, column {j + 1}: "
                                f"not numeric: {cell!r}") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite values")
    return out


def load_csv(path, label_column=-1, labeled_count=None, header=False):
    """Numeric CSV -> Dataset, rows in file order, first labeled_count labeled."""
    values = _parse_numeric(_read_rows(path, header), path)
    n = len(values)
    m = n if labeled_count is None else int(labeled_count)
    if m == 0:
        raise DataError(f"{path}: no labeled data")
    if not 0 < m <= n:
        raise DataError(f"{path}: labeled count {m} out of range for {n} rows")
    col = label_column % values.shape[1]
    Y = values[:m, col:col + 1]
    X = np.delete(values, col, axis=1)
    return Dataset(X, Y, m)


def load_features_csv(path, header=False):
    """Numeric CSV of features only (query/prediction inputs)."""
    return _parse_numeric(_read_rows(path, header), path)


def load_class_labels(path, header=False):
    """Single-column CSV of integer class labels (1-based)."""
    values = _parse_numeric(_read_rows(path, header), path)
    labels = values[:, 0]
    if np.any(labels != np.round(labels)):
        raise DataError(f"{path}: class labels must be integers")
    return labels.astype(int)


def encode_classes(labels, num_classes=None):
    """Class indices (1-based) -> (m, P) matrix with +1 in the class slot, -1 elsewhere."""
    labels = np.asarray(labels, dtype=int)
    P = int(labels.max()) if num_classes is None else int(num_classes)
    if labels.min() < 1 or labels.max() > P:
        raise DataError(f"class labels must lie in 1..{P}")
    Y = -np.ones((len(labels), P))
    Y[np.arange(len(labels)), labels - 1] = 1.0
    return Y


# ---------------------------------------------------------------------------
# NSL-KDD preprocessing


@dataclass
class NslkddMeta:
    """Everything needed to encode further rows the same way."""

    service_map: dict
    flag_map: dict
    dropped_columns: tuple
    col_min: np.ndarray = field(default=None)
    col_max: np.ndarray = field(default=None)


def encode_nslkdd(rows):
    """String records -> numeric matrix + labels (+1 attack / -1 normal).

    Rows carry 41 attributes plus the class column; a trailing difficulty
    column is dropped when present.  Categorical attributes are encoded
    ordinally: the protocol by the fixed tcp/udp/icmp -> 0/1/2 map,
    service and flag by the index of the string in sorted order.
    """
    if not rows:
        raise DataError("no records")
    trimmed = []
    for i, row in enumerate(rows):
        row = [c.strip() for c in row]
        if len(row) == NSLKDD_ATTRIBUTES + 2:
            row = row[:-1]
        if len(row) != NSLKDD_ATTRIBUTES + 1:
            raise DataError(f"row {i + 1}: expected {NSLKDD_ATTRIBUTES} attributes "
                            f"plus class, got {len(row)} fields")
        trimmed.append(row)

    service_map = {s: i for i, s in enumerate(sorted({r[2] for r in trimmed}))}
    flag_map = {s: i for i, s in enumerate(sorted({r[3] for r in trimmed}))}
    X = np.empty((len(trimmed), NSLKDD_ATTRIBUTES))
    y = np.empty(len(trimmed))
    for i, row in enumerate(trimmed):
        proto = row[1]
        if proto not in PROTOCOL_MAP:
            raise DataError(f"row {i + 1}: unknown protocol {proto!r}")
        for j in range(NSLKDD_ATTRIBUTES):
            if j == 1:
                X[i, j] = PROTOCOL_MAP[proto]
            elif j == 2:
                X[i, j] = service_map[row[2]]
            elif j == 3:
                X[i, j] = flag_map[row[3]]
            else:
                try:
                    X[i, j] = float(row[j])
                except ValueError:
                    raise DataError(f"row {i + 1}, column {j + 1}: "
                                    f"not numeric: {row[j]!r}") from None
        y[i] = -1.0 if row[NSLKDD_ATTRIBUTES] == "normal" else 1.0
    return X, y, NslkddMeta(service_map, flag_map, dropped_columns=())


def normalize_minmax(X, stats=None):
    """Min-max scale each column to [0, 1]; constant columns map to 0.

    Pass the stats of a training partition to transform further data with
    the same map (values are clipped into [0, 1]).
    """
    X = np.asarray(X, dtype=float)
    if stats is None:
        stats = (X.min(axis=0), X.max(axis=0))
    lo, hi = stats
    span = np.where(hi > lo, hi - lo, 1.0)
    out = np.clip((X - lo) / span, 0.0, 1.0)
    out[:, hi <= lo] = 0.0
    return out, stats


def preprocess_nslkdd(rows):
    """Full pipeline: encode, drop all-zero attribute columns, scale to [0, 1].

    Returns (Dataset, meta); every row is labeled (+-1).
    """
    X, y, meta = encode_nslkdd(rows)
    zero = np.flatnonzero(~X.any(axis=0))
    X = np.delete(X, zero, axis=1)
    meta.dropped_columns = tuple(int(j) for j in zero)
    X, (lo, hi) = normalize_minmax(X)
    meta.col_min, meta.col_max = lo, hi
    return Dataset(X, y, m=len(X)), meta


def load_nslkdd(path, limit=25000):
    """Read a raw NSL-KDD CSV and preprocess its first `limit` records."""
    rows = _read_rows(path)
    return preprocess_nslkdd(rows[:limit])


def write_encoding_map(meta, path):
    """Audit dump of the categorical encoding as two-column text."""
    with open(path, "w") as fh:
        for name, value in PROTOCOL_MAP.items():
            fh.write(f"protocol_type:{name} {value}\n")
        for name, value in meta.service_map.items():
            fh.write(f"service:{name} {value}\n")
        for name, value in meta.flag_map.items():
            fh.write(f"flag:{name} {value}\n")


# ---------------------------------------------------------------------------
# Fold splitting


def _fold_blocks(n, k, scheme="paper_sequential", seed=None):
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise ValueError(f"cannot split {n} points into {k} folds")
    order = np.arange(n)
    if scheme == "shuffled":
        if seed is None:
            raise ValueError("shuffled folds require a seed")
        order = np.random.default_rng(seed).permutation(n)
    elif scheme != "paper_sequential":
        raise ValueError(f"unknown fold scheme {scheme!r}")
    size = n // k
    blocks = [order[i * size:(i + 1) * size] for i in range(k)]
    blocks[-1] = order[(k - 1) * size:]  # remainder joins the last fold
    return blocks


def kfold_split(n, k, scheme="paper_sequential", seed=None):
    """Standard k-fold splits: fold i is the test set, the rest train."""
    blocks = _fold_blocks(n, k, scheme, seed)
    splits = []
    for i in range(k):
        test = blocks[i]
        train = np.concatenate([blocks[j] for j in range(k) if j != i])
        splits.append((train, test))
    return splits


def benchmark_folds(n, k, scheme="paper_sequential", seed=None):
    """Benchmark protocol: train on each of the first k-1 blocks separately,
    always testing on the last block."""
    blocks = _fold_blocks(n, k, scheme, seed)
    return [(blocks[i], blocks[-1]) for i in range(k - 1)]


# ---------------------------------------------------------------------------
# Synthetic targets for the rate harness


@dataclass
class SyntheticTarget:
    """Planted RKHS function f(x) = sum_i a_i K(x, z_i) plus label noise."""

    anchors: np.ndarray
    amplitudes: np.ndarray
    kernel: object
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        self.amplitudes = np.asarray(self.amplitudes, dtype=float).ravel()
        if len(self.anchors) < 1 or len(self.anchors) != len(self.amplitudes):
            raise ValueError("need one amplitude per anchor point")


def target_values(target, X):
    """Noiseless f(x) at the rows of X."""
    return pairwise(target.kernel, X, target.anchors) @ target.amplitudes


def gen_synthetic(target, m, n, seed):
    """Uniform inputs on [0,1]^d with noisy labels for the first m points.

    Returns (Dataset, truth) where truth holds the noiseless target at
    all n points.
    """
    if m > n:
        raise ValueError("labeled count cannot exceed total count")
    rng = np.random.default_rng(seed)
    d = target.anchors.shape[1]
    X = rng.random((n, d))
    truth = target_values(target, X)
    y = truth[:m] + target.noise_sigma * rng.standard_normal(m)
    return Dataset(X, y[:, None], m), truth
