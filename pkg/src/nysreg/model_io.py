"""Plain-text model files.

The format is line oriented and self-describing: kernel spec, penalty
configuration, landmark ids and coordinates, and the coefficient matrix,
all floats printed with 17 significant digits so a round trip reproduces
predictions bit for bit.  Graph penalty matrices are not stored (they are
training-time objects); their weights and kinds are kept for the record.
"""

from __future__ import annotations

import numpy as np

from .aggregation import AggregatedModel
from .kernels import kernel_label, parse_kernel
from .solver import NystromModel, RegularizationConfig

FORMAT_HEADER = "nysreg model v1"


def _fmt(x):
    return f"{float(x):.17g}"


def _write_nystrom(fh, model):
    fh.write(f"kernel {kernel_label(model.kernel)}\n")
    fh.write(f"lambda0 {_fmt(model.config.lambda0)}\n")
    fh.write(f"scaling {model.config.laplacian_scaling}\n")
    fh.write(f"penalties {len(model.config.graph_penalties)}\n")
    for lam, penalty in model.config.graph_penalties:
        kind = getattr(penalty, "kind", "matrix")
        fh.write(f"penalty {_fmt(lam)} {kind}\n")
    s, d = model.landmark_points.shape
    fh.write(f"landmarks {s} {d}\n")
    fh.write("indices " + " ".join(str(int(i)) for i in model.landmark_indices) + "\n")
    for row in model.landmark_points:
        fh.write("point " + " ".join(_fmt(v) for v in row) + "\n")
    fh.write(f"outputs {model.output_dim}\n")
    for row in model.coefficients:
        fh.write("coef " + " ".join(_fmt(v) for v in row) + "\n")


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(FORMAT_HEADER + "\n")
        if isinstance(model, AggregatedModel):
            fh.write("type aggregate\n")
            fh.write(f"members {len(model.members)}\n")
            fh.write("cbar " + " ".join(_fmt(v) for v in model.cbar) + "\n")
            for row in model.Hbar:
                fh.write("hrow " + " ".join(_fmt(v) for v in row) + "\n")
            fh.write("hbar " + " ".join(_fmt(v) for v in model.hbar) + "\n")
            for i, member in enumerate(model.members):
                fh.write(f"member {i}\n")
                _write_nystrom(fh, member)
        else:
            fh.write("type nystrom\n")
            _write_nystrom(fh, model)
        fh.write("end\n")


class _Lines:
    def __init__(self, text):
        self.lines = [ln for ln in text.splitlines() if ln.strip()]
        self.pos = 0

    def next(self, expect=None):
        if self.pos >= len(self.lines):
            raise ValueError("model file truncated")
        line = self.lines[self.pos]
        self.pos += 1
        if expect is not None and not line.startswith(expect):
            raise ValueError(f"model file: expected {expect!r}, got {line!r}")
        return line


def _read_nystrom(lines):
    kernel = parse_kernel(lines.next("kernel ").split(None, 1)[1])
    lambda0 = float(lines.next("lambda0 ").split()[1])
    scaling = lines.next("scaling ").split()[1]
    n_pen = int(lines.next("penalties ").split()[1])
    for _ in range(n_pen):
        lines.next("penalty ")  # weights are informational only
    s, d = (int(v) for v in lines.next("landmarks ").split()[1:])
    indices = np.array([int(v) for v in lines.next("indices ").split()[1:]])
    points = np.array([[float(v) for v in lines.next("point ").split()[1:]]
                       for _ in range(s)]).reshape(s, d)
    outputs = int(lines.next("outputs ").split()[1])
    coeffs = np.array([[float(v) for v in lines.next("coef ").split()[1:]]
                       for _ in range(s)]).reshape(s, outputs)
    config = RegularizationConfig(lambda0, (), scaling)
    return NystromModel(indices, points, coeffs, kernel, config)


def load_model(path):
    """Read back a model file written by save_model."""
    with open(path) as fh:
        text = fh.read()
    lines = _Lines(text)
    lines.next(FORMAT_HEADER)
    kind = lines.next("type ").split()[1]
    if kind == "nystrom":
        model = _read_nystrom(lines)
    elif kind == "aggregate":
        count = int(lines.next("members ").split()[1])
        cbar = np.array([float(v) for v in lines.next("cbar ").split()[1:]])
        Hbar = np.array([[float(v) for v in lines.next("hrow ").split()[1:]]
                         for _ in range(count)]).reshape(count, count)
        hbar = np.array([float(v) for v in lines.next("hbar ").split()[1:]])
        members = []
        for _ in range(count):
            lines.next("member ")
            members.append(_read_nystrom(lines))
        model = AggregatedModel(members, cbar, Hbar, hbar)
    else:
        raise ValueError(f"unknown model type {kind!r}")
    lines.next("end")
    return model
