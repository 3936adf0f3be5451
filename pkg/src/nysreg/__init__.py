"""Kernel ridge / manifold regularization with Nystrom subsampling.

Submodules
----------
kernels      scalar and multi-view kernels, Gram assembly
graph        weight matrices, graph Laplacians, block penalties
solver       closed-form fitting (full and Nystrom), explicit-feature oracle
multiview    multi-view learning with a combination operator
aggregation  linear functional strategy over several Nystrom models
modelsel     effective dimension, leverage, Nystrom gap, parameter rules
data         dataset ingestion, NSL-KDD preprocessing, synthetic targets
evaluation   confusion metrics, cross-validation driver, rate harness
cli          command-line front end
"""

from . import (
    aggregation,
    data,
    evaluation,
    graph,
    kernels,
    modelsel,
    multiview,
    solver,
)

__version__ = "0.1.0"

__all__ = [
    "aggregation",
    "data",
    "evaluation",
    "graph",
    "kernels",
    "modelsel",
    "multiview",
    "solver",
]
