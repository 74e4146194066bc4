"""Conditional ranking and regression on relational graph data.

Learns real-valued relations h(start, end) between nodes from directed
labeled edges, using Kronecker-product pairwise kernels built from a node
kernel. Complete training graphs admit O(p^3) closed-form solvers; general
edge multisets and the symmetric/reciprocal edge kernels train through an
implicit BiCGSTAB iteration. Trained models rank candidate nodes relative
to a conditioning node, including nodes never seen during training.
"""

from .datasets import RpsConfig, RpsData, gen_rps
from .errors import KronRankError
from .graph import GraphDataset
from .kernels import NodeKernelConfig, PairwiseKind
from .model import (
    Model,
    fit_model,
    load_model,
    predict_scores,
    rank_candidates,
    save_model,
)
from .solvers import Objective, SolverKind, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "GraphDataset",
    "KronRankError",
    "Model",
    "NodeKernelConfig",
    "Objective",
    "PairwiseKind",
    "RpsConfig",
    "RpsData",
    "SolverKind",
    "TrainConfig",
    "fit_model",
    "gen_rps",
    "load_model",
    "predict_scores",
    "rank_candidates",
    "save_model",
    "__version__",
]
