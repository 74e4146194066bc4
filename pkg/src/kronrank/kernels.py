"""Node-level kernels and the pairwise (edge) kernels built from them.

A node kernel K compares individual nodes. Edges are compared with one of
three pairwise kernels derived from K:

* ordinary:    k(v,vb) * k(v',vb')
* symmetric:   0.5 * (k(v,vb) * k(v',vb') + k(v,vb') * k(v',vb))
* reciprocal:  0.5 * (k(v,vb) * k(v',vb') - k(v,vb') * k(v',vb))

where an edge is the ordered pair (start v, end v'). In matrix form these
are K kron K, S (K kron K) and A (K kron K) with S/A the symmetrizer and
skew-symmetrizer. Edges use the flat index start * p + end (0-based), which
matches the column-stacking vec convention of the linalg module.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import linalg
from .errors import InvalidInputError, ResourceLimitError, UnsupportedCombinationError

# Explicit edge-kernel matrices above this entry count must go through the
# implicit operator instead.
MATERIALIZATION_CAP = 10**8

_KERNEL_KINDS = ("linear", "gaussian", "precomputed")


class PairwiseKind(str, Enum):
    ORDINARY = "ordinary"
    SYMMETRIC = "symmetric"
    RECIPROCAL = "reciprocal"


@dataclass(frozen=True)
class NodeKernelConfig:
    """Which node kernel to use: 'linear', 'gaussian' (needs gamma > 0), or
    'precomputed' (caller supplies kernel matrices directly)."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in _KERNEL_KINDS:
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.gamma is None or not self.gamma > 0:
                raise InvalidInputError("gaussian kernel requires gamma > 0")
        elif self.gamma is not None:
            raise InvalidInputError(f"gamma is only valid for the gaussian kernel")


def node_kernel_matrix(rows_a, rows_b, cfg: NodeKernelConfig) -> np.ndarray:
    """Kernel evaluations between two node sets, entry (i, j) = k(a_i, b_j)."""
    xa = linalg.as_matrix(rows_a, "rows_a")
    xb = linalg.as_matrix(rows_b, "rows_b")
    if xa.shape[1] != xb.shape[1]:
        raise InvalidInputError(
            f"feature dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}"
        )
    if cfg.kind == "linear":
        return xa @ xb.T
    if cfg.kind == "gaussian":
        sq = (
            np.sum(xa * xa, axis=1)[:, None]
            + np.sum(xb * xb, axis=1)[None, :]
            - 2.0 * (xa @ xb.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-cfg.gamma * sq)
    raise UnsupportedCombinationError(
        "precomputed kernels cannot be evaluated from features; pass the matrix directly"
    )


def pairwise_kernel_value(kind: PairwiseKind, k_vvb, k_v2vb2, k_vvb2, k_v2vb) -> float:
    """Single pairwise kernel evaluation from four node-kernel values.

    Arguments follow the edge pair ((v, v'), (vb, vb')): k_vvb = k(v, vb),
    k_v2vb2 = k(v', vb'), k_vvb2 = k(v, vb'), k_v2vb = k(v', vb).
    """
    if kind is PairwiseKind.ORDINARY:
        return k_vvb * k_v2vb2
    if kind is PairwiseKind.SYMMETRIC:
        return 0.5 * (k_vvb * k_v2vb2 + k_vvb2 * k_v2vb)
    return 0.5 * (k_vvb * k_v2vb2 - k_vvb2 * k_v2vb)


def _row_transpose_perm(r: int) -> np.ndarray:
    # permutation realizing the commutation matrix on r*r flat indices
    idx = np.arange(r * r)
    return (idx % r) * r + idx // r


def pairwise_kernel_matrix(kind: PairwiseKind, k, cap: int = MATERIALIZATION_CAP) -> np.ndarray:
    """Explicit edge-kernel matrix of shape (r*r, p*p) for a node-kernel
    block K of shape (r, p).

    Row start_i * r + end_i indexes edges on the r-side, column
    start_j * p + end_j edges on the p-side. Only feasible for small
    problems; raises ResourceLimitError beyond ``cap`` entries.
    """
    km = linalg.as_matrix(k, "k")
    r, p = km.shape
    if (r * r) * (p * p) > cap:
        raise ResourceLimitError(
            f"edge kernel matrix would need {(r * r) * (p * p)} entries "
            f"(cap {cap}); use pairwise_operator_apply instead"
        )
    full = np.kron(km, km)
    if kind is PairwiseKind.ORDINARY:
        return full
    perm = _row_transpose_perm(r)
    if kind is PairwiseKind.SYMMETRIC:
        return 0.5 * (full + full[perm])
    return 0.5 * (full - full[perm])


def pairwise_operator_apply(kind: PairwiseKind, k_left, k_right, v) -> np.ndarray:
    """Apply the implicit edge-kernel operator to a vector.

    Ordinary: (K_left kron K_right) v through the vec trick. Symmetric and
    reciprocal additionally project with the (skew-)symmetrizer and require
    k_left and k_right to be the same square matrix. Cost is cubic in the
    node count plus a quadratic projection; the edge-kernel matrix itself
    is never formed.
    """
    kl = linalg.as_matrix(k_left, "k_left")
    kr = linalg.as_matrix(k_right, "k_right")
    if kind is PairwiseKind.ORDINARY:
        return linalg.kron_matvec(kl, kr, v)
    if kl.shape != kr.shape or kl.shape[0] != kl.shape[1]:
        raise InvalidInputError(
            "symmetric/reciprocal operators need one square node-kernel matrix"
        )
    if kl is not k_right and not np.array_equal(kl, kr):
        raise InvalidInputError(
            "symmetric/reciprocal operators need k_left and k_right equal"
        )
    out = linalg.kron_matvec(kl, kl, v)
    r = kl.shape[0]
    if kind is PairwiseKind.SYMMETRIC:
        return linalg.apply_symmetrizer(out, r)
    return linalg.apply_skew_symmetrizer(out, r)
