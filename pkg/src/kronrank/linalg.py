"""Dense linear algebra core.

Thin, validating wrappers around LAPACK (via numpy/scipy) plus the
column-stacking vec/unvec pair and implicit operators for structured
matrices: Kronecker products applied through the vec trick, and the
commutation / symmetrizer / skew-symmetrizer permutation family.

Conventions used throughout the package:

* ``vec`` stacks columns, so ``vec(M)[j*p + i] == M[i, j]`` (0-based).
* ``kron_matvec(M, N, v)`` computes ``(M kron N) v`` as ``vec(N V M^T)``
  without ever materializing the Kronecker product.
"""

import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NotPositiveDefiniteError, SingularMatrixError

# Relative asymmetry accepted before a matrix is rejected as non-symmetric.
SYMMETRY_RTOL = 1e-10
# LU pivots below this fraction of the largest pivot count as singular.
PIVOT_RTOL = 1e-12


class EigenDecomposition(NamedTuple):
    """Orthonormal eigenvectors (columns) and ascending eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray


class CholeskyFactor(NamedTuple):
    """Lower-triangular G with input = G @ G.T and positive diagonal."""

    lower: np.ndarray


def as_matrix(m, name="matrix"):
    """Coerce to a finite 2-D float array or raise InvalidInputError."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def as_vector(v, name="vector"):
    """Coerce to a finite 1-D float array or raise InvalidInputError."""
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise InvalidInputError(f"{name} must be a 1-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def require_symmetric(m, name="matrix", rtol=SYMMETRY_RTOL):
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0)
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise InvalidInputError(f"{name} is not symmetric within rtol={rtol}")
    return a


def sym_eig(m) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    a = require_symmetric(m)
    values, vectors = np.linalg.eigh(a)
    return EigenDecomposition(vectors=vectors, values=values)


def cholesky(m) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefiniteError when a pivot is not strictly positive;
    callers that can tolerate it add diagonal jitter and retry.
    """
    a = require_symmetric(m)
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    return CholeskyFactor(lower=lower)


def vec(m) -> np.ndarray:
    """Stack the columns of a matrix into one vector."""
    a = as_matrix(m)
    return a.ravel(order="F")


def unvec(v, p: int) -> np.ndarray:
    """Inverse of vec for square p x p matrices."""
    a = as_vector(v)
    if a.size != p * p:
        raise InvalidInputError(f"expected length {p * p}, got {a.size}")
    return a.reshape((p, p), order="F")


def kron_matvec(m, n, v) -> np.ndarray:
    """Apply (M kron N) to v via vec(N V M^T), never forming the product.

    For M of shape (a, b) and N of shape (c, d), v must have length b*d
    and the result has length a*c. Cost is O(bcd + acd) instead of the
    O(abcd) of the explicit Kronecker matrix.
    """
    mm = as_matrix(m, "m")
    nn = as_matrix(n, "n")
    x = as_vector(v, "v")
    b = mm.shape[1]
    d = nn.shape[1]
    if x.size != b * d:
        raise InvalidInputError(f"vector length {x.size} incompatible with {b}*{d}")
    vmat = x.reshape((d, b), order="F")
    return (nn @ vmat @ mm.T).ravel(order="F")


def apply_commutation(v, p: int) -> np.ndarray:
    """Apply the commutation permutation: vec(M) -> vec(M^T)."""
    return unvec(v, p).T.ravel(order="F")


def apply_symmetrizer(v, p: int) -> np.ndarray:
    """Project vec(M) onto vec of the symmetric part (M + M^T)/2."""
    mat = unvec(v, p)
    return (0.5 * (mat + mat.T)).ravel(order="F")


def apply_skew_symmetrizer(v, p: int) -> np.ndarray:
    """Project vec(M) onto vec of the skew part (M - M^T)/2."""
    mat = unvec(v, p)
    return (0.5 * (mat - mat.T)).ravel(order="F")


def hadamard(m, n) -> np.ndarray:
    """Entrywise product of two equally shaped matrices."""
    a = as_matrix(m, "m")
    b = as_matrix(n, "n")
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def dense_solve(m, b) -> np.ndarray:
    """Solve M x = b by LU with partial pivoting.

    Rejects matrices whose smallest pivot falls below PIVOT_RTOL times the
    largest one. Used as the brute-force reference the structured solvers
    are checked against.
    """
    a = as_matrix(m, "m")
    rhs = as_vector(b, "b")
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"matrix must be square, got {a.shape}")
    if a.shape[0] != rhs.size:
        raise InvalidInputError(f"rhs length {rhs.size} != matrix order {a.shape[0]}")
    with warnings.catch_warnings():
        # singularity is detected below through the pivot check
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.max() == 0.0 or pivots.min() <= PIVOT_RTOL * pivots.max():
        raise SingularMatrixError("matrix is singular to working pivot tolerance")
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
