"""Training algorithms for pairwise regression and conditional ranking.

All solvers produce a square dual-coefficient matrix A with
A[end, start] = weight of the ordered node pair (start -> end), so that
vec(A) lives in flat pair space. Closed forms exploit the shifted
Kronecker system

    (M kron N + lam I) vec(A) = vec(R),

which after eigendecomposing M and N costs a handful of p x p matrix
products. Incomplete graphs and the symmetric/reciprocal edge kernels go
through a BiCGSTAB iteration whose matrix-vector product applies the edge
kernel implicitly (cubic in nodes, linear in edges).

System orientation: the regression solvers target

    (B^T B Kbar + lam I) vec(A) = B^T y,

the normal-equations reduction of the squared loss. For the ranking loss
the iterative and dense solvers target

    (Kbar B^T L B + lam I) vec(A) = B^T L y,

which on a complete graph is exactly the system the O(p^3) ranking closed
form solves ((K kron K C + lam I) vec(A) = vec(C Y)); the two training
paths therefore agree there. The alternative left-oriented reduction
yields the block-centered dual vector instead and would not match the
closed form.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import linalg
from .errors import (
    DivergenceError,
    InvalidInputError,
    NotPositiveDefiniteError,
    NotPositiveSemidefiniteError,
    ResourceLimitError,
    SolverBreakdownError,
    UnsupportedCombinationError,
)
from .graph import (
    BlockStructure,
    GraphDataset,
    apply_block_centering,
    block_centering_matrix,
    build_bookkeeping,
    build_label_matrix,
    centering_matrix,
)
from .kernels import (
    MATERIALIZATION_CAP,
    PairwiseKind,
    pairwise_kernel_matrix,
    pairwise_operator_apply,
)

# Close-to-zero regularizer; iterative training then relies on the
# regularizing effect of capping the iteration count.
DEFAULT_LAMBDA = 2.0**-30
DEFAULT_MAX_ITER = 200
DEFAULT_RESIDUAL_TOL = 1e-9

# PSD tolerance for node kernels: eigenvalues may dip this far below zero,
# relative to the largest magnitude eigenvalue.
_PSD_RTOL = 1e-8
# Denominators below this count as BiCGSTAB breakdown.
_BREAKDOWN_EPS = 1e-300


class Objective(str, Enum):
    REGRESSION = "regression"
    RANKING = "ranking"


class SolverKind(str, Enum):
    CLOSED_FORM = "closed"
    ITERATIVE = "iterative"


@dataclass
class TrainConfig:
    objective: Objective = Objective.REGRESSION
    pairwise: PairwiseKind = PairwiseKind.ORDINARY
    lam: float = DEFAULT_LAMBDA
    solver: SolverKind = SolverKind.CLOSED_FORM
    max_iter: int = DEFAULT_MAX_ITER
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    callback: Optional[Callable[[int, np.ndarray], None]] = None

    def __post_init__(self):
        self.objective = Objective(self.objective)
        self.pairwise = PairwiseKind(self.pairwise)
        self.solver = SolverKind(self.solver)
        if not self.lam >= 0:
            raise InvalidInputError("lambda must be >= 0")
        if self.max_iter < 0:
            raise InvalidInputError("max_iter must be >= 0")
        if not self.residual_tol >= 0:
            raise InvalidInputError("residual_tol must be >= 0")


def _checked_kernel(k, lam, psd=False):
    km = linalg.require_symmetric(k, "kernel matrix")
    if not lam > 0:
        raise InvalidInputError("closed-form solvers require lambda > 0")
    if psd:
        values = np.linalg.eigvalsh(km)
        floor = -_PSD_RTOL * max(np.max(np.abs(values)), 1e-30)
        if values.min() < floor:
            raise NotPositiveSemidefiniteError(
                f"kernel matrix has eigenvalue {values.min():.3e} below tolerance"
            )
    return km


def solve_regression_closed_form(k, label_matrix, lam) -> np.ndarray:
    """Ridge regression over all node pairs of a complete graph in O(p^3).

    Solves (K kron K + lam I) vec(A) = vec(Y) through one symmetric
    eigendecomposition K = U diag(w) U^T: with E = U^T Y U and
    C[i, j] = 1 / (w[i] w[j] + lam), the solution is A = U (C * E) U^T.
    """
    km = _checked_kernel(k, lam, psd=True)
    y = linalg.as_matrix(label_matrix, "label matrix")
    if y.shape != km.shape:
        raise InvalidInputError(f"label matrix shape {y.shape} != kernel shape {km.shape}")
    values, vectors = np.linalg.eigh(km)
    e = vectors.T @ y @ vectors
    c = 1.0 / (np.multiply.outer(values, values) + lam)
    return vectors @ (c * e) @ vectors.T


def solve_ranking_closed_form(
    k, label_matrix, lam, pairwise: PairwiseKind = PairwiseKind.ORDINARY
) -> np.ndarray:
    """Conditional-ranking closed form for a complete graph in O(p^3).

    Solves (K kron K C + lam I) vec(A) = vec(C Y) with C the p x p
    centering matrix. K C is diagonalized through a Cholesky factor
    K = G G^T and the symmetric eigenproblem G^T C G = W S W^T, giving
    K C = (G W) S (G W)^{-1} with (G W)^{-1} = W^T G^{-1}; the shifted
    Kronecker formula then applies with M = K and N = K C.

    Only the ordinary edge kernel admits this shortcut; the symmetric and
    reciprocal kinds must use the iterative solver. A kernel that is
    semidefinite only gets one shot of diagonal jitter before Cholesky
    fails for good.
    """
    if pairwise is not PairwiseKind.ORDINARY:
        raise UnsupportedCombinationError(
            "closed-form ranking supports only the ordinary edge kernel; "
            "use the iterative solver for symmetric/reciprocal kinds"
        )
    km = _checked_kernel(k, lam)
    y = linalg.as_matrix(label_matrix, "label matrix")
    if y.shape != km.shape:
        raise InvalidInputError(f"label matrix shape {y.shape} != kernel shape {km.shape}")
    p = km.shape[0]
    try:
        g = linalg.cholesky(km).lower
    except NotPositiveDefiniteError:
        jitter = 1e-8 * np.trace(km) / p
        km = km + jitter * np.eye(p)
        g = linalg.cholesky(km).lower  # second failure propagates
    cmat = centering_matrix(p)
    w_k, u = np.linalg.eigh(km)
    sigma, ww = np.linalg.eigh(g.T @ cmat @ g)
    cy = cmat @ y
    e = ww.T @ scipy.linalg.solve_triangular(g, cy, lower=True, check_finite=False) @ u
    chat = 1.0 / (np.multiply.outer(sigma, w_k) + lam)
    return (g @ ww) @ (chat * e) @ u.T


def solve_with_label_transform(k, label_matrix, lam, kind: PairwiseKind) -> np.ndarray:
    """Regression with a symmetric or reciprocal edge kernel via labels.

    Training with those kernels on labels Y is equivalent to ordinary
    Kronecker regression on the (skew-)symmetrized labels (Y +- Y^T)/2, as
    long as prediction applies the matching score symmetrization (the
    model layer records the kind and does so).
    """
    y = linalg.as_matrix(label_matrix, "label matrix")
    if kind is PairwiseKind.SYMMETRIC:
        transformed = 0.5 * (y + y.T)
    elif kind is PairwiseKind.RECIPROCAL:
        transformed = 0.5 * (y - y.T)
    else:
        raise InvalidInputError("label transform applies to symmetric/reciprocal kinds only")
    return solve_regression_closed_form(k, transformed, lam)


def check_inversion_identity(n, lam, n_probes: int = 8, seed: int = 0) -> float:
    """Probe the shifted-inverse identities for (skew-)symmetrized kernels.

    For Nbar = N kron N, S and A the symmetrizer/skew-symmetrizer, checks

        (S Nbar S + lam I)^{-1} = S (Nbar + lam I)^{-1} S + (1/lam) A
        (A Nbar A + lam I)^{-1} = A (Nbar + lam I)^{-1} A + (1/lam) S

    by applying both sides of each identity to random probe vectors.
    Returns the largest absolute deviation seen. Diagnostic only; the
    explicit Kronecker matrix limits this to small p.
    """
    nn = linalg.as_matrix(n, "n")
    if nn.shape[0] != nn.shape[1]:
        raise InvalidInputError("n must be square")
    if not lam > 0:
        raise InvalidInputError("lambda must be > 0")
    p = nn.shape[0]
    if p > 8:
        raise ResourceLimitError("explicit Kronecker build limited to p <= 8")
    nbar = np.kron(nn, nn)
    p2 = p * p
    eye = np.eye(p2)
    perm = np.zeros((p2, p2))
    idx = np.arange(p2)
    perm[idx, (idx % p) * p + idx // p] = 1.0
    s_mat = 0.5 * (eye + perm)
    a_mat = 0.5 * (eye - perm)
    shifted = nbar + lam * eye
    sym_lhs = s_mat @ nbar @ s_mat + lam * eye
    skew_lhs = a_mat @ nbar @ a_mat + lam * eye
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        x = rng.standard_normal(p2)
        lhs = linalg.dense_solve(sym_lhs, x)
        rhs = s_mat @ linalg.dense_solve(shifted, s_mat @ x) + (a_mat @ x) / lam
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        lhs = linalg.dense_solve(skew_lhs, x)
        rhs = a_mat @ linalg.dense_solve(shifted, a_mat @ x) + (s_mat @ x) / lam
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def _reduced_system(k, ds: GraphDataset, cfg: TrainConfig):
    """Implicit matvec and right-hand side of the reduced training system."""
    bk = build_bookkeeping(ds)
    kind = cfg.pairwise
    lam = cfg.lam

    def kernel_apply(x):
        return pairwise_operator_apply(kind, k, k, x)

    if cfg.objective is Objective.RANKING:
        bs = BlockStructure.from_dataset(ds, "outgoing")

        def op(x):
            centered = apply_block_centering(bs, bk.gather(x))
            return kernel_apply(bk.scatter_add(centered)) + lam * x

        rhs = bk.scatter_add(apply_block_centering(bs, ds.labels))
    else:

        def op(x):
            return bk.scatter_add(bk.gather(kernel_apply(x))) + lam * x

        rhs = bk.scatter_add(ds.labels)
    return op, rhs


def _bicgstab(op, b, max_iter, tol, callback, p):
    """Plain BiCGSTAB on an implicit operator, returning the best iterate.

    Residual norms are tracked every iteration; since the error of this
    method can momentarily rise sharply, the iterate with the smallest
    residual seen is the one returned, not necessarily the last.

    A collapsed denominator normally means the Krylov recurrence is
    exhausted. On near-singular systems (tiny regularizer, low-rank
    kernel) that is the expected terminal state of early-stopped training
    and the best iterate is returned; it is an error only when the
    iteration collapses before reducing the residual at all.
    """
    norm_b = np.linalg.norm(b)
    x = np.zeros_like(b)
    if norm_b == 0.0 or max_iter == 0:
        return x
    r = b.copy()
    r_hat = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros_like(b)
    p_vec = np.zeros_like(b)
    best_x = x.copy()
    best_res = np.linalg.norm(r)
    threshold = tol * norm_b

    def note(candidate, res):
        nonlocal best_x, best_res
        if res < best_res:
            best_res = res
            best_x = candidate.copy()

    def exhausted(what, iteration):
        if best_res < norm_b:
            return True  # progress was made: stop and keep the best iterate
        raise SolverBreakdownError(
            f"{what} collapsed at iteration {iteration} before any progress",
            last_iterate=linalg.unvec(best_x, p),
        )

    for iteration in range(1, max_iter + 1):
        rho = float(r_hat @ r)
        if abs(rho) < _BREAKDOWN_EPS and exhausted("rho", iteration):
            break
        beta = (rho / rho_old) * (alpha / omega)
        p_vec = r + beta * (p_vec - omega * v)
        v = op(p_vec)
        denom = float(r_hat @ v)
        if abs(denom) < _BREAKDOWN_EPS and exhausted("r_hat . v", iteration):
            break
        alpha = rho / denom
        h = x + alpha * p_vec
        s = r - alpha * v
        res_s = np.linalg.norm(s)
        if not np.isfinite(res_s):
            raise DivergenceError(f"non-finite residual at iteration {iteration}")
        if res_s <= threshold:
            x = h
            note(x, res_s)
            if callback is not None:
                callback(iteration, linalg.unvec(x, p))
            break
        t = op(s)
        tt = float(t @ t)
        if tt < _BREAKDOWN_EPS:
            note(h, res_s)
            if exhausted("t . t", iteration):
                break
        omega = float(t @ s) / tt
        x = h + omega * s
        r = s - omega * t
        rho_old = rho
        res = np.linalg.norm(r)
        if not np.isfinite(res):
            raise DivergenceError(f"non-finite residual at iteration {iteration}")
        note(x, res)
        if callback is not None:
            callback(iteration, linalg.unvec(x, p))
        if res <= threshold:
            break
    return best_x


def solve_iterative(k, ds: GraphDataset, cfg: TrainConfig) -> np.ndarray:
    """BiCGSTAB training for arbitrary edge multisets and all edge kernels.

    Runs on the reduced system described in the module docstring. Every
    matrix-vector product costs one implicit edge-kernel application plus
    O(q) gather/center/scatter work. Stops at ``cfg.max_iter`` iterations
    or when the relative residual drops below ``cfg.residual_tol``;
    ``cfg.callback(iteration, current_A)`` is invoked once per iteration.
    """
    km = linalg.require_symmetric(k, "kernel matrix")
    p = km.shape[0]
    if p != ds.num_nodes:
        raise InvalidInputError(
            f"kernel order {p} != dataset node count {ds.num_nodes}"
        )
    op, rhs = _reduced_system(km, ds, cfg)
    solution = _bicgstab(op, rhs, cfg.max_iter, cfg.residual_tol, cfg.callback, p)
    return linalg.unvec(solution, p)


def solve_dense_reference(k, ds: GraphDataset, cfg: TrainConfig) -> np.ndarray:
    """Brute-force reference: materialize the reduced system and LU-solve it.

    Builds the explicit edge-kernel matrix, bookkeeping matrix and block
    centering matrix, so it is only feasible for small problems; intended
    as the oracle the structured solvers are validated against.
    """
    km = linalg.require_symmetric(k, "kernel matrix")
    p = km.shape[0]
    q = ds.num_edges
    if p != ds.num_nodes:
        raise InvalidInputError(f"kernel order {p} != dataset node count {ds.num_nodes}")
    if p**4 + q * p**2 > MATERIALIZATION_CAP:
        raise ResourceLimitError("problem too large for the dense reference solver")
    kbar = pairwise_kernel_matrix(cfg.pairwise, km)
    b = build_bookkeeping(ds).as_matrix()
    eye = np.eye(p * p)
    if cfg.objective is Objective.RANKING:
        l_mat = block_centering_matrix(BlockStructure.from_dataset(ds, "outgoing"))
        system = kbar @ (b.T @ l_mat @ b) + cfg.lam * eye
        rhs = b.T @ (l_mat @ ds.labels)
    else:
        system = b.T @ b @ kbar + cfg.lam * eye
        rhs = b.T @ ds.labels
    return linalg.unvec(linalg.dense_solve(system, rhs), p)


def train_dual(k, ds: GraphDataset, cfg: TrainConfig) -> np.ndarray:
    """Dispatch to the solver matching the configuration.

    Closed-form training requires lambda > 0 and a complete graph (one
    edge per ordered node pair); invalid combinations fail fast before any
    factorization starts.
    """
    if cfg.solver is SolverKind.ITERATIVE:
        return solve_iterative(k, ds, cfg)
    if not cfg.lam > 0:
        raise InvalidInputError("closed-form solvers require lambda > 0")
    y = build_label_matrix(ds)
    if cfg.objective is Objective.RANKING:
        return solve_ranking_closed_form(k, y, cfg.lam, pairwise=cfg.pairwise)
    if cfg.pairwise is PairwiseKind.ORDINARY:
        return solve_regression_closed_form(k, y, cfg.lam)
    return solve_with_label_transform(k, y, cfg.lam, cfg.pairwise)
