"""Trained-model container, prediction and persistence.

A model couples the dual coefficient matrix A (A[end, start] = weight of
the training pair start -> end) with its node-kernel configuration and
edge-kernel kind. Scoring a candidate edge (s -> e) only needs node-kernel
evaluations against the training nodes:

    score(s, e) = k_e^T A k_s,

so predictions are defined for nodes never seen during training. Batch
scoring of a start set against an end set is H = K_end A K_start^T with
H[end_row, start_col]. Symmetric-kind models report (H + H^T) / 2 and
reciprocal-kind models (H - H^T) / 2, which requires the start and end
sets to coincide; mixed-set grids are rejected for those kinds.

Models serialize to a small self-describing text format (see save_model)
that round-trips coefficients exactly through 17-significant-digit
decimals.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    InvalidInputError,
    MalformedFileError,
    UnsupportedCombinationError,
    VersionMismatchError,
)
from .graph import GraphDataset
from .kernels import NodeKernelConfig, PairwiseKind, node_kernel_matrix
from .solvers import Objective, TrainConfig, train_dual

FORMAT_TAG = "kronrank-model"
FORMAT_VERSION = 1


@dataclass
class Model:
    dual: np.ndarray
    kernel_cfg: NodeKernelConfig
    pairwise: PairwiseKind
    train_features: np.ndarray | None
    objective: Objective = Objective.REGRESSION
    lam: float = 0.0
    info: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.dual, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"dual coefficients must be square, got {a.shape}")
        self.dual = a
        if self.kernel_cfg.kind == "precomputed":
            if self.train_features is not None:
                raise InvalidInputError("precomputed-kernel models carry no features")
        else:
            feats = linalg.as_matrix(self.train_features, "train features")
            if feats.shape[0] != a.shape[0]:
                raise InvalidInputError(
                    f"feature rows {feats.shape[0]} != dual order {a.shape[0]}"
                )
            self.train_features = feats

    @property
    def num_train_nodes(self) -> int:
        return self.dual.shape[0]


def fit_model(
    ds: GraphDataset,
    kernel_cfg: NodeKernelConfig,
    cfg: TrainConfig,
    kernel=None,
) -> Model:
    """Train on a dataset and wrap the result in a Model.

    For feature-based node kernels the training kernel matrix is computed
    from ``ds.features``; for the precomputed kind the caller passes it as
    ``kernel`` and predictions later take kernel blocks instead of feature
    rows.
    """
    if kernel_cfg.kind == "precomputed":
        if kernel is None:
            raise InvalidInputError("precomputed kernel requires the kernel matrix")
        k = linalg.require_symmetric(kernel, "kernel matrix")
        if k.shape[0] != ds.num_nodes:
            raise InvalidInputError("kernel order must match the node count")
        features = None
    else:
        if kernel is not None:
            raise InvalidInputError("kernel matrix only valid with the precomputed kind")
        k = node_kernel_matrix(ds.features, ds.features, kernel_cfg)
        features = ds.features
    dual = train_dual(k, ds, cfg)
    return Model(
        dual=dual,
        kernel_cfg=kernel_cfg,
        pairwise=cfg.pairwise,
        train_features=features,
        objective=cfg.objective,
        lam=cfg.lam,
        info={"solver": cfg.solver.value},
    )


def _kernel_rows(m: Model, rows, name):
    """Node-kernel evaluations of query rows against the training nodes."""
    if m.kernel_cfg.kind == "precomputed":
        k = linalg.as_matrix(rows, name)
        if k.shape[1] != m.num_train_nodes:
            raise InvalidInputError(
                f"{name}: precomputed kernel block needs {m.num_train_nodes} columns"
            )
        return k
    return node_kernel_matrix(rows, m.train_features, m.kernel_cfg)


def predict_scores(m: Model, start_feats, end_feats) -> np.ndarray:
    """Score every (start, end) pair of two node sets.

    Returns H with H[i, j] = score of the edge (start_j -> end_i). With a
    precomputed kernel, ``start_feats`` and ``end_feats`` are kernel blocks
    against the training nodes instead of feature rows.
    """
    k_start = _kernel_rows(m, start_feats, "start rows")
    k_end = _kernel_rows(m, end_feats, "end rows")
    raw = k_end @ m.dual @ k_start.T
    if m.pairwise is PairwiseKind.ORDINARY:
        return raw
    same = start_feats is end_feats or (
        np.shape(start_feats) == np.shape(end_feats)
        and np.array_equal(np.asarray(start_feats), np.asarray(end_feats))
    )
    if not same:
        raise UnsupportedCombinationError(
            "symmetric/reciprocal scoring needs identical start and end sets"
        )
    if m.pairwise is PairwiseKind.SYMMETRIC:
        return 0.5 * (raw + raw.T)
    return 0.5 * (raw - raw.T)


def rank_candidates(m: Model, condition_feats, candidate_feats, direction="outgoing"):
    """Rank candidates for one conditioning node, best first.

    ``direction='outgoing'`` scores edges (condition -> candidate),
    ``'incoming'`` scores (candidate -> condition). Returns a list of
    (candidate_index, score) sorted by descending score; ties keep the
    lower candidate index first.
    """
    if direction not in ("outgoing", "incoming"):
        raise InvalidInputError(f"unknown direction {direction!r}")
    cond = np.asarray(condition_feats, dtype=float)
    if cond.ndim != 1:
        raise InvalidInputError("condition must be a single feature (or kernel) row")
    k_cond = _kernel_rows(m, cond[None, :], "condition row")[0]
    k_cand = _kernel_rows(m, candidate_feats, "candidate rows")
    if k_cand.shape[0] < 1:
        raise InvalidInputError("need at least one candidate")
    out_scores = k_cand @ (m.dual @ k_cond)   # condition -> candidate
    in_scores = k_cand @ (m.dual.T @ k_cond)  # candidate -> condition
    if m.pairwise is PairwiseKind.SYMMETRIC:
        scores = 0.5 * (out_scores + in_scores)
    elif m.pairwise is PairwiseKind.RECIPROCAL:
        half = 0.5 * (out_scores - in_scores)
        scores = half if direction == "outgoing" else -half
    else:
        scores = out_scores if direction == "outgoing" else in_scores
    order = np.argsort(-scores, kind="stable")
    return [(int(i), float(scores[i])) for i in order]


def _write_block(out, matrix):
    for row in matrix:
        out.write(" ".join(f"{x:.17g}" for x in row))
        out.write("\n")


def save_model(m: Model, path) -> None:
    """Write the model as line-oriented UTF-8 text.

    Layout: format tag, version, pairwise kind, kernel spec, objective,
    lambda, node count, the dual block (p rows of p numbers, row-major),
    the feature block header with its column count followed by p feature
    rows (or ``features none`` for precomputed kernels), optional
    ``info key value`` lines, and a closing ``end``.
    """
    out = io.StringIO()
    out.write(f"{FORMAT_TAG}\n")
    out.write(f"version {FORMAT_VERSION}\n")
    out.write(f"pairwise {m.pairwise.value}\n")
    if m.kernel_cfg.kind == "gaussian":
        out.write(f"kernel gaussian {m.kernel_cfg.gamma:.17g}\n")
    else:
        out.write(f"kernel {m.kernel_cfg.kind}\n")
    out.write(f"objective {m.objective.value}\n")
    out.write(f"lambda {m.lam:.17g}\n")
    out.write(f"nodes {m.num_train_nodes}\n")
    out.write("dual\n")
    _write_block(out, m.dual)
    if m.train_features is None:
        out.write("features none\n")
    else:
        out.write(f"features {m.train_features.shape[1]}\n")
        _write_block(out, m.train_features)
    for key in sorted(m.info):
        out.write(f"info {key} {m.info[key]}\n")
    out.write("end\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(out.getvalue())


class _Cursor:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise MalformedFileError(f"model file truncated while reading {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, keyword):
        line = self.next(keyword)
        parts = line.split()
        if not parts or parts[0] != keyword:
            raise MalformedFileError(f"expected {keyword!r}, found {line!r}")
        return parts[1:]


def _read_block(cur, rows, cols, what):
    block = np.empty((rows, cols))
    for i in range(rows):
        fields = cur.next(f"{what} row {i}").split()
        if len(fields) != cols:
            raise MalformedFileError(
                f"{what} row {i} has {len(fields)} values, expected {cols}"
            )
        try:
            block[i] = [float(x) for x in fields]
        except ValueError as exc:
            raise MalformedFileError(f"non-numeric value in {what} row {i}") from exc
    return block


def load_model(path) -> Model:
    """Read back a model written by save_model, validating shape and version."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\r\n") for line in fh]
    cur = _Cursor(lines)
    if cur.next("format tag") != FORMAT_TAG:
        raise MalformedFileError("not a kronrank model file")
    (version,) = cur.expect("version")
    try:
        version_num = int(version)
    except ValueError as exc:
        raise MalformedFileError(f"bad version field {version!r}") from exc
    if version_num != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version_num} unsupported (expected {FORMAT_VERSION})"
        )
    (pairwise,) = cur.expect("pairwise")
    try:
        kind = PairwiseKind(pairwise)
    except ValueError as exc:
        raise MalformedFileError(f"unknown pairwise kind {pairwise!r}") from exc
    kparts = cur.expect("kernel")
    try:
        if kparts and kparts[0] == "gaussian":
            if len(kparts) != 2:
                raise MalformedFileError("gaussian kernel line needs a gamma value")
            kernel_cfg = NodeKernelConfig("gaussian", gamma=float(kparts[1]))
        elif len(kparts) == 1:
            kernel_cfg = NodeKernelConfig(kparts[0])
        else:
            raise MalformedFileError(f"bad kernel line {' '.join(kparts)!r}")
    except (ValueError, InvalidInputError) as exc:
        raise MalformedFileError(f"bad kernel specification: {exc}") from exc
    (objective,) = cur.expect("objective")
    try:
        obj = Objective(objective)
    except ValueError as exc:
        raise MalformedFileError(f"unknown objective {objective!r}") from exc
    (lam_text,) = cur.expect("lambda")
    try:
        lam = float(lam_text)
    except ValueError as exc:
        raise MalformedFileError(f"bad lambda value {lam_text!r}") from exc
    (nodes_text,) = cur.expect("nodes")
    try:
        p = int(nodes_text)
    except ValueError as exc:
        raise MalformedFileError(f"bad node count {nodes_text!r}") from exc
    if p < 1:
        raise MalformedFileError("node count must be >= 1")
    cur.expect("dual")
    dual = _read_block(cur, p, p, "dual")
    fparts = cur.expect("features")
    if fparts == ["none"]:
        features = None
        if kernel_cfg.kind != "precomputed":
            raise MalformedFileError("feature-based kernel but no feature block")
    else:
        try:
            d = int(fparts[0])
        except (IndexError, ValueError) as exc:
            raise MalformedFileError("bad features header") from exc
        features = _read_block(cur, p, d, "features")
    info = {}
    while True:
        line = cur.next("info or end")
        if line == "end":
            break
        parts = line.split(maxsplit=2)
        if len(parts) < 2 or parts[0] != "info":
            raise MalformedFileError(f"unexpected line {line!r}")
        info[parts[1]] = parts[2] if len(parts) == 3 else ""
    try:
        return Model(
            dual=dual,
            kernel_cfg=kernel_cfg,
            pairwise=kind,
            train_features=features,
            objective=obj,
            lam=lam,
            info=info,
        )
    except InvalidInputError as exc:
        raise MalformedFileError(f"inconsistent model file: {exc}") from exc
