"""Relational data model: node/edge datasets and their structured operators.

A dataset is a set of nodes with feature vectors plus a multiset of
directed labeled edges. Three derived objects drive the solvers:

* the label matrix Y of a complete graph, with Y[end, start] = label, so
  that vec(Y) lists labels in flat pair order start * p + end;
* the bookkeeping map from observed edges to flat pair indices, providing
  gather (B) and scatter-add (B^T) between edge space and pair space;
* the block structure grouping edges by their conditioning node, providing
  the O(q) group-mean-removal operator (quasi-diagonal centering).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import IncompleteGraphError, InvalidInputError


def centering_matrix(l: int) -> np.ndarray:
    """The l x l projection I - (1/l) 1 1^T that removes the mean."""
    if l < 1:
        raise InvalidInputError("centering matrix needs l >= 1")
    return np.eye(l) - np.full((l, l), 1.0 / l)


class GraphDataset:
    """Immutable container of node ids, node features and directed edges.

    Edges are stored as parallel arrays (starts, ends, labels) of 0-based
    node indices; duplicate (start, end) pairs are allowed.
    """

    def __init__(self, node_ids, features, starts, ends, labels):
        ids = tuple(str(i) for i in node_ids)
        if len(set(ids)) != len(ids):
            raise InvalidInputError("node ids must be unique")
        feats = np.asarray(features, dtype=float)
        if feats.ndim != 2 or feats.shape[0] != len(ids):
            raise InvalidInputError(
                f"features must have shape ({len(ids)}, d), got {feats.shape}"
            )
        if not np.all(np.isfinite(feats)):
            raise InvalidInputError("features contain non-finite entries")
        s = np.asarray(starts, dtype=np.intp)
        e = np.asarray(ends, dtype=np.intp)
        y = np.asarray(labels, dtype=float)
        if not (s.ndim == e.ndim == y.ndim == 1 and s.size == e.size == y.size):
            raise InvalidInputError("starts, ends and labels must be equally long 1-D arrays")
        p = len(ids)
        if s.size and (s.min() < 0 or s.max() >= p or e.min() < 0 or e.max() >= p):
            raise InvalidInputError(f"edge indices must lie in [0, {p})")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("edge labels must be finite")
        for arr in (feats, s, e, y):
            arr.setflags(write=False)
        self.node_ids = ids
        self.features = feats
        self.starts = s
        self.ends = e
        self.labels = y

    @classmethod
    def from_edges(cls, node_ids, features, edges):
        """Build from an iterable of (start_index, end_index, label) triples."""
        triples = list(edges)
        if triples:
            starts, ends, labels = zip(*triples)
        else:
            starts, ends, labels = (), (), ()
        return cls(node_ids, features, starts, ends, labels)

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return self.starts.size

    def pair_indices(self) -> np.ndarray:
        """Flat pair index start * p + end of every edge."""
        return self.starts * self.num_nodes + self.ends


def build_label_matrix(ds: GraphDataset) -> np.ndarray:
    """Label matrix Y of a complete graph, Y[end, start] = label.

    The dataset must contain exactly one edge for every ordered node pair,
    loops included; otherwise an IncompleteGraphError names the first
    missing or duplicated pair.
    """
    p = ds.num_nodes
    pairs = ds.pair_indices()
    counts = np.bincount(pairs, minlength=p * p)
    if ds.num_edges != p * p or np.any(counts != 1):
        bad = int(np.argmax(counts != 1))
        start, end = divmod(bad, p)
        what = "missing" if counts[bad] == 0 else "duplicate"
        raise IncompleteGraphError(
            f"{what} edge ({ds.node_ids[start]} -> {ds.node_ids[end]}); "
            f"complete graph on {p} nodes requires each ordered pair exactly once"
        )
    y = np.empty((p, p))
    y[ds.ends, ds.starts] = ds.labels
    return y


@dataclass(frozen=True)
class Bookkeeping:
    """Maps the q observed edges to their flat pair indices in [0, p*p)."""

    pair_index: np.ndarray
    num_nodes: int

    def gather(self, full) -> np.ndarray:
        """B v: pick the entries of a pair-space vector at the observed edges."""
        v = np.asarray(full, dtype=float)
        if v.shape != (self.num_nodes * self.num_nodes,):
            raise InvalidInputError(
                f"expected pair-space vector of length {self.num_nodes ** 2}"
            )
        return v[self.pair_index]

    def scatter_add(self, values) -> np.ndarray:
        """B^T w: accumulate edge values into pair space (duplicates sum)."""
        w = np.asarray(values, dtype=float)
        if w.shape != (self.pair_index.size,):
            raise InvalidInputError(f"expected edge vector of length {self.pair_index.size}")
        return np.bincount(
            self.pair_index, weights=w, minlength=self.num_nodes * self.num_nodes
        )

    def as_matrix(self) -> np.ndarray:
        """Dense 0/1 gather matrix of shape (q, p*p); small problems only."""
        b = np.zeros((self.pair_index.size, self.num_nodes * self.num_nodes))
        b[np.arange(self.pair_index.size), self.pair_index] = 1.0
        return b


def build_bookkeeping(ds: GraphDataset) -> Bookkeeping:
    pairs = ds.pair_indices()
    if pairs.size and (pairs.min() < 0 or pairs.max() >= ds.num_nodes**2):
        raise InvalidInputError("edge pair index out of range")
    pairs = pairs.copy()
    pairs.setflags(write=False)
    return Bookkeeping(pair_index=pairs, num_nodes=ds.num_nodes)


@dataclass(frozen=True)
class BlockStructure:
    """Assignment of the q edges to conditioning-node groups."""

    group_ids: np.ndarray
    num_groups: int
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.group_ids, dtype=np.intp)
        if g.ndim != 1:
            raise InvalidInputError("group ids must be a 1-D array")
        if g.size and (g.min() < 0 or g.max() >= self.num_groups):
            raise InvalidInputError("group id out of range")
        counts = np.bincount(g, minlength=self.num_groups)
        for arr in (g, counts):
            arr.setflags(write=False)
        object.__setattr__(self, "group_ids", g)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_dataset(cls, ds: GraphDataset, direction: str = "outgoing"):
        """Group edges by start node ('outgoing') or end node ('incoming')."""
        if direction == "outgoing":
            gids = ds.starts
        elif direction == "incoming":
            gids = ds.ends
        else:
            raise InvalidInputError(f"unknown direction {direction!r}")
        return cls(group_ids=gids.copy(), num_groups=ds.num_nodes)

    @cached_property
    def order(self) -> np.ndarray:
        """Stable permutation arranging edge rows group by group."""
        return np.argsort(self.group_ids, kind="stable")


def apply_block_centering(bs: BlockStructure, v) -> np.ndarray:
    """Subtract the group mean within every conditioning-node group.

    Equals applying the quasi-diagonal matrix of centering blocks; runs in
    O(q) by accumulating group sums instead of forming that matrix.
    """
    x = np.asarray(v, dtype=float)
    if x.shape != (bs.group_ids.size,):
        raise InvalidInputError(f"expected vector of length {bs.group_ids.size}")
    sums = np.bincount(bs.group_ids, weights=x, minlength=bs.num_groups)
    means = np.zeros(bs.num_groups)
    nonempty = bs.counts > 0
    means[nonempty] = sums[nonempty] / bs.counts[nonempty]
    return x - means[bs.group_ids]


def block_centering_matrix(bs: BlockStructure) -> np.ndarray:
    """Dense q x q centering operator; reference for small problems."""
    q = bs.group_ids.size
    out = np.zeros((q, q))
    for g in range(bs.num_groups):
        idx = np.flatnonzero(bs.group_ids == g)
        if idx.size:
            out[np.ix_(idx, idx)] = centering_matrix(idx.size)
    return out


def complete_graph_edges(p: int):
    """(starts, ends) arrays of the complete directed graph in flat pair order."""
    if p < 1:
        raise InvalidInputError("need at least one node")
    starts = np.repeat(np.arange(p), p)
    ends = np.tile(np.arange(p), p)
    return starts, ends


def complete_dataset(node_ids, features, label_matrix) -> GraphDataset:
    """Complete-graph dataset whose edge labels are taken from Y[end, start]."""
    y = np.asarray(label_matrix, dtype=float)
    p = len(node_ids)
    if y.shape != (p, p):
        raise InvalidInputError(f"label matrix must be ({p}, {p}), got {y.shape}")
    starts, ends = complete_graph_edges(p)
    return GraphDataset(node_ids, features, starts, ends, y[ends, starts])
