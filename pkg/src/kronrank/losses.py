"""Evaluation and training losses for conditional ranking.

Scores are organized per conditioning node: a "grouped scores" value is a
sequence of (predictions, labels) array pairs, one pair per group. The
discrete rank loss counts misordered pairs inside groups; the centered
squared loss is its smooth surrogate, summing squared differences of
residuals over all ordered pairs inside each group.

The reported rank loss is normalized by the number of comparable pairs
(pairs with strictly different labels), so 0.5 is chance level.
"""

import numpy as np

from .errors import InvalidInputError, UndefinedLossError

GroupedScores = "list[tuple[np.ndarray, np.ndarray]]"


def group_scores(group_ids, predictions, labels):
    """Split parallel prediction/label arrays into per-group pairs."""
    g = np.asarray(group_ids)
    h = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if not (g.shape == h.shape == y.shape and g.ndim == 1):
        raise InvalidInputError("group ids, predictions and labels must be equally long")
    groups = []
    for gid in np.unique(g):
        mask = g == gid
        groups.append((h[mask], y[mask]))
    return groups


def _check_groups(gs):
    out = []
    for h, y in gs:
        hh = np.asarray(h, dtype=float)
        yy = np.asarray(y, dtype=float)
        if hh.ndim != 1 or hh.shape != yy.shape or hh.size == 0:
            raise InvalidInputError("each group needs equally long, non-empty 1-D arrays")
        out.append((hh, yy))
    if not out:
        raise InvalidInputError("at least one group is required")
    return out


def pairwise_rank_loss(gs) -> float:
    """Fraction of misordered within-group pairs, prediction ties costing 1/2.

    For every group and every pair with y_e < y_eb, a penalty of 1 accrues
    when h(e) > h(eb), 1/2 when the predictions tie, 0 otherwise. Pairs with
    equal labels are not comparable and are skipped; if no comparable pair
    exists anywhere the loss is undefined.
    """
    penalty = 0.0
    comparable = 0
    for h, y in _check_groups(gs):
        lt = y[:, None] < y[None, :]
        if not lt.any():
            continue
        diff = h[:, None] - h[None, :]
        penalty += np.sum((diff > 0.0) & lt) + 0.5 * np.sum((diff == 0.0) & lt)
        comparable += int(np.sum(lt))
    if comparable == 0:
        raise UndefinedLossError("no comparable label pair in any group")
    return penalty / comparable


def regression_loss(predictions, labels) -> float:
    """Sum of squared errors over the edges."""
    h = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if h.shape != y.shape or h.ndim != 1:
        raise InvalidInputError("predictions and labels must be equally long 1-D arrays")
    r = y - h
    return float(r @ r)


def centered_squared_loss(gs) -> float:
    """Sum over groups of sum_{e,eb} (y_e - y_eb - h(e) + h(eb))^2.

    The double sum runs over all ordered pairs inside each group, so a
    group of size l contributes l*l terms (the diagonal ones vanish).
    """
    total = 0.0
    for h, y in _check_groups(gs):
        r = y - h
        d = r[:, None] - r[None, :]
        total += float(np.sum(d * d))
    return total
