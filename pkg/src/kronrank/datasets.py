"""Synthetic data generation and CSV ingestion/export.

The rock-paper-scissors benchmark simulates games between players whose
strategies are 3-dimensional move-probability vectors. Training data is a
directed multigraph of game outcomes (two edges per game, +1 from the
winner, -1 from the loser); test data is a fresh player set together with
the analytic win-probability grid, a reciprocal and intransitive relation.

All randomness flows through numpy's PCG64 generator
(``numpy.random.default_rng(seed)``), so outputs are reproducible for a
fixed seed and numpy version.

CSV formats (UTF-8, comma-separated, ``.`` decimal point, LF written,
LF/CRLF accepted):

* nodes:       header ``id,f1,...,fd``, one row per node
* edges:       header ``start,end,label``
* predictions: header ``start,end,score``
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .graph import GraphDataset, complete_graph_edges

# move m beats move _BEATS[m]: rock(0) > scissors(2), paper(1) > rock(0),
# scissors(2) > paper(1)
_BEATS = np.array([2, 0, 1])


@dataclass(frozen=True)
class RpsConfig:
    n_train_players: int = 100
    n_train_games: int = 1000
    n_test_players: int = 100
    w: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_train_players < 1 or self.n_train_games < 1 or self.n_test_players < 1:
            raise InvalidInputError("player and game counts must be >= 1")
        if not self.w >= 1:
            raise InvalidInputError("imbalance w must be >= 1")


@dataclass(frozen=True)
class RpsData:
    train: GraphDataset
    test_ids: tuple
    test_features: np.ndarray
    test_win_prob: np.ndarray  # [i, j] = P(test player i beats test player j)


def _strategies(rng, n, w):
    # favorite move gets its uniform draw scaled by w before normalizing
    u = rng.random((n, 3))
    fav = rng.integers(0, 3, size=n)
    u[np.arange(n), fav] *= w
    return u / u.sum(axis=1, keepdims=True)


def _draw_moves(rng, cum_rows):
    u = rng.random(cum_rows.shape[0])
    return np.minimum((u[:, None] > cum_rows).sum(axis=1), 2)


def simulate_games(rng, strategy_a, strategy_b, n: int) -> int:
    """Play n tie-free games between two strategies; count wins of the first."""
    sa = np.asarray(strategy_a, dtype=float)
    sb = np.asarray(strategy_b, dtype=float)
    cum_a = np.cumsum(sa)[None, :]
    cum_b = np.cumsum(sb)[None, :]
    wins = 0
    remaining = n
    while remaining:
        ma = _draw_moves(rng, np.repeat(cum_a, remaining, axis=0))
        mb = _draw_moves(rng, np.repeat(cum_b, remaining, axis=0))
        decided = ma != mb
        wins += int(np.sum(_BEATS[ma[decided]] == mb[decided]))
        remaining -= int(decided.sum())
    return wins


def simulate_game(rng, strategy_a, strategy_b) -> int:
    """One tie-free game; returns 0 if the first strategy wins, else 1."""
    return 0 if simulate_games(rng, strategy_a, strategy_b, 1) == 1 else 1


def analytic_win_probability(strategy_a, strategy_b) -> float:
    """P(first strategy wins | game is not a tie)."""
    sa = np.asarray(strategy_a, dtype=float)
    sb = np.asarray(strategy_b, dtype=float)
    win = float(np.sum(sa * sb[_BEATS]))
    tie = float(np.sum(sa * sb))
    if 1.0 - tie < 1e-15:
        return 0.5  # both sides always play the same move
    return win / (1.0 - tie)


def _win_probability_grid(strategies) -> np.ndarray:
    s = np.asarray(strategies, dtype=float)
    win = s @ s[:, _BEATS].T
    tie = s @ s.T
    denom = 1.0 - tie
    return np.where(denom < 1e-15, 0.5, win / np.maximum(denom, 1e-300))


def gen_rps(cfg: RpsConfig) -> RpsData:
    """Generate a seeded rock-paper-scissors benchmark instance.

    Larger ``w`` makes every player favor one move more strongly, pushing
    the win probabilities toward {0, 1/2, 1} and the task away from pure
    noise. Games are sampled between uniformly chosen ordered pairs of
    distinct players; tied games are redrawn.
    """
    rng = np.random.default_rng(cfg.seed)
    p = cfg.n_train_players
    train_strategies = _strategies(rng, p, cfg.w)
    test_strategies = _strategies(rng, cfg.n_test_players, cfg.w)

    n = cfg.n_train_games
    first = rng.integers(0, p, size=n)
    second = rng.integers(0, p - 1, size=n)
    second = second + (second >= first)
    cum = np.cumsum(train_strategies, axis=1)
    moves_a = np.empty(n, dtype=np.intp)
    moves_b = np.empty(n, dtype=np.intp)
    pending = np.arange(n)
    while pending.size:
        moves_a[pending] = _draw_moves(rng, cum[first[pending]])
        moves_b[pending] = _draw_moves(rng, cum[second[pending]])
        pending = pending[moves_a[pending] == moves_b[pending]]
    first_wins = _BEATS[moves_a] == moves_b
    winners = np.where(first_wins, first, second)
    losers = np.where(first_wins, second, first)

    starts = np.empty(2 * n, dtype=np.intp)
    ends = np.empty(2 * n, dtype=np.intp)
    labels = np.empty(2 * n)
    starts[0::2], ends[0::2], labels[0::2] = winners, losers, 1.0
    starts[1::2], ends[1::2], labels[1::2] = losers, winners, -1.0

    train = GraphDataset(
        node_ids=[f"p{i}" for i in range(p)],
        features=train_strategies,
        starts=starts,
        ends=ends,
        labels=labels,
    )
    return RpsData(
        train=train,
        test_ids=tuple(f"t{i}" for i in range(cfg.n_test_players)),
        test_features=test_strategies,
        test_win_prob=_win_probability_grid(test_strategies),
    )


def synthetic_complete(p: int, d: int = 5, seed: int = 0) -> GraphDataset:
    """Complete directed graph with random features and labels (benchmarks)."""
    rng = np.random.default_rng(seed)
    starts, ends = complete_graph_edges(p)
    return GraphDataset(
        node_ids=[f"n{i}" for i in range(p)],
        features=rng.standard_normal((p, d)),
        starts=starts,
        ends=ends,
        labels=rng.standard_normal(p * p),
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _split_csv_line(line: str):
    return [fld.strip() for fld in line.split(",")]


def _parse_float(text, path, lineno, column):
    try:
        return float(text)
    except ValueError:
        raise InvalidInputError(
            f"{path}:{lineno}: non-numeric value {text!r} in column {column!r}"
        ) from None


def write_nodes_csv(path, ids, features) -> None:
    feats = np.asarray(features, dtype=float)
    if feats.ndim != 2 or feats.shape[0] != len(ids):
        raise InvalidInputError("features must be 2-D with one row per id")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id," + ",".join(f"f{i + 1}" for i in range(feats.shape[1])) + "\n")
        for node_id, row in zip(ids, feats):
            fh.write(str(node_id) + "," + ",".join(_fmt(x) for x in row) + "\n")


def read_nodes_csv(path):
    """Read a nodes file; returns (ids, features)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InvalidInputError(f"{path}:1: empty nodes file")
    header = _split_csv_line(lines[0])
    if len(header) < 2 or header[0] != "id":
        raise InvalidInputError(
            f"{path}:1: nodes header must be 'id,f1,...,fd', got {lines[0]!r}"
        )
    d = len(header) - 1
    ids, rows = [], []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = _split_csv_line(line)
        if len(fields) != d + 1:
            raise InvalidInputError(
                f"{path}:{lineno}: expected {d + 1} columns, got {len(fields)}"
            )
        node_id = fields[0]
        if node_id in seen:
            raise InvalidInputError(f"{path}:{lineno}: duplicate node id {node_id!r}")
        seen.add(node_id)
        ids.append(node_id)
        rows.append(
            [_parse_float(fields[i + 1], path, lineno, header[i + 1]) for i in range(d)]
        )
    if not ids:
        raise InvalidInputError(f"{path}: nodes file contains no rows")
    return ids, np.asarray(rows)


def _write_pairs_csv(path, value_header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"start,end,{value_header}\n")
        for start, end, value in rows:
            fh.write(f"{start},{end},{_fmt(value)}\n")


def _read_pairs_csv(path, value_header):
    """Rows of a (start, end, value) file as (start_id, end_id, float) triples."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InvalidInputError(f"{path}:1: empty file")
    expected = ["start", "end", value_header]
    if _split_csv_line(lines[0]) != expected:
        raise InvalidInputError(
            f"{path}:1: header must be '{','.join(expected)}', got {lines[0]!r}"
        )
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = _split_csv_line(line)
        if len(fields) != 3:
            raise InvalidInputError(f"{path}:{lineno}: expected 3 columns, got {len(fields)}")
        rows.append((fields[0], fields[1], _parse_float(fields[2], path, lineno, value_header)))
    return rows


def write_edges_csv(path, ids, starts, ends, labels) -> None:
    id_list = list(ids)
    _write_pairs_csv(
        path,
        "label",
        ((id_list[s], id_list[e], y) for s, e, y in zip(starts, ends, labels)),
    )


def read_edges_csv(path, ids):
    """Read an edges file, resolving node ids; returns (starts, ends, labels).

    An empty body (header only) yields empty arrays. Unknown ids are
    reported with their line number.
    """
    index = {str(node_id): i for i, node_id in enumerate(ids)}
    starts, ends, labels = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InvalidInputError(f"{path}:1: empty file")
    if _split_csv_line(lines[0]) != ["start", "end", "label"]:
        raise InvalidInputError(
            f"{path}:1: header must be 'start,end,label', got {lines[0]!r}"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = _split_csv_line(line)
        if len(fields) != 3:
            raise InvalidInputError(f"{path}:{lineno}: expected 3 columns, got {len(fields)}")
        for key in (fields[0], fields[1]):
            if key not in index:
                raise InvalidInputError(f"{path}:{lineno}: unknown node id {key!r}")
        starts.append(index[fields[0]])
        ends.append(index[fields[1]])
        labels.append(_parse_float(fields[2], path, lineno, "label"))
    return (
        np.asarray(starts, dtype=np.intp),
        np.asarray(ends, dtype=np.intp),
        np.asarray(labels, dtype=float),
    )


def write_predictions_csv(path, start_ids, end_ids, scores) -> None:
    """Write a score grid; ``scores[i, j]`` belongs to edge (start_j -> end_i)."""
    grid = np.asarray(scores, dtype=float)
    if grid.shape != (len(end_ids), len(start_ids)):
        raise InvalidInputError(
            f"score grid shape {grid.shape} != (len(end_ids), len(start_ids))"
        )
    rows = (
        (start, end_ids[i], grid[i, j])
        for j, start in enumerate(start_ids)
        for i in range(len(end_ids))
    )
    _write_pairs_csv(path, "score", rows)


def read_predictions_csv(path):
    """Prediction rows as (start_id, end_id, score) triples."""
    return _read_pairs_csv(path, "score")


def read_truth_csv(path):
    """Ground-truth rows as (start_id, end_id, label) triples."""
    return _read_pairs_csv(path, "label")
