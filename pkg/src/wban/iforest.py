"""Streaming isolation forest over fixed-size tumbling windows.

The gateway collects ``omega`` reconstructed vectors, min-max normalizes them,
and grows ``n_tree`` isolation trees from that block. The trees live in a
circular buffer. Every later block is first scored against the buffer and then
used to grow ``k_tree`` replacement trees for the oldest slots.

Trees are stored as flat, read-only numpy arrays so scoring a whole window is a
handful of vectorized passes per tree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from wban.core import TimeStepVector
from wban.lpu import normalize_window

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329


class DegenerateSample(ValueError):
    pass


class StreamTooShort(RuntimeError):
    """The stream ended before a single full window was collected."""

    def __init__(self, received: int, omega: int) -> None:
        super().__init__(f"stream ended after {received} vectors; need omega={omega}")
        self.received = received
        self.omega = omega


@dataclass(frozen=True)
class Tier2Params:
    omega: int = 1024
    n_tree: int = 100
    k_tree: int = 20
    score_threshold: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.omega < 2:
            raise ValueError(f"omega must be >= 2, got {self.omega}")
        if self.n_tree < 1:
            raise ValueError(f"n_tree must be >= 1, got {self.n_tree}")
        if not 1 <= self.k_tree <= self.n_tree:
            raise ValueError(f"need 1 <= k_tree <= n_tree, got k_tree={self.k_tree}")

    @property
    def height_limit(self) -> int:
        return math.ceil(math.log2(self.omega))


def avg_path_d(n: int) -> float:
    """Average unsuccessful-search depth of a BST over ``n`` keys.

    Uses ``ln(n - 1) + gamma`` for the harmonic number, with the exact small
    cases ``d(0) = d(1) = 0`` and ``d(2) = 1``.
    """
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def _avg_path_d_array(sizes: np.ndarray) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    out = np.zeros_like(sizes)
    big = sizes > 2
    out[sizes == 2] = 1.0
    n = sizes[big]
    out[big] = 2.0 * (np.log(n - 1.0) + EULER_GAMMA) - 2.0 * (n - 1.0) / n
    return out


@dataclass(frozen=True, eq=False)
class IsolationTree:
    """Array-backed isolation tree; node 0 is the root.

    For node ``i``: ``feature[i] == -1`` marks an external node holding
    ``size[i]`` sample points, otherwise points with
    ``x[feature[i]] < threshold[i]`` go to ``left[i]`` and the rest to
    ``right[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    height_limit: int

    def __post_init__(self) -> None:
        for name in ("feature", "threshold", "left", "right", "size", "depth"):
            getattr(self, name).flags.writeable = False
        # Precomputed path length for a point that terminates at each node.
        leaf_path = self.depth + _avg_path_d_array(self.size)
        leaf_path.flags.writeable = False
        object.__setattr__(self, "_leaf_path", leaf_path)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    @property
    def sample_size(self) -> int:
        return int(self.size[self.is_leaf].sum())

    def terminal_nodes(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        for _ in range(self.max_depth):
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            goes_left = X[rows, np.where(active, feat, 0)] < self.threshold[node]
            nxt = np.where(goes_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)
        return node

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        return self._leaf_path[self.terminal_nodes(X)]


def build_itree(
    sample: np.ndarray, height_limit: int, rng: np.random.Generator
) -> IsolationTree:
    """Grow one isolation tree on ``sample`` (shape ``(n, K)``).

    A node stops splitting when it holds at most one point, when its points
    are identical, or at ``height_limit``. Otherwise a dimension is drawn
    uniformly among those that are not constant within the node and the
    split value uniformly from the open interval between that dimension's
    min and max.

    The tree is grown breadth-first, one whole level per batch of numpy
    operations; node ids follow that order.
    """
    X = np.asarray(sample, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if n == 0:
        raise DegenerateSample("cannot build a tree from an empty sample")

    cap = 2 * n - 1
    feature = np.full(cap, -1, dtype=np.intp)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.intp)
    right = np.full(cap, -1, dtype=np.intp)
    size = np.zeros(cap, dtype=np.intp)
    depth = np.zeros(cap)
    size[0] = n
    n_nodes = 1

    # Points of the nodes still being split, grouped contiguously per node.
    order = np.arange(n)
    node_ids = np.array([0])
    lens = np.array([n])

    for level in range(height_limit):
        keep = lens > 1
        if not keep.any():
            break
        if not keep.all():
            seg = np.repeat(np.arange(len(lens)), lens)
            order = order[keep[seg]]
            node_ids, lens = node_ids[keep], lens[keep]
        starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
        Xo = X[order]
        lo = np.minimum.reduceat(Xo, starts, axis=0)
        hi = np.maximum.reduceat(Xo, starts, axis=0)
        # A dimension is splittable only if some float lies strictly inside.
        nonconst = np.nextafter(lo, np.inf) < hi
        counts = nonconst.sum(axis=1)
        splittable = counts > 0
        if not splittable.all():
            seg = np.repeat(np.arange(len(lens)), lens)
            Xo = Xo[splittable[seg]]
            order = order[splittable[seg]]
            node_ids, lens = node_ids[splittable], lens[splittable]
            lo, hi = lo[splittable], hi[splittable]
            nonconst, counts = nonconst[splittable], counts[splittable]
            if len(lens) == 0:
                break
        m = len(lens)
        rows = np.arange(m)
        pick = np.minimum((rng.random(m) * counts).astype(np.intp), counts - 1)
        q = np.argmax(np.cumsum(nonconst, axis=1) > pick[:, None], axis=1)
        q_lo, q_hi = lo[rows, q], hi[rows, q]
        split = q_lo + rng.random(m) * (q_hi - q_lo)
        bad = ~((q_lo < split) & (split < q_hi))
        while bad.any():
            split[bad] = q_lo[bad] + rng.random(int(bad.sum())) * (q_hi[bad] - q_lo[bad])
            bad = ~((q_lo < split) & (split < q_hi))

        seg = np.repeat(rows, lens)
        goes_left = Xo[np.arange(len(Xo)), q[seg]] < split[seg]
        n_left = np.bincount(seg, weights=goes_left, minlength=m).astype(np.intp)

        left_ids = n_nodes + 2 * rows
        right_ids = left_ids + 1
        feature[node_ids] = q
        threshold[node_ids] = split
        left[node_ids] = left_ids
        right[node_ids] = right_ids
        size[left_ids] = n_left
        size[right_ids] = lens - n_left
        depth[left_ids] = depth[right_ids] = level + 1
        n_nodes += 2 * m

        regroup = np.argsort(2 * seg + ~goes_left, kind="stable")
        order = order[regroup]
        node_ids = np.column_stack((left_ids, right_ids)).ravel()
        lens = np.column_stack((n_left, lens - n_left)).ravel()

    return IsolationTree(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        size=size[:n_nodes].copy(),
        depth=depth[:n_nodes].copy(),
        height_limit=height_limit,
    )


def path_length(tree: IsolationTree, x: np.ndarray) -> float:
    """Edges from the root to ``x``'s external node plus ``d(size)`` there."""
    return float(tree.path_lengths(np.asarray(x, dtype=float).reshape(1, -1))[0])


def anomaly_score(mean_path: float | np.ndarray, omega: int) -> float | np.ndarray:
    """``2 ** (-mean_path / d(omega))``; 1 means isolated at the root."""
    return np.exp2(-np.asarray(mean_path, dtype=float) / avg_path_d(omega))


@dataclass(frozen=True)
class ScoredPoint:
    t: int
    score: float
    is_anomaly: bool
    mean_path: float


@dataclass(frozen=True)
class ForestBuffer:
    """Fixed-length ring of trees; ``start`` is the next slot to replace."""

    trees: tuple[IsolationTree, ...]
    start: int = 0

    def __len__(self) -> int:
        return len(self.trees)

    @classmethod
    def build(
        cls, window: np.ndarray, n_tree: int, height_limit: int, rng: np.random.Generator
    ) -> ForestBuffer:
        return cls(tuple(build_itree(window, height_limit, rng) for _ in range(n_tree)))

    def mean_path(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.path_lengths(X)
        return total / len(self.trees)


def score_window(
    buffer: ForestBuffer,
    window: np.ndarray,
    t0: int = 0,
    omega: int | None = None,
    score_threshold: float = 0.5,
) -> list[ScoredPoint]:
    """Score each row of an already-normalized window against every tree.

    ``omega`` is the build sample size used for score normalization; it
    defaults to the window length.
    """
    window = np.asarray(window, dtype=float)
    omega = len(window) if omega is None else omega
    mean_path = buffer.mean_path(window)
    scores = anomaly_score(mean_path, omega)
    return [
        ScoredPoint(t0 + i, float(s), bool(s > score_threshold), float(h))
        for i, (s, h) in enumerate(zip(scores.tolist(), mean_path.tolist()))
    ]


def refresh(
    buffer: ForestBuffer,
    window: np.ndarray,
    k_tree: int,
    rng: np.random.Generator,
    height_limit: int | None = None,
) -> ForestBuffer:
    """Replace the ``k_tree`` oldest trees with trees grown on ``window``."""
    n_tree = len(buffer)
    if not 1 <= k_tree <= n_tree:
        raise ValueError(f"need 1 <= k_tree <= {n_tree}, got {k_tree}")
    if height_limit is None:
        height_limit = math.ceil(math.log2(len(window)))
    trees = list(buffer.trees)
    s = buffer.start
    for _ in range(k_tree):
        trees[s] = build_itree(window, height_limit, rng)
        s = (s + 1) % n_tree
    return ForestBuffer(tuple(trees), s)


def _as_row(item: TimeStepVector | np.ndarray, fallback_t: int) -> tuple[int, np.ndarray]:
    if isinstance(item, TimeStepVector):
        return item.t, item.values
    return fallback_t, np.asarray(item, dtype=float)


def process_stream(
    vectors: Iterable[TimeStepVector | np.ndarray], params: Tier2Params
) -> Iterator[ScoredPoint]:
    """Score a stream of vectors window by window.

    The first window seeds the forest and is scored against it. Each later
    full window is scored and then used to refresh ``k_tree`` trees. A trailing
    partial window is scored without a refresh.

    Raises:
        StreamTooShort: if fewer than ``omega`` vectors arrive.
    """
    rng = np.random.default_rng(params.rng_seed)
    omega = params.omega
    h = params.height_limit
    buffer: ForestBuffer | None = None
    rows: list[np.ndarray] = []
    times: list[int] = []
    seen = 0
    n_refresh = 0

    def emit(window: np.ndarray) -> Iterator[ScoredPoint]:
        mean_path = buffer.mean_path(window)
        scores = anomaly_score(mean_path, omega)
        for t, s, m in zip(times, scores.tolist(), mean_path.tolist()):
            yield ScoredPoint(t, s, s > params.score_threshold, m)

    for item in vectors:
        t, row = _as_row(item, seen)
        rows.append(row)
        times.append(t)
        seen += 1
        if len(rows) < omega:
            continue
        window = normalize_window(np.vstack(rows))
        if buffer is None:
            buffer = ForestBuffer.build(window, params.n_tree, h, rng)
            yield from emit(window)
        else:
            yield from emit(window)
            buffer = refresh(buffer, window, params.k_tree, rng, h)
            n_refresh += 1
        rows.clear()
        times.clear()

    if buffer is None:
        logger.warning("stream too short: %d vectors, omega=%d", seen, omega)
        raise StreamTooShort(seen, omega)
    if rows:
        yield from emit(normalize_window(np.vstack(rows)))
    logger.debug("scored %d vectors with %d refreshes", seen, n_refresh)


def alarm_intervals(points: Iterable[ScoredPoint]) -> list[tuple[int, int]]:
    """Collapse runs of consecutive flagged steps into ``(t_start, t_end)``."""
    runs: list[tuple[int, int]] = []
    start = prev = None
    for p in points:
        if p.is_anomaly and start is not None and p.t == prev + 1:
            prev = p.t
            continue
        if start is not None:
            runs.append((start, prev))
            start = prev = None
        if p.is_anomaly:
            start = prev = p.t
    if start is not None:
        runs.append((start, prev))
    return runs
