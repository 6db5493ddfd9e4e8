"""Length-metric-space primitives on sampled data.

Points are numpy vectors.  A :class:`MetricSpace` wraps a distance function;
curves are represented by :class:`Polyline` objects whose length is the sum of
segment distances.  Infinite distances are ``math.inf``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

EPS_METRIC = 1e-9
INF = math.inf

Point = np.ndarray


@dataclass(frozen=True)
class MetricSpace:
    """A metric space given by its distance function.

    ``dist_matrix`` is an optional vectorized form returning the
    ``len(A) x len(B)`` matrix of distances and ``paired_fn`` the row-wise
    distances ``d(A[i], B[i])``; when absent both are built from ``dist``.
    """

    dist: Callable[[Point, Point], float]
    point_dim: int
    dist_matrix_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = "metric"
    paired_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def paired(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.paired_fn is not None:
            return np.asarray(self.paired_fn(A, B), dtype=float)
        return np.array([self.dist(a, b) for a, b in zip(A, B)], dtype=float)

    def dist_matrix(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.dist_matrix_fn is not None:
            return self.dist_matrix_fn(A, B)
        out = np.empty((len(A), len(B)))
        for i, a in enumerate(A):
            for j, b in enumerate(B):
                out[i, j] = self.dist(a, b)
        return out


def euclidean(dim: int) -> MetricSpace:
    def dist(x, y):
        return float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))

    def dist_matrix(A, B):
        return np.linalg.norm(A[:, None, :] - B[None, :, :], axis=-1)

    def paired(A, B):
        return np.linalg.norm(A - B, axis=-1)

    return MetricSpace(dist, dim, dist_matrix, name=f"R^{dim}", paired_fn=paired)


@dataclass(frozen=True)
class Polyline:
    """Finite sample of a curve ``c: [a, b] -> X``."""

    points: np.ndarray
    space: MetricSpace = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if len(pts) < 2:
            raise ValueError("a polyline needs at least 2 points")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def first(self) -> Point:
        return self.points[0]

    @property
    def last(self) -> Point:
        return self.points[-1]

    def segment_lengths(self) -> np.ndarray:
        return self.space.paired(self.points[:-1], self.points[1:])

    def reversed(self) -> "Polyline":
        return Polyline(self.points[::-1].copy(), self.space)

    def sub(self, start: int, stop: int) -> "Polyline":
        return Polyline(self.points[start:stop], self.space)


def concatenate(c1: Polyline, c2: Polyline) -> Polyline:
    """Join two polylines; ``c2`` must start where ``c1`` ends."""
    if c1.space.dist(c1.last, c2.first) > EPS_METRIC:
        raise ValueError("polylines do not share an endpoint")
    return Polyline(np.vstack([c1.points, c2.points[1:]]), c1.space)


def polyline_length(c: Polyline) -> float:
    """Sum of segment distances.

    Exact when every segment is a shortest path, a lower bound for the
    supremum over partitions otherwise.  Any infinite segment makes the
    whole length infinite.
    """
    seg = c.segment_lengths()
    if not np.all(np.isfinite(seg)):
        return INF
    return float(seg.sum())


def _index_of(samples: np.ndarray, x) -> int:
    x = np.asarray(x, dtype=float).reshape(-1)
    hits = np.flatnonzero(np.all(np.abs(samples - x) <= 1e-12, axis=1))
    if len(hits) == 0:
        raise ValueError(f"point {x} is not among the samples")
    return int(hits[0])


def graph_distances(space: MetricSpace, samples, adjacency, sources=None) -> np.ndarray:
    """Shortest-path distances in the sample graph weighted by ``space.dist``.

    Returns an array of shape ``(len(sources), len(samples))`` (all sources
    when ``sources`` is None); unreachable entries are ``inf``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    edges = np.asarray(adjacency, dtype=int).reshape(-1, 2)
    n = len(samples)
    if len(edges):
        w = np.array([space.dist(samples[i], samples[j]) for i, j in edges])
        # csgraph treats explicit zeros as missing edges
        w = np.where(w == 0.0, 1e-300, w)
        graph = coo_matrix((w, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
    else:
        graph = coo_matrix((n, n)).tocsr()
    return dijkstra(graph, directed=False, indices=sources)


def induced_length_metric(space: MetricSpace, samples, adjacency, x, y) -> float:
    """Graph approximation of the induced length metric between two samples."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    i = _index_of(samples, x)
    j = _index_of(samples, y)
    d = graph_distances(space, samples, adjacency, sources=[i])[0, j]
    return float(d) if math.isfinite(d) else INF


def is_shortest_path(c: Polyline, tol: float = EPS_METRIC) -> bool:
    return polyline_length(c) <= c.space.dist(c.first, c.last) + tol


def is_geodesic(c: Polyline, window: int, tol: float = EPS_METRIC) -> bool:
    """Local minimality: every run of ``window`` consecutive points is a shortest path."""
    if window < 2:
        raise ValueError("window must be >= 2")
    w = min(window, len(c))
    return all(is_shortest_path(c.sub(i, i + w), tol) for i in range(len(c) - w + 1))


@dataclass
class ConvexityReport:
    is_convex: bool
    witness_pair: Optional[tuple] = None
    max_gap: float = 0.0
    pairs_checked: int = 0
    geodesics: list = field(default_factory=list)

    def __post_init__(self):
        if not self.is_convex and self.witness_pair is None:
            raise ValueError("a failed convexity report needs a witness pair")


GeodesicOracle = Callable[[Point, Point], Sequence[Polyline]]


def euclidean_geodesics(step: float) -> GeodesicOracle:
    """Oracle returning the straight segment, sampled at spacing <= ``step``."""

    def oracle(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        n = max(1, int(math.ceil(np.linalg.norm(y - x) / step)))
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        return [Polyline(x + t * (y - x), euclidean(len(x)))]

    return oracle


def _sample_pairs(n: int, max_pairs: Optional[int], seed: int):
    pairs = list(itertools.combinations(range(n), 2))
    if max_pairs is not None and len(pairs) > max_pairs:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(pairs), size=max_pairs, replace=False))
        pairs = [pairs[k] for k in keep]
    return pairs


def check_convex_subset(
    space: MetricSpace,
    subset_samples,
    geodesic_oracle: GeodesicOracle,
    tol: float,
    weak: bool = False,
    max_pairs: Optional[int] = None,
    seed: int = 0,
    keep_geodesics: int = 0,
) -> ConvexityReport:
    """Test the geodesic-containment characterization of convexity.

    A pair passes when one of the oracle's paths stays within ``tol`` of the
    sample set at every waypoint.  With ``weak=False`` only the oracle's
    minimizing paths are eligible; with ``weak=True`` any geodesic it returns
    counts.  ``max_gap`` is the largest, over pairs, of the smallest waypoint
    deviation achieved by an eligible path.
    """
    S = np.atleast_2d(np.asarray(subset_samples, dtype=float))
    max_gap = 0.0
    witness = None
    kept = []
    pairs = _sample_pairs(len(S), max_pairs, seed)
    for i, j in pairs:
        paths = geodesic_oracle(S[i], S[j])
        if not weak:
            paths = list(paths)
            if not paths:
                raise ValueError("no geodesic found")
            lengths = [polyline_length(c) for c in paths]
            best = min(lengths)
            paths = [c for c, l in zip(paths, lengths) if l <= best + tol]
        best_gap = INF
        best_path = None
        for c in paths:
            gap = float(space.dist_matrix(c.points, S).min(axis=1).max())
            if gap < best_gap:
                best_gap, best_path = gap, c
            if gap <= tol:
                break
        if best_path is None:
            raise ValueError("no geodesic found")
        max_gap = max(max_gap, best_gap)
        if best_gap > tol and witness is None:
            witness = (S[i].copy(), S[j].copy())
        if len(kept) < keep_geodesics and best_path is not None:
            kept.append(best_path)
    return ConvexityReport(
        is_convex=witness is None,
        witness_pair=witness,
        max_gap=max_gap,
        pairs_checked=len(pairs),
        geodesics=kept,
    )
