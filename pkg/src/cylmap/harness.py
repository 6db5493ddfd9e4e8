"""Empirical local-to-global checks for sampled maps into flat cylinders.

A :class:`SampledMap` is a graph of domain samples with target values in a
cylinder ``R^k / H`` (``H`` trivial for Euclidean targets).  From it we build
the quotient by connected components of fibers, its induced length metric,
the per-point local conditions (fiber connectedness, openness onto the
image, local convexity) and the global weak-convexity verdict.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, identity
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .cylinder import ClosedSubgroup, _box, geodesic_oracle
from .metric import INF, ConvexityReport, check_convex_subset, euclidean, euclidean_geodesics

log = logging.getLogger(__name__)

LOI_COVERAGE = 0.95
WEAK_COEFF_BOUND = 3


@dataclass
class SampledMap:
    domain_points: np.ndarray
    edges: np.ndarray
    values: np.ndarray
    target: ClosedSubgroup
    boundary: Optional[np.ndarray] = None

    def __post_init__(self):
        self.domain_points = np.atleast_2d(np.asarray(self.domain_points, dtype=float))
        n = len(self.domain_points)
        self.values = self.target.canonical(np.asarray(self.values, dtype=float).reshape(n, -1))
        E = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        if len(E) and (E.min() < 0 or E.max() >= n):
            raise ValueError("adjacency references a missing point")
        E = E[E[:, 0] != E[:, 1]]
        self.edges = np.unique(np.sort(E, axis=1), axis=0) if len(E) else E
        if self.boundary is None:
            self.boundary = np.zeros(n, dtype=bool)
        self.boundary = np.asarray(self.boundary, dtype=bool)

    def __len__(self):
        return len(self.domain_points)

    @property
    def space(self):
        return self.target.space

    def adjacency(self) -> csr_matrix:
        n = len(self)
        E = self.edges
        data = np.ones(2 * len(E))
        rows = np.concatenate([E[:, 0], E[:, 1]])
        cols = np.concatenate([E[:, 1], E[:, 0]])
        return coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    @property
    def n_graph_components(self) -> int:
        return int(connected_components(self.adjacency(), directed=False)[0])

    def edge_image_lengths(self) -> np.ndarray:
        if len(self.edges) == 0:
            return np.zeros(0)
        return self.target.distances(self.values[self.edges[:, 0]], self.values[self.edges[:, 1]])

    def default_eps_fiber(self) -> float:
        lengths = self.edge_image_lengths()
        lengths = lengths[lengths > 1e-9]
        return 0.25 * float(lengths.min()) if len(lengths) else 1e-9

    def mesh_spacing(self) -> float:
        lengths = self.edge_image_lengths()
        return float(lengths.max()) if len(lengths) else 0.0


@dataclass
class FiberQuotient:
    component_id: np.ndarray
    fiber_key: np.ndarray
    quotient_graph: csr_matrix
    component_fiber: np.ndarray
    component_value: np.ndarray
    bucket_value: np.ndarray
    eps_fiber: float
    cut_edges: int = 0
    warnings: list = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return len(self.component_fiber)

    @property
    def n_fibers(self) -> int:
        return len(self.bucket_value)


def _neighbour_pairs(values: np.ndarray, target: ClosedSubgroup, radius: float) -> np.ndarray:
    """Index pairs with quotient distance <= radius (radius below injectivity)."""
    n = len(values)
    if target.rank:
        shifts = target.lattice_points(_box(-np.ones(target.rank), np.ones(target.rank)))
    else:
        shifts = np.zeros((1, target.ambient_dim))
    tree = cKDTree((values[None, :, :] + shifts[:, None, :]).reshape(-1, target.ambient_dim))
    pairs = tree.query_pairs(radius, output_type="ndarray") % n
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return pairs


def _labels(n: int, pairs: np.ndarray) -> np.ndarray:
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(graph, directed=False)[1]


def build_fiber_quotient(
    f: SampledMap, eps_fiber: Optional[float] = None, max_components: Optional[int] = None
) -> FiberQuotient:
    """Label connected components of the (bucketed) fibers of ``f``.

    Values are bucketed by single linkage at ``eps_fiber``.  Two adjacent
    samples belong to one component when their values are within
    ``eps_fiber`` of each other; same-bucket edges spanning a larger gap are
    cut rather than merged.
    """
    eps = f.default_eps_fiber() if eps_fiber is None else float(eps_fiber)
    if eps <= 0:
        raise ValueError("eps_fiber must be positive")
    if eps >= f.target.injectivity_radius():
        raise ValueError("eps_fiber must be below the target injectivity radius")
    n = len(f)
    bucket = _labels(n, _neighbour_pairs(f.values, f.target, eps))
    E = f.edges
    d = f.edge_image_lengths()
    same = bucket[E[:, 0]] == bucket[E[:, 1]] if len(E) else np.zeros(0, bool)
    joined = same & (d <= eps)
    comp = _labels(n, E[joined]) if len(E) else np.arange(n)
    warnings = []
    cut = int(np.count_nonzero(same & ~joined))
    if cut:
        warnings.append(f"{cut} same-fiber edges cut (value gap above eps_fiber)")
    n_comp = int(comp.max()) + 1
    first = np.full(n_comp, -1)
    first[comp[::-1]] = np.arange(n)[::-1]
    cross = comp[E[:, 0]] != comp[E[:, 1]] if len(E) else np.zeros(0, bool)
    ca, cb, w = comp[E[cross, 0]], comp[E[cross, 1]], d[cross]
    graph = csr_matrix((n_comp, n_comp))
    if len(w):
        lo, hi = np.minimum(ca, cb), np.maximum(ca, cb)
        key = lo * n_comp + hi
        order = np.lexsort((w, key))
        key, w = key[order], w[order]
        keep = np.concatenate([[True], key[1:] != key[:-1]])
        lo, hi, w = key[keep] // n_comp, key[keep] % n_comp, w[keep]
        graph = coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
            shape=(n_comp, n_comp),
        ).tocsr()
    n_buckets = int(bucket.max()) + 1
    bfirst = np.full(n_buckets, -1)
    bfirst[bucket[::-1]] = np.arange(n)[::-1]
    if max_components is not None and n_comp > max_components:
        warnings.append(f"fiber fragmentation: {n_comp} components exceed bound {max_components}")
    for msg in warnings:
        log.warning(msg)
    return FiberQuotient(
        component_id=comp,
        fiber_key=bucket,
        quotient_graph=graph,
        component_fiber=bucket[first],
        component_value=f.values[first],
        bucket_value=f.values[bfirst],
        eps_fiber=eps,
        cut_edges=cut,
        warnings=warnings,
    )


def dtilde_matrix(q: FiberQuotient, sources=None) -> np.ndarray:
    """Induced length metric between fiber components (``inf`` if unreachable)."""
    return dijkstra(q.quotient_graph, directed=False, indices=sources)


def dtilde(q: FiberQuotient, a: int, b: int) -> float:
    d = float(dtilde_matrix(q, [a])[0, b])
    return d if math.isfinite(d) else INF


@dataclass
class LocalConditionsReport:
    lfc: np.ndarray
    loi: np.ndarray
    lcd: np.ndarray
    radius: np.ndarray
    skipped: np.ndarray
    boundary: np.ndarray
    near_boundary: np.ndarray
    witnesses: dict = field(default_factory=dict)
    radius_hops: int = 1

    @property
    def passed(self) -> np.ndarray:
        return self.lfc & self.loi & self.lcd

    def interior_pass_fraction(self) -> float:
        interior = ~self.boundary & ~self.skipped
        if not interior.any():
            return 1.0
        return float(self.passed[interior].mean())

    def failures_near_boundary(self) -> bool:
        failed = ~self.passed & ~self.skipped
        return bool(np.all(self.near_boundary[failed]))

    def summary(self, max_witnesses: int = 5) -> dict:
        counted = ~self.skipped
        return {
            "points": int(len(self.lfc)),
            "skipped": int(self.skipped.sum()),
            "radius_hops": self.radius_hops,
            "lfc_pass": int((self.lfc & counted).sum()),
            "loi_pass": int((self.loi & counted).sum()),
            "lcd_pass": int((self.lcd & counted).sum()),
            "all_pass": int((self.passed & counted).sum()),
            "interior_pass_fraction": self.interior_pass_fraction(),
            "failures_near_boundary": self.failures_near_boundary(),
            "witnesses": {k: v[:max_witnesses] for k, v in self.witnesses.items()},
        }


def _ball_matrices(A: csr_matrix, hops: int):
    step = (A + identity(A.shape[0], format="csr")).astype(bool).astype(np.int8)
    inner = identity(A.shape[0], format="csr", dtype=np.int8)
    ball = inner
    for _ in range(hops):
        inner = ball
        ball = (ball @ step).astype(bool).astype(np.int8)
    return ball.tocsr(), inner.tocsr()


def check_local_conditions(
    f: SampledMap,
    q: FiberQuotient,
    radius_hops: int = 2,
    tol_convexity: Optional[float] = None,
    coverage_threshold: float = LOI_COVERAGE,
) -> LocalConditionsReport:
    """Per-point (LFC), (LOI) and (LCD) checks on graph balls of ``radius_hops``.

    LFC: the ball meets at most one component of each fiber.
    LOI: image samples within ``rho`` of ``f(x)`` lie within half a local
    image edge of ``f(U)``, for at least ``coverage_threshold`` of them, where
    ``rho`` is half the image distance from ``f(x)`` to the ball's boundary
    (same-fiber boundary points excluded).
    LCD: ``f(U)`` passes :func:`check_convex_subset` with minimizing target
    geodesics at ``tol_convexity`` (default: twice the largest image edge in
    the ball).
    """
    if radius_hops < 1:
        raise ValueError("radius_hops must be >= 1")
    n = len(f)
    A = f.adjacency()
    ball, inner = _ball_matrices(A, radius_hops)
    degree = np.diff(A.indptr)
    skipped = degree == 0
    if skipped.any():
        log.warning("%d isolated points skipped", int(skipped.sum()))
    near_boundary = f.boundary | (A @ f.boundary.astype(float) > 0)

    edge_len = f.edge_image_lengths()
    E = f.edges
    # largest image edge incident to each point
    incident = np.zeros(n)
    if len(E):
        np.maximum.at(incident, E[:, 0], edge_len)
        np.maximum.at(incident, E[:, 1], edge_len)

    H = f.target
    reps = q.bucket_value
    if H.rank:
        shifts = H.lattice_points(_box(-np.ones(H.rank), np.ones(H.rank)))
    else:
        shifts = np.zeros((1, H.ambient_dim))
    aug = (reps[None, :, :] + shifts[:, None, :]).reshape(-1, H.ambient_dim)
    tree = cKDTree(aug)
    nb = len(reps)

    lfc = np.ones(n, bool)
    loi = np.ones(n, bool)
    lcd = np.ones(n, bool)
    rho = np.zeros(n)
    witnesses = {"lfc": [], "loi": [], "lcd": []}
    lcd_cache: dict = {}
    loi_cache: dict = {}
    bucket, comp = q.fiber_key, q.component_id

    for x in range(n):
        if skipped[x]:
            continue
        U = ball.indices[ball.indptr[x] : ball.indptr[x + 1]]
        Ui = inner.indices[inner.indptr[x] : inner.indptr[x + 1]]
        bd = np.setdiff1d(U, Ui, assume_unique=True)
        ub = bucket[U]
        # LFC
        pairs = np.unique(np.stack([ub, comp[U]], axis=1), axis=0)
        dup = np.flatnonzero(np.diff(pairs[:, 0]) == 0)
        if len(dup):
            lfc[x] = False
            k = dup[0]
            witnesses["lfc"].append(
                {"point": int(x), "components": [int(pairs[k, 1]), int(pairs[k + 1, 1])]}
            )
        ubs = np.unique(ub)
        spacing = float(incident[U].max())
        # LOI
        bb = np.unique(bucket[bd]) if len(bd) else np.zeros(0, int)
        key = (int(bucket[x]), ubs.tobytes(), bb.tobytes(), spacing)
        if key not in loi_cache:
            loi_cache[key] = _loi(H, reps, tree, nb, int(bucket[x]), ubs, bb, q.eps_fiber, spacing, coverage_threshold)
        ok, r, miss = loi_cache[key]
        rho[x] = r
        if not ok:
            loi[x] = False
            witnesses["loi"].append({"point": int(x), "uncovered": miss.tolist()})
        # LCD
        tol = 2.0 * spacing if tol_convexity is None else tol_convexity
        key = (ubs.tobytes(), tol)
        if key not in lcd_cache:
            lcd_cache[key] = _lcd(H, reps[ubs], tol)
        rep = lcd_cache[key]
        if not rep.is_convex:
            lcd[x] = False
            witnesses["lcd"].append(
                {"point": int(x), "pair": [np.asarray(p).tolist() for p in rep.witness_pair], "gap": rep.max_gap}
            )
    return LocalConditionsReport(
        lfc, loi, lcd, rho, skipped, f.boundary.copy(), near_boundary, witnesses, radius_hops
    )


def _loi(H, reps, tree, nb, center, ubs, bb, eps, spacing, threshold):
    fx = reps[center]
    bb = bb[bb != center]
    if len(bb) == 0:
        return True, 0.0, None
    dists = H.distances(np.repeat(fx[None, :], len(bb), axis=0), reps[bb])
    dists = dists[dists > eps]
    if len(dists) == 0:
        return True, 0.0, None
    r = 0.5 * float(dists.min())
    near = np.unique(np.asarray(tree.query_ball_point(fx, r * (1 + 1e-9)), dtype=int) % nb)
    if len(near) == 0:
        return True, r, None
    cover_tol = max(0.5 * spacing, eps)
    d = H.distance_matrix(reps[near], reps[ubs]).min(axis=1)
    covered = d <= cover_tol
    if covered.mean() >= threshold:
        return True, r, None
    return False, r, reps[near[~covered][0]]


def _lcd(H, S, tol) -> ConvexityReport:
    if len(S) < 2:
        return ConvexityReport(True)
    step = max(tol, 1e-12) / 2
    L = H.local_lift(S)
    if L is not None:
        # unique minimizing geodesics: straight segments in the chart
        return check_convex_subset(euclidean(H.ambient_dim), L, euclidean_geodesics(step), tol)
    return check_convex_subset(H.space, S, geodesic_oracle(H, step), tol)


def verify_weak_convexity(
    f: SampledMap,
    tol: Optional[float] = None,
    coeff_bound: int = WEAK_COEFF_BOUND,
    q: Optional[FiberQuotient] = None,
    max_pairs: Optional[int] = None,
    seed: int = 0,
    keep_geodesics: int = 8,
) -> ConvexityReport:
    """Every pair of image samples joined by some target geodesic near the image.

    Minimizing geodesics are tried first, then longer ones through lattice
    shifts up to ``coeff_bound``.  ``tol`` defaults to twice the largest image
    edge.
    """
    if tol is None:
        tol = 2.0 * f.mesh_spacing()
    if q is not None:
        S = q.bucket_value
    else:
        S = np.unique(np.round(f.values, 12), axis=0)
    oracle = geodesic_oracle(f.target, max(tol, 1e-12) / 2, coeff_bound=coeff_bound)
    return check_convex_subset(
        f.space, S, oracle, tol, weak=True, max_pairs=max_pairs, seed=seed, keep_geodesics=keep_geodesics
    )


def fiber_connectivity_report(q: FiberQuotient) -> dict:
    """Histogram of connected components per fiber."""
    counts = np.bincount(q.component_fiber, minlength=q.n_fibers)
    values, freq = np.unique(counts, return_counts=True)
    flagged = np.flatnonzero(counts > 1)
    return {
        "histogram": {str(int(v)): int(c) for v, c in zip(values, freq)},
        "fibers": int(q.n_fibers),
        "components": int(q.n_components),
        "flagged_fibers": int(len(flagged)),
        "all_connected": bool(len(flagged) == 0),
    }
