"""Flat cylinders ``R^n / H`` for a closed subgroup ``H = V + Lambda``.

``V`` is a linear subspace (the identity component of ``H``) and ``Lambda``
a lattice, discrete modulo ``V``.  The quotient carries the flat metric
pushed down from ``R^n``; distances reduce to closest-vector problems in the
lattice projected off ``V``, solved here by bounded enumeration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .metric import EPS_METRIC, INF, MetricSpace, Polyline

MAX_LATTICE_RANK = 4
DEFAULT_EPS_GAP = 1e-7


class LatticeNotDiscrete(ValueError):
    pass


def _norms(X: np.ndarray) -> np.ndarray:
    # single reduction path shared by every distance evaluation in this module
    return np.sqrt((X * X).sum(axis=-1))


def _box(lo, hi) -> np.ndarray:
    """All integer vectors ``c`` with ``lo <= c <= hi`` componentwise."""
    ranges = [range(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*ranges)), dtype=float).reshape(-1, len(ranges))


class ClosedSubgroup:
    """Closed subgroup of ``(R^n, +)`` given as subspace basis plus lattice basis."""

    def __init__(self, ambient_dim: int, subspace_basis=(), lattice_basis=()):
        n = int(ambient_dim)
        V = np.asarray(subspace_basis, dtype=float).reshape(-1, n)
        B = np.asarray(lattice_basis, dtype=float).reshape(-1, n)
        if len(B) > MAX_LATTICE_RANK:
            raise ValueError(f"lattice rank {len(B)} exceeds supported {MAX_LATTICE_RANK}")
        stacked = np.vstack([V, B])
        if len(stacked) and np.linalg.matrix_rank(stacked, tol=1e-10) < len(stacked):
            raise ValueError("subspace and lattice generators are linearly dependent")
        self.ambient_dim = n
        self.subspace_basis = V
        self.lattice_basis = B
        if len(V):
            Q, _ = np.linalg.qr(V.T)
            self._Q = Q
        else:
            self._Q = np.zeros((n, 0))
        self._L = self.complement(B) if len(B) else np.zeros((0, n))
        if len(B):
            self._gram = self._L @ self._L.T
            self._gram_inv = np.linalg.inv(self._gram)
        if len(B) and self.shortest_vector_norm <= EPS_METRIC:
            raise LatticeNotDiscrete("lattice part not discrete")

    # construction helpers
    @classmethod
    def trivial(cls, n: int) -> "ClosedSubgroup":
        return cls(n)

    @classmethod
    def from_periods(cls, periods) -> "ClosedSubgroup":
        """Diagonal lattice; an infinite period leaves that axis a line."""
        periods = list(periods)
        n = len(periods)
        rows = [p * np.eye(n)[i] for i, p in enumerate(periods) if math.isfinite(p)]
        return cls(n, lattice_basis=rows)

    @property
    def rank(self) -> int:
        return len(self.lattice_basis)

    @property
    def cylinder_dims(self) -> tuple[int, int]:
        """``(a, b)`` with the quotient isomorphic to ``R^a x T^b``."""
        b = self.rank
        return self.ambient_dim - len(self.subspace_basis) - b, b

    def complement(self, X) -> np.ndarray:
        """Orthogonal projection off the subspace part."""
        X = np.asarray(X, dtype=float)
        if self._Q.shape[1] == 0:
            return X.copy()
        return X - (X @ self._Q) @ self._Q.T

    def lattice_points(self, coeffs) -> np.ndarray:
        """``sum_i c_i L_i`` for rows of ``coeffs``, with ``L`` the projected basis."""
        C = np.atleast_2d(np.asarray(coeffs, dtype=float))
        out = np.zeros((len(C), self.ambient_dim))
        for i in range(self.rank):
            out = out + C[:, i, None] * self._L[i]
        return out

    def lattice_coords(self, Y) -> np.ndarray:
        """Real coordinates of the projection of ``Y`` onto span of the lattice."""
        return (np.asarray(Y, float) @ self._L.T) @ self._gram_inv

    # canonical representatives
    def canonical(self, mus) -> np.ndarray:
        Y = self.complement(np.atleast_2d(np.asarray(mus, dtype=float)))
        if self.rank == 0:
            return Y
        c = self.lattice_coords(Y)
        frac = c - np.floor(c)
        frac[frac >= 1.0] = 0.0
        return Y - self.lattice_points(c) + self.lattice_points(frac)

    # closest vector enumeration
    def _candidate_box(self, c0: np.ndarray, radius: float):
        # |c_i - c0_i| <= radius * sqrt(Ginv_ii) for any lift no longer than radius
        r = np.floor(radius * np.sqrt(np.diag(self._gram_inv)) + 1e-12)
        return np.floor(c0), _box(-r, r + 1)

    def min_lifts(self, D) -> tuple[np.ndarray, np.ndarray]:
        """Minimal ``|d - h|`` over ``h`` in the lattice for each row ``d``.

        Returns the norms and the minimizing integer coefficients (ties go to
        the lexicographically smallest coefficient vector).
        """
        D = self.complement(np.atleast_2d(np.asarray(D, dtype=float)))
        if self.rank == 0:
            return _norms(D), np.zeros((len(D), 0), dtype=int)
        c0 = self.lattice_coords(D)
        babai = np.round(c0)
        upper = _norms(D - self.lattice_points(babai))
        norms = np.empty(len(D))
        coeffs = np.empty((len(D), self.rank), dtype=int)
        order = np.argsort(upper)
        # group rows by bound so one wide row does not inflate the whole batch
        for chunk in np.array_split(order, max(1, len(D) // 4096)):
            if len(chunk) == 0:
                continue
            base, offsets = self._candidate_box(c0[chunk], float(upper[chunk].max()))
            H = self.lattice_points(offsets)
            rows = D[chunk] - self.lattice_points(base)
            step = max(1, 200_000 // len(offsets))
            for start in range(0, len(chunk), step):
                sl = slice(start, start + step)
                nrm = _norms(rows[sl, None, :] - H[None, :, :])
                k = nrm.argmin(axis=1)
                norms[chunk[sl]] = nrm[np.arange(len(k)), k]
                coeffs[chunk[sl]] = (base[sl] + offsets[k]).astype(int)
        return norms, coeffs

    @cached_property
    def shortest_vector_norm(self) -> float:
        if self.rank == 0:
            return INF
        R = float(_norms(self._L).min())
        r = R * np.sqrt(np.diag(self._gram_inv)) + 1e-12
        C = _box(-np.floor(r), np.floor(r))
        C = C[np.any(C != 0, axis=1)]
        return float(_norms(self.lattice_points(C)).min())

    def injectivity_radius(self) -> float:
        return 0.5 * self.shortest_vector_norm

    # metric
    def distances(self, A, B) -> np.ndarray:
        """Row-wise quotient distances between representatives ``A[i]`` and ``B[i]``."""
        A = np.atleast_2d(np.asarray(A, float))
        B = np.atleast_2d(np.asarray(B, float))
        return self.min_lifts(A - B)[0]

    def distance_matrix(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, float))
        B = np.atleast_2d(np.asarray(B, float))
        D = (A[:, None, :] - B[None, :, :]).reshape(-1, self.ambient_dim)
        return self.min_lifts(D)[0].reshape(len(A), len(B))

    @cached_property
    def space(self) -> MetricSpace:
        def dist(x, y):
            return float(self.distances(x, y)[0])

        return MetricSpace(
            dist, self.ambient_dim, self.distance_matrix, name="cylinder", paired_fn=self.distances
        )

    def local_lift(self, S) -> Optional[np.ndarray]:
        """Representatives of ``S`` in one chart around ``S[0]``, if ``S`` is that small.

        Returns ``None`` unless every pairwise distance of the lifted points
        is below the injectivity radius, in which case minimizing geodesics
        between points of ``S`` are the straight segments between the lifts.
        """
        S = np.atleast_2d(np.asarray(S, dtype=float))
        D = S - S[0]
        _, coeffs = self.min_lifts(D)
        L = S[0] + self.complement(D) - self.lattice_points(coeffs)
        diam = _norms(L[:, None, :] - L[None, :, :]).max()
        return L if diam < self.injectivity_radius() else None

    def to_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "subspace_basis": self.subspace_basis.tolist(),
            "lattice_basis": self.lattice_basis.tolist(),
            "cylinder_dims": list(self.cylinder_dims),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClosedSubgroup":
        return cls(d["ambient_dim"], d.get("subspace_basis", ()), d.get("lattice_basis", ()))

    def __repr__(self):
        return (
            f"ClosedSubgroup(n={self.ambient_dim}, subspace={self.subspace_basis.tolist()}, "
            f"lattice={self.lattice_basis.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class CylinderPoint:
    rep: np.ndarray
    group: ClosedSubgroup = field(repr=False)

    def isclose(self, other: "CylinderPoint", tol: float = EPS_METRIC) -> bool:
        return cyl_distance(self, other) <= tol

    def __add__(self, other: "CylinderPoint") -> "CylinderPoint":
        return project(self.rep + other.rep, self.group)

    def __sub__(self, other: "CylinderPoint") -> "CylinderPoint":
        return project(self.rep - other.rep, self.group)


@dataclass(frozen=True)
class GeodesicLift:
    """Lift of a geodesic from ``p`` to ``q``: the straight vector ``q - p - h``."""

    displacement: np.ndarray
    norm: float
    lattice_coeffs: tuple


def project(mu, H: ClosedSubgroup) -> CylinderPoint:
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != H.ambient_dim:
        raise ValueError(f"expected a {H.ambient_dim}-vector, got shape {mu.shape}")
    return CylinderPoint(H.canonical(mu)[0], H)


def _same_group(p: CylinderPoint, q: CylinderPoint):
    if p.group is not q.group and p.group.ambient_dim != q.group.ambient_dim:
        raise ValueError("points live on different cylinders")


def cyl_distance(p: CylinderPoint, q: CylinderPoint) -> float:
    _same_group(p, q)
    return float(p.group.distances(p.rep, q.rep)[0])


def enumerate_lifts(
    p: CylinderPoint,
    q: CylinderPoint,
    eps_gap: float = DEFAULT_EPS_GAP,
    coeff_bound: Optional[int] = None,
) -> list[GeodesicLift]:
    """Lifts of geodesics from ``p`` to ``q``, shortest first.

    Without ``coeff_bound`` only lifts within ``eps_gap`` of the minimum are
    returned.  With it, every lattice shift within ``coeff_bound`` of a
    minimizing coefficient vector is returned (non-minimizing geodesics).
    """
    _same_group(p, q)
    H = p.group
    d = H.complement(q.rep - p.rep)
    if H.rank == 0:
        return [GeodesicLift(d, float(_norms(d)), ())]
    best, cmin = H.min_lifts(d)
    best = float(best[0])
    c0 = H.lattice_coords(d[None, :])[0]
    if coeff_bound is None:
        r = (best + eps_gap) * np.sqrt(np.diag(H._gram_inv)) + 1e-12
        C = _box(np.ceil(c0 - r), np.floor(c0 + r))
    else:
        C = _box(cmin[0] - coeff_bound, cmin[0] + coeff_bound)
    disp = d[None, :] - H.lattice_points(C)
    nrm = _norms(disp)
    if coeff_bound is None:
        keep = nrm <= best + eps_gap
        C, disp, nrm = C[keep], disp[keep], nrm[keep]
    lifts = [
        GeodesicLift(disp[i], float(nrm[i]), tuple(int(v) for v in C[i]))
        for i in range(len(C))
    ]
    lifts.sort(key=lambda g: (g.norm, g.lattice_coeffs))
    return lifts


def enumerate_minimizing_lifts(p, q, eps_gap: float = DEFAULT_EPS_GAP) -> list[GeodesicLift]:
    return enumerate_lifts(p, q, eps_gap=eps_gap)


def geodesic_polyline(p: CylinderPoint, q: CylinderPoint, lift: GeodesicLift, steps: int) -> Polyline:
    """Projection of the straight segment ``p.rep -> p.rep + displacement``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    pts = p.group.canonical(p.rep[None, :] + t * lift.displacement[None, :])
    return Polyline(pts, p.group.space)


def injectivity_radius(H: ClosedSubgroup) -> float:
    return H.injectivity_radius()


def geodesic_oracle(H: ClosedSubgroup, step: float, coeff_bound: Optional[int] = None, eps_gap: float = DEFAULT_EPS_GAP):
    """Geodesics between two representatives, sampled at spacing <= ``step``.

    Minimizing geodesics come first.  With ``coeff_bound`` the oracle goes on
    to yield the longer (non-minimizing) geodesics of nearby lattice shifts,
    lazily and shortest first.
    """

    def oracle(x, y):
        p, q = project(x, H), project(y, H)
        lifts = enumerate_lifts(p, q, eps_gap)
        seen = {lift.lattice_coeffs for lift in lifts}
        if coeff_bound is not None:
            lifts = lifts + [
                lift
                for lift in enumerate_lifts(p, q, coeff_bound=coeff_bound)
                if lift.lattice_coeffs not in seen
            ]
        for lift in lifts:
            yield geodesic_polyline(p, q, lift, max(1, int(math.ceil(lift.norm / step))))

    return oracle
