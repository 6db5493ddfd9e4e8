"""Abelian local normal form of the cylinder valued momentum map.

Around a point ``m`` the algebra splits as ``g = g_m + m + q`` (isotropy,
the rest of ``ker Psi(m)``, and a complement on which the Chu form is
non-degenerate).  In tube coordinates ``[g, rho, v]`` the lifted momentum map
is ``rho + J_V(v) - <P_q g, .>_q`` up to a constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull

from .cylinder import ClosedSubgroup, enumerate_minimizing_lifts, project
from .harness import SampledMap, build_fiber_quotient, check_local_conditions
from .holonomy import momentum_values
from .meshes import Mesh, grid_mesh, point_mesh, polar_ball_mesh, product_mesh
from .models import SymplecticTorusModel, chu_map, standard_omega


@dataclass(frozen=True)
class TorusRepresentation:
    """Diagonal torus action on ``C^n``; row ``j`` of ``weights`` is ``alpha_j`` in g*."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.atleast_2d(np.asarray(self.weights, dtype=float)))

    @property
    def complex_dim(self) -> int:
        return len(self.weights)

    @property
    def algebra_dim(self) -> int:
        return self.weights.shape[1]


def rep_momentum(rep: TorusRepresentation, z) -> np.ndarray:
    """``(1/2) sum_j |z_j|^2 alpha_j``."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    return 0.5 * (np.abs(z) ** 2) @ rep.weights


def complex_coords(v) -> np.ndarray:
    """``(x_1, y_1, ..., x_n, y_n) -> (x_1 + i y_1, ...)``."""
    v = np.asarray(v, dtype=float)
    return v[..., 0::2] + 1j * v[..., 1::2]


def rep_image_cone(rep: TorusRepresentation, radius: float, samples: int) -> np.ndarray:
    """Grid sample of ``{(1/2) sum t_j alpha_j : t >= 0, sum t <= radius^2}``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    t = np.linspace(0.0, radius**2, samples)
    grids = np.meshgrid(*([t] * rep.complex_dim), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=1)
    T = T[T.sum(axis=1) <= radius**2 * (1 + 1e-12)]
    return np.unique(np.round(0.5 * T @ rep.weights, 14), axis=0)


def _hull_vertices(P: np.ndarray) -> np.ndarray:
    if P.shape[1] == 1:
        return np.array([[P.min()], [P.max()]])
    return P[ConvexHull(P).vertices]


def _point_to_hull(x: np.ndarray, V: np.ndarray) -> float:
    """Distance from ``x`` to the convex hull of ``V`` (dimension 1 or 2)."""
    if V.shape[1] == 1:
        return float(max(V.min() - x[0], x[0] - V.max(), 0.0))
    hull = ConvexHull(V)
    if np.all(hull.equations[:, :-1] @ x + hull.equations[:, -1] <= 1e-12):
        return 0.0
    best = math.inf
    for a, b in hull.points[hull.simplices]:
        t = np.clip((x - a) @ (b - a) / max((b - a) @ (b - a), 1e-300), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(x - a - t * (b - a))))
    return best


def image_hull_distance(values, rep: TorusRepresentation, radius: float, samples: int = 41) -> tuple[float, float]:
    """Hausdorff distance between the hulls of ``values`` and of the weight cone at ``radius``.

    Both sets are convex polytopes, so the distance is attained at hull
    vertices.  Returns ``(hausdorff, diameter of the cone)``.
    """
    A = np.atleast_2d(np.asarray(values, dtype=float))
    B = rep_image_cone(rep, radius, samples)
    if A.shape[1] > 2:
        raise ValueError("hull comparison supports 1- and 2-dimensional images")
    VA, VB = _hull_vertices(A), _hull_vertices(B)
    h = max(max(_point_to_hull(a, VB) for a in VA), max(_point_to_hull(b, VA) for b in VB))
    diam = float(np.linalg.norm(VB[:, None, :] - VB[None, :, :], axis=-1).max())
    return h, diam


def linear_rep_model(rep: TorusRepresentation, name: str = "linear-torus-rep") -> SymplecticTorusModel:
    """``C^n`` with the weight action as linear generators.

    The rotation sense is chosen so transport from the origin reproduces
    :func:`rep_momentum` with ``omega = sum dx_j ^ dy_j``.
    """
    n, k = rep.complex_dim, rep.algebra_dim
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    lin = np.zeros((k, 2 * n, 2 * n))
    for i in range(k):
        for j in range(n):
            lin[i, 2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = rep.weights[j, i] * block
    return SymplecticTorusModel(
        standard_omega(n), np.full(2 * n, np.inf), np.zeros((k, 2 * n)), lin, name=name
    )


@dataclass(frozen=True)
class SliceSplitting:
    """Orthonormal row bases of ``g_m``, ``m`` and ``q`` plus the Chu form on ``q``."""

    basis_gm: np.ndarray
    basis_m: np.ndarray
    basis_q: np.ndarray
    chu_q: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.chu_q, dtype=float).reshape(len(self.basis_q), len(self.basis_q))
        if not np.allclose(C, -C.T, atol=1e-12):
            raise ValueError("Chu form on q must be antisymmetric")
        if len(C) and abs(np.linalg.det(C)) <= 1e-9:
            raise ValueError("Chu form on q is degenerate")
        object.__setattr__(self, "chu_q", C)

    @property
    def dims(self) -> tuple[int, int, int]:
        return len(self.basis_gm), len(self.basis_m), len(self.basis_q)

    @property
    def algebra_dim(self) -> int:
        for b in (self.basis_gm, self.basis_m, self.basis_q):
            if b.size:
                return b.shape[1]
        return 0


def _rows(M: np.ndarray, k: int) -> np.ndarray:
    return M.T.reshape(-1, k) if M.size else np.zeros((0, k))


def _null(M, atol: float = 1e-10) -> np.ndarray:
    """Orthonormal null-space basis (rows) with an absolute singular-value cutoff."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, s, vt = np.linalg.svd(M)
    rank = int(np.count_nonzero(s > atol))
    return vt[rank:]


def _span(M, atol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of the row span."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return M.reshape(0, M.shape[-1])
    _, s, vt = np.linalg.svd(M)
    return vt[: int(np.count_nonzero(s > atol))]


def splitting_from_bases(basis_gm, basis_m, basis_q, chu: np.ndarray) -> SliceSplitting:
    k = chu.shape[0]
    gm = np.asarray(basis_gm, float).reshape(-1, k)
    mm = np.asarray(basis_m, float).reshape(-1, k)
    qq = np.asarray(basis_q, float).reshape(-1, k)
    return SliceSplitting(gm, mm, qq, qq @ chu @ qq.T)


def slice_splitting(model: SymplecticTorusModel, m) -> SliceSplitting:
    """Splitting at ``m`` using the coordinate inner product on ``g``."""
    k = model.algebra_dim
    X = model.generator_fields(m)
    psi = chu_map(model, m)
    gm = _null(X.T)
    kk = _null(psi)
    # m: orthogonal complement of g_m inside k
    mm = _span(kk - (kk @ gm.T) @ gm) if len(kk) and len(gm) else kk
    qq = _null(kk) if len(kk) else np.eye(k)
    return SliceSplitting(gm, mm, qq, qq @ psi @ qq.T)


def local_normal_form(split: SliceSplitting, rep: Optional[TorusRepresentation], g_coord, rho, z) -> np.ndarray:
    """``rho + J_V(z) - <P_q g, .>_q`` as a covector in standard g* coordinates.

    The q-term is the covector ``eta -> -<P_q g, eta>_q``, i.e.
    ``-chu_q^T x`` for ``x`` the q-coordinates of ``g``.
    """
    k = split.algebra_dim
    g_coord = np.asarray(g_coord, dtype=float).reshape(-1)
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if g_coord.shape != (k,):
        raise ValueError(f"g_coord must have {k} entries")
    if rho.shape != (split.dims[1],):
        raise ValueError(f"rho must have {split.dims[1]} entries")
    out = split.basis_m.T @ rho
    if split.dims[2]:
        x = split.basis_q @ g_coord
        out = out - split.basis_q.T @ (split.chu_q.T @ x)
    if rep is not None and rep.complex_dim:
        if rep.algebra_dim != k:
            raise ValueError("representation weights must live in g*")
        jv = rep_momentum(rep, z)
        out = out + split.basis_gm.T @ (split.basis_gm @ jv)
    return out


def local_normal_form_many(split, rep, G, R, Z) -> np.ndarray:
    return np.array([local_normal_form(split, rep, g, r, z) for g, r, z in zip(G, R, Z)])


@dataclass
class SliceChart:
    """Tube-style chart ``[g, rho, v] -> Phi_g(m + rho W + v V)`` on a flat model."""

    model: SymplecticTorusModel
    base: np.ndarray
    split: SliceSplitting
    W: np.ndarray
    V: np.ndarray

    def _rho_offset(self, rho) -> np.ndarray:
        """Point of ``base + span(W)`` whose momentum moves by exactly ``basis_m^T rho``.

        Linear in ``rho`` for affine actions; quadratic corrections of linear
        actions are removed by a few Newton steps.
        """
        rho = np.asarray(rho, dtype=float).reshape(-1)
        a = rho.copy()
        if not self.model.has_linear_part or not len(a):
            return a @ self.W
        H = ClosedSubgroup.trivial(self.model.algebra_dim)
        k0 = momentum_values(self.model, H, self.base[None, :], self.base)[0]
        for _ in range(20):
            x = self.base + a @ self.W
            moved = momentum_values(self.model, H, x[None, :], self.base)[0] - k0
            resid = rho - self.split.basis_m @ moved
            a = a + resid
            if np.abs(resid).max() < 1e-14:
                return a @ self.W
        raise ValueError("rho is outside the chart domain")

    def __call__(self, g_coord, rho, v) -> np.ndarray:
        x = self.base + self._rho_offset(rho) + np.asarray(v, float) @ self.V
        return self.model.act(g_coord, x)


def slice_chart(model: SymplecticTorusModel, m) -> SliceChart:
    """Chart adapted to :func:`slice_splitting` at ``m``.

    ``W`` maps ``rho`` to directions moving the momentum by ``basis_m^T rho``;
    ``V`` is an orthonormal basis of a symplectic normal space, a complement
    of ``k . m`` inside ``(g . m)^omega``.
    """
    m = np.asarray(m, dtype=float)
    split = slice_splitting(model, m)
    A = model.contraction_matrix(m)
    dim = model.dim
    W = (np.linalg.pinv(A) @ split.basis_m.T).T if split.dims[1] else np.zeros((0, dim))
    if np.abs(A).max() <= 1e-12:
        V = np.eye(dim)
    else:
        perp = _null(A)
        kk = np.vstack([split.basis_gm, split.basis_m])
        Q = _span(kk @ model.generator_fields(m)) if len(kk) else np.zeros((0, dim))
        V = _span(perp - (perp @ Q.T) @ Q) if len(Q) else perp
    return SliceChart(model, m, split, W, V)


def normal_form_consistency(
    model: SymplecticTorusModel,
    H: ClosedSubgroup,
    m,
    rep: Optional[TorusRepresentation] = None,
    radius: float = 0.1,
    resolution: int = 5,
) -> tuple[np.ndarray, float]:
    """Fit the constant ``c`` in ``lifted K = J_U + c`` over a chart mesh.

    ``K`` is lifted to the sheet through the lift of ``K(m)``.  Returns
    ``(c, max_residual)``.
    """
    chart = slice_chart(model, m)
    split = chart.split
    gm, dm, dq = split.dims
    k = model.algebra_dim
    nv = len(chart.V)
    if 2 * (rep.complex_dim if rep is not None else 0) != nv:
        raise ValueError(f"representation must act on the {nv}-dimensional symplectic slice")
    axis = np.linspace(-radius, radius, resolution)
    params = grid_mesh([axis] * (k + dm + nv), [False] * (k + dm + nv)).points
    G, R, Vv = params[:, :k], params[:, k : k + dm], params[:, k + dm :]
    pts = np.array([chart(g, r, v) for g, r, v in zip(G, R, Vv)])
    K = momentum_values(model, H, np.vstack([chart.base, pts]))
    k0 = project(K[0], H)
    lifted = np.array([K[0] + enumerate_minimizing_lifts(k0, project(v, H))[0].displacement for v in K[1:]])
    Z = complex_coords(Vv) if nv else np.zeros((len(params), 0))
    J = local_normal_form_many(split, rep, G, R, Z)
    c = (lifted - J).mean(axis=0)
    resid = float(np.abs(lifted - J - c).max())
    return c, resid


def check_local_properties(
    split: SliceSplitting,
    rep: Optional[TorusRepresentation],
    radius: float = 1.0,
    resolution: int = 7,
    radius_hops: int = 2,
) -> dict:
    """(LFC, LOI, LCD) for each factor of the normal form and for their sum.

    Factor meshes: a polar ball for the representation, boxes for ``rho`` and
    the q-part of the group coordinate.  Returns booleans (interior points)
    per factor and for the product map.
    """
    k = split.algebra_dim
    gm, dm, dq = split.dims
    factors: dict[str, tuple[Mesh, callable]] = {}
    if rep is not None and rep.complex_dim:
        mesh = polar_ball_mesh(rep.complex_dim, radius, resolution)
        factors["representation"] = (
            mesh,
            lambda P: np.array([local_normal_form(split, rep, np.zeros(k), np.zeros(dm), z) for z in complex_coords(P)]),
        )
    if dm:
        mesh = grid_mesh([np.linspace(-radius, radius, resolution)] * dm, [False] * dm)
        factors["m"] = (mesh, lambda P: P @ split.basis_m)
    if dq:
        mesh = grid_mesh([np.linspace(-radius, radius, resolution)] * dq, [False] * dq)
        factors["q"] = (
            mesh,
            lambda P: np.array([local_normal_form(split, None, x @ split.basis_q, np.zeros(dm), ()) for x in P]),
        )
    target = ClosedSubgroup.trivial(k)
    out = {}

    def verdict(mesh, values):
        f = SampledMap(mesh.points, mesh.edges, values, target, mesh.boundary)
        q = build_fiber_quotient(f)
        r = check_local_conditions(f, q, radius_hops)
        interior = ~r.boundary & ~r.skipped
        return {
            "lfc": bool(r.lfc[interior].all()),
            "loi": bool(r.loi[interior].all()),
            "lcd": bool(r.lcd[interior].all()),
        }

    for name, (mesh, fn) in factors.items():
        out[name] = verdict(mesh, fn(mesh.points))
    if len(factors) > 1:
        mesh = point_mesh(0)
        values = np.zeros((1, k))
        for m_, fn in factors.values():
            vals = fn(m_.points)
            na, nb = len(mesh), len(m_)
            values = (values[:, None, :] + vals[None, :, :]).reshape(na * nb, k)
            mesh = product_mesh(mesh, m_)
        out["product"] = verdict(mesh, values)
    elif factors:
        out["product"] = dict(next(iter(out.values())))
    else:
        out["product"] = {"lfc": True, "loi": True, "lcd": True}
    return out
