"""Hamiltonian holonomy and the cylinder valued momentum map.

Horizontal transport for the flat connection on ``M x g*`` means that along a
path ``m(t)`` the ``g*`` component moves by
``<d nu/dt, xi> = (i_{xi_M} omega)(m(t))(dm/dt)``.  Transport around loops
generates the holonomy group ``H``; the momentum map is the transported value
projected to ``g*/H``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .cylinder import ClosedSubgroup, CylinderPoint, cyl_distance, project
from .metric import EPS_METRIC, Polyline
from .models import SymplecticTorusModel, chu_map, flow_trajectory, gradient, loop_basis, straight_path

log = logging.getLogger(__name__)

TOL_NOETHER = 1e-6
MAX_DENOMINATOR = 64


class HolonomyNotClosed(ValueError):
    """Loop transports generate a subgroup whose closure is not a lattice."""


class NotInvariant(ValueError):
    pass


@dataclass
class TransportResult:
    delta_nu: np.ndarray
    path: Polyline
    estimated_error: float


@dataclass
class MomentumValue:
    value: CylinderPoint
    basepoint: np.ndarray
    base_value: np.ndarray
    lifted: np.ndarray


def _segment_increments(model: SymplecticTorusModel, starts, deltas) -> np.ndarray:
    """Trapezoid rule for the contraction forms over each straight segment."""
    a = np.einsum("nkd,nd->nk", _contractions(model, starts), deltas)
    b = np.einsum("nkd,nd->nk", _contractions(model, starts + deltas), deltas)
    return 0.5 * (a + b)


def _contractions(model, pts) -> np.ndarray:
    fields = model.generators[None, :, :] + np.einsum("kij,nj->nki", model.linear_generators, pts)
    return fields @ model.omega


def parallel_transport(model: SymplecticTorusModel, path: Polyline) -> TransportResult:
    """Increment of the ``g*`` component along a horizontal lift of ``path``.

    Consecutive points are joined by their shortest displacement on the torus.
    The error estimate compares against the rule on every other vertex.
    """
    if path is None or len(path.points) < 2:
        raise ValueError("transport needs a path with at least two points")
    P = np.asarray(path.points, dtype=float)
    deltas = model.wrap(np.diff(P, axis=0))
    fine = _segment_increments(model, P[:-1], deltas)
    total = fine.sum(axis=0)
    if len(deltas) >= 2:
        m = len(deltas) // 2
        paired = deltas[: 2 * m : 2] + deltas[1 : 2 * m : 2]
        coarse = _segment_increments(model, P[: 2 * m : 2], paired).sum(axis=0)
        if len(deltas) % 2:
            coarse = coarse + fine[-1]
        err = float(np.max(np.abs(total - coarse)) / 3.0)
    else:
        err = 0.0
    return TransportResult(total, path, err)


def _integer_row_basis(rows: list[list[int]], ncols: int) -> list[list[int]]:
    """Basis of the integer row span, by Euclidean row reduction."""
    rows = [list(r) for r in rows if any(r)]
    basis = []
    for col in range(ncols):
        while True:
            nz = [r for r in rows if r[col] != 0]
            if len(nz) <= 1:
                break
            pivot = min(nz, key=lambda r: abs(r[col]))
            for r in nz:
                if r is not pivot:
                    q = r[col] // pivot[col]
                    for j in range(ncols):
                        r[j] -= q * pivot[j]
            rows = [r for r in rows if any(r)]
        if nz:
            basis.append(nz[0])
            rows = [r for r in rows if r is not nz[0]]
    return basis


def lattice_from_generators(gens, dim: int, tol: float = EPS_METRIC) -> ClosedSubgroup:
    """Closed subgroup generated by finitely many vectors, if it is a lattice.

    Generators that are rationally dependent on an independent subset (with
    denominators up to ``MAX_DENOMINATOR``) are folded into an integer basis;
    anything else would have a non-discrete closure and is refused.
    """
    G = np.asarray(gens, dtype=float).reshape(-1, dim)
    G = G[np.linalg.norm(G, axis=1) > tol]
    if len(G) == 0:
        return ClosedSubgroup.trivial(dim)
    independent = []
    for g in G:
        trial = np.array(independent + [g])
        if np.linalg.matrix_rank(trial, tol=1e-9 * max(1.0, np.abs(trial).max())) == len(trial):
            independent.append(g)
    B = np.array(independent)
    if len(B) == len(G):
        return ClosedSubgroup(dim, lattice_basis=B)
    C, *_ = np.linalg.lstsq(B.T, G.T, rcond=None)
    C = C.T
    fracs = [[Fraction(float(c)).limit_denominator(MAX_DENOMINATOR) for c in row] for row in C]
    for row, frow in zip(C, fracs):
        for c, f in zip(row, frow):
            if abs(c - float(f)) > 1e-8 * max(1.0, abs(c)):
                raise HolonomyNotClosed("holonomy closure not supported")
    den = math.lcm(*[f.denominator for row in fracs for f in row])
    ints = [[int(f * den) for f in row] for row in fracs]
    basis = _integer_row_basis(ints, len(B))
    lattice = (np.array(basis, dtype=float) / den) @ B
    return ClosedSubgroup(dim, lattice_basis=lattice)


def holonomy_generators(model: SymplecticTorusModel, steps: int = 64) -> np.ndarray:
    loops = loop_basis(model, steps) if np.any(np.isfinite(model.periods)) else []
    if not loops:
        return np.zeros((0, model.algebra_dim))
    return np.array([parallel_transport(model, c).delta_nu for c in loops])


def holonomy_group(model: SymplecticTorusModel, steps: int = 64) -> ClosedSubgroup:
    return lattice_from_generators(holonomy_generators(model, steps), model.algebra_dim)


def _check_endpoints(model, path: Polyline, a, b):
    if model.space.dist(path.first, a) > 1e-9 or model.space.dist(path.last, b) > 1e-9:
        raise ValueError("path does not connect the basepoint to m")


def momentum_map(
    model: SymplecticTorusModel,
    H: ClosedSubgroup,
    m,
    basepoint,
    base_value,
    path: Polyline,
) -> MomentumValue:
    basepoint = np.asarray(basepoint, dtype=float)
    base_value = np.asarray(base_value, dtype=float)
    _check_endpoints(model, path, basepoint, m)
    nu = base_value + parallel_transport(model, path).delta_nu
    return MomentumValue(project(nu, H), basepoint, base_value, nu)


def momentum(model, H, m, basepoint=None, base_value=None, winding=None, steps: int = 8) -> MomentumValue:
    """Momentum value through the straight path of the given winding class."""
    basepoint = np.zeros(model.dim) if basepoint is None else np.asarray(basepoint, float)
    base_value = np.zeros(model.algebra_dim) if base_value is None else np.asarray(base_value, float)
    path = straight_path(model, basepoint, m, steps=steps, winding=winding)
    return momentum_map(model, H, m, basepoint, base_value, path)


def momentum_values(model, H, points, basepoint=None, base_value=None, steps: int = 4) -> np.ndarray:
    """Canonical representatives of ``K`` at many points (straight paths)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    basepoint = np.zeros(model.dim) if basepoint is None else np.asarray(basepoint, float)
    base_value = np.zeros(model.algebra_dim) if base_value is None else np.asarray(base_value, float)
    d = model.wrap(points - basepoint)
    t = np.linspace(0.0, 1.0, steps + 1)
    nu = np.tile(base_value, (len(points), 1))
    for t0, t1 in zip(t[:-1], t[1:]):
        nu = nu + _segment_increments(model, basepoint + t0 * d, (t1 - t0) * d)
    return H.canonical(nu)


def tangent_momentum(model, m, v) -> np.ndarray:
    """``nu`` with ``<nu, xi_i> = omega(xi_i_M(m), v)``."""
    return model.contraction_matrix(m) @ np.asarray(v, dtype=float)


def _sample_points(model, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    hi = np.where(np.isfinite(model.periods), model.periods, 2.0)
    lo = np.where(np.isfinite(model.periods), 0.0, -2.0)
    return lo + (hi - lo) * rng.random((count, model.dim))


def check_invariant(model, h: Callable, samples: int = 16, seed: int = 0, tol: float = 1e-6):
    for m in _sample_points(model, samples, seed):
        dh = gradient(h, m)
        if np.max(np.abs(model.generator_fields(m) @ dh)) > tol:
            raise NotInvariant("h not invariant")


def noether_check(
    model,
    H,
    h: Callable,
    m0,
    t: float,
    dt: float,
    grad: Optional[Callable] = None,
    checkpoints: int = 20,
    basepoint=None,
) -> float:
    """Largest ``d(K(F_s(m0)), K(m0))`` over evenly spaced checkpoints ``s <= t``."""
    check_invariant(model, h)
    nsteps = int(math.ceil(abs(t) / dt - 1e-9))
    every = max(1, nsteps // checkpoints)
    _, pts = flow_trajectory(model, h, m0, t, dt, grad, store_every=every)
    k0 = momentum(model, H, pts[0], basepoint)
    return max(cyl_distance(momentum(model, H, p, basepoint).value, k0.value) for p in pts[1:])


def nonequivariance_cocycle(
    model, H, g, samples: int = 8, seed: int = 0, tol: float = 1e-8, basepoint=None
) -> CylinderPoint:
    """``K(Phi_g(m)) - K(m)``, checked to be independent of ``m``."""
    vals = []
    for m in _sample_points(model, max(samples, 8), seed):
        a = momentum(model, H, model.act(g, m), basepoint).value
        b = momentum(model, H, m, basepoint).value
        vals.append(a - b)
    spread = max(cyl_distance(p, q) for p in vals for q in vals)
    if spread > tol:
        raise ValueError(f"cocycle depends on the point (spread {spread:.3g})")
    return vals[0]


def poisson_bracket(model, H, f: Callable, g: Callable, at: CylinderPoint, m_ref, step: Optional[float] = None) -> float:
    """``Psi(m_ref)(grad(f o pi), grad(g o pi))`` at a representative of ``at``.

    ``f`` and ``g`` take a :class:`CylinderPoint`.
    """
    inj = H.injectivity_radius()
    if step is None:
        step = min(1e-4, inj / 10.0)
    elif step >= inj:
        raise ValueError("finite-difference step exceeds the injectivity radius")

    def lift(fn):
        return lambda mu: fn(project(mu, H))

    df = gradient(lift(f), at.rep, step)
    dg = gradient(lift(g), at.rep, step)
    return float(df @ chu_map(model, m_ref) @ dg)
