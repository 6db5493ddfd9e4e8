"""Flat symplectic models with Abelian Lie algebra actions.

A model is ``R^{2n}`` (some coordinates possibly periodic, giving a torus or
a cylinder) with a constant symplectic matrix ``omega`` and infinitesimal
generators that are affine vector fields ``xi_M(x) = c + L x``.  Torus
translations have ``L = 0``; linear torus representations on vector spaces
have ``c = 0``.

Conventions: ``omega(u, v) = u @ omega @ v`` and the Hamiltonian vector
field satisfies ``i_{X_h} omega = dh``, i.e. ``X_h = omega^{-T} grad h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .cylinder import ClosedSubgroup
from .metric import Polyline

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SymplecticTorusModel:
    omega: np.ndarray
    periods: np.ndarray
    generators: np.ndarray
    linear_generators: Optional[np.ndarray] = None
    name: str = "model"

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        dim = omega.shape[0]
        if omega.shape != (dim, dim) or dim % 2:
            raise ValueError("omega must be a square matrix of even size")
        if not np.allclose(omega, -omega.T, atol=1e-12):
            raise ValueError("omega must be antisymmetric")
        if abs(np.linalg.det(omega)) < 1e-12:
            raise ValueError("omega must be non-degenerate")
        periods = np.asarray(self.periods, dtype=float).reshape(-1)
        if periods.shape != (dim,) or np.any(periods <= 0):
            raise ValueError("need one positive period (or inf) per coordinate")
        gens = np.asarray(self.generators, dtype=float).reshape(-1, dim)
        k = len(gens)
        lin = self.linear_generators
        lin = np.zeros((k, dim, dim)) if lin is None else np.asarray(lin, float).reshape(k, dim, dim)
        if np.any(lin != 0) and np.any(np.isfinite(periods)):
            raise ValueError("linear generators are only defined on vector spaces")
        for L in lin:
            if not np.allclose(L.T @ omega + omega @ L, 0.0, atol=1e-10):
                raise ValueError("generator does not preserve omega")
        for i in range(k):
            for j in range(i + 1, k):
                if not (
                    np.allclose(lin[i] @ lin[j], lin[j] @ lin[i], atol=1e-10)
                    and np.allclose(lin[j] @ gens[i], lin[i] @ gens[j], atol=1e-10)
                ):
                    raise ValueError("generators do not commute")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "linear_generators", lin)

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def algebra_dim(self) -> int:
        return len(self.generators)

    @property
    def has_linear_part(self) -> bool:
        return bool(np.any(self.linear_generators != 0))

    @cached_property
    def omega_inv_t(self) -> np.ndarray:
        return np.linalg.inv(self.omega.T)

    @cached_property
    def torus(self) -> ClosedSubgroup:
        """The period lattice of the configuration coordinates."""
        return ClosedSubgroup.from_periods(self.periods)

    @property
    def space(self):
        return self.torus.space

    def reduce(self, m) -> np.ndarray:
        m = np.array(m, dtype=float)
        fin = np.isfinite(self.periods)
        m[..., fin] = np.mod(m[..., fin], self.periods[fin])
        m[..., fin] = np.where(m[..., fin] >= self.periods[fin], 0.0, m[..., fin])
        return m

    def wrap(self, d) -> np.ndarray:
        """Shortest representative of a displacement modulo the periods."""
        d = np.array(d, dtype=float)
        fin = np.isfinite(self.periods)
        P = self.periods[fin]
        d[..., fin] = d[..., fin] - P * np.round(d[..., fin] / P)
        return d

    def generator_fields(self, m) -> np.ndarray:
        """Rows are ``xi_M(m)`` for the basis generators; shape ``(k, 2n)``."""
        m = np.asarray(m, dtype=float)
        return self.generators + self.linear_generators @ m

    def contraction_matrix(self, m) -> np.ndarray:
        """Rows are the covectors ``i_{xi_M} omega`` at ``m``."""
        return self.generator_fields(m) @ self.omega

    def act(self, g, m) -> np.ndarray:
        """Group action ``Phi_g(m)`` of ``g = sum g_i xi_i`` via the affine flow."""
        g = np.asarray(g, dtype=float).reshape(-1)
        A = np.zeros((self.dim + 1, self.dim + 1))
        A[: self.dim, : self.dim] = np.tensordot(g, self.linear_generators, axes=1)
        A[: self.dim, self.dim] = g @ self.generators
        x = expm(A) @ np.append(np.asarray(m, float), 1.0)
        return self.reduce(x[: self.dim])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "omega": self.omega.tolist(),
            "periods": [p if math.isfinite(p) else "inf" for p in self.periods],
            "generators": self.generators.tolist(),
            "linear_generators": self.linear_generators.tolist() if self.has_linear_part else None,
        }


def standard_omega(n: int, scale: float = 1.0) -> np.ndarray:
    """``scale * sum dq_i ^ dp_i`` in coordinates ``(q_1, p_1, ..., q_n, p_n)``."""
    w = np.zeros((2 * n, 2 * n))
    for i in range(n):
        w[2 * i, 2 * i + 1] = scale
        w[2 * i + 1, 2 * i] = -scale
    return w


def contraction_form(model: SymplecticTorusModel, m, xi_index: int) -> np.ndarray:
    if not 0 <= xi_index < model.algebra_dim:
        raise IndexError(f"generator index {xi_index} out of range")
    return model.contraction_matrix(m)[xi_index]


def chu_map(model: SymplecticTorusModel, m) -> np.ndarray:
    """``Psi(m)_ij = omega(xi_i_M(m), xi_j_M(m))``."""
    X = model.generator_fields(m)
    return X @ model.omega @ X.T


def gradient(h: Callable, m, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient."""
    m = np.asarray(m, dtype=float)
    g = np.empty_like(m)
    for i in range(len(m)):
        e = np.zeros_like(m)
        e[i] = step
        g[i] = (h(m + e) - h(m - e)) / (2 * step)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite Hamiltonian values")
    return g


def hamiltonian_vector_field(model, h, m, grad: Optional[Callable] = None) -> np.ndarray:
    dh = grad(m) if grad is not None else gradient(h, m)
    return model.omega_inv_t @ dh


def flow_trajectory(model, h, m0, t: float, dt: float, grad=None, store_every: int = 1):
    """Fixed-step RK4 integration of ``X_h``; periodic coordinates reduced each step.

    Returns ``(times, points)`` with the stored states (every ``store_every``
    steps plus the final one).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = int(math.ceil(abs(t) / dt - 1e-9))
    h_step = t / nsteps if nsteps else 0.0
    x = model.reduce(m0)
    times, pts = [0.0], [x.copy()]

    def f(y):
        return hamiltonian_vector_field(model, h, y, grad)

    for s in range(1, nsteps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * h_step * k1)
        k3 = f(x + 0.5 * h_step * k2)
        k4 = f(x + h_step * k3)
        x = model.reduce(x + h_step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("integration produced non-finite state")
        if s % store_every == 0 or s == nsteps:
            times.append(s * h_step)
            pts.append(x.copy())
    return np.array(times), np.array(pts)


def hamiltonian_flow(model, h, m0, t: float, dt: float, grad=None) -> np.ndarray:
    return flow_trajectory(model, h, m0, t, dt, grad, store_every=10**9)[1][-1]


def energy_drift(h, points) -> float:
    vals = np.array([h(p) for p in points])
    return float(np.max(np.abs(vals - vals[0])))


def symplectic_bracket(model, F, G, m, step: float = 1e-5) -> float:
    """``{F, G}(m) = omega(X_F, X_G)``."""
    XF = model.omega_inv_t @ gradient(F, m, step)
    XG = model.omega_inv_t @ gradient(G, m, step)
    return float(XF @ model.omega @ XG)


def loop_basis(model, steps: int = 64, base=None) -> list[Polyline]:
    """One closed coordinate loop per periodic coordinate."""
    if steps < 3:
        raise ValueError("loops need at least 3 segments")
    base = np.zeros(model.dim) if base is None else np.asarray(base, float)
    loops = []
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    for i, P in enumerate(model.periods):
        if not math.isfinite(P):
            continue
        e = np.zeros(model.dim)
        e[i] = P
        loops.append(Polyline(model.reduce(base + t * e), model.space))
    return loops


def straight_path(model, a, b, steps: int = 8, winding=None) -> Polyline:
    """Path from ``a`` to ``b`` along the straight lift ``b - a + winding * periods``.

    ``winding`` selects the homotopy class on periodic coordinates.  Segments
    are kept shorter than half a period so the wrapped sampling is faithful.
    """
    a = np.asarray(a, float)
    d = model.wrap(np.asarray(b, float) - a)
    if winding is not None:
        w = np.asarray(winding, float)
        fin = np.isfinite(model.periods)
        d[fin] = d[fin] + w[fin] * model.periods[fin]
    fin = np.isfinite(model.periods)
    if np.any(fin):
        ratio = np.abs(d[fin]) / model.periods[fin]
        steps = max(steps, int(math.ceil(3.0 * ratio.max())) + 1)
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return Polyline(model.reduce(a + t * d), model.space)
