"""Structured sample meshes: periodic/box grids, polar balls, products."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mesh:
    points: np.ndarray
    edges: np.ndarray
    boundary: np.ndarray
    params: np.ndarray = field(default=None, repr=False)
    spacing: float = 0.0

    def __len__(self):
        return len(self.points)


def _grid_edges(shape, periodic) -> np.ndarray:
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    edges = []
    for axis, (n, per) in enumerate(zip(shape, periodic)):
        if n < 2:
            continue
        nxt = np.roll(idx, -1, axis=axis)
        src, dst = idx, nxt
        if not per:
            sl = [slice(None)] * len(shape)
            sl[axis] = slice(0, n - 1)
            src, dst = idx[tuple(sl)], nxt[tuple(sl)]
        elif n == 2:
            sl = [slice(None)] * len(shape)
            sl[axis] = slice(0, 1)
            src, dst = idx[tuple(sl)], nxt[tuple(sl)]
        edges.append(np.stack([src.ravel(), dst.ravel()], axis=1))
    if not edges:
        return np.zeros((0, 2), dtype=int)
    return np.vstack(edges)


def grid_mesh(axes, periodic) -> Mesh:
    """Tensor grid over the given 1-D coordinate arrays, 2d-neighbour adjacency."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    shape = tuple(len(a) for a in axes)
    pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))
    edges = _grid_edges(shape, periodic)
    multi = np.array(list(itertools.product(*[range(n) for n in shape]))).reshape(-1, len(axes))
    boundary = np.zeros(len(pts), dtype=bool)
    for axis, (n, per) in enumerate(zip(shape, periodic)):
        if not per:
            boundary |= (multi[:, axis] == 0) | (multi[:, axis] == n - 1)
    spacing = max((a[1] - a[0] for a in axes if len(a) > 1), default=0.0)
    return Mesh(pts, edges, boundary, pts.copy(), float(spacing))


def torus_grid(periods, resolution: int, extent: float = 1.0) -> Mesh:
    """Grid over ``[0, P)`` on periodic axes and ``[-extent, extent]`` on lines."""
    axes, per = [], []
    for P in periods:
        if math.isfinite(P):
            axes.append(np.arange(resolution) * (P / resolution))
            per.append(True)
        else:
            axes.append(np.linspace(-extent, extent, resolution))
            per.append(False)
    return grid_mesh(axes, per)


def polar_ball_mesh(n_complex: int, radius: float, resolution: int) -> Mesh:
    """Ball ``sum |z_j|^2 <= radius^2`` in ``C^n`` (n = 1 or 2) in polar parameters.

    Parameters are ``(s, theta)`` for one complex dimension and
    ``(s, psi, theta_1, theta_2)`` with ``|z_1| = s cos psi``,
    ``|z_2| = s sin psi`` for two.  Points are real coordinates
    ``(x_1, y_1, ..., x_n, y_n)``.  Nodes on ``s = 0``, ``s = radius`` and
    the ``psi`` ends are flagged as boundary (degenerate or outer).
    """
    s = np.linspace(0.0, radius, resolution)
    th = np.arange(resolution) * (2 * math.pi / resolution)
    if n_complex == 1:
        mesh = grid_mesh([s, th], [False, True])
        r = mesh.params[:, :1]
        angles = mesh.params[:, 1:]
    elif n_complex == 2:
        psi = np.linspace(0.0, math.pi / 2, resolution)
        mesh = grid_mesh([s, psi, th, th], [False, False, True, True])
        S, PSI = mesh.params[:, 0], mesh.params[:, 1]
        r = np.stack([S * np.cos(PSI), S * np.sin(PSI)], axis=1)
        angles = mesh.params[:, 2:]
    else:
        raise ValueError("polar meshes support 1 or 2 complex dimensions")
    pts = np.empty((len(mesh.params), 2 * n_complex))
    pts[:, 0::2] = r * np.cos(angles)
    pts[:, 1::2] = r * np.sin(angles)
    mesh.points = pts
    mesh.spacing = float(max(s[1] - s[0], radius * (th[1] - th[0])))
    return mesh


def product_mesh(a: Mesh, b: Mesh) -> Mesh:
    """Cartesian product with the product-graph adjacency."""
    na, nb = len(a), len(b)
    ia, ib = np.divmod(np.arange(na * nb), nb)
    pts = np.hstack([a.points[ia], b.points[ib]])
    e1 = (a.edges[:, None, :] * nb + np.arange(nb)[None, :, None]).reshape(-1, 2)
    e2 = (np.arange(na)[:, None, None] * nb + b.edges[None, :, :]).reshape(-1, 2)
    params = None
    if a.params is not None and b.params is not None:
        params = np.hstack([a.params[ia], b.params[ib]])
    return Mesh(
        pts,
        np.vstack([e1, e2]).astype(int),
        a.boundary[ia] | b.boundary[ib],
        params,
        max(a.spacing, b.spacing),
    )


def point_mesh(dim: int) -> Mesh:
    """Single point; neutral element for :func:`product_mesh`."""
    return Mesh(np.zeros((1, dim)), np.zeros((0, 2), dtype=int), np.zeros(1, bool), np.zeros((1, dim)))
