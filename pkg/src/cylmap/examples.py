"""Built-in models: circle actions on the 2-torus and a linear torus representation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .meshes import Mesh, polar_ball_mesh, torus_grid
from .models import TWO_PI, SymplecticTorusModel, standard_omega
from .normal_form import TorusRepresentation, linear_rep_model


@dataclass(frozen=True)
class Example:
    name: str
    description: str
    model: SymplecticTorusModel
    mesh: Callable[[int], Mesh] = field(repr=False)
    default_resolution: int = 64
    # lattice of the group the harness measures in; None means the holonomy group
    target_lattice: Optional[np.ndarray] = None
    slice_point: Optional[np.ndarray] = None
    rep: Optional[TorusRepresentation] = None


def _t2(scale: float, generators, name: str) -> SymplecticTorusModel:
    return SymplecticTorusModel(standard_omega(1, scale), [TWO_PI, TWO_PI], generators, name=name)


def _registry() -> dict[str, Example]:
    periods = [TWO_PI, TWO_PI]
    std = _t2(1.0, [[1.0, 0.0]], "t2-standard")
    dbl = _t2(2.0, [[1.0, 0.0]], "t2-doubled")
    r2 = _t2(1.0, [[1.0, 0.0], [0.0, 1.0]], "r2-t2")
    rep = TorusRepresentation([[1.0, 0.0], [0.0, 1.0]])
    lin = linear_rep_model(rep, name="linear-torus-rep")
    out = [
        Example(
            "t2-standard",
            "circle acting on the first factor of T^2 with the standard area form",
            std,
            lambda n: torus_grid(periods, n),
            slice_point=np.array([1.0, 2.0]),
        ),
        Example(
            "t2-doubled",
            "same circle action with twice the area form; measured in the circle group R/2piZ",
            dbl,
            lambda n: torus_grid(periods, n),
            target_lattice=np.array([[TWO_PI]]),
            slice_point=np.array([1.0, 2.0]),
        ),
        Example(
            "r2-t2",
            "R^2 acting on T^2 by translations",
            r2,
            lambda n: torus_grid(periods, n),
            default_resolution=32,
            slice_point=np.array([1.0, 2.0]),
        ),
        Example(
            "linear-torus-rep",
            "T^2 acting on C^2 with weights (1,0), (0,1), sampled on the unit ball",
            lin,
            lambda n: polar_ball_mesh(2, 1.0, n),
            default_resolution=8,
            slice_point=np.zeros(4),
            rep=rep,
        ),
    ]
    return {e.name: e for e in out}


EXAMPLES = _registry()


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None


def list_examples() -> list[tuple[str, str]]:
    return [(e.name, e.description) for e in EXAMPLES.values()]


def analytic_momentum(name: str, points) -> Optional[np.ndarray]:
    """Closed-form lifted momentum for the built-in examples (basepoint 0)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if name == "t2-standard":
        return P[:, 1:2].copy()
    if name == "t2-doubled":
        return 2.0 * P[:, 1:2]
    if name == "r2-t2":
        return np.stack([P[:, 1], -P[:, 0]], axis=1)
    if name == "linear-torus-rep":
        return 0.5 * np.stack([P[:, 0] ** 2 + P[:, 1] ** 2, P[:, 2] ** 2 + P[:, 3] ** 2], axis=1)
    return None

