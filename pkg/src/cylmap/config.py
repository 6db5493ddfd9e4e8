"""Run configuration: a versioned JSON document, validated against the shipped schema."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

SCHEMA_VERSION = 1
TASKS = ("holonomy", "momentum", "harness", "normalform")


class ConfigError(ValueError):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("cylmap").joinpath("schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass
class RunConfig:
    example: Optional[str] = None
    model: Optional[dict] = None
    input: Optional[dict] = None
    resolution: Optional[int] = None
    extent: float = 1.0
    eps_fiber: Optional[float] = None
    tol_convexity: Optional[float] = None
    radius_hops: int = 2
    eps_gap: float = 1e-7
    tol_normal_form: float = 1e-6
    tasks: tuple = TASKS
    target_lattice: Optional[list] = None
    slice_point: Optional[list] = None
    slice_weights: Optional[list] = None
    slice_radius: float = 0.1
    seed: int = 0
    momentum_rows: int = 16
    max_pairs: int = 1000
    coeff_bound: int = 3
    out_dir: str = "."
    report_name: str = "report.json"
    polylines_name: str = "polylines.csv"
    summary_name: str = "summary.json"
    base_dir: Path = field(default_factory=Path.cwd, repr=False)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def report_path(self) -> Path:
        return self._out(self.report_name)

    @property
    def polylines_path(self) -> Path:
        return self._out(self.polylines_name)

    @property
    def summary_path(self) -> Path:
        return self._out(self.summary_name)

    def _out(self, name: str) -> Path:
        return self.resolve(self.out_dir) / name

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        """The validated document with defaults filled in."""
        d = copy.deepcopy(self.raw)
        d.setdefault("mesh", {})
        if self.resolution is not None:
            d["mesh"].setdefault("resolution", self.resolution)
        d["tasks"] = list(self.tasks)
        return d


def _periods(raw) -> list:
    return [math.inf if isinstance(p, str) else float(p) for p in raw]


def parse_config(doc: dict, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a config document and return the resolved :class:`RunConfig`."""
    try:
        jsonschema.validate(doc, load_schema("run_config"))
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}") from None

    tol = doc.get("tolerances", {})
    mesh = doc.get("mesh", {})
    sl = doc.get("slice", {})
    smp = doc.get("sampling", {})
    out = doc.get("output", {})
    tasks = doc.get("tasks", ["all"])
    tasks = TASKS if "all" in tasks else tuple(t for t in TASKS if t in tasks)

    cfg = RunConfig(
        example=doc.get("example"),
        model=doc.get("model"),
        input=doc.get("input"),
        resolution=mesh.get("resolution"),
        extent=mesh.get("extent", 1.0),
        eps_fiber=tol.get("eps_fiber"),
        tol_convexity=tol.get("tol_convexity"),
        radius_hops=tol.get("radius_hops", 2),
        eps_gap=tol.get("eps_gap", 1e-7),
        tol_normal_form=tol.get("normal_form", 1e-6),
        tasks=tasks,
        target_lattice=doc.get("target_lattice"),
        slice_point=sl.get("point"),
        slice_weights=sl.get("weights"),
        slice_radius=sl.get("radius", 0.1),
        seed=smp.get("seed", 0),
        momentum_rows=smp.get("momentum_rows", 16),
        max_pairs=smp.get("max_pairs", 1000),
        coeff_bound=smp.get("coeff_bound", 3),
        out_dir=out.get("dir", "."),
        report_name=out.get("report", "report.json"),
        polylines_name=out.get("polylines", "polylines.csv"),
        summary_name=out.get("summary", "summary.json"),
        base_dir=Path.cwd() if base_dir is None else Path(base_dir),
        raw=copy.deepcopy(doc),
    )
    if cfg.model is not None:
        m = cfg.model
        k, n = len(m["generators"]), len(m["periods"])
        if np.shape(m["omega"]) != (n, n):
            raise ConfigError("model.omega must be square of the model dimension")
        if any(len(g) != n for g in m["generators"]):
            raise ConfigError("model.generators rows must match the model dimension")
        if cfg.target_lattice is not None and any(len(r) != k for r in cfg.target_lattice):
            raise ConfigError("target_lattice rows must live in the dual of the algebra")
    if cfg.input is not None and set(cfg.tasks) - {"harness"}:
        cfg.tasks = ("harness",)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return parse_config(doc, base_dir=path.parent)


def example_config(name: str, resolution: Optional[int] = None, out_dir: str = ".") -> RunConfig:
    doc: dict = {"schema_version": SCHEMA_VERSION, "example": name, "output": {"dir": str(out_dir)}}
    if resolution is not None:
        doc["mesh"] = {"resolution": resolution}
    return parse_config(doc)


def model_from_dict(d: dict):
    from .models import SymplecticTorusModel

    return SymplecticTorusModel(
        np.asarray(d["omega"], float),
        _periods(d["periods"]),
        np.asarray(d["generators"], float),
        None if d.get("linear_generators") is None else np.asarray(d["linear_generators"], float),
        name=d.get("name", "custom"),
    )
