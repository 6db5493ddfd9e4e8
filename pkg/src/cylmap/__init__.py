"""Cylinder valued momentum maps on flat symplectic models and an empirical
local-to-global convexity harness."""

from .cylinder import (
    ClosedSubgroup,
    CylinderPoint,
    GeodesicLift,
    cyl_distance,
    enumerate_lifts,
    enumerate_minimizing_lifts,
    geodesic_polyline,
    injectivity_radius,
    project,
)
from .harness import (
    SampledMap,
    build_fiber_quotient,
    check_local_conditions,
    dtilde,
    fiber_connectivity_report,
    verify_weak_convexity,
)
from .holonomy import HolonomyNotClosed, holonomy_group, momentum, momentum_map, parallel_transport
from .metric import MetricSpace, Polyline, check_convex_subset, polyline_length
from .models import SymplecticTorusModel, chu_map, standard_omega
from .normal_form import TorusRepresentation, local_normal_form, rep_momentum, slice_splitting

__version__ = "0.1.0"
