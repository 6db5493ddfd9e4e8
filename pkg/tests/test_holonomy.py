import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from cylmap.cylinder import ClosedSubgroup, cyl_distance, project
from cylmap.holonomy import (
    HolonomyNotClosed,
    NotInvariant,
    holonomy_generators,
    holonomy_group,
    lattice_from_generators,
    momentum,
    momentum_map,
    momentum_values,
    noether_check,
    nonequivariance_cocycle,
    parallel_transport,
    poisson_bracket,
    tangent_momentum,
)
from cylmap.metric import Polyline, concatenate
from cylmap.models import TWO_PI, SymplecticTorusModel, loop_basis, standard_omega, straight_path
from cylmap.normal_form import TorusRepresentation, linear_rep_model

W = np.array([[0.0, 1.0], [-1.0, 0.0]])
S1_T2 = SymplecticTorusModel(W, [TWO_PI, TWO_PI], [[1, 0]])
S1_T2_DOUBLED = SymplecticTorusModel(2 * W, [TWO_PI, TWO_PI], [[1, 0]])
R2_T2 = SymplecticTorusModel(W, [TWO_PI, TWO_PI], [[1, 0], [0, 1]])
CIRCLE = ClosedSubgroup(1, lattice_basis=[[TWO_PI]])
TWO_TORUS = ClosedSubgroup(2, lattice_basis=TWO_PI * np.eye(2))


# parallel_transport


def test_transport_phi2_loop():
    phi1_loop, phi2_loop = loop_basis(S1_T2, steps=32)
    assert parallel_transport(S1_T2, phi2_loop).delta_nu[0] == pytest.approx(TWO_PI, abs=1e-12)
    assert parallel_transport(S1_T2, phi1_loop).delta_nu[0] == pytest.approx(0.0, abs=1e-12)


def test_transport_constant_path():
    c = Polyline([[1.0, 2.0]] * 5, S1_T2.space)
    np.testing.assert_array_equal(parallel_transport(R2_T2, c).delta_nu, [0.0, 0.0])


def test_transport_linear_rep_matches_quadratic():
    rep = TorusRepresentation([[1.0, 0.0], [0.0, 1.0]])
    model = linear_rep_model(rep)
    m = np.array([0.3, -0.2, 0.5, 0.1])
    c = straight_path(model, np.zeros(4), m, steps=3)
    res = parallel_transport(model, c)
    # oracle: (|z_1|^2 / 2, |z_2|^2 / 2)
    np.testing.assert_allclose(res.delta_nu, [0.5 * (0.09 + 0.04), 0.5 * (0.25 + 0.01)], atol=1e-15)
    assert res.estimated_error < 1e-14


def test_transport_needs_path():
    with pytest.raises(ValueError):
        parallel_transport(S1_T2, None)


@settings(max_examples=30)
@given(
    st.lists(st.tuples(st.floats(0, TWO_PI), st.floats(0, TWO_PI)), min_size=2, max_size=6),
    st.lists(st.tuples(st.floats(0, TWO_PI), st.floats(0, TWO_PI)), min_size=1, max_size=6),
)
def test_transport_additive(a, b):
    c1 = Polyline(a, R2_T2.space)
    c2 = Polyline([a[-1]] + b, R2_T2.space)
    whole = parallel_transport(R2_T2, concatenate(c1, c2)).delta_nu
    parts = parallel_transport(R2_T2, c1).delta_nu + parallel_transport(R2_T2, c2).delta_nu
    np.testing.assert_allclose(whole, parts, atol=1e-12)


# holonomy group


def test_holonomy_standard():
    H = holonomy_group(S1_T2)
    assert H.rank == 1
    assert abs(H.lattice_basis[0, 0]) == pytest.approx(TWO_PI)


def test_holonomy_doubled():
    H = holonomy_group(S1_T2_DOUBLED)
    assert abs(H.lattice_basis[0, 0]) == pytest.approx(4 * math.pi)


def test_holonomy_vector_space_trivial():
    model = linear_rep_model(TorusRepresentation([[1.0]]))
    assert holonomy_generators(model).shape == (0, 1)
    assert holonomy_group(model).rank == 0


def test_holonomy_two_generators():
    H = holonomy_group(R2_T2)
    assert H.rank == 2
    assert abs(np.linalg.det(H.lattice_basis)) == pytest.approx(TWO_PI**2)


def test_holonomy_irrational_raises():
    model = SymplecticTorusModel(W, [TWO_PI, TWO_PI], [[1, math.sqrt(2)]])
    with pytest.raises(HolonomyNotClosed):
        holonomy_group(model)


def test_lattice_folds_rational_generators():
    H = lattice_from_generators([[1.0], [1.5]], 1)
    assert abs(H.lattice_basis[0, 0]) == pytest.approx(0.5)
    H2 = lattice_from_generators([[1, 0], [0, 1], [0.5, 0.5]], 2)
    assert abs(np.linalg.det(H2.lattice_basis)) == pytest.approx(0.5)


def test_lattice_drops_zero_generators():
    H = lattice_from_generators([[0.0, 0.0], [0.0, 3.0]], 2)
    assert H.rank == 1


def test_lattice_irrational_raises():
    with pytest.raises(HolonomyNotClosed, match="not supported"):
        lattice_from_generators([[1.0], [math.sqrt(2)]], 1)


# momentum


def test_momentum_second_circle(rng):
    H = holonomy_group(S1_T2)
    for m in rng.uniform(0, TWO_PI, (20, 2)):
        k = momentum(S1_T2, H, m).value
        assert cyl_distance(k, project([m[1]], H)) < 1e-12


def test_momentum_doubled(rng):
    H = holonomy_group(S1_T2_DOUBLED)
    for m in rng.uniform(0, TWO_PI, (20, 2)):
        k = momentum(S1_T2_DOUBLED, H, m).value
        assert cyl_distance(k, project([2 * m[1]], H)) < 1e-12
        assert math.isclose(k.rep[0] % (4 * math.pi), k.rep[0])


def test_momentum_at_basepoint():
    base = np.array([1.0, 2.0])
    c = Polyline([base, base], S1_T2.space)
    k = momentum_map(S1_T2, CIRCLE, base, base, [7.0], c)
    assert k.value.isclose(project([7.0], CIRCLE))


def test_momentum_path_must_connect():
    c = Polyline([[0, 0], [1, 0]], S1_T2.space)
    with pytest.raises(ValueError, match="connect"):
        momentum_map(S1_T2, CIRCLE, [0, 1], [0, 0], [0.0], c)


def test_momentum_values_match_single(rng):
    pts = rng.uniform(0, TWO_PI, (10, 2))
    many = momentum_values(R2_T2, TWO_TORUS, pts)
    for p, v in zip(pts, many):
        assert cyl_distance(momentum(R2_T2, TWO_TORUS, p).value, project(v, TWO_TORUS)) < 1e-12
    # oracle (phi2, -phi1)
    want = TWO_TORUS.canonical(np.stack([pts[:, 1], -pts[:, 0]], 1))
    np.testing.assert_allclose(TWO_TORUS.distances(many, want), 0.0, atol=1e-12)


@settings(max_examples=25)
@given(
    st.tuples(st.floats(0, TWO_PI), st.floats(0, TWO_PI)),
    st.tuples(st.floats(0, TWO_PI), st.floats(0, TWO_PI)),
)
def test_path_independence_mod_holonomy(m, base):
    vals = [
        momentum(R2_T2, TWO_TORUS, m, basepoint=base, winding=w).value
        for w in ([0, 0], [1, 0], [0, -1], [2, 3])
    ]
    assert max(cyl_distance(vals[0], v) for v in vals[1:]) <= 1e-8


# tangent momentum, kernel


def test_tangent_momentum_examples():
    assert tangent_momentum(S1_T2, [0, 0], [0, 1]) == pytest.approx([1.0])
    assert tangent_momentum(S1_T2, [0, 0], [1, 0]) == pytest.approx([0.0])
    assert tangent_momentum(S1_T2, [0, 0], [0, 0]) == pytest.approx([0.0])


def test_bifurcation_rank_and_kernel():
    omega = standard_omega(2)
    gens = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0.5]])
    model = SymplecticTorusModel(omega, [TWO_PI] * 4, gens)
    m = np.array([0.1, 0.2, 0.3, 0.4])
    T = np.stack([tangent_momentum(model, m, e) for e in np.eye(4)], 1)
    assert np.linalg.matrix_rank(T) == model.algebra_dim
    ker = null_space(T)
    assert ker.shape[1] == 4 - model.algebra_dim
    # omega-orthogonal of the orbit directions, computed independently
    orth = null_space(gens @ omega)
    assert np.linalg.matrix_rank(np.hstack([ker, orth])) == ker.shape[1]


# Noether


def test_noether_invariant_hamiltonian():
    H = holonomy_group(S1_T2)
    drift = noether_check(S1_T2, H, lambda m: math.cos(m[1]), [0.4, 1.3], 5.0, 0.01)
    assert drift <= 1e-6


def test_noether_constant_hamiltonian():
    assert noether_check(S1_T2, CIRCLE, lambda m: 1.0, [0.4, 1.3], 1.0, 0.1) == 0.0


def test_noether_rejects_non_invariant():
    with pytest.raises(NotInvariant):
        noether_check(S1_T2, CIRCLE, lambda m: math.cos(m[0]), [0.4, 1.3], 1.0, 0.1)


# cocycle and equivariance


def test_cocycle_rotation_in_phi1():
    s = nonequivariance_cocycle(S1_T2, CIRCLE, [0.7])
    assert cyl_distance(s, project([0.0], CIRCLE)) < 1e-12


def test_cocycle_identity_element():
    s = nonequivariance_cocycle(R2_T2, TWO_TORUS, [0.0, 0.0])
    assert cyl_distance(s, project([0.0, 0.0], TWO_TORUS)) < 1e-12


def test_cocycle_both_translations():
    sval = 0.9
    s = nonequivariance_cocycle(R2_T2, TWO_TORUS, [0.0, sval])
    # translating phi2 by s moves K = (phi2, -phi1) by (s, 0)
    assert cyl_distance(s, project([sval, 0.0], TWO_TORUS)) < 1e-12


@settings(max_examples=20)
@given(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_cocycle_additive(g1, g2):
    s1 = nonequivariance_cocycle(R2_T2, TWO_TORUS, g1)
    s2 = nonequivariance_cocycle(R2_T2, TWO_TORUS, g2)
    s12 = nonequivariance_cocycle(R2_T2, TWO_TORUS, np.add(g1, g2))
    assert cyl_distance(s12, s1 + s2) <= 1e-8


@settings(max_examples=20)
@given(
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.tuples(st.floats(0, TWO_PI), st.floats(0, TWO_PI)),
)
def test_equivariance(g, m):
    sigma = nonequivariance_cocycle(R2_T2, TWO_TORUS, g)
    lhs = momentum(R2_T2, TWO_TORUS, R2_T2.act(g, m)).value
    rhs = momentum(R2_T2, TWO_TORUS, m).value + sigma
    assert cyl_distance(lhs, rhs) <= 1e-8


# Poisson bracket


def test_bracket_single_generator_zero():
    f = lambda p: math.sin(p.rep[0])  # noqa: E731
    g = lambda p: math.cos(2 * p.rep[0])  # noqa: E731
    assert poisson_bracket(S1_T2, CIRCLE, f, g, project([1.0], CIRCLE), [0, 0]) == 0.0


def test_bracket_antisymmetric_self():
    f = lambda p: math.sin(p.rep[0]) * math.cos(p.rep[1])  # noqa: E731
    assert poisson_bracket(R2_T2, TWO_TORUS, f, f, project([1.0, 2.0], TWO_TORUS), [0, 0]) == pytest.approx(0.0, abs=1e-12)


def test_bracket_coordinates():
    f = lambda p: p.rep[0]  # noqa: E731
    g = lambda p: p.rep[1]  # noqa: E731
    val = poisson_bracket(R2_T2, TWO_TORUS, f, g, project([1.0, 2.0], TWO_TORUS), [0, 0])
    assert val == pytest.approx(1.0, abs=1e-9)


def test_bracket_step_validation():
    with pytest.raises(ValueError):
        poisson_bracket(S1_T2, CIRCLE, lambda p: 0.0, lambda p: 0.0, project([1.0], CIRCLE), [0, 0], step=4.0)
