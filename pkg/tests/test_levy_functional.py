import itertools
import math
from typing import Callable

import numpy as np
import pytest

from conftest import random_sign_definite, random_symmetric
from rdmft_lattice.errors import (
    DimensionError,
    InfeasibleError,
    ModelError,
    NotSimplexError,
    OutsidePolytopeError,
    StepTooLargeError,
    UnsupportedFeatureError,
)
from rdmft_lattice.hubbard_square import exact_functional_square
from rdmft_lattice.levy_functional import (
    ConstrainedSearchProblem,
    SearchOptions,
    boundary_expansion,
    exchange_force,
    functional_ensemble,
    functional_general,
    functional_simplex,
    interaction_values,
    sign_structure,
)
from rdmft_lattice.oracle_ed import levy_brute_force
from rdmft_lattice.polytope import build_polytope
from rdmft_lattice.symmetry_basis import SectorBasis

RING_GRID = [
    np.array(w) / sum(w)
    for w in itertools.product((1, 2, 3), repeat=4)
    if len(set(w)) > 1
][:12]

OCTAHEDRON_POINTS = (
    [0.5, 0.5, 0.5],
    [0.3, 0.6, 0.5],
    [0.7, 0.2, 0.4],
)


def finite_difference_first_derivative(func: Callable, x: float, h: float = 1e-5):
    f_plus = func(x + h)
    f_minus = func(x - h)
    return (f_plus - f_minus) / h / 2


def ring_point(polytope, weights):
    return weights @ polytope.chart_vertices


def test_sign_structure():
    assert np.array_equal(sign_structure(random_sign_definite(5, 1)), np.ones(5))
    frustrated = np.ones((3, 3))
    assert sign_structure(frustrated) is None
    bipartite = np.array([[0.0, 1.0], [1.0, 0.0]])
    eta = sign_structure(bipartite)
    assert eta[0] * eta[1] == -1


def test_interaction_values_rejects_bad_matrices():
    with pytest.raises(UnsupportedFeatureError):
        interaction_values(np.array([[1.0, 1j], [-1j, 1.0]]))
    with pytest.raises(ModelError):
        interaction_values(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        interaction_values(np.ones((2, 3)))


def test_simplex_at_vertices(ring_polytope, ring_interaction):
    values = ring_interaction.values
    for r, vertex in enumerate(ring_polytope.chart_vertices):
        evaluation = functional_simplex(ring_polytope, ring_interaction, vertex)
        assert evaluation.value == pytest.approx(values[r, r], abs=1e-12)
        assert evaluation.weights[r] == pytest.approx(1.0)


def test_simplex_at_centroid(ring_polytope):
    V = random_symmetric(4, 3)
    evaluation = functional_simplex(ring_polytope, V, ring_polytope.centroid)
    best = min(
        0.25 * np.array(eta) @ V @ np.array(eta)
        for eta in itertools.product((-1.0, 1.0), repeat=4)
    )
    assert evaluation.value == pytest.approx(best, abs=1e-12)


def test_simplex_rejects(ring_polytope, ring_interaction, square_poly, square_V):
    with pytest.raises(OutsidePolytopeError):
        functional_simplex(ring_polytope, ring_interaction, [1.0, 1.0, 1.0])
    with pytest.raises(NotSimplexError):
        functional_simplex(square_poly, square_V, [0.5])


@pytest.mark.parametrize("seed", range(3))
def test_simplex_matches_general(ring_polytope, seed):
    V = random_symmetric(4, seed)
    problem = ConstrainedSearchProblem.build(ring_polytope, V)
    for weights in RING_GRID:
        point = ring_point(ring_polytope, weights)
        closed = functional_simplex(ring_polytope, V, point).value
        searched = functional_general(problem, n=point).value
        assert searched == pytest.approx(closed, abs=1e-10)


@pytest.mark.parametrize("n2", (0.05, 0.2, 0.35, 0.5, 0.65, 0.9))
def test_general_matches_square_closed_form(square_poly, square_V, n2):
    evaluation = functional_general(square_poly, square_V, [n2])
    assert evaluation.converged
    assert evaluation.rank == 1
    assert evaluation.value == pytest.approx(exact_functional_square(1.0, n2), abs=1e-8)


def test_general_accepts_full_occupations(square_poly, square_V):
    full = square_poly.expand([0.3])
    assert functional_general(square_poly, square_V, full).value == pytest.approx(
        functional_general(square_poly, square_V, [0.3]).value
    )
    with pytest.raises(DimensionError):
        functional_general(square_poly, square_V, [0.3, 0.3])
    with pytest.raises(InfeasibleError):
        functional_general(square_poly, square_V, [1.2])


@pytest.mark.parametrize("n2", (0.1, 0.25, 0.4, 0.55, 0.7, 0.9))
def test_general_matches_brute_force_square(square_basis, square_poly, square_V, n2):
    V = square_V.scaled(3.0)
    searched = functional_general(square_poly, V, [n2]).value
    brute = levy_brute_force(square_basis, V, square_poly.expand([n2]), restarts=30)
    assert searched == pytest.approx(brute, abs=1e-6)


@pytest.mark.parametrize("seed", range(12))
def test_general_matches_brute_force_ring(ring_basis, ring_polytope, seed):
    V = random_symmetric(4, 10 + seed)
    point = ring_point(ring_polytope, RING_GRID[seed])
    searched = functional_general(ring_polytope, V, point).value
    brute = levy_brute_force(ring_basis, V, ring_polytope.expand(point), restarts=40)
    assert searched == pytest.approx(brute, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("point", OCTAHEDRON_POINTS)
def test_general_matches_brute_force_octahedron(
    octahedron_basis, octahedron_polytope, seed, point
):
    V = random_sign_definite(6, seed)
    evaluation = functional_general(octahedron_polytope, V, point)
    assert evaluation.rank == 2
    brute = levy_brute_force(
        octahedron_basis, V, octahedron_polytope.expand(point), restarts=20, seed=seed
    )
    assert evaluation.value == pytest.approx(brute, abs=1e-6)


def test_face_snapping(ring_polytope):
    V = random_symmetric(4, 7)
    problem = ConstrainedSearchProblem.build(ring_polytope, V)
    on_facet = ring_polytope.chart_vertices[1:].mean(axis=0)
    evaluation = problem.evaluate(on_facet)
    assert evaluation.active_facets == (0,)
    assert evaluation.weights[0] == 0.0
    assert evaluation.margin == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_pure_equals_ensemble_with_sign_structure(octahedron_polytope, seed):
    V = random_sign_definite(6, 20 + seed)
    for point in OCTAHEDRON_POINTS[:2]:
        pure = functional_general(octahedron_polytope, V, point)
        ensemble = functional_ensemble(octahedron_polytope, V, point)
        assert ensemble.value == pytest.approx(pure.value, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_ensemble_never_above_pure(octahedron_polytope, seed):
    V = random_symmetric(6, 30 + seed)
    for point in OCTAHEDRON_POINTS:
        pure = functional_general(octahedron_polytope, V, point)
        ensemble = functional_ensemble(octahedron_polytope, V, point)
        assert ensemble.value <= pure.value + 1e-8


def test_ensemble_midpoint_convexity(octahedron_polytope):
    V = random_sign_definite(6, 40)
    a = np.array(OCTAHEDRON_POINTS[1])
    b = np.array(OCTAHEDRON_POINTS[2])
    values = [
        functional_ensemble(octahedron_polytope, V, point).value
        for point in (a, b, 0.5 * (a + b))
    ]
    assert values[2] <= 0.5 * (values[0] + values[1]) + 1e-8


def test_exchange_force_matches_closed_form(square_poly, square_V):
    problem = ConstrainedSearchProblem.build(square_poly, square_V)
    gradient = exchange_force(problem, [0.3], step=1e-5)
    expected = finite_difference_first_derivative(
        lambda n2: exact_functional_square(1.0, n2), 0.3
    )
    assert gradient[0] == pytest.approx(expected, rel=1e-4)


@pytest.mark.parametrize("n2, facet", ((1e-3, 1), (1.0 - 1e-3, 0)))
def test_exchange_force_is_repulsive(square_poly, square_V, n2, facet):
    problem = ConstrainedSearchProblem.build(square_poly, square_V)
    gradient = exchange_force(problem, [n2], step=1e-5)
    assert -gradient @ square_poly.inward_normal(facet) > 0


def test_exchange_force_repulsive_on_ring(ring_polytope):
    V = random_sign_definite(4, 5)
    problem = ConstrainedSearchProblem.build(ring_polytope, V)
    for facet in range(4):
        tight = list(ring_polytope.tight_vertices(facet))
        anchor = ring_polytope.chart_vertices[tight].mean(axis=0)
        point = anchor + 1e-3 * (ring_polytope.centroid - anchor)
        gradient = exchange_force(problem, point, step=1e-6)
        assert -gradient @ ring_polytope.inward_normal(facet) > 0


def test_exchange_force_step_too_large(square_poly, square_V):
    problem = ConstrainedSearchProblem.build(square_poly, square_V)
    with pytest.raises(StepTooLargeError):
        exchange_force(problem, [1e-6], step=1e-5)


@pytest.mark.parametrize("facet", (0, 1))
def test_square_boundary_exponent(square_poly, square_V, facet):
    problem = ConstrainedSearchProblem.build(square_poly, square_V)
    expansion = boundary_expansion(problem, facet)
    assert expansion.value == pytest.approx(0.75, abs=1e-10)
    assert expansion.exponent == pytest.approx(0.5, abs=0.02)
    assert expansion.coefficient == pytest.approx(-math.sqrt(13.0) / 2.0, rel=0.01)
    assert not expansion.poor_fit


@pytest.mark.parametrize("seed", range(5))
def test_ring_boundary_exponent(ring_polytope, seed):
    V = random_sign_definite(4, 50 + seed)
    problem = ConstrainedSearchProblem.build(ring_polytope, V)
    for facet in range(4):
        F0, G, beta = boundary_expansion(problem, facet)
        assert beta == pytest.approx(0.5, abs=0.02)
        assert G < 0


def test_boundary_expansion_without_interaction(ring_polytope):
    problem = ConstrainedSearchProblem.build(ring_polytope, np.zeros((4, 4)))
    expansion = boundary_expansion(problem, 0)
    assert expansion.coefficient == 0.0
    assert math.isnan(expansion.exponent)


def test_boundary_expansion_needs_distances(square_poly, square_V):
    problem = ConstrainedSearchProblem.build(square_poly, square_V)
    with pytest.raises(DimensionError):
        boundary_expansion(problem, 0, distances=[1e-6, 1e-5])


def test_search_is_deterministic(octahedron_polytope):
    V = random_symmetric(6, 60)
    options = SearchOptions(seed=3)
    first = functional_general(octahedron_polytope, V, OCTAHEDRON_POINTS[1], options)
    second = functional_general(octahedron_polytope, V, OCTAHEDRON_POINTS[1], options)
    assert first.value == second.value
    assert np.array_equal(first.weights, second.weights)


@pytest.mark.parametrize("seed", range(25))
def test_general_matches_brute_force_without_sign_structure(
    octahedron_basis, octahedron_polytope, seed
):
    V = random_symmetric(6, 1000 + seed)
    assert sign_structure(V) is None
    rng = np.random.default_rng(1000 + seed)
    point = rng.dirichlet(np.ones(6)) @ octahedron_polytope.chart_vertices
    evaluation = functional_general(octahedron_polytope, V, point)
    assert evaluation.rank == 2
    assert evaluation.converged
    brute = levy_brute_force(
        octahedron_basis, V, octahedron_polytope.expand(point), seed=seed
    )
    assert evaluation.value == pytest.approx(brute, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_minimizer_is_feasible_and_reproduces_value(octahedron_polytope, seed):
    V = random_symmetric(6, 70 + seed)
    point = np.array(OCTAHEDRON_POINTS[seed])
    evaluation = functional_general(octahedron_polytope, V, point)
    x = evaluation.weights
    assert (x >= 0).all()
    assert x.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(x @ octahedron_polytope.chart_vertices, point, atol=1e-10)
    assert evaluation.contraction(V) == pytest.approx(evaluation.value, abs=1e-12)


@pytest.mark.parametrize("shift", (-2.0, 0.7))
def test_diagonal_shift_moves_value(square_poly, square_V, octahedron_polytope, shift):
    for n2 in (0.2, 0.6):
        base = functional_general(square_poly, square_V, [n2]).value
        moved = functional_general(square_poly, square_V.shifted(shift), [n2]).value
        assert moved == pytest.approx(base + shift, abs=1e-8)
    V = random_sign_definite(6, 80)
    point = OCTAHEDRON_POINTS[1]
    base = functional_general(octahedron_polytope, V, point).value
    moved = functional_general(octahedron_polytope, V + shift * np.eye(6), point).value
    assert moved == pytest.approx(base + shift, abs=1e-8)


def test_vertex_order_does_not_change_value(octahedron_basis):
    V = random_sign_definite(6, 90)
    order = [3, 0, 5, 1, 4, 2]
    permuted = SectorBasis.from_configurations(
        octahedron_basis.lattice, [octahedron_basis.configurations[r] for r in order]
    )
    original = build_polytope(octahedron_basis)
    shuffled = build_polytope(permuted)
    for point in OCTAHEDRON_POINTS:
        expected = functional_general(original, V, point).value
        value = functional_general(shuffled, V[np.ix_(order, order)], point).value
        assert value == pytest.approx(expected, abs=1e-6)


def test_gram_decomposition(square_poly, square_V):
    problem = ConstrainedSearchProblem.build(square_poly, square_V)
    eigenvalues, eigenvectors = problem.gram
    assert np.allclose(eigenvalues, [0.0, 1.0, 1.5], atol=1e-12)
    null = eigenvectors[:, 0] * np.sign(eigenvectors[0, 0])
    assert np.allclose(null, np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0), atol=1e-12)
    assert np.allclose(square_poly.incidence_values @ null, 0.0, atol=1e-12)
