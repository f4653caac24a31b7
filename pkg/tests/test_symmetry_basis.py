import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from rdmft_lattice.core_model import InteractionSpec, LatticeSpec, build_interaction_matrix
from rdmft_lattice.errors import DimensionError, PreconditionError
from rdmft_lattice.hubbard_square import (
    N2_ORBITAL,
    square_hamiltonian,
    square_lattice,
    square_sector_basis,
)
from rdmft_lattice.oracle_ed import ground_state
from rdmft_lattice.symmetry_basis import (
    SectorBasis,
    SectorLabel,
    adapt_symmetry,
    all_sectors,
    enumerate_sector,
    occupation_map,
    one_body_density_matrix,
    parity_matrix,
    spin_squared_matrix,
    vertex_vectors,
)


def test_ring_sector(ring_basis):
    assert ring_basis.configurations == ((0, 1, 5), (0, 2, 4), (1, 2, 3), (3, 4, 5))
    assert vertex_vectors(ring_basis).tolist() == [
        [1, 1, 0, 0, 0, 1],
        [1, 0, 1, 0, 1, 0],
        [0, 1, 1, 1, 0, 0],
        [0, 0, 0, 1, 1, 1],
    ]


def test_square_sector_has_ten_determinants():
    basis = square_sector_basis()
    assert basis.size == 10
    assert (0, 1, 6, 7) in basis.configurations
    assert list(basis.configurations) == sorted(basis.configurations)


def test_all_sectors_cover_the_space():
    sectors = all_sectors(square_lattice(), 4)
    assert sum(basis.size for basis in sectors) == 70
    keys = [(basis.sector.K, basis.sector.Mz) for basis in sectors]
    assert keys == sorted(keys)
    assert all(basis.size > 0 for basis in sectors)


@pytest.mark.parametrize(
    "n_particles, sector, error",
    (
        (0, SectorLabel(K=(0,), Mz=0.0), PreconditionError),
        (9, SectorLabel(K=(0,), Mz=0.0), PreconditionError),
        (4, SectorLabel(K=(0, 0), Mz=0.0), DimensionError),
        (4, SectorLabel(K=(4,), Mz=0.0), DimensionError),
        (4, SectorLabel(K=(0,)), PreconditionError),
        (4, SectorLabel(K=(0,), Mz=2.5), PreconditionError),
        (3, SectorLabel(K=(0,), Mz=-2.0), PreconditionError),
    ),
)
def test_enumerate_sector_errors(n_particles, sector, error):
    with pytest.raises(error):
        enumerate_sector(square_lattice(), n_particles, sector)


def test_empty_sector_is_allowed():
    lattice = LatticeSpec(D=1, L=4, spinful=False)
    basis = enumerate_sector(lattice, 4, SectorLabel(K=(0,)))
    assert basis.size == 0
    with pytest.raises(PreconditionError):
        vertex_vectors(basis)


def test_sector_label_validation():
    with pytest.raises(ValidationError):
        SectorLabel(K=(0,), Mz=0.25)
    with pytest.raises(ValidationError):
        SectorLabel(K=(0,), Mz=1.0, S=0.0)
    with pytest.raises(ValidationError):
        SectorLabel(K=(0,), Mz=0.0, parity=2)
    assert SectorLabel(K=(2,), Mz=0.0, S=0.0, parity=-1).short() == "K=2 Mz=0 S=0 p=-1"


def test_spin_and_parity_commute():
    basis = square_sector_basis()
    s2 = spin_squared_matrix(basis)
    parity = parity_matrix(basis)
    assert np.allclose(s2, s2.T)
    assert np.allclose(parity @ parity, np.eye(basis.size))
    assert np.allclose(s2 @ parity, parity @ s2)
    assert set(np.round(np.linalg.eigvalsh(s2), 8)) <= {0.0, 2.0, 6.0}


def test_adapted_square_block(square_basis):
    adapted = adapt_symmetry(square_sector_basis(), 0.0, -1)
    assert adapted.size == 3
    assert np.allclose(adapted.coefficients @ adapted.coefficients.T, np.eye(3))
    assert np.allclose(adapted.projector(), square_basis.projector())
    assert adapted.sector.short() == "K=2 Mz=0 S=0 p=-1"


def test_adapt_needs_spin(ring_basis):
    with pytest.raises(PreconditionError):
        adapt_symmetry(ring_basis, 0.0, None)


def test_square_occupation_map(square_basis):
    M = occupation_map(square_basis)
    assert M.shape == (8, 3)
    assert np.allclose(M[N2_ORBITAL], [0.0, 1.0, 0.5])
    assert np.allclose(M[0], [1.0, 0.0, 0.5])
    assert np.allclose(M[2], 0.5)
    assert np.allclose(M.sum(axis=0), 4.0)


def test_ground_state_density_matrix_is_diagonal():
    hamiltonian = square_hamiltonian(4.0)
    result = ground_state(hamiltonian)
    gamma = one_body_density_matrix(hamiltonian.basis, result.vector)
    assert np.allclose(gamma, np.diag(np.diag(gamma)), atol=1e-12)
    assert np.allclose(np.diag(gamma), result.occupations, atol=1e-12)
    assert np.trace(gamma) == pytest.approx(4.0)


def test_sector_determinants_differ_in_two_orbitals(ring_basis):
    for basis in (ring_basis, square_sector_basis()):
        vertices = vertex_vectors(basis)
        for r, s in itertools.combinations(range(basis.size), 2):
            assert np.abs(vertices[r] - vertices[s]).sum() >= 4


def test_interaction_has_no_cross_sector_elements():
    lattice = square_lattice()
    blocks = [
        enumerate_sector(lattice, 4, SectorLabel(K=(k,), Mz=0.0)).configurations
        for k in (0, 2)
    ]
    mixed = SectorBasis.from_configurations(lattice, blocks[0] + blocks[1])
    V = build_interaction_matrix(InteractionSpec(kind="hubbard", U=3.0), mixed).values
    first = len(blocks[0])
    assert np.abs(V[:first, first:]).max() < 1e-12
    assert np.abs(V[first:, :first]).max() < 1e-12
    assert np.abs(V[:first, :first]).max() > 0


def test_adapted_rows_are_symmetry_eigenvectors():
    basis = square_sector_basis()
    s2 = spin_squared_matrix(basis)
    parity = parity_matrix(basis)
    for S, p in ((0.0, -1), (0.0, 1), (1.0, -1)):
        adapted = adapt_symmetry(basis, S, p)
        for row in adapted.coefficients:
            assert np.allclose(s2 @ row, S * (S + 1) * row, atol=1e-10)
            assert np.allclose(parity @ row, p * row, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_random_sector_state_has_diagonal_density_matrix(seed):
    basis = square_sector_basis()
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
    psi /= np.linalg.norm(psi)
    gamma = one_body_density_matrix(basis, psi)
    assert np.allclose(gamma, np.diag(np.diag(gamma)), atol=1e-12)
    expected = (np.abs(psi) ** 2) @ vertex_vectors(basis)
    assert np.allclose(np.diag(gamma).real, expected, atol=1e-12)
