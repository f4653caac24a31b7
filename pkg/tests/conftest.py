import itertools

import numpy as np
import pytest

from rdmft_lattice.core_model import InteractionSpec, LatticeSpec, build_interaction_matrix
from rdmft_lattice.hubbard_square import (
    square_adapted_basis,
    square_interaction,
    square_polytope,
)
from rdmft_lattice.polytope import build_polytope
from rdmft_lattice.symmetry_basis import SectorBasis, SectorLabel, enumerate_sector


def random_sign_definite(size: int, seed: int) -> np.ndarray:
    """
    Symmetric matrix with strictly negative off-diagonal entries.
    """
    rng = np.random.default_rng(seed)
    off = -rng.uniform(0.2, 1.0, (size, size))
    values = np.triu(off, 1)
    values = values + values.T
    values[np.diag_indices(size)] = rng.uniform(-1.0, 1.0, size)
    return values


def random_symmetric(size: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((size, size))
    return 0.5 * (values + values.T)


@pytest.fixture(scope="session")
def ring_lattice():
    return LatticeSpec(D=1, L=6, t=1.0, spinful=False)


@pytest.fixture(scope="session")
def ring_basis(ring_lattice):
    return enumerate_sector(ring_lattice, 3, SectorLabel(K=(0,)))


@pytest.fixture(scope="session")
def ring_polytope(ring_basis):
    return build_polytope(ring_basis)


@pytest.fixture(scope="session")
def ring_interaction(ring_basis):
    spec = InteractionSpec(kind="density-density", couplings=(1.0,))
    return build_interaction_matrix(spec, ring_basis)


@pytest.fixture(scope="session")
def square_basis():
    return square_adapted_basis()


@pytest.fixture(scope="session")
def square_poly(square_basis):
    return square_polytope(square_basis)


@pytest.fixture(scope="session")
def square_V(square_basis):
    return square_interaction(1.0, square_basis)


@pytest.fixture(scope="session")
def octahedron_basis():
    """
    All two-particle configurations of four spinless orbitals. Their
    occupation vectors span an octahedron, which is not a simplex.
    """
    lattice = LatticeSpec(D=1, L=4, spinful=False)
    return SectorBasis.from_configurations(lattice, list(itertools.combinations(range(4), 2)))


@pytest.fixture(scope="session")
def octahedron_polytope(octahedron_basis):
    return build_polytope(octahedron_basis)
