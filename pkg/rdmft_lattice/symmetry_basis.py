"""
Slater-determinant bases of (K, Mz) sectors, their vertex occupation
vectors, and recombination into total-spin and parity eigenstates.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .core_model import LatticeSpec, SpinMomentumOrbital
from .errors import (
    DimensionError,
    NotDiagonalError,
    PreconditionError,
    SymmetryError,
)
from .fermions import (
    apply_operator,
    bits_from_orbitals,
    orbitals_from_bits,
    reorder_sign,
)

logger = logging.getLogger(__name__)

EIGENVALUE_TOLERANCE = 1e-8
CROSS_TERM_TOLERANCE = 1e-12


def check_sector_values(Mz: Optional[float], S: Optional[float], parity: Optional[int]) -> None:
    if Mz is not None and (2 * Mz) != int(2 * Mz):
        raise ValueError("Mz must be a half-integer")
    if S is not None:
        if S < 0 or (2 * S) != int(2 * S):
            raise ValueError("S must be a non-negative half-integer")
        if Mz is not None and S < abs(Mz):
            raise ValueError("S must be at least |Mz|")
    if parity not in (None, 1, -1):
        raise ValueError("parity must be +1 or -1")


class SectorLabel(BaseModel):
    """
    Total momentum index vector K, magnetization Mz and the optional total
    spin S and reflection parity. Mz is None for spinless lattices.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    K: tuple[int, ...]
    Mz: Optional[float] = None
    S: Optional[float] = None
    parity: Optional[int] = None

    @model_validator(mode="after")
    def check_values(self):
        check_sector_values(self.Mz, self.S, self.parity)
        return self

    def with_symmetry(self, S: Optional[float], parity: Optional[int]) -> SectorLabel:
        return self.model_copy(update={"S": S, "parity": parity})

    def short(self) -> str:
        parts = ["K=" + ",".join(str(k) for k in self.K)]
        if self.Mz is not None:
            parts.append(f"Mz={self.Mz:g}")
        if self.S is not None:
            parts.append(f"S={self.S:g}")
        if self.parity is not None:
            parts.append(f"p={self.parity:+d}")
        return " ".join(parts)


def configuration_momentum(lattice: LatticeSpec, configuration: Sequence[int]):
    orbitals = lattice.orbitals()
    total = np.zeros(lattice.dimension, dtype=int)
    for q in configuration:
        total += np.array(orbitals[q].nu)
    return tuple(int(v) for v in np.mod(total, lattice.sites))


def configuration_magnetization(
    lattice: LatticeSpec, configuration: Sequence[int]
) -> Optional[float]:
    if not lattice.spinful:
        return None
    orbitals = lattice.orbitals()
    return 0.5 * sum(orbitals[q].spin for q in configuration)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    lattice: LatticeSpec
    n_particles: int
    sector: Optional[SectorLabel]
    configurations: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.configurations)

    @property
    def determinant_bits(self) -> tuple[int, ...]:
        return tuple(bits_from_orbitals(c) for c in self.configurations)

    @property
    def vertices(self) -> np.ndarray:
        out = np.zeros((self.size, self.lattice.n_orbitals), dtype=int)
        for r, configuration in enumerate(self.configurations):
            out[r, list(configuration)] = 1
        return out

    def orbital_labels(self, r: int) -> list[str]:
        orbitals = self.lattice.orbitals()
        return [orbitals[q].label() for q in self.configurations[r]]

    def index(self) -> dict[int, int]:
        return {bits: r for r, bits in enumerate(self.determinant_bits)}

    @classmethod
    def from_configurations(
        cls,
        lattice: LatticeSpec,
        configurations: Sequence[Sequence[int]],
        sector: Optional[SectorLabel] = None,
    ) -> SectorBasis:
        """
        Basis over an arbitrary list of configurations, which need not share
        a sector.
        """
        normalized = tuple(tuple(sorted(c)) for c in configurations)
        sizes = {len(c) for c in normalized}
        if len(sizes) > 1:
            raise PreconditionError("Configurations have different particle numbers")
        for c in normalized:
            if len(set(c)) != len(c) or any(q < 0 or q >= lattice.n_orbitals for q in c):
                raise PreconditionError("Invalid configuration", {"configuration": c})
        n_particles = sizes.pop() if sizes else 0
        return cls(lattice, n_particles, sector, normalized)


def _check_particles(lattice: LatticeSpec, n_particles: int) -> None:
    if n_particles <= 0 or n_particles > lattice.n_orbitals:
        raise PreconditionError(
            "Particle number must lie in 1..d",
            {"N": n_particles, "d": lattice.n_orbitals},
        )


def enumerate_sector(
    lattice: LatticeSpec, n_particles: int, sector: SectorLabel
) -> SectorBasis:
    _check_particles(lattice, n_particles)
    if len(sector.K) != lattice.dimension:
        raise DimensionError(
            "Sector momentum has wrong length",
            {"K": sector.K, "D": lattice.dimension},
        )
    if any(k < 0 or k >= lattice.sites for k in sector.K):
        raise DimensionError("Sector momentum out of range", {"K": sector.K})
    if lattice.spinful and sector.Mz is None:
        raise PreconditionError("Spinful lattices need an Mz in the sector label")
    if sector.Mz is not None and abs(sector.Mz) > 0.5 * n_particles:
        raise PreconditionError(
            "Magnetization exceeds N/2", {"Mz": sector.Mz, "N": n_particles}
        )

    configurations = tuple(
        c
        for c in itertools.combinations(range(lattice.n_orbitals), n_particles)
        if configuration_momentum(lattice, c) == tuple(sector.K)
        and configuration_magnetization(lattice, c) == (
            sector.Mz if lattice.spinful else None
        )
    )
    logger.debug("Sector %s holds %d determinants", sector.short(), len(configurations))
    return SectorBasis(lattice, n_particles, sector.with_symmetry(None, None), configurations)


def all_sectors(lattice: LatticeSpec, n_particles: int) -> list[SectorBasis]:
    """
    Every non-empty (K, Mz) sector, ordered by (K, Mz).
    """
    _check_particles(lattice, n_particles)
    buckets: dict[tuple, list[tuple[int, ...]]] = {}
    for c in itertools.combinations(range(lattice.n_orbitals), n_particles):
        key = (
            configuration_momentum(lattice, c),
            configuration_magnetization(lattice, c),
        )
        buckets.setdefault(key, []).append(c)

    def sort_key(key):
        K, Mz = key
        return K, -np.inf if Mz is None else Mz

    out = []
    for key in sorted(buckets, key=sort_key):
        K, Mz = key
        out.append(
            SectorBasis(lattice, n_particles, SectorLabel(K=K, Mz=Mz), tuple(buckets[key]))
        )
    return out


def vertex_vectors(basis: SectorBasis) -> np.ndarray:
    if basis.size == 0:
        raise PreconditionError("Basis is empty")
    return basis.vertices


def _matrix_on_basis(basis: SectorBasis, apply) -> np.ndarray:
    index = basis.index()
    matrix = np.zeros((basis.size, basis.size))
    for column, bits in enumerate(basis.determinant_bits):
        for new_bits, amplitude in apply({bits: 1.0}).items():
            if abs(amplitude) < CROSS_TERM_TOLERANCE:
                continue
            row = index.get(new_bits)
            if row is None:
                raise PreconditionError(
                    "Operator leaves the sector", {"configuration": orbitals_from_bits(new_bits)}
                )
            matrix[row, column] += amplitude.real
    return matrix


def spin_squared_matrix(basis: SectorBasis) -> np.ndarray:
    """
    S^2 = S- S+ + Sz^2 + Sz on the determinant basis.
    """
    lattice = basis.lattice
    if not lattice.spinful:
        raise PreconditionError("Total spin is undefined on a spinless lattice")
    raising = [(1.0, ((True, 2 * c), (False, 2 * c + 1))) for c in range(lattice.n_cells)]
    lowering = [(1.0, ((True, 2 * c + 1), (False, 2 * c))) for c in range(lattice.n_cells)]

    def apply(vector):
        return apply_operator(lowering, apply_operator(raising, vector))

    matrix = _matrix_on_basis(basis, apply)
    for r, configuration in enumerate(basis.configurations):
        sz = configuration_magnetization(lattice, configuration)
        matrix[r, r] += sz * sz + sz
    return matrix


def reflected_orbital(lattice: LatticeSpec, q: int) -> int:
    orbital = lattice.orbital(q)
    nu = tuple((-v) % lattice.sites for v in orbital.nu)
    return lattice.orbital_index(SpinMomentumOrbital(nu, orbital.spin))


def parity_matrix(basis: SectorBasis) -> np.ndarray:
    """
    Site reflection i -> L - i + 1, acting on plane waves as nu -> -nu mod L.
    """
    lattice = basis.lattice

    def apply(vector):
        out = {}
        for bits, amplitude in vector.items():
            image = [reflected_orbital(lattice, q) for q in orbitals_from_bits(bits)]
            out[bits_from_orbitals(image)] = reorder_sign(image) * amplitude
        return out

    matrix = _matrix_on_basis(basis, apply)
    return 0.5 * (matrix + matrix.T)


@dataclass(frozen=True, eq=False)
class AdaptedBasis:
    """
    Real orthonormal recombinations of the parent determinants. Row i of
    ``coefficients`` is adapted state i; ``labels[i]`` is its (S, parity).
    """

    parent: SectorBasis
    coefficients: np.ndarray
    labels: tuple[tuple[Optional[float], Optional[int]], ...] = field(default=())

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    @property
    def lattice(self) -> LatticeSpec:
        return self.parent.lattice

    @property
    def n_particles(self) -> int:
        return self.parent.n_particles

    @property
    def sector(self) -> Optional[SectorLabel]:
        if self.parent.sector is None or not self.labels:
            return self.parent.sector
        S, parity = self.labels[0]
        return self.parent.sector.with_symmetry(S, parity)

    def projector(self) -> np.ndarray:
        return self.coefficients.T @ self.coefficients


def _gram_schmidt_columns(projector: np.ndarray, rank: int) -> np.ndarray:
    vectors: list[np.ndarray] = []
    for j in range(projector.shape[1]):
        if len(vectors) == rank:
            break
        v = projector[:, j].copy()
        for _ in range(2):
            for u in vectors:
                v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            vectors.append(v / norm)
    return np.array(vectors).reshape(len(vectors), projector.shape[0])


def _fix_phase(row: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(row)))
    return -row if row[k] < 0 else row


def _select_block(matrix: np.ndarray, columns: np.ndarray, value: float) -> np.ndarray:
    reduced = columns.T @ matrix @ columns
    eigenvalues, eigenvectors = linalg.eigh(reduced)
    keep = np.abs(eigenvalues - value) < EIGENVALUE_TOLERANCE
    return columns @ eigenvectors[:, keep]


def adapt_symmetry(
    basis: SectorBasis,
    want_S: Optional[float],
    want_parity: Optional[int],
) -> AdaptedBasis:
    """
    Simultaneous S^2 and parity eigenstates in the requested block.

    Degenerate blocks are orthonormalized by Gram-Schmidt over the block
    projector's columns in matrix order; each row is then signed so its
    largest-magnitude coefficient is positive.
    """
    if not basis.lattice.spinful:
        raise PreconditionError("Spin adaptation needs a spinful lattice")
    if want_parity not in (None, 1, -1):
        raise PreconditionError("Parity must be +1 or -1", {"parity": want_parity})
    if basis.size == 0:
        return AdaptedBasis(basis, np.zeros((0, 0)), ())

    s2 = spin_squared_matrix(basis)
    parity = parity_matrix(basis)
    commutator = s2 @ parity - parity @ s2
    if np.abs(commutator).max() > 1e-10:
        raise SymmetryError("S^2 and parity do not commute on this sector")

    n_components, component_of = connected_components(
        ((np.abs(s2) + np.abs(parity)) > CROSS_TERM_TOLERANCE).astype(float),
        directed=False,
    )
    rows = []
    for component in range(n_components):
        members = np.flatnonzero(component_of == component)
        columns = np.eye(basis.size)[:, members]
        if want_S is not None:
            columns = _select_block(s2, columns, want_S * (want_S + 1))
        if want_parity is not None and columns.shape[1]:
            columns = _select_block(parity, columns, float(want_parity))
        if not columns.shape[1]:
            continue
        block = _gram_schmidt_columns(columns @ columns.T, columns.shape[1])
        rows.extend(_fix_phase(row) for row in block)

    coefficients = np.array(rows).reshape(len(rows), basis.size)
    logger.debug(
        "Adapted block S=%s p=%s holds %d of %d states",
        want_S,
        want_parity,
        len(rows),
        basis.size,
    )
    return AdaptedBasis(basis, coefficients, tuple((want_S, want_parity) for _ in rows))


def occupation_map(basis) -> np.ndarray:
    """
    d x R matrix M with n = M @ x, x_r = |alpha_r|^2.
    """
    if basis.size == 0:
        raise PreconditionError("Basis is empty")
    if isinstance(basis, SectorBasis):
        return basis.vertices.T.astype(float)

    vertices = basis.parent.vertices.astype(float)
    B = basis.coefficients
    columns = []
    for q in range(vertices.shape[1]):
        block = B @ (vertices[:, q][:, None] * B.T)
        off_diagonal = block - np.diag(np.diag(block))
        if np.abs(off_diagonal).max(initial=0.0) > CROSS_TERM_TOLERANCE:
            raise NotDiagonalError(
                "Adapted states mix under an occupation operator", {"orbital": q}
            )
        columns.append(np.diag(block))
    return np.array(columns)


def determinant_amplitudes(basis, psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape != (basis.size,):
        raise DimensionError(
            "State vector length does not match the basis",
            {"expected": basis.size, "got": psi.shape},
        )
    if isinstance(basis, AdaptedBasis):
        return basis.coefficients.T @ psi
    return psi


def one_body_density_matrix(basis, psi: Sequence[complex]) -> np.ndarray:
    """
    gamma_qq' = <Psi| c†_q c_q' |Psi> for a state given over the basis.
    """
    slater = getattr(basis, "parent", basis)
    amplitudes = determinant_amplitudes(basis, psi)
    vector = {
        bits: amplitude
        for bits, amplitude in zip(slater.determinant_bits, amplitudes)
        if amplitude != 0
    }
    d = slater.lattice.n_orbitals
    gamma = np.zeros((d, d), dtype=complex)
    for q, q2 in itertools.product(range(d), repeat=2):
        image = apply_operator([(1.0, ((True, q), (False, q2)))], vector)
        gamma[q, q2] = sum(
            np.conj(vector.get(bits, 0.0)) * amplitude for bits, amplitude in image.items()
        )
    if not np.iscomplexobj(amplitudes):
        return gamma.real
    return gamma
