"""
Lattices, plane-wave spin orbitals, dispersions and translation-invariant
interactions, with sector-basis interaction matrices built by second
quantization.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

try:
    from enum import StrEnum
except ImportError:
    from backports.strenum import StrEnum

from .errors import DimensionError, InvalidOrbitalError, ModelError, PreconditionError
from .fermions import OperatorTerm, apply_operator

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10
IMAGINARY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SpinMomentumOrbital:
    """
    Plane wave with momentum index vector ``nu`` and spin +1 (up), -1 (down)
    or 0 on a spinless lattice.
    """

    nu: tuple[int, ...]
    spin: int = 0

    def sort_key(self) -> tuple[tuple[int, ...], int]:
        return self.nu, 0 if self.spin >= 0 else 1

    def label(self) -> str:
        momentum = ".".join(str(v) for v in self.nu)
        suffix = {1: "u", -1: "d", 0: ""}[self.spin]
        return momentum + suffix


class LatticeSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    dimension: int = Field(default=1, ge=1, alias="D")
    sites: int = Field(ge=2, alias="L")
    hopping: float = Field(default=1.0, alias="t")
    spinful: bool = True

    @property
    def n_cells(self) -> int:
        return self.sites**self.dimension

    @property
    def spin_states(self) -> tuple[int, ...]:
        return (1, -1) if self.spinful else (0,)

    @property
    def n_orbitals(self) -> int:
        return self.n_cells * len(self.spin_states)

    def momenta(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.sites), repeat=self.dimension))

    def cell_index(self, nu: Sequence[int]) -> int:
        index = 0
        for v in nu:
            index = index * self.sites + v
        return index

    def orbitals(self) -> list[SpinMomentumOrbital]:
        return [
            SpinMomentumOrbital(nu, spin)
            for nu in self.momenta()
            for spin in self.spin_states
        ]

    def check_orbital(self, q: SpinMomentumOrbital) -> None:
        if len(q.nu) != self.dimension:
            raise InvalidOrbitalError(
                "Momentum vector has wrong length", {"nu": q.nu, "D": self.dimension}
            )
        if any(v < 0 or v >= self.sites for v in q.nu):
            raise InvalidOrbitalError(
                "Momentum index out of range", {"nu": q.nu, "L": self.sites}
            )
        if q.spin not in self.spin_states:
            raise InvalidOrbitalError(
                "Spin label does not match lattice", {"spin": q.spin}
            )

    def orbital_index(self, q: SpinMomentumOrbital) -> int:
        self.check_orbital(q)
        cell = self.cell_index(q.nu)
        if not self.spinful:
            return cell
        return 2 * cell + (0 if q.spin == 1 else 1)

    def orbital(self, index: int) -> SpinMomentumOrbital:
        if index < 0 or index >= self.n_orbitals:
            raise InvalidOrbitalError("Orbital index out of range", {"index": index})
        return self.orbitals()[index]


def dispersion(lattice: LatticeSpec, q: SpinMomentumOrbital) -> float:
    """
    Nearest-neighbour tight-binding energy -2t sum_i cos(2 pi nu_i / L).
    """
    lattice.check_orbital(q)
    return -2.0 * lattice.hopping * sum(
        math.cos(2.0 * math.pi * v / lattice.sites) for v in q.nu
    )


Dispersion = Callable[[LatticeSpec, SpinMomentumOrbital], float]


def orbital_energies(
    lattice: LatticeSpec, dispersion_fn: Dispersion = dispersion
) -> np.ndarray:
    return np.array([dispersion_fn(lattice, q) for q in lattice.orbitals()])


def kinetic_functional(
    lattice: LatticeSpec, n: Sequence[float], dispersion_fn: Dispersion = dispersion
) -> float:
    occupations = np.asarray(n, dtype=float)
    if occupations.shape != (lattice.n_orbitals,):
        raise DimensionError(
            "Occupation vector length does not match the lattice",
            {"expected": lattice.n_orbitals, "got": occupations.shape},
        )
    return float(orbital_energies(lattice, dispersion_fn) @ occupations)


class InteractionKind(StrEnum):
    HUBBARD = "hubbard"
    DENSITY_DENSITY = "density-density"
    TERMS = "terms"


class LocalOperator(BaseModel):
    """
    c†_{x+offset, spin} (dagger) or c_{x+offset, spin} in a term summed over x.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    dagger: bool
    offset: tuple[int, ...] = ()
    spin: Optional[Literal["up", "down"]] = None


class InteractionTerm(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    coefficient: float
    operators: tuple[LocalOperator, ...]

    @property
    def body_count(self) -> int:
        return sum(1 for op in self.operators if op.dagger)


class InteractionSpec(BaseModel):
    """
    Translation-invariant interaction. ``couplings[k]`` is the density-density
    coupling at distance k + 1 along every lattice direction.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: InteractionKind = InteractionKind.HUBBARD
    U: float = 0.0
    couplings: tuple[float, ...] = ()
    terms: tuple[InteractionTerm, ...] = ()

    @model_validator(mode="after")
    def check_terms(self):
        for term in self.terms:
            created = term.body_count
            if 2 * created != len(term.operators):
                raise ValueError("interaction terms must conserve particle number")
        if self.kind == InteractionKind.TERMS and not self.terms:
            raise ValueError("kind 'terms' needs at least one term")
        return self

    @property
    def body_count(self) -> int:
        if self.kind == InteractionKind.TERMS:
            return max(term.body_count for term in self.terms)
        return 2

    def real_space_terms(self, lattice: LatticeSpec) -> list[InteractionTerm]:
        if self.kind == InteractionKind.HUBBARD:
            if not lattice.spinful:
                raise ModelError("On-site Hubbard interaction needs a spinful lattice")
            ops = (
                LocalOperator(dagger=True, spin="up"),
                LocalOperator(dagger=False, spin="up"),
                LocalOperator(dagger=True, spin="down"),
                LocalOperator(dagger=False, spin="down"),
            )
            return [InteractionTerm(coefficient=self.U, operators=ops)]
        if self.kind == InteractionKind.DENSITY_DENSITY:
            spins: tuple[Optional[str], ...] = (
                ("up", "down") if lattice.spinful else (None,)
            )
            terms = []
            for distance, coupling in enumerate(self.couplings, start=1):
                for axis in range(lattice.dimension):
                    offset = tuple(
                        distance if i == axis else 0 for i in range(lattice.dimension)
                    )
                    for s1, s2 in itertools.product(spins, repeat=2):
                        ops = (
                            LocalOperator(dagger=True, spin=s1),
                            LocalOperator(dagger=False, spin=s1),
                            LocalOperator(dagger=True, offset=offset, spin=s2),
                            LocalOperator(dagger=False, offset=offset, spin=s2),
                        )
                        terms.append(InteractionTerm(coefficient=coupling, operators=ops))
            return terms
        return list(self.terms)


def _spin_value(lattice: LatticeSpec, spin: Optional[str]) -> int:
    if lattice.spinful:
        if spin is None:
            raise ModelError("Spinful lattice needs a spin on every operator")
        return 1 if spin == "up" else -1
    if spin is not None:
        raise ModelError("Spinless lattice operators must not carry a spin")
    return 0


def momentum_terms(spec: InteractionSpec, lattice: LatticeSpec) -> list[OperatorTerm]:
    """
    Expand the real-space terms into momentum-conserving operator strings.

    With c_x = L^(-D/2) sum_k e^{ik.x} c_k, summing a 2p-operator term over
    all translations x leaves L^{D(1-p)} e^{i(sum_a k_a.b_a - sum_c k_c.a_c)}
    on strings whose created and annihilated momenta agree mod L.
    """
    L, D = lattice.sites, lattice.dimension
    collected: dict[tuple, complex] = {}
    for term in spec.real_space_terms(lattice):
        if term.coefficient == 0:
            continue
        offsets = []
        spins = []
        for op in term.operators:
            offset = op.offset or (0,) * D
            if len(offset) != D:
                raise ModelError(
                    "Operator offset has wrong dimension", {"offset": op.offset}
                )
            offsets.append(np.array(offset))
            spins.append(_spin_value(lattice, op.spin))
        signs = [-1 if op.dagger else 1 for op in term.operators]
        n_ops = len(term.operators)
        prefactor = term.coefficient * float(lattice.n_cells) ** (1 - n_ops / 2)
        for head in itertools.product(lattice.momenta(), repeat=n_ops - 1):
            total = np.zeros(D, dtype=int)
            for s, nu in zip(signs, head):
                total += s * np.array(nu)
            last = tuple(int(v) for v in np.mod(-signs[-1] * total, L))
            momenta = list(head) + [last]
            phase = sum(
                s * float(np.dot(nu, a)) for s, nu, a in zip(signs, momenta, offsets)
            )
            amplitude = prefactor * np.exp(2j * np.pi * phase / L)
            ops = tuple(
                (op.dagger, lattice.orbital_index(SpinMomentumOrbital(tuple(nu), spin)))
                for op, nu, spin in zip(term.operators, momenta, spins)
            )
            collected[ops] = collected.get(ops, 0.0) + amplitude
    return [(amp, ops) for ops, amp in collected.items() if abs(amp) > 1e-15]


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    basis: Any
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def scaled(self, factor: float) -> InteractionMatrix:
        return InteractionMatrix(self.basis, self.values * factor)

    def shifted(self, constant: float) -> InteractionMatrix:
        return InteractionMatrix(self.basis, self.values + constant * np.eye(self.size))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.values)


def build_interaction_matrix(spec: InteractionSpec, basis) -> InteractionMatrix:
    """
    V_rr' = <r|V|r'> on a determinant basis, or conjugated through the
    recombination coefficients for an adapted basis.
    """
    slater = getattr(basis, "parent", basis)
    coefficients = getattr(basis, "coefficients", None)
    if slater.size == 0:
        raise PreconditionError("Cannot build an interaction matrix on an empty basis")
    terms = momentum_terms(spec, slater.lattice)
    logger.debug("Interaction expands into %d momentum strings", len(terms))

    index = {bits: r for r, bits in enumerate(slater.determinant_bits)}
    values = np.zeros((slater.size, slater.size), dtype=complex)
    for column, bits in enumerate(slater.determinant_bits):
        for new_bits, amplitude in apply_operator(terms, {bits: 1.0}).items():
            row = index.get(new_bits)
            if row is not None:
                values[row, column] += amplitude

    if coefficients is not None:
        values = coefficients @ values @ coefficients.T

    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    if np.abs(values - values.conj().T).max(initial=0.0) > HERMITIAN_TOLERANCE * scale:
        raise ModelError("Interaction matrix is not Hermitian on this basis")
    values = 0.5 * (values + values.conj().T)
    if np.abs(values.imag).max(initial=0.0) <= IMAGINARY_TOLERANCE * scale:
        values = values.real.copy()
    return InteractionMatrix(basis=basis, values=values)
