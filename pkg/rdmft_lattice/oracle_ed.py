"""
Reference results: exact diagonalization of sector Hamiltonians, a
brute-force constrained search over full amplitudes, and minimization of
T[n] + F[n] over the polytope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
from scipy import linalg
from scipy.optimize import linprog, minimize, minimize_scalar

from .core_model import (
    Dispersion,
    InteractionMatrix,
    InteractionSpec,
    LatticeSpec,
    build_interaction_matrix,
    dispersion,
    kinetic_functional,
    orbital_energies,
)
from .errors import CapacityError, DimensionError, InfeasibleError, PreconditionError
from .levy_functional import (
    ConstrainedSearchProblem,
    FunctionalEvaluation,
    SearchOptions,
    interaction_values,
)
from .polytope import RepresentabilityPolytope
from .symmetry_basis import SectorLabel, occupation_map

logger = logging.getLogger(__name__)

MAX_DENSE_SIZE = 2000
MAX_BRUTE_FORCE_SIZE = 12
PENALTY_ROUNDS = 6
FEASIBILITY_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class SectorHamiltonian:
    basis: Any
    kinetic: np.ndarray
    interaction: InteractionMatrix

    @property
    def values(self) -> np.ndarray:
        return self.kinetic + self.interaction.values

    @property
    def size(self) -> int:
        return self.kinetic.shape[0]


def sector_hamiltonian(
    basis,
    interaction: Union[InteractionSpec, InteractionMatrix],
    dispersion_fn: Dispersion = dispersion,
) -> SectorHamiltonian:
    """
    H = T + V with T diagonal on determinants, T_rr = sum of band energies
    of the occupied orbitals.
    """
    slater = getattr(basis, "parent", basis)
    if isinstance(interaction, InteractionSpec):
        interaction = build_interaction_matrix(interaction, basis)
    energies = slater.vertices @ orbital_energies(slater.lattice, dispersion_fn)
    kinetic = np.diag(energies)
    coefficients = getattr(basis, "coefficients", None)
    if coefficients is not None:
        kinetic = coefficients @ kinetic @ coefficients.T
    if interaction.size != kinetic.shape[0]:
        raise DimensionError("Interaction matrix does not match the basis")
    return SectorHamiltonian(basis, kinetic, interaction)


@dataclass
class GroundStateResult:
    energy: float
    vector: np.ndarray
    occupations: np.ndarray
    sector: Optional[SectorLabel]


def ground_state(hamiltonian: SectorHamiltonian) -> GroundStateResult:
    size = hamiltonian.size
    if size == 0:
        raise PreconditionError("Sector is empty")
    if size > MAX_DENSE_SIZE:
        raise CapacityError(
            "Sector too large for dense diagonalization", {"R": size, "limit": MAX_DENSE_SIZE}
        )
    values = interaction_values(hamiltonian.values)
    energies, vectors = linalg.eigh(values, subset_by_index=[0, 0])
    vector = vectors[:, 0]
    if vector[np.argmax(np.abs(vector))] < 0:
        vector = -vector
    occupations = occupation_map(hamiltonian.basis) @ (vector * vector)
    return GroundStateResult(
        energy=float(energies[0]),
        vector=vector,
        occupations=occupations,
        sector=hamiltonian.basis.sector,
    )


def levy_brute_force(
    basis,
    V,
    n: Sequence[float],
    restarts: int = 200,
    seed: int = 0,
) -> float:
    """
    min <Psi|V|Psi> over real unit vectors whose occupations equal n, by an
    augmented Lagrangian on the amplitudes. Restart i is seeded with
    (seed, i), so fewer restarts see a prefix of the same starts.
    """
    values = interaction_values(V)
    size = values.shape[0]
    if size > MAX_BRUTE_FORCE_SIZE:
        raise CapacityError(
            "Basis too large for the brute-force search",
            {"R": size, "limit": MAX_BRUTE_FORCE_SIZE},
        )
    M = occupation_map(basis)
    target = np.asarray(n, dtype=float)
    if target.shape != (M.shape[0],):
        raise DimensionError(
            "Occupation vector length does not match the orbitals",
            {"expected": M.shape[0], "got": target.shape},
        )
    if M.shape[1] != size:
        raise DimensionError("Interaction matrix does not match the basis")

    check = linprog(
        np.zeros(size),
        A_eq=np.vstack([M, np.ones(size)]),
        b_eq=np.append(target, 1.0),
        bounds=[(0, None)] * size,
        method="highs",
    )
    if check.status != 0:
        raise InfeasibleError("No state reaches these occupation numbers")

    def residuals(psi):
        return np.append(M @ (psi * psi) - target, psi @ psi - 1.0)

    def lagrangian(psi, multipliers, weight):
        c = residuals(psi)
        w = multipliers + weight * c
        value = psi @ values @ psi + multipliers @ c + 0.5 * weight * c @ c
        gradient = 2.0 * values @ psi + 2.0 * psi * (M.T @ w[:-1]) + 2.0 * w[-1] * psi
        return value, gradient

    best = np.inf
    for i in range(restarts):
        rng = np.random.default_rng([seed, i])
        psi = rng.standard_normal(size)
        psi /= np.linalg.norm(psi)
        multipliers = np.zeros(M.shape[0] + 1)
        for round_ in range(PENALTY_ROUNDS):
            weight = 10.0 * 10.0**round_
            result = minimize(
                lagrangian,
                psi,
                args=(multipliers, weight),
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": 2000, "gtol": 1e-12, "ftol": 1e-15},
            )
            psi = result.x
            multipliers = multipliers + weight * residuals(psi)
        if np.abs(residuals(psi)).max() > FEASIBILITY_TOLERANCE:
            continue
        best = min(best, float(psi @ values @ psi))
    if not np.isfinite(best):
        raise InfeasibleError("Brute-force search found no feasible state")
    return best


@dataclass
class TotalEnergyResult:
    energy: float
    occupations: np.ndarray
    converged: bool
    evaluations: int


Functional = Union[ConstrainedSearchProblem, Callable[[np.ndarray], Any]]


def _functional_value(functional: Functional, x: np.ndarray) -> float:
    if isinstance(functional, ConstrainedSearchProblem):
        return functional.evaluate(x).value
    value = functional(x)
    if isinstance(value, FunctionalEvaluation):
        return value.value
    return float(value)


def minimize_total_energy(
    lattice: LatticeSpec,
    polytope: RepresentabilityPolytope,
    functional: Functional,
    options: Optional[SearchOptions] = None,
    dispersion_fn: Dispersion = dispersion,
) -> TotalEnergyResult:
    """
    Minimize E[n] = T[n] + F[n] over the polytope, in chart coordinates.
    """
    options = options or SearchOptions()
    calls = 0

    def energy(x):
        nonlocal calls
        calls += 1
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return kinetic_functional(lattice, polytope.expand(x), dispersion_fn) + (
            _functional_value(functional, x)
        )

    candidates = [(energy(v), v.copy()) for v in polytope.chart_vertices]
    converged = True
    if polytope.dimension == 1:
        lower = float(polytope.chart_vertices.min())
        upper = float(polytope.chart_vertices.max())
        result = minimize_scalar(
            lambda a: energy([a]),
            bounds=(lower, upper),
            method="bounded",
            options={"xatol": 1e-12},
        )
        converged = bool(result.success)
        candidates.append((float(result.fun), np.array([result.x])))
    elif polytope.dimension >= 2:
        best, converged = _multistart_descent(polytope, energy, options)
        candidates.extend(best)

    value, x = min(candidates, key=lambda item: item[0])
    if not converged:
        logger.warning("Total-energy minimization did not converge")
    logger.debug("E=%.12g at %s after %d functional calls", value, x, calls)
    return TotalEnergyResult(float(value), np.asarray(x), converged, calls)


def _multistart_descent(polytope, energy, options):
    centroid = polytope.centroid
    constants, normals = polytope.facet_rows
    slack = constants + normals @ centroid

    def clipped(x):
        # pull outside points back along the segment to the centroid
        if (constants + normals @ x).min() >= 0:
            return x, 0.0
        direction = x - centroid
        rates = normals @ direction
        with np.errstate(divide="ignore"):
            limits = np.where(rates < 0, slack / -rates, np.inf)
        t = min(1.0, float(limits.min()))
        inside = centroid + t * direction
        return inside, float(np.sum((x - inside) ** 2))

    def objective(x):
        inside, distance = clipped(x)
        return energy(inside) + 1e3 * distance

    rng = np.random.default_rng(options.seed)
    starts = [centroid]
    starts += [0.9 * v + 0.1 * centroid for v in polytope.chart_vertices]
    for _ in range(max(options.restarts - len(starts), 0)):
        starts.append(rng.dirichlet(np.ones(polytope.n_vertices)) @ polytope.chart_vertices)

    found = []
    converged = False
    for start in starts:
        result = minimize(
            objective,
            start,
            method="SLSQP",
            constraints=[
                {
                    "type": "ineq",
                    "fun": lambda x: constants + normals @ x,
                    "jac": lambda x: normals,
                }
            ],
            options={"maxiter": 500, "ftol": 1e-14},
        )
        inside, _ = clipped(result.x)
        found.append((energy(inside), inside))
        converged = converged or bool(result.success)
    return found, converged
