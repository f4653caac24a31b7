"""
The half-filled Hubbard square (L = 4, N = 4) in its K = 2, Mz = 0,
S = 0, odd-parity sector: three states and one independent occupation n2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from tqdm import tqdm

try:
    from enum import StrEnum
except ImportError:
    from backports.strenum import StrEnum

from .core_model import (
    InteractionKind,
    InteractionMatrix,
    InteractionSpec,
    LatticeSpec,
    build_interaction_matrix,
)
from .errors import OutsidePolytopeError, PreconditionError
from .oracle_ed import (
    SectorHamiltonian,
    ground_state,
    minimize_total_energy,
    sector_hamiltonian,
)
from .polytope import RepresentabilityPolytope, build_polytope
from .symmetry_basis import AdaptedBasis, SectorBasis, SectorLabel, enumerate_sector

logger = logging.getLogger(__name__)

# orbital index of 2 up, whose occupation is the chart coordinate n2
N2_ORBITAL = 4
SEAM_WIDTH = 1e-3
BRANCH_GRID = 129


class Regime(StrEnum):
    WEAK = "weak"
    STRONG = "strong"


class Branch(StrEnum):
    MINUS = "minus"
    PLUS = "plus"
    SEAM = "seam"
    CENTER = "center"


def square_lattice(t: float = 1.0) -> LatticeSpec:
    return LatticeSpec(dimension=1, sites=4, hopping=t, spinful=True)


def square_sector_basis(t: float = 1.0) -> SectorBasis:
    return enumerate_sector(square_lattice(t), 4, SectorLabel(K=(2,), Mz=0.0))


def _determinant(spins: str) -> tuple[int, ...]:
    """
    Singly occupied momenta 0..3 with the given spin letters.
    """
    return tuple(2 * nu + (0 if s == "u" else 1) for nu, s in enumerate(spins))


def square_adapted_basis(t: float = 1.0) -> AdaptedBasis:
    """
    The three singlet odd-parity states written out explicitly: a closed
    shell at n2 = 0, its particle-hole partner at n2 = 1 and the open-shell
    state at n2 = 1/2.
    """
    parent = square_sector_basis(t)
    index = {c: r for r, c in enumerate(parent.configurations)}
    half = 1.0 / math.sqrt(2.0)
    third = 1.0 / (2.0 * math.sqrt(3.0))
    states = [
        {(0, 1, 6, 7): half, (0, 1, 2, 3): -half},
        {(2, 3, 4, 5): half, (4, 5, 6, 7): -half},
        {
            _determinant("dudu"): -2 * third,
            _determinant("udud"): -2 * third,
            _determinant("dduu"): third,
            _determinant("uudd"): third,
            _determinant("uddu"): third,
            _determinant("duud"): third,
        },
    ]
    coefficients = np.zeros((3, parent.size))
    for row, state in enumerate(states):
        for configuration, value in state.items():
            coefficients[row, index[configuration]] = value
    return AdaptedBasis(parent, coefficients, ((0.0, -1),) * 3)


def square_polytope(basis: Optional[AdaptedBasis] = None) -> RepresentabilityPolytope:
    return build_polytope(basis or square_adapted_basis(), order=[N2_ORBITAL])


def square_interaction(U: float = 1.0, basis: Optional[AdaptedBasis] = None) -> InteractionMatrix:
    unit = build_interaction_matrix(
        InteractionSpec(kind=InteractionKind.HUBBARD, U=1.0), basis or square_adapted_basis()
    )
    return unit.scaled(U)


def square_hamiltonian(u: float, t: float = 1.0) -> SectorHamiltonian:
    basis = square_adapted_basis(t)
    return sector_hamiltonian(basis, square_interaction(u * t, basis))


def _branch_amplitude(a: float, delta: float, sign: int) -> float:
    radicand = max(a * a * (1.0 - a * a) - delta * delta, 0.0)
    return (delta + sign * math.sqrt(3.0) * math.sqrt(radicand)) / (2.0 * a)


def _branch_minimum(n2: float, sign: int) -> tuple[float, float]:
    """
    min over a of a^2 + 2 b(a)^2, with a and b the weights of the U and 2U
    eigenvectors of the interaction. Returns (F/U, a).
    """
    delta = 0.5 - n2
    spread = 2.0 * math.sqrt(max(n2 * (1.0 - n2), 0.0))
    lower = math.sqrt(2.0 * delta * delta / (1.0 + spread))
    upper = math.sqrt((1.0 + spread) / 2.0)
    lower = max(lower, 1e-300)
    upper = max(upper, lower)

    def value(a):
        b = _branch_amplitude(a, delta, sign)
        return a * a + 2.0 * b * b

    if upper - lower < 1e-15:
        return value(lower), lower
    grid = np.linspace(lower, upper, BRANCH_GRID)
    values = [value(a) for a in grid]
    k = int(np.argmin(values))
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, BRANCH_GRID - 1)]
    result = minimize_scalar(
        value, bounds=(left, right), method="bounded", options={"xatol": 1e-12}
    )
    if result.fun < values[k]:
        return float(result.fun), float(result.x)
    return float(values[k]), float(grid[k])


def _square_functional(n2: float) -> tuple[float, Branch]:
    if n2 < 0.0 or n2 > 1.0:
        raise OutsidePolytopeError("n2 must lie in [0, 1]", {"n2": n2})
    delta = 0.5 - n2
    if abs(delta) < 1e-15:
        return 0.0, Branch.CENTER
    if delta > SEAM_WIDTH:
        return _branch_minimum(n2, -1)[0], Branch.MINUS
    if delta < -SEAM_WIDTH:
        return _branch_minimum(n2, 1)[0], Branch.PLUS
    return min(_branch_minimum(n2, -1)[0], _branch_minimum(n2, 1)[0]), Branch.SEAM


def exact_functional_square(u: float, n2: float) -> float:
    """
    Exact F(n2) in units of t for coupling u = U/t.
    """
    return u * _square_functional(float(n2))[0]


@dataclass
class SquareScan:
    u: float
    n2: np.ndarray
    values: np.ndarray
    branches: list[Branch]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "u": self.u,
                "n2": self.n2,
                "F_exact": self.values,
                "F_weak": [asymptotic_functional(self.u, n, Regime.WEAK) for n in self.n2],
                "F_strong": [asymptotic_functional(self.u, n, Regime.STRONG) for n in self.n2],
                "branch": [b.value for b in self.branches],
            }
        )


def scan_functional(u: float, n2_grid: Sequence[float]) -> SquareScan:
    n2 = np.asarray(n2_grid, dtype=float)
    results = [_square_functional(float(n)) for n in n2]
    return SquareScan(
        u=u,
        n2=n2,
        values=np.array([u * value for value, _ in results]),
        branches=[branch for _, branch in results],
    )


def asymptotic_functional(u: float, n2: float, regime: Regime) -> float:
    """
    Closed-form limits of F(n2) in units of t. The weak-coupling form is
    applied to min(n2, 1 - n2).
    """
    regime = Regime(regime)
    if regime == Regime.WEAK:
        distance = min(n2, 1.0 - n2)
        return u * (0.75 - 0.5 * math.sqrt(13.0) * math.sqrt(max(distance, 0.0)))
    delta = 0.5 - n2
    return u * (4.0 / 3.0 * delta**2 + 40.0 / 27.0 * delta**4)


def asymptotic_energy(u: float, regime: Regime) -> tuple[float, float]:
    """
    (E0/t, n2) from the weak- or strong-coupling series.
    """
    regime = Regime(regime)
    if regime == Regime.WEAK:
        if u < 0:
            raise PreconditionError("Weak-coupling series needs u >= 0", {"u": u})
        return -4.0 + 0.75 * u - 13.0 / 128.0 * u**2, 13.0 / 1024.0 * u**2
    if u <= 0:
        raise PreconditionError("Strong-coupling series needs u > 0", {"u": u})
    return -12.0 / u + 120.0 / u**3, 0.5 - 3.0 / u + 60.0 / u**3


def figure_data(
    u_values: Sequence[float],
    n2_grid: Sequence[float],
    quiet: bool = True,
) -> dict[str, pd.DataFrame]:
    """
    Tables behind the functional and energy comparisons: "functional" has
    one row per (u, n2) and "energy" one row per u.
    """
    u_values = [float(u) for u in u_values]
    if not u_values or not len(n2_grid):
        raise PreconditionError("Coupling and occupation grids must be nonempty")

    functional = pd.concat(
        [scan_functional(u, n2_grid).to_frame() for u in u_values], ignore_index=True
    )

    lattice = square_lattice()
    basis = square_adapted_basis()
    polytope = square_polytope(basis)
    rows = []
    for u in tqdm(u_values, desc="couplings", disable=quiet):
        exact = ground_state(sector_hamiltonian(basis, square_interaction(u, basis)))
        rdmft = minimize_total_energy(
            lattice, polytope, lambda x, u=u: exact_functional_square(u, x[0])
        )
        weak_energy, weak_n2 = asymptotic_energy(u, Regime.WEAK)
        if u > 0:
            strong_energy, strong_n2 = asymptotic_energy(u, Regime.STRONG)
        else:
            strong_energy = strong_n2 = float("nan")
        rows.append(
            {
                "u": u,
                "E0_exact": exact.energy,
                "E0_rdmft": rdmft.energy,
                "n2_exact": exact.occupations[N2_ORBITAL],
                "n2_rdmft": float(rdmft.occupations[0]),
                "E0_weak": weak_energy,
                "E0_strong": strong_energy,
                "n2_weak": weak_n2,
                "n2_strong": strong_n2,
                "rel_err_weak": abs(weak_energy - exact.energy) / abs(exact.energy),
                "rel_err_strong": abs(strong_energy - exact.energy) / abs(exact.energy),
            }
        )
    return {"functional": functional, "energy": pd.DataFrame(rows)}
