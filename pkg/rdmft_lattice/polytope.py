"""
The polytope of representable occupation numbers of one sector: affine
chart, exact half-space form and incidence matrix.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Optional, Sequence

import numpy as np
import sympy
from scipy import linalg
from scipy.optimize import linprog

from .errors import CapacityError, DimensionError, NotSimplexError, PreconditionError

logger = logging.getLogger(__name__)

MARGIN_TOLERANCE = 1e-12
MAX_CHART_DIMENSION = 12
MAX_VERTICES = 512


def to_rational(value: float) -> sympy.Rational:
    return sympy.Rational(float(value)).limit_denominator(1 << 20)


def rational_matrix(values) -> sympy.Matrix:
    array = np.atleast_2d(np.asarray(values, dtype=float))
    return sympy.Matrix(
        array.shape[0], array.shape[1], [to_rational(v) for v in array.ravel()]
    )


@dataclass(frozen=True)
class AffineChart:
    """
    n_q = constants[q] + sum_k coefficients[q][k] * n_{independent[k]} for
    every orbital q, with rational entries.
    """

    independent: tuple[int, ...]
    constants: tuple[sympy.Rational, ...]
    coefficients: tuple[tuple[sympy.Rational, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.independent)

    @property
    def n_orbitals(self) -> int:
        return len(self.constants)

    @cached_property
    def _float_constants(self) -> np.ndarray:
        return np.array([float(c) for c in self.constants])

    @cached_property
    def _float_coefficients(self) -> np.ndarray:
        return np.array(
            [[float(c) for c in row] for row in self.coefficients], dtype=float
        ).reshape(self.n_orbitals, self.dimension)

    def expand(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionError(
                "Chart coordinates have wrong length",
                {"expected": self.dimension, "got": x.shape},
            )
        return self._float_constants + self._float_coefficients @ x

    def project(self, n: Sequence[float]) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if n.shape != (self.n_orbitals,):
            raise DimensionError(
                "Occupation vector has wrong length",
                {"expected": self.n_orbitals, "got": n.shape},
            )
        return n[list(self.independent)]

    def relations(self) -> list[tuple[int, sympy.Rational, tuple[sympy.Rational, ...]]]:
        """
        (orbital, constant, coefficients) for every dependent orbital.
        """
        return [
            (q, self.constants[q], self.coefficients[q])
            for q in range(self.n_orbitals)
            if q not in self.independent
        ]


def affine_chart(vertices, order: Optional[Sequence[int]] = None) -> AffineChart:
    """
    Independent coordinates of the vertices' affine hull, chosen greedily by
    pivot position. ``order`` lists orbitals to try first; the rest follow in
    ascending order.
    """
    exact = vertices if isinstance(vertices, sympy.MatrixBase) else rational_matrix(vertices)
    if exact.rows == 0:
        raise PreconditionError("Need at least one vertex")
    d = exact.cols
    preferred = list(order or [])
    if any(q < 0 or q >= d for q in preferred) or len(set(preferred)) != len(preferred):
        raise DimensionError("Invalid chart pivot order", {"order": preferred})
    permutation = preferred + [q for q in range(d) if q not in preferred]

    base = exact.row(0)
    if exact.rows > 1:
        differences = sympy.Matrix.vstack(*[exact.row(r) - base for r in range(1, exact.rows)])
        reduced, pivots = differences[:, permutation].rref()
    else:
        reduced, pivots = sympy.zeros(0, d), ()

    independent = tuple(permutation[p] for p in pivots)
    basis_rows = []
    for i in range(len(pivots)):
        row = [sympy.Integer(0)] * d
        for j, q in enumerate(permutation):
            row[q] = reduced[i, j]
        basis_rows.append(row)

    constants = []
    coefficients = []
    for q in range(d):
        coefficients.append(tuple(row[q] for row in basis_rows))
        constants.append(
            base[q] - sum((base[k] * row[q] for k, row in zip(independent, basis_rows)), sympy.Integer(0))
        )
    return AffineChart(independent, tuple(constants), tuple(coefficients))


@dataclass(frozen=True)
class FacetConstraint:
    """
    D(n) = constant + sum_k coefficients[k] * n_k >= 0 over chart coordinates.
    """

    label: int
    constant: int
    coefficients: tuple[int, ...]

    def value(self, x: Sequence[float]) -> float:
        return float(self.constant + np.dot(self.coefficients, np.asarray(x, dtype=float)))

    def exact_value(self, x: Sequence[sympy.Rational]) -> sympy.Rational:
        return sympy.Integer(self.constant) + sum(
            (c * v for c, v in zip(self.coefficients, x)), sympy.Integer(0)
        )

    def row(self) -> tuple[int, ...]:
        return (self.constant, *self.coefficients)

    def describe(self, names: Sequence[str]) -> str:
        parts = [str(self.constant)] if self.constant else []
        for c, name in zip(self.coefficients, names):
            if c == 0:
                continue
            sign = "-" if c < 0 else "+"
            magnitude = "" if abs(c) == 1 else str(abs(c))
            parts.append(f"{sign}{magnitude}{name}")
        text = "".join(parts).lstrip("+") or "0"
        return text + " >= 0"


def _integerize(vector: Sequence[sympy.Rational]) -> tuple[int, ...]:
    rationals = [sympy.Rational(v) for v in vector]
    scale = reduce(sympy.ilcm, [v.q for v in rationals], 1)
    integers = [int(v * scale) for v in rationals]
    divisor = int(reduce(sympy.igcd, integers, 0))
    return tuple(v // divisor for v in integers)


def facet_enumeration(vertices, chart: AffineChart) -> list[FacetConstraint]:
    """
    Half-space form of the convex hull by brute force over affinely
    independent vertex subsets. Facets are ordered by the tuple of vertices
    on which they are not tight.
    """
    exact = vertices if isinstance(vertices, sympy.MatrixBase) else rational_matrix(vertices)
    n_vertices, dim = exact.rows, chart.dimension
    if dim > MAX_CHART_DIMENSION or n_vertices > MAX_VERTICES:
        raise CapacityError(
            "Polytope too large for brute-force facet enumeration; use a dedicated hull tool",
            {"d_ind": dim, "vertices": n_vertices},
        )
    if dim == 0:
        return []

    points = exact[:, list(chart.independent)]
    lifted = sympy.Matrix.hstack(sympy.ones(n_vertices, 1), points)

    found: dict[tuple[int, ...], tuple[int, ...]] = {}
    for subset in itertools.combinations(range(n_vertices), dim):
        nullspace = lifted.extract(list(subset), list(range(dim + 1))).nullspace()
        if len(nullspace) != 1:
            continue
        normal = nullspace[0]
        values = lifted * normal
        if all(v >= 0 for v in values):
            oriented = normal
        elif all(v <= 0 for v in values):
            oriented = -normal
        else:
            continue
        if all(v == 0 for v in values):
            continue
        row = _integerize(list(oriented))
        if row in found:
            continue
        missed = tuple(r for r in range(n_vertices) if (lifted.row(r) * oriented)[0] != 0)
        found[row] = missed

    ordered = sorted(found.items(), key=lambda item: item[1])
    facets = [
        FacetConstraint(label=j, constant=row[0], coefficients=row[1:])
        for j, (row, _) in enumerate(ordered)
    ]
    logger.debug("Found %d facets on %d vertices in %d dimensions", len(facets), n_vertices, dim)
    return facets


@dataclass(frozen=True, eq=False)
class RepresentabilityPolytope:
    vertices: np.ndarray
    exact_vertices: sympy.Matrix
    chart: AffineChart
    facets: tuple[FacetConstraint, ...]
    incidence: sympy.Matrix

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def dimension(self) -> int:
        return self.chart.dimension

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @cached_property
    def chart_vertices(self) -> np.ndarray:
        return self.vertices[:, list(self.chart.independent)].reshape(
            self.n_vertices, self.dimension
        )

    @cached_property
    def incidence_values(self) -> np.ndarray:
        return np.array(self.incidence.tolist(), dtype=float).reshape(
            self.n_facets, self.n_vertices
        )

    @cached_property
    def gram(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Eigenvalues c_l and eigenvectors w_l (columns) of C = A^T A. The
        w_l with c_l = 0 move weight between vertices without changing any
        facet value.
        """
        A = self.incidence_values
        if not A.size:
            return np.zeros(self.n_vertices), np.eye(self.n_vertices)
        return linalg.eigh(A.T @ A)

    @cached_property
    def facet_rows(self) -> tuple[np.ndarray, np.ndarray]:
        constants = np.array([f.constant for f in self.facets], dtype=float)
        normals = np.array([f.coefficients for f in self.facets], dtype=float).reshape(
            self.n_facets, self.dimension
        )
        return constants, normals

    @property
    def is_simplex(self) -> bool:
        return is_simplex(self)

    def facet_values(self, x: Sequence[float]) -> np.ndarray:
        x = self._check_point(x)
        constants, normals = self.facet_rows
        return constants + normals @ x

    def contains(self, x: Sequence[float]) -> tuple[bool, float]:
        return contains(self, x)

    def inward_normal(self, j: int) -> np.ndarray:
        return np.array(self.facets[j].coefficients, dtype=float)

    def tight_vertices(self, j: int) -> tuple[int, ...]:
        return tuple(r for r in range(self.n_vertices) if self.incidence[j, r] == 0)

    def face_vertices(self, active: Sequence[int]) -> tuple[int, ...]:
        """
        Vertices lying on every facet in ``active``.
        """
        return tuple(
            r
            for r in range(self.n_vertices)
            if all(self.incidence[j, r] == 0 for j in active)
        )

    def simplex_facets(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Facet constants and normals rescaled so facet r takes the value 1 on
        vertex r.
        """
        if not self.is_simplex:
            raise NotSimplexError("Polytope is not a simplex")
        constants, normals = self.facet_rows
        scale = np.array([float(self.incidence[r, r]) for r in range(self.n_facets)])
        return constants / scale, normals / scale[:, None]

    @cached_property
    def diameter(self) -> float:
        if self.n_vertices < 2:
            return 0.0
        differences = self.chart_vertices[:, None, :] - self.chart_vertices[None, :, :]
        return float(np.sqrt((differences**2).sum(axis=-1)).max())

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.chart_vertices.mean(axis=0)

    def expand(self, x: Sequence[float]) -> np.ndarray:
        return self.chart.expand(x)

    def to_chart(self, n: Sequence[float]) -> np.ndarray:
        return self.chart.project(n)

    def convex_weights(self, x: Sequence[float]) -> Optional[np.ndarray]:
        """
        Vertex weights w >= 0 summing to one with chart position x, or None.
        """
        x = self._check_point(x)
        equalities = np.vstack([self.chart_vertices.T, np.ones(self.n_vertices)])
        result = linprog(
            np.zeros(self.n_vertices),
            A_eq=equalities,
            b_eq=np.append(x, 1.0),
            bounds=[(0, None)] * self.n_vertices,
            method="highs",
        )
        return result.x if result.status == 0 else None

    def _check_point(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dimension,):
            raise DimensionError(
                "Point has wrong number of chart coordinates",
                {"expected": self.dimension, "got": x.shape},
            )
        return x


def incidence_matrix(polytope_or_facets, vertices=None) -> sympy.Matrix:
    """
    A_jr = D_j(v_r) as exact rationals.
    """
    if isinstance(polytope_or_facets, RepresentabilityPolytope):
        return polytope_or_facets.incidence
    facets, (exact, chart) = polytope_or_facets, vertices
    if not facets:
        return sympy.zeros(0, exact.rows)
    points = exact[:, list(chart.independent)]
    return sympy.Matrix(
        len(facets),
        exact.rows,
        lambda j, r: facets[j].exact_value(list(points.row(r))),
    )


def contains(polytope: RepresentabilityPolytope, x: Sequence[float]) -> tuple[bool, float]:
    values = polytope.facet_values(x)
    if values.size == 0:
        return True, float("inf")
    margin = float(values.min())
    return margin >= -MARGIN_TOLERANCE, margin


def is_simplex(polytope: RepresentabilityPolytope) -> bool:
    if polytope.n_facets != polytope.n_vertices or polytope.n_vertices < 2:
        return False
    return all(
        len(polytope.tight_vertices(j)) == polytope.n_vertices - 1
        and polytope.incidence[j, j] != 0
        for j in range(polytope.n_facets)
    )


def build_polytope(source, order: Optional[Sequence[int]] = None) -> RepresentabilityPolytope:
    """
    Polytope of a sector basis (vertices from its occupation map) or of an
    explicit R x d vertex array.
    """
    if hasattr(source, "size") and hasattr(source, "lattice"):
        from .symmetry_basis import occupation_map

        vertices = occupation_map(source).T
    else:
        vertices = np.atleast_2d(np.asarray(source, dtype=float))
    if vertices.shape[0] == 0:
        raise PreconditionError("Need at least one vertex")

    exact = rational_matrix(vertices)
    chart = affine_chart(exact, order)
    facets = facet_enumeration(exact, chart)
    incidence = incidence_matrix(facets, (exact, chart))
    return RepresentabilityPolytope(
        vertices=np.array(exact.tolist(), dtype=float),
        exact_vertices=exact,
        chart=chart,
        facets=tuple(facets),
        incidence=incidence,
    )
