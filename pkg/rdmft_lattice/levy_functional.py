"""
Exact interaction functional F[n] by constrained search over sector states
with prescribed occupation numbers.

A state sum_r alpha_r |r> reaches chart point n iff x_r = alpha_r^2 obeys
x >= 0, sum x = 1 and sum_r x_r v_r = n. The interaction energy is
sum_rr' V_rr' eta_r eta_r' sqrt(x_r x_r'), minimized over x and the signs eta.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg
from scipy.optimize import linprog, minimize, minimize_scalar

from .core_model import InteractionMatrix
from .errors import (
    DimensionError,
    InfeasibleError,
    ModelError,
    NotSimplexError,
    OutsidePolytopeError,
    StepTooLargeError,
    UnsupportedFeatureError,
)
from .polytope import MARGIN_TOLERANCE, RepresentabilityPolytope

logger = logging.getLogger(__name__)

SIGN_CHUNK = 1 << 14
SCALAR_SEGMENTS = 16
POOR_FIT_RESIDUAL = 0.05
DEFAULT_RAY_DISTANCES = tuple(np.geomspace(1e-8, 1e-5, 8))


@dataclass
class SearchOptions:
    restarts: int = 16
    seed: int = 0
    constraint_tolerance: float = 1e-10
    value_tolerance: float = 1e-6
    greedy_starts: int = 8
    exhaustive_limit: int = 20
    enumeration_limit: int = 10
    sign_rounds: int = 6


@dataclass
class FunctionalEvaluation:
    value: float
    occupations: np.ndarray
    weights: np.ndarray
    signs: Optional[np.ndarray]
    converged: bool
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    restarts: int = 0
    active_facets: tuple[int, ...] = ()
    rank: int = 0
    gradient: Optional[np.ndarray] = None

    @property
    def amplitudes(self) -> np.ndarray:
        signs = np.ones_like(self.weights) if self.signs is None else self.signs
        return signs * np.sqrt(np.clip(self.weights, 0.0, None))

    @property
    def margin(self) -> float:
        return float(self.margins.min()) if self.margins.size else float("inf")

    def contraction(self, V) -> float:
        alpha = self.amplitudes
        return float(alpha @ interaction_values(V) @ alpha)


def interaction_values(V) -> np.ndarray:
    values = V.values if isinstance(V, InteractionMatrix) else np.asarray(V)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionError("Interaction matrix must be square", {"shape": values.shape})
    if np.iscomplexobj(values):
        if np.abs(values.imag).max(initial=0.0) > 1e-12:
            raise UnsupportedFeatureError(
                "Complex interaction matrices need complex phases, which are not searched"
            )
        values = values.real
    values = np.asarray(values, dtype=float)
    if np.abs(values - values.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(values).max()):
        raise ModelError("Interaction matrix is not symmetric")
    return 0.5 * (values + values.T)


def sign_structure(V) -> Optional[np.ndarray]:
    """
    Signs eta with V_rr' eta_r eta_r' <= 0 for all r != r', or None when the
    sign graph is not two-colourable.
    """
    values = interaction_values(V)
    size = values.shape[0]
    scale = max(1.0, np.abs(values).max(initial=0.0))
    eta = np.zeros(size, dtype=int)
    for root in range(size):
        if eta[root]:
            continue
        eta[root] = 1
        queue = [root]
        while queue:
            r = queue.pop(0)
            for s in range(size):
                if s == r or abs(values[r, s]) <= 1e-14 * scale:
                    continue
                wanted = -int(np.sign(values[r, s])) * eta[r]
                if eta[s] == 0:
                    eta[s] = wanted
                    queue.append(s)
                elif eta[s] != wanted:
                    return None
    return eta.astype(float)


def sign_patterns(size: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """
    Rows eta in {-1, 1}^size with eta_0 = 1, numbered by the bits of the
    remaining entries.
    """
    total = 1 << max(size - 1, 0)
    stop = total if stop is None else min(stop, total)
    codes = np.arange(start, stop)
    flips = (codes[:, None] >> np.arange(max(size - 1, 0))) & 1
    return np.hstack([np.ones((codes.size, 1)), 1.0 - 2.0 * flips])


def _exhaustive_signs(W: np.ndarray) -> np.ndarray:
    size = W.shape[0]
    if size == 1:
        return np.ones(1)
    total = 1 << (size - 1)
    best_value, best = np.inf, None
    for start in range(0, total, SIGN_CHUNK):
        eta = sign_patterns(size, start, start + SIGN_CHUNK)
        values = np.einsum("pi,ij,pj->p", eta, W, eta)
        i = int(np.argmin(values))
        if values[i] < best_value - 1e-15:
            best_value, best = values[i], eta[i]
    return best


def _greedy_signs(W: np.ndarray, rng: np.random.Generator, starts: int) -> np.ndarray:
    size = W.shape[0]
    off = W - np.diag(np.diag(W))
    best_value, best = np.inf, None
    for _ in range(starts):
        eta = rng.choice([-1.0, 1.0], size=size)
        while True:
            # flipping eta_i changes the value by -4 eta_i (off @ eta)_i
            gains = -4.0 * eta * (off @ eta)
            i = int(np.argmin(gains))
            if gains[i] >= -1e-15:
                break
            eta[i] = -eta[i]
        value = eta @ W @ eta
        if value < best_value:
            best_value, best = value, eta * eta[0]
    return best


def best_signs(
    V: np.ndarray,
    magnitudes: np.ndarray,
    options: Optional[SearchOptions] = None,
    pattern: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Signs minimizing (eta * s)^T V (eta * s) for fixed magnitudes s.
    """
    options = options or SearchOptions()
    if pattern is not None:
        return pattern
    eta = np.ones(magnitudes.size)
    support = np.flatnonzero(magnitudes > 0)
    if support.size < 2:
        return eta
    W = V[np.ix_(support, support)] * np.outer(magnitudes[support], magnitudes[support])
    if support.size <= options.exhaustive_limit:
        eta[support] = _exhaustive_signs(W)
    else:
        rng = np.random.default_rng(options.seed)
        eta[support] = _greedy_signs(W, rng, options.greedy_starts)
    return eta


def _signed_energy(V, x, options, pattern=None) -> tuple[float, np.ndarray]:
    s = np.sqrt(np.clip(x, 0.0, None))
    eta = best_signs(V, s, options, pattern)
    alpha = eta * s
    return float(alpha @ V @ alpha), eta


@dataclass(frozen=True, eq=False)
class ConstrainedSearchProblem:
    """
    Search space of one (polytope, V) pair. ``support`` lists the vertices
    whose weights may be nonzero; a face problem keeps only the vertices of
    that face.
    """

    polytope: RepresentabilityPolytope
    values: np.ndarray
    constraint_matrix: np.ndarray
    null_space: np.ndarray
    sign_pattern: Optional[np.ndarray]
    support: tuple[int, ...]
    face: tuple[int, ...] = ()

    @classmethod
    def build(cls, polytope: RepresentabilityPolytope, V) -> ConstrainedSearchProblem:
        values = interaction_values(V)
        if values.shape[0] != polytope.n_vertices:
            raise DimensionError(
                "Interaction matrix does not match the polytope vertices",
                {"R": polytope.n_vertices, "V": values.shape},
            )
        constraint_matrix = np.vstack(
            [polytope.chart_vertices.T, np.ones(polytope.n_vertices)]
        )
        return cls(
            polytope=polytope,
            values=values,
            constraint_matrix=constraint_matrix,
            null_space=linalg.null_space(constraint_matrix),
            sign_pattern=sign_structure(values),
            support=tuple(range(polytope.n_vertices)),
        )

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def gram(self) -> tuple[np.ndarray, np.ndarray]:
        return self.polytope.gram

    def restricted_to_face(self, active: Sequence[int]) -> ConstrainedSearchProblem:
        face_vertices = set(self.polytope.face_vertices(active))
        support = tuple(r for r in self.support if r in face_vertices)
        return replace(self, support=support, face=tuple(sorted(set(self.face) | set(active))))

    def chart_point(self, n: Sequence[float]) -> np.ndarray:
        n = np.asarray(n, dtype=float).reshape(-1)
        if n.size == self.polytope.dimension:
            return n
        if n.size == self.polytope.chart.n_orbitals:
            return self.polytope.to_chart(n)
        raise DimensionError(
            "Occupation vector matches neither the chart nor the orbital count",
            {"got": n.size, "d_ind": self.polytope.dimension},
        )

    def evaluate(
        self,
        n: Sequence[float],
        options: Optional[SearchOptions] = None,
        initial: Optional[np.ndarray] = None,
    ) -> FunctionalEvaluation:
        options = options or SearchOptions()
        x_chart = self.chart_point(n)
        margins = self.polytope.facet_values(x_chart)
        if margins.size and margins.min() < -options.constraint_tolerance:
            raise InfeasibleError(
                "Occupation numbers lie outside the polytope", {"margin": float(margins.min())}
            )
        active = tuple(int(j) for j in np.flatnonzero(margins < options.constraint_tolerance))
        problem = self
        if active and not set(active) <= set(self.face):
            problem = self.restricted_to_face(active)
            logger.debug("Snapping onto face %s with %d vertices", active, len(problem.support))
        evaluation = problem._search(x_chart, options, initial)
        return replace(evaluation, margins=margins, active_facets=active)

    def _search(self, x_chart, options, initial) -> FunctionalEvaluation:
        idx = list(self.support)
        if not idx:
            raise InfeasibleError("Face has no vertices")
        G = self.constraint_matrix[:, idx]
        V = self.values[np.ix_(idx, idx)]
        pattern = None if self.sign_pattern is None else self.sign_pattern[idx]
        coefficients, *_ = np.linalg.lstsq(G, np.append(x_chart, 1.0), rcond=None)
        target = G @ coefficients
        rng = np.random.default_rng(options.seed)
        starts = _feasible_points(G, target, options.restarts, rng)
        if initial is not None and len(initial) == self.size:
            warm = np.asarray(initial, dtype=float)[idx]
            starts.insert(0, _project(G, target, warm))

        null = self.null_space if len(idx) == self.size else linalg.null_space(G)
        rank = null.shape[1]
        converged = True
        if rank == 0:
            x = starts[0]
        elif rank == 1:
            x = _scalar_search(V, starts[0], null[:, 0], options, pattern)
        else:
            x, converged = _amplitude_search(V, G, target, starts, options, pattern)
        x = _project(G, target, _polish(V, G, target, x, options, pattern))
        value, eta = _signed_energy(V, x, options, pattern)

        residual = np.abs(G @ x - target).max()
        converged = converged and residual <= options.constraint_tolerance
        if not converged:
            logger.warning(
                "Constrained search did not converge at %s (residual %.3g)", x_chart, residual
            )
        weights = np.zeros(self.size)
        weights[idx] = x
        signs = np.ones(self.size)
        signs[idx] = eta
        logger.debug("F=%.12g with null-space rank %d and signs %s", value, rank, eta)
        return FunctionalEvaluation(
            value=value,
            occupations=target[:-1],
            weights=weights,
            signs=signs,
            converged=bool(converged),
            restarts=len(starts),
            rank=rank,
        )


def _lp_point(G, b, cost) -> Optional[np.ndarray]:
    result = linprog(
        cost,
        A_eq=G,
        b_eq=b,
        bounds=[(0, None)] * G.shape[1],
        method="highs",
    )
    return result.x if result.status == 0 else None


def _feasible_points(G, b, count, rng) -> list[np.ndarray]:
    """
    A central feasible point followed by random mixtures of LP vertices.
    """
    first = _lp_point(G, b, np.zeros(G.shape[1]))
    if first is None:
        raise InfeasibleError("No state reaches these occupation numbers")
    corners = [first]
    for _ in range(max(count, 1)):
        corner = _lp_point(G, b, rng.standard_normal(G.shape[1]))
        if corner is not None:
            corners.append(corner)
    corners = np.array(corners)
    points = [corners.mean(axis=0)]
    for _ in range(count - 1):
        points.append(rng.dirichlet(np.ones(len(corners))) @ corners)
    return [_project(G, b, p) for p in points]


def _project(G, b, x, rounds: int = 3) -> np.ndarray:
    pseudo = np.linalg.pinv(G)
    for _ in range(rounds):
        x = np.clip(x - pseudo @ (G @ x - b), 0.0, None)
    return x


def _scalar_search(V, x0, w, options, pattern) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lower = np.where(w > 1e-14, -x0 / w, -np.inf).max()
        upper = np.where(w < -1e-14, -x0 / w, np.inf).min()

    def energy(a):
        return _signed_energy(V, x0 + a * w, options, pattern)[0]

    edges = np.linspace(lower, upper, SCALAR_SEGMENTS + 1)
    candidates = [(energy(a), a) for a in edges]
    for a, b in zip(edges[:-1], edges[1:]):
        result = minimize_scalar(
            energy, bounds=(a, b), method="bounded", options={"xatol": 1e-12}
        )
        candidates.append((float(result.fun), float(result.x)))
    _, a = min(candidates)
    return np.clip(x0 + a * w, 0.0, None)


def _fixed_sign_solve(W, G, b, s0):
    constraint = {
        "type": "eq",
        "fun": lambda s: G @ (s * s) - b,
        "jac": lambda s: 2.0 * G * s,
    }
    return minimize(
        lambda s: s @ W @ s,
        s0,
        jac=lambda s: 2.0 * W @ s,
        bounds=[(0.0, None)] * s0.size,
        constraints=[constraint],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-15},
    )


def _descend(V, G, b, s, eta, options, pattern) -> tuple[float, np.ndarray, bool]:
    """
    Alternate fixed-sign amplitude solves with sign re-selection.
    """
    success = False
    for _ in range(options.sign_rounds):
        result = _fixed_sign_solve(V * np.outer(eta, eta), G, b, np.maximum(s, 1e-9))
        s = np.abs(result.x)
        success = bool(result.success)
        new_eta = best_signs(V, s, options, pattern)
        if np.array_equal(new_eta, eta):
            break
        eta = new_eta
    x = _project(G, b, s * s)
    return _signed_energy(V, x, options, pattern)[0], x, success


def _amplitude_search(V, G, b, starts, options, pattern) -> tuple[np.ndarray, bool]:
    candidates = []
    for start in starts:
        s = np.sqrt(start)
        candidates.append(_descend(V, G, b, s, best_signs(V, s, options, pattern), options, pattern))
    if pattern is not None:
        value, x, converged = min(candidates, key=lambda c: c[0])
        return x, converged

    # a fixed-sign solve never leaves its sign region
    center = np.sqrt(starts[0])
    if V.shape[0] <= options.enumeration_limit:
        for eta in sign_patterns(V.shape[0]):
            candidates.append(_descend(V, G, b, center, eta, options, pattern))
    value, x, converged = min(candidates, key=lambda c: c[0])

    for _ in range(options.sign_rounds):
        s = np.sqrt(x)
        eta = best_signs(V, s, options, pattern)
        flips = []
        for i in np.flatnonzero(s > 0):
            flipped = eta.copy()
            flipped[i] = -flipped[i]
            flips.append(_descend(V, G, b, s, flipped, options, pattern))
        if not flips:
            break
        best = min(flips, key=lambda c: c[0])
        if best[0] >= value - 1e-12:
            break
        value, x, converged = best
    return x, converged


def _polish(V, G, b, x, options, pattern) -> np.ndarray:
    """
    Free-sign amplitude refinement; kept only if it lowers the energy.
    """
    if x.size < 2:
        return x
    start_value, eta = _signed_energy(V, x, options, pattern)
    alpha0 = eta * np.sqrt(x)
    constraint = {
        "type": "eq",
        "fun": lambda a: G @ (a * a) - b,
        "jac": lambda a: 2.0 * G * a,
    }
    result = minimize(
        lambda a: a @ V @ a,
        alpha0,
        jac=lambda a: 2.0 * V @ a,
        constraints=[constraint],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-15},
    )
    candidate = _project(G, b, result.x * result.x)
    if np.abs(G @ candidate - b).max() > options.constraint_tolerance:
        return x
    value = _signed_energy(V, candidate, options, pattern)[0]
    if value < start_value:
        return candidate
    return x


def functional_simplex(
    polytope: RepresentabilityPolytope, V, n: Sequence[float], options=None
) -> FunctionalEvaluation:
    """
    Closed form on a simplex: x_r is the simplex-normalized facet value
    D_r(n), so only the signs are searched.
    """
    options = options or SearchOptions()
    if not polytope.is_simplex:
        raise NotSimplexError("Polytope is not a simplex")
    values = interaction_values(V)
    if values.shape[0] != polytope.n_vertices:
        raise DimensionError("Interaction matrix does not match the polytope vertices")
    x_chart = np.asarray(n, dtype=float).reshape(-1)
    if x_chart.size != polytope.dimension:
        x_chart = polytope.to_chart(x_chart)
    inside, margin = polytope.contains(x_chart)
    if not inside:
        raise OutsidePolytopeError("Occupation numbers lie outside the simplex", {"margin": margin})
    constants, normals = polytope.simplex_facets()
    x = np.clip(constants + normals @ x_chart, 0.0, None)
    value, eta = _signed_energy(values, x, options, sign_structure(values))
    margins = polytope.facet_values(x_chart)
    return FunctionalEvaluation(
        value=value,
        occupations=x_chart,
        weights=x,
        signs=eta,
        converged=True,
        margins=margins,
        active_facets=tuple(int(j) for j in np.flatnonzero(margins < MARGIN_TOLERANCE)),
    )


Source = Union[ConstrainedSearchProblem, RepresentabilityPolytope]


def _problem(source: Source, V=None) -> ConstrainedSearchProblem:
    if isinstance(source, ConstrainedSearchProblem):
        return source
    if V is None:
        raise DimensionError("An interaction matrix is needed with a polytope")
    return ConstrainedSearchProblem.build(source, V)


def functional_general(
    source: Source,
    V=None,
    n: Sequence[float] = (),
    options: Optional[SearchOptions] = None,
    initial: Optional[np.ndarray] = None,
) -> FunctionalEvaluation:
    return _problem(source, V).evaluate(n, options, initial)


def functional_ensemble(
    source: Source,
    V=None,
    n: Sequence[float] = (),
    options: Optional[SearchOptions] = None,
) -> FunctionalEvaluation:
    """
    Ensemble functional: min Tr(V Gamma) over Gamma = Y Y^T with the diagonal
    of Gamma reaching n. The pure minimizer is always among the candidates.
    """
    options = options or SearchOptions()
    problem = _problem(source, V)
    pure = problem.evaluate(n, options)
    support = (
        list(problem.restricted_to_face(pure.active_facets).support)
        if pure.active_facets
        else list(problem.support)
    )
    G = problem.constraint_matrix[:, support]
    Vs = problem.values[np.ix_(support, support)]
    target = np.append(pure.occupations, 1.0)
    size = len(support)
    columns = min(size, problem.polytope.dimension + 2)

    def objective(flat):
        Y = flat.reshape(size, columns)
        return float(np.trace(Y.T @ Vs @ Y)), (2.0 * Vs @ Y).ravel()

    def diagonal(flat):
        Y = flat.reshape(size, columns)
        return G @ (Y * Y).sum(axis=1) - target

    def diagonal_jac(flat):
        Y = flat.reshape(size, columns)
        return (2.0 * G[:, :, None] * Y[None, :, :]).reshape(G.shape[0], -1)

    rng = np.random.default_rng(options.seed)
    alpha = pure.amplitudes[support]
    starts = [np.hstack([alpha[:, None], np.zeros((size, columns - 1))])]
    for _ in range(options.restarts):
        weights = np.sqrt(rng.dirichlet(np.ones(columns)))
        Y = rng.standard_normal((size, columns))
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
        starts.append(np.sqrt(pure.weights[support])[:, None] * Y * weights[None, :])

    best_value, best_diag, converged = pure.value, pure.weights[support], pure.converged
    for Y0 in starts:
        result = minimize(
            objective,
            Y0.ravel(),
            jac=True,
            constraints=[{"type": "eq", "fun": diagonal, "jac": diagonal_jac}],
            method="SLSQP",
            options={"maxiter": 500, "ftol": 1e-15},
        )
        if np.abs(diagonal(result.x)).max() > options.constraint_tolerance:
            continue
        if result.fun < best_value:
            Y = result.x.reshape(size, columns)
            best_value, best_diag, converged = float(result.fun), (Y * Y).sum(axis=1), True

    if pure.value - best_value > options.value_tolerance:
        logger.info(
            "Ensemble lies %.3g below the pure functional at %s",
            pure.value - best_value,
            pure.occupations,
        )
    weights = np.zeros(problem.size)
    weights[support] = best_diag
    return FunctionalEvaluation(
        value=best_value,
        occupations=pure.occupations,
        weights=weights,
        signs=None,
        converged=converged,
        margins=pure.margins,
        restarts=len(starts),
        active_facets=pure.active_facets,
        rank=columns,
    )


def exchange_force(
    problem: ConstrainedSearchProblem,
    n: Sequence[float],
    step: Optional[float] = None,
    options: Optional[SearchOptions] = None,
) -> np.ndarray:
    """
    dF/dn in chart coordinates by central differences, warm-started from
    the minimizer at n. The exchange force is minus this gradient.
    """
    options = options or SearchOptions()
    x_chart = problem.chart_point(n)
    h = step if step is not None else 1e-5 * problem.polytope.diameter
    base = problem.evaluate(x_chart, options)
    gradient = np.zeros(x_chart.size)
    for k in range(x_chart.size):
        offset = np.zeros(x_chart.size)
        offset[k] = h
        for point in (x_chart + offset, x_chart - offset):
            inside, margin = problem.polytope.contains(point)
            if not inside or margin <= options.constraint_tolerance:
                raise StepTooLargeError(
                    "Finite-difference step leaves the polytope interior",
                    {"step": h, "coordinate": k, "margin": margin},
                )
        upper = problem.evaluate(x_chart + offset, options, initial=base.weights)
        lower = problem.evaluate(x_chart - offset, options, initial=base.weights)
        gradient[k] = (upper.value - lower.value) / (2.0 * h)
    return gradient


@dataclass
class BoundaryExpansion:
    facet: int
    value: float
    coefficient: float
    exponent: float
    residual: float
    poor_fit: bool
    distances: np.ndarray
    values: np.ndarray

    def __iter__(self):
        return iter((self.value, self.coefficient, self.exponent))


def boundary_expansion(
    problem: ConstrainedSearchProblem,
    facet: int,
    path: Optional[Sequence[float]] = None,
    distances: Sequence[float] = DEFAULT_RAY_DISTANCES,
    options: Optional[SearchOptions] = None,
) -> BoundaryExpansion:
    """
    Fit F(eps) = F0 + G eps^beta along a ray leaving facet ``facet``, where
    eps is the facet value D_j(n). The ray starts at the centroid of the
    facet's vertices and heads to the polytope centroid unless ``path``
    gives a direction.
    """
    options = options or SearchOptions()
    polytope = problem.polytope
    distances = np.asarray(distances, dtype=float)
    if distances.size < 6:
        raise DimensionError("Need at least six ray distances", {"got": distances.size})
    tight = list(polytope.tight_vertices(facet))
    anchor = polytope.chart_vertices[tight].mean(axis=0)
    direction = np.asarray(path, dtype=float) if path is not None else polytope.centroid - anchor
    slope = float(polytope.inward_normal(facet) @ direction)
    if slope <= 0:
        raise DimensionError("Ray does not enter the polytope", {"facet": facet})

    value0 = problem.restricted_to_face([facet]).evaluate(anchor, options).value
    values = np.array(
        [problem.evaluate(anchor + (eps / slope) * direction, options).value for eps in distances]
    )
    changes = values - value0
    scale = max(1.0, np.abs(problem.values).max(initial=0.0))
    if np.abs(changes).max() <= 1e-13 * scale:
        return BoundaryExpansion(
            facet, value0, 0.0, float("nan"), 0.0, False, distances, values
        )

    sign = np.sign(np.median(changes))
    magnitudes = np.abs(changes)
    usable = magnitudes > 0
    fit, residuals, *_ = np.polyfit(
        np.log(distances[usable]), np.log(magnitudes[usable]), 1, full=True
    )
    exponent, log_coefficient = fit
    residual = float(np.sqrt(residuals[0] / usable.sum())) if residuals.size else 0.0
    poor_fit = residual > POOR_FIT_RESIDUAL or not np.all(np.sign(changes) == sign)
    if poor_fit:
        logger.warning(
            "Boundary fit on facet %d is poor (residual %.3g)", facet, residual
        )
    return BoundaryExpansion(
        facet=facet,
        value=value0,
        coefficient=float(sign * np.exp(log_coefficient)),
        exponent=float(exponent),
        residual=residual,
        poor_fit=bool(poor_fit),
        distances=distances,
        values=values,
    )
