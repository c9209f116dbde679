"""Graph operators with dense spectral calculus, heat kernel diagnostics and the bump calculus."""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import TypeAdapter, ValidationError
from scipy.linalg import eigh

from tentlab.config import DEFAULT_RATIO
from tentlab.errors import ConvergenceError, InputError, InvariantViolation
from tentlab.models import GraphKind, GraphSpec, HeatOrderReport, HeatReport
from tentlab.space import MetricMeasureSpace, read_text
from tentlab.tent import TGrid, grid_volumes

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
_NULL_TOL = 1e-10
_RECONSTRUCTION_TOL = 1e-8
_GL_ORDER = 8
_QUADRATURE_TOL = 1e-10
_MAX_DOUBLINGS = 8
_MOMENT_CUTOFF = 10.0

SpectralFn = Callable[[np.ndarray], np.ndarray]


# --- Graphs ---


def _graph_path(space: MetricMeasureSpace, spec: GraphSpec) -> np.ndarray:
    n = space.n_points
    W = np.zeros((n, n))
    idx = np.arange(n - 1)
    W[idx, idx + 1] = spec.weight
    W[idx + 1, idx] = spec.weight
    return W


def _graph_grid2d(space: MetricMeasureSpace, spec: GraphSpec) -> np.ndarray:
    rows, cols = spec.rows, spec.cols
    if rows is None or cols is None or rows * cols != space.n_points:
        raise InputError(
            f"grid2d needs rows * cols == {space.n_points}, got rows={rows}, cols={cols}"
        )
    W = np.zeros((space.n_points, space.n_points))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                W[i, i + 1] = W[i + 1, i] = spec.weight
            if r + 1 < rows:
                W[i, i + cols] = W[i + cols, i] = spec.weight
    return W


def _graph_edges(space: MetricMeasureSpace, spec: GraphSpec) -> np.ndarray:
    n = space.n_points
    W = np.full((n, n), np.nan)
    for i, j, weight in spec.edges or []:
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"Edge ({i}, {j}) refers to a point outside 0..{n - 1}")
        if i == j:
            raise InputError(f"Self-loop at point {i}")
        if weight < 0 or not math.isfinite(weight):
            raise InputError(f"Edge ({i}, {j}) has invalid weight {weight}")
        for a, b in ((i, j), (j, i)):
            if not np.isnan(W[a, b]) and W[a, b] != weight:
                raise InputError(f"Asymmetric weights on edge ({i}, {j})")
            W[a, b] = weight
    return np.nan_to_num(W, nan=0.0)


# Strategy registry: graph kind -> adjacency builder
GRAPH_BUILDERS: Dict[GraphKind, Callable[[MetricMeasureSpace, GraphSpec], np.ndarray]] = {
    GraphKind.PATH: _graph_path,
    GraphKind.GRID2D: _graph_grid2d,
    GraphKind.EDGES: _graph_edges,
}


def load_graph(source: Union[GraphSpec, dict, str, Path]) -> GraphSpec:
    """
    Load a graph spec from a model, a dict or a JSON file.

    Raises:
        InputError: On a missing file or malformed spec
    """
    if isinstance(source, GraphSpec):
        return source
    try:
        if isinstance(source, dict):
            return GraphSpec.model_validate(source)
        return GraphSpec.model_validate_json(read_text(source))
    except ValidationError as e:
        raise InputError(f"Invalid graph spec: {e}") from e


def load_function(
    source: Union[str, Path, Sequence[float]], space: MetricMeasureSpace
) -> np.ndarray:
    """
    Load a function on the points from a JSON array file or a sequence of values.

    Raises:
        InputError: On a missing file, non-finite values or a length mismatch
    """
    adapter = TypeAdapter(List[float])
    try:
        if isinstance(source, (str, Path)):
            values = adapter.validate_json(read_text(source))
        else:
            values = adapter.validate_python(list(source))
    except ValidationError as e:
        raise InputError(f"Invalid function document: {e}") from e
    f = np.asarray(values, dtype=float)
    if f.shape != (space.n_points,):
        raise InputError(f"Function has {f.size} values but the space has {space.n_points} points")
    if not np.all(np.isfinite(f)):
        raise InputError("Function values must be finite")
    return f


# --- Operator ---


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """
    ``L = mu^-1 (D - W)``, self-adjoint in ``L^2(mu)``, with its eigendecomposition.

    Eigenvectors are orthonormal for the mu-inner product, so
    ``g(L) f = U g(Lambda) U^T (mu f)``.

    Attributes:
        space: The space
        matrix: The operator as a matrix
        eigenvalues: Ascending, clamped at 0
        eigenvectors: Columns ``u_i`` with ``U^T diag(mu) U = I``
    """

    space: MetricMeasureSpace
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_points(self) -> int:
        return self.space.n_points

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @cached_property
    def null_mask(self) -> np.ndarray:
        return self.eigenvalues <= _NULL_TOL * max(1.0, self.lambda_max)

    @property
    def positive_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[~self.null_mask]

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """``U^T (mu f)``; works column-wise for 2-D input."""
        f = np.asarray(f)
        mass = self.space.mass if f.ndim == 1 else self.space.mass[:, None]
        return self.eigenvectors.T @ (mass * f)

    def synthesize(self, coefficients: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ coefficients

    def apply(self, f: np.ndarray, power: int = 1) -> np.ndarray:
        """``L^power f`` by repeated matrix application."""
        out = np.asarray(f)
        for _ in range(power):
            out = self.matrix @ out
        return out


def build_operator(
    space: MetricMeasureSpace, graph: Union[GraphSpec, dict, str, Path]
) -> SpectralOperator:
    """
    Weighted graph Laplacian and its dense eigendecomposition.

    Args:
        space: The space, supplying the masses
        graph: Graph spec (path, grid2d or explicit edges)

    Returns:
        SpectralOperator: Factorized operator

    Raises:
        InputError: On a malformed graph, negative or asymmetric weights
        InvariantViolation: If the factorization does not reproduce the operator
    """
    spec = load_graph(graph)
    W = GRAPH_BUILDERS[spec.kind](space, spec)
    if np.any(W < 0):
        raise InputError("Edge weights must be nonnegative")
    if not np.allclose(W, W.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(W).max()))):
        raise InputError("Edge weights must be symmetric")
    if space.n_points > DENSE_LIMIT:
        logger.warning(
            "Dense eigendecomposition of %d points; expect long runtimes.", space.n_points
        )
    laplacian = np.diag(W.sum(axis=1)) - W
    eigenvalues, eigenvectors = eigh(laplacian, np.diag(space.mass))
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    if eigenvalues.min() < -_NULL_TOL * scale:
        raise InvariantViolation(f"Negative eigenvalue {eigenvalues.min():.3g}")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    eigenvalues[eigenvalues <= _NULL_TOL * scale] = 0.0
    matrix = laplacian / space.mass[:, None]
    rebuilt = (eigenvectors * eigenvalues) @ eigenvectors.T * space.mass[None, :]
    error = float(np.linalg.norm(matrix - rebuilt))
    if error > _RECONSTRUCTION_TOL * max(float(np.linalg.norm(matrix)), 1e-300):
        raise InvariantViolation(f"Eigendecomposition does not reproduce L (error {error:.3g})")
    for array in (matrix, eigenvalues, eigenvectors):
        array.setflags(write=False)
    op = SpectralOperator(
        space=space, matrix=matrix, eigenvalues=eigenvalues, eigenvectors=eigenvectors
    )
    logger.info(
        "Built %s operator on %d points: lambda_max %.6g, null space %d.",
        spec.kind,
        space.n_points,
        op.lambda_max,
        int(op.null_mask.sum()),
    )
    return op


def spectral_apply(op: SpectralOperator, g: SpectralFn, f: np.ndarray) -> np.ndarray:
    """
    ``g(L) f`` through the eigendecomposition.

    Args:
        op: The operator
        g: Vectorized function of the eigenvalues
        f: Per-point values, or a matrix of columns

    Returns:
        np.ndarray: Same shape as f
    """
    values = np.asarray(g(op.eigenvalues))
    coefficients = op.coefficients(f)
    if coefficients.ndim == 2:
        return op.synthesize(values[:, None] * coefficients)
    return op.synthesize(values * coefficients)


def kernel(op: SpectralOperator, g: SpectralFn) -> np.ndarray:
    """Kernel of ``g(L)`` against mu: ``g(L) f(x) = sum_y K(x, y) f(y) mu_y``."""
    values = np.asarray(g(op.eigenvalues))
    return (op.eigenvectors * values) @ op.eigenvectors.T


def null_projection(op: SpectralOperator, f: np.ndarray) -> np.ndarray:
    """Orthogonal projection of f onto the null space of L."""
    return spectral_apply(op, lambda lam: op.null_mask.astype(float), f)


def null_complement(op: SpectralOperator, f: np.ndarray) -> np.ndarray:
    """``f`` minus its null-space projection."""
    return np.asarray(f) - null_projection(op, f)


def heat_multiplier(t: float, order: int = 1) -> SpectralFn:
    """``(t^2 lambda)^order exp(-t^2 lambda)``."""
    return lambda lam: (t * t * lam) ** order * np.exp(-t * t * lam)


def heat_diagnostics(
    op: SpectralOperator, grid: TGrid, orders: Sequence[int] = (0, 1)
) -> HeatReport:
    """
    Gaussian-bound fits for the kernels of ``(t^2 L)^k e^{-t^2 L}``.

    ``C_onsite = max |p_{t,k}(x, y)| V(x, t)``; the fit fixes ``C = 2 C_onsite`` and reports
    the largest ``c`` with ``|p_{t,k}| <= C / V(x, t) exp(-c d^2 / t^2)`` everywhere.
    Also reports the conservation error ``max |e^{-t^2 L} 1 - 1|`` and the distance of the
    heat kernel at large time from the null projection.

    Args:
        op: The operator
        grid: Times to scan
        orders: Values of k

    Returns:
        HeatReport: Fitted constants per order with a ``(t, max |p| V)`` table
    """
    space = op.space
    volumes = grid_volumes(space, grid)
    d2 = space.dist**2
    off = space.dist > 0
    reports = []
    for k in sorted(set(int(o) for o in orders)):
        kernels = [np.abs(kernel(op, heat_multiplier(t, k))) for t in grid.samples]
        scaled = [K * volumes[:, m][:, None] for m, K in enumerate(kernels)]
        table = [(float(t), float(s.max())) for t, s in zip(grid.samples, scaled)]
        c_onsite = max(v for _, v in table)
        c_big = 2.0 * c_onsite
        c_fit: Optional[float] = None
        if c_big > 0:
            for t, s in zip(grid.samples, scaled):
                live = off & (s > 0)
                if not live.any():
                    continue
                bound = float(np.min(t * t / d2[live] * np.log(c_big / s[live])))
                c_fit = bound if c_fit is None else min(c_fit, bound)
        reports.append(HeatOrderReport(order=k, c_fit=c_fit, C_fit=c_big, C_onsite=c_onsite,
                                       table=table))

    ones = np.ones(space.n_points)
    conservation = max(
        float(np.abs(spectral_apply(op, heat_multiplier(t, 0), ones) - ones).max())
        for t in grid.samples
    )
    positive = op.positive_eigenvalues
    projection = 0.0
    if positive.size:
        T = math.sqrt(50.0 / float(positive.min()))
        limit = kernel(op, lambda lam: op.null_mask.astype(float))
        projection = float(np.abs(kernel(op, heat_multiplier(T, 0)) - limit).max())
    return HeatReport(orders=reports, conservation_error=conservation, projection_error=projection)


def calderon_grid(
    op: SpectralOperator, ratio: float = DEFAULT_RATIO, low: float = 1e-2, high: float = 8.0
) -> TGrid:
    """Grid with ``t sqrt(lambda)`` spanning ``[low, high]`` over the positive spectrum."""
    positive = op.positive_eigenvalues
    if positive.size == 0:
        raise InputError("Operator has no positive eigenvalues")
    t_min = low / math.sqrt(float(positive.max()))
    t_max = high / math.sqrt(float(positive.min()))
    count = math.ceil(math.log(t_max / t_min) / math.log(ratio)) + 1
    return TGrid(t_min=t_min, ratio=ratio, count=count)


# --- Bump calculus ---


def _bump(s: np.ndarray, c0: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    u = (c0 * s) ** 2
    out = np.zeros_like(s)
    inside = u < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


def _gauss_legendre(a: float, b: float, panels: int):
    nodes, weights = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


@dataclass(frozen=True, eq=False)
class CalculusFunctions:
    """
    The bump ``phi``, its cosine transform ``Phi`` and ``Psi(x) = x^(2 alpha) Phi(x)^3``.

    Attributes:
        c0: Propagation speed; ``phi`` lives on ``[-1/c0, 1/c0]``
        alpha: Order of Psi
        M: Atom order; ``alpha - M`` is the power of L kept in b
        panels: Quadrature panels reached by the convergence gate
        nodes: Quadrature nodes on ``[0, 1/c0]``
        weighted_bump: ``2 w_j phi(s_j)`` at the nodes
        c_psi: ``(int_0^inf Psi(s) s^2 e^{-s^2} ds / s)^-1``
    """

    c0: float
    alpha: float
    M: int
    panels: int
    nodes: np.ndarray
    weighted_bump: np.ndarray
    c_psi: float

    def phi(self, s: np.ndarray) -> np.ndarray:
        return _bump(s, self.c0)

    def Phi(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (np.cos(np.multiply.outer(x, self.nodes)) @ self.weighted_bump).reshape(x.shape)

    def Psi(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x ** (2 * self.alpha) * self.Phi(x) ** 3

    def psi_multiplier(self, t: float) -> SpectralFn:
        """``Psi(t sqrt(lambda))``."""
        return lambda lam: self.Psi(t * np.sqrt(lam))

    def b_multiplier(self, t: float) -> SpectralFn:
        """``t^(2 alpha) lambda^(alpha - M) Phi(t sqrt(lambda))^3``, i.e. ``Psi / lambda^M``."""
        return lambda lam: (
            t ** (2 * self.alpha) * lam ** (self.alpha - self.M) * self.Phi(t * np.sqrt(lam)) ** 3
        )


def _psi_moment(c0: float, alpha: float, panels: int):
    nodes, weights = _gauss_legendre(0.0, 1.0 / c0, panels)
    weighted_bump = 2.0 * weights * _bump(nodes, c0)
    s, ws = _gauss_legendre(0.0, _MOMENT_CUTOFF, panels)
    Phi = np.cos(np.multiply.outer(s, nodes)) @ weighted_bump
    moment = float(np.sum(ws * s ** (2 * alpha) * Phi**3 * s * np.exp(-s * s)))
    return moment, nodes, weighted_bump


def bump_calculus(
    c0: float = 1.0, alpha: float = 3.0, M: int = 1, quadrature_nodes: int = 64
) -> CalculusFunctions:
    """
    Tabulate the bump calculus with a doubling convergence gate.

    ``phi(s) = exp(-1 / (1 - (c0 s)^2))`` on ``|s| < 1/c0``; ``Phi(x) = 2 int_0^{1/c0}
    phi(s) cos(s x) ds`` by composite Gauss-Legendre; the moment
    ``int_0^inf Psi(s) s e^{-s^2} ds`` is recomputed at doubled resolution until two
    consecutive values agree to 1e-10 relative.

    Args:
        c0: Propagation speed, c0 > 0
        alpha: Order of Psi, at least M + 1
        M: Atom order
        quadrature_nodes: Starting panel count

    Returns:
        CalculusFunctions: The tabulated calculus

    Raises:
        InputError: On invalid parameters
        ConvergenceError: If the gate does not close
    """
    if c0 <= 0:
        raise InputError(f"c0 must be > 0, got {c0}")
    if M < 1 or alpha < M + 1:
        raise InputError(f"Need M >= 1 and alpha >= M + 1, got M={M}, alpha={alpha}")
    if quadrature_nodes < 1:
        raise InputError(f"quadrature_nodes must be >= 1, got {quadrature_nodes}")
    panels = quadrature_nodes
    previous, nodes, weighted_bump = _psi_moment(c0, alpha, panels)
    for _ in range(_MAX_DOUBLINGS):
        panels *= 2
        moment, nodes, weighted_bump = _psi_moment(c0, alpha, panels)
        if abs(moment - previous) <= _QUADRATURE_TOL * abs(moment):
            break
        previous = moment
    else:
        raise ConvergenceError(
            f"Psi moment did not stabilize to {_QUADRATURE_TOL:g} after {_MAX_DOUBLINGS} "
            "doublings"
        )
    if not moment > 0:
        raise ConvergenceError(f"Psi moment must be positive, got {moment}")
    logger.debug("Bump calculus: %d panels, c_psi %.12g.", panels, 1.0 / moment)
    return CalculusFunctions(
        c0=c0,
        alpha=float(alpha),
        M=M,
        panels=panels,
        nodes=nodes,
        weighted_bump=weighted_bump,
        c_psi=1.0 / moment,
    )


def s_membership(
    calc: CalculusFunctions, s: float, samples: Optional[np.ndarray] = None
) -> float:
    """
    Smallest C with ``|Psi(z)| <= C |z|^s / (1 + |z|^(2s))`` on the samples.

    Args:
        calc: The calculus
        s: Decay exponent, s > 0
        samples: Positive points (default: 400 geometric points in [1e-3, 1e2])
    """
    if s <= 0:
        raise InputError(f"s must be > 0, got {s}")
    z = np.geomspace(1e-3, 1e2, 400) if samples is None else np.asarray(samples, dtype=float)
    return float(np.max(np.abs(calc.Psi(z)) * (1.0 + z ** (2 * s)) / z**s))
