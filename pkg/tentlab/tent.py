"""The upper half-space on a geometric t-grid: cones, tents, area functional, tent norms.

Samples ``(y_i, t_m)`` carry the measure ``mu_i ln(ratio)``, the discrete ``dmu dt/t``.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from tentlab.config import GridConfig
from tentlab.errors import InputError, InvariantViolation
from tentlab.models import (
    AtomKind,
    AtomNormCheck,
    AtomReport,
    DensityRatioReport,
    DensityReport,
    HolderChainReport,
    TentFunctionDocument,
    TGridDocument,
)
from tentlab.space import (
    Ball,
    MetricMeasureSpace,
    distance_to_set,
    doubling_report,
    lp_norm_weighted,
    maximal_function,
    read_text,
    weight_values,
)

logger = logging.getLogger(__name__)

_SLACK_TOL = 1e-12


@dataclass(frozen=True)
class TGrid:
    """
    Geometric grid ``t_m = t_min * ratio^m``, ``m = 0 .. count - 1``.

    Attributes:
        t_min: First sample
        ratio: Ratio between consecutive samples
        count: Number of samples
    """

    t_min: float
    ratio: float
    count: int

    def __post_init__(self):
        if not self.t_min > 0:
            raise InputError(f"t_min must be > 0, got {self.t_min}")
        if not self.ratio > 1:
            raise InputError(f"ratio must be > 1, got {self.ratio}")
        if self.count < 1:
            raise InputError(f"count must be >= 1, got {self.count}")

    @cached_property
    def samples(self) -> np.ndarray:
        t = self.t_min * np.power(self.ratio, np.arange(self.count))
        t.setflags(write=False)
        return t

    @property
    def log_step(self) -> float:
        """``ln(ratio)``, the dt/t measure of one sample."""
        return math.log(self.ratio)

    @property
    def t_max(self) -> float:
        return float(self.samples[-1])

    @classmethod
    def from_space(
        cls, space: MetricMeasureSpace, config: Optional[GridConfig] = None
    ) -> "TGrid":
        """
        Grid resolved from a space: ``t_min`` half the minimum distance, reaching ``2 diam``.

        Args:
            space: The space
            config: Overrides (default: GridConfig())
        """
        config = config or GridConfig()
        t_min = config.t_min if config.t_min is not None else space.min_distance / 2.0
        if config.count is not None:
            return cls(t_min=t_min, ratio=config.ratio, count=config.count)
        t_max = config.t_max if config.t_max is not None else 2.0 * max(space.diam, t_min)
        count = math.ceil(math.log(t_max / t_min) / math.log(config.ratio) - 1e-12) + 1
        return cls(t_min=t_min, ratio=config.ratio, count=max(1, count))

    def widened(self, octaves: float = 1.0) -> "TGrid":
        """The same grid extended by ``octaves`` on both ends."""
        extra = math.ceil(octaves * math.log(2.0) / self.log_step - 1e-12)
        return TGrid(
            t_min=self.t_min / self.ratio**extra, ratio=self.ratio, count=self.count + 2 * extra
        )

    def to_document(self) -> TGridDocument:
        return TGridDocument(t_min=self.t_min, ratio=self.ratio, count=self.count)

    @classmethod
    def from_document(cls, document: TGridDocument) -> "TGrid":
        return cls(t_min=document.t_min, ratio=document.ratio, count=document.count)


@dataclass(frozen=True, eq=False)
class TentFunction:
    """
    Samples ``F(y_i, t_m)`` on points x grid, real or complex.

    Attributes:
        grid: The t-grid
        values: Array of shape ``(N, grid.count)``
    """

    grid: TGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values)
        if not np.iscomplexobj(values):
            values = values.astype(float)
        if values.ndim != 2 or values.shape[1] != self.grid.count:
            raise InputError(
                f"Tent function must have shape (N, {self.grid.count}), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("Tent function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n_points: int, grid: TGrid) -> "TentFunction":
        return cls(grid=grid, values=np.zeros((n_points, grid.count)))

    @property
    def n_points(self) -> int:
        return int(self.values.shape[0])

    @property
    def support(self) -> "UpperHalfSpaceRegion":
        return UpperHalfSpaceRegion(self.values != 0)

    def restrict(self, region: "UpperHalfSpaceRegion") -> "TentFunction":
        return TentFunction(self.grid, np.where(region.mask, self.values, 0))

    def scale(self, c: Union[float, complex]) -> "TentFunction":
        return TentFunction(self.grid, self.values * c)

    def __add__(self, other: "TentFunction") -> "TentFunction":
        if other.grid != self.grid:
            raise InputError("Tent functions live on different grids")
        return TentFunction(self.grid, self.values + other.values)


@dataclass(frozen=True, eq=False)
class UpperHalfSpaceRegion:
    """A set of samples ``(i, m)``, stored as a boolean mask."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    def __and__(self, other: "UpperHalfSpaceRegion") -> "UpperHalfSpaceRegion":
        return UpperHalfSpaceRegion(self.mask & other.mask)

    def __or__(self, other: "UpperHalfSpaceRegion") -> "UpperHalfSpaceRegion":
        return UpperHalfSpaceRegion(self.mask | other.mask)

    def __sub__(self, other: "UpperHalfSpaceRegion") -> "UpperHalfSpaceRegion":
        return UpperHalfSpaceRegion(self.mask & ~other.mask)

    def __invert__(self) -> "UpperHalfSpaceRegion":
        return UpperHalfSpaceRegion(~self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UpperHalfSpaceRegion) and np.array_equal(self.mask, other.mask)

    __hash__ = None  # type: ignore[assignment]

    def issubset(self, other: "UpperHalfSpaceRegion") -> bool:
        return not np.any(self.mask & ~other.mask)

    def samples(self) -> List[Tuple[int, int]]:
        """Member samples in row-major order."""
        return [(int(i), int(m)) for i, m in np.argwhere(self.mask)]


def _check_tent(space: MetricMeasureSpace, F: TentFunction, grid: TGrid) -> None:
    if F.grid != grid:
        raise InputError("Tent function grid differs from the requested grid")
    if F.n_points != space.n_points:
        raise InputError(
            f"Tent function has {F.n_points} rows but the space has {space.n_points} points"
        )


@lru_cache(maxsize=64)
def grid_volumes(space: MetricMeasureSpace, grid: TGrid) -> np.ndarray:
    """``V(x, t_m)`` for every point and sample."""
    table = space.volume_table(grid.samples)
    table.setflags(write=False)
    return table


def _ball_integrals(space: MetricMeasureSpace, grid: TGrid, density: np.ndarray) -> np.ndarray:
    """``out[x, m] = sum_{d(x, z) < t_m} density[z]``."""
    out = np.empty((space.n_points, grid.count))
    for m, t in enumerate(grid.samples):
        out[:, m] = (space.dist < t) @ density
    return out


def cone(
    space: MetricMeasureSpace, grid: TGrid, x: int, alpha: float = 1.0
) -> UpperHalfSpaceRegion:
    """``Gamma_alpha(x) = {(y, t) : d(x, y) < alpha t}``."""
    if alpha <= 0:
        raise InputError(f"Aperture must be > 0, got {alpha}")
    return UpperHalfSpaceRegion(space.dist[x][:, None] < alpha * grid.samples[None, :])


def union_of_cones(
    space: MetricMeasureSpace, grid: TGrid, points: np.ndarray, alpha: float = 1.0
) -> UpperHalfSpaceRegion:
    """``R_alpha(F) = {(y, t) : d(y, F) < alpha t}``; empty for empty F."""
    if alpha <= 0:
        raise InputError(f"Aperture must be > 0, got {alpha}")
    to_set = distance_to_set(space, points)
    return UpperHalfSpaceRegion(to_set[:, None] < alpha * grid.samples[None, :])


def tent_over(
    space: MetricMeasureSpace, grid: TGrid, points: np.ndarray, alpha: float = 1.0
) -> UpperHalfSpaceRegion:
    """
    ``T_alpha(O) = {(y, t) : d(y, O^c) >= alpha t}``.

    ``d(y, empty) = inf``, so the tent over the whole space is the full half-space and the
    tent over the empty set is empty.
    """
    if alpha <= 0:
        raise InputError(f"Aperture must be > 0, got {alpha}")
    points = np.asarray(points, dtype=bool)
    to_complement = distance_to_set(space, ~points)
    return UpperHalfSpaceRegion(to_complement[:, None] >= alpha * grid.samples[None, :])


def tent_of_ball(space: MetricMeasureSpace, grid: TGrid, ball: Ball) -> UpperHalfSpaceRegion:
    """``T(B)``, the tent over a ball."""
    return tent_over(space, grid, ball.mask(space))


def area_functional(space: MetricMeasureSpace, grid: TGrid, F: TentFunction) -> np.ndarray:
    """
    Area functional ``A(F)(x)^2 = sum_{d(x,y) < t} |F(y,t)|^2 mu_y ln(ratio) / V(x,t)``.

    Args:
        space: The space
        grid: The t-grid of F
        F: Tent function

    Returns:
        np.ndarray: ``A(F)`` at every point
    """
    _check_tent(space, F, grid)
    density = np.abs(F.values) ** 2 * space.mass[:, None]
    cone_sums = np.zeros(space.n_points)
    volumes = grid_volumes(space, grid)
    for m, t in enumerate(grid.samples):
        if not density[:, m].any():
            continue
        cone_sums += ((space.dist < t) @ density[:, m]) / volumes[:, m]
    return np.sqrt(cone_sums * grid.log_step)


def tent_norm(
    space: MetricMeasureSpace, grid: TGrid, F: TentFunction, p: float, w=None
) -> float:
    """``||F||_{T^p_{2,w}} = ||A(F)||_{L^p_w}``; ``w=None`` is the unweighted norm."""
    return lp_norm_weighted(space, area_functional(space, grid, F), w, p)


def l2_norm(space: MetricMeasureSpace, grid: TGrid, F: TentFunction) -> float:
    """``||F||_{L^2(dmu dt/t)}``, the T^2_2 norm up to Fubini."""
    return math.sqrt(float(np.sum(np.abs(F.values) ** 2 * space.mass[:, None])) * grid.log_step)


def pairing(
    space: MetricMeasureSpace, grid: TGrid, F: TentFunction, G: TentFunction
) -> Union[float, complex]:
    """Bilinear pairing ``sum F(y,t) G(y,t) mu_y ln(ratio)``."""
    _check_tent(space, F, grid)
    _check_tent(space, G, grid)
    total = np.sum(F.values * G.values * space.mass[:, None]) * grid.log_step
    return complex(total) if np.iscomplexobj(total) else float(total)


@lru_cache(maxsize=64)
def cone_overlap(space: MetricMeasureSpace, grid: TGrid) -> float:
    """``max V(x,t)/V(y,t)`` over ``d(x,y) < t``; at most the doubling constant."""
    volumes = grid_volumes(space, grid)
    worst = 1.0
    for m, t in enumerate(grid.samples):
        near = space.dist < t
        ratio = volumes[:, m][:, None] / volumes[:, m][None, :]
        worst = max(worst, float(ratio[near].max()))
    return worst


def holder_chain(
    space: MetricMeasureSpace,
    grid: TGrid,
    F: TentFunction,
    G: TentFunction,
    q: float,
    w=None,
    c_doubling: Optional[float] = None,
) -> HolderChainReport:
    """
    Every quantity of the tent duality chain for one pair.

    ``|<F, G>| <= C int A(F) A(G) dmu`` with the measured C, the Hölder step
    ``int A(F) A(G) <= ||A(F)||_{L^q_w} ||A(G)||_{L^q'_{w^(1-q')}}``, and the cone
    overlap bound that dominates C.

    Raises:
        InputError: If q <= 1
    """
    if q <= 1:
        raise InputError(f"Duality needs q > 1, got {q}")
    values = weight_values(space, w)
    q_dual = q / (q - 1.0)
    area_f = area_functional(space, grid, F)
    area_g = area_functional(space, grid, G)
    cone_integral = float(np.sum(area_f * area_g * space.mass))
    bound = lp_norm_weighted(space, area_f, values, q) * lp_norm_weighted(
        space, area_g, values ** (1.0 - q_dual), q_dual
    )
    paired = abs(pairing(space, grid, F, G))
    if c_doubling is None:
        c_doubling = doubling_report(space).c_doubling
    return HolderChainReport(
        q=q,
        pairing=paired,
        cone_integral=cone_integral,
        holder_bound=bound,
        holder_ok=cone_integral <= bound * (1 + 1e-9) + 1e-300,
        measured_cn=paired / cone_integral if cone_integral > 0 else None,
        overlap_bound=cone_overlap(space, grid),
        c_doubling=c_doubling,
    )


def ball_weight_table(space: MetricMeasureSpace, grid: TGrid, w=None) -> np.ndarray:
    """``w(B(y, t_m))`` for every point and sample."""
    return _ball_integrals(space, grid, weight_values(space, w) * space.mass)


# --- Atoms ---

AtomCheckFn = Callable[..., List[AtomNormCheck]]


def _norm_check(q: float, norm: float, bound: float) -> AtomNormCheck:
    return AtomNormCheck(
        q=q, norm=norm, bound=bound, slack=bound - norm, passed=norm <= bound * (1 + _SLACK_TOL)
    )


def _atom_q(space, grid, a, ball, p, q, w, q_list) -> List[AtomNormCheck]:
    w_ball = float((weight_values(space, w) * space.mass)[ball.mask(space)].sum())
    return [_norm_check(q, tent_norm(space, grid, a, q, w), w_ball ** (1.0 / q - 1.0 / p))]


def _atom_unweighted(space, grid, a, ball, p, q, w, q_list) -> List[AtomNormCheck]:
    bound = ball.volume(space) ** (0.5 - 1.0 / p)
    return [_norm_check(2.0, l2_norm(space, grid, a), bound)]


def _atom_type_i(space, grid, a, ball, p, q, w, q_list) -> List[AtomNormCheck]:
    ratio = ball_weight_table(space, grid, w) / grid_volumes(space, grid)
    norm = math.sqrt(
        float(np.sum(np.abs(a.values) ** 2 * ratio * space.mass[:, None])) * grid.log_step
    )
    w_ball = float((weight_values(space, w) * space.mass)[ball.mask(space)].sum())
    return [_norm_check(2.0, norm, w_ball ** (0.5 - 1.0 / p))]


def _atom_type_ii(space, grid, a, ball, p, q, w, q_list) -> List[AtomNormCheck]:
    w_ball = float((weight_values(space, w) * space.mass)[ball.mask(space)].sum())
    mu_ball = ball.volume(space)
    return [
        _norm_check(
            float(r), tent_norm(space, grid, a, r), mu_ball ** (1.0 / r) * w_ball ** (-1.0 / p)
        )
        for r in q_list
    ]


# Strategy registry: atom kind -> size checks
ATOM_CHECKS: Dict[AtomKind, AtomCheckFn] = {
    AtomKind.Q_ATOM: _atom_q,
    AtomKind.UNWEIGHTED: _atom_unweighted,
    AtomKind.TYPE_I: _atom_type_i,
    AtomKind.TYPE_II: _atom_type_ii,
}


def validate_q_atom(
    space: MetricMeasureSpace,
    grid: TGrid,
    a: TentFunction,
    ball: Ball,
    p: float,
    q: float,
    w=None,
    kind: AtomKind = AtomKind.Q_ATOM,
    q_list: Sequence[float] = (2.0, 4.0, 8.0),
) -> AtomReport:
    """
    Validate a tent atom.

    Support must lie in ``T(B)`` exactly. The size condition depends on ``kind``:
    ``q-atom`` ``||a||_{T^q_{2,w}} <= w(B)^(1/q - 1/p)``; ``unweighted-2``
    ``||a||_{L^2} <= V(B)^(1/2 - 1/p)``; ``type-i`` the L^2 norm against
    ``w(B(y,t))/V(y,t)`` below ``w(B)^(1/2 - 1/p)``; ``type-ii``
    ``||a||_{T^r_2} <= mu(B)^(1/r) w(B)^(-1/p)`` for every r in ``q_list``.

    Raises:
        InputError: Unless 0 < p <= 1 < q
    """
    if not 0 < p <= 1 < q:
        raise InputError(f"Atoms need 0 < p <= 1 < q, got p={p}, q={q}")
    _check_tent(space, a, grid)
    outside = a.support - tent_of_ball(space, grid, ball)
    witness = outside.samples()[0] if len(outside) else None
    norms = ATOM_CHECKS[AtomKind(kind)](space, grid, a, ball, p, q, w, q_list)
    return AtomReport(
        kind=AtomKind(kind),
        support_ok=witness is None,
        outside_witness=witness,
        norms=norms,
        passed=witness is None and all(n.passed for n in norms),
    )


def unweighted_atom_check(
    space: MetricMeasureSpace, grid: TGrid, a: TentFunction, ball: Ball, p: float
) -> AtomReport:
    """2-atom check of the unweighted tent space."""
    return validate_q_atom(space, grid, a, ball, p, 2.0, kind=AtomKind.UNWEIGHTED)


def saturated_atom(
    space: MetricMeasureSpace,
    grid: TGrid,
    ball: Ball,
    p: float,
    q: float,
    w=None,
    profile: Optional[np.ndarray] = None,
) -> TentFunction:
    """
    A q-atom on ``T(B)`` meeting the size condition with equality.

    Args:
        profile: Shape on the samples (default: 1); only its restriction to T(B) is used
    """
    region = tent_of_ball(space, grid, ball)
    shape = np.ones((space.n_points, grid.count)) if profile is None else np.asarray(profile)
    raw = TentFunction(grid, np.where(region.mask, shape, 0))
    norm = tent_norm(space, grid, raw, q, w)
    if norm == 0:
        return TentFunction.zeros(space.n_points, grid)
    w_ball = float((weight_values(space, w) * space.mass)[ball.mask(space)].sum())
    return raw.scale(w_ball ** (1.0 / q - 1.0 / p) / norm)


# --- Density sets and the cone-to-tent estimate ---


def density_sets(
    space: MetricMeasureSpace, gamma: float, closed: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, DensityReport]:
    """
    Points of global gamma-density of a closed set.

    ``O* = {M(chi_O) > 1 - gamma}`` with the uncentered maximal function and ``O = F^c``;
    ``F* = (O*)^c`` is the set of points all of whose balls meet F in proportion >= gamma.

    Returns:
        Tuple: ``(F*, O*, report)`` as boolean masks plus the measured ``mu(O*)/mu(O)``

    Raises:
        InputError: Unless 0 < gamma < 1
        InvariantViolation: If O is not contained in O*
    """
    if not 0 < gamma < 1:
        raise InputError(f"gamma must be in (0, 1), got {gamma}")
    closed = np.asarray(closed, dtype=bool)
    open_set = ~closed
    open_star = maximal_function(space, open_set.astype(float)) > 1.0 - gamma
    if np.any(open_set & ~open_star):
        x = int(np.flatnonzero(open_set & ~open_star)[0])
        raise InvariantViolation(f"O is not contained in O*: point {x}")
    mu_open = float(space.mass[open_set].sum())
    report = DensityReport(
        gamma=gamma,
        f_size=int(closed.sum()),
        f_star_size=int((~open_star).sum()),
        o_size=int(open_set.sum()),
        o_star_size=int(open_star.sum()),
        measure_ratio=float(space.mass[open_star].sum()) / mu_open if mu_open > 0 else None,
    )
    return ~open_star, open_star, report


def density_ratio(
    space: MetricMeasureSpace,
    grid: TGrid,
    closed: np.ndarray,
    H: TentFunction,
    gamma: float = 0.5,
    eta: float = 0.5,
) -> DensityRatioReport:
    """
    Cone-to-tent density estimate as a measured constant.

    LHS ``sum over R_{1-eta}(F*) of H V(y,t) mu_y t ln(ratio)``; RHS
    ``sum_{x in F} mu_x sum_{Gamma(x)} H mu_y t ln(ratio)``, both with ``dt = t ln(ratio)``.

    Raises:
        InputError: If eta is outside (0, 1) or H has negative values
    """
    if not 0 < eta < 1:
        raise InputError(f"eta must be in (0, 1), got {eta}")
    _check_tent(space, H, grid)
    if np.iscomplexobj(H.values) or np.any(H.values < 0):
        raise InputError("H must be nonnegative")
    closed = np.asarray(closed, dtype=bool)
    f_star, _, _ = density_sets(space, gamma, closed)
    dt = grid.samples[None, :] * grid.log_step
    weighted = H.values * space.mass[:, None] * dt
    region = union_of_cones(space, grid, f_star, 1.0 - eta)
    lhs = float(np.sum(np.where(region.mask, weighted * grid_volumes(space, grid), 0.0)))
    mass_near_f = _ball_integrals(space, grid, closed * space.mass)
    rhs = float(np.sum(weighted * mass_near_f))
    if rhs == 0:
        return DensityRatioReport(
            gamma=gamma, eta=eta, lhs=lhs, rhs=rhs, ratio=0.0 if lhs == 0 else math.inf,
            degenerate=True,
        )
    return DensityRatioReport(
        gamma=gamma, eta=eta, lhs=lhs, rhs=rhs, ratio=lhs / rhs, degenerate=False
    )


def compact_support_constant(
    space: MetricMeasureSpace, grid: TGrid, region: UpperHalfSpaceRegion, q: float, w=None
) -> float:
    """
    ``C(K)`` with ``||F||_{L^2(K)} <= C(K) ||F||_{T^q_{2,w}}`` for F supported in K.

    ``C(K)^2 = sum_y (sum_{t : (y,t) in K} V(y,t)) (w_y mu_y)^(-2/q)``.
    """
    volumes = np.where(region.mask, grid_volumes(space, grid), 0.0).sum(axis=1)
    return math.sqrt(
        float(np.sum(volumes * (weight_values(space, w) * space.mass) ** (-2.0 / q)))
    )


# --- Documents ---


def tent_to_document(F: TentFunction) -> TentFunctionDocument:
    if np.iscomplexobj(F.values):
        return TentFunctionDocument(
            grid=F.grid.to_document(), values=F.values.real.tolist(), imag=F.values.imag.tolist()
        )
    return TentFunctionDocument(grid=F.grid.to_document(), values=F.values.tolist())


def load_tent_function(
    source: Union[TentFunctionDocument, str, Path], space: Optional[MetricMeasureSpace] = None
) -> TentFunction:
    """
    Load a tent function from a document or a JSON file.

    Raises:
        InputError: On a missing file, malformed document or a row count mismatch
    """
    if isinstance(source, TentFunctionDocument):
        document = source
    else:
        try:
            document = TentFunctionDocument.model_validate_json(read_text(source))
        except ValidationError as e:
            raise InputError(f"Invalid tent function document: {e}") from e
    values = np.asarray(document.values, dtype=float)
    if document.imag is not None:
        values = values + 1j * np.asarray(document.imag, dtype=float)
    F = TentFunction(TGrid.from_document(document.grid), values)
    if space is not None and F.n_points != space.n_points:
        raise InputError(
            f"Tent function has {F.n_points} rows but the space has {space.n_points} points"
        )
    return F
