"""Muckenhoupt weights: A_p and reverse Hölder constants, generators, property suite."""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import PositiveFloat, TypeAdapter, ValidationError

from tentlab.errors import ConvergenceError, InputError
from tentlab.models import PropertyCheck, WeightConstantsReport, WeightKind, WeightLemmaReport
from tentlab.space import MetricMeasureSpace, hash_arrays, read_text

logger = logging.getLogger(__name__)

DEFAULT_P_GRID = (1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0)
MAX_WEIGHT_ATTEMPTS = 200
_LEMMA_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """
    Positive per-point weight with memoized A_p / RH_r constants.

    The caches are keyed by ``(space_hash, exponent)``; concurrent fills compute identical
    values, so the last writer wins.

    Attributes:
        values: Weight values aligned with the space's points
    """

    values: np.ndarray
    _ap_cache: Dict[Tuple[str, float], float] = field(default_factory=dict, repr=False)
    _rh_cache: Dict[Tuple[str, float], float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InputError("Weight must be a non-empty one-dimensional array")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            bad = int(np.flatnonzero(~(values > 0) | ~np.isfinite(values))[0])
            raise InputError(f"Weight values must be positive and finite (point {bad})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @cached_property
    def weight_hash(self) -> str:
        return hash_arrays("tentlab-weight", self.values)

    def measure(self, space: MetricMeasureSpace, mask: Optional[np.ndarray] = None) -> float:
        """``w(E) = sum_E w mu``; the whole space when mask is None."""
        density = self.values * space.mass
        return float(density.sum() if mask is None else density[np.asarray(mask)].sum())

    def scaled(self, c: float) -> "WeightFunction":
        return WeightFunction(self.values * c)


def unit_weight(space: MetricMeasureSpace) -> WeightFunction:
    return WeightFunction(np.ones(space.n_points))


def _check_aligned(space: MetricMeasureSpace, w: WeightFunction) -> None:
    if w.values.shape != (space.n_points,):
        raise InputError(
            f"Weight has {w.values.size} values but the space has {space.n_points} points"
        )


def ap_constant(space: MetricMeasureSpace, w: WeightFunction, p: float) -> float:
    """
    Exact ``[w]_{A_p}`` over the distinct balls of the space.

    For p > 1 the sup of ``avg(w) avg(w^(-1/(p-1)))^(p-1)``; for p = 1 the sup of
    ``avg(w) / min_B w``. Results are cached on the weight.

    Args:
        space: The space
        w: The weight
        p: Exponent, p >= 1

    Returns:
        float: The constant, at least 1

    Raises:
        InputError: If p < 1 or the weight does not match the space
    """
    if p < 1:
        raise InputError(f"A_p needs p >= 1, got {p}")
    _check_aligned(space, w)
    key = (space.space_hash, float(p))
    cached = w._ap_cache.get(key)
    if cached is not None:
        return cached

    family = space.balls
    avg_w = family.averages(w.values, space.mass)
    if p == 1:
        per_ball = avg_w / family.min_over_members(w.values)
    else:
        avg_dual = family.averages(w.values ** (-1.0 / (p - 1.0)), space.mass)
        per_ball = avg_w * avg_dual ** (p - 1.0)
    value = max(1.0, float(per_ball.max()))
    w._ap_cache[key] = value
    logger.debug("[w]_A_%g = %.12g over %d balls.", p, value, family.size)
    return value


def rh_constant(space: MetricMeasureSpace, w: WeightFunction, r: float) -> float:
    """
    Reverse Hölder constant ``sup_B avg(w^r)^(1/r) / avg(w)``.

    Raises:
        InputError: If r <= 1
    """
    if r <= 1:
        raise InputError(f"RH_r needs r > 1, got {r}")
    _check_aligned(space, w)
    key = (space.space_hash, float(r))
    cached = w._rh_cache.get(key)
    if cached is not None:
        return cached
    family = space.balls
    per_ball = family.averages(w.values**r, space.mass) ** (1.0 / r) / family.averages(
        w.values, space.mass
    )
    value = max(1.0, float(per_ball.max()))
    w._rh_cache[key] = value
    return value


def weight_constants(
    space: MetricMeasureSpace,
    w: WeightFunction,
    p: float,
    rh_exponents: Sequence[float] = (1.5, 2.0, 4.0),
    p_grid: Sequence[float] = DEFAULT_P_GRID,
) -> WeightConstantsReport:
    """A_p constant at ``p`` plus the measured maps r -> RH_r and p -> [w]_{A_p}."""
    return WeightConstantsReport(
        p=p,
        ap_constant=ap_constant(space, w, p),
        rh_constants=[(float(r), rh_constant(space, w, r)) for r in rh_exponents],
        ap_map=[(float(s), ap_constant(space, w, s)) for s in p_grid],
    )


# --- Generators ---

WeightGeneratorFn = Callable[
    [MetricMeasureSpace, Dict[str, Any], np.random.Generator], np.ndarray
]


def _generate_constant(space, params, rng) -> np.ndarray:
    return np.full(space.n_points, float(params.get("c", 1.0)))


def _generate_power(space, params, rng) -> np.ndarray:
    a = float(params.get("a", 0.5))
    center = int(params.get("center", 0))
    return (1.0 + space.dist[center]) ** a


def _generate_checkerboard(space, params, rng) -> np.ndarray:
    lo, hi = float(params.get("lo", 1.0)), float(params.get("hi", 4.0))
    size = float(params.get("size", 1.0))
    if space.coords is not None:
        parity = np.floor(space.coords / size).astype(int).sum(axis=1) % 2
    else:
        parity = np.arange(space.n_points) % 2
    return np.where(parity == 0, lo, hi)


def _generate_random_ap(space, params, rng) -> np.ndarray:
    target = float(params["target"])
    p = float(params.get("p", 2.0))
    spread = float(params.get("spread", 1.0))
    shrink = float(params.get("shrink", 0.9))
    attempts = int(params.get("max_attempts", MAX_WEIGHT_ATTEMPTS))
    for attempt in range(attempts):
        candidate = np.exp(spread * rng.standard_normal(space.n_points))
        if ap_constant(space, WeightFunction(candidate), p) <= target:
            logger.debug("Accepted random A_%g weight after %d attempts.", p, attempt + 1)
            return candidate
        spread *= shrink
    raise ConvergenceError(
        f"No weight with [w]_A_{p:g} <= {target:g} after {attempts} attempts"
    )


# Strategy registry: weight kind -> generator
WEIGHT_GENERATORS: Dict[WeightKind, WeightGeneratorFn] = {
    WeightKind.CONSTANT: _generate_constant,
    WeightKind.POWER: _generate_power,
    WeightKind.CHECKERBOARD: _generate_checkerboard,
    WeightKind.RANDOM_AP: _generate_random_ap,
}


def generate_weight(
    space: MetricMeasureSpace,
    kind: Union[WeightKind, str],
    params: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
) -> WeightFunction:
    """
    Generate a weight deterministically.

    Kinds: ``constant`` (``c``), ``power`` (``a``, ``center``: ``(1 + d(x, center))^a``),
    ``checkerboard`` (``lo``, ``hi``, ``size``), ``random-Ap-targeted`` (``target``, ``p``,
    ``spread``, ``shrink``, ``max_attempts``: log-normal candidates, rejected until
    ``[w]_{A_p} <= target``, the spread shrinking after each rejection).

    Raises:
        InputError: On an unknown kind, bad params, or a missing seed for a random kind
        ConvergenceError: If the A_p target is not reached
    """
    try:
        kind = WeightKind(kind)
    except ValueError as e:
        valid = ", ".join(k.value for k in WeightKind)
        raise InputError(f"Unknown weight kind '{kind}'. Valid kinds: {valid}") from e
    if kind == WeightKind.RANDOM_AP and seed is None:
        raise InputError("random-Ap-targeted weights need a seed")
    rng = np.random.default_rng(seed)
    try:
        values = WEIGHT_GENERATORS[kind](space, dict(params or {}), rng)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"Invalid params for weight kind '{kind}': {e}") from e
    return WeightFunction(values)


def load_weight(
    source: Union[str, Path, Sequence[float]], space: MetricMeasureSpace
) -> WeightFunction:
    """
    Load a weight from a JSON array file or a sequence of values.

    Raises:
        InputError: On a missing file, non-positive values or a length mismatch
    """
    adapter = TypeAdapter(List[PositiveFloat])
    try:
        if isinstance(source, (str, Path)):
            values = adapter.validate_json(read_text(source))
        else:
            values = adapter.validate_python(list(source))
    except ValidationError as e:
        raise InputError(f"Invalid weight document: {e}") from e
    w = WeightFunction(np.asarray(values, dtype=float))
    _check_aligned(space, w)
    return w


# --- Property suite ---


def _intersection_pairs(
    n_balls: int, max_pairs: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    if n_balls * n_balls <= max_pairs:
        big, small = np.meshgrid(np.arange(n_balls), np.arange(n_balls), indexing="ij")
        return big.ravel(), small.ravel()
    rng = np.random.default_rng(seed)
    return rng.integers(0, n_balls, max_pairs), rng.integers(0, n_balls, max_pairs)


def verify_weight_lemma(
    space: MetricMeasureSpace,
    w: WeightFunction,
    p: float,
    q: float,
    p_grid: Sequence[float] = DEFAULT_P_GRID,
    max_pairs: int = 40_000,
    seed: int = 0,
) -> WeightLemmaReport:
    """
    Measured A_p property suite.

    (i) monotone membership ``[w]_{A_q} <= [w]_{A_p}``; (ii) the map p -> [w]_{A_p} over
    ``p_grid`` (reported only); (iii) duality ``[w^(1-p')]_{A_p'} = [w]_{A_p}^(1/(p-1))``
    for p > 1; (iv) ``w(B)/w(E) <= [w]_{A_p} (mu(B)/mu(E))^p`` for every ball B and
    ``E = B ∩ B'`` with ``mu(B') <= mu(B)``, exhaustively or over ``max_pairs`` samples.

    Raises:
        InputError: Unless 1 <= p <= q
    """
    if not 1 <= p <= q:
        raise InputError(f"Weight lemma needs 1 <= p <= q, got p={p}, q={q}")
    ap_p, ap_q = ap_constant(space, w, p), ap_constant(space, w, q)
    checks = [
        PropertyCheck(
            name="monotone_membership",
            passed=ap_q <= ap_p * (1 + _LEMMA_TOL),
            witness=None if ap_q <= ap_p * (1 + _LEMMA_TOL) else {"ap_p": ap_p, "ap_q": ap_q},
        )
    ]

    dual_exponent = dual_constant = None
    if p > 1:
        dual_exponent = p / (p - 1.0)
        dual = WeightFunction(w.values ** (1.0 - dual_exponent))
        dual_constant = ap_constant(space, dual, dual_exponent)
        expected = ap_p ** (1.0 / (p - 1.0))
        ok = bool(np.isfinite(dual_constant)) and abs(dual_constant - expected) <= 1e-9 * expected
        checks.append(
            PropertyCheck(
                name="duality",
                passed=ok,
                detail=f"[w^(1-p')]_A_p' = {dual_constant!r}, [w]_A_p^(1/(p-1)) = {expected!r}",
            )
        )
    else:
        checks.append(PropertyCheck(name="duality", passed=True, degenerate=True, detail="p = 1"))

    family = space.balls
    big, small = _intersection_pairs(family.size, max_pairs, seed)
    keep = family.volumes[small] <= family.volumes[big]
    big, small = big[keep], small[keep]
    density_w = w.values * space.mass
    worst, witness = 0.0, None
    ind = family.indicator
    w_balls = family.integrals(density_w)
    for start in range(0, big.size, 8192):
        b, s = big[start : start + 8192], small[start : start + 8192]
        both = ind[b] * ind[s]
        mu_e = both @ space.mass
        w_e = both @ density_w
        valid = mu_e > 0
        lhs = w_balls[b][valid] / w_e[valid]
        rhs = ap_p * (family.volumes[b][valid] / mu_e[valid]) ** p
        ratio = lhs / rhs
        if ratio.size and ratio.max() > worst:
            worst = float(ratio.max())
            at = int(np.argmax(ratio))
            witness = {"ball": float(b[valid][at]), "smaller_ball": float(s[valid][at])}
    checks.append(
        PropertyCheck(
            name="ball_intersections",
            passed=worst <= 1 + _LEMMA_TOL,
            witness=None if worst <= 1 + _LEMMA_TOL else witness,
            detail=f"worst ratio {worst!r}",
        )
    )
    return WeightLemmaReport(
        p=p,
        q=q,
        ap_p=ap_p,
        ap_q=ap_q,
        ap_map=[(float(s), ap_constant(space, w, s)) for s in p_grid],
        dual_exponent=dual_exponent,
        dual_constant=dual_constant,
        pairs_checked=int(big.size),
        worst_ratio=worst,
        properties=checks,
        passed=all(c.passed for c in checks),
    )
