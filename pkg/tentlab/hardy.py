"""Square functions, the Calderón reproducing formula and Hardy space atoms of an operator."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from tentlab import __version__
from tentlab.config import HardyConfig
from tentlab.decomp import coefficient_report, decompose, weight_hash_of
from tentlab.dyadic import DyadicCubeSystem
from tentlab.errors import InputError
from tentlab.models import (
    AnnulusTerm,
    CalderonEigen,
    CalderonReport,
    HardyAtomDocument,
    HardyAtomReport,
    HardyAtomsDocument,
    HardyMode,
    HardyReport,
    SLAtomReport,
    SquareFunctionReport,
)
from tentlab.space import Ball, lp_norm_weighted, weight_values
from tentlab.spectral import (
    CalculusFunctions,
    SpectralOperator,
    bump_calculus,
    heat_multiplier,
    null_complement,
)
from tentlab.tent import TentFunction, TGrid, area_functional, cone_overlap, grid_volumes

logger = logging.getLogger(__name__)

_IDENTITY_TOL = 1e-9
_SIZE_TOL = 1e-9
_COVERED_TOL = 1e-12
SUPPORT_DILATION = 3.0


def _multiplier_table(op: SpectralOperator, grid: TGrid, make) -> np.ndarray:
    """``out[i, m] = g_m(lambda_i)`` for the multipliers ``make(t_m)``."""
    return np.stack([np.asarray(make(t)(op.eigenvalues)) for t in grid.samples], axis=1)


def _tent_from_multipliers(op: SpectralOperator, grid: TGrid, f: np.ndarray, make) -> TentFunction:
    coefficients = op.coefficients(np.asarray(f))
    table = _multiplier_table(op, grid, make)
    return TentFunction(grid, op.synthesize(table * coefficients[:, None]))


def heat_tent_function(op: SpectralOperator, grid: TGrid, f: np.ndarray) -> TentFunction:
    """``F(y, t) = t^2 L e^{-t^2 L} f(y)``."""
    return _tent_from_multipliers(op, grid, f, lambda t: heat_multiplier(t, 1))


def psi_tent_function(
    op: SpectralOperator, grid: TGrid, f: np.ndarray, calc: CalculusFunctions
) -> TentFunction:
    """``F(y, t) = Psi(t sqrt(L)) f(y)``."""
    return _tent_from_multipliers(op, grid, f, calc.psi_multiplier)


def square_function_SL(
    op: SpectralOperator, grid: TGrid, f: np.ndarray, w=None, s: float = 2.0
) -> Tuple[np.ndarray, SquareFunctionReport]:
    """
    Heat square function ``S_L f = A(t^2 L e^{-t^2 L} f)`` with its norm ratios.

    ``l2_bound`` is ``sqrt(overlap * max_i sum_m (t_m^2 lambda_i)^2 e^{-2 t_m^2 lambda_i}
    ln(ratio))`` over the positive spectrum, which dominates ``l2_ratio``;
    ``quadratic_ratio`` compares ``||F||^2_{L^2(dmu dt/t)}`` with its spectral expression
    and equals 1 up to rounding.

    Returns:
        Tuple: ``(S_L f, report)``
    """
    space = op.space
    f = np.asarray(f)
    F = heat_tent_function(op, grid, f)
    values = area_functional(space, grid, F)

    table = _multiplier_table(op, grid, lambda t: heat_multiplier(t, 1)) ** 2
    spectral_sum = table.sum(axis=1) * grid.log_step
    positive = ~op.null_mask
    g_max = float(spectral_sum[positive].max()) if positive.any() else 0.0
    coefficients = op.coefficients(f)
    predicted = float(np.sum(np.abs(coefficients) ** 2 * spectral_sum))
    measured = float(np.sum(np.abs(F.values) ** 2 * space.mass[:, None])) * grid.log_step

    f_norm = lp_norm_weighted(space, f, None, 2.0)
    f_weighted = lp_norm_weighted(space, f, w, s)
    report = SquareFunctionReport(
        s=s,
        weighted_ratio=lp_norm_weighted(space, values, w, s) / f_weighted if f_weighted else None,
        l2_ratio=lp_norm_weighted(space, values, None, 2.0) / f_norm if f_norm else None,
        l2_bound=math.sqrt(cone_overlap(space, grid) * g_max),
        quadratic_ratio=measured / predicted if predicted > 0 else None,
    )
    return values, report


def psi_square_function(
    op: SpectralOperator, grid: TGrid, f: np.ndarray, calc: CalculusFunctions
) -> np.ndarray:
    """Cone square function of ``Psi(t sqrt(L)) f``."""
    return area_functional(op.space, grid, psi_tent_function(op, grid, f, calc))


def gstar(
    op: SpectralOperator,
    grid: TGrid,
    f: np.ndarray,
    nu: float,
    calc: CalculusFunctions,
    n: float = 1.0,
) -> np.ndarray:
    """
    ``g*(x)^2 = sum_{(y,t)} (t / (t + d(x,y)))^(n nu) |Psi(t sqrt(L)) f(y)|^2 mu_y ln(ratio)
    / V(x, t)``.
    """
    space = op.space
    F = psi_tent_function(op, grid, f, calc)
    density = np.abs(F.values) ** 2 * space.mass[:, None]
    volumes = grid_volumes(space, grid)
    total = np.zeros(space.n_points)
    for m, t in enumerate(grid.samples):
        decay = (t / (t + space.dist)) ** (n * nu)
        total += (decay @ density[:, m]) / volumes[:, m]
    return np.sqrt(total * grid.log_step)


def pi_psi(
    op: SpectralOperator, grid: TGrid, F: TentFunction, calc: CalculusFunctions
) -> np.ndarray:
    """``pi(F) = sum_m Psi(t_m sqrt(L)) F(., t_m) ln(ratio)``."""
    table = _multiplier_table(op, grid, calc.psi_multiplier)
    coefficients = op.coefficients(F.values)
    return op.synthesize((table * coefficients).sum(axis=1)) * grid.log_step


def calderon_defects(
    op: SpectralOperator, grid: TGrid, calc: CalculusFunctions
) -> np.ndarray:
    """``|1 - c_psi sum_m Psi(t_m sqrt(lambda)) t_m^2 lambda e^{-t_m^2 lambda} ln(ratio)|``."""
    psi = _multiplier_table(op, grid, calc.psi_multiplier)
    heat = _multiplier_table(op, grid, lambda t: heat_multiplier(t, 1))
    quadrature = calc.c_psi * (psi * heat).sum(axis=1) * grid.log_step
    return np.abs(1.0 - quadrature)


def calderon_reconstruct(
    op: SpectralOperator, grid: TGrid, f: np.ndarray, calc: CalculusFunctions
) -> Tuple[np.ndarray, CalderonReport]:
    """
    ``c_psi sum_m Psi(t_m sqrt(L)) (t_m^2 L e^{-t_m^2 L} f) ln(ratio)`` against ``f`` minus
    its null-space part.

    Returns:
        Tuple: ``(f_hat, report)``; the residual is relative in ``L^2(mu)`` and zero when
            f lies in the null space
    """
    space = op.space
    f_perp = null_complement(op, f)
    F = heat_tent_function(op, grid, f_perp)
    f_hat = calc.c_psi * pi_psi(op, grid, F, calc)
    norm = lp_norm_weighted(space, f_perp, None, 2.0)
    residual = lp_norm_weighted(space, f_hat - f_perp, None, 2.0) / norm if norm > 0 else 0.0

    defects = calderon_defects(op, grid, calc)
    coefficients = np.abs(op.coefficients(f_perp))
    covered = coefficients > _COVERED_TOL * max(float(coefficients.max(initial=0.0)), 1e-300)
    positive = ~op.null_mask
    eigen = [
        CalderonEigen(eigenvalue=float(lam), defect=float(d), covered=bool(c))
        for lam, d, c in zip(op.eigenvalues[positive], defects[positive], covered[positive])
    ]
    live = defects[positive & covered]
    report = CalderonReport(
        residual=residual,
        worst_defect=float(defects[positive].max()) if positive.any() else 0.0,
        worst_covered_defect=float(live.max()) if live.size else None,
        eigen=eigen,
    )
    return f_hat, report


# --- Hardy atoms ---


@dataclass(frozen=True, eq=False)
class HardyAtom:
    """
    ``a = L^M b`` concentrated on a ball.

    Attributes:
        a: Atom values
        b: Preimage values
        ball: Support ball
        M: Order
        coefficient: Coefficient of the atom in its decomposition
        level: Tent level the atom came from
        index: Position within the level
    """

    a: np.ndarray
    b: np.ndarray
    ball: Ball
    M: int
    coefficient: float = 1.0
    level: int = 0
    index: int = 0


def _leak(space, values: np.ndarray, inside: np.ndarray) -> float:
    total = float(np.sum(np.abs(values) * space.mass))
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(values[~inside]) * space.mass[~inside])) / total


def _powers(op: SpectralOperator, b: np.ndarray, M: int) -> List[np.ndarray]:
    out, current = [], np.asarray(b)
    for _ in range(M + 1):
        out.append(current)
        current = op.apply(current)
    return out


def _size_ratios(
    op: SpectralOperator, b: np.ndarray, ball: Ball, p: float, q: float, M: int, w
) -> List[float]:
    space = op.space
    radius2 = ball.radius**2
    w_ball = float((weight_values(space, w) * space.mass)[ball.mask(space)].sum())
    bound = ball.radius ** (2 * M) * w_ball ** (1.0 / q - 1.0 / p)
    return [
        lp_norm_weighted(space, radius2**k * values, w, q) / bound
        for k, values in enumerate(_powers(op, b, M))
    ]


def validate_hardy_atom(
    op: SpectralOperator,
    a: np.ndarray,
    b: np.ndarray,
    ball: Ball,
    p: float,
    q: float,
    M: int,
    w=None,
    tolerance: float = 1e-8,
    downgrade_q: Optional[float] = None,
) -> HardyAtomReport:
    """
    Check the ``(p, q, M, w)``-atom conditions.

    (i) ``a = L^M b``; (ii) the relative mass of ``L^k b`` outside the ball is at most
    ``tolerance`` for ``k = 0..M`` (the leak of a is reported on its own); (iii)
    ``||(r^2 L)^k b||_{L^q_w} <= r^(2M) w(B)^(1/q - 1/p)``. With ``downgrade_q < q`` the
    size condition is recomputed directly at the smaller exponent.
    """
    space = op.space
    a, b = np.asarray(a), np.asarray(b)
    expected = op.apply(b, M)
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(expected).max(initial=0.0)))
    identity_error = float(np.abs(a - expected).max()) / scale if scale > 0 else 0.0

    inside = ball.mask(space)
    leaks = [_leak(space, values, inside) for values in _powers(op, b, M)]
    ratios = _size_ratios(op, b, ball, p, q, M, w)
    size_ok = all(r <= 1.0 + _SIZE_TOL for r in ratios)

    downgrade_ratios, downgrade_ok = None, None
    if downgrade_q is not None:
        downgrade_ratios = _size_ratios(op, b, ball, p, downgrade_q, M, w)
        downgrade_ok = all(r <= 1.0 + _SIZE_TOL for r in downgrade_ratios)

    identity_ok = identity_error <= _IDENTITY_TOL
    support_ok = all(leak <= tolerance for leak in leaks)
    return HardyAtomReport(
        identity_error=identity_error,
        identity_ok=identity_ok,
        leaks=leaks,
        a_leak=_leak(space, a, inside),
        support_ok=support_ok,
        ratios=ratios,
        size_ok=size_ok,
        downgrade_q=downgrade_q,
        downgrade_ratios=downgrade_ratios,
        downgrade_ok=downgrade_ok,
        passed=identity_ok and support_ok and size_ok and downgrade_ok is not False,
    )


def support_ball(
    op: SpectralOperator, b: np.ndarray, start: Ball, M: int, tolerance: float = 0.0
) -> Ball:
    """
    Smallest ball around ``start.center``, no smaller than ``start``, holding ``L^k b`` for
    ``k = 0..M`` up to a relative leak of ``tolerance``.

    Candidate radii are the distinct distances from the center, so the result is at most the
    ball containing the whole space.
    """
    space = op.space
    powers = _powers(op, b, M)
    row = space.dist[start.center]
    candidates = [start.radius]
    candidates += [float(d) for d in np.unique(row) if d > start.radius]
    candidates.append(space.diam + space.nearest_distance(start.center))
    for radius in candidates:
        inside = row < radius
        if all(_leak(space, values, inside) <= tolerance for values in powers):
            return Ball(start.center, radius)
    return Ball(start.center, candidates[-1])


def hardy_decompose(
    op: SpectralOperator,
    grid: TGrid,
    f: np.ndarray,
    w=None,
    config: Optional[HardyConfig] = None,
    calc: Optional[CalculusFunctions] = None,
    system: Optional[DyadicCubeSystem] = None,
    threads: Optional[int] = None,
) -> Tuple[List[HardyAtom], HardyReport]:
    """
    Atomic decomposition of ``f`` in the Hardy space of L.

    The tent function ``t^2 L e^{-t^2 L} f`` is decomposed with strict coefficients; each
    tent atom maps to ``a = c_psi pi(tent atom)`` with
    ``b = c_psi sum_m t_m^(2 alpha) L^(alpha - M) Phi^3(t_m sqrt(L)) (tent atom) ln(ratio)``.
    Strict mode truncates b to ``3B`` and recomputes ``a = L^M b``; leak mode keeps b. The
    atom ball starts at ``3B`` and grows until every ``L^k b`` sits inside it, exactly in
    strict mode and up to ``leak_tolerance`` in leak mode. Each pair is then rescaled so the
    size condition holds with ratio 1 at its worst k, the scale moving into the coefficient.

    Args:
        op: The operator
        grid: The t-grid
        f: Per-point values
        w: Weight (None for w = 1)
        config: Pipeline parameters (default: HardyConfig())
        calc: Bump calculus (built from the config when None)
        system: Dyadic system for the tent decomposition
        threads: Worker cap

    Returns:
        Tuple: ``(atoms, report)``; ``residual`` compares the untruncated atoms with
            ``f`` minus its null-space part, ``truncation_residual`` the strict atoms
    """
    config = config or HardyConfig()
    space = op.space
    if calc is None:
        calc = bump_calculus(config.c0, config.alpha, config.M, config.quadrature_nodes)
    strict = config.mode == HardyMode.STRICT
    f = np.asarray(f, dtype=float)
    f_perp = null_complement(op, f)
    F = heat_tent_function(op, grid, f_perp)
    tent = decompose(space, grid, F, w, config.tent_config(), system=system, threads=threads)
    tent_report = coefficient_report(tent, F)

    psi = _multiplier_table(op, grid, calc.psi_multiplier)
    b_table = _multiplier_table(op, grid, calc.b_multiplier)
    atoms: List[HardyAtom] = []
    untruncated = np.zeros(space.n_points)
    failures, max_leak, max_scale, max_growth = 0, 0.0, None, 1.0
    for entry in tent.entries:
        coefficients = op.coefficients(entry.atom.values)
        a = calc.c_psi * op.synthesize((psi * coefficients).sum(axis=1)) * grid.log_step
        b = calc.c_psi * op.synthesize((b_table * coefficients).sum(axis=1)) * grid.log_step
        untruncated = untruncated + entry.coefficient * a
        start = entry.ball.dilate(SUPPORT_DILATION)
        if strict:
            b = np.where(start.mask(space), b, 0.0)
            a = op.apply(b, config.M)
        ball = support_ball(op, b, start, config.M, 0.0 if strict else config.leak_tolerance)
        if start.radius > 0:
            max_growth = max(max_growth, ball.radius / start.radius)
        ratios = _size_ratios(op, b, ball, config.p, config.q, config.M, w)
        scale = max(ratios)
        coefficient = entry.coefficient
        if scale > 0:
            a, b, coefficient = a / scale, b / scale, coefficient * scale
            max_scale = scale if max_scale is None else max(max_scale, scale)
        check = validate_hardy_atom(
            op, a, b, ball, config.p, config.q, config.M, w, config.leak_tolerance
        )
        max_leak = max(max_leak, max(check.leaks))
        if not check.passed:
            failures += 1
        atoms.append(
            HardyAtom(
                a=a,
                b=b,
                ball=ball,
                M=config.M,
                coefficient=coefficient,
                level=entry.level,
                index=entry.index,
            )
        )

    norm = lp_norm_weighted(space, f_perp, None, 2.0)

    def relative(rebuilt: np.ndarray) -> float:
        return lp_norm_weighted(space, rebuilt - f_perp, None, 2.0) / norm if norm > 0 else 0.0

    residual = relative(untruncated)
    truncation_residual = None
    if strict:
        rebuilt = np.zeros(space.n_points)
        for atom in atoms:
            rebuilt = rebuilt + atom.coefficient * atom.a
        truncation_residual = relative(rebuilt)
    _, calderon = calderon_reconstruct(op, grid, f_perp, calc)

    sl_norm_p = lp_norm_weighted(space, area_functional(space, grid, F), w, config.p) ** config.p
    lambda_p_sum = float(sum(atom.coefficient**config.p for atom in atoms))
    residual_ok = residual <= calderon.residual + 1e-9
    passed = tent_report.passed and residual_ok and failures == 0
    if failures:
        logger.warning(
            "%d of %d Hardy atoms fail their checks (max leak %.3g).",
            failures,
            len(atoms),
            max_leak,
        )
    logger.info(
        "Hardy decomposition: %d atoms, residual %.3g (Calderon %.3g), balls grown up to %.3gx.",
        len(atoms),
        residual,
        calderon.residual,
        max_growth,
    )
    report = HardyReport(
        version=__version__,
        space_hash=space.space_hash,
        mode=config.mode,
        atoms=len(atoms),
        c_psi=calc.c_psi,
        residual=residual,
        truncation_residual=truncation_residual,
        calderon_residual=calderon.residual,
        lambda_p_sum=lambda_p_sum,
        sl_norm_p=sl_norm_p,
        ratio=lambda_p_sum / sl_norm_p if sl_norm_p > 0 else None,
        max_leak=max_leak,
        max_slack=max_scale,
        max_ball_growth=max_growth,
        atom_failures=failures,
        tent=tent_report,
        calderon=calderon,
        passed=passed,
    )
    return atoms, report


def sl_on_atom_report(
    op: SpectralOperator,
    grid: TGrid,
    atom: HardyAtom,
    p: float,
    w=None,
    n_exp: float = 1.5,
    s: float = 2.0,
    q: float = 2.0,
    dimension: float = 1.0,
) -> SLAtomReport:
    """
    ``||S_L a||^p_{L^p_w}`` split into the part on 2B and the annuli outside it.

    The near part is checked against ``(C ||a||_{L^q_w})^p w(2B)^(1 - p/q)``, where C is the
    measured ratio ``||S_L a||_{L^q_w} / ||a||_{L^q_w}``. Annulus ``k >= 1`` is
    ``2^(k+1) B minus 2^k B``; its envelope is ``2^(-k n_exp p) w(2^(k+1) B) / w(B)`` and
    ``far_constant`` is the largest value-to-envelope ratio. Off 2B the square function
    splits at the ball radius into ``t < r_B`` (``j1``) and ``t >= r_B`` (``j2``), each
    integrated as ``int S^p w dmu``.

    Raises:
        InputError: If ``n_exp`` is outside ``(dimension (s - p) / p, 2M)``
    """
    lower, upper = dimension * (s - p) / p, 2.0 * atom.M
    if not lower < n_exp < upper:
        raise InputError(f"n_exp must lie in ({lower:g}, {upper:g}), got {n_exp:g}")
    space = op.space
    weights = weight_values(space, w)
    density = weights * space.mass
    values, lemma = square_function_SL(op, grid, atom.a, w, s=q)
    powered = values**p * density

    ball = atom.ball
    near_mask = ball.dilate(2.0).mask(space)
    near = float(powered[near_mask].sum())
    far = float(powered[~near_mask].sum())
    atom_norm = lp_norm_weighted(space, atom.a, w, q)
    lemma_constant = lemma.weighted_ratio
    near_bound = 0.0
    if lemma_constant is not None:
        w_near = float(density[near_mask].sum())
        near_bound = (lemma_constant * atom_norm) ** p * w_near ** (1.0 - p / q)

    w_ball = float(density[ball.mask(space)].sum())
    annuli: List[AnnulusTerm] = []
    far_constant: Optional[float] = None
    k = 1
    inner = near_mask
    while not inner.all():
        outer = ball.dilate(2.0 ** (k + 1)).mask(space)
        ring = outer & ~inner
        value = float(powered[ring].sum())
        envelope = 2.0 ** (-k * n_exp * p) * float(density[outer].sum()) / w_ball
        annuli.append(AnnulusTerm(k=k, value=value, envelope=envelope))
        ratio = value / envelope
        far_constant = ratio if far_constant is None else max(far_constant, ratio)
        inner, k = outer, k + 1

    F = heat_tent_function(op, grid, atom.a)
    cone_density = np.abs(F.values) ** 2 * space.mass[:, None]
    volumes = grid_volumes(space, grid)
    small = np.zeros(space.n_points)
    large = np.zeros(space.n_points)
    for m, t in enumerate(grid.samples):
        contribution = ((space.dist < t) @ cone_density[:, m]) / volumes[:, m]
        if t < ball.radius:
            small += contribution
        else:
            large += contribution
    off = ~near_mask
    j1 = float(np.sum((small[off] * grid.log_step) ** (p / 2) * density[off]))
    j2 = float(np.sum((large[off] * grid.log_step) ** (p / 2) * density[off]))

    return SLAtomReport(
        p=p,
        s=s,
        q=q,
        n_exp=n_exp,
        total=near + far,
        near=near,
        near_bound=near_bound,
        near_ok=near <= near_bound * (1 + 1e-9) + 1e-300,
        lemma_constant=lemma_constant,
        atom_norm=atom_norm,
        far=far,
        far_constant=far_constant,
        annuli=annuli,
        j1=j1,
        j2=j2,
    )


def hardy_atoms_to_document(
    op: SpectralOperator, atoms: List[HardyAtom], config: HardyConfig, w=None
) -> HardyAtomsDocument:
    return HardyAtomsDocument(
        version=__version__,
        space_hash=op.space.space_hash,
        weight_hash=weight_hash_of(w),
        p=config.p,
        q=config.q,
        M=config.M,
        mode=config.mode,
        atoms=[
            HardyAtomDocument(
                coefficient=atom.coefficient,
                level=atom.level,
                index=atom.index,
                center=atom.ball.center,
                radius=atom.ball.radius,
                a=np.asarray(atom.a, dtype=float).tolist(),
                b=np.asarray(atom.b, dtype=float).tolist(),
            )
            for atom in atoms
        ],
    )
