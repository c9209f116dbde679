"""Tests for square functions, the Calderón formula and Hardy atoms."""

import numpy as np
import pytest

from tentlab.config import HardyConfig
from tentlab.errors import InputError
from tentlab.hardy import (
    HardyAtom,
    calderon_defects,
    calderon_reconstruct,
    gstar,
    hardy_atoms_to_document,
    hardy_decompose,
    heat_tent_function,
    pi_psi,
    psi_square_function,
    sl_on_atom_report,
    square_function_SL,
    support_ball,
    validate_hardy_atom,
)
from tentlab.models import HardyMode
from tentlab.presets import CommonGraphs, CommonSpaces
from tentlab.space import Ball, load_space
from tentlab.spectral import build_operator, bump_calculus, calderon_grid, null_complement
from tentlab.weights import ap_constant, generate_weight


@pytest.fixture(name="calc", scope="module")
def calc_fixture():
    return bump_calculus()


@pytest.fixture(name="path_grid")
def path_grid_fixture(path_operator):
    return calderon_grid(path_operator)


@pytest.fixture(name="long_path", scope="module")
def long_path_fixture():
    return build_operator(load_space(CommonSpaces.grid_1d(64)), CommonGraphs.path())


@pytest.fixture(name="delta_b")
def delta_b_fixture():
    b = np.zeros(16)
    b[5] = 1.0
    return b


class TestSquareFunction:
    """Tests for the heat and Psi square functions."""

    def test_constants_vanish(self, path_operator, path_grid):
        """Constants lie in the null space, so their heat tent function is zero."""
        F = heat_tent_function(path_operator, path_grid, np.ones(16))
        assert np.allclose(F.values, 0.0, atol=1e-12)

    def test_quadratic_identity(self, path_operator, path_grid):
        """||F||^2 matches its spectral expression and the L^2 ratio respects its bound."""
        f = np.random.default_rng(0).standard_normal(16)
        values, report = square_function_SL(path_operator, path_grid, f)
        assert values.shape == (16,)
        assert report.quadratic_ratio == pytest.approx(1.0, rel=1e-9)
        assert report.l2_ratio <= report.l2_bound * (1 + 1e-9)

    def test_weighted_ratio(self, path_operator, path_grid):
        """A weight enters the L^s ratio."""
        space = path_operator.space
        w = np.linspace(1.0, 3.0, space.n_points)
        _, report = square_function_SL(path_operator, path_grid, np.arange(16.0), w, s=3.0)
        assert report.s == 3.0
        assert report.weighted_ratio > 0

    @pytest.mark.parametrize("seed", range(20))
    def test_weighted_ratio_seeds(self, path_operator, path_grid, seed):
        """The weighted L^2 ratio stays finite for random f and random A_2 weights."""
        rng = np.random.default_rng(seed)
        space = path_operator.space
        w = generate_weight(space, "random-Ap-targeted", {"target": 3.0, "p": 2.0}, seed=seed)
        assert ap_constant(space, w, 2.0) <= 3.0
        _, report = square_function_SL(path_operator, path_grid, rng.standard_normal(16), w)
        assert np.isfinite(report.weighted_ratio)
        assert report.weighted_ratio > 0

    def test_gstar_dominates(self, path_operator, path_grid, calc):
        """g* is at least 2^(-nu/2) times the Psi square function."""
        f = np.random.default_rng(1).standard_normal(16)
        g = gstar(path_operator, path_grid, f, 4.0, calc)
        s = psi_square_function(path_operator, path_grid, f, calc)
        assert np.all(g >= 2.0**-2.0 * s * (1 - 1e-12))


class TestCalderon:
    """Tests for the Calderón reproducing formula."""

    def test_eigenvector_oracle(self, calc):
        """For f = u_i the residual is the scalar quadrature defect at lambda_i."""
        op = build_operator(load_space(CommonSpaces.grid_1d(32)), CommonGraphs.path())
        grid = calderon_grid(op)
        defects = calderon_defects(op, grid, calc)
        for i in (1, 5, 31):
            _, report = calderon_reconstruct(op, grid, op.eigenvectors[:, i], calc)
            assert report.residual == pytest.approx(defects[i], abs=1e-10)

    def test_eigenvector_oracle_wide_grid(self, long_path, calc):
        """Over t sqrt(lambda) in [1e-2, 1e2] each defect is below 1e-3 and is the residual."""
        grid = calderon_grid(long_path, low=1e-2, high=1e2)
        defects = calderon_defects(long_path, grid, calc)
        assert defects[~long_path.null_mask].max() <= 1e-3
        for i in range(1, 64):
            _, report = calderon_reconstruct(long_path, grid, long_path.eigenvectors[:, i], calc)
            assert report.residual == pytest.approx(defects[i], abs=1e-12)

    def test_widening_lowers_defect(self, path_operator, calc):
        """One more octave at each end of a narrow grid lowers the worst defect."""
        f = np.random.default_rng(4).standard_normal(16)
        narrow = calderon_grid(path_operator, low=0.5, high=2.0)
        wide = calderon_grid(path_operator, low=0.25, high=4.0)
        _, narrow_report = calderon_reconstruct(path_operator, narrow, f, calc)
        _, wide_report = calderon_reconstruct(path_operator, wide, f, calc)
        assert wide_report.worst_defect < narrow_report.worst_defect
        assert wide_report.residual < narrow_report.residual

    def test_defects_small(self, path_operator, path_grid, calc):
        """The covered spectrum is reproduced to 1e-3."""
        f = np.random.default_rng(2).standard_normal(16)
        _, report = calderon_reconstruct(path_operator, path_grid, f, calc)
        assert report.worst_defect <= 1e-3
        assert report.residual <= 1e-3
        assert len(report.eigen) == 15

    def test_null_space_input(self, path_operator, path_grid, calc):
        """A function in the null space reconstructs to zero."""
        f_hat, _ = calderon_reconstruct(path_operator, path_grid, np.ones(16), calc)
        assert np.allclose(f_hat, 0.0, atol=1e-12)


class TestPiPsi:
    """Tests for pi_psi."""

    def test_linear(self, path_operator, path_grid, calc):
        """pi_psi is linear in the tent function."""
        rng = np.random.default_rng(6)
        F = heat_tent_function(path_operator, path_grid, rng.standard_normal(16))
        G = heat_tent_function(path_operator, path_grid, rng.standard_normal(16))
        combined = pi_psi(path_operator, path_grid, F.scale(2.0) + G, calc)
        separate = 2.0 * pi_psi(path_operator, path_grid, F, calc) + pi_psi(
            path_operator, path_grid, G, calc
        )
        assert np.allclose(combined, separate, atol=1e-12)

    def test_inverts_heat_tent(self, path_operator, path_grid, calc):
        """c_psi pi_psi of the heat tent function is the Calderón reconstruction."""
        f = np.random.default_rng(8).standard_normal(16)
        f_hat, _ = calderon_reconstruct(path_operator, path_grid, f, calc)
        F = heat_tent_function(path_operator, path_grid, null_complement(path_operator, f))
        assert np.allclose(calc.c_psi * pi_psi(path_operator, path_grid, F, calc), f_hat)


class TestValidateHardyAtom:
    """Tests for validate_hardy_atom."""

    def test_contained_atom(self, path_operator, delta_b):
        """b at one point with a ball holding its neighbours keeps L b inside."""
        ball = Ball(5, 1.5)
        a = path_operator.apply(delta_b)
        report = validate_hardy_atom(path_operator, a, delta_b, ball, 1.0, 2.0, 1)
        assert report.identity_ok
        assert report.support_ok
        assert report.leaks == [0.0, 0.0]
        scaled = validate_hardy_atom(
            path_operator, a / max(report.ratios), delta_b / max(report.ratios), ball, 1.0, 2.0, 1
        )
        assert scaled.size_ok
        assert scaled.passed

    def test_identity_failure(self, path_operator, delta_b):
        """a different from L^M b fails the identity."""
        report = validate_hardy_atom(path_operator, delta_b, delta_b, Ball(5, 1.5), 1.0, 2.0, 1)
        assert not report.identity_ok
        assert not report.passed

    def test_leak_of_lb(self, path_operator, delta_b):
        """With a one-point ball L b leaks; the leak of a is reported separately."""
        a = path_operator.apply(delta_b)
        report = validate_hardy_atom(path_operator, a, delta_b, Ball(5, 1.0), 1.0, 2.0, 1)
        assert report.leaks[0] == 0.0
        assert report.leaks[1] > 0.0
        assert report.a_leak == pytest.approx(report.leaks[1])
        assert not report.support_ok

    def test_downgrade(self, path_operator, delta_b):
        """An atom valid at q = 2 stays valid at q = 1.5."""
        ball = Ball(5, 1.5)
        a = path_operator.apply(delta_b)
        ratio = max(validate_hardy_atom(path_operator, a, delta_b, ball, 1.0, 2.0, 1).ratios)
        report = validate_hardy_atom(
            path_operator, a / ratio, delta_b / ratio, ball, 1.0, 2.0, 1, downgrade_q=1.5
        )
        assert report.downgrade_ok
        assert all(d <= r * (1 + 1e-12) for d, r in zip(report.downgrade_ratios, report.ratios))


class TestSupportBall:
    """Tests for support_ball."""

    @pytest.mark.parametrize("M, radius", [(1, 2.0), (2, 3.0)])
    def test_grows_to_exact_support(self, path_operator, delta_b, M, radius):
        """A point mass needs M neighbours on each side to hold L^k b for k <= M."""
        assert support_ball(path_operator, delta_b, Ball(5, 0.5), M).radius == radius

    def test_keeps_large_start(self, path_operator, delta_b):
        """A start ball already holding the support is returned unchanged."""
        assert support_ball(path_operator, delta_b, Ball(5, 4.0), 2).radius == 4.0

    def test_zero(self, path_operator):
        """Nothing to hold, nothing to grow."""
        assert support_ball(path_operator, np.zeros(16), Ball(3, 1.5), 2).radius == 1.5

    def test_tolerance(self, path_operator, delta_b):
        """A tolerance of 1 accepts any leak."""
        assert support_ball(path_operator, delta_b, Ball(5, 0.5), 1, tolerance=1.0).radius == 0.5


class TestHardyDecompose:
    """Tests for hardy_decompose."""

    @pytest.mark.parametrize("seed", range(5))
    def test_leak_mode_atoms(self, path_operator, path_grid, calc, seed):
        """Leak-mode atoms keep L^k b in their balls to 1e-8 and sum to the Calderón result."""
        f = np.random.default_rng(seed).standard_normal(16)
        atoms, report = hardy_decompose(path_operator, path_grid, f, calc=calc)
        assert atoms
        assert report.atom_failures == 0
        assert report.max_leak <= 1e-8
        assert report.max_ball_growth >= 1.0
        assert report.residual <= report.calderon_residual + 1e-9
        assert report.truncation_residual is None
        assert report.tent.passed
        assert report.passed
        for atom in atoms:
            check = validate_hardy_atom(path_operator, atom.a, atom.b, atom.ball, 1.0, 2.0, 1)
            assert check.passed
            assert max(check.leaks) <= 1e-8

    def test_eigenvector(self, calc):
        """An eigenvector on a 32-point path reconstructs within its Calderón defect."""
        op = build_operator(load_space(CommonSpaces.grid_1d(32)), CommonGraphs.path())
        grid = calderon_grid(op)
        _, report = hardy_decompose(op, grid, op.eigenvectors[:, 3], calc=calc)
        assert report.residual <= report.calderon_residual + 1e-9
        assert report.passed

    @pytest.mark.parametrize("seed", range(5))
    def test_strict_mode(self, path_operator, path_grid, calc, seed):
        """Strict atoms hold L^k b exactly and meet the size condition with ratio 1."""
        f = np.random.default_rng(seed).standard_normal(16)
        config = HardyConfig(mode=HardyMode.STRICT)
        atoms, report = hardy_decompose(path_operator, path_grid, f, config=config, calc=calc)
        assert atoms
        for atom in atoms:
            check = validate_hardy_atom(path_operator, atom.a, atom.b, atom.ball, 1.0, 2.0, 1)
            assert check.identity_ok
            assert check.leaks == [0.0, 0.0]
            assert max(check.ratios) <= 1.0 + 1e-9
        assert report.mode == HardyMode.STRICT
        assert report.atom_failures == 0
        assert report.residual <= report.calderon_residual + 1e-9
        assert report.truncation_residual is not None
        assert report.passed

    def test_zero(self, path_operator, path_grid, calc):
        """The zero function has no atoms."""
        atoms, report = hardy_decompose(path_operator, path_grid, np.zeros(16), calc=calc)
        assert atoms == []
        assert report.atoms == 0
        assert report.passed

    def test_document(self, path_operator, path_grid, calc):
        """Atom documents carry every atom and the unit weight hash."""
        f = np.random.default_rng(3).standard_normal(16)
        config = HardyConfig()
        atoms, _ = hardy_decompose(path_operator, path_grid, f, config=config, calc=calc)
        document = hardy_atoms_to_document(path_operator, atoms, config)
        assert len(document.atoms) == len(atoms)
        assert document.weight_hash == "unit"
        assert document.atoms[0].a == pytest.approx(atoms[0].a.tolist())


class TestSLOnAtom:
    """Tests for sl_on_atom_report."""

    def test_near_far_split(self, path_operator, path_grid, delta_b):
        """near + far is the total and the near part sits under C ||a|| w(2B)^(1 - p/q)."""
        atom = HardyAtom(a=path_operator.apply(delta_b), b=delta_b, ball=Ball(5, 1.5), M=1)
        report = sl_on_atom_report(path_operator, path_grid, atom, 1.0)
        assert report.total == pytest.approx(report.near + report.far)
        assert report.lemma_constant > 0
        # 2B holds the five points 3..7
        expected = report.lemma_constant * report.atom_norm * 5.0**0.5
        assert report.near_bound == pytest.approx(expected)
        assert report.near_ok
        assert [t.k for t in report.annuli] == list(range(1, len(report.annuli) + 1))
        assert report.far_constant is not None

    def test_whole_space_ball(self, path_operator, path_grid, delta_b):
        """With B = X nothing lies off 2B."""
        atom = HardyAtom(a=path_operator.apply(delta_b), b=delta_b, ball=Ball(5, 100.0), M=1)
        report = sl_on_atom_report(path_operator, path_grid, atom, 1.0)
        assert report.far == 0.0
        assert report.annuli == []
        assert report.far_constant is None
        assert report.j1 == 0.0
        assert report.j2 == 0.0
        assert report.total == pytest.approx(report.near)

    @pytest.mark.parametrize(
        "kwargs", [{"n_exp": 50.0}, {"n_exp": 1.0}, {"n_exp": 2.0}, {"p": 0.5}]
    )
    def test_decay_exponent_range(self, path_operator, path_grid, delta_b, kwargs):
        """n_exp must lie strictly inside (n (s - p) / p, 2M)."""
        atom = HardyAtom(a=path_operator.apply(delta_b), b=delta_b, ball=Ball(5, 1.5), M=1)
        args = {"p": 1.0, **kwargs}
        with pytest.raises(InputError, match="n_exp"):
            sl_on_atom_report(path_operator, path_grid, atom, **args)

    def test_random_atoms(self, long_path):
        """Twenty normalized atoms on a 64-point path have finite, Hölder-bounded reports."""
        grid = calderon_grid(long_path)
        rng = np.random.default_rng(12)
        totals = []
        for _ in range(20):
            ball = Ball(int(rng.integers(64)), 3.5)
            b = np.where(ball.mask(long_path.space), rng.standard_normal(64), 0.0)
            a = long_path.apply(b)
            scale = max(validate_hardy_atom(long_path, a, b, ball, 1.0, 2.0, 1).ratios)
            atom = HardyAtom(a=a / scale, b=b / scale, ball=ball, M=1)
            report = sl_on_atom_report(long_path, grid, atom, 1.0)
            assert report.near_ok
            assert report.total == pytest.approx(report.near + report.far)
            assert np.isfinite(report.far_constant)
            totals.append(report.total)
        assert np.all(np.isfinite(totals))
        assert min(totals) > 0

    def test_higher_order_shrinks_j2(self):
        """At fixed n_exp, (r^2 L)^2 of a point mass has a smaller J2 than r^2 L."""
        op = build_operator(load_space(CommonSpaces.grid_1d(32, spacing=0.1)), CommonGraphs.path())
        grid = calderon_grid(op)
        ball = Ball(16, 0.15)
        b = np.zeros(32)
        b[16] = 1.0
        scaled = ball.radius**2 * op.apply(b)
        one = HardyAtom(a=scaled, b=b * ball.radius**2, ball=ball, M=1)
        two = HardyAtom(
            a=ball.radius**2 * op.apply(scaled), b=b * ball.radius**4, ball=ball, M=2
        )
        j2_one = sl_on_atom_report(op, grid, one, 1.0, n_exp=1.5).j2
        j2_two = sl_on_atom_report(op, grid, two, 1.0, n_exp=1.5).j2
        assert 0 < j2_two < j2_one
