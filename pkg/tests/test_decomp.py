"""Tests for the tent space atomic decomposition."""

import numpy as np
import pytest

from tentlab.config import DecompositionConfig
from tentlab.decomp import (
    UNIT_WEIGHT_HASH,
    coefficient_report,
    decompose,
    decomposition_to_document,
    level_sets,
    load_decomposition,
    reconstruct,
)
from tentlab.dyadic import build_dyadic_system
from tentlab.errors import DecompositionError, InputError
from tentlab.models import DecompositionMode, SpaceDocument
from tentlab.space import Ball, load_space
from tentlab.tent import (
    TentFunction,
    TGrid,
    area_functional,
    saturated_atom,
    tent_norm,
    validate_q_atom,
)


@pytest.fixture(name="ones")
def ones_fixture(grid):
    return TentFunction(grid, np.ones((10, grid.count)))


class TestLevelSets:
    """Tests for level_sets."""

    def test_zero(self, line, grid):
        """The zero function has no levels."""
        assert level_sets(line, grid, TentFunction.zeros(10, grid)) == []

    def test_nested(self, line, grid, random_tent):
        """Levels increase in k and their sets shrink."""
        levels = level_sets(line, grid, random_tent)
        assert [lv.k for lv in levels] == list(range(levels[0].k, levels[0].k + len(levels)))
        for lower, upper in zip(levels, levels[1:]):
            assert not np.any(upper.omega & ~lower.omega)
            assert not np.any(upper.omega_star & ~lower.omega_star)

    def test_first_level_is_support(self, line, grid, random_tent):
        """The first level holds every point where the area functional is positive."""
        first = level_sets(line, grid, random_tent)[0]
        assert np.array_equal(first.omega, area_functional(line, grid, random_tent) > 0)

    def test_star_contains_omega(self, line, grid, random_tent):
        """Each density envelope contains its level."""
        for level in level_sets(line, grid, random_tent):
            assert np.all(level.omega_star[level.omega])

    def test_kappa(self, line, grid, ones):
        """kappa must be positive."""
        with pytest.raises(InputError, match="kappa"):
            level_sets(line, grid, ones, kappa=0.0)


class TestDecompose:
    """Tests for decompose and reconstruct."""

    def test_zero(self, line, grid):
        """The zero function decomposes into nothing and passes."""
        zero = TentFunction.zeros(10, grid)
        decomposition = decompose(line, grid, zero)
        assert len(decomposition) == 0
        report = coefficient_report(decomposition, zero)
        assert report.passed
        assert report.ratio is None

    def test_exact_reconstruction(self, line, grid, random_tent):
        """Strict decompositions reconstruct F to rounding."""
        decomposition = decompose(line, grid, random_tent)
        assert len(decomposition) > 0
        rebuilt = reconstruct(decomposition)
        assert np.allclose(rebuilt.values, random_tent.values, rtol=0, atol=1e-13)

    def test_strict_report(self, line, grid, power_weight, random_tent):
        """Weighted strict decompositions pass with saturated atoms and the converse bound."""
        decomposition = decompose(line, grid, random_tent, power_weight)
        report = coefficient_report(decomposition, random_tent)
        assert report.passed
        assert report.atom_violations == 0
        assert report.converse_ok
        assert report.max_relative_slack == pytest.approx(0.0, abs=1e-9)
        assert report.reconstruction_max_error <= 1e-12 * np.abs(random_tent.values).max()
        assert report.ratio > 0

    def test_entries_are_atoms(self, line, grid, random_tent):
        """Each entry is a q-atom on its own ball with a positive coefficient."""
        decomposition = decompose(line, grid, random_tent)
        for entry in decomposition.entries:
            assert entry.coefficient > 0
            assert validate_q_atom(line, grid, entry.atom, entry.ball, 0.5, 2.0).passed

    def test_regions_disjoint(self, line, grid, random_tent):
        """The regions of different terms never overlap."""
        decomposition = decompose(line, grid, random_tent)
        owned = np.zeros(random_tent.values.shape, dtype=int)
        for entry in decomposition.entries:
            owned += entry.region.mask
        assert owned.max() <= 1

    def test_ordered(self, line, grid, random_tent):
        """Terms are ordered by level and cube position."""
        entries = decompose(line, grid, random_tent).entries
        keys = [(e.level, e.index) for e in entries]
        assert keys == sorted(keys)

    def test_faithful_mode(self, line, grid, random_tent):
        """Faithful coefficients are 2^k w(B)^(1/p) and still reconstruct."""
        config = DecompositionConfig(mode=DecompositionMode.FAITHFUL)
        decomposition = decompose(line, grid, random_tent, config=config)
        for entry in decomposition.entries:
            w_ball = entry.ball.volume(line)
            assert entry.coefficient == pytest.approx(2.0**entry.level * w_ball**2)
        assert coefficient_report(decomposition, random_tent, check_atoms=False).passed

    def test_homogeneous(self, line, grid, random_tent):
        """Doubling F multiplies sum lambda^p by 2^p."""
        base = decompose(line, grid, random_tent).lambda_p_sum
        doubled = decompose(line, grid, random_tent.scale(2.0)).lambda_p_sum
        assert doubled == pytest.approx(2.0**0.5 * base, rel=1e-9)

    def test_complex(self, line, grid, random_tent):
        """Complex tent functions reconstruct exactly."""
        F = random_tent + random_tent.scale(0.5j)
        rebuilt = reconstruct(decompose(line, grid, F))
        assert np.allclose(rebuilt.values, F.values, rtol=0, atol=1e-13)

    def test_thread_count_invariant(self, line, grid, random_tent):
        """Results do not depend on the worker count."""
        one = decompose(line, grid, random_tent, threads=1)
        four = decompose(line, grid, random_tent, threads=4)
        assert [e.coefficient for e in one.entries] == [e.coefficient for e in four.entries]

    def test_given_system(self, line, grid, random_tent):
        """A prebuilt dyadic system gives the same decomposition."""
        system = build_dyadic_system(line)
        with_system = decompose(line, grid, random_tent, system=system)
        assert len(with_system) == len(decompose(line, grid, random_tent))

    def test_lattice(self, lattice):
        """A planar lattice decomposes and passes."""
        grid = TGrid.from_space(lattice)
        rng = np.random.default_rng(5)
        shape = (64, grid.count)
        F = TentFunction(grid, rng.standard_normal(shape) * (rng.random(shape) < 0.2))
        assert coefficient_report(decompose(lattice, grid, F), F).passed

    def test_degenerate_radius_is_local(self):
        """Balls never shrink below the distance from their center to its nearest neighbour."""
        space = load_space(SpaceDocument(points=[[0.0], [0.5], [3.0], [7.0], [7.25]]))
        grid = TGrid.from_space(space)
        F = TentFunction(grid, np.random.default_rng(9).standard_normal((5, grid.count)))
        decomposition = decompose(space, grid, F)
        for entry in decomposition.entries:
            assert entry.ball.radius >= space.nearest_distance(entry.ball.center)
        assert np.allclose(reconstruct(decomposition).values, F.values, rtol=0, atol=1e-13)

    def test_small_dilation_rejected(self, line, grid, ones):
        """Below the default dilation the radius may not grow, so distant samples fail."""
        with pytest.raises(DecompositionError) as info:
            decompose(line, grid, ones, config=DecompositionConfig(c1=0.01))
        assert info.value.samples

    def test_default_dilation_extends(self, line, grid, ones):
        """At the default dilation radii grow as needed and are counted."""
        decomposition = decompose(line, grid, ones)
        report = coefficient_report(decomposition, ones)
        assert report.passed
        assert report.radius_extended == sum(e.radius_extended for e in decomposition.entries)


class TestDocuments:
    """Tests for decomposition documents."""

    def test_reload(self, line, grid, power_weight, random_tent, tmp_path):
        """A saved decomposition reloads and reconstructs the same function."""
        decomposition = decompose(line, grid, random_tent, power_weight, seed=4)
        path = tmp_path / "decomposition.json"
        path.write_text(decomposition_to_document(decomposition).model_dump_json())
        loaded = load_decomposition(path, line, power_weight)
        assert loaded.seed == 4
        assert np.array_equal(reconstruct(loaded).values, reconstruct(decomposition).values)

    def test_unit_weight_hash(self, line, grid, random_tent):
        """Unweighted decompositions record the unit hash."""
        document = decomposition_to_document(decompose(line, grid, random_tent))
        assert document.weight_hash == UNIT_WEIGHT_HASH

    def test_weight_mismatch(self, line, grid, power_weight, random_tent):
        """Loading with another weight is an input error."""
        document = decomposition_to_document(decompose(line, grid, random_tent))
        with pytest.raises(InputError, match="different weight"):
            load_decomposition(document, line, power_weight)

    def test_space_mismatch(self, line, cloud, grid, random_tent):
        """Loading on another space is an input error."""
        document = decomposition_to_document(decompose(line, grid, random_tent))
        with pytest.raises(InputError, match="different space"):
            load_decomposition(document, cloud)


class TestConverseBound:
    """Sums of strict atoms obey the p-th power bound with constant 1."""

    @pytest.mark.parametrize("seed", range(50))
    def test_random_atom_sums(self, line, grid, power_weight, seed):
        """||sum lambda a||^p of up to twenty saturated atoms is at most sum |lambda|^p."""
        rng = np.random.default_rng(seed)
        total = TentFunction.zeros(10, grid)
        lambda_p = 0.0
        for _ in range(int(rng.integers(1, 21))):
            ball = Ball(int(rng.integers(10)), float(rng.choice([1.5, 2.5, 4.0, 6.0])))
            profile = rng.standard_normal((10, grid.count))
            atom = saturated_atom(line, grid, ball, 0.5, 2.0, power_weight, profile)
            assert validate_q_atom(line, grid, atom, ball, 0.5, 2.0, power_weight).passed
            coefficient = float(rng.uniform(-2.0, 2.0))
            total = total + atom.scale(coefficient)
            lambda_p += abs(coefficient) ** 0.5
        assert tent_norm(line, grid, total, 0.5, power_weight) ** 0.5 <= lambda_p + 1e-9
