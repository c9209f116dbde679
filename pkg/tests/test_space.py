"""Tests for finite metric measure spaces."""

import numpy as np
import pytest

from tentlab.errors import InputError
from tentlab.models import MetricKind, SpaceDocument
from tentlab.presets import CommonSpaces
from tentlab.space import (
    Ball,
    ball,
    distance_to_set,
    doubling_report,
    greedy_net,
    load_space,
    lp_norm_weighted,
    maximal_function,
    space_to_document,
    volume,
)


def _all_ball_masks(space):
    """Every distinct strict ball, by brute force over centers and distances."""
    masks = set()
    for x in range(space.n_points):
        for r in np.unique(space.dist[x]):
            masks.add(tuple(space.dist[x] <= r))
    return [np.array(m) for m in masks]


class TestLoadSpace:
    """Tests for load_space and construction invariants."""

    def test_grid_diameter(self, line):
        """A 1-D grid of ten points has diameter 9."""
        assert line.n_points == 10
        assert line.diam == 9.0
        assert line.min_distance == 1.0
        assert np.all(line.mass == 1.0)

    def test_nearest_distance(self):
        """The nearest distance is measured from each center, not over the whole space."""
        space = load_space(SpaceDocument(points=[[0.0], [0.5], [3.0], [7.0]]))
        assert space.min_distance == 0.5
        assert [space.nearest_distance(x) for x in range(4)] == [0.5, 0.5, 2.5, 4.0]
        assert load_space(CommonSpaces.single_point()).nearest_distance(0) == 1.0

    def test_triangle_violation(self):
        """An explicit table breaking the triangle inequality is rejected with a witness."""
        doc = SpaceDocument(
            distances=[[0, 1, 5], [1, 0, 1], [5, 1, 0]], metric=MetricKind.EXPLICIT
        )
        with pytest.raises(InputError, match="Triangle inequality"):
            load_space(doc)

    def test_asymmetric_table(self):
        """A non-symmetric table is rejected."""
        doc = SpaceDocument(distances=[[0, 1], [2, 0]], metric=MetricKind.EXPLICIT)
        with pytest.raises(InputError, match="symmetric"):
            load_space(doc)

    def test_nonpositive_mass(self):
        """Zero masses are rejected."""
        with pytest.raises(InputError, match="positive"):
            load_space(CommonSpaces.grid_1d(3, measure=[1.0, 0.0, 1.0]))

    def test_duplicate_points(self):
        """Distinct points at distance zero are rejected."""
        doc = SpaceDocument(points=[[0.0], [0.0]])
        with pytest.raises(InputError, match="distance 0"):
            load_space(doc)

    def test_missing_file(self, tmp_path):
        """A missing file is an input error."""
        with pytest.raises(InputError, match="Cannot read"):
            load_space(tmp_path / "nope.json")

    def test_json_string_and_file(self, tmp_path):
        """Spaces load from JSON strings and files alike."""
        doc = CommonSpaces.grid_1d(4)
        path = tmp_path / "space.json"
        path.write_text(doc.model_dump_json())
        assert load_space(path).space_hash == load_space(doc.model_dump_json()).space_hash

    def test_metric_registry(self):
        """Manhattan and Chebyshev metrics come from the metric registry."""
        l1 = load_space(CommonSpaces.grid_2d(2, 2, metric=MetricKind.MANHATTAN))
        linf = load_space(CommonSpaces.grid_2d(2, 2, metric=MetricKind.CHEBYSHEV))
        assert l1.dist[0, 3] == 2.0
        assert linf.dist[0, 3] == 1.0

    def test_document_round_trip_keeps_hash(self, cloud):
        """Saving and reloading a space keeps its hash."""
        assert load_space(space_to_document(cloud)).space_hash == cloud.space_hash


class TestBalls:
    """Tests for ball and volume."""

    def test_strict_ball(self, line):
        """Balls use strict inequality."""
        assert ball(line, 5, 1.0).tolist() == [5]

    def test_ball_neighbours(self, line):
        """ball(5, 1.5) holds the two neighbours."""
        assert ball(line, 5, 1.5).tolist() == [4, 5, 6]
        assert volume(line, 5, 1.5) == 3.0

    def test_nonpositive_radius(self, line):
        """A radius of zero is an input error."""
        with pytest.raises(InputError):
            ball(line, 0, 0.0)

    def test_volume_matches_summation(self, cloud):
        """volume equals direct summation on random (x, r)."""
        rng = np.random.default_rng(5)
        for _ in range(200):
            x = int(rng.integers(cloud.n_points))
            r = float(rng.uniform(1e-3, 1.5 * cloud.diam))
            expected = sum(cloud.mass[y] for y in range(cloud.n_points) if cloud.dist[x, y] < r)
            assert volume(cloud, x, r) == pytest.approx(expected, rel=1e-12)
            assert volume(cloud, x, r) >= cloud.mass[x]

    def test_volume_table_agrees(self, cloud):
        """The cached volume table agrees with volume."""
        radii = np.array([0.05, 0.2, 0.7])
        table = cloud.volume_table(radii)
        for x in (0, 7, 29):
            for j, r in enumerate(radii):
                assert table[x, j] == pytest.approx(volume(cloud, x, r))

    def test_monotone_in_radius(self, cloud):
        """Balls grow with the radius."""
        small, large = ball(cloud, 3, 0.2), ball(cloud, 3, 0.4)
        assert set(small.tolist()) <= set(large.tolist())

    def test_ball_dilate(self, line):
        """Dilating a ball scales its radius around the same center."""
        b = Ball(4, 1.5).dilate(2.0)
        assert b == Ball(4, 3.0)
        assert b.volume(line) == 5.0


class TestBallFamily:
    """Tests for the family of distinct balls."""

    def test_family_is_exhaustive(self, cloud):
        """The family holds exactly the distinct balls."""
        family = cloud.balls
        expected = {tuple(m) for m in _all_ball_masks(cloud)}
        assert {tuple(row) for row in family.members} == expected

    def test_radii_realize_members(self, cloud):
        """Each stored radius reproduces its ball as a strict ball."""
        family = cloud.balls
        for i in range(0, family.size, 17):
            mask = Ball(int(family.centers[i]), float(family.radii[i])).mask(cloud)
            assert np.array_equal(mask, family.members[i])


class TestDoublingReport:
    """Tests for doubling_report."""

    def test_line_constant(self, line):
        """On the integer grid the doubling constant is exactly 3."""
        report = doubling_report(line)
        assert report.c_doubling == 3.0
        assert report.n_exp >= 0

    def test_single_point(self, point):
        """The one-point space has doubling constant 1."""
        report = doubling_report(point)
        assert report.c_doubling == 1.0
        assert report.n_points == 1

    def test_exhaustive_oracle(self, lattice):
        """c_doubling matches a scan over every center and every distinct radius."""
        best = 1.0
        for x in range(lattice.n_points):
            breaks = np.unique(np.concatenate([lattice.dist[x], lattice.dist[x] / 2.0]))
            candidates = 0.5 * (breaks[:-1] + breaks[1:])
            for r in candidates:
                v1 = lattice.mass[lattice.dist[x] < r].sum()
                v2 = lattice.mass[lattice.dist[x] < 2 * r].sum()
                best = max(best, v2 / v1)
        assert doubling_report(lattice).c_doubling == pytest.approx(best, rel=1e-12)

    def test_plane_exponent(self):
        """The fitted exponent of a planar lattice is close to 2."""
        report = doubling_report(load_space(CommonSpaces.grid_2d(16, 16)))
        assert report.n_exp == pytest.approx(2.0, abs=0.3)


class TestMaximalFunction:
    """Tests for maximal_function."""

    def test_constant(self, cloud):
        """The maximal function of a constant is the constant."""
        assert np.allclose(maximal_function(cloud, np.full(30, 2.5)), 2.5)

    def test_point_indicator(self, line):
        """The indicator of a point has maximal value 1 at that point."""
        f = np.zeros(10)
        f[4] = 1.0
        assert maximal_function(line, f)[4] == 1.0

    def test_all_balls_oracle(self, cloud):
        """The uncentered maximal function equals brute force over all balls."""
        f = np.random.default_rng(2).random(30)
        expected = np.zeros(30)
        for mask in _all_ball_masks(cloud):
            avg = (f * cloud.mass)[mask].sum() / cloud.mass[mask].sum()
            expected[mask] = np.maximum(expected[mask], avg)
        assert np.allclose(maximal_function(cloud, f), expected, rtol=1e-12)

    def test_dominates_and_sublinear(self, cloud):
        """Mf >= f and M(f + g) <= Mf + Mg."""
        rng = np.random.default_rng(8)
        f, g = rng.random(30), rng.random(30)
        mf, mg = maximal_function(cloud, f), maximal_function(cloud, g)
        assert np.all(mf >= f - 1e-15)
        assert np.all(maximal_function(cloud, f + g) <= mf + mg + 1e-12)

    def test_centered_below_uncentered(self, cloud):
        """The centered variant never exceeds the uncentered one."""
        f = np.random.default_rng(4).random(30)
        centered = maximal_function(cloud, f, centered=True)
        assert np.all(centered <= maximal_function(cloud, f) + 1e-12)
        assert np.all(centered >= f - 1e-15)

    def test_negative_values(self, line):
        """Negative inputs are rejected."""
        with pytest.raises(InputError):
            maximal_function(line, -np.ones(10))


class TestLpNorm:
    """Tests for lp_norm_weighted."""

    def test_zero(self, line):
        """The zero function has norm 0."""
        assert lp_norm_weighted(line, np.zeros(10), None, 0.5) == 0.0

    def test_counting(self, line):
        """With f = w = mu = 1 and p = 1 the norm counts points."""
        assert lp_norm_weighted(line, np.ones(10), np.ones(10), 1.0) == 10.0

    def test_homogeneous(self, cloud):
        """||c f|| = |c| ||f||."""
        f = np.random.default_rng(1).standard_normal(30)
        base = lp_norm_weighted(cloud, f, None, 0.7)
        assert lp_norm_weighted(cloud, -3.0 * f, None, 0.7) == pytest.approx(3.0 * base, rel=1e-12)

    def test_quasi_norm_oracle(self, cloud):
        """p = 0.7 matches an extended-precision summation."""
        rng = np.random.default_rng(6)
        f, w = rng.standard_normal(30), rng.uniform(0.5, 2.0, 30)
        total = np.sum(
            np.abs(f).astype(np.longdouble) ** 0.7 * w.astype(np.longdouble) * cloud.mass
        )
        expected = float(total ** (1 / np.longdouble(0.7)))
        assert lp_norm_weighted(cloud, f, w, 0.7) == pytest.approx(expected, rel=1e-12)

    def test_nonpositive_p(self, line):
        """p must be positive."""
        with pytest.raises(InputError):
            lp_norm_weighted(line, np.ones(10), None, 0.0)


class TestGreedyNet:
    """Tests for greedy_net."""

    def test_large_scale(self, line):
        """A scale above the diameter gives a single center."""
        assert greedy_net(line, 10.0).tolist() == [0]

    def test_separation_and_cover(self, line):
        """Centers are r-separated and cover within r."""
        centers = greedy_net(line, 2.0)
        sub = line.dist[np.ix_(centers, centers)]
        assert np.all(sub[~np.eye(len(centers), dtype=bool)] >= 2.0)
        assert np.all(line.dist[:, centers].min(axis=1) < 2.0)

    def test_fine_scale(self, cloud):
        """At the minimum distance every point is a center."""
        assert greedy_net(cloud, cloud.min_distance).tolist() == list(range(30))

    def test_seeds_kept(self, line):
        """Seeds stay centers."""
        assert 3 in greedy_net(line, 4.0, seeds=np.array([3])).tolist()


class TestDistanceToSet:
    """Tests for distance_to_set."""

    def test_empty_set(self, line):
        """The distance to the empty set is infinite."""
        assert np.all(np.isinf(distance_to_set(line, np.zeros(10, dtype=bool))))

    def test_distances(self, line):
        """Distances to {0, 9} on the line."""
        mask = np.zeros(10, dtype=bool)
        mask[[0, 9]] = True
        assert distance_to_set(line, mask).tolist() == [0, 1, 2, 3, 4, 4, 3, 2, 1, 0]
