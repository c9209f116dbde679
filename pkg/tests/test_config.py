"""Tests for configuration classes and presets."""

import pytest

from tentlab.config import (
    DEFAULT_DELTA,
    DecompositionConfig,
    DyadicConfig,
    GridConfig,
    HardyConfig,
    TentlabPresets,
    default_c1,
)
from tentlab.models import DecompositionMode, HardyMode, WhitneyMode


class TestGridConfig:
    """Tests for GridConfig."""

    def test_defaults(self):
        """Unset values resolve from the space; the ratio is 2^(1/4)."""
        config = GridConfig()
        assert config.t_min is None
        assert config.count is None
        assert config.ratio == pytest.approx(2.0**0.25)

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"t_min": 0.0}, "t_min must be > 0"),
            ({"ratio": 1.0}, "ratio must be > 1"),
            ({"count": 0}, "count must be >= 1"),
            ({"t_min": 2.0, "t_max": 1.0}, "t_max cannot be below t_min"),
        ],
    )
    def test_invalid(self, kwargs, message):
        """Invalid grids raise ValueError."""
        with pytest.raises(ValueError, match=message):
            GridConfig(**kwargs)


class TestDyadicConfig:
    """Tests for DyadicConfig."""

    def test_defaults(self):
        """delta defaults to 1/16 with strict Whitney selection."""
        config = DyadicConfig()
        assert config.delta == DEFAULT_DELTA == 1 / 16
        assert config.whitney_mode == WhitneyMode.STRICT

    def test_delta_bound(self):
        """delta may not exceed 1/12."""
        DyadicConfig(delta=1 / 12)
        with pytest.raises(ValueError, match="delta"):
            DyadicConfig(delta=0.1)

    def test_generation_order(self):
        """k_max cannot be below k_min."""
        with pytest.raises(ValueError, match="k_max"):
            DyadicConfig(k_min=2, k_max=1)


class TestDecompositionConfig:
    """Tests for DecompositionConfig."""

    def test_default_c1(self):
        """The default dilation is 2 delta^-2 + 3 = 515 at delta 1/16."""
        config = DecompositionConfig()
        assert config.resolved_c1 == default_c1(1 / 16) == 515.0
        assert config.allows_radius_extension

    def test_small_c1(self):
        """A dilation below the default forbids radius extension."""
        config = DecompositionConfig(c1=10.0)
        assert config.resolved_c1 == 10.0
        assert not config.allows_radius_extension

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"p": 0.0}, "p must be in"),
            ({"p": 1.5}, "p must be in"),
            ({"q": 1.0}, "q must be > 1"),
            ({"gamma": 1.0}, "gamma"),
            ({"kappa": 0.0}, "kappa"),
            ({"delta": 0.2}, "delta"),
            ({"c1": -1.0}, "c1"),
        ],
    )
    def test_invalid(self, kwargs, message):
        """Invalid parameters raise ValueError."""
        with pytest.raises(ValueError, match=message):
            DecompositionConfig(**kwargs)


class TestHardyConfig:
    """Tests for HardyConfig."""

    def test_derived_values(self):
        """alpha = M + n + 1, s defaults to q and n_exp to 2M - 1/2."""
        config = HardyConfig(M=2, q=3.0)
        assert config.alpha == 4.0
        assert config.resolved_s == 3.0
        assert config.resolved_n_exp == 3.5
        assert config.mode == HardyMode.LEAK

    def test_tent_config(self):
        """The inner tent decomposition is always strict."""
        tent = HardyConfig(p=0.8, kappa=2.0).tent_config()
        assert tent.mode == DecompositionMode.STRICT
        assert (tent.p, tent.kappa) == (0.8, 2.0)

    @pytest.mark.parametrize(
        "kwargs",
        [{"M": 0}, {"nu": 1.0}, {"c0": 0.0}, {"leak_tolerance": -1.0}, {"s": 0.5}],
    )
    def test_invalid(self, kwargs):
        """Invalid parameters raise ValueError."""
        with pytest.raises(ValueError):
            HardyConfig(**kwargs)


class TestTentlabPresets:
    """Tests for TentlabPresets."""

    def test_default(self):
        """The default preset equals a bare config."""
        assert TentlabPresets.default() == DecompositionConfig()

    def test_strict_and_faithful(self):
        """Strict and faithful presets set the coefficient mode."""
        assert TentlabPresets.strict(p=0.25).p == 0.25
        faithful = TentlabPresets.faithful(kappa=2.0)
        assert faithful.mode == DecompositionMode.FAITHFUL
        assert faithful.kappa == 2.0

    def test_coarse_grid(self):
        """The coarse grid takes two samples per octave."""
        assert TentlabPresets.coarse_grid().ratio == pytest.approx(2.0**0.5)

    def test_hardy_default(self):
        """The Hardy preset keeps p = 1 and q = 2."""
        config = TentlabPresets.hardy_default(M=2)
        assert (config.p, config.q, config.M) == (1.0, 2.0, 2)
