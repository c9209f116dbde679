"""Configuration classes for tentlab."""

from dataclasses import dataclass
from typing import Optional

from tentlab.models import DecompositionMode, HardyMode, WhitneyMode

DEFAULT_DELTA = 1.0 / 16.0
MAX_DELTA = 1.0 / 12.0
DEFAULT_RATIO = 2.0**0.25


def default_c1(delta: float) -> float:
    """Smallest ball dilation the decomposition geometry allows: 2 delta^-2 + 3."""
    return 2.0 / delta**2 + 3.0


@dataclass
class GridConfig:
    """
    Configuration of the geometric t-grid.

    ``None`` values resolve from the space: ``t_min`` to half the minimum positive distance,
    ``t_max`` to twice the diameter. ``count`` overrides ``t_max`` when given.

    Attributes:
        t_min: Smallest sample (default: resolved)
        ratio: Geometric ratio between samples (default: 2^(1/4))
        count: Number of samples (default: resolved)
        t_max: Largest sample to reach (default: resolved)
    """

    t_min: Optional[float] = None
    ratio: float = DEFAULT_RATIO
    count: Optional[int] = None
    t_max: Optional[float] = None

    def __post_init__(self):
        """Validate configuration values."""
        if self.t_min is not None and self.t_min <= 0:
            raise ValueError("t_min must be > 0")
        if self.ratio <= 1:
            raise ValueError("ratio must be > 1")
        if self.count is not None and self.count < 1:
            raise ValueError("count must be >= 1")
        if self.t_max is not None and self.t_max <= 0:
            raise ValueError("t_max must be > 0")
        if self.t_min is not None and self.t_max is not None and self.t_max < self.t_min:
            raise ValueError("t_max cannot be below t_min")


@dataclass
class DyadicConfig:
    """
    Configuration of the dyadic cube system and Whitney covers.

    Attributes:
        delta: Scale ratio between generations, at most 1/12 (default: 1/16)
        k_min: Coarsest generation (default: resolved from the diameter)
        k_max: Finest generation (default: resolved from the minimum distance)
        whitney_mode: Strict descent or boundary repair (default: strict)
    """

    delta: float = DEFAULT_DELTA
    k_min: Optional[int] = None
    k_max: Optional[int] = None
    whitney_mode: WhitneyMode = WhitneyMode.STRICT

    def __post_init__(self):
        """Validate configuration values."""
        if not 0 < self.delta <= MAX_DELTA:
            raise ValueError("delta must be in (0, 1/12]")
        if self.k_min is not None and self.k_max is not None and self.k_max < self.k_min:
            raise ValueError("k_max cannot be below k_min")


@dataclass
class DecompositionConfig:
    """
    Configuration of the tent space atomic decomposition.

    Attributes:
        p: Tent space exponent, 0 < p <= 1
        q: Atom exponent, q > 1
        gamma: Global density parameter, 0 < gamma < 1 (default: 0.5)
        kappa: Level threshold scale (default: 1.0)
        delta: Dyadic scale (default: 1/16)
        c1: Ball dilation; None resolves to 2 delta^-2 + 3
        mode: Strict or faithful coefficients (default: strict)
        whitney_mode: Whitney selection mode (default: strict)
    """

    p: float = 0.5
    q: float = 2.0
    gamma: float = 0.5
    kappa: float = 1.0
    delta: float = DEFAULT_DELTA
    c1: Optional[float] = None
    mode: DecompositionMode = DecompositionMode.STRICT
    whitney_mode: WhitneyMode = WhitneyMode.STRICT

    def __post_init__(self):
        """Validate configuration values."""
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.q <= 1:
            raise ValueError("q must be > 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if not 0 < self.delta <= MAX_DELTA:
            raise ValueError("delta must be in (0, 1/12]")
        if self.c1 is not None and self.c1 <= 0:
            raise ValueError("c1 must be > 0 or None")

    @property
    def resolved_c1(self) -> float:
        """The ball dilation in use."""
        return default_c1(self.delta) if self.c1 is None else self.c1

    @property
    def allows_radius_extension(self) -> bool:
        """Radius extension is only allowed at or above the default dilation."""
        return self.resolved_c1 >= default_c1(self.delta)


@dataclass
class HardyConfig:
    """
    Configuration of the Hardy space pipeline.

    Attributes:
        p: Hardy exponent, 0 < p <= 1 (default: 1.0)
        q: Atom exponent, q > 1 (default: 2.0)
        M: Atom order (default: 1)
        s: A_s class of the weight; None uses q
        nu: Exponent of the g* function (default: 4.0)
        n_exp: Decay exponent for the far-field report; None uses 2M - 1/2
        dimension: Homogeneous dimension n in alpha = M + n + 1 (default: 1)
        c0: Propagation speed scaling the bump support (default: 1.0)
        mode: Support handling of the atoms (default: leak)
        leak_tolerance: Admissible relative mass of L^k b outside the ball
        quadrature_nodes: Starting panel count of the cosine quadrature
        gamma, kappa, delta, c1: Passed to the tent decomposition
    """

    p: float = 1.0
    q: float = 2.0
    M: int = 1
    s: Optional[float] = None
    nu: float = 4.0
    n_exp: Optional[float] = None
    dimension: int = 1
    c0: float = 1.0
    mode: HardyMode = HardyMode.LEAK
    leak_tolerance: float = 1e-8
    quadrature_nodes: int = 64
    gamma: float = 0.5
    kappa: float = 1.0
    delta: float = DEFAULT_DELTA
    c1: Optional[float] = None

    def __post_init__(self):
        """Validate configuration values."""
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.q <= 1:
            raise ValueError("q must be > 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be >= 1 or None")
        if self.nu <= 1:
            raise ValueError("nu must be > 1")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.c0 <= 0:
            raise ValueError("c0 must be > 0")
        if self.leak_tolerance < 0:
            raise ValueError("leak_tolerance must be >= 0")
        if self.quadrature_nodes < 1:
            raise ValueError("quadrature_nodes must be >= 1")

    @property
    def alpha(self) -> float:
        """Order of the Psi function, M + n + 1."""
        return float(self.M + self.dimension + 1)

    @property
    def resolved_s(self) -> float:
        return self.q if self.s is None else self.s

    @property
    def resolved_n_exp(self) -> float:
        return 2.0 * self.M - 0.5 if self.n_exp is None else self.n_exp

    def tent_config(self) -> DecompositionConfig:
        """Strict tent decomposition settings used inside the pipeline."""
        return DecompositionConfig(
            p=self.p,
            q=self.q,
            gamma=self.gamma,
            kappa=self.kappa,
            delta=self.delta,
            c1=self.c1,
            mode=DecompositionMode.STRICT,
        )


# Pre-defined configurations for common use cases
class TentlabPresets:
    """Pre-defined configuration presets."""

    @staticmethod
    def default() -> DecompositionConfig:
        """Default decomposition: p = 1/2, q = 2, strict coefficients."""
        return DecompositionConfig()

    @staticmethod
    def strict(p: float = 0.5, q: float = 2.0) -> DecompositionConfig:
        """Strict coefficients with strict Whitney selection."""
        return DecompositionConfig(p=p, q=q, mode=DecompositionMode.STRICT)

    @staticmethod
    def faithful(p: float = 0.5, q: float = 2.0, kappa: float = 1.0) -> DecompositionConfig:
        """
        Coefficients 2^k w(B)^{1/p} as in the constructive proof.

        Args:
            p: Tent space exponent
            q: Atom exponent
            kappa: Level threshold scale
        """
        return DecompositionConfig(p=p, q=q, kappa=kappa, mode=DecompositionMode.FAITHFUL)

    @staticmethod
    def coarse_grid() -> GridConfig:
        """Two samples per octave instead of four."""
        return GridConfig(ratio=2.0**0.5)

    @staticmethod
    def hardy_default(M: int = 1) -> HardyConfig:
        """Hardy pipeline with p = 1, q = 2 and leak-measured supports."""
        return HardyConfig(M=M)
