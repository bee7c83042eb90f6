"""
Fixtures: named configurations with known behaviour, plus a randomized family generator.
"""

import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

from .config import PartitionSpec, SequenceSpec, Side, SkewConfig, gammas_from_alphas
from .errors import DomainError
from .layered import CoefficientTable, LayerConfig
from .tails import TailFamily

logger = logging.getLogger(__name__)


def standard_partition(scale: float = 1.0, ratio: float = 0.5,
                       growth: float = 1.0) -> Tuple[PartitionSpec, PartitionSpec]:
    """|l_0| = r_0 = scale; scale·ratio^{|k|} toward 0, scale·(|k|+1)^growth outward."""
    inner = TailFamily.geometric(scale, ratio)
    outer = TailFamily.power(scale, growth, shift=1.0)
    return (PartitionSpec(Side.NEG, 0, 0, (-scale,), inner, outer),
            PartitionSpec(Side.POS, 0, 0, (scale,), inner, outer))


def constant_density(side: Side, value: float) -> SequenceSpec:
    tail = TailFamily.constant(value)
    return SequenceSpec(side, 0, 0, (float(value),), tail, tail)


def brownian() -> SkewConfig:
    neg, pos = standard_partition()
    return SkewConfig(neg, pos, constant_density(Side.NEG, 1.0),
                      constant_density(Side.POS, 1.0), name="brownian")


def skew_bm(a: float) -> SkewConfig:
    """Skew BM with parameter a: γ ≡ (1−a)/a, γ̄ ≡ 1."""
    if not 0 < a < 1:
        raise DomainError(f"a must lie in (0, 1), got {a}")
    neg, pos = standard_partition()
    return SkewConfig(neg, pos, constant_density(Side.NEG, (1 - a) / a),
                      constant_density(Side.POS, 1.0), name=f"skew-bm-{a:g}")


def bessel(delta: float) -> SkewConfig:
    """Step approximation of ρ(x) = |x|^{δ−1} on breakpoints ±1/k and ±(k+2)."""
    inner_part = TailFamily.power(1.0, -1.0)
    outer_part = TailFamily.power(1.0, 1.0, shift=2.0)
    inner_dens = TailFamily.power(1.0, 1.0 - delta)
    outer_dens = TailFamily.power(1.0, delta - 1.0, shift=1.0)
    return SkewConfig(
        PartitionSpec(Side.NEG, 0, 1, (-2.0, -1.0), inner_part, outer_part),
        PartitionSpec(Side.POS, -1, 0, (1.0, 2.0), inner_part, outer_part),
        SequenceSpec(Side.NEG, 0, 1, (1.0, 1.0), inner_dens, outer_dens),
        SequenceSpec(Side.POS, -1, 0, (1.0, 1.0), inner_dens, outer_dens),
        name=f"bessel-{delta:g}",
    )


def counterexample(c: float = 2.0) -> SkewConfig:
    """r_k = H_k and γ̄_{k+1} = C^k(k+1) on the right: explodes to +∞ for C > 1."""
    if not c > 1:
        raise DomainError(f"C must exceed 1, got {c}")
    neg, _ = standard_partition()
    pos = PartitionSpec(Side.POS, 0, 1, (0.5, 1.0), TailFamily.geometric(0.5, 0.5),
                        TailFamily.harmonic(1.0))
    gammabar = SequenceSpec(Side.POS, 0, 2, (1.0, 1.0, 2.0 * c), TailFamily.constant(1.0),
                            TailFamily.geometric(1.0 / c, c, exponent=1.0))
    return SkewConfig(neg, pos, constant_density(Side.NEG, 1.0), gammabar,
                      name=f"counterexample-{c:g}")


def geometric_decay() -> SkewConfig:
    """ρ = 1 on (−2, 2), halving on every further unit layer; total mass 6."""
    neg, pos = standard_partition()
    gamma = SequenceSpec(Side.NEG, 0, 0, (1.0,), TailFamily.constant(1.0),
                         TailFamily.geometric(1.0, 0.5))
    gammabar = SequenceSpec(Side.POS, 0, 1, (1.0, 1.0), TailFamily.constant(1.0),
                            TailFamily.geometric(2.0, 0.5))
    return SkewConfig(neg, pos, gamma, gammabar, name="geometric-decay")


def degenerate() -> SkewConfig:
    """α_k → 1/2 like 0.1/k near 0: the variation series is numeric-only and undecided."""
    inner = TailFamily.power(0.1, -1.0, shift=1.0, offset=0.5)
    outer = TailFamily.constant(0.5)
    alphas_neg = SequenceSpec(Side.NEG, -1, 0, (0.5, 0.6), inner, outer)
    alphas_pos = SequenceSpec(Side.POS, 0, 1, (0.6, 0.5), inner, outer)
    gamma, gammabar = gammas_from_alphas(alphas_neg, alphas_pos, 1.0, 1.0)
    neg, pos = standard_partition()
    return SkewConfig(neg, pos, gamma, gammabar, name="degenerate")


# layered media


def _diffusivity(side: Side, outer: TailFamily) -> SequenceSpec:
    return SequenceSpec(side, 0, 0, (1.0,), TailFamily.constant(1.0), outer)


def layered_homogeneous(alpha: float = 0.5) -> LayerConfig:
    neg, pos = standard_partition()
    one = TailFamily.constant(1.0)
    return LayerConfig(neg, pos, _diffusivity(Side.NEG, one), _diffusivity(Side.POS, one),
                       alpha, name="layered-homogeneous")


def layered_bounded(alpha: float = 0.5, beta2: CoefficientTable = None) -> LayerConfig:
    """Unit outer layers with √D_k = (|k|+1)^{-2}: bounded Ψ range, positive recurrent."""
    neg, pos = standard_partition()
    decay = TailFamily.power(1.0, -4.0, shift=1.0)
    return LayerConfig(neg, pos, _diffusivity(Side.NEG, decay), _diffusivity(Side.POS, decay),
                       alpha, beta2=beta2 or CoefficientTable.constant(0.0),
                       name="layered-bounded")


def layered_right_transient(alpha: float = 0.5) -> LayerConfig:
    """D̄_k = 4^k on unit layers."""
    neg, pos = standard_partition()
    return LayerConfig(neg, pos, _diffusivity(Side.NEG, TailFamily.constant(1.0)),
                       _diffusivity(Side.POS, TailFamily.geometric(1.0, 4.0)),
                       alpha, name="layered-right-transient")


FIXTURES: Dict[str, Callable[[], SkewConfig]] = {
    "brownian": brownian,
    "skew-bm-0.7": lambda: skew_bm(0.7),
    "bessel-0.5": lambda: bessel(0.5),
    "bessel-1.5": lambda: bessel(1.5),
    "counterexample-2": lambda: counterexample(2.0),
    "geometric-decay": geometric_decay,
    "degenerate": degenerate,
}


# randomized family


def _random_inner(rng: np.random.Generator, standing: bool) -> TailFamily:
    scale = float(rng.uniform(0.5, 2.0))
    offset = float(rng.uniform(0.5, 2.0))
    choices = ["constant", "power_limit", "geometric_limit"]
    if not standing:
        choices += ["power_zero", "power_infinite", "geometric_zero"]
    choice = choices[int(rng.integers(len(choices)))]
    if choice == "constant":
        return TailFamily.constant(scale)
    if choice == "power_limit":
        return TailFamily.power(scale, float(rng.uniform(-2.0, -0.2)), shift=1.0, offset=offset)
    if choice == "geometric_limit":
        return TailFamily.geometric(scale, float(rng.uniform(0.3, 0.9)), offset=offset)
    if choice == "power_zero":
        return TailFamily.power(scale, float(rng.uniform(-2.0, -0.2)), shift=1.0)
    if choice == "power_infinite":
        return TailFamily.power(scale, float(rng.uniform(0.2, 1.0)), shift=1.0)
    return TailFamily.geometric(scale, float(rng.uniform(0.3, 0.9)))


def _random_density(rng: np.random.Generator, side: Side, standing: bool) -> SequenceSpec:
    inner = _random_inner(rng, standing)
    anchor = inner.value(0)
    outer = TailFamily.power(anchor, float(rng.uniform(-1.0, 1.0)), shift=1.0)
    return SequenceSpec(side, 0, 0, (anchor,), inner, outer)


def random_config(rng: np.random.Generator, standing: bool = False) -> SkewConfig:
    """Closed-form tails with a one-point window; standing=True keeps S0 ∧ S1."""
    scale = float(rng.uniform(0.5, 2.0))
    neg, pos = standard_partition(scale, float(rng.uniform(0.3, 0.8)),
                                  float(rng.uniform(0.5, 2.0)))
    return SkewConfig(neg, pos, _random_density(rng, Side.NEG, standing),
                      _random_density(rng, Side.POS, standing), name="random")


def random_configs(count: int, seed: int, standing: bool = False) -> List[SkewConfig]:
    rng = np.random.default_rng(seed)
    configs = []
    for i in range(count):
        config = random_config(rng, standing)
        configs.append(SkewConfig(config.neg_partition, config.pos_partition,
                                  config.neg_density, config.pos_density, name=f"random-{i}"))
    logger.debug(f"Generated {count} random configurations from seed {seed}")
    return configs
