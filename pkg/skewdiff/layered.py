"""
Layered Module: transversal/longitudinal advection-diffusion in layered media.

Layer diffusivities D_k (left) and D̄_k (right) induce the skew configuration
γ_{k+1} = c_α√D_k, γ̄_{k+1} = c̄_α√D̄_k with c_α = α/√D, c̄_α = (1−α)/√D̄, where D and D̄
are the diffusivity limits at the accumulation point. The transversal position is
X = Ψ(Z) for the skew process Z of that configuration; the longitudinal Y integrates
piecewise-constant σ₂, β₂ along X with its own noise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .classifier import Verdict, classification_pipeline
from .config import PartitionSpec, SequenceSpec, Side, SkewConfig, alphas_from_gammas
from .errors import DomainError, PlanError, PreconditionError
from .scale import ScaleFunction, build_scale, hitting_prob_upper
from .series import K_MAX, SeriesVerdict
from .simulation import MCEstimate, PathEnsemble, SimPlan, mc_hitting, simulate_path
from .tails import TailFamily

logger = logging.getLogger(__name__)

STANDING = ('s0', 's1', 'conservative')


@dataclass(frozen=True)
class CoefficientTable:
    """Piecewise-constant coefficient: values[i] on [edges[i-1], edges[i])."""
    edges: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.edges) + 1:
            raise DomainError(f"need {len(self.edges) + 1} values for {len(self.edges)} edges, "
                              f"got {len(self.values)}")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise DomainError("table edges must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "CoefficientTable":
        return cls((), (float(value),))

    def __call__(self, x):
        idx = np.searchsorted(np.asarray(self.edges, dtype=float), x, side="right")
        return np.asarray(self.values, dtype=float)[idx]

    def average(self, lo: float, hi: float) -> float:
        """Mean of the coefficient over the bounded interval [lo, hi]."""
        cuts = np.clip(np.concatenate(([lo], self.edges, [hi])), lo, hi)
        return float(np.sum(np.diff(cuts) * np.asarray(self.values)) / (hi - lo))


@dataclass(frozen=True)
class LayerConfig:
    neg_partition: PartitionSpec
    pos_partition: PartitionSpec
    neg_diffusivity: SequenceSpec
    pos_diffusivity: SequenceSpec
    alpha: float
    sigma2: CoefficientTable = CoefficientTable.constant(1.0)
    beta2: CoefficientTable = CoefficientTable.constant(0.0)
    name: str = "layered"

    def diffusivity(self, side: Side) -> SequenceSpec:
        return self.neg_diffusivity if side is Side.NEG else self.pos_diffusivity

    def limits(self) -> Tuple[float, float]:
        """(D, D̄) at the accumulation point."""
        return (self.neg_diffusivity.inner_tail.limit(),
                self.pos_diffusivity.inner_tail.limit())


@dataclass(frozen=True, eq=False)
class PsiMap:
    """Ψ(z) = ∫₀ᶻ ρ of the derived configuration: slope c_α√D_k on each layer."""
    z: np.ndarray
    x: np.ndarray
    range: Tuple[float, float]

    def _edge_slopes(self) -> Tuple[float, float]:
        return ((self.x[1] - self.x[0]) / (self.z[1] - self.z[0]),
                (self.x[-1] - self.x[-2]) / (self.z[-1] - self.z[-2]))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        left, right = self._edge_slopes()
        out = np.interp(z, self.z, self.x)
        out = np.where(z < self.z[0], self.x[0] + left * (z - self.z[0]), out)
        out = np.where(z > self.z[-1], self.x[-1] + right * (z - self.z[-1]), out)
        return np.clip(out, *self.range)

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < self.range[0]) | (x > self.range[1])):
            raise DomainError(f"{x} lies outside the range of Ψ {self.range}")
        left, right = self._edge_slopes()
        out = np.interp(x, self.x, self.z)
        out = np.where(x < self.x[0], self.z[0] + (x - self.x[0]) / left, out)
        return np.where(x > self.x[-1], self.z[-1] + (x - self.x[-1]) / right, out)


@dataclass(eq=False)
class LayeredModel:
    layer: LayerConfig
    config: SkewConfig
    sf: ScaleFunction
    psi: PsiMap
    sigma1: CoefficientTable
    c_alpha: float
    c_alpha_bar: float

    @property
    def effective_alpha(self) -> float:
        """Skew of Z at 0 implied by the derived densities."""
        return self.sf.alpha


@dataclass
class LayeredReport:
    name: str
    recurrent: Verdict
    positive_recurrent: Verdict
    psi_range: Tuple[float, float]
    negative: SeriesVerdict
    positive: SeriesVerdict
    note: str = ""


@dataclass(eq=False)
class LayeredEnsemble:
    """Joint (X, Y) paths; X = Ψ(Z)."""
    model: LayeredModel
    z: PathEnsemble
    y0: float

    @property
    def times(self) -> Optional[np.ndarray]:
        return self.z.times

    @property
    def x_terminal(self) -> np.ndarray:
        return self.model.psi(self.z.terminal)

    @property
    def y_terminal(self) -> np.ndarray:
        return self.z.extras["observed_terminal"]

    @property
    def x_paths(self) -> Optional[np.ndarray]:
        return None if self.z.paths is None else self.model.psi(self.z.paths)

    @property
    def y_paths(self) -> Optional[np.ndarray]:
        return self.z.extras.get("observed_paths")


class _LongitudinalIntegrator:
    """Y += σ₂(X)√dt·η + β₂(X)dt along one block, with a stream independent of X."""

    def __init__(self, model: LayeredModel, seed: int, block: int, lanes: int, y0: float):
        self.model = model
        self.rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(seed, spawn_key=(block, 1))))
        self.y = np.full(lanes, float(y0))

    def step(self, z: np.ndarray, active: np.ndarray, dt: float):
        x = self.model.psi(z)
        noise = self.rng.standard_normal(z.size)
        increment = self.model.layer.sigma2(x) * math.sqrt(dt) * noise \
            + self.model.layer.beta2(x) * dt
        self.y = self.y + np.where(active, increment, 0.0)

    def snapshot(self) -> np.ndarray:
        return self.y.copy()

    def results(self) -> Dict[str, np.ndarray]:
        return {"observed_terminal": self.y}


def _derive_density(diffusivity: SequenceSpec, scale: float) -> SequenceSpec:
    """γ_{k+1} = scale·√D_k on one side."""
    lo = min(diffusivity.window_lo + 1, 0)
    hi = max(diffusivity.window_hi + 1, 0)
    ks = np.arange(lo, hi + 1)
    values = scale * np.sqrt(diffusivity.at(ks - 1))
    # tail magnitude n of γ reads D at |k − 1|
    inner_shift, outer_shift = (-1.0, 1.0) if diffusivity.side is Side.NEG else (1.0, -1.0)
    return SequenceSpec(diffusivity.side, lo, hi, tuple(float(v) for v in values),
                        TailFamily.transformed(diffusivity.inner_tail, scale, 0.5, inner_shift),
                        TailFamily.transformed(diffusivity.outer_tail, scale, 0.5, outer_shift))


class LayeredPipeline:
    """Derives the skew configuration of a layered medium and checks its standing assumptions."""

    def __init__(self):
        self.build_stages = {
            'derive': self._derive,
            'check': self._check,
            'map': self._map,
        }

    def run(self, layer: LayerConfig) -> LayeredModel:
        logger.info(f"Starting layered build for: {layer.name}")
        if not 0 < layer.alpha < 1:
            raise DomainError(f"α must lie in (0, 1), got {layer.alpha}")
        state: Dict[str, object] = {"layer": layer}
        for name, stage in self.build_stages.items():
            logger.info(f"Running {name} stage...")
            state.update(stage(state))
        logger.info(f"Layered build complete for {layer.name}: Ψ range {state['psi'].range}")
        return LayeredModel(layer, state["config"], state["sf"], state["psi"],
                            state["sigma1"], state["c_alpha"], state["c_alpha_bar"])

    def _derive(self, state: Dict[str, object]) -> Dict[str, object]:
        layer: LayerConfig = state["layer"]
        d, dbar = layer.limits()
        if not (0 < d < math.inf and 0 < dbar < math.inf):
            raise PreconditionError(f"diffusivity limits must be positive and finite, "
                                    f"got D={d}, D̄={dbar}", {"D": d, "Dbar": dbar})
        c_alpha = layer.alpha / math.sqrt(d)
        c_alpha_bar = (1 - layer.alpha) / math.sqrt(dbar)
        config = SkewConfig(layer.neg_partition, layer.pos_partition,
                            _derive_density(layer.neg_diffusivity, c_alpha),
                            _derive_density(layer.pos_diffusivity, c_alpha_bar),
                            name=f"{layer.name}/Z")
        return {"config": config, "c_alpha": c_alpha, "c_alpha_bar": c_alpha_bar}

    def _check(self, state: Dict[str, object]) -> Dict[str, object]:
        config: SkewConfig = state["config"]
        verdicts = {
            's0': classification_pipeline._condition_s0(config, K_MAX),
            's1': classification_pipeline._condition_s1(config, K_MAX),
            'conservative': classification_pipeline._condition_conservative(config, 1, K_MAX),
        }
        failed = [name for name in STANDING if verdicts[name].verdict != Verdict.TRUE]
        if failed:
            evidence = {name: verdicts[name].verdict.value for name in STANDING}
            raise PreconditionError(f"standing assumptions fail for {config.name}: "
                                    f"{', '.join(failed)}", evidence)
        return {"sf": build_scale(config)}

    def _map(self, state: Dict[str, object]) -> Dict[str, object]:
        config: SkewConfig = state["config"]
        sf: ScaleFunction = state["sf"]
        left = classification_pipeline.mass_side(config, Side.NEG)
        right = classification_pipeline.mass_side(config, Side.POS)
        bounds = (-left.value if left.converges else -math.inf,
                  right.value if right.converges else math.inf)
        psi = PsiMap(sf.positions, sf.masses, bounds)
        rhos = sf.rhos[:-1]
        sigma1 = CoefficientTable(tuple(float(v) for v in sf.masses),
                                  tuple(float(v) for v in np.concatenate(
                                      ([rhos[0]], rhos, [rhos[-1]]))))
        return {"psi": psi, "sigma1": sigma1}


# Singleton instance
layered_pipeline = LayeredPipeline()


def build_layered(layer: LayerConfig) -> LayeredModel:
    """Public API for layered-medium construction."""
    return layered_pipeline.run(layer)


def drift_table(model: LayeredModel, count: int = 10) -> pd.DataFrame:
    """Interface coefficients at l_k and r_k for |k| <= count, plus the one at 0."""
    rows = []
    for side in Side:
        view = model.config.view(side)
        diffusivity = model.layer.diffusivity(side)
        for k in range(-count, count + 1):
            d_here, d_prev = diffusivity.value(k), diffusivity.value(k - 1)
            root_here, root_prev = math.sqrt(d_here), math.sqrt(d_prev)
            position = float(view.position([k])[0])
            rows.append({"side": side.value, "k": int(k), "z": position,
                         "x": float(model.psi(position)),
                         "alpha_k": root_here / (root_here + root_prev),
                         "z_drift": (root_here - root_prev) / (root_here + root_prev),
                         "x_drift": (d_here - d_prev) / (d_here + d_prev)})
    d, dbar = model.layer.limits()
    rows.append({"side": "zero", "k": 0, "z": 0.0, "x": 0.0,
                 "alpha_k": model.effective_alpha,
                 "z_drift": 2 * model.effective_alpha - 1,
                 "x_drift": (dbar - d) / (dbar + d)})
    return pd.DataFrame(rows).sort_values("z", ignore_index=True)


def layer_alphas(layer: LayerConfig, side: Side, ks) -> np.ndarray:
    """α_k = √D_k/(√D_k + √D_{k−1})."""
    diffusivity = layer.diffusivity(side)
    ks = np.asarray(ks, dtype=np.int64)
    here, prev = np.sqrt(diffusivity.at(ks)), np.sqrt(diffusivity.at(ks - 1))
    return here / (here + prev)


def derived_alphas(model: LayeredModel):
    """α_k of the derived configuration, for comparison with layer_alphas."""
    return alphas_from_gammas(model.config)


def classify_layered(model: LayeredModel) -> LayeredReport:
    """Recurrence of X from ∑ΔΨ/D per side, positive recurrence from the Ψ range."""
    logger.info(f"Starting layered classification for: {model.layer.name}")
    verdicts = {}
    for side, c in ((Side.NEG, model.c_alpha), (Side.POS, model.c_alpha_bar)):
        # ΔΨ_k/D_k = c²·Δ_k/γ_{k+1}
        verdict = classification_pipeline.recurrence_side(model.config, side)
        verdict.value *= c * c
        verdict.error_bound *= c * c
        verdicts[side] = verdict
    left, right = verdicts[Side.NEG], verdicts[Side.POS]
    recurrent = classification_pipeline._both_diverge(right, left)
    lo, hi = model.psi.range
    bounded = math.isfinite(lo) and math.isfinite(hi)
    if recurrent == Verdict.FALSE:
        positive, note = Verdict.FALSE, "not recurrent"
    elif recurrent == Verdict.UNKNOWN:
        positive, note = Verdict.UNKNOWN, "recurrence undecided"
    elif bounded:
        positive, note = Verdict.TRUE, f"invariant law uniform on [{lo!r}, {hi!r}]"
    else:
        positive, note = Verdict.FALSE, "unbounded range: null recurrent"
    logger.info(f"Layered classification complete: recurrent={recurrent.value}, "
                f"positive={positive.value}")
    return LayeredReport(model.layer.name, recurrent, positive, (lo, hi), left, right, note)


@dataclass(frozen=True, eq=False)
class LayeredScale:
    """h̄ of X: slopes 1/(c_α²D_k) and 1/(c̄_α²D̄_k)."""
    positions: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.positions, self.values)


def layered_scale(model: LayeredModel) -> LayeredScale:
    """h̄ = h∘Ψ⁻¹ normalised by κ."""
    return LayeredScale(model.psi(model.sf.positions), model.sf.hvals / model.sf.kappa)


def layered_hitting_prob(model: LayeredModel, x: float, a: float, b: float) -> float:
    """P_x(X reaches b before a) from h̄."""
    if not a <= x <= b or not a < b:
        raise DomainError(f"need a <= x <= b and a < b, got x={x}, a={a}, b={b}")
    scale = layered_scale(model)
    ha, hb, hx = (float(scale(v)) for v in (a, b, x))
    return (hx - ha) / (hb - ha)


def mc_layered_hitting(model: LayeredModel, x: float, a: float, b: float, n_paths: int,
                       seed: int, **kwargs) -> MCEstimate:
    """Monte Carlo counterpart of layered_hitting_prob, simulated in Z coordinates."""
    za, zb, zx = (float(model.psi.inverse(v)) for v in (a, b, x))
    estimate = mc_hitting(model.config, model.sf, zx, za, zb, n_paths, seed, **kwargs)
    estimate.analytic_target = layered_hitting_prob(model, x, a, b)
    logger.debug(f"Z-space target {hitting_prob_upper(model.sf, zx, za, zb):.6g}")
    return estimate


def _z_censor_interval(model: LayeredModel, plan: SimPlan, z0: float) -> Tuple[float, float]:
    """Z bounds equivalent to |X| < x_max; a side Ψ never reaches keeps the default Z radius."""
    x_max = plan.censor_radius
    lo, hi = model.psi.range
    default = 1e3 * (1 + abs(z0))
    z_lo = float(model.psi.inverse(-x_max)) if -x_max > lo else -default
    z_hi = float(model.psi.inverse(x_max)) if x_max < hi else default
    return z_lo, z_hi


def simulate_xy(model: LayeredModel, plan: SimPlan, y0: float = 0.0) -> LayeredEnsemble:
    """Joint paths: plan.x0 is the starting X; Z is simulated and mapped through Ψ."""
    plan.validate()
    if plan.barriers is not None:
        raise PlanError("barriers are not supported for joint simulation")
    z0 = float(model.psi.inverse(plan.x0))
    z_plan = replace(plan, x0=z0, x_max=None,
                     censor_interval=_z_censor_interval(model, plan, z0))

    def observer_factory(block: int, lanes: int) -> _LongitudinalIntegrator:
        return _LongitudinalIntegrator(model, plan.seed, block, lanes, y0)

    ensemble = simulate_path(model.config, model.sf, z_plan, observer_factory)
    return LayeredEnsemble(model, ensemble, y0)


def dispersion_stats(ensemble: LayeredEnsemble, times=None) -> pd.DataFrame:
    """Ensemble mean and variance of Y_t with standard errors."""
    if ensemble.y_paths is None:
        raise ValueError("dispersion needs an ensemble recorded with full paths")
    grid = ensemble.times
    idx = np.arange(grid.size) if times is None else \
        np.clip(np.searchsorted(grid, np.asarray(times, dtype=float) - 1e-12), 0, grid.size - 1)
    ys = ensemble.y_paths[:, idx]
    n = ys.shape[0]
    mean = ys.mean(axis=0)
    if n > 1:
        var = ys.var(axis=0, ddof=1)
        squared = (ys - mean) ** 2
        se_var = squared.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        var = np.zeros(idx.size)
        se_var = np.zeros(idx.size)
    return pd.DataFrame({"t": grid[idx], "mean": mean, "var": var,
                         "se_mean": np.sqrt(var / n), "se_var": se_var})
