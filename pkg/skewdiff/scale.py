"""
Scale Module: scale function h, Feller's Φ, speed measure and closed-form functionals.

h is piecewise linear with slope κ/ρ on every segment, where κ = αγ = (1−α)γ̄, so
that h′ → α from the left of 0 and h′ → 1−α from the right. The breakpoint table
is explicit between an inner cutoff (where slopes have settled to their limits) and
an outer cutoff; inside the inner cutoff h is closed by the linear piece through 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate

from .classifier import classification_pipeline, feller_series
from .config import Side, SideView, SkewConfig, effective_alpha
from .errors import BoundaryRangeError, DomainError, OutOfDomainError, ScaleUnavailableError
from .series import SeriesVerdict, combine

logger = logging.getLogger(__name__)

INNER_CUT_TOL = 1e-13
INNER_CUT_CAP = 2**16
OUTER_REACH = 1e4
OUTER_CAP = 2**20
EDGE_REACH = "reach"
EDGE_RESOLUTION = "resolution"
EDGE_OVERFLOW = "overflow"
EDGE_CAP = "segment cap"
H_CAP = 1e100
INFINITE_MASS = "infinite mass"
NO_SCALE = "scale function does not exist as bounded-variation derivative"


@dataclass(frozen=True)
class ScaleOptions:
    reach: float = OUTER_REACH
    inner_tol: float = INNER_CUT_TOL
    outer_cap: int = OUTER_CAP


@dataclass(frozen=True, eq=False)
class ScaleFunction:
    """Breakpoint table of h, Φ and ∫₀ˣρ, ascending in x and containing 0.

    rhos[i] is the density on (positions[i], positions[i+1]); the last entry is nan.
    """
    config: SkewConfig
    alpha: float
    limits: Tuple[float, float]
    positions: np.ndarray
    hvals: np.ndarray
    phivals: np.ndarray
    masses: np.ndarray
    rhos: np.ndarray
    inner_bounds: Tuple[float, float]
    h_limits: Tuple[float, float]
    inner_cut: Tuple[float, float]
    last_segments: Tuple[int, int]
    edge_reasons: Tuple[str, str]

    @property
    def kappa(self) -> float:
        return self.alpha * self.limits[0]

    @property
    def slopes(self) -> np.ndarray:
        return self.kappa / self.rhos

    @property
    def table_edges(self) -> Tuple[float, float]:
        return float(self.positions[0]), float(self.positions[-1])


@dataclass
class _SideTable:
    magnitudes: np.ndarray
    h: np.ndarray
    phi: np.ndarray
    mass: np.ndarray
    rho: np.ndarray  # rho[j] on (magnitudes[j-1], magnitudes[j]); rho[0] is the closure
    bound: float
    last_segment: int
    edge_reason: str


@dataclass
class SpeedDensity:
    """Speed measure density 2/h′."""
    sf: ScaleFunction

    def __call__(self, x: float) -> float:
        return 2.0 / h_prime(self.sf, x)


@dataclass
class InvariantDistribution:
    """Normalized ρ dx: CDF table with linear interpolation between breakpoints."""
    mass: float
    left_mass: float
    error_bound: float
    positions: np.ndarray
    cdf_values: np.ndarray
    rhos: np.ndarray

    def cdf(self, x):
        return np.interp(x, self.positions, self.cdf_values, left=0.0, right=1.0)

    def ppf(self, u):
        return np.interp(u, self.cdf_values, self.positions)

    def density(self, x):
        idx = np.clip(np.searchsorted(self.positions, x, side="right") - 1, 0,
                      self.positions.size - 2)
        return self.rhos[idx] / self.mass

    def bin_probabilities(self, edges: np.ndarray) -> np.ndarray:
        return np.diff(self.cdf(np.asarray(edges, dtype=float)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.ppf(rng.random(size))


# construction


def _inner_cut(view: SideView, slope_limit: float, kappa: float, tol: float) -> Tuple[int, float]:
    ks = view.inner_ks(INNER_CUT_CAP)
    deviation = view.inner_end(ks) * np.abs(kappa / view.seg_density(ks) - slope_limit)
    hits = np.flatnonzero(deviation < tol)
    if hits.size:
        return int(ks[hits[0]]), float(deviation[hits[0]])
    logger.warning(f"Inner cutoff on {view.side.value} side capped; deviation "
                   f"{deviation[-1]:.3e}")
    return int(ks[-1]), float(deviation[-1])


def _side_table(view: SideView, kappa: float, gamma_limit: float,
                options: ScaleOptions) -> _SideTable:
    slope_limit = kappa / gamma_limit
    cut, deviation = _inner_cut(view, slope_limit, kappa, options.inner_tol)
    closure_start = cut + view.inward
    h_c, h_bound = view.inner_weighted_sum(lambda ks: kappa / view.seg_density(ks), slope_limit,
                                           start=closure_start)
    i_c, _ = view.inner_weighted_sum(view.seg_density, gamma_limit, start=closure_start)
    u_c = float(view.inner_end([cut])[0])

    count = 4096
    while True:
        count = min(count, options.outer_cap)
        ks = view.outer_ks(count, cut)
        length = np.abs(view.lengths(ks))
        dens = view.seg_density(ks)
        with np.errstate(over="ignore", divide="ignore"):
            h = h_c + np.cumsum(kappa / dens * length)
        ends = view.outer_end(ks)
        stops = {}
        reached = np.flatnonzero(ends >= options.reach)
        if reached.size:
            stops[EDGE_REACH] = int(reached[0]) + 1
        capped = np.flatnonzero(~np.isfinite(h) | (h > H_CAP))
        if capped.size:
            stops[EDGE_OVERFLOW] = max(int(capped[0]), 1)
        # h must stay strictly increasing in floating point to be invertible
        flat = np.flatnonzero(np.diff(np.concatenate(([h_c], h))) <= 0)
        if flat.size:
            stops[EDGE_RESOLUTION] = max(int(flat[0]), 1)
        if stops:
            reason, stop = min(stops.items(), key=lambda item: item[1])
            break
        if count >= options.outer_cap:
            reason, stop = EDGE_CAP, count
            break
        count *= 4

    length, dens, h, ends, ks = length[:stop], dens[:stop], h[:stop], ends[:stop], ks[:stop]
    mass = i_c + np.cumsum(dens * length)
    mass_before = np.concatenate(([i_c], mass[:-1]))
    phi_c = 0.5 * u_c ** 2
    phi = phi_c + np.cumsum(0.5 * length ** 2 + length * mass_before / dens)
    logger.debug(f"{view.side.value} table: cut k={cut} at {u_c:.3e}, {stop} segments to "
                 f"{ends[-1]:.6g} ({reason})")
    return _SideTable(
        magnitudes=np.concatenate(([u_c], ends)),
        h=np.concatenate(([h_c], h)),
        phi=np.concatenate(([phi_c], phi)),
        mass=np.concatenate(([i_c], mass)),
        rho=np.concatenate(([gamma_limit], dens)),
        bound=deviation + h_bound,
        last_segment=int(ks[-1]),
        edge_reason=reason,
    )


class ScalePipeline:
    """Builds scale functions and answers the tabulated queries."""

    def __init__(self):
        self.queries = {
            'eval': self._query_eval,
            'hitting': self._query_hitting,
            'phi': self._query_phi,
            'exit': self._query_exit,
            'invariant': self._query_invariant,
        }

    def build(self, config: SkewConfig, options: Optional[ScaleOptions] = None) -> ScaleFunction:
        options = options or ScaleOptions()
        logger.info(f"Building scale function for config: {config.name}")
        for kind in ('s0', 's1'):
            verdict = combine(classification_pipeline.pair_series(config, Side.NEG, kind),
                              classification_pipeline.pair_series(config, Side.POS, kind))
            if not verdict.converges:
                raise ScaleUnavailableError(f"{NO_SCALE} ({kind} {verdict.status.value})")
        gamma, gammabar = config.finite_limits()
        if not (gamma > 0 and gammabar > 0):
            raise ScaleUnavailableError(f"{NO_SCALE} (density limits {gamma}, {gammabar})")
        alpha = effective_alpha(config)
        kappa = alpha * gamma

        tables = {}
        h_limits = {}
        for side, limit in ((Side.NEG, gamma), (Side.POS, gammabar)):
            recurrence = classification_pipeline.recurrence_side(config, side)
            if recurrence.diverges:
                h_limits[side] = math.inf
            elif recurrence.converges:
                h_limits[side] = kappa * recurrence.value
            else:
                h_limits[side] = math.nan
                logger.warning(f"h limit on {side.value} side undecided: {recurrence.note}")
            tables[side] = _side_table(config.view(side), kappa, limit, options)
            if math.isfinite(h_limits[side]):
                h_limits[side] = max(h_limits[side], float(tables[side].h[-1]))
            if tables[side].bound > 1e-12:
                logger.warning(f"Inner truncation bound {tables[side].bound:.3e} on "
                               f"{side.value} side")

        left, right = tables[Side.NEG], tables[Side.POS]
        sf = ScaleFunction(
            config=config,
            alpha=alpha,
            limits=(gamma, gammabar),
            positions=np.concatenate((-left.magnitudes[::-1], [0.0], right.magnitudes)),
            hvals=np.concatenate((-left.h[::-1], [0.0], right.h)),
            phivals=np.concatenate((left.phi[::-1], [0.0], right.phi)),
            masses=np.concatenate((-left.mass[::-1], [0.0], right.mass)),
            rhos=np.concatenate((left.rho[::-1], [right.rho[0]], right.rho[1:], [np.nan])),
            inner_bounds=(left.bound, right.bound),
            h_limits=(-h_limits[Side.NEG], h_limits[Side.POS]),
            inner_cut=(-float(left.magnitudes[0]), float(right.magnitudes[0])),
            last_segments=(left.last_segment, right.last_segment),
            edge_reasons=(left.edge_reason, right.edge_reason),
        )
        logger.info(f"Scale function built: {sf.positions.size} breakpoints, "
                    f"h(±∞) = {sf.h_limits}")
        return sf

    def run(self, sf: ScaleFunction, query: str, args: List[float]) -> pd.DataFrame:
        """Execute one tabulated query."""
        logger.info(f"Running scale query: {query}")
        if query not in self.queries:
            raise ValueError(f"Unknown query: {query}")
        return self.queries[query](sf, args)

    def _query_eval(self, sf: ScaleFunction, args: List[float]) -> pd.DataFrame:
        return scale_table_frame(sf, args)

    def _query_phi(self, sf: ScaleFunction, args: List[float]) -> pd.DataFrame:
        return phi_table_frame(sf, args)

    def _query_hitting(self, sf: ScaleFunction, args: List[float]) -> pd.DataFrame:
        x, a, b = args
        return pd.DataFrame([{"x": x, "a": a, "b": b,
                              "p_lower_first": hitting_prob(sf, x, a, b),
                              "p_upper_first": hitting_prob_upper(sf, x, a, b)}])

    def _query_exit(self, sf: ScaleFunction, args: List[float]) -> pd.DataFrame:
        x, a, b = args
        return pd.DataFrame([{"x": x, "a": a, "b": b,
                              "mean_exit_time": mean_exit_time(sf, x, a, b)}])

    def _query_invariant(self, sf: ScaleFunction, args: List[float]) -> pd.DataFrame:
        _, dist = speed_and_invariant(sf.config, sf)
        if dist == INFINITE_MASS:
            return pd.DataFrame([{"x": np.nan, "cdf": np.nan, "note": INFINITE_MASS}])
        xs = args if args else list(np.linspace(dist.ppf(0.001), dist.ppf(0.999), 101))
        return cdf_table_frame(dist, xs)


# Singleton instance
scale_pipeline = ScalePipeline()


def build_scale(config: SkewConfig, options: Optional[ScaleOptions] = None) -> ScaleFunction:
    """Public API for scale-function construction."""
    return scale_pipeline.build(config, options)


# evaluators


def _out_of_table(sf: ScaleFunction, what: str) -> OutOfDomainError:
    lo, hi = sf.table_edges
    return OutOfDomainError(f"{what} is tabulated on [{lo:.6g}, {hi:.6g}] only; rebuild with a "
                            f"larger ScaleOptions.reach", (lo, hi))


def h_eval(sf: ScaleFunction, x):
    """h(x) on the table; beyond an edge where h has resolved to h(±∞), that limit."""
    x = np.asarray(x, dtype=float)
    lo, hi = sf.table_edges
    out = np.interp(x, sf.positions, sf.hvals)
    for outside, reason, limit in ((x < lo, sf.edge_reasons[0], sf.h_limits[0]),
                                   (x > hi, sf.edge_reasons[1], sf.h_limits[1])):
        if not np.any(outside):
            continue
        if reason != EDGE_RESOLUTION:
            raise _out_of_table(sf, "h")
        out = np.where(outside, limit, out)
    return float(out) if out.ndim == 0 else out


def h_inverse(sf: ScaleFunction, y):
    """Inverse of h on the open range (h(−∞), h(+∞))."""
    y = np.asarray(y, dtype=float)
    h_minus, h_plus = sf.h_limits
    if np.any(y <= h_minus) or np.any(y >= h_plus):
        raise BoundaryRangeError(f"value outside (h(-inf), h(+inf)) = ({h_minus}, {h_plus})",
                                 h_minus, h_plus)
    if np.any(y < sf.hvals[0]) or np.any(y > sf.hvals[-1]):
        raise OutOfDomainError(f"value outside the tabulated range "
                               f"[{sf.hvals[0]:.6g}, {sf.hvals[-1]:.6g}]", sf.table_edges)
    out = np.interp(y, sf.hvals, sf.positions)
    return float(out) if out.ndim == 0 else out


def h_prime(sf: ScaleFunction, x: float) -> float:
    """Symmetric derivative: one-sided slope inside segments, the average at breakpoints."""
    loc = sf.config.locate(x)
    if loc.at_zero:
        return 0.5
    spec = sf.config.density(loc.side)
    right = sf.kappa / spec.value(loc.k + 1)
    if loc.at_breakpoint:
        return 0.5 * (right + sf.kappa / spec.value(loc.k))
    return right


def phi_eval(sf: ScaleFunction, x: float) -> float:
    """Φ(x) = ∫₀ˣ (h(x)−h(y))/h′(y) dy from the tabulated recursion."""
    if sf.inner_cut[0] <= x <= sf.inner_cut[1]:
        return 0.5 * x * x
    lo, hi = sf.table_edges
    if not lo <= x <= hi:
        raise _out_of_table(sf, "Φ")
    positions = sf.positions
    if x > 0:
        idx = int(np.searchsorted(positions, x, side="right")) - 1
        rho = sf.rhos[idx] if idx < positions.size - 1 else sf.rhos[-2]
        d = x - positions[idx]
    else:
        idx = int(np.searchsorted(positions, x, side="left"))
        rho = sf.rhos[idx - 1] if idx > 0 else sf.rhos[0]
        d = positions[idx] - x
    return float(sf.phivals[idx] + d * abs(sf.masses[idx]) / rho + 0.5 * d * d)


class _RadialDerivative:
    """t ↦ h′(sign·t) for 0 ≤ t ≤ |x|, located once per tabulated segment.

    Below the first tabulated breakpoint the derivative is looked up pointwise.
    """

    def __init__(self, sf: ScaleFunction, x: float):
        self.sf = sf
        self.sign = 1.0 if x > 0 else -1.0
        magnitudes = np.abs(sf.positions[self.sign * sf.positions > 0])
        inside = np.sort(magnitudes[magnitudes < abs(x)])
        self.nodes = np.concatenate(([0.0], inside, [abs(x)]))
        mids = 0.5 * (self.nodes[1:-1] + self.nodes[2:])
        self.slopes = np.array([h_prime(sf, self.sign * m) for m in mids])

    @property
    def segments(self) -> List[Tuple[float, float]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))

    def __call__(self, t: float) -> float:
        i = int(np.searchsorted(self.nodes, t, side="right")) - 2
        if 0 <= i < self.slopes.size:
            return float(self.slopes[i])
        return h_prime(self.sf, self.sign * t)


def _quad(f, a: float, b: float) -> float:
    value, _ = integrate.quad(f, a, b, limit=200, epsabs=1e-14, epsrel=1e-13)
    return float(value)


def phi_quadrature(sf: ScaleFunction, x: float, method: str = "single") -> float:
    """Adaptive quadrature of Φ, segment by segment: the single defining integral
    ∫₀ˣ (h(x)−h(y))/h′(y) dy or the double form ∫₀ˣ h′(z) ∫₀ᶻ 1/h′(y) dy dz."""
    if method not in ("single", "double"):
        raise ValueError(f"Unknown method: {method}")
    if x == 0:
        return 0.0
    deriv = _RadialDerivative(sf, x)
    if method == "single":
        hx = h_eval(sf, x)
        return sum(_quad(lambda t: abs(hx - h_eval(sf, deriv.sign * t)) / deriv(t), a, b)
                   for a, b in deriv.segments)

    def reciprocal(t: float) -> float:
        return 1.0 / deriv(t)

    cumulative = np.concatenate(([0.0], np.cumsum([_quad(reciprocal, a, b)
                                                   for a, b in deriv.segments])))

    def inner(t: float) -> float:
        i = min(int(np.searchsorted(deriv.nodes, t, side="right")) - 1, deriv.nodes.size - 2)
        return float(cumulative[i]) + _quad(reciprocal, deriv.nodes[i], t)

    return sum(_quad(lambda t: deriv(t) * inner(t), a, b) for a, b in deriv.segments)


def phi_limit_verdicts(sf: ScaleFunction) -> Tuple[SeriesVerdict, SeriesVerdict]:
    """(Φ(−∞), Φ(+∞)) series verdicts; Diverges means the boundary is inaccessible."""
    out = []
    for side, idx in ((Side.NEG, 0), (Side.POS, -1)):
        view = sf.config.view(side)
        last = sf.last_segments[0 if side is Side.NEG else 1]
        out.append(feller_series(view, last + view.outward, squares=True,
                                 base_mass=abs(float(sf.masses[idx])),
                                 head=float(sf.phivals[idx])))
    return out[0], out[1]


def h_limits(sf: ScaleFunction) -> Tuple[float, float]:
    """(h(−∞), h(+∞)); infinite on recurrent sides."""
    return sf.h_limits


def _check_interval(x: float, a: float, b: float):
    if not a < b:
        raise DomainError(f"need a < b, got a={a}, b={b}")
    if not a <= x <= b:
        raise DomainError(f"need a <= x <= b, got x={x}")


def hitting_prob(sf: ScaleFunction, x: float, a: float, b: float) -> float:
    """P_x(D_a < D_b) = (h(b)−h(x))/(h(b)−h(a))."""
    _check_interval(x, a, b)
    ha, hb, hx = h_eval(sf, a), h_eval(sf, b), h_eval(sf, x)
    return float(min(1.0, max(0.0, (hb - hx) / (hb - ha))))


def hitting_prob_upper(sf: ScaleFunction, x: float, a: float, b: float) -> float:
    """P_x(D_b < D_a) = (h(x)−h(a))/(h(b)−h(a))."""
    _check_interval(x, a, b)
    ha, hb, hx = h_eval(sf, a), h_eval(sf, b), h_eval(sf, x)
    return float(min(1.0, max(0.0, (hx - ha) / (hb - ha))))


def mean_exit_time(sf: ScaleFunction, x: float, a: float, b: float) -> float:
    """E_x[D_a ∧ D_b] = ∫ G(x,y)·2/h′(y) dy, integrated exactly segment by segment."""
    _check_interval(x, a, b)
    if x in (a, b):
        return 0.0
    inside = sf.positions[(sf.positions > a) & (sf.positions < b)]
    grid = np.unique(np.concatenate((inside, [a, x, b])))
    h = h_eval(sf, grid)
    ha, hb, hx = h[0], h[-1], h_eval(sf, x)
    total = hb - ha
    u, v = grid[:-1], grid[1:]
    hu, hv = h[:-1], h[1:]
    width = v - u
    s = (hv - hu) / width
    left = v <= x
    lower = (2 / s) * ((hu - ha) * width + s * width ** 2 / 2)
    upper = (2 / s) * ((hb - hu) * width - s * width ** 2 / 2)
    value = np.sum(lower[left]) * (hb - hx) + np.sum(upper[~left]) * (hx - ha)
    return float(value / total)


def speed_and_invariant(config: SkewConfig, sf: ScaleFunction
                        ) -> Tuple[SpeedDensity, Union[InvariantDistribution, str]]:
    """Speed density 2/h′ and the normalized invariant law, or the infinite-mass marker."""
    speed = SpeedDensity(sf)
    left = classification_pipeline.mass_side(config, Side.NEG)
    right = classification_pipeline.mass_side(config, Side.POS)
    if not (left.converges and right.converges):
        logger.info(f"Invariant measure of {config.name} has infinite mass")
        return speed, INFINITE_MASS
    mass = left.value + right.value
    cdf_values = (left.value + sf.masses) / mass
    dist = InvariantDistribution(mass=mass, left_mass=left.value,
                                 error_bound=left.error_bound + right.error_bound,
                                 positions=sf.positions, cdf_values=cdf_values, rhos=sf.rhos)
    return speed, dist


# tabular emitters


def scale_table_frame(sf: ScaleFunction, xs) -> pd.DataFrame:
    xs = np.sort(np.asarray(xs, dtype=float))
    return pd.DataFrame({"x": xs, "h": h_eval(sf, xs),
                         "h_prime": [h_prime(sf, float(x)) for x in xs]})


def phi_table_frame(sf: ScaleFunction, xs) -> pd.DataFrame:
    xs = np.sort(np.asarray(xs, dtype=float))
    return pd.DataFrame({"x": xs, "phi": [phi_eval(sf, float(x)) for x in xs]})


def cdf_table_frame(dist: InvariantDistribution, xs) -> pd.DataFrame:
    xs = np.sort(np.asarray(xs, dtype=float))
    return pd.DataFrame({"x": xs, "cdf": dist.cdf(xs), "density": dist.density(xs)})
