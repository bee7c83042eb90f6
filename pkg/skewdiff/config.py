"""
Config Module: partitions, densities and the symmetric density ρ̃.

A SkewConfig holds four two-sided sequences: the breakpoints l_k < 0 and r_k > 0
accumulating at 0, and the densities γ_k, γ̄_k with ρ = γ_{k+1} on (l_k, l_{k+1})
and ρ = γ̄_{k+1} on (r_k, r_{k+1}). Each sequence is an explicit window plus one
tail family per direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import DegeneratePointError, DomainError, UndefinedValueError
from .tails import TailFamily, TailKind

logger = logging.getLogger(__name__)

AGREEMENT_RTOL = 1e-12
SAMPLE_SIZE = 1000
INNER_SUM_TOL = 1e-13
INNER_SUM_CAP = 2**22
_CHUNK = 1024
_SEARCH_CAP = 2**50


class Side(str, Enum):
    NEG = "negative"
    POS = "positive"

    @property
    def sign(self) -> int:
        return -1 if self is Side.NEG else 1

    @property
    def inward(self) -> int:
        """Index step that moves segments toward 0."""
        return 1 if self is Side.NEG else -1


@dataclass(frozen=True)
class SequenceSpec:
    """Explicit values on [window_lo, window_hi] plus inner and outer tail families."""

    side: Side
    window_lo: int
    window_hi: int
    values: Tuple[float, ...]
    inner_tail: TailFamily
    outer_tail: TailFamily

    @property
    def upper_tail(self) -> TailFamily:
        return self.inner_tail if self.side is Side.NEG else self.outer_tail

    @property
    def lower_tail(self) -> TailFamily:
        return self.outer_tail if self.side is Side.NEG else self.inner_tail

    @property
    def inner_edge(self) -> int:
        return self.window_hi if self.side is Side.NEG else self.window_lo

    @property
    def outer_edge(self) -> int:
        return self.window_lo if self.side is Side.NEG else self.window_hi

    def _tail_sign(self) -> int:
        return 1

    def at(self, ks) -> np.ndarray:
        """Sequence values at integer indices ks."""
        ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
        out = np.empty(ks.shape, dtype=float)
        explicit = np.asarray(self.values, dtype=float)
        window = (ks >= self.window_lo) & (ks <= self.window_hi)
        out[window] = explicit[ks[window] - self.window_lo]
        upper = ks > self.window_hi
        if upper.any():
            out[upper] = self._tail_sign() * self.upper_tail.values(np.abs(ks[upper]))
        lower = ks < self.window_lo
        if lower.any():
            out[lower] = self._tail_sign() * self.lower_tail.values(np.abs(ks[lower]))
        return out

    def value(self, k: int) -> float:
        return float(self.at([k])[0])


@dataclass(frozen=True)
class PartitionSpec(SequenceSpec):
    """Breakpoint positions; explicit values are signed, tails give magnitudes."""

    def _tail_sign(self) -> int:
        return self.side.sign


@dataclass
class Violation:
    code: str
    message: str
    index: Optional[int] = None


@dataclass
class ValidationReport:
    """Violated invariants of a configuration; empty when valid."""

    violations: List[Violation] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, index: Optional[int] = None):
        self.violations.append(Violation(code, message, index))

    @property
    def messages(self) -> List[str]:
        return [v.message for v in self.violations]


@dataclass(frozen=True)
class Location:
    """Where a point sits: segment (p_k, p_{k+1}) of a side, on p_k, or at 0."""

    side: Optional[Side]
    k: Optional[int]
    at_breakpoint: bool = False

    @property
    def at_zero(self) -> bool:
        return self.side is None


@dataclass
class AlphaProfile:
    """Per-index skew parameters and the effective α at 0."""

    neg: pd.Series
    pos: pd.Series
    effective_alpha: Optional[float]
    note: str = ""


class SideView:
    """Segments of one half-line: segment k is (p_k, p_{k+1}) carrying γ_{k+1}."""

    def __init__(self, config: "SkewConfig", side: Side):
        self.side = side
        self.partition = config.partition(side)
        self.density = config.density(side)
        part, dens = self.partition, self.density
        if side is Side.NEG:
            self.k_inner = max(part.window_hi, dens.window_hi - 1)
            self.k_outer = min(part.window_lo - 1, dens.window_lo - 1)
        else:
            self.k_inner = min(part.window_lo - 1, dens.window_lo - 1)
            self.k_outer = max(part.window_hi, dens.window_hi - 1)

    @property
    def inward(self) -> int:
        return self.side.inward

    @property
    def outward(self) -> int:
        return -self.side.inward

    def position(self, ks) -> np.ndarray:
        return self.partition.at(ks)

    def gamma(self, ks) -> np.ndarray:
        return self.density.at(ks)

    def lengths(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        return self.partition.at(ks + 1) - self.partition.at(ks)

    def seg_density(self, ks) -> np.ndarray:
        return self.density.at(np.asarray(ks, dtype=np.int64) + 1)

    def inner_end(self, ks) -> np.ndarray:
        """|position| of the end of segment k closer to 0."""
        ks = np.asarray(ks, dtype=np.int64)
        ends = ks + 1 if self.side is Side.NEG else ks
        return np.abs(self.partition.at(ends))

    def outer_end(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        ends = ks if self.side is Side.NEG else ks + 1
        return np.abs(self.partition.at(ends))

    def inner_ks(self, count: int, start: Optional[int] = None) -> np.ndarray:
        start = self.k_inner if start is None else start
        return start + self.inward * np.arange(count, dtype=np.int64)

    def outer_ks(self, count: int, start: Optional[int] = None) -> np.ndarray:
        start = self.k_outer if start is None else start
        return start + self.outward * np.arange(count, dtype=np.int64)

    def middle_ks(self) -> np.ndarray:
        """Segments strictly between the pure tails, ordered outward from 0."""
        count = abs(self.k_inner - self.k_outer) - 1
        if count <= 0:
            return np.array([], dtype=np.int64)
        return self.k_inner + self.outward * np.arange(1, count + 1, dtype=np.int64)

    def inner_weighted_sum(self, weights: Callable[[np.ndarray], np.ndarray], limit: float,
                           start: Optional[int] = None,
                           tol: float = INNER_SUM_TOL) -> Tuple[float, float]:
        """∑ w_k·|Δ_k| over segment `start` and everything inward of it.

        Summation runs in chunks toward 0; the untouched mass near 0 is closed with
        limit·(remaining length). Returns (value, error bound of the closure).
        """
        start = self.k_inner if start is None else start
        total = 0.0
        done = 0
        chunk = _CHUNK
        bound = math.inf
        while done < INNER_SUM_CAP:
            ks = self.inner_ks(chunk, start + self.inward * done)
            w = weights(ks)
            total += float(np.sum(w * np.abs(self.lengths(ks))))
            done += chunk
            remaining = float(self.inner_end(ks[-1:])[0])
            if remaining == 0.0:
                return total, 0.0
            bound = abs(float(w[-1]) - limit) * remaining
            if bound < tol:
                return total + limit * remaining, bound
            chunk = min(chunk * 2, INNER_SUM_CAP - done) or 1
        logger.warning(f"Inner sum on {self.side.value} side capped; closure bound {bound:.3e}")
        return total + limit * remaining, bound

    def locate(self, x: float) -> Location:
        """Segment k with p_k <= x < p_{k+1}; x must lie on this side."""
        if self.side.sign * x <= 0:
            raise DomainError(f"{x} is not on the {self.side.value} side")

        def below(k: int) -> bool:
            return self.partition.value(k) <= x

        k = self.partition.window_lo
        if below(k):
            step = 1
            while below(k + step):
                step *= 2
                if step > _SEARCH_CAP:
                    raise DomainError(f"Cannot resolve segment for {x}")
            lo, hi = k + step // 2 if step > 1 else k, k + step
        else:
            step = 1
            while not below(k - step):
                step *= 2
                if step > _SEARCH_CAP:
                    raise DomainError(f"Cannot resolve segment for {x}")
            lo, hi = k - step, k - step // 2 if step > 1 else k
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if below(mid):
                lo = mid
            else:
                hi = mid
        return Location(self.side, lo, at_breakpoint=self.partition.value(lo) == x)

    def integral_to(self, x: float, weights: Callable[[np.ndarray], np.ndarray],
                    limit: float) -> float:
        """∫ between 0 and x of the piecewise-constant weights, as a magnitude."""
        loc = self.locate(x)
        inside = abs(x) - float(self.inner_end([loc.k])[0])
        head = float(weights(np.array([loc.k]))[0]) * inside
        rest, _ = self.inner_weighted_sum(weights, limit, start=loc.k + self.inward)
        return head + rest


@dataclass(frozen=True)
class SkewConfig:
    """The four sequences l_k, r_k, γ_k, γ̄_k."""

    neg_partition: PartitionSpec
    pos_partition: PartitionSpec
    neg_density: SequenceSpec
    pos_density: SequenceSpec
    name: str = "unnamed"

    def partition(self, side: Side) -> PartitionSpec:
        return self.neg_partition if side is Side.NEG else self.pos_partition

    def density(self, side: Side) -> SequenceSpec:
        return self.neg_density if side is Side.NEG else self.pos_density

    def view(self, side: Side) -> SideView:
        return SideView(self, side)

    def limits(self) -> Tuple[float, float]:
        """(γ, γ̄): the inner limits of γ_k (k→∞) and γ̄_k (k→−∞); may be 0 or inf."""
        return self.neg_density.inner_tail.limit(), self.pos_density.inner_tail.limit()

    def finite_limits(self) -> Tuple[float, float]:
        gamma, gammabar = self.limits()
        if not (math.isfinite(gamma) and math.isfinite(gammabar)):
            raise UndefinedValueError(
                f"density limits at 0 do not exist as finite values: γ={gamma}, γ̄={gammabar}")
        return gamma, gammabar

    def locate(self, x: float) -> Location:
        if x == 0:
            return Location(None, None)
        return self.view(Side.NEG if x < 0 else Side.POS).locate(x)


# operations


def _check_sequence(report: ValidationReport, label: str, spec: SequenceSpec,
                    positions: bool):
    size = spec.window_hi - spec.window_lo + 1
    if not spec.window_lo <= 0 <= spec.window_hi:
        report.add("window", f"{label}: window [{spec.window_lo}, {spec.window_hi}] "
                             f"must contain index 0")
    if len(spec.values) != size or size <= 0:
        report.add("window", f"{label}: expected {max(size, 0)} explicit values, "
                             f"got {len(spec.values)}")
        return
    for tail_name, tail in (("inner_tail", spec.inner_tail), ("outer_tail", spec.outer_tail)):
        for problem in tail.check():
            report.add("tail", f"{label}.{tail_name}: {problem}")
    for offset, value in enumerate(spec.values):
        k = spec.window_lo + offset
        magnitude = spec.side.sign * value if positions else value
        if not (math.isfinite(value) and magnitude > 0):
            what = "sign" if positions else "positivity"
            report.add(what, f"{label}: {what} violated at k={k}", k)
    for edge, tail, tail_name in ((spec.inner_edge, spec.inner_tail, "inner_tail"),
                                  (spec.outer_edge, spec.outer_tail, "outer_tail")):
        explicit = abs(spec.values[edge - spec.window_lo])
        from_tail = tail.value(abs(edge))
        if not abs(from_tail - explicit) <= AGREEMENT_RTOL * max(abs(explicit), abs(from_tail)):
            report.add("agreement", f"{label}: {tail_name} gives {from_tail!r} at k={edge}, "
                                    f"explicit value is {explicit!r}", edge)


def _check_sampled(report: ValidationReport, label: str, spec: SequenceSpec, positions: bool):
    ks = np.arange(spec.window_lo - SAMPLE_SIZE, spec.window_hi + SAMPLE_SIZE + 1)
    values = spec.at(ks)
    if positions:
        steps = np.diff(values)
        bad = np.flatnonzero(~(steps > 0))
        if bad.size:
            report.add("monotonicity", f"{label}: strict monotonicity violated at "
                                       f"k={int(ks[bad[0]])}", int(ks[bad[0]]))
        if spec.inner_tail.limit() != 0.0:
            report.add("accumulation", f"{label}: inner tail must tend to 0")
        if not math.isinf(spec.outer_tail.limit()):
            report.add("accumulation", f"{label}: outer tail must be unbounded")
    else:
        bad = np.flatnonzero(~(np.isfinite(values) & (values > 0)))
        if bad.size:
            k = int(ks[bad[0]])
            report.add("positivity", f"{label}: positivity violated at k={k}", k)


def validate(config: SkewConfig) -> ValidationReport:
    """Check every configuration invariant; never raises."""
    from .series import SeriesStatus, evaluate_series

    logger.info(f"Validating config: {config.name}")
    report = ValidationReport()
    specs = (("negative.breakpoints", config.neg_partition, True),
             ("positive.breakpoints", config.pos_partition, True),
             ("negative.gammas", config.neg_density, False),
             ("positive.gammas", config.pos_density, False))
    for label, spec, positions in specs:
        _check_sequence(report, label, spec, positions)
    if not report.is_valid:
        return report
    for label, spec, positions in specs:
        _check_sampled(report, label, spec, positions)
    if not report.is_valid:
        return report

    for side in Side:
        view = config.view(side)
        dens_growth = view.density.inner_tail.growth()
        len_growth = view.partition.inner_tail.variation()
        growth = dens_growth * len_growth if dens_growth and len_growth else None
        verdict = evaluate_series(
            lambda n: view.seg_density(view.inner_ks(n)) * np.abs(view.lengths(view.inner_ks(n))),
            growth, index_offset=abs(view.k_inner))
        if verdict.status == SeriesStatus.DIVERGES:
            report.add("l1loc", f"{side.value}: γ-weighted spacing sum near 0 diverges")
        elif verdict.status == SeriesStatus.INCONCLUSIVE:
            logger.warning(f"{side.value}: local integrability of ρ near 0 not decided")
    logger.info(f"Validation complete: {len(report.violations)} violations")
    return report


def _alpha_tail_to_gamma(alpha_tail: TailFamily, anchor: float, anchor_index: int,
                         upward: bool) -> TailFamily:
    """Tail of γ generated by α_j/(1−α_j) going up or (1−α_j)/α_j going down."""
    if alpha_tail.kind == TailKind.CONSTANT:
        a = alpha_tail.scale
        ratio = a / (1 - a) if upward else (1 - a) / a
        n0 = abs(anchor_index)
        if math.isclose(ratio, 1.0, rel_tol=0, abs_tol=1e-15):
            return TailFamily.constant(anchor)
        return TailFamily.geometric(anchor / ratio ** n0, ratio)
    return TailFamily.alpha_product(alpha_tail, anchor, abs(anchor_index), invert=not upward)


def gammas_from_alphas(alphas_neg: SequenceSpec, alphas_pos: SequenceSpec, gamma0: float,
                       gammabar0: float) -> Tuple[SequenceSpec, SequenceSpec]:
    """γ_k (resp. γ̄_k) from α_k = γ_{k+1}/(γ_{k+1}+γ_k) and the value at k = 0.

    The output window is [lo, hi + 1] of the α window; tails are closed form for
    constant α tails and numeric-only products otherwise.
    """
    out = []
    for alphas, base in ((alphas_neg, gamma0), (alphas_pos, gammabar0)):
        if not base > 0:
            raise DomainError(f"γ_0 must be positive, got {base}")
        lo, hi = alphas.window_lo, alphas.window_hi
        if not lo <= 0 <= hi:
            raise DomainError(f"α window [{lo}, {hi}] must contain index 0")
        sampled = alphas.at(np.arange(lo - SAMPLE_SIZE, hi + SAMPLE_SIZE + 1))
        if not np.all((sampled > 0) & (sampled < 1)):
            raise DomainError("α values must lie strictly inside (0, 1)")
        explicit = np.asarray(alphas.values, dtype=float)
        steps = np.log(explicit) - np.log1p(-explicit)
        # log γ_k - log γ_0 for k = lo .. hi+1
        up = np.concatenate(([0.0], np.cumsum(steps[-lo:])))
        down = -np.cumsum(steps[:-lo][::-1])[::-1] if lo < 0 else np.array([])
        gammas = base * np.exp(np.concatenate((down, up)))
        upper = _alpha_tail_to_gamma(alphas.upper_tail, float(gammas[-1]), hi + 1, upward=True)
        lower = _alpha_tail_to_gamma(alphas.lower_tail, float(gammas[0]), lo, upward=False)
        inner, outer = (upper, lower) if alphas.side is Side.NEG else (lower, upper)
        out.append(SequenceSpec(alphas.side, lo, hi + 1, tuple(float(g) for g in gammas),
                                inner, outer))
    logger.info(f"Derived γ windows {out[0].window_lo}..{out[0].window_hi} and "
                f"{out[1].window_lo}..{out[1].window_hi}")
    return out[0], out[1]


def alpha_values(spec: SequenceSpec, ks) -> np.ndarray:
    """α_k = γ_{k+1}/(γ_{k+1}+γ_k)."""
    ks = np.asarray(ks, dtype=np.int64)
    nxt, cur = spec.at(ks + 1), spec.at(ks)
    return nxt / (nxt + cur)


def effective_alpha(config: SkewConfig) -> float:
    gamma, gammabar = config.finite_limits()
    if gamma == gammabar:
        return 0.5
    return gammabar / (gammabar + gamma)


def alphas_from_gammas(config: SkewConfig) -> AlphaProfile:
    """α_k and ᾱ_k over the density windows, plus the effective α at 0."""
    series = []
    for spec in (config.neg_density, config.pos_density):
        ks = np.arange(spec.window_lo, spec.window_hi + 1)
        series.append(pd.Series(alpha_values(spec, ks), index=ks, name=spec.side.value))
    try:
        alpha, note = effective_alpha(config), ""
    except UndefinedValueError as e:
        alpha, note = None, f"effective α undefined: {e}"
        logger.warning(note)
    return AlphaProfile(series[0], series[1], alpha, note)


def rho_eval(config: SkewConfig, x: float) -> float:
    """Symmetric pointwise version of ρ: averages at breakpoints and at 0."""
    loc = config.locate(x)
    if loc.at_zero:
        gamma, gammabar = config.finite_limits()
        return (gamma + gammabar) / 2
    spec = config.density(loc.side)
    if loc.at_breakpoint:
        return (spec.value(loc.k + 1) + spec.value(loc.k)) / 2
    return spec.value(loc.k + 1)


def revuz_factor(config: SkewConfig, x: float) -> float:
    """2/(sum of the one-sided densities) at a breakpoint or at 0."""
    loc = config.locate(x)
    if not (loc.at_zero or loc.at_breakpoint):
        raise DomainError(f"{x} is not a breakpoint")
    denominator = 2 * rho_eval(config, x)
    if denominator == 0:
        raise DegeneratePointError(f"zero density sum at {x}")
    return 2 / denominator


def rho_integral(config: SkewConfig, a: float, b: float) -> float:
    """∫_a^b ρ dx from the piecewise-constant structure."""
    if a > b:
        raise DomainError(f"need a <= b, got a={a}, b={b}")

    def signed(x: float) -> float:
        if x == 0:
            return 0.0
        side = Side.NEG if x < 0 else Side.POS
        view = config.view(side)
        limit = view.density.inner_tail.limit()
        return side.sign * view.integral_to(x, view.seg_density, limit)

    return signed(b) - signed(a)
