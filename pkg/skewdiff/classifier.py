"""
Classifier Module: semimartingale, scale, Le Gall, capacity, explosion and recurrence verdicts.

Every condition is a series over the inner tails (behaviour at the accumulation point)
or over the outer tails (behaviour at ±∞). Each verdict keeps the evidence that
produced it: per-side SeriesVerdicts, the rule that fired and the truncation used.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .config import SequenceSpec, Side, SideView, SkewConfig, effective_alpha
from .errors import CriteriaNotApplicable, UndefinedValueError
from .series import (K_MAX, SeriesStatus, SeriesVerdict, combine, evaluate_series,
                     telescoping_sum)
from .tails import CONST, GrowthClass, TailFamily

logger = logging.getLogger(__name__)

N0_CHOICES = (1, 2, 5)
H1_ZERO_NOTE = "limits are zero; positive capacity of {0} is not decided by this heuristic"
H1_INFINITE_NOTE = "limits are infinite; positive capacity of {0} is not decided by this heuristic"
NOT_APPLICABLE = "criteria not applicable without S0∧S1"
NOT_RECURRENT = "not recurrent"


class Verdict(str, Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @classmethod
    def from_series(cls, verdict: SeriesVerdict, true_when: SeriesStatus) -> "Verdict":
        if not verdict.conclusive:
            return cls.UNKNOWN
        return cls.TRUE if verdict.status == true_when else cls.FALSE


@dataclass
class ConditionResult:
    """Tri-state verdict with the series evidence of both sides."""
    name: str
    verdict: Verdict
    negative: Optional[SeriesVerdict] = None
    positive: Optional[SeriesVerdict] = None
    combined: Optional[SeriesVerdict] = None
    applicable: bool = True
    note: str = ""


@dataclass
class ClassificationRequest:
    """Request configuration for classification."""
    config: SkewConfig
    n0: int = 1
    k_max: int = K_MAX


@dataclass
class ClassificationReport:
    """All verdicts for one configuration."""
    config_name: str
    s0: ConditionResult
    s1: ConditionResult
    lgloc: ConditionResult
    h1: ConditionResult
    conservative: ConditionResult
    recurrent: ConditionResult
    positive_recurrent: ConditionResult
    effective_alpha: Optional[float] = None
    limits: Optional[Tuple[float, float]] = None
    n0: int = 1
    violations: List[str] = field(default_factory=list)

    @property
    def conditions(self) -> Dict[str, ConditionResult]:
        return {c.name: c for c in (self.s0, self.s1, self.lgloc, self.h1, self.conservative,
                                    self.recurrent, self.positive_recurrent)}

    @property
    def conclusive(self) -> bool:
        """H1 is a heuristic and never makes a report inconclusive."""
        return all(c.verdict != Verdict.UNKNOWN for name, c in self.conditions.items()
                   if name != "h1")


def _ratio(num: Optional[GrowthClass], den: Optional[GrowthClass]) -> Optional[GrowthClass]:
    if num is None or den is None or den.zero:
        return None
    return num / den


def _product(a: Optional[GrowthClass], b: Optional[GrowthClass]) -> Optional[GrowthClass]:
    if a is None or b is None:
        return None
    return a * b


def feller_series(view: SideView, start: int, squares: bool = False, base_mass: float = 0.0,
                  head: float = 0.0, k_max: int = K_MAX) -> SeriesVerdict:
    """∑_l Δ_l/ρ_l · (base_mass + ∑_{k<=l} ρ_k Δ_k) over the outer segments from `start`.

    With squares=True each term is ½Δ_l² + Δ_l/ρ_l·(base_mass + ∑_{k<l} ρ_k Δ_k), the
    increments of Φ along the segments.
    """
    def terms(n: int) -> np.ndarray:
        ks = view.outer_ks(n, start)
        length = np.abs(view.lengths(ks))
        dens = view.seg_density(ks)
        mass = base_mass + np.cumsum(dens * length)
        if squares:
            return 0.5 * length ** 2 + length / dens * (mass - dens * length)
        return length / dens * mass

    length_class = view.partition.outer_tail.variation()
    dens_class = view.density.outer_tail.growth()
    mass_class = _product(dens_class, length_class)
    psum = mass_class.partial_sums() if mass_class is not None else None
    growth = None
    if psum is not None and length_class is not None and dens_class is not None:
        growth = (length_class / dens_class) * CONST.dominant(psum)
        if squares:
            growth = (length_class ** 2).dominant(growth)
    return evaluate_series(terms, growth, head=head, index_offset=abs(start), k_max=k_max)


class ClassificationPipeline:
    """Evaluates the series criteria and assembles a ClassificationReport."""

    def __init__(self):
        # term(γ_k, γ_{k+1}) of the inner-tail pair series
        self.pair_terms: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
            's0': lambda a, b: np.abs(b - a),
            's1': lambda a, b: np.abs(1.0 / b - 1.0 / a),
            'lgloc': lambda a, b: np.abs(b - a) / (b + a),
        }
        self.conditions = {
            's0': self._condition_s0,
            's1': self._condition_s1,
            'lgloc': self._condition_lgloc,
            'h1': self._condition_h1,
        }

    def run(self, request: ClassificationRequest) -> ClassificationReport:
        """Execute every check and enforce the report invariants."""
        config = request.config
        logger.info(f"Starting classification for config: {config.name}")
        if request.n0 not in N0_CHOICES:
            raise ValueError(f"Unknown n0: {request.n0}")

        results = {}
        for name, stage in self.conditions.items():
            logger.info(f"Running {name} check...")
            results[name] = stage(config, request.k_max)

        standing = (results['s0'].verdict == Verdict.TRUE
                    and results['s1'].verdict == Verdict.TRUE)
        note = "" if standing else NOT_APPLICABLE
        conservative = self._condition_conservative(config, request.n0, request.k_max)
        recurrent = self._condition_recurrent(config, request.k_max)
        positive = self._condition_positive_recurrent(config, recurrent, request.k_max)
        for result in (conservative, recurrent, positive):
            if not standing:
                result.applicable = False
                result.note = "; ".join(n for n in (note, result.note) if n)

        try:
            alpha = effective_alpha(config)
        except UndefinedValueError:
            alpha = None
        report = ClassificationReport(
            config_name=config.name,
            s0=results['s0'], s1=results['s1'], lgloc=results['lgloc'], h1=results['h1'],
            conservative=conservative, recurrent=recurrent, positive_recurrent=positive,
            effective_alpha=alpha, limits=config.limits(), n0=request.n0,
        )
        report.violations = self._consistency(report)
        for violation in report.violations:
            logger.error(f"Consistency violation for {config.name}: {violation}")
        logger.info(f"Classification complete for {config.name}")
        return report

    # inner-tail pair series

    def pair_series(self, config: SkewConfig, side: Side, kind: str,
                    k_max: int = K_MAX) -> SeriesVerdict:
        """∑ term(γ_k, γ_{k+1}) from index 0 into the inner tail of one side."""
        if kind not in self.pair_terms:
            raise ValueError(f"Unknown series: {kind}")
        term = self.pair_terms[kind]
        dens = config.density(side)
        family = dens.inner_tail
        if side is Side.NEG:
            edge = dens.window_hi
            head_ks = np.arange(0, max(0, edge))
        else:
            edge = dens.window_lo
            head_ks = np.arange(min(0, edge), 1)
        head = float(np.sum(term(dens.at(head_ks), dens.at(head_ks + 1)))) if head_ks.size else 0.0
        m0 = abs(edge)

        if kind in ('s0', 's1'):
            telescoped = family if kind == 's0' else TailFamily.transformed(family, 1.0, -1.0)
            variation = telescoped.variation()
            if variation is not None and not variation.zero:
                verdict = telescoping_sum(telescoped, m0, head)
                if verdict is not None:
                    return verdict
            growth = variation
        else:
            growth = _ratio(family.variation(), family.growth())

        def terms(n: int) -> np.ndarray:
            ms = m0 + np.arange(n)
            return term(family.values(ms), family.values(ms + 1))

        return evaluate_series(terms, growth, head=head, index_offset=m0, k_max=k_max)

    def _pair_condition(self, config: SkewConfig, kind: str, k_max: int) -> ConditionResult:
        neg = self.pair_series(config, Side.NEG, kind, k_max)
        pos = self.pair_series(config, Side.POS, kind, k_max)
        combined = combine(neg, pos)
        return ConditionResult(kind, Verdict.from_series(combined, SeriesStatus.CONVERGES),
                               negative=neg, positive=pos, combined=combined)

    def _condition_s0(self, config: SkewConfig, k_max: int) -> ConditionResult:
        result = self._pair_condition(config, 's0', k_max)
        if result.verdict == Verdict.TRUE:
            gamma, gammabar = config.limits()
            result.note = f"limits γ={gamma!r}, γ̄={gammabar!r}"
            result.combined.note = result.note
        return result

    def _condition_s1(self, config: SkewConfig, k_max: int) -> ConditionResult:
        return self._pair_condition(config, 's1', k_max)

    def _condition_lgloc(self, config: SkewConfig, k_max: int) -> ConditionResult:
        return self._pair_condition(config, 'lgloc', k_max)

    def _condition_h1(self, config: SkewConfig, k_max: int) -> ConditionResult:
        gamma, gammabar = config.limits()
        if 0 < gamma < math.inf and 0 < gammabar < math.inf:
            return ConditionResult('h1', Verdict.TRUE, note="positive finite limits at 0")
        if math.isinf(gamma) or math.isinf(gammabar):
            return ConditionResult('h1', Verdict.UNKNOWN, note=H1_INFINITE_NOTE)
        return ConditionResult('h1', Verdict.UNKNOWN, note=H1_ZERO_NOTE)

    # outer-tail series

    def conservative_side(self, config: SkewConfig, side: Side, n0: int = 1,
                          k_max: int = K_MAX) -> SeriesVerdict:
        """Double series at one boundary; Diverges means the boundary is not reached."""
        view = config.view(side)
        start = n0 if side is Side.POS else -n0
        length_class = view.partition.outer_tail.variation()
        dens_class = view.density.outer_tail.growth()
        if length_class is not None and length_class.bounded_below:
            return SeriesVerdict(SeriesStatus.DIVERGES, math.inf, math.inf, 0, "R1-spacing")
        mass_class = _product(dens_class, length_class)
        psum = mass_class.partial_sums() if mass_class is not None else None
        if psum is not None and dens_class is not None:
            summand = (length_class / dens_class) * CONST.dominant(psum)
            if summand.bounded_below:
                return SeriesVerdict(SeriesStatus.DIVERGES, math.inf, math.inf, 0, "R1-summand")
        verdict = feller_series(view, start, k_max=k_max)
        if verdict.rule != "numeric-heuristic":
            verdict.rule = f"R2-{verdict.rule}"
        return verdict

    def recurrence_side(self, config: SkewConfig, side: Side,
                        k_max: int = K_MAX) -> SeriesVerdict:
        """∑ Δ_k/γ_{k+1} over a whole side; Diverges means h(±∞) = ±∞."""
        view = config.view(side)
        return self._side_series(view, lambda ks: 1.0 / view.seg_density(ks),
                                 _ratio(view.partition.outer_tail.variation(),
                                        view.density.outer_tail.growth()),
                                 invert_limit=True, k_max=k_max)

    def mass_side(self, config: SkewConfig, side: Side, k_max: int = K_MAX) -> SeriesVerdict:
        """∫ρ over one side."""
        view = config.view(side)
        return self._side_series(view, view.seg_density,
                                 _product(view.partition.outer_tail.variation(),
                                          view.density.outer_tail.growth()),
                                 invert_limit=False, k_max=k_max)

    def _side_series(self, view: SideView, weights: Callable[[np.ndarray], np.ndarray],
                     growth: Optional[GrowthClass], invert_limit: bool,
                     k_max: int) -> SeriesVerdict:
        middle = view.middle_ks()
        head = float(np.sum(weights(middle) * np.abs(view.lengths(middle)))) if middle.size else 0.0
        limit = view.density.inner_tail.limit()
        note = ""
        if 0 < limit < math.inf:
            inner, _ = view.inner_weighted_sum(weights, 1.0 / limit if invert_limit else limit)
            head += inner
        else:
            note = "inner part omitted: density limit at 0 is not positive and finite"

        def terms(n: int) -> np.ndarray:
            ks = view.outer_ks(n)
            return weights(ks) * np.abs(view.lengths(ks))

        verdict = evaluate_series(terms, growth, head=head, index_offset=abs(view.k_outer),
                                  k_max=k_max)
        verdict.note = "; ".join(n for n in (verdict.note, note) if n)
        return verdict

    def _condition_conservative(self, config: SkewConfig, n0: int,
                                k_max: int) -> ConditionResult:
        right = self.conservative_side(config, Side.POS, n0, k_max)
        left = self.conservative_side(config, Side.NEG, n0, k_max)
        return ConditionResult('conservative', self._both_diverge(right, left),
                               negative=left, positive=right)

    def _condition_recurrent(self, config: SkewConfig, k_max: int) -> ConditionResult:
        right = self.recurrence_side(config, Side.POS, k_max)
        left = self.recurrence_side(config, Side.NEG, k_max)
        return ConditionResult('recurrent', self._both_diverge(right, left),
                               negative=left, positive=right)

    def _condition_positive_recurrent(self, config: SkewConfig, recurrent: ConditionResult,
                                      k_max: int) -> ConditionResult:
        if recurrent.verdict == Verdict.FALSE:
            return ConditionResult('positive_recurrent', Verdict.FALSE, note=NOT_RECURRENT)
        if recurrent.verdict == Verdict.UNKNOWN:
            return ConditionResult('positive_recurrent', Verdict.UNKNOWN,
                                   note="recurrence undecided")
        left = self.mass_side(config, Side.NEG, k_max)
        right = self.mass_side(config, Side.POS, k_max)
        combined = combine(left, right)
        note = f"total mass {combined.value!r}" if combined.converges else ""
        return ConditionResult('positive_recurrent',
                               Verdict.from_series(combined, SeriesStatus.CONVERGES),
                               negative=left, positive=right, combined=combined, note=note)

    @staticmethod
    def _both_diverge(right: SeriesVerdict, left: SeriesVerdict) -> Verdict:
        if right.converges or left.converges:
            return Verdict.FALSE
        if right.diverges and left.diverges:
            return Verdict.TRUE
        return Verdict.UNKNOWN

    @staticmethod
    def _consistency(report: ClassificationReport) -> List[str]:
        violations = []
        triple = (report.s0.verdict, report.s1.verdict, report.lgloc.verdict)
        if Verdict.UNKNOWN not in triple:
            expected = (report.s0.verdict == Verdict.TRUE and report.s1.verdict == Verdict.TRUE)
            if (report.lgloc.verdict == Verdict.TRUE) != expected:
                violations.append("lgloc differs from s0 ∧ s1")
        if (report.positive_recurrent.verdict == Verdict.TRUE
                and report.recurrent.verdict != Verdict.TRUE):
            violations.append("positive recurrent but not recurrent")
        if report.recurrent.verdict == Verdict.TRUE and report.conservative.verdict == Verdict.FALSE:
            violations.append("recurrent but not conservative")
        return violations

    def require_standing(self, config: SkewConfig):
        s0 = self._condition_s0(config, K_MAX)
        s1 = self._condition_s1(config, K_MAX)
        if not (s0.verdict == Verdict.TRUE and s1.verdict == Verdict.TRUE):
            raise CriteriaNotApplicable(NOT_APPLICABLE)


# Singleton instance
classification_pipeline = ClassificationPipeline()


def check_S0(config: SkewConfig) -> SeriesVerdict:
    """Semimartingale series; the note carries the limits (γ, γ̄) when it converges."""
    return classification_pipeline._condition_s0(config, K_MAX).combined


def check_S1(config: SkewConfig) -> SeriesVerdict:
    return classification_pipeline._condition_s1(config, K_MAX).combined


def check_LGloc(config: SkewConfig) -> SeriesVerdict:
    return classification_pipeline._condition_lgloc(config, K_MAX).combined


def variation_sum(seq: SequenceSpec, start: int, reciprocal: bool = False,
                  k_max: int = K_MAX) -> SeriesVerdict:
    """∑_{n>=start} |f(n+1) − f(n)| over the inner tail f of one sequence (of 1/f if asked)."""
    family = seq.inner_tail
    if reciprocal:
        family = TailFamily.transformed(family, 1.0, -1.0)
    verdict = telescoping_sum(family, start)
    if verdict is not None:
        return verdict

    def terms(n: int) -> np.ndarray:
        ns = start + np.arange(n + 1)
        return np.abs(np.diff(family.values(ns)))

    return evaluate_series(terms, family.variation(), index_offset=start, k_max=k_max)


def check_H1(config: SkewConfig) -> ConditionResult:
    """Sufficient-condition heuristic: TRUE or UNKNOWN, never FALSE."""
    return classification_pipeline._condition_h1(config, K_MAX)


def check_conservative(config: SkewConfig, n0: int = 1) -> Tuple[SeriesVerdict, SeriesVerdict]:
    """(right boundary, left boundary) verdicts; Diverges on both sides means conservative."""
    if n0 not in N0_CHOICES:
        raise ValueError(f"Unknown n0: {n0}")
    classification_pipeline.require_standing(config)
    return (classification_pipeline.conservative_side(config, Side.POS, n0),
            classification_pipeline.conservative_side(config, Side.NEG, n0))


def check_recurrent(config: SkewConfig) -> Tuple[SeriesVerdict, SeriesVerdict]:
    """(right, left) verdicts; Diverges on both sides means recurrent."""
    classification_pipeline.require_standing(config)
    return (classification_pipeline.recurrence_side(config, Side.POS),
            classification_pipeline.recurrence_side(config, Side.NEG))


def check_positive_recurrent(config: SkewConfig) -> SeriesVerdict:
    """Mass series ∫ρ; Converges means positive recurrent and carries the mass."""
    right, left = check_recurrent(config)
    if not (right.diverges and left.diverges):
        raise CriteriaNotApplicable(NOT_RECURRENT)
    return combine(classification_pipeline.mass_side(config, Side.NEG),
                   classification_pipeline.mass_side(config, Side.POS))


def classify_all(config: SkewConfig, n0: int = 1, k_max: int = K_MAX) -> ClassificationReport:
    """Public API for classification."""
    return classification_pipeline.run(ClassificationRequest(config, n0, k_max))
