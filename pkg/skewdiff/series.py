"""
Series Module: convergence verdicts for series of non-negative terms.

Symbolic rules come from the growth class of the terms; when no class is known the
engine falls back to a numeric heuristic that is only allowed to say "converges"
with a small tail estimate, "diverges" after steady growth past S_DIV, and
"inconclusive" otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np

from .tails import GrowthClass, TailFamily

logger = logging.getLogger(__name__)

TOL_TAIL = 1e-10
S_DIV = 1e6
K_MIN = 2**10
K_MAX = 2**20
NUMERIC_RULE = "numeric-heuristic"

Terms = Callable[[int], np.ndarray]


class SeriesStatus(str, Enum):
    CONVERGES = "converges"
    DIVERGES = "diverges"
    INCONCLUSIVE = "inconclusive"


@dataclass
class SeriesVerdict:
    """Outcome of one series: partial sum (plus tail bound when it converges)."""

    status: SeriesStatus
    value: float
    error_bound: float
    k_max_used: int
    rule: str
    note: str = ""

    @property
    def conclusive(self) -> bool:
        return self.status != SeriesStatus.INCONCLUSIVE

    @property
    def converges(self) -> bool:
        return self.status == SeriesStatus.CONVERGES

    @property
    def diverges(self) -> bool:
        return self.status == SeriesStatus.DIVERGES

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["status"] = self.status.value
        return record


def combine(first: SeriesVerdict, second: SeriesVerdict) -> SeriesVerdict:
    """Verdict for the sum of two series of non-negative terms."""
    if SeriesStatus.DIVERGES in (first.status, second.status):
        status = SeriesStatus.DIVERGES
    elif SeriesStatus.INCONCLUSIVE in (first.status, second.status):
        status = SeriesStatus.INCONCLUSIVE
    else:
        status = SeriesStatus.CONVERGES
    rule = first.rule if first.rule == second.rule else f"{first.rule}+{second.rule}"
    note = "; ".join(n for n in (first.note, second.note) if n)
    return SeriesVerdict(status, first.value + second.value,
                         first.error_bound + second.error_bound,
                         max(first.k_max_used, second.k_max_used), rule, note)


def _symbolic(terms: Terms, growth: GrowthClass, head: float, index_offset: int,
              k_max: int, tol: float) -> SeriesVerdict:
    if growth.zero:
        return SeriesVerdict(SeriesStatus.CONVERGES, head, 0.0, 0, "zero-variation")
    if not growth.summable:
        partial = head + float(np.sum(terms(K_MIN)))
        return SeriesVerdict(SeriesStatus.DIVERGES, partial, math.inf, K_MIN,
                             f"{growth.label}-divergent")
    n = K_MIN
    while True:
        values = terms(n)
        estimate = float(values[-1]) * growth.remainder_ratio(n + index_offset)
        if estimate < tol or n >= k_max:
            break
        n *= 2
    if estimate >= tol:
        logger.debug(f"Symbolic tail bound {estimate:.3e} above tolerance at k={n}")
    return SeriesVerdict(SeriesStatus.CONVERGES, head + float(np.sum(values)), estimate, n,
                         f"{growth.label}-convergent")


def _tail_estimate(values: np.ndarray, index_offset: int) -> float:
    last, before = float(values[-1]), float(values[-2])
    half = float(values[values.size // 2 - 1])
    if last == 0.0 and half == 0.0:
        return 0.0
    geometric = math.inf
    if before > 0:
        q = last / before
        if 0 < q < 1:
            geometric = last * q / (1 - q)
    power = math.inf
    if last > 0 and half > 0:
        n2 = values.size + index_offset
        n1 = values.size // 2 + index_offset
        p = math.log(last / half) / math.log(n2 / max(n1, 1))
        if p < -1:
            power = last * n2 / (-p - 1)
    return max(geometric, power)


def _numeric(terms: Terms, head: float, index_offset: int, k_max: int,
             tol: float) -> SeriesVerdict:
    with np.errstate(over="ignore", invalid="ignore"):
        values = np.asarray(terms(k_max), dtype=float)
        sums = head + np.cumsum(values)
    total = float(sums[-1])
    if math.isinf(total) or np.isnan(total):
        return SeriesVerdict(SeriesStatus.DIVERGES, math.inf, math.inf, k_max, NUMERIC_RULE,
                             "terms overflow")
    estimate = _tail_estimate(values, index_offset)
    if estimate < tol:
        return SeriesVerdict(SeriesStatus.CONVERGES, total, estimate, k_max, NUMERIC_RULE)
    quarter, half = float(sums[k_max // 4 - 1]), float(sums[k_max // 2 - 1])
    if total >= S_DIV and total > half > quarter:
        return SeriesVerdict(SeriesStatus.DIVERGES, total, math.inf, k_max, NUMERIC_RULE,
                             f"partial sums passed {S_DIV:g} and kept growing")
    return SeriesVerdict(SeriesStatus.INCONCLUSIVE, total, estimate, k_max, NUMERIC_RULE,
                         f"tail estimate {estimate:.3e}")


def evaluate_series(terms: Terms, growth: Optional[GrowthClass], head: float = 0.0,
                    index_offset: int = 0, k_max: int = K_MAX,
                    tol: float = TOL_TAIL) -> SeriesVerdict:
    """Verdict on head + ∑ terms.

    `terms(n)` returns the first n terms; `growth` is their asymptotic class (None
    when only numbers are available); `index_offset` is the tail index of term 0.
    """
    if growth is not None:
        return _symbolic(terms, growth, head, index_offset, k_max, tol)
    return _numeric(terms, head, index_offset, k_max, tol)


def telescoping_sum(family: TailFamily, start: int, head: float = 0.0) -> Optional[SeriesVerdict]:
    """head + ∑_{n>=start} |f(n+1) − f(n)| for a closed-form family, if it is monotone.

    Returns None when the family is numeric-only or never known to be monotone.
    """
    n_star = family.monotone_from()
    if n_star is None or n_star - start > K_MAX:
        return None
    first = max(start, n_star)
    if first > start:
        ns = np.arange(start, first + 1)
        head += float(np.sum(np.abs(np.diff(family.values(ns)))))
    limit = family.limit()
    if math.isinf(limit):
        return SeriesVerdict(SeriesStatus.DIVERGES, math.inf, math.inf, first, "telescoping")
    value = head + abs(family.value(first) - limit)
    return SeriesVerdict(SeriesStatus.CONVERGES, value, 0.0, first, "telescoping")
