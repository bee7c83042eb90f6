"""
Tails Module: closed-form families for the infinite ends of a sequence.

A tail family is a function of n = |k|. Its asymptotic behaviour is summarised by a
GrowthClass c·a^n·n^p·(log n)^q, which is enough to decide every series built from
products, quotients and powers of tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import digamma

EULER_GAMMA = 0.5772156649015329
_EPS = 1e-12
# index at which numeric-only families are read off as their limit
NUMERIC_LIMIT_INDEX = 2**20


class TailKind(str, Enum):
    CONSTANT = "constant"
    POWER = "power"
    GEOMETRIC = "geometric"
    HARMONIC = "harmonic_partial_sum"
    TRANSFORMED = "transformed"
    ALPHA_PRODUCT = "alpha_product"


def _close(x: float, y: float) -> bool:
    return abs(x - y) <= _EPS * max(1.0, abs(x), abs(y))


@dataclass(frozen=True)
class GrowthClass:
    """Asymptotic class of a positive term: base^n · n^power · (log n)^log_power."""

    base: float = 1.0
    power: float = 0.0
    log_power: float = 0.0
    zero: bool = False

    def __mul__(self, other: "GrowthClass") -> "GrowthClass":
        if self.zero or other.zero:
            return ZERO
        return GrowthClass(self.base * other.base, self.power + other.power,
                           self.log_power + other.log_power)

    def __truediv__(self, other: "GrowthClass") -> "GrowthClass":
        if other.zero:
            raise ValueError("Division by the zero growth class")
        if self.zero:
            return ZERO
        return GrowthClass(self.base / other.base, self.power - other.power,
                           self.log_power - other.log_power)

    def __pow__(self, exponent: float) -> "GrowthClass":
        if self.zero:
            if exponent <= 0:
                raise ValueError("Non-positive power of the zero growth class")
            return ZERO
        return GrowthClass(self.base ** exponent, self.power * exponent,
                           self.log_power * exponent)

    def _key(self) -> tuple:
        return (math.log(self.base), self.power, self.log_power)

    def compare(self, other: "GrowthClass") -> int:
        """-1, 0 or 1 as self grows slower than, like, or faster than other."""
        if self.zero or other.zero:
            return (not self.zero) - (not other.zero)
        for mine, theirs in zip(self._key(), other._key()):
            if not _close(mine, theirs):
                return -1 if mine < theirs else 1
        return 0

    def dominant(self, other: "GrowthClass") -> "GrowthClass":
        """Class of the sum of two positive terms."""
        return self if self.compare(other) >= 0 else other

    @property
    def _unit_base(self) -> bool:
        return _close(self.base, 1.0)

    @property
    def summable(self) -> bool:
        if self.zero:
            return True
        if not self._unit_base:
            return self.base < 1.0
        if not _close(self.power, -1.0):
            return self.power < -1.0
        return self.log_power < -1.0 and not _close(self.log_power, -1.0)

    def partial_sums(self) -> Optional["GrowthClass"]:
        """Class of the partial sums; None when it leaves the family (log log n)."""
        if self.summable:
            return CONST
        if not self._unit_base:
            return self
        if not _close(self.power, -1.0):
            return GrowthClass(1.0, self.power + 1.0, self.log_power)
        if _close(self.log_power, -1.0):
            return None
        return GrowthClass(1.0, 0.0, self.log_power + 1.0)

    @property
    def bounded_below(self) -> bool:
        """Terms stay above some δ > 0 for all large n."""
        if self.zero:
            return False
        return self.compare(CONST) >= 0

    def remainder_ratio(self, n: float) -> float:
        """Rough ratio of the tail remainder after index n to the n-th term."""
        if self.zero:
            return 0.0
        if not self._unit_base:
            return self.base / (1.0 - self.base)
        if not _close(self.power, -1.0):
            return n / (-self.power - 1.0)
        return n * math.log(max(n, 2.0)) / (-self.log_power - 1.0)

    @property
    def label(self) -> str:
        if self.zero:
            return "zero"
        if not self._unit_base:
            return "geometric"
        if not _close(self.log_power, 0.0) and _close(self.power, -1.0):
            return "logarithmic"
        return "power"


ZERO = GrowthClass(zero=True)
CONST = GrowthClass()


@dataclass(frozen=True)
class TailFamily:
    """Closed-form (or numeric-only) description of a sequence tail in n = |k|.

    constant:              scale
    power:                 offset + scale·(n+shift)^exponent
    geometric:             offset + scale·ratio^n·(n+shift)^exponent
    harmonic_partial_sum:  offset + scale·H_{n+shift}
    transformed:           scale·base(n+shift)^exponent
    alpha_product:         anchor·∏ ratios built from the α tail in `base`
    """

    kind: TailKind
    scale: float = 1.0
    exponent: float = 0.0
    ratio: float = 1.0
    shift: float = 0.0
    offset: float = 0.0
    base: Optional["TailFamily"] = None
    anchor: float = 1.0
    anchor_index: int = 0
    invert: bool = False

    # constructors

    @classmethod
    def constant(cls, value: float) -> "TailFamily":
        return cls(TailKind.CONSTANT, scale=value)

    @classmethod
    def power(cls, scale: float, exponent: float, shift: float = 0.0,
              offset: float = 0.0) -> "TailFamily":
        return cls(TailKind.POWER, scale=scale, exponent=exponent, shift=shift, offset=offset)

    @classmethod
    def geometric(cls, scale: float, ratio: float, exponent: float = 0.0,
                  shift: float = 0.0, offset: float = 0.0) -> "TailFamily":
        return cls(TailKind.GEOMETRIC, scale=scale, ratio=ratio, exponent=exponent,
                   shift=shift, offset=offset)

    @classmethod
    def harmonic(cls, scale: float, shift: float = 0.0, offset: float = 0.0) -> "TailFamily":
        return cls(TailKind.HARMONIC, scale=scale, shift=shift, offset=offset)

    @classmethod
    def transformed(cls, base: "TailFamily", scale: float, exponent: float,
                    shift: float = 0.0) -> "TailFamily":
        return cls(TailKind.TRANSFORMED, scale=scale, exponent=exponent, shift=shift, base=base)

    @classmethod
    def alpha_product(cls, alpha: "TailFamily", anchor: float, anchor_index: int,
                      invert: bool) -> "TailFamily":
        return cls(TailKind.ALPHA_PRODUCT, base=alpha, anchor=anchor,
                   anchor_index=anchor_index, invert=invert)

    # serialization

    @property
    def params(self) -> Dict[str, Any]:
        if self.kind == TailKind.CONSTANT:
            return {"value": self.scale}
        if self.kind == TailKind.POWER:
            return {"scale": self.scale, "exponent": self.exponent,
                    "shift": self.shift, "offset": self.offset}
        if self.kind == TailKind.GEOMETRIC:
            return {"scale": self.scale, "ratio": self.ratio, "exponent": self.exponent,
                    "shift": self.shift, "offset": self.offset}
        if self.kind == TailKind.HARMONIC:
            return {"scale": self.scale, "shift": self.shift, "offset": self.offset}
        if self.kind == TailKind.TRANSFORMED:
            return {"scale": self.scale, "exponent": self.exponent, "shift": self.shift}
        return {"anchor": self.anchor, "anchor_index": self.anchor_index,
                "invert": self.invert}

    @classmethod
    def from_params(cls, kind: str, params: Dict[str, Any],
                    base: Optional["TailFamily"] = None) -> "TailFamily":
        kind = TailKind(kind)
        if kind == TailKind.CONSTANT:
            return cls.constant(float(params["value"]))
        if kind == TailKind.POWER:
            return cls.power(float(params["scale"]), float(params["exponent"]),
                             float(params.get("shift", 0.0)), float(params.get("offset", 0.0)))
        if kind == TailKind.GEOMETRIC:
            return cls.geometric(float(params["scale"]), float(params["ratio"]),
                                 float(params.get("exponent", 0.0)),
                                 float(params.get("shift", 0.0)),
                                 float(params.get("offset", 0.0)))
        if kind == TailKind.HARMONIC:
            return cls.harmonic(float(params["scale"]), float(params.get("shift", 0.0)),
                                float(params.get("offset", 0.0)))
        if base is None:
            raise ValueError(f"Tail kind {kind.value} needs a base family")
        if kind == TailKind.TRANSFORMED:
            return cls.transformed(base, float(params["scale"]), float(params["exponent"]),
                                   float(params.get("shift", 0.0)))
        return cls.alpha_product(base, float(params["anchor"]), int(params["anchor_index"]),
                                 bool(params["invert"]))

    def check(self) -> List[str]:
        """Parameter problems, empty when the family is admissible."""
        problems = []
        if self.kind in (TailKind.CONSTANT, TailKind.POWER, TailKind.GEOMETRIC,
                         TailKind.HARMONIC, TailKind.TRANSFORMED) and not self.scale > 0:
            problems.append(f"{self.kind.value}: scale must be > 0, got {self.scale}")
        if self.kind == TailKind.GEOMETRIC and not self.ratio > 0:
            problems.append(f"geometric: ratio must be > 0, got {self.ratio}")
        if self.offset < 0:
            problems.append(f"{self.kind.value}: offset must be >= 0, got {self.offset}")
        if self.kind == TailKind.HARMONIC and float(self.shift) != int(self.shift):
            problems.append(f"harmonic_partial_sum: shift must be an integer, got {self.shift}")
        if self.kind == TailKind.ALPHA_PRODUCT and not self.anchor > 0:
            problems.append(f"alpha_product: anchor must be > 0, got {self.anchor}")
        if self.base is not None:
            problems.extend(self.base.check())
        return problems

    # evaluation

    def values(self, n: np.ndarray) -> np.ndarray:
        """Evaluate at non-negative indices n (array-like)."""
        n = np.asarray(n, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return self._evaluators[self.kind](self, n)

    def value(self, n: int) -> float:
        return float(self.values(np.array([n]))[0])

    def _eval_constant(self, n: np.ndarray) -> np.ndarray:
        return np.full(n.shape, self.scale)

    def _eval_power(self, n: np.ndarray) -> np.ndarray:
        return self.offset + self.scale * (n + self.shift) ** self.exponent

    def _eval_geometric(self, n: np.ndarray) -> np.ndarray:
        log_term = n * math.log(self.ratio)
        if self.exponent != 0.0:
            log_term = log_term + self.exponent * np.log(n + self.shift)
        return self.offset + self.scale * np.exp(log_term)

    def _eval_harmonic(self, n: np.ndarray) -> np.ndarray:
        return self.offset + self.scale * (digamma(n + self.shift + 1.0) + EULER_GAMMA)

    def _eval_transformed(self, n: np.ndarray) -> np.ndarray:
        return self.scale * self.base.values(n + self.shift) ** self.exponent

    def _eval_alpha_product(self, n: np.ndarray) -> np.ndarray:
        start = abs(self.anchor_index)
        if n.size == 0:
            return n.copy()
        top = int(max(n.max(), start))
        if self.invert:
            # (1-α_m)/α_m for m = start+1 .. n
            m = np.arange(start + 1, top + 1, dtype=float)
            alpha = self.base.values(m)
            steps = np.log1p(-alpha) - np.log(alpha)
        else:
            # α_m/(1-α_m) for m = start .. n-1
            m = np.arange(start, top, dtype=float)
            alpha = self.base.values(m)
            steps = np.log(alpha) - np.log1p(-alpha)
        cumulative = np.concatenate(([0.0], np.cumsum(steps)))
        offsets = np.clip(n.astype(np.int64) - start, 0, cumulative.size - 1)
        return self.anchor * np.exp(cumulative[offsets])

    _evaluators = {
        TailKind.CONSTANT: _eval_constant,
        TailKind.POWER: _eval_power,
        TailKind.GEOMETRIC: _eval_geometric,
        TailKind.HARMONIC: _eval_harmonic,
        TailKind.TRANSFORMED: _eval_transformed,
        TailKind.ALPHA_PRODUCT: _eval_alpha_product,
    }

    # asymptotics

    @property
    def closed_form(self) -> bool:
        if self.kind == TailKind.ALPHA_PRODUCT:
            return False
        return self.base is None or self.base.closed_form

    def limit(self) -> float:
        """lim_{n→∞}; may be 0 or inf. Numeric-only families are read off at a large index."""
        if self.kind == TailKind.CONSTANT:
            return self.scale
        if self.kind == TailKind.POWER:
            return self._power_limit(self.exponent)
        if self.kind == TailKind.GEOMETRIC:
            if _close(self.ratio, 1.0):
                return self._power_limit(self.exponent)
            return self.offset if self.ratio < 1.0 else math.inf
        if self.kind == TailKind.HARMONIC:
            return math.inf
        if self.kind == TailKind.TRANSFORMED:
            inner = self.base.limit()
            if inner == 0.0:
                return 0.0 if self.exponent > 0 else math.inf
            if math.isinf(inner):
                return math.inf if self.exponent > 0 else 0.0
            return self.scale * inner ** self.exponent
        return self.value(NUMERIC_LIMIT_INDEX)

    def _power_limit(self, exponent: float) -> float:
        if exponent < 0:
            return self.offset
        if exponent == 0:
            return self.offset + self.scale
        return math.inf

    def growth(self) -> Optional[GrowthClass]:
        """Growth class of the values; None for numeric-only families."""
        if not self.closed_form:
            return None
        if self.kind == TailKind.CONSTANT:
            return CONST
        limit = self.limit()
        if 0.0 < limit < math.inf:
            return CONST
        if self.kind == TailKind.POWER:
            return GrowthClass(1.0, self.exponent, 0.0)
        if self.kind == TailKind.GEOMETRIC:
            return GrowthClass(self.ratio, self.exponent, 0.0)
        if self.kind == TailKind.HARMONIC:
            return GrowthClass(1.0, 0.0, 1.0)
        return self.base.growth() ** self.exponent

    def variation(self) -> Optional[GrowthClass]:
        """Growth class of |f(n+1) - f(n)|; None for numeric-only families."""
        if not self.closed_form:
            return None
        if self.kind == TailKind.CONSTANT:
            return ZERO
        if self.kind == TailKind.POWER or (self.kind == TailKind.GEOMETRIC
                                           and _close(self.ratio, 1.0)):
            if self.exponent == 0.0:
                return ZERO
            return GrowthClass(1.0, self.exponent - 1.0, 0.0)
        if self.kind == TailKind.GEOMETRIC:
            return GrowthClass(self.ratio, self.exponent, 0.0)
        if self.kind == TailKind.HARMONIC:
            return GrowthClass(1.0, -1.0, 0.0)
        base_variation = self.base.variation()
        if base_variation.zero or self.exponent == 0.0:
            return ZERO
        base_limit = self.base.limit()
        if 0.0 < base_limit < math.inf:
            return base_variation
        return (self.base.growth() ** (self.exponent - 1.0)) * base_variation

    def monotone_from(self) -> Optional[int]:
        """First n from which the family is monotone; None if unknown."""
        if not self.closed_form:
            return None
        if self.kind == TailKind.GEOMETRIC and self.exponent != 0.0 and not _close(self.ratio, 1.0):
            log_ratio = math.log(self.ratio)
            if (self.exponent > 0) == (log_ratio > 0):
                return 0
            return max(0, int(math.ceil(abs(self.exponent / log_ratio) - self.shift)) + 1)
        if self.kind == TailKind.TRANSFORMED:
            inner = self.base.monotone_from()
            return None if inner is None else max(0, int(math.ceil(inner - self.shift)))
        return 0
