"""
Data Models: Pydantic schemas for the configuration, report and manifest documents.
"""

import math
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .classifier import ClassificationReport, ConditionResult, Verdict
from .config import PartitionSpec, SequenceSpec, Side, SkewConfig, gammas_from_alphas
from .layered import CoefficientTable, LayerConfig
from .series import SeriesStatus, SeriesVerdict
from .tails import TailFamily, TailKind

SCHEMA_CONFIG = "skewdiff-config/1"
SCHEMA_LAYERS = "skewdiff-layers/1"
SCHEMA_REPORT = "skewdiff-report/1"
SCHEMA_MANIFEST = "skewdiff-manifest/1"

Real = Union[float, str]


def encode_real(x: Optional[float]) -> Optional[Real]:
    """JSON has no inf/nan; those travel as strings."""
    if x is None:
        return None
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def decode_real(x: Optional[Real]) -> Optional[float]:
    return None if x is None else float(x)


class TailSchema(BaseModel):
    """Closed-form (or derived) tail family."""
    kind: TailKind
    params: Dict[str, Union[float, int, bool]] = Field(default_factory=dict)
    base: Optional["TailSchema"] = None

    model_config = ConfigDict(use_enum_values=True)

    @model_validator(mode="after")
    def _constructible(self) -> "TailSchema":
        try:
            self.to_family()
        except KeyError as e:
            raise ValueError(f"{self.kind} tail is missing parameter {e}")
        return self

    def to_family(self) -> TailFamily:
        base = self.base.to_family() if self.base is not None else None
        return TailFamily.from_params(self.kind, self.params, base)

    @classmethod
    def from_family(cls, family: TailFamily) -> "TailSchema":
        base = cls.from_family(family.base) if family.base is not None else None
        return cls(kind=family.kind, params=family.params, base=base)


TailSchema.model_rebuild()


class SequenceSchema(BaseModel):
    """Explicit window plus two tails."""
    window_lo: int
    window_hi: int
    values: List[float]
    inner_tail: TailSchema
    outer_tail: TailSchema

    @model_validator(mode="after")
    def _window_shape(self) -> "SequenceSchema":
        if not self.window_lo <= 0 <= self.window_hi:
            raise ValueError(f"window [{self.window_lo}, {self.window_hi}] must contain index 0")
        size = self.window_hi - self.window_lo + 1
        if len(self.values) != size:
            raise ValueError(f"expected {size} explicit values, got {len(self.values)}")
        return self

    def to_spec(self, side: Side, spec_type=SequenceSpec) -> SequenceSpec:
        return spec_type(side, self.window_lo, self.window_hi, tuple(self.values),
                         self.inner_tail.to_family(), self.outer_tail.to_family())

    @classmethod
    def from_spec(cls, spec: SequenceSpec) -> "SequenceSchema":
        return cls(window_lo=spec.window_lo, window_hi=spec.window_hi, values=list(spec.values),
                   inner_tail=TailSchema.from_family(spec.inner_tail),
                   outer_tail=TailSchema.from_family(spec.outer_tail))


class SideSchema(BaseModel):
    """One half-line: breakpoints with either densities or skew weights."""
    breakpoints: SequenceSchema
    gammas: Optional[SequenceSchema] = None
    alphas: Optional[SequenceSchema] = None
    gamma0: Optional[float] = Field(default=None, gt=0, description="density at k = 0 for alphas")

    @model_validator(mode="after")
    def _one_density_source(self) -> "SideSchema":
        if (self.gammas is None) == (self.alphas is None):
            raise ValueError("give exactly one of gammas or alphas")
        if self.alphas is not None and self.gamma0 is None:
            raise ValueError("alphas need gamma0")
        return self


class ConfigSchema(BaseModel):
    """Document "skewdiff-config/1"."""
    schema_id: Literal["skewdiff-config/1"] = Field(SCHEMA_CONFIG, alias="schema")
    name: str = "unnamed"
    negative: SideSchema
    positive: SideSchema

    model_config = ConfigDict(populate_by_name=True)

    def to_config(self) -> SkewConfig:
        neg_part = self.negative.breakpoints.to_spec(Side.NEG, PartitionSpec)
        pos_part = self.positive.breakpoints.to_spec(Side.POS, PartitionSpec)
        if self.negative.alphas is not None or self.positive.alphas is not None:
            if self.negative.alphas is None or self.positive.alphas is None:
                raise ValueError("alphas must be given on both sides")
            neg_dens, pos_dens = gammas_from_alphas(self.negative.alphas.to_spec(Side.NEG),
                                                    self.positive.alphas.to_spec(Side.POS),
                                                    self.negative.gamma0, self.positive.gamma0)
        else:
            neg_dens = self.negative.gammas.to_spec(Side.NEG)
            pos_dens = self.positive.gammas.to_spec(Side.POS)
        return SkewConfig(neg_part, pos_part, neg_dens, pos_dens, name=self.name)

    @classmethod
    def from_config(cls, config: SkewConfig) -> "ConfigSchema":
        sides = {}
        for side, key in ((Side.NEG, "negative"), (Side.POS, "positive")):
            sides[key] = SideSchema(breakpoints=SequenceSchema.from_spec(config.partition(side)),
                                    gammas=SequenceSchema.from_spec(config.density(side)))
        return cls(name=config.name, **sides)


class TableSchema(BaseModel):
    """Piecewise-constant coefficient over the layered state space."""
    edges: List[float] = Field(default_factory=list)
    values: List[float]

    @model_validator(mode="after")
    def _sizes(self) -> "TableSchema":
        if len(self.values) != len(self.edges) + 1:
            raise ValueError(f"need {len(self.edges) + 1} values for {len(self.edges)} edges")
        return self


class PartitionPairSchema(BaseModel):
    negative: SequenceSchema
    positive: SequenceSchema


class LayersSchema(BaseModel):
    """Document "skewdiff-layers/1"."""
    schema_id: Literal["skewdiff-layers/1"] = Field(SCHEMA_LAYERS, alias="schema")
    name: str = "layered"
    partition: PartitionPairSchema
    D: SequenceSchema
    Dbar: SequenceSchema
    alpha: float = Field(..., gt=0, lt=1)
    sigma2_table: TableSchema = Field(default_factory=lambda: TableSchema(values=[1.0]))
    beta2_table: TableSchema = Field(default_factory=lambda: TableSchema(values=[0.0]))

    model_config = ConfigDict(populate_by_name=True)

    def to_layer(self) -> LayerConfig:
        return LayerConfig(
            neg_partition=self.partition.negative.to_spec(Side.NEG, PartitionSpec),
            pos_partition=self.partition.positive.to_spec(Side.POS, PartitionSpec),
            neg_diffusivity=self.D.to_spec(Side.NEG),
            pos_diffusivity=self.Dbar.to_spec(Side.POS),
            alpha=self.alpha,
            sigma2=CoefficientTable(tuple(self.sigma2_table.edges), tuple(self.sigma2_table.values)),
            beta2=CoefficientTable(tuple(self.beta2_table.edges), tuple(self.beta2_table.values)),
            name=self.name,
        )

    @classmethod
    def from_layer(cls, layer: LayerConfig) -> "LayersSchema":
        return cls(name=layer.name,
                   partition=PartitionPairSchema(
                       negative=SequenceSchema.from_spec(layer.neg_partition),
                       positive=SequenceSchema.from_spec(layer.pos_partition)),
                   D=SequenceSchema.from_spec(layer.neg_diffusivity),
                   Dbar=SequenceSchema.from_spec(layer.pos_diffusivity),
                   alpha=layer.alpha,
                   sigma2_table=TableSchema(edges=list(layer.sigma2.edges),
                                            values=list(layer.sigma2.values)),
                   beta2_table=TableSchema(edges=list(layer.beta2.edges),
                                           values=list(layer.beta2.values)))


class SeriesSchema(BaseModel):
    status: SeriesStatus
    value: Real
    error_bound: Real
    k_max: int
    rule: str
    note: str = ""

    model_config = ConfigDict(use_enum_values=True)

    @classmethod
    def from_verdict(cls, verdict: SeriesVerdict) -> "SeriesSchema":
        return cls(status=verdict.status, value=encode_real(verdict.value),
                   error_bound=encode_real(verdict.error_bound), k_max=verdict.k_max_used,
                   rule=verdict.rule, note=verdict.note)


class ConditionSchema(BaseModel):
    """One record per condition."""
    condition: str
    verdict: Verdict
    status: Optional[SeriesStatus] = None
    value: Optional[Real] = None
    error_bound: Optional[Real] = None
    k_max: Optional[int] = None
    rule: Optional[str] = None
    applicable: bool = True
    note: str = ""
    negative: Optional[SeriesSchema] = None
    positive: Optional[SeriesSchema] = None

    model_config = ConfigDict(use_enum_values=True)

    @classmethod
    def from_result(cls, result: ConditionResult) -> "ConditionSchema":
        record = cls(condition=result.name, verdict=result.verdict,
                     applicable=result.applicable, note=result.note,
                     negative=SeriesSchema.from_verdict(result.negative)
                     if result.negative else None,
                     positive=SeriesSchema.from_verdict(result.positive)
                     if result.positive else None)
        if result.combined is not None:
            record.status = result.combined.status.value
            record.value = encode_real(result.combined.value)
            record.error_bound = encode_real(result.combined.error_bound)
            record.k_max = result.combined.k_max_used
            record.rule = result.combined.rule
        return record


class ReportSchema(BaseModel):
    """Document "skewdiff-report/1"."""
    schema_id: Literal["skewdiff-report/1"] = Field(SCHEMA_REPORT, alias="schema")
    config: str
    n0: int
    effective_alpha: Optional[float] = None
    limits: Optional[Tuple[Real, Real]] = None
    conclusive: bool
    conditions: List[ConditionSchema]
    violations: List[str] = Field(default_factory=list)

    model_config = ConfigDict(populate_by_name=True)

    @classmethod
    def from_report(cls, report: ClassificationReport) -> "ReportSchema":
        limits = None
        if report.limits is not None:
            limits = (encode_real(report.limits[0]), encode_real(report.limits[1]))
        return cls(config=report.config_name, n0=report.n0,
                   effective_alpha=report.effective_alpha, limits=limits,
                   conclusive=report.conclusive,
                   conditions=[ConditionSchema.from_result(c)
                               for c in report.conditions.values()],
                   violations=report.violations)

    def condition(self, name: str) -> ConditionSchema:
        for record in self.conditions:
            if record.condition == name:
                return record
        raise KeyError(name)


class ManifestSchema(BaseModel):
    """Document "skewdiff-manifest/1": enough to rerun a command."""
    schema_id: Literal["skewdiff-manifest/1"] = Field(SCHEMA_MANIFEST, alias="schema")
    command: str
    arguments: List[str]
    config_paths: List[str] = Field(default_factory=list)
    overrides: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    threads: int = 1
    output_dir: str
    tool_version: str
    schema_versions: Dict[str, str] = Field(default_factory=lambda: {
        "config": SCHEMA_CONFIG, "layers": SCHEMA_LAYERS,
        "report": SCHEMA_REPORT, "manifest": SCHEMA_MANIFEST})
    exit_code: Optional[int] = None
    created_at: datetime
    censor_bounds: Optional[Tuple[float, float]] = None
    notes: List[str] = Field(default_factory=list)

    model_config = ConfigDict(populate_by_name=True)
