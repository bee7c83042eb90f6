"""
Ingest Module: reading and writing the versioned JSON documents.
Dispatches on the schema id, validates with pydantic and turns every failure into
a ConfigError whose diagnostics point at a line of the source file.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Union

from pydantic import BaseModel, ValidationError

from .classifier import ClassificationReport
from .config import SkewConfig, validate
from .errors import ConfigError
from .layered import LayerConfig
from .models import (SCHEMA_CONFIG, SCHEMA_LAYERS, SCHEMA_MANIFEST, SCHEMA_REPORT,
                     ConfigSchema, LayersSchema, ManifestSchema, ReportSchema)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class IngestResult:
    """A parsed document and the domain object built from it."""
    path: str
    schema_id: str
    document: BaseModel
    value: Any


def line_of(text: str, path: Sequence[Union[str, int]]) -> int:
    """Best line for a JSON path: follows the keys in order through the text."""
    pos = 0
    for key in path:
        if not isinstance(key, str):
            continue
        found = text.find(f'"{key}"', pos)
        if found < 0:
            break
        pos = found
    return text.count("\n", 0, pos) + 1


class IngestPipeline:
    """Main ingestion orchestrator."""

    def __init__(self):
        self.loaders: Dict[str, Callable[[str, Dict[str, Any], str], IngestResult]] = {
            SCHEMA_CONFIG: self._load_config,
            SCHEMA_LAYERS: self._load_layers,
            SCHEMA_REPORT: self._load_report,
            SCHEMA_MANIFEST: self._load_manifest,
        }

    def run(self, path: PathLike) -> IngestResult:
        """Read, detect the schema and validate one document."""
        path = str(path)
        logger.info(f"Starting ingest from {path}")
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}", [f"{path}: {e.strerror}"])
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            diagnostic = f"{path}:{e.lineno}:{e.colno}: {e.msg}"
            raise ConfigError(f"malformed JSON in {path}", [diagnostic])
        if not isinstance(raw, dict) or "schema" not in raw:
            raise ConfigError(f"no schema id in {path}", [f"{path}:1: missing field 'schema'"])

        schema_id = raw["schema"]
        if schema_id not in self.loaders:
            line = line_of(text, ["schema"])
            raise ConfigError(f"Unknown schema: {schema_id}",
                              [f"{path}:{line}: unknown schema {schema_id!r}"])
        result = self.loaders[schema_id](path, raw, text)
        logger.info(f"Ingest complete: {schema_id} from {path}")
        return result

    @staticmethod
    def _parse(model, path: str, raw: Dict[str, Any], text: str):
        try:
            return model.model_validate(raw)
        except ValidationError as e:
            diagnostics = []
            for error in e.errors():
                loc = list(error["loc"])
                where = ".".join(str(k) for k in loc) or "<root>"
                diagnostics.append(f"{path}:{line_of(text, loc)}: {where}: {error['msg']}")
            raise ConfigError(f"{path} does not match {raw.get('schema')}", diagnostics)

    def _load_config(self, path: str, raw: Dict[str, Any], text: str) -> IngestResult:
        document = self._parse(ConfigSchema, path, raw, text)
        try:
            config = document.to_config()
        except ValueError as e:
            raise ConfigError(f"{path}: {e}", [f"{path}:1: {e}"])
        report = validate(config)
        if not report.is_valid:
            diagnostics = []
            for violation in report.violations:
                label = violation.message.split(":", 1)[0].split(".")
                keys: List[str] = label + (["values"] if violation.index is not None else [])
                diagnostics.append(f"{path}:{line_of(text, keys)}: {violation.message}")
            for diagnostic in diagnostics:
                logger.error(diagnostic)
            raise ConfigError(f"{path} violates configuration invariants", diagnostics)
        return IngestResult(path, SCHEMA_CONFIG, document, config)

    def _load_layers(self, path: str, raw: Dict[str, Any], text: str) -> IngestResult:
        document = self._parse(LayersSchema, path, raw, text)
        try:
            layer = document.to_layer()
        except ValueError as e:
            raise ConfigError(f"{path}: {e}", [f"{path}:1: {e}"])
        return IngestResult(path, SCHEMA_LAYERS, document, layer)

    def _load_report(self, path: str, raw: Dict[str, Any], text: str) -> IngestResult:
        document = self._parse(ReportSchema, path, raw, text)
        return IngestResult(path, SCHEMA_REPORT, document, document)

    def _load_manifest(self, path: str, raw: Dict[str, Any], text: str) -> IngestResult:
        document = self._parse(ManifestSchema, path, raw, text)
        return IngestResult(path, SCHEMA_MANIFEST, document, document)


# Singleton instance
ingest_pipeline = IngestPipeline()


def ingest(path: PathLike) -> IngestResult:
    """Public API for ingestion."""
    return ingest_pipeline.run(path)


def _expect(result: IngestResult, schema_id: str):
    if result.schema_id != schema_id:
        raise ConfigError(f"{result.path} holds {result.schema_id}, expected {schema_id}",
                          [f"{result.path}:1: expected schema {schema_id!r}"])
    return result.value


def load_config(path: PathLike) -> SkewConfig:
    return _expect(ingest(path), SCHEMA_CONFIG)


def load_layers(path: PathLike) -> LayerConfig:
    return _expect(ingest(path), SCHEMA_LAYERS)


def _write(document: BaseModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def dump_config(config: SkewConfig, path: PathLike) -> Path:
    return _write(ConfigSchema.from_config(config), path)


def dump_layers(layer: LayerConfig, path: PathLike) -> Path:
    return _write(LayersSchema.from_layer(layer), path)


def dump_report(report: ClassificationReport, path: PathLike) -> Path:
    return _write(ReportSchema.from_report(report), path)


def dump_manifest(manifest: ManifestSchema, path: PathLike) -> Path:
    return _write(manifest, path)
