"""Job description: what to run, over which texts, into which directory."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from lm_extractor.interchange import check_example_id

_JOB_KEYS = {
    "num_classes",
    "examples",
    "checkpoints",
    "knowledge",
    "batch_size",
    "output_dir",
    "pooling",
    "max_length",
}
_EXAMPLE_KEYS = {"id", "text", "label"}
_KNOWLEDGE_KEYS = {"wiki", "commonsense"}
POOLING_MODES = ("summary", "mean")


class JobError(ValueError):
    """The job description is malformed; raised before any inference runs."""


@dataclass(frozen=True)
class ExtractionJob:
    ids: tuple
    texts: tuple
    labels: tuple
    num_classes: int
    checkpoints: tuple
    output_dir: Path
    knowledge_paths: Optional[dict] = None  # {"wiki": Path, "commonsense": Path}
    batch_size: int = 32
    pooling: str = "summary"
    max_length: Optional[int] = None

    @property
    def num_examples(self) -> int:
        return len(self.ids)

    def __post_init__(self):
        if not self.ids:
            raise JobError("job has no examples")
        if not (len(self.ids) == len(self.texts) == len(self.labels)):
            raise JobError("ids, texts, and labels must have equal length")
        seen = set()
        for ex_id in self.ids:
            check_example_id(ex_id)
            if ex_id in seen:
                raise JobError(f"duplicate example id {ex_id!r}")
            seen.add(ex_id)
        if self.num_classes < 2:
            raise JobError("num_classes must be at least 2")
        for lab in self.labels:
            if not (0 <= lab < self.num_classes):
                raise JobError(f"label {lab} outside [0, {self.num_classes - 1}]")
        if not self.checkpoints:
            raise JobError("job lists no checkpoints")
        if len(set(self.checkpoints)) != len(self.checkpoints):
            raise JobError("duplicate checkpoint entries")
        if self.batch_size < 1:
            raise JobError("batch_size must be positive")
        if self.pooling not in POOLING_MODES:
            raise JobError(f"pooling must be one of {POOLING_MODES}")
        if self.max_length is not None and self.max_length < 2:
            raise JobError("max_length must be at least 2")
        if self.knowledge_paths is not None:
            if set(self.knowledge_paths) != _KNOWLEDGE_KEYS:
                raise JobError("knowledge must map exactly 'wiki' and 'commonsense'")


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise JobError(f"{where}: missing key {key!r}")
    value = doc[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise JobError(f"{where}: key {key!r} must be {kind.__name__}")
    return value


def job_from_dict(doc: dict, base_dir: Path) -> ExtractionJob:
    """Build a job from a parsed JSON document; paths resolve against base_dir."""
    if not isinstance(doc, dict):
        raise JobError("job document must be a JSON object")
    unknown = set(doc) - _JOB_KEYS
    if unknown:
        raise JobError(f"unknown job keys: {sorted(unknown)}")
    examples = _require(doc, "examples", list, "job")
    ids, texts, labels = [], [], []
    for i, entry in enumerate(examples):
        where = f"examples[{i}]"
        if not isinstance(entry, dict):
            raise JobError(f"{where}: must be an object")
        unknown = set(entry) - _EXAMPLE_KEYS
        if unknown:
            raise JobError(f"{where}: unknown keys {sorted(unknown)}")
        ids.append(_require(entry, "id", str, where))
        texts.append(_require(entry, "text", str, where))
        labels.append(_require(entry, "label", int, where))
    knowledge = None
    if "knowledge" in doc:
        raw = _require(doc, "knowledge", dict, "job")
        if set(raw) != _KNOWLEDGE_KEYS:
            raise JobError("knowledge must map exactly 'wiki' and 'commonsense'")
        knowledge = {k: base_dir / _require(raw, k, str, "knowledge") for k in sorted(raw)}
    checkpoints = _require(doc, "checkpoints", list, "job")
    if not all(isinstance(c, str) for c in checkpoints):
        raise JobError("checkpoints must be strings")
    try:
        return ExtractionJob(
            ids=tuple(ids),
            texts=tuple(texts),
            labels=tuple(labels),
            num_classes=_require(doc, "num_classes", int, "job"),
            checkpoints=tuple(str(base_dir / c) for c in checkpoints),
            output_dir=base_dir / _require(doc, "output_dir", str, "job"),
            knowledge_paths=knowledge,
            batch_size=doc.get("batch_size", 32),
            pooling=doc.get("pooling", "summary"),
            max_length=doc.get("max_length"),
        )
    except ValueError as e:  # includes JobError and check_example_id failures
        raise JobError(str(e)) from e


def load_job(path) -> ExtractionJob:
    """Parse a job description JSON file."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise JobError(f"{path}: file not found")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise JobError(f"{path}:{e.lineno}: invalid JSON: {e.msg}")
    return job_from_dict(doc, path.parent)
