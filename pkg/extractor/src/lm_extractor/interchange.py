"""Writers for the lm-ensemble interchange format.

The format contract (CSV grammar, float serialization, manifest schema,
file naming) is documented in the main project's docs/FORMAT.md.  This is
an independent implementation of the writing side: floats are serialized
as shortest round-trip decimals, files end with one newline, and the
manifest is sorted-key JSON, so identical inputs always produce
byte-identical trees.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

_ID_BAD_CHARS = set(',"\r\n')


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))


def check_example_id(ex_id: str) -> str:
    if ex_id == "" or any(ch in _ID_BAD_CHARS for ch in ex_id):
        raise ValueError(f"id {ex_id!r} cannot be represented in the CSV format")
    return ex_id


def sanitize_filename(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", model_id)


def write_labels_csv(path: Path, ids: Sequence[str], labels: Sequence[int]) -> None:
    lines = ["id,label"] + [f"{ex_id},{int(lab)}" for ex_id, lab in zip(ids, labels)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_matrix_csv(path: Path, ids: Sequence[str], rows: np.ndarray) -> None:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != len(ids):
        raise ValueError("matrix must have one row per example id")
    if not np.all(np.isfinite(rows)):
        raise ValueError("matrix contains non-finite values")
    lines = ["id," + ",".join(f"v{k}" for k in range(rows.shape[1]))]
    for ex_id, row in zip(ids, rows):
        lines.append(ex_id + "," + ",".join(format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def model_file_stem(index: int, model_id: str) -> str:
    return f"{index:02d}-{sanitize_filename(model_id)}"


def write_manifest(
    out_dir: Path,
    num_classes: int,
    model_ids: Sequence[str],
    has_knowledge: bool,
    manifest_name: str = "manifest.json",
) -> Path:
    models = []
    for idx, model_id in enumerate(model_ids):
        stem = model_file_stem(idx, model_id)
        models.append(
            {
                "id": model_id,
                "probs": f"{stem}.probs.csv",
                "embeddings": f"{stem}.embeddings.csv",
            }
        )
    doc: dict = {"num_classes": num_classes, "labels": "labels.csv", "models": models}
    if has_knowledge:
        doc["knowledge"] = {
            "wiki": "knowledge.wiki.csv",
            "commonsense": "knowledge.commonsense.csv",
        }
    path = Path(out_dir) / manifest_name
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_sidecar(path: Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
