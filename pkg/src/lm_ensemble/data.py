"""Shared data model, the CSV/JSON interchange format, and alignment validation.

All strategies consume one :class:`EnsembleInput`: a labeled dataset plus, per
model, a row-stochastic class-probability matrix and a sentence-embedding
matrix, optionally joined by a pair of knowledge-embedding matrices.  Files
use the plain-text format described in docs/FORMAT.md; floats are written in
shortest round-trip decimal form so a write/load cycle is lossless.

Labels are 0-based both on disk and in memory.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .rng import STREAM_SPLIT, CounterRng

ROW_SUM_TOL = 1e-6
_LABEL_RE = re.compile(r"^(0|[1-9][0-9]*)$")
_ID_BAD_CHARS = set(',"\r\n')


class FormatError(ValueError):
    """A file could not be parsed or violates the interchange format.

    Carries the offending file and (1-based) line number when known.
    """

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class ValidationIssue:
    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}"


class AlignmentError(ValueError):
    """An EnsembleInput failed validation; collects every issue found."""

    def __init__(self, issues: Sequence[ValidationIssue]):
        self.issues = list(issues)
        head = "; ".join(str(i) for i in self.issues[:3])
        more = f" (+{len(self.issues) - 3} more)" if len(self.issues) > 3 else ""
        super().__init__(f"{len(self.issues)} validation issue(s): {head}{more}")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabeledDataset:
    """Example ids, gold class labels, and the class count.

    The id order is canonical: every aligned matrix must follow it row for row.
    """

    ids: tuple
    labels: np.ndarray  # int64, values in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "labels", _freeze(np.asarray(self.labels, dtype=np.int64)))

    @property
    def num_examples(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class ProbMatrix:
    """One model's row-stochastic m x c class-probability table."""

    model_id: str
    rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", _freeze(np.asarray(self.rows, dtype=np.float64)))


@dataclass(frozen=True)
class EmbeddingMatrix:
    """One model's m x d sentence-embedding table."""

    model_id: str
    rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", _freeze(np.asarray(self.rows, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class KnowledgePair:
    """Aligned Wikipedia / CommonSense knowledge embeddings, m x d_K each."""

    wiki: np.ndarray
    commonsense: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "wiki", _freeze(np.asarray(self.wiki, dtype=np.float64)))
        object.__setattr__(self, "commonsense", _freeze(np.asarray(self.commonsense, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.wiki.shape[1]


@dataclass(frozen=True)
class EnsembleInput:
    """Everything a strategy needs, already aligned to one dataset.

    ``sources`` maps logical sections ("labels", "probs:<model_id>", ...) to
    the file each came from, when the input was loaded from disk; it is used
    only to point error messages at files and does not affect equality.
    """

    dataset: LabeledDataset
    prob_matrices: tuple
    embedding_matrices: tuple
    knowledge: Optional[KnowledgePair] = None
    sources: Optional[dict] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "prob_matrices", tuple(self.prob_matrices))
        object.__setattr__(self, "embedding_matrices", tuple(self.embedding_matrices))

    @property
    def model_ids(self) -> tuple:
        return tuple(p.model_id for p in self.prob_matrices)

    @property
    def num_models(self) -> int:
        return len(self.prob_matrices)


# ---------------------------------------------------------------------------
# numeric formatting / renormalization


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))


def renormalize_rows(rows: np.ndarray, max_iter: int = 8) -> np.ndarray:
    """Rescale each row so its float sum is exactly 1.0.

    Division by the exact sum can oscillate forever between 1.0 +/- 1 ulp,
    so after a few division passes any remaining residual is folded into the
    row's largest entry, where a quantum that small is absorbed exactly.
    The operation is idempotent, which is what guarantees that a written
    file loads back bit-identically.
    """
    out = np.array(rows, dtype=np.float64)
    for _ in range(max_iter):
        sums = out.sum(axis=1, keepdims=True)
        if np.all(sums == 1.0):
            return out
        out = out / sums
    for i in np.nonzero(out.sum(axis=1) != 1.0)[0]:
        row = out[i]
        for j in np.argsort(-row):
            original = row[j]
            for _ in range(4):
                delta = 1.0 - row.sum()
                if delta == 0.0:
                    break
                row[j] += delta
            if row.sum() == 1.0:
                break
            row[j] = original
        else:
            raise ValueError(f"row {i} cannot be rescaled to an exact unit sum")
    return out


# ---------------------------------------------------------------------------
# low-level CSV reading


def _read_lines(path: Path):
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise FormatError("file not found", path)
    if raw.startswith(b"\xef\xbb\xbf"):
        raise FormatError("byte-order mark not allowed", path, 1)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"not valid UTF-8: {e}", path)
    if text.startswith("﻿"):
        raise FormatError("byte-order mark not allowed", path, 1)
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n")


def _split_row(line: str, path: Path, lineno: int):
    if line == "":
        raise FormatError("blank line not allowed", path, lineno)
    if line.endswith(","):
        raise FormatError("trailing comma not allowed", path, lineno)
    fields = line.split(",")
    if any(f == "" for f in fields):
        raise FormatError("empty field", path, lineno)
    return fields


def _check_id(token: str, path: Path, lineno: int) -> str:
    if token == "" or any(ch in _ID_BAD_CHARS for ch in token):
        raise FormatError(f"invalid id {token!r}", path, lineno)
    return token


def _parse_value(token: str, path: Path, lineno: int) -> float:
    if token != token.strip():
        raise FormatError(f"value has surrounding whitespace: {token!r}", path, lineno)
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"not a number: {token!r}", path, lineno)


def read_labels_csv(path: Path):
    """Parse a labels file into (ids, labels); ids are checked for uniqueness."""
    lines = _read_lines(path)
    if not lines or lines[0] != "id,label":
        raise FormatError("expected header 'id,label'", path, 1)
    ids, labels = [], []
    seen = {}
    for lineno, line in enumerate(lines[1:], start=2):
        fields = _split_row(line, path, lineno)
        if len(fields) != 2:
            raise FormatError(f"expected 2 fields, found {len(fields)}", path, lineno)
        ex_id = _check_id(fields[0], path, lineno)
        if ex_id in seen:
            raise FormatError(f"duplicate id {ex_id!r} (first seen on line {seen[ex_id]})", path, lineno)
        seen[ex_id] = lineno
        if not _LABEL_RE.match(fields[1]):
            raise FormatError(f"label must be a non-negative integer, found {fields[1]!r}", path, lineno)
        ids.append(ex_id)
        labels.append(int(fields[1]))
    if not ids:
        raise FormatError("dataset has no examples", path)
    return ids, labels


def read_matrix_csv(path: Path, expected_ids: Sequence[str]):
    """Parse a matrix file, enforcing header shape and the canonical id order."""
    lines = _read_lines(path)
    if not lines:
        raise FormatError("empty file", path, 1)
    header = lines[0].split(",")
    if len(header) < 2 or header[0] != "id":
        raise FormatError("expected header 'id,v0,v1,...'", path, 1)
    width = len(header) - 1
    for k, name in enumerate(header[1:]):
        if name != f"v{k}":
            raise FormatError(f"expected column 'v{k}', found {name!r}", path, 1)
    body = lines[1:]
    if len(body) != len(expected_ids):
        raise FormatError(
            f"expected {len(expected_ids)} data rows (one per labeled example), found {len(body)}",
            path,
        )
    values = np.empty((len(body), width), dtype=np.float64)
    for i, line in enumerate(body):
        lineno = i + 2
        fields = _split_row(line, path, lineno)
        if len(fields) != width + 1:
            raise FormatError(f"expected {width + 1} fields, found {len(fields)}", path, lineno)
        ex_id = _check_id(fields[0], path, lineno)
        if ex_id != expected_ids[i]:
            raise FormatError(
                f"id order mismatch: expected {expected_ids[i]!r}, found {ex_id!r}", path, lineno
            )
        for j, token in enumerate(fields[1:]):
            values[i, j] = _parse_value(token, path, lineno)
    return values


# ---------------------------------------------------------------------------
# manifest


_MANIFEST_KEYS = {"num_classes", "labels", "models", "knowledge"}
_MODEL_KEYS = {"id", "probs", "embeddings"}


def _parse_manifest(path: Path) -> dict:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FormatError("file not found", path)
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno)
    if not isinstance(doc, dict):
        raise FormatError("manifest must be a JSON object", path)
    unknown = set(doc) - _MANIFEST_KEYS
    if unknown:
        raise FormatError(f"unknown manifest keys: {sorted(unknown)}", path)
    if not isinstance(doc.get("num_classes"), int) or doc["num_classes"] < 1:
        raise FormatError("'num_classes' must be a positive integer", path)
    if not isinstance(doc.get("labels"), str):
        raise FormatError("'labels' must be a path string", path)
    models = doc.get("models")
    if not isinstance(models, list) or not models:
        raise FormatError("'models' must be a non-empty array", path)
    seen_ids = set()
    for entry in models:
        if not isinstance(entry, dict) or set(entry) != _MODEL_KEYS:
            raise FormatError("each model entry needs exactly the keys id/probs/embeddings", path)
        if not all(isinstance(entry[k], str) for k in _MODEL_KEYS):
            raise FormatError("model entry fields must be strings", path)
        if entry["id"] in seen_ids:
            raise FormatError(f"duplicate model id {entry['id']!r}", path)
        seen_ids.add(entry["id"])
    if "knowledge" in doc:
        kn = doc["knowledge"]
        if not isinstance(kn, dict) or set(kn) != {"wiki", "commonsense"} or not all(
            isinstance(v, str) for v in kn.values()
        ):
            raise FormatError("'knowledge' must be an object with wiki/commonsense paths", path)
    return doc


def scan_manifest(path):
    """Parse a manifest and its files, collecting problems instead of raising.

    Returns ``(input_or_none, issues)``.  Parse failures in one file do not
    stop the scan of the others; the input is only constructed when every
    file parsed.  Semantic violations (row sums, ranges, zero rows, ...) are
    appended by :func:`validate_alignment`.
    """
    path = Path(path)
    issues = []
    try:
        doc = _parse_manifest(path)
    except FormatError as e:
        return None, [ValidationIssue(_loc(e), _msg(e))]
    base = path.parent

    def resolve(p):
        return base / p

    ids = labels = None
    labels_path = resolve(doc["labels"])
    try:
        ids, labels = read_labels_csv(labels_path)
    except FormatError as e:
        issues.append(ValidationIssue(_loc(e), _msg(e)))
    probs, embeds = [], []
    sources = {"labels": str(labels_path)}
    parse_failed = ids is None
    for entry in doc["models"]:
        for kind, bucket in (("probs", probs), ("embeddings", embeds)):
            fpath = resolve(entry[kind])
            sources[f"{kind}:{entry['id']}"] = str(fpath)
            if ids is None:
                continue
            try:
                rows = read_matrix_csv(fpath, ids)
                bucket.append((entry["id"], rows))
            except FormatError as e:
                issues.append(ValidationIssue(_loc(e), _msg(e)))
                parse_failed = True
    knowledge = None
    if "knowledge" in doc and ids is not None:
        mats = {}
        for kind in ("wiki", "commonsense"):
            fpath = resolve(doc["knowledge"][kind])
            sources[f"knowledge:{kind}"] = str(fpath)
            try:
                mats[kind] = read_matrix_csv(fpath, ids)
            except FormatError as e:
                issues.append(ValidationIssue(_loc(e), _msg(e)))
                parse_failed = True
        if len(mats) == 2:
            knowledge = KnowledgePair(wiki=mats["wiki"], commonsense=mats["commonsense"])
    if parse_failed:
        return None, issues

    inp = EnsembleInput(
        dataset=LabeledDataset(ids=ids, labels=labels, num_classes=doc["num_classes"]),
        prob_matrices=[ProbMatrix(mid, rows) for mid, rows in probs],
        embedding_matrices=[EmbeddingMatrix(mid, rows) for mid, rows in embeds],
        knowledge=knowledge,
        sources=sources,
    )
    issues.extend(validate_alignment(inp))
    return inp, issues


def _loc(e: FormatError) -> str:
    if e.path is None:
        return "manifest"
    return f"{e.path}:{e.line}" if e.line is not None else e.path


def _msg(e: FormatError) -> str:
    s = str(e)
    prefix = _loc(e) + ": "
    return s[len(prefix):] if s.startswith(prefix) else s


def load_manifest(path) -> EnsembleInput:
    """Load and fully validate an EnsembleInput from a manifest file.

    Probability rows are renormalized to exact unit sums after validation,
    so downstream arithmetic can rely on them.  Raises :class:`FormatError`
    or :class:`AlignmentError` on any violation.
    """
    inp, issues = scan_manifest(path)
    if issues:
        raise AlignmentError(issues)
    assert inp is not None
    probs = tuple(
        ProbMatrix(p.model_id, renormalize_rows(p.rows)) for p in inp.prob_matrices
    )
    return EnsembleInput(
        dataset=inp.dataset,
        prob_matrices=probs,
        embedding_matrices=inp.embedding_matrices,
        knowledge=inp.knowledge,
        sources=inp.sources,
    )


# ---------------------------------------------------------------------------
# validation


def validate_alignment(inp: EnsembleInput):
    """Check every cross-structure invariant; returns a list of issues.

    The list is empty exactly when the input is valid.  Locations cite the
    source file and line when the input was loaded from disk, and the
    logical position (model id, row, column) otherwise.
    """
    issues = []
    sources = inp.sources or {}

    def where(section: str, row: Optional[int] = None) -> str:
        src = sources.get(section)
        if src is not None:
            return f"{src}:{row + 2}" if row is not None else src
        return f"{section} row {row}" if row is not None else section

    ds = inp.dataset
    m = ds.num_examples
    if m < 1:
        issues.append(ValidationIssue(where("labels"), "dataset has no examples"))
    if ds.num_classes < 1:
        issues.append(ValidationIssue(where("labels"), "num_classes must be positive"))
    if len(ds.labels) != m:
        issues.append(ValidationIssue(where("labels"), f"{len(ds.labels)} labels for {m} ids"))
    if len(set(ds.ids)) != m:
        issues.append(ValidationIssue(where("labels"), "ids are not unique"))
    for i, lab in enumerate(ds.labels):
        if not (0 <= lab < ds.num_classes):
            issues.append(
                ValidationIssue(
                    where("labels", i),
                    f"label {lab} out of range [0, {ds.num_classes - 1}] (id={ds.ids[i]!r})",
                )
            )

    if inp.num_models < 1:
        issues.append(ValidationIssue("manifest", "at least one model is required"))
    prob_ids = [p.model_id for p in inp.prob_matrices]
    emb_ids = [e.model_id for e in inp.embedding_matrices]
    if prob_ids != emb_ids:
        issues.append(
            ValidationIssue(
                "manifest", f"probability/embedding model ids differ: {prob_ids} vs {emb_ids}"
            )
        )

    for p in inp.prob_matrices:
        sec = f"probs:{p.model_id}"
        if p.rows.shape[0] != m:
            issues.append(ValidationIssue(where(sec), f"{p.rows.shape[0]} rows for {m} examples"))
            continue
        if p.rows.shape[1] != ds.num_classes:
            issues.append(
                ValidationIssue(
                    where(sec),
                    f"{p.rows.shape[1]} class columns but num_classes={ds.num_classes}",
                )
            )
            continue
        bad = ~np.isfinite(p.rows)
        for i, j in zip(*np.nonzero(bad)):
            issues.append(
                ValidationIssue(where(sec, int(i)), f"non-finite value in column {j} (id={ds.ids[i]!r})")
            )
        rng_bad = np.isfinite(p.rows) & ((p.rows < 0.0) | (p.rows > 1.0))
        for i, j in zip(*np.nonzero(rng_bad)):
            issues.append(
                ValidationIssue(
                    where(sec, int(i)),
                    f"probability {p.rows[i, j]!r} outside [0,1] in column {j} (id={ds.ids[i]!r})",
                )
            )
        if not bad.any():
            sums = p.rows.sum(axis=1)
            for i in np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]:
                issues.append(
                    ValidationIssue(
                        where(sec, int(i)),
                        f"row sums to {sums[i]!r}, outside 1 +/- {ROW_SUM_TOL} (id={ds.ids[i]!r})",
                    )
                )

    for e in inp.embedding_matrices:
        sec = f"embeddings:{e.model_id}"
        if e.rows.shape[0] != m:
            issues.append(ValidationIssue(where(sec), f"{e.rows.shape[0]} rows for {m} examples"))
            continue
        if e.rows.shape[1] < 1:
            issues.append(ValidationIssue(where(sec), "embedding dimension must be positive"))
        bad = ~np.isfinite(e.rows)
        for i, j in zip(*np.nonzero(bad)):
            issues.append(
                ValidationIssue(
                    where(sec, int(i)),
                    f"non-finite value in column {j} (model {e.model_id!r}, id={ds.ids[i]!r})",
                )
            )

    if inp.knowledge is not None:
        kn = inp.knowledge
        if kn.wiki.shape[1] != kn.commonsense.shape[1]:
            issues.append(
                ValidationIssue(
                    "knowledge",
                    f"wiki dim {kn.wiki.shape[1]} != commonsense dim {kn.commonsense.shape[1]}",
                )
            )
        for sec, mat in (("knowledge:wiki", kn.wiki), ("knowledge:commonsense", kn.commonsense)):
            if mat.shape[0] != m:
                issues.append(ValidationIssue(where(sec), f"{mat.shape[0]} rows for {m} examples"))
                continue
            bad = ~np.isfinite(mat)
            for i, j in zip(*np.nonzero(bad)):
                issues.append(
                    ValidationIssue(where(sec, int(i)), f"non-finite value in column {j} (id={ds.ids[i]!r})")
                )
            if not bad.any():
                for i in np.nonzero(~mat.any(axis=1))[0]:
                    issues.append(
                        ValidationIssue(
                            where(sec, int(i)),
                            f"all-zero knowledge row (id={ds.ids[i]!r}); cosine is undefined",
                        )
                    )
    return issues


# ---------------------------------------------------------------------------
# operations


def concat_embeddings(inp: EnsembleInput) -> np.ndarray:
    """Row-wise concatenation of the member embeddings, in manifest model order."""
    return np.hstack([e.rows for e in inp.embedding_matrices])


def holdout_split(seed: int, m: int, fraction: float):
    """Deterministically partition range(m) into (train, holdout) index arrays.

    The split depends only on (seed, m, fraction): a seeded permutation whose
    first round(fraction*m) entries are held out.
    """
    if not (0.0 < fraction < 1.0):
        raise ValueError("holdout fraction must be in (0, 1)")
    perm = CounterRng(seed, STREAM_SPLIT).permutation(m)
    k = int(math.floor(fraction * m + 0.5))
    hold = np.sort(perm[:k])
    train = np.sort(perm[k:])
    return train, hold


# ---------------------------------------------------------------------------
# writing


def _sanitize(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", model_id)


def write_matrix_csv(path: Path, ids: Sequence[str], rows: np.ndarray):
    rows = np.asarray(rows, dtype=np.float64)
    lines = ["id," + ",".join(f"v{k}" for k in range(rows.shape[1]))]
    for ex_id, row in zip(ids, rows):
        lines.append(ex_id + "," + ",".join(format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_labels_csv(path: Path, ids: Sequence[str], labels: Sequence[int]):
    lines = ["id,label"] + [f"{ex_id},{int(lab)}" for ex_id, lab in zip(ids, labels)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_input(inp: EnsembleInput, out_dir, manifest_name: str = "manifest.json") -> Path:
    """Write an EnsembleInput as a manifest plus CSV files; returns the manifest path.

    File contents depend only on the input values, so identical inputs always
    produce byte-identical trees.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = inp.dataset
    for ex_id in ds.ids:
        if any(ch in _ID_BAD_CHARS for ch in ex_id) or ex_id == "":
            raise ValueError(f"id {ex_id!r} cannot be represented in the CSV format")
    write_labels_csv(out / "labels.csv", ds.ids, ds.labels)
    models = []
    for idx, (p, e) in enumerate(zip(inp.prob_matrices, inp.embedding_matrices)):
        stem = f"{idx:02d}-{_sanitize(p.model_id)}"
        write_matrix_csv(out / f"{stem}.probs.csv", ds.ids, p.rows)
        write_matrix_csv(out / f"{stem}.embeddings.csv", ds.ids, e.rows)
        models.append(
            {"id": p.model_id, "probs": f"{stem}.probs.csv", "embeddings": f"{stem}.embeddings.csv"}
        )
    doc = {"num_classes": ds.num_classes, "labels": "labels.csv", "models": models}
    if inp.knowledge is not None:
        write_matrix_csv(out / "knowledge.wiki.csv", ds.ids, inp.knowledge.wiki)
        write_matrix_csv(out / "knowledge.commonsense.csv", ds.ids, inp.knowledge.commonsense)
        doc["knowledge"] = {"wiki": "knowledge.wiki.csv", "commonsense": "knowledge.commonsense.csv"}
    manifest = out / manifest_name
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
