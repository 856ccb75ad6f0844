"""Sentence-level knowledge vectors from word-vector tables.

A table is a text file in the common word-vector format: one entry per
line, `token v1 v2 ... vd`, whitespace-separated.  A sentence's vector is
the mean of the vectors of its matched token occurrences (repeats count
each time).  Sentences with no matched token fall back to the corpus mean
(the mean over sentences that did match) and are flagged for the sidecar
report; zeros are never emitted because the downstream validator rejects
all-zero rows.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Sequence

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9']+")


class KnowledgeError(ValueError):
    pass


def tokenize(text: str) -> list:
    """Lowercase word tokens; the lookup key into vector tables."""
    return _TOKEN_RE.findall(text.lower())


def load_vector_table(path) -> dict:
    """Parse `token v1 ... vd` lines into {token: float64 vector}."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise KnowledgeError(f"{path}: file not found")
    table: dict = {}
    dim = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 2:
            raise KnowledgeError(f"{path}:{lineno}: expected 'token v1 ... vd'")
        token = fields[0]
        try:
            vec = np.array([float(v) for v in fields[1:]], dtype=np.float64)
        except ValueError:
            raise KnowledgeError(f"{path}:{lineno}: non-numeric vector value")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise KnowledgeError(
                f"{path}:{lineno}: vector has {vec.size} values, expected {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise KnowledgeError(f"{path}:{lineno}: non-finite vector value")
        table[token] = vec
    if not table:
        raise KnowledgeError(f"{path}: empty vector table")
    return table


def sentence_vectors(texts: Sequence[str], table: dict):
    """Token-mean vector per text, with corpus-mean fallback.

    Returns (matrix, fallback_indices): matrix is len(texts) x d, and
    fallback_indices lists the rows that had no matched token and received
    the mean of the matched rows instead.
    """
    dim = len(next(iter(table.values())))
    rows = np.zeros((len(texts), dim), dtype=np.float64)
    fallback = []
    for i, text in enumerate(texts):
        matched = [table[tok] for tok in tokenize(text) if tok in table]
        if matched:
            rows[i] = np.mean(matched, axis=0)
        else:
            fallback.append(i)
    if fallback:
        matched_rows = np.delete(rows, fallback, axis=0)
        if matched_rows.size == 0:
            raise KnowledgeError("no sentence matched any table token")
        mean = matched_rows.mean(axis=0)
        for i in fallback:
            rows[i] = mean
    return rows, fallback
