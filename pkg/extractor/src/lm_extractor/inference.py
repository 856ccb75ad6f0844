"""Checkpoint inference: class probabilities + pooled sentence embeddings.

Determinism: inference runs on CPU with a single torch thread, eval mode,
no gradients, and a fixed batching of the input order, so a rerun over
identical inputs produces bit-identical float64 outputs (and therefore
byte-identical CSV files downstream).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lm_extractor.job import ExtractionJob

# Models advertising no real length limit use a huge sentinel; cap those.
_DEFAULT_MAX_LENGTH = 512


class CheckpointError(RuntimeError):
    """A checkpoint could not be loaded or does not fit the job."""


@dataclass(frozen=True)
class ModelOutputs:
    model_id: str
    probs: np.ndarray  # (m, c) float64, rows summing to 1
    embeddings: np.ndarray  # (m, hidden) float64
    truncated_ids: tuple  # example ids longer than max_length
    max_length: int


def _softmax64(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def _quiet_transformers():
    import transformers

    transformers.logging.set_verbosity_error()
    try:
        transformers.logging.disable_progress_bar()
    except AttributeError:
        pass


def run_checkpoint(job: ExtractionJob, checkpoint: str) -> ModelOutputs:
    """Run one checkpoint over every job text, in order."""
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    _quiet_transformers()
    torch.set_num_threads(1)
    try:
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForSequenceClassification.from_pretrained(
            checkpoint, output_hidden_states=True
        )
    except Exception as e:
        raise CheckpointError(f"cannot load checkpoint {checkpoint}: {e}") from e
    head = int(model.config.num_labels)
    if head != job.num_classes:
        raise CheckpointError(
            f"checkpoint {checkpoint} has a {head}-class head, job expects {job.num_classes}"
        )
    max_length = job.max_length
    if max_length is None:
        max_length = min(int(tokenizer.model_max_length), _DEFAULT_MAX_LENGTH)
    model.eval()

    truncated = []
    prob_chunks, embed_chunks = [], []
    with torch.no_grad():
        for start in range(0, job.num_examples, job.batch_size):
            batch = list(job.texts[start : start + job.batch_size])
            full = tokenizer(batch, truncation=False)["input_ids"]
            for offset, ids in enumerate(full):
                if len(ids) > max_length:
                    truncated.append(job.ids[start + offset])
            enc = tokenizer(
                batch,
                padding=True,
                truncation=True,
                max_length=max_length,
                return_tensors="pt",
            )
            out = model(**enc)
            prob_chunks.append(_softmax64(out.logits.numpy().astype(np.float64)))
            hidden = out.hidden_states[-1]
            if job.pooling == "summary":
                pooled = hidden[:, 0, :]
            else:  # masked mean over real (unpadded) positions
                mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
            embed_chunks.append(pooled.numpy().astype(np.float64))
    return ModelOutputs(
        model_id=checkpoint,
        probs=np.concatenate(prob_chunks, axis=0),
        embeddings=np.concatenate(embed_chunks, axis=0),
        truncated_ids=tuple(truncated),
        max_length=max_length,
    )


def extract_model_outputs(job: ExtractionJob) -> list:
    """Run every checkpoint in job order."""
    return [run_checkpoint(job, ckpt) for ckpt in job.checkpoints]
