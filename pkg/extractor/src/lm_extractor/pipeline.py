"""End-to-end job execution: inference + knowledge + interchange files."""

from __future__ import annotations

from pathlib import Path

from lm_extractor.inference import extract_model_outputs
from lm_extractor.interchange import (
    model_file_stem,
    write_labels_csv,
    write_manifest,
    write_matrix_csv,
    write_sidecar,
)
from lm_extractor.job import ExtractionJob
from lm_extractor.knowledge import KnowledgeError, load_vector_table, sentence_vectors


def _model_ids(job: ExtractionJob) -> list:
    """Readable ids: checkpoint basenames when unique, else the full strings."""
    names = [Path(c).name for c in job.checkpoints]
    return names if len(set(names)) == len(names) else list(job.checkpoints)


def run_job(job: ExtractionJob) -> Path:
    """Execute the job; returns the manifest path.

    Writes labels.csv, one probs/embeddings CSV pair per checkpoint,
    optional knowledge CSVs, manifest.json, and two sidecar reports
    (extraction-log.json, knowledge-log.json when knowledge is built).
    """
    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_labels_csv(out / "labels.csv", job.ids, job.labels)

    outputs = extract_model_outputs(job)
    model_ids = _model_ids(job)
    log_models = []
    for idx, (model_id, result) in enumerate(zip(model_ids, outputs)):
        stem = model_file_stem(idx, model_id)
        write_matrix_csv(out / f"{stem}.probs.csv", job.ids, result.probs)
        write_matrix_csv(out / f"{stem}.embeddings.csv", job.ids, result.embeddings)
        log_models.append(
            {
                "model_id": model_id,
                "checkpoint": result.model_id,
                "hidden_dim": int(result.embeddings.shape[1]),
                "max_length": result.max_length,
                "truncated_ids": list(result.truncated_ids),
            }
        )
    write_sidecar(
        out / "extraction-log.json",
        {
            "batch_size": job.batch_size,
            "pooling": job.pooling,
            "torch_threads": 1,
            "models": log_models,
        },
    )

    if job.knowledge_paths is not None:
        sources = {}
        dims = {}
        for name in ("wiki", "commonsense"):
            table = load_vector_table(job.knowledge_paths[name])
            rows, fallback = sentence_vectors(job.texts, table)
            sources[name] = (rows, fallback)
            dims[name] = rows.shape[1]
        if dims["wiki"] != dims["commonsense"]:
            raise KnowledgeError(
                f"knowledge tables disagree on dimension: wiki {dims['wiki']}, "
                f"commonsense {dims['commonsense']}"
            )
        log = {"dim": dims["wiki"], "sources": {}}
        for name, (rows, fallback) in sources.items():
            write_matrix_csv(out / f"knowledge.{name}.csv", job.ids, rows)
            log["sources"][name] = {
                "table": str(job.knowledge_paths[name]),
                "fallback_ids": [job.ids[i] for i in fallback],
            }
        write_sidecar(out / "knowledge-log.json", log)

    return write_manifest(
        out, job.num_classes, model_ids, has_knowledge=job.knowledge_paths is not None
    )
