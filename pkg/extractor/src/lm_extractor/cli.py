"""Command-line entry point: `lm-extract job.json [--out DIR]`."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from lm_extractor.inference import CheckpointError
from lm_extractor.job import JobError, load_job
from lm_extractor.knowledge import KnowledgeError
from lm_extractor.pipeline import run_job


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lm-extract",
        description=(
            "Run transformer checkpoints over a labeled text dataset and write "
            "the manifest + CSV files consumed by lm-ensemble."
        ),
    )
    p.add_argument("job", help="job description JSON file")
    p.add_argument(
        "--out", metavar="DIR", default=None,
        help="override the job's output_dir",
    )
    return p


def main(argv=None) -> int:
    level = os.environ.get("LM_EXTRACT_LOG")
    if level:
        logging.basicConfig(level=level.upper(), stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        job = load_job(args.job)
        if args.out is not None:
            job = replace(job, output_dir=Path(args.out))
        manifest = run_job(job)
    except (JobError, KnowledgeError, CheckpointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    doc = json.loads(manifest.read_text(encoding="utf-8"))
    for key, value in [
        ("manifest", str(manifest)),
        ("examples", str(len(job.ids))),
        ("classes", str(job.num_classes)),
        ("models", ", ".join(m["id"] for m in doc["models"])),
        ("knowledge", "yes" if "knowledge" in doc else "no"),
    ]:
        print(f"{key:9s}  {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
