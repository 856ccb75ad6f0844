"""Produce lm-ensemble interchange files from transformer checkpoints.

This package is deliberately independent of lm-ensemble: it talks to it
only through the on-disk formats (manifest + CSVs, see the main project's
docs/FORMAT.md) and the CLI.
"""

from lm_extractor.job import ExtractionJob, load_job
from lm_extractor.pipeline import run_job

__all__ = ["ExtractionJob", "load_job", "run_job"]
