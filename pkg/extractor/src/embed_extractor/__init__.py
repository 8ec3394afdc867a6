"""Contextual verb-embedding extractor producing dataset files."""

from .extract import (
    AnnotatedSentence,
    ExtractorError,
    extract_file,
    extract_records,
    load_annotations,
    load_model,
    write_records,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "ExtractorError",
    "extract_file",
    "extract_records",
    "load_annotations",
    "load_model",
    "write_records",
    "__version__",
]
