"""Batch transformer sentence-embedding exporter for the tar-rank engine."""

__version__ = "0.1.0"
