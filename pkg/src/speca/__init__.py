"""Specification-to-checklist auditing for multi-implementation codebases."""

__version__ = "0.1.0"
