"""Readability-controlled paraphrase generation and evaluation toolkit."""

__version__ = "0.1.0"

from .textcore import TARGET_LEVELS, TextAnalysis, analyze, classify  # noqa: F401
