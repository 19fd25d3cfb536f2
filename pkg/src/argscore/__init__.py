"""Argument quality scoring: corpus tools, LLM-based context generation,
a dual-encoder regression model, training, and correlation-based evaluation."""

__version__ = "0.1.0"
