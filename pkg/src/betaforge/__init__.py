"""Scaled-Beta price features, an instrumented random forest and zero-variance regularization experiments."""

__version__ = "0.1.0"
