"""Sentiment-feature workbench: lexicon extraction, model benchmarking, and
model-agnostic explanation figures for review-rating predictors."""

__version__ = "0.1.0"

from sentiscope.models.kernels import active_backend

__all__ = ["active_backend", "__version__"]
