"""Marcum Q semi-linear approximation and predictor-antenna link adaptation."""

__version__ = "0.1.0"
