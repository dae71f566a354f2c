"""Adversarial generator training against semantic-feature discriminators."""

__version__ = "0.1.0"
