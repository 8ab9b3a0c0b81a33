"""Positive-unlabeled risk scoring with grouped cross-validation and bagged forests."""

__version__ = "0.1.0"
