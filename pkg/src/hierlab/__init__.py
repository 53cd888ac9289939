"""Highlight experience replay, its curriculum-augmented variant, and the
bootstrap evaluation statistics, on built-in sparse-reward point tasks."""

__version__ = "0.1.0"
