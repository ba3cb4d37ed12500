"""Regression test classification and prioritization for use-case-driven product lines."""

__version__ = "0.1.0"
