"""Finite-depth construction and checks for an unbounded Wermer-type pluripolar set."""

__version__ = "0.1.0"
