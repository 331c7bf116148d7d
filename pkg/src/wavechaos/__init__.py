"""Tree expansions, Wick moments and analytic-space tools for random wave fields."""

__version__ = "0.1.0"
