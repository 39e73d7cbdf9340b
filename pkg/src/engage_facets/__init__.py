"""Engagement-facet recognition from contextual and relational interaction features."""

__version__ = "0.1.0"
