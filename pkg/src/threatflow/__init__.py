"""Cloud threat analysis on timed, typed, hierarchical Petri nets."""

__version__ = "0.1.0"
