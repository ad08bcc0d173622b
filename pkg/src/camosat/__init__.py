"""Oracle-guided SAT recovery of fully camouflaged gate-level netlists."""

__version__ = "0.1.0"
