"""covergrid: deterministic multi-robot on-line coverage planning workbench."""

__version__ = "0.1.0"
