"""Motion primitive generation and lattice planning for vehicle families."""

__version__ = "0.1.0"
