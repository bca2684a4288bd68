"""Monkey walks: random walks with preferential relocation to their own past."""
__version__ = "0.1.0"
