"""Two-particle matter-wave interference from colliding condensates."""

__version__ = "0.1.0"
