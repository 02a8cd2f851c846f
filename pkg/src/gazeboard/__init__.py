"""Gamified gaze data collection over a transparent letter board.

A two-player word quiz whose byproduct is a labeled appearance-based gaze
dataset, plus the geometry, persistence, and evaluation tooling around it.
"""

from .errors import GazeboardError

__version__ = "0.1.0"

__all__ = ["GazeboardError", "__version__"]
