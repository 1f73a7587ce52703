"""Color-adaptation strategies for single-image HDR lighting estimation, and their evaluation."""

__version__ = "0.1.0"
