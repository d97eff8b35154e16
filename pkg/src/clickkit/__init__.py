"""Echolocation click detection, post-processing, classification and scoring."""

__version__ = "0.1.0"
