"""Utility functions and helpers."""

from .logger import setup_logging
from .metrics import StageTimer

__all__ = ['setup_logging', 'StageTimer']
