"""
Wall-clock timing of pipeline steps.
"""

import time
from contextlib import contextmanager
from typing import Dict, Iterator, List

import numpy as np


class StageTimer:
    """Collects elapsed seconds per named step (glue, perturbation, ...)."""

    def __init__(self) -> None:
        self.timings: Dict[str, List[float]] = {}

    @contextmanager
    def measure(self, step: str) -> Iterator[None]:
        """
        Context manager timing one execution of ``step``.

        Usage:
            with timer.measure('glue'):
                # code to measure
        """
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings.setdefault(step, []).append(time.perf_counter() - start)

    def get_stats(self, step: str) -> Dict[str, float]:
        """Get statistics for a step."""
        values = self.timings.get(step)
        if not values:
            return {}
        arr = np.asarray(values)
        return {
            'count': int(arr.size),
            'total': float(arr.sum()),
            'mean': float(arr.mean()),
            'max': float(arr.max()),
            'p50': float(np.percentile(arr, 50)),
        }

    def summary(self) -> Dict[str, Dict[str, float]]:
        """Statistics for every step seen so far."""
        return {step: self.get_stats(step) for step in sorted(self.timings)}

    def reset(self) -> None:
        """Clear all timings."""
        self.timings.clear()
