"""
Human-readable formatting helpers for CLI summaries.
"""

from typing import Iterable


def format_ns(duration_ns: float) -> str:
    """
    Format a duration in nanoseconds to a human-readable string.

    Args:
        duration_ns: Duration in nanoseconds

    Returns:
        Formatted string (e.g., "1.5 ms")
    """
    for unit in ["ns", "us", "ms"]:
        if abs(duration_ns) < 1000.0:
            return f"{duration_ns:.1f} {unit}"
        duration_ns /= 1000.0
    return f"{duration_ns:.3f} s"


def format_count(count: int) -> str:
    """Thousands-separated integer (e.g., "12,345")."""
    return f"{count:,}"


def format_real(value: float) -> str:
    """Round-trippable real, as every number on stdout is printed."""
    return f"{value:.17g}"


def format_vector(values: Iterable[float], sep: str = " ") -> str:
    return sep.join(format_real(float(v)) for v in values)
