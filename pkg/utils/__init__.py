"""Utils package - Utility functions for HessCraft"""

from .formatting import format_count, format_ns, format_real, format_vector

__all__ = [
    'format_count',
    'format_ns',
    'format_real',
    'format_vector'
]
