"""
HessCraft benchmark families and timing harness.
"""

from bench.family_manager import FamilySpec, expected_nnz, make_family

__all__ = ["FamilySpec", "expected_nnz", "make_family"]
