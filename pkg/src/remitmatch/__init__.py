"""Matching bank transfers to club members with boosted trees and score stacking."""

__version__ = "0.1.0"

from .core import Dataset, MatchSet, Member, ScoredPair, Transfer, validate_dataset  # noqa: E402

__all__ = ["Dataset", "MatchSet", "Member", "ScoredPair", "Transfer", "validate_dataset", "__version__"]
