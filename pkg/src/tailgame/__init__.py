"""Cooperative multi-player multi-label learning with rarity and disagreement curiosity."""

__version__ = "0.1.0"
