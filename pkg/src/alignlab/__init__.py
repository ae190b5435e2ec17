"""Word alignment from the attention of small neural translation models."""

__version__ = "0.1.0"
