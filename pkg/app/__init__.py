"""Emotion classification, intensity regression and attribution for tweets."""

__all__ = [
    "config",
    "db",
    "errors",
    "models",
]
