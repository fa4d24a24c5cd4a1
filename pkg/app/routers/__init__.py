from . import evaluate, explain, features, predict, preprocess, summary, train

__all__ = [
    "evaluate",
    "explain",
    "features",
    "predict",
    "preprocess",
    "summary",
    "train",
]
