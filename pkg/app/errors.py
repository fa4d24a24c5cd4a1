from __future__ import annotations

from typing import Optional


class TweetAffectError(Exception):
    """Base class for every error raised by the toolkit."""


class DimensionError(TweetAffectError, ValueError):
    pass


class ContractError(TweetAffectError, ValueError):
    pass


class NonFiniteError(TweetAffectError, ValueError):
    pass


class ConfigError(TweetAffectError, ValueError):
    pass


class UndefinedCorrelationError(TweetAffectError, ValueError):
    pass


class FormatError(TweetAffectError, ValueError):
    """Malformed input file. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class JoinError(TweetAffectError, ValueError):
    def __init__(self, tweet_id: str, source: str):
        self.tweet_id = tweet_id
        self.source = source
        super().__init__(f"tweet id {tweet_id!r} missing from feature source {source!r}")
