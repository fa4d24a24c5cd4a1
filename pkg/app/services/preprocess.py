from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import regex

from ..errors import ContractError, FormatError
from ..nn.layers import PAD_ID, EmbeddingTable

logger = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
URL = "<url>"
USER = "<user>"
NUMBER = "<number>"
HASHTAG = "<hashtag>"
UNK_ID = 1
RESERVED: Tuple[str, ...] = (PAD, UNK, URL, USER, NUMBER, HASHTAG)
ANNOTATIONS = (URL, USER, NUMBER, HASHTAG)

DEFAULT_LEXICON_PATH = Path(__file__).resolve().parents[1] / "data" / "lexicon.txt"

_TOKEN_RE = regex.compile(
    r"""
    (?P<tag><(?:url|user|number|hashtag)>)
    | (?P<url>https?://\S+|www\.\S+)
    | (?P<user>@\w+)
    | (?P<hashtag>\#\w+)
    | (?P<number>[-+]?\d+(?:[.,:]\d+)*(?!\w))
    | (?P<word>\w+(?:['’]\w+)*)
    | (?P<punct>(?:(?![#@]\w)\p{P})+)
    | (?P<space>\s+)
    | (?P<other>\X)
    """,
    regex.VERBOSE | regex.UNICODE,
)
_NUMBER_RE = regex.compile(r"[-+]?\d+(?:[.,:]\d+)*")


@dataclass(frozen=True)
class TokenSequence:
    """Surface tokens plus parallel vocabulary ids (empty until encoded)."""

    tokens: Tuple[str, ...]
    ids: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.ids and len(self.ids) != len(self.tokens):
            raise ContractError("token and id sequences differ in length")

    def __len__(self) -> int:
        return len(self.tokens)

    def render(self) -> str:
        return " ".join(self.tokens)


class Lexicon:
    """Unigram word-frequency model used for hashtag segmentation."""

    def __init__(self, counts: Dict[str, int]):
        self.counts = {word: count for word, count in counts.items() if count > 0}
        self.total = float(sum(self.counts.values())) or 1.0

    def score(self, word: str) -> float:
        """Log-probability of ``word``; unseen words are penalised by length."""
        count = self.counts.get(word)
        if count is not None:
            return math.log(count / self.total)
        return math.log(10.0) - math.log(self.total) - len(word) * math.log(10.0)

    def split_score(self, words: Sequence[str]) -> float:
        return sum(self.score(w) for w in words)


def load_lexicon(path: Union[str, Path]) -> Lexicon:
    counts: Dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FormatError("expected 'word count'", line_no)
            try:
                counts[parts[0].lower()] = counts.get(parts[0].lower(), 0) + int(parts[1])
            except ValueError as exc:
                raise FormatError(f"count {parts[1]!r} is not an integer", line_no) from exc
    return Lexicon(counts)


@lru_cache()
def default_lexicon() -> Lexicon:
    return load_lexicon(DEFAULT_LEXICON_PATH)


def segment_hashtag(body: str, lexicon: Optional[Lexicon] = None) -> List[str]:
    """Maximum-probability split of a hashtag body under the unigram model."""
    lexicon = lexicon or default_lexicon()
    text = body.lower()
    if not text:
        return [body]
    n = len(text)
    best = [0.0] + [-math.inf] * n
    back = [0] * (n + 1)
    for end in range(1, n + 1):
        for start in range(end):
            candidate = best[start] + lexicon.score(text[start:end])
            if candidate > best[end]:
                best[end] = candidate
                back[end] = start
    words: List[str] = []
    end = n
    while end > 0:
        words.append(text[back[end] : end])
        end = back[end]
    return list(reversed(words))


def tokenize(text: str, lexicon: Optional[Lexicon] = None) -> List[str]:
    tokens: List[str] = []
    for match in _TOKEN_RE.finditer(text.lower()):
        kind = match.lastgroup
        value = match.group()
        if kind == "space":
            continue
        if kind == "tag":
            tokens.append(value)
        elif kind == "url":
            tokens.append(URL)
        elif kind == "user":
            tokens.append(USER)
        elif kind == "number":
            tokens.append(NUMBER)
        elif kind == "hashtag":
            tokens.append(HASHTAG)
            tokens.extend(NUMBER if _NUMBER_RE.fullmatch(w) else w for w in segment_hashtag(value[1:], lexicon))
        else:
            tokens.append(value)
    return tokens


def normalize_and_tokenize(
    text: str,
    vocab: Optional["Vocabulary"] = None,
    lexicon: Optional[Lexicon] = None,
) -> TokenSequence:
    """Lowercase, annotate urls/users/numbers/hashtags, segment hashtags and split punctuation."""
    if not text or not text.strip():
        raise ContractError("empty tweet text")
    tokens = tokenize(text, lexicon)
    if not tokens:
        raise ContractError("tweet produced no tokens")
    if vocab is None:
        return TokenSequence(tuple(tokens))
    return vocab.encode(tokens)


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise ContractError("vocabulary must start with the reserved tokens")
        self.itos: List[str] = list(tokens)
        self.stoi: Dict[str, int] = {}
        for index, token in enumerate(self.itos):
            if token in self.stoi:
                raise ContractError(f"duplicate vocabulary entry {token!r}")
            self.stoi[token] = index
        self.content_hash = hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def lookup(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> TokenSequence:
        tokens = tuple(tokens)
        return TokenSequence(tokens, tuple(self.lookup(t) for t in tokens))

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], min_count: int = 1) -> "Vocabulary":
        counts: Dict[str, int] = {}
        for tokens in token_lists:
            for token in tokens:
                counts[token] = counts.get(token, 0) + 1
        regular = sorted(
            (t for t, c in counts.items() if c >= min_count and t not in RESERVED),
            key=lambda t: (-counts[t], t),
        )
        return cls(list(RESERVED) + regular)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


class EmbeddingLoad(NamedTuple):
    table: EmbeddingTable
    coverage: float


def random_embeddings(vocab: Vocabulary, dim: int, seed: int, init_range: float = 0.05) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-init_range, init_range, size=(len(vocab), dim))
    matrix[PAD_ID] = 0.0
    return EmbeddingTable.from_matrix(matrix)


def load_embeddings(
    path: Union[str, Path],
    vocab: Vocabulary,
    seed: int = 13,
    init_range: float = 0.05,
    trainable: bool = False,
) -> EmbeddingLoad:
    """Read word2vec-style text vectors for the tokens of ``vocab``.

    Missing tokens are drawn from uniform(-init_range, init_range) with a
    seeded generator; the PAD row is zero. Coverage counts regular
    (non-reserved) vocabulary entries found in the file.
    """
    found: Dict[int, np.ndarray] = {}
    dim: Optional[int] = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise FormatError("embedding line has no values", line_no)
            if len(values) != dim:
                raise FormatError(f"expected {dim} values, found {len(values)}", line_no)
            index = vocab.stoi.get(token)
            if index is None or index == PAD_ID:
                continue
            try:
                vector = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"non-numeric embedding value for {token!r}", line_no) from exc
            if not np.all(np.isfinite(vector)):
                raise FormatError(f"non-finite embedding value for {token!r}", line_no)
            found[index] = vector
    if dim is None:
        raise FormatError(f"{path} contains no embeddings")

    table = random_embeddings(vocab, dim, seed, init_range)
    matrix = table.weights.value.copy()
    for index, vector in found.items():
        matrix[index] = vector

    regular = range(len(RESERVED), len(vocab))
    coverage = sum(1 for i in regular if i in found) / len(regular) if len(regular) else 1.0
    logger.info("embeddings: %d/%d vocabulary rows from %s (coverage %.3f)", len(found), len(vocab), path, coverage)
    return EmbeddingLoad(EmbeddingTable.from_matrix(matrix, trainable=trainable), coverage)
