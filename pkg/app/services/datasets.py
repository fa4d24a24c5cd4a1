from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..config import EMOTIONS
from ..errors import ContractError, FormatError
from ..nn.networks import EC_LABELS
from .preprocess import Lexicon, TokenSequence, Vocabulary, normalize_and_tokenize

logger = logging.getLogger(__name__)

EC_COLUMNS = ["ID", "Tweet", *EC_LABELS]
EIREG_COLUMNS = ["ID", "Tweet", "Affect Dimension", "Intensity Score"]
EC_TASK = "ec"
EIREG_TASK = "eireg"


@dataclass(frozen=True)
class TweetRecord:
    id: str
    text: str
    tokens: TokenSequence
    labels: Optional[np.ndarray] = None
    intensity: Optional[float] = None
    emotion: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.labels is None) == (self.intensity is None):
            raise ContractError(f"record {self.id!r} needs exactly one of labels or intensity")
        if self.labels is not None and self.labels.shape != (len(EC_LABELS),):
            raise ContractError(f"record {self.id!r} has {self.labels.size} labels")
        if self.intensity is not None and not 0.0 <= self.intensity <= 1.0:
            raise ContractError(f"record {self.id!r} intensity {self.intensity} outside [0, 1]")

    @property
    def task(self) -> str:
        return EC_TASK if self.labels is not None else EIREG_TASK

    def token_ids(self) -> Sequence[int]:
        if not self.tokens.ids:
            raise ContractError(f"record {self.id!r} has not been encoded with a vocabulary")
        return self.tokens.ids

    def target(self) -> np.ndarray:
        if self.labels is not None:
            return self.labels.astype(np.float64)
        return np.array([self.intensity], dtype=np.float64)

    def encode(self, vocab: Vocabulary) -> "TweetRecord":
        return replace(self, tokens=vocab.encode(self.tokens.tokens))


def _read_tsv(path: Union[str, Path], expected: int) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            path,
            sep="\t",
            dtype=str,
            header=None,
            quoting=csv.QUOTE_NONE,
            keep_default_na=False,
        )
    except pd.errors.ParserError as exc:
        found = re.search(r"line (\d+)", str(exc))
        raise FormatError("wrong column count", int(found.group(1)) if found else None) from exc
    except pd.errors.EmptyDataError as exc:
        raise FormatError(f"{path} is empty", 1) from exc
    if frame.shape[1] != expected:
        raise FormatError(f"expected {expected} columns, found {frame.shape[1]}", 1)
    return frame


def _row_cells(row: Iterable, line: int, expected: int) -> List[str]:
    cells = list(row)
    if len(cells) != expected or any(pd.isna(c) for c in cells):
        raise FormatError(f"expected {expected} columns", line)
    return [str(c) for c in cells]


def _tokenize(text: str, line: int, vocab: Optional[Vocabulary], lexicon: Optional[Lexicon]) -> TokenSequence:
    try:
        return normalize_and_tokenize(text, vocab=vocab, lexicon=lexicon)
    except ContractError as exc:
        raise FormatError(str(exc), line) from exc


def load_ec(
    path: Union[str, Path],
    vocab: Optional[Vocabulary] = None,
    lexicon: Optional[Lexicon] = None,
) -> List[TweetRecord]:
    """Multi-label file: ID, Tweet and one 0/1 column per label in :data:`EC_LABELS` order."""
    frame = _read_tsv(path, len(EC_COLUMNS))
    header = [str(c).strip().lower() for c in frame.iloc[0]]
    if header != [c.lower() for c in EC_COLUMNS]:
        raise FormatError(f"header must be {' '.join(EC_COLUMNS)}", 1)

    records: List[TweetRecord] = []
    for line, row in enumerate(frame.iloc[1:].itertuples(index=False), start=2):
        cells = _row_cells(row, line, len(EC_COLUMNS))
        label_cells = [c.strip() for c in cells[2:]]
        bad = [c for c in label_cells if c not in ("0", "1")]
        if bad:
            raise FormatError(f"label cell {bad[0]!r} is not 0 or 1", line)
        records.append(
            TweetRecord(
                id=cells[0].strip(),
                text=cells[1],
                tokens=_tokenize(cells[1], line, vocab, lexicon),
                labels=np.array([int(c) for c in label_cells], dtype=np.int64),
            )
        )
    logger.info("loaded %d multi-label tweets from %s", len(records), path)
    return records


def load_eireg(
    path: Union[str, Path],
    emotion: str,
    vocab: Optional[Vocabulary] = None,
    lexicon: Optional[Lexicon] = None,
) -> List[TweetRecord]:
    """Intensity file: ID, Tweet, Affect Dimension, Intensity Score; rows of other emotions are skipped."""
    if emotion not in EMOTIONS:
        raise ContractError(f"unknown emotion {emotion!r}, expected one of {', '.join(EMOTIONS)}")
    frame = _read_tsv(path, len(EIREG_COLUMNS))
    header = [str(c).strip().lower() for c in frame.iloc[0]]
    if header != [c.lower() for c in EIREG_COLUMNS]:
        raise FormatError(f"header must be {' / '.join(EIREG_COLUMNS)}", 1)

    records: List[TweetRecord] = []
    skipped = 0
    for line, row in enumerate(frame.iloc[1:].itertuples(index=False), start=2):
        cells = _row_cells(row, line, len(EIREG_COLUMNS))
        if cells[2].strip().lower() != emotion:
            skipped += 1
            continue
        try:
            intensity = float(cells[3])
        except ValueError as exc:
            raise FormatError(f"intensity {cells[3]!r} is not a number", line) from exc
        if not 0.0 <= intensity <= 1.0:
            raise FormatError(f"intensity {cells[3]!r} outside [0, 1]", line)
        records.append(
            TweetRecord(
                id=cells[0].strip(),
                text=cells[1],
                tokens=_tokenize(cells[1], line, vocab, lexicon),
                intensity=intensity,
                emotion=emotion,
            )
        )
    if skipped:
        logger.info("skipped %d rows not tagged %s in %s", skipped, emotion, path)
    logger.info("loaded %d %s intensity tweets from %s", len(records), emotion, path)
    return records


def load_records(
    path: Union[str, Path],
    task: str,
    emotion: Optional[str] = None,
    vocab: Optional[Vocabulary] = None,
) -> List[TweetRecord]:
    if task == EC_TASK:
        return load_ec(path, vocab=vocab)
    if task == EIREG_TASK:
        if emotion is None:
            raise ContractError("intensity data needs an emotion")
        return load_eireg(path, emotion, vocab=vocab)
    raise ContractError(f"unknown task {task!r}")


def encode_records(records: Sequence[TweetRecord], vocab: Vocabulary) -> List[TweetRecord]:
    return [record.encode(vocab) for record in records]


def write_tokens(records: Sequence[TweetRecord], path: Union[str, Path]) -> None:
    frame = pd.DataFrame(
        {"id": [r.id for r in records], "tokens": [r.tokens.render() for r in records]}, columns=["id", "tokens"]
    )
    frame.to_csv(path, sep="\t", index=False, quoting=csv.QUOTE_NONE, escapechar="\\")


def write_predictions(ids: Sequence[str], values: np.ndarray, path: Union[str, Path], labels: Sequence[str]) -> None:
    """Regression: ``id,value``; classification: ``id`` plus one 0/1 column per label."""
    values = np.asarray(values)
    if values.ndim == 1:
        frame = pd.DataFrame({"id": list(ids), "value": [repr(float(v)) for v in values]})
    else:
        frame = pd.DataFrame(values.astype(np.int64), columns=list(labels))
        frame.insert(0, "id", list(ids))
    frame.to_csv(path, index=False)


def read_predictions(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    frame = pd.read_csv(path, dtype={"id": str}, keep_default_na=False)
    if frame.columns[0] != "id" or frame.shape[1] < 2:
        raise FormatError(f"{path}: header must start with 'id' and carry at least one value column", 1)
    result: Dict[str, np.ndarray] = {}
    for line, row in enumerate(frame.itertuples(index=False), start=2):
        tweet_id = str(row[0])
        try:
            values = np.array([float(v) for v in row[1:]], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"non-numeric prediction for {tweet_id!r}", line) from exc
        if tweet_id in result:
            raise FormatError(f"duplicate prediction id {tweet_id!r}", line)
        result[tweet_id] = values
    return result
