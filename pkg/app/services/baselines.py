"""Bag-of-words comparison floors for intensity regression.

Every variant feeds a ridge regressor; predictions are clamped to [0, 1].
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import Ridge

from ..errors import ContractError
from ..nn.layers import PAD_ID, EmbeddingTable
from .datasets import TweetRecord, encode_records
from .fusion import FeatureSet, fuse
from .preprocess import Vocabulary, load_embeddings

logger = logging.getLogger(__name__)

TFIDF = "tfidf"
NBOW = "nbow"
NBOW_AFFECT = "nbow+a"
WEIGHTINGS = (TFIDF, NBOW, NBOW_AFFECT)

LEARNER_NOTE = "baseline learner: ridge regression (alpha={alpha}) in place of a linear SVM"


def _tokens(document: Sequence[str]) -> Sequence[str]:
    return document


def tfidf_features(train: Sequence[TweetRecord], test: Sequence[TweetRecord]) -> Tuple[np.ndarray, np.ndarray]:
    """Unigram TF-IDF fitted on ``train`` only; unseen test tokens contribute nothing."""
    vectorizer = TfidfVectorizer(analyzer=_tokens, lowercase=False)
    try:
        train_matrix = vectorizer.fit_transform([list(r.tokens.tokens) for r in train])
    except ValueError as exc:
        raise ContractError(f"empty baseline vocabulary: {exc}") from exc
    test_matrix = vectorizer.transform([list(r.tokens.tokens) for r in test])
    logger.info("tf-idf vocabulary of %d unigrams", len(vectorizer.vocabulary_))
    return train_matrix.toarray(), test_matrix.toarray()


def nbow_features(records: Sequence[TweetRecord], embeddings: EmbeddingTable) -> np.ndarray:
    """Mean embedding of each tweet's non-PAD tokens (zeros for a tweet without any)."""
    matrix = embeddings.weights.value
    rows: List[np.ndarray] = []
    for record in records:
        ids = [i for i in record.token_ids() if i != PAD_ID]
        if any(i < 0 or i >= matrix.shape[0] for i in ids):
            raise ContractError(f"record {record.id!r} has ids outside the embedding table")
        rows.append(matrix[ids].mean(axis=0) if ids else np.zeros(matrix.shape[1]))
    return np.vstack(rows) if rows else np.zeros((0, matrix.shape[1]))


def _with_affect(base: np.ndarray, records: Sequence[TweetRecord], affect: FeatureSet) -> np.ndarray:
    extra = fuse([affect], ids=[r.id for r in records]).matrix
    return np.hstack([base, extra])


def embedding_inputs(
    train: Sequence[TweetRecord],
    test: Sequence[TweetRecord],
    path: Union[str, Path],
    seed: int,
    init_range: float = 0.05,
) -> Tuple[List[TweetRecord], List[TweetRecord], EmbeddingTable]:
    """Encode both splits against a vocabulary of ``train`` tokens and load its vectors.

    Test tokens outside that vocabulary map to UNK, so the table and every
    train feature row depend on the training split alone.
    """
    vocab = Vocabulary.build(r.tokens.tokens for r in train)
    loaded = load_embeddings(path, vocab, seed=seed, init_range=init_range)
    logger.info("baseline vocabulary of %d tokens, embedding coverage %.3f", len(vocab), loaded.coverage)
    return encode_records(train, vocab), encode_records(test, vocab), loaded.table


def bow_baseline(
    train: Sequence[TweetRecord],
    test: Sequence[TweetRecord],
    weighting: str = TFIDF,
    embeddings: Optional[EmbeddingTable] = None,
    affect: Optional[FeatureSet] = None,
    alpha: float = 1.0,
) -> np.ndarray:
    if weighting not in WEIGHTINGS:
        raise ContractError(f"unknown weighting {weighting!r}, expected one of {', '.join(WEIGHTINGS)}")
    if not train:
        raise ContractError("baseline needs training records")
    if any(r.intensity is None for r in train):
        raise ContractError("baseline regression needs intensity records")

    if weighting == TFIDF:
        train_x, test_x = tfidf_features(train, test)
    else:
        if embeddings is None:
            raise ContractError(f"{weighting} baseline needs an embedding table")
        train_x, test_x = nbow_features(train, embeddings), nbow_features(test, embeddings)
        if weighting == NBOW_AFFECT:
            if affect is None:
                raise ContractError("nbow+a baseline needs an affect feature set")
            train_x, test_x = _with_affect(train_x, train, affect), _with_affect(test_x, test, affect)

    target = np.array([r.intensity for r in train], dtype=np.float64)
    regressor = Ridge(alpha=alpha)
    regressor.fit(train_x, target)
    if not test:
        return np.zeros(0)
    return np.clip(regressor.predict(test_x), 0.0, 1.0)
