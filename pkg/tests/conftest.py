import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Configure environment for tests before importing app modules
TEST_DB_PATH = (Path(__file__).parent / "test.sqlite3").resolve()
if TEST_DB_PATH.exists():
    TEST_DB_PATH.unlink()

os.environ["DATABASE_URL"] = f"sqlite+pysqlite:///{TEST_DB_PATH}"
os.environ.setdefault("LOG_LEVEL", "WARNING")

sys.path.append(str(Path(__file__).resolve().parents[1]))

from app.nn.networks import CLASSIFIER, EC_LABELS, REGRESSOR, ModelBundle, ModelConfig  # noqa: E402


def make_bundle(
    kind: str = REGRESSOR,
    vocab_size: int = 12,
    dim: int = 5,
    units: int = 4,
    filters: int = 3,
    kernel_size: int = 2,
    dropout: float = 0.0,
    seed: int = 0,
    trainable_embeddings: bool = False,
) -> ModelBundle:
    rng = np.random.default_rng(seed)
    config = ModelConfig(
        kind=kind,
        lstm_units=units,
        lstm_dropout=dropout,
        conv_filters=filters,
        kernel_size=kernel_size,
        post_pool_dropout=dropout,
        output_dim=len(EC_LABELS) if kind == CLASSIFIER else 1,
        embedding_dim=dim,
        trainable_embeddings=trainable_embeddings,
        emotion=None if kind == CLASSIFIER else "anger",
    )
    matrix = rng.uniform(-0.5, 0.5, size=(vocab_size, dim))
    matrix[0] = 0.0
    return ModelBundle.initialize(config, matrix, rng, vocab_hash="test")


@pytest.fixture
def bundle_factory():
    return make_bundle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
