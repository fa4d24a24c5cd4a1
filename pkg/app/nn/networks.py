"""The classifier (ECCU) and intensity regressor (EIPU) networks.

Both share one architecture:

    embedding -> LSTM -> Conv1D(same, ReLU) -> max-pool over time = v0
    v0 -> dropout -> dense sigmoid = ve

``v0`` and ``ve`` are the transfer-feature taps consumed by the fusion
regressor.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError, FormatError
from . import tensor as T
from .layers import (
    PAD_ID,
    ConvParams,
    DenseParams,
    EmbeddingTable,
    LSTMParams,
    conv1d_same,
    dense_sigmoid,
    dropout,
    lstm_sequence,
    max_pool_over_time,
)
from .tensor import Node

EC_LABELS: Tuple[str, ...] = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
)

CLASSIFIER = "eccu"
REGRESSOR = "eipu"

MAGIC = b"TAFM"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    lstm_units: int
    lstm_dropout: float
    conv_filters: int
    kernel_size: int
    post_pool_dropout: float
    output_dim: int
    embedding_dim: int
    trainable_embeddings: bool = False
    max_seq_len: int = 64
    emotion: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind == CLASSIFIER and self.output_dim != len(EC_LABELS):
            raise ContractError(f"classifier needs {len(EC_LABELS)} outputs, got {self.output_dim}")
        if self.kind == REGRESSOR and self.output_dim != 1:
            raise ContractError(f"regressor needs one output, got {self.output_dim}")
        if self.kind not in (CLASSIFIER, REGRESSOR):
            raise ContractError(f"unknown model kind {self.kind!r}")
        for name in ("lstm_units", "conv_filters", "kernel_size", "embedding_dim", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")

    @property
    def labels(self) -> Tuple[str, ...]:
        if self.kind == CLASSIFIER:
            return EC_LABELS
        return (self.emotion or "intensity",)

    @property
    def feature_width(self) -> int:
        return self.conv_filters + self.output_dim


@dataclass
class FeatureVector:
    tweet_id: str
    source: str
    values: np.ndarray


@dataclass
class ModelBundle:
    config: ModelConfig
    embedding: EmbeddingTable
    lstm: LSTMParams
    conv: ConvParams
    dense: DenseParams
    vocab_hash: str = ""

    def __post_init__(self) -> None:
        c = self.config
        if self.embedding.dim != c.embedding_dim:
            raise ContractError("embedding dim does not match config")
        if self.lstm.input_dim != c.embedding_dim or self.lstm.units != c.lstm_units:
            raise ContractError("LSTM shape does not match config")
        if self.conv.input_dim != c.lstm_units or self.conv.filters != c.conv_filters:
            raise ContractError("conv shape does not match config")
        if self.conv.kernel_size != c.kernel_size:
            raise ContractError("conv kernel size does not match config")
        if self.dense.weights.shape != (c.output_dim, c.conv_filters):
            raise ContractError("dense shape does not match config")

    @classmethod
    def initialize(
        cls,
        config: ModelConfig,
        embedding_matrix: np.ndarray,
        rng: np.random.Generator,
        vocab_hash: str = "",
    ) -> "ModelBundle":
        embedding = EmbeddingTable.from_matrix(embedding_matrix, trainable=config.trainable_embeddings)
        return cls(
            config=config,
            embedding=embedding,
            lstm=LSTMParams.initialize(config.embedding_dim, config.lstm_units, rng),
            conv=ConvParams.initialize(config.lstm_units, config.conv_filters, config.kernel_size, rng),
            dense=DenseParams.initialize(config.conv_filters, config.output_dim, rng),
            vocab_hash=vocab_hash,
        )

    def named_parameters(self) -> Dict[str, Node]:
        """Every parameter in the declared serialization order."""
        params: Dict[str, Node] = {"embedding": self.embedding.weights}
        params.update({f"lstm.{k}": v for k, v in self.lstm.parameters().items()})
        params.update({f"conv.{k}": v for k, v in self.conv.parameters().items()})
        params.update({f"dense.{k}": v for k, v in self.dense.parameters().items()})
        return params

    def trainable_parameters(self) -> Dict[str, Node]:
        return {k: v for k, v in self.named_parameters().items() if v.requires_grad}


def _prepare_ids(m: ModelBundle, tokens: Sequence[int], strip_padding: bool) -> List[int]:
    ids = [int(t) for t in tokens][: m.config.max_seq_len]
    if strip_padding:
        while ids and ids[-1] == PAD_ID:
            ids.pop()
    if not ids:
        raise ContractError("empty token sequence")
    vocab_size = m.embedding.vocab_size
    for token_id in ids:
        if token_id < 0 or token_id >= vocab_size:
            raise ContractError(f"token id {token_id} outside vocabulary of size {vocab_size}")
    return ids


def forward(
    m: ModelBundle,
    tokens: Sequence[int],
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    strip_padding: bool = True,
) -> Tuple[Node, Node]:
    """Return the (v0, ve) nodes for one tweet.

    Sequences longer than ``max_seq_len`` are truncated at the end. Trailing
    PAD ids are dropped unless ``strip_padding`` is false, which keeps masked
    positions in place for attribution.
    """
    ids = _prepare_ids(m, tokens, strip_padding)
    c = m.config
    embedded = m.embedding.lookup(ids)
    hidden = lstm_sequence(m.lstm, embedded, c.lstm_dropout, training, rng)
    v0 = max_pool_over_time(conv1d_same(m.conv, hidden))
    ve = dense_sigmoid(m.dense.weights, m.dense.bias, dropout(v0, c.post_pool_dropout, training, rng))
    return v0, ve


def predict(m: ModelBundle, tokens: Sequence[int], strip_padding: bool = True) -> np.ndarray:
    return forward(m, tokens, training=False, strip_padding=strip_padding)[1].value.copy()


def extract_features(m: ModelBundle, tokens: Sequence[int], tweet_id: str = "", source: Optional[str] = None) -> FeatureVector:
    v0, ve = forward(m, tokens, training=False)
    return FeatureVector(tweet_id=tweet_id, source=source or m.config.kind, values=np.concatenate([v0.value, ve.value]))


def save_bundle(m: ModelBundle, path: Union[str, Path]) -> None:
    params = m.named_parameters()
    header = {
        "config": asdict(m.config),
        "labels": list(m.config.labels),
        "vocab_hash": m.vocab_hash,
        "parameters": [{"name": name, "shape": list(node.shape)} for name, node in params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for node in params.values():
            fh.write(np.ascontiguousarray(node.value, dtype="<f8").tobytes())


def load_bundle(path: Union[str, Path]) -> ModelBundle:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path} is not a model file")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model file version {version}")
    offset = 4 + struct.calcsize("<HI")
    header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    arrays: Dict[str, np.ndarray] = {}
    for entry in header["parameters"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arrays[entry["name"]] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset += count * 8
    if offset != len(blob):
        raise FormatError(f"{path}: trailing bytes after parameter blobs")

    config = ModelConfig(**header["config"])
    return ModelBundle(
        config=config,
        embedding=EmbeddingTable.from_matrix(arrays["embedding"], trainable=config.trainable_embeddings),
        lstm=LSTMParams.from_arrays({k.split(".", 1)[1]: v for k, v in arrays.items() if k.startswith("lstm.")}),
        conv=ConvParams(
            T.parameter(arrays["conv.weights"], name="conv.weights"),
            T.parameter(arrays["conv.bias"], name="conv.bias"),
        ),
        dense=DenseParams(
            T.parameter(arrays["dense.weights"], name="dense.weights"),
            T.parameter(arrays["dense.bias"], name="dense.bias"),
        ),
        vocab_hash=header["vocab_hash"],
    )


def config_from_settings(kind: str, preset, embedding_dim: int, max_seq_len: int, emotion: Optional[str] = None) -> ModelConfig:
    """Build a :class:`ModelConfig` from a network preset of :mod:`app.config`."""
    return ModelConfig(
        kind=kind,
        lstm_units=preset.lstm_units,
        lstm_dropout=preset.lstm_dropout,
        conv_filters=preset.conv_filters,
        kernel_size=preset.kernel_size,
        post_pool_dropout=preset.post_pool_dropout,
        output_dim=len(EC_LABELS) if kind == CLASSIFIER else 1,
        embedding_dim=embedding_dim,
        trainable_embeddings=preset.trainable_embeddings,
        max_seq_len=max_seq_len,
        emotion=emotion,
    )
