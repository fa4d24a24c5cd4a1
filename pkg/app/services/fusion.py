from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import ContractError, FormatError, JoinError
from ..nn.networks import FeatureVector

logger = logging.getLogger(__name__)

ID_COLUMN = "id"


@dataclass
class FeatureSet:
    """All feature vectors of one source, keyed by tweet id in file order."""

    source: str
    vectors: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def width(self) -> int:
        if not self.vectors:
            return 0
        return int(next(iter(self.vectors.values())).shape[0])

    @property
    def ids(self) -> List[str]:
        return list(self.vectors)

    def add(self, tweet_id: str, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ContractError(f"{self.source}: feature vector for {tweet_id!r} is not one-dimensional")
        if self.vectors and values.shape[0] != self.width:
            raise ContractError(
                f"{self.source}: vector for {tweet_id!r} has width {values.shape[0]}, expected {self.width}"
            )
        if not np.all(np.isfinite(values)):
            raise ContractError(f"{self.source}: non-finite feature value for {tweet_id!r}")
        if tweet_id in self.vectors:
            raise ContractError(f"{self.source}: duplicate tweet id {tweet_id!r}")
        self.vectors[tweet_id] = values

    @classmethod
    def from_vectors(cls, source: str, vectors: Iterable[FeatureVector]) -> "FeatureSet":
        feature_set = cls(source)
        for vector in vectors:
            feature_set.add(vector.tweet_id, vector.values)
        return feature_set


@dataclass(frozen=True)
class ColumnGroup:
    source: str
    start: int
    stop: int


@dataclass
class FusedMatrix:
    matrix: np.ndarray
    ids: List[str]
    manifest: List[ColumnGroup]

    @property
    def sources(self) -> List[str]:
        return [group.source for group in self.manifest]

    def manifest_json(self) -> str:
        groups = [{"source": g.source, "start": g.start, "stop": g.stop} for g in self.manifest]
        return json.dumps({"columns": groups, "width": int(self.matrix.shape[1])}, indent=2, sort_keys=True)


def fuse(sources: Sequence[FeatureSet], ids: Optional[Sequence[str]] = None) -> FusedMatrix:
    """Concatenate per-tweet vectors of every source, column groups in the given order.

    Rows follow ``ids`` or, when omitted, the id order of the first source.
    """
    if not sources:
        raise ContractError("fuse needs at least one feature source")
    names = [s.source for s in sources]
    if len(set(names)) != len(names):
        raise ContractError(f"feature sources repeat: {names}")
    row_ids = list(ids) if ids is not None else sources[0].ids

    manifest: List[ColumnGroup] = []
    start = 0
    for feature_set in sources:
        manifest.append(ColumnGroup(feature_set.source, start, start + feature_set.width))
        start += feature_set.width

    matrix = np.zeros((len(row_ids), start), dtype=np.float64)
    for row, tweet_id in enumerate(row_ids):
        for feature_set, group in zip(sources, manifest):
            values = feature_set.vectors.get(tweet_id)
            if values is None:
                raise JoinError(tweet_id, feature_set.source)
            matrix[row, group.start : group.stop] = values
    logger.info("fused %d tweets from %s into width %d", len(row_ids), ",".join(names), start)
    return FusedMatrix(matrix=matrix, ids=row_ids, manifest=manifest)


def select_sources(sources: Sequence[FeatureSet], excluded: Iterable[str]) -> List[FeatureSet]:
    excluded = set(excluded)
    kept = [s for s in sources if s.source not in excluded]
    dropped = [s.source for s in sources if s.source in excluded]
    if dropped:
        logger.info("excluding feature sources %s", ",".join(dropped))
    if not kept:
        raise ContractError("every feature source was excluded")
    return kept


def ingest_external_features(path: Union[str, Path], source: Optional[str] = None) -> FeatureSet:
    """Read an ``id,f0,f1,...`` CSV into a feature set named ``source`` (file stem by default)."""
    path = Path(path)
    source = source or path.stem
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, header=None)
    except pd.errors.ParserError as exc:
        found = re.search(r"line (\d+)", str(exc))
        raise FormatError(f"{path}: ragged row", int(found.group(1)) if found else None) from exc
    except pd.errors.EmptyDataError as exc:
        raise FormatError(f"{path} is empty", 1) from exc

    header = [str(c).strip() for c in frame.iloc[0].tolist()]
    expected = [ID_COLUMN] + [f"f{i}" for i in range(len(header) - 1)]
    if len(header) < 2 or header != expected:
        raise FormatError(f"header must be 'id,f0,f1,...', found {','.join(header)!r}", 1)

    feature_set = FeatureSet(source)
    for index, row in enumerate(frame.iloc[1:].itertuples(index=False), start=2):
        if any(pd.isna(c) for c in row):
            raise FormatError("ragged row", index)
        cells = [str(c).strip() for c in row]
        if any(c == "" for c in cells):
            raise FormatError("ragged or empty cell", index)
        tweet_id = cells[0]
        try:
            values = np.array([float(c) for c in cells[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"non-numeric feature cell for {tweet_id!r}", index) from exc
        if not np.all(np.isfinite(values)):
            raise FormatError(f"non-finite feature value for {tweet_id!r}", index)
        if tweet_id in feature_set.vectors:
            raise FormatError(f"duplicate tweet id {tweet_id!r}", index)
        feature_set.vectors[tweet_id] = values
    logger.info("ingested %d vectors of width %d as source %r", len(feature_set.vectors), len(header) - 1, source)
    return feature_set


def write_features(feature_set: FeatureSet, path: Union[str, Path]) -> None:
    columns = [ID_COLUMN] + [f"f{i}" for i in range(feature_set.width)]
    rows = [[tweet_id] + [repr(float(v)) for v in values] for tweet_id, values in feature_set.vectors.items()]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)


def parse_source_spec(spec: str) -> Tuple[str, str]:
    """Split a ``name=path`` command-line value."""
    name, sep, path = spec.partition("=")
    if not sep or not name or not path:
        raise ContractError(f"feature source must look like name=path, got {spec!r}")
    return name, path
