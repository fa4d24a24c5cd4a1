from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import f1_score, jaccard_score

from ..errors import ContractError, JoinError, UndefinedCorrelationError
from ..nn.networks import EC_LABELS
from .datasets import EC_TASK, EIREG_TASK, TweetRecord

logger = logging.getLogger(__name__)

PREDICTIONS_SOURCE = "predictions"


def pearson(pred: Sequence[float], gold: Sequence[float]) -> float:
    x = np.asarray(pred, dtype=np.float64).reshape(-1)
    y = np.asarray(gold, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ContractError(f"pearson needs equal lengths, got {x.size} and {y.size}")
    if x.size < 2:
        raise ContractError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    r = float(np.dot(dx, dy)) / float(np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r))


def multilabel_metrics(pred, gold) -> Tuple[float, float, float]:
    """(jaccard accuracy, micro F1, macro F1) of binary decision matrices.

    Examples where both sides are empty count as jaccard 1; labels whose F1
    is undefined count as 0 in the macro average.
    """
    p = np.asarray(pred, dtype=np.int64)
    g = np.asarray(gold, dtype=np.int64)
    if p.shape != g.shape:
        raise ContractError(f"prediction shape {p.shape} does not match gold shape {g.shape}")
    if p.ndim != 2 or p.shape[0] == 0:
        raise ContractError("multilabel_metrics needs a non-empty [examples x labels] matrix")
    if not (np.isin(p, (0, 1)).all() and np.isin(g, (0, 1)).all()):
        raise ContractError("multi-label decisions must be 0 or 1")
    jaccard = jaccard_score(g, p, average="samples", zero_division=1)
    micro = f1_score(g, p, average="micro", zero_division=0)
    macro = f1_score(g, p, average="macro", zero_division=0)
    return float(jaccard), float(micro), float(macro)


def threshold(scores, cutoff: float = 0.5) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) >= cutoff).astype(np.int64)


@dataclass
class EvalReport:
    task: str
    metrics: Dict[str, float]
    fingerprint: str
    per_emotion: Dict[str, Dict[str, float]] = field(default_factory=dict)
    model_name: str = ""
    emotion: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name, value in self.metrics.items():
            low = -1.0 if name == "pearson" else 0.0
            if not low <= value <= 1.0:
                raise ContractError(f"metric {name}={value} outside [{low}, 1]")

    def to_text(self) -> str:
        lines = [f"task: {self.task}"]
        if self.model_name:
            lines.append(f"model: {self.model_name}")
        if self.emotion:
            lines.append(f"emotion: {self.emotion}")
        lines.append(f"config fingerprint: {self.fingerprint}")
        lines.extend(f"note: {note}" for note in self.notes)
        lines.append("")
        for name, value in self.metrics.items():
            lines.append(f"{name:<12} {value:.4f}")
        for scope, values in self.per_emotion.items():
            details = "  ".join(f"{k}={v:.4f}" for k, v in values.items())
            lines.append(f"  {scope:<12} {details}")
        return "\n".join(lines) + "\n"

    def rows(self) -> List[Dict[str, object]]:
        rows: List[Dict[str, object]] = [
            {"scope": "overall", "metric": name, "value": repr(float(value))} for name, value in self.metrics.items()
        ]
        for scope, values in self.per_emotion.items():
            rows.extend({"scope": scope, "metric": k, "value": repr(float(v))} for k, v in values.items())
        return rows

    def to_csv(self, path: Union[str, Path]) -> None:
        frame = pd.DataFrame(self.rows(), columns=["scope", "metric", "value"])
        frame.insert(0, "fingerprint", self.fingerprint)
        frame.insert(0, "task", self.task)
        frame.to_csv(path, index=False)


def _aligned(predictions: Mapping[str, np.ndarray], records: Sequence[TweetRecord]) -> List[np.ndarray]:
    if not records:
        raise ContractError("no gold records to evaluate against")
    aligned = []
    for record in records:
        values = predictions.get(record.id)
        if values is None:
            raise JoinError(record.id, PREDICTIONS_SOURCE)
        aligned.append(values)
    return aligned


def evaluate_intensity(
    predictions: Mapping[str, np.ndarray],
    records: Sequence[TweetRecord],
    fingerprint: str,
    model_name: str = "",
) -> EvalReport:
    values = _aligned(predictions, records)
    pred = np.array([float(v[0]) for v in values])
    gold = np.array([r.intensity for r in records], dtype=np.float64)
    emotion = records[0].emotion
    r = pearson(pred, gold)
    logger.info("pearson %.4f on %d %s tweets", r, len(records), emotion)
    return EvalReport(
        task=EIREG_TASK,
        metrics={"pearson": r},
        fingerprint=fingerprint,
        per_emotion={emotion or "intensity": {"pearson": r}},
        model_name=model_name,
        emotion=emotion,
    )


def evaluate_multilabel(
    predictions: Mapping[str, np.ndarray],
    records: Sequence[TweetRecord],
    fingerprint: str,
    cutoff: float = 0.5,
    model_name: str = "",
) -> EvalReport:
    values = _aligned(predictions, records)
    if any(v.shape[0] != len(EC_LABELS) for v in values):
        raise ContractError(f"multi-label predictions need {len(EC_LABELS)} cells per tweet")
    pred = threshold(np.vstack(values), cutoff)
    gold = np.vstack([r.labels for r in records])
    jaccard, micro, macro = multilabel_metrics(pred, gold)
    per_label = f1_score(gold, pred, average=None, zero_division=0)
    logger.info("jaccard %.4f micro-F1 %.4f macro-F1 %.4f on %d tweets", jaccard, micro, macro, len(records))
    return EvalReport(
        task=EC_TASK,
        metrics={"jaccard": jaccard, "micro_f1": micro, "macro_f1": macro},
        fingerprint=fingerprint,
        per_emotion={label: {"f1": float(score)} for label, score in zip(EC_LABELS, per_label)},
        model_name=model_name,
    )
