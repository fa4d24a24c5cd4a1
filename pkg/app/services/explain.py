"""Token attributions for intensity predictions and their heatmap rendering.

The value of a coalition C of token positions is the model prediction on the
sequence where every position outside C holds PAD. Positions are kept, so the
all-PAD sequence of the same length is the baseline.
"""
from __future__ import annotations

import html
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from math import comb
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..config import EMOTIONS
from ..errors import ContractError, NonFiniteError
from ..nn.layers import PAD_ID
from ..nn.networks import ModelBundle, predict

logger = logging.getLogger(__name__)

EXACT_LIMIT = 12
POSITIVE_RGB = (0, 0, 255)
NEGATIVE_RGB = (255, 0, 0)


class AttributionMode(Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


@dataclass
class Attribution:
    tweet_id: str
    tokens: Tuple[str, ...]
    S: np.ndarray
    I: np.ndarray
    prediction: float
    baseline: float
    emotion: Optional[str] = None
    gold: Optional[float] = None

    def __post_init__(self) -> None:
        if not (len(self.tokens) == self.S.shape[0] == self.I.shape[0]):
            raise ContractError("tokens, raw and normalized attributions differ in length")


Coalition = Tuple[int, ...]


def _value_function(m: ModelBundle, ids: Sequence[int], output: int) -> Callable[[Coalition], float]:
    cache: Dict[Coalition, float] = {}

    def value(coalition: Coalition) -> float:
        result = cache.get(coalition)
        if result is None:
            masked = [token if keep else PAD_ID for token, keep in zip(ids, coalition)]
            result = float(predict(m, masked, strip_padding=False)[output])
            cache[coalition] = result
        return result

    return value


def _exact(value: Callable[[Coalition], float], n: int) -> np.ndarray:
    weights = [1.0 / (n * comb(n - 1, size)) for size in range(n)]
    values = np.zeros(n)
    for others in itertools.product((0, 1), repeat=n - 1):
        size = sum(others)
        for player in range(n):
            without = others[:player] + (0,) + others[player:]
            with_player = others[:player] + (1,) + others[player:]
            values[player] += weights[size] * (value(with_player) - value(without))
    return values


def _sampled(value: Callable[[Coalition], float], n: int, samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    totals = np.zeros(n)
    for _ in range(samples):
        coalition = [0] * n
        previous = value(tuple(coalition))
        for player in rng.permutation(n):
            coalition[int(player)] = 1
            current = value(tuple(coalition))
            totals[int(player)] += current - previous
            previous = current
    return totals / samples


def shapley_attribute(
    m: ModelBundle,
    tokens: Sequence[int],
    mode: Union[AttributionMode, str] = AttributionMode.EXACT,
    samples: int = 2000,
    seed: int = 13,
    output: int = 0,
) -> np.ndarray:
    """Shapley value of every token position of ``tokens`` (vocabulary ids).

    Exact mode enumerates all coalitions and needs at most 12 tokens; sampled
    mode averages marginal contributions over ``samples`` seeded permutations.
    """
    mode = AttributionMode(mode)
    ids = [int(t) for t in tokens]
    n = len(ids)
    if n < 1 or n > m.config.max_seq_len:
        raise ContractError(f"attribution needs 1..{m.config.max_seq_len} tokens, got {n}")
    if mode is AttributionMode.EXACT and n > EXACT_LIMIT:
        raise ContractError(f"exact attribution supports at most {EXACT_LIMIT} tokens, got {n}; use sampled mode")
    if samples < 1:
        raise ContractError("sampled attribution needs at least one permutation")

    value = _value_function(m, ids, output)
    if mode is AttributionMode.EXACT:
        return _exact(value, n)
    return _sampled(value, n, samples, seed)


def normalize(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if not np.all(np.isfinite(S)):
        raise NonFiniteError("attribution values must be finite")
    peak = np.max(np.abs(S)) if S.size else 0.0
    if peak == 0.0:
        return np.zeros_like(S)
    return S / peak


def attribute(
    m: ModelBundle,
    tokens: Sequence[str],
    ids: Sequence[int],
    tweet_id: str = "",
    mode: Union[AttributionMode, str] = AttributionMode.EXACT,
    samples: int = 2000,
    seed: int = 13,
    emotion: Optional[str] = None,
    gold: Optional[float] = None,
) -> Attribution:
    ids = [int(t) for t in ids][: m.config.max_seq_len]
    tokens = tuple(tokens)[: len(ids)]
    S = shapley_attribute(m, ids, mode=mode, samples=samples, seed=seed)
    prediction = float(predict(m, ids, strip_padding=False)[0])
    baseline = float(predict(m, [PAD_ID] * len(ids), strip_padding=False)[0])
    logger.debug("attributed %s: prediction %.4f baseline %.4f", tweet_id, prediction, baseline)
    return Attribution(
        tweet_id=tweet_id,
        tokens=tokens,
        S=S,
        I=normalize(S),
        prediction=prediction,
        baseline=baseline,
        emotion=emotion or m.config.emotion,
        gold=gold,
    )


def _token_span(token: str, importance: float) -> str:
    text = html.escape(token, quote=True)
    if importance == 0.0:
        return f"<span>{text}</span>"
    red, green, blue = POSITIVE_RGB if importance > 0 else NEGATIVE_RGB
    return f'<span style="background-color: rgba({red}, {green}, {blue}, {abs(importance):.3f})">{text}</span>'


def _emotion_order(attribution: Attribution) -> int:
    if attribution.emotion in EMOTIONS:
        return EMOTIONS.index(attribution.emotion)
    return len(EMOTIONS)


def _number(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.3f}"


def render_heatmap(attributions: Sequence[Attribution], gold: Optional[Mapping[str, float]] = None) -> str:
    """One table row per tweet: emotion letter, coloured tokens, gold (A) and predicted (P) intensity."""
    if not attributions:
        raise ContractError("nothing to render")
    rows: List[str] = []
    for item in sorted(attributions, key=_emotion_order):
        letter = (item.emotion or "")[:1].upper()
        gold_value = item.gold
        if gold is not None and item.tweet_id in gold:
            gold_value = gold[item.tweet_id]
        spans = " ".join(_token_span(t, float(i)) for t, i in zip(item.tokens, item.I))
        rows.append(
            f'<tr id="{html.escape(item.tweet_id, quote=True)}">'
            f"<td>{letter}</td><td>{spans}</td>"
            f"<td>{_number(gold_value)}</td><td>{_number(item.prediction)}</td></tr>"
        )
    return "\n".join(
        [
            "<!DOCTYPE html>",
            '<html lang="en">',
            '<head><meta charset="utf-8"/><title>Word importance</title>',
            "<style>table{border-collapse:collapse}td,th{border:1px solid #999;padding:4px}"
            "span{padding:1px 2px}</style></head>",
            "<body>",
            "<table>",
            "<thead><tr><th>E</th><th>Tweet</th><th>A</th><th>P</th></tr></thead>",
            "<tbody>",
            *rows,
            "</tbody>",
            "</table>",
            "</body>",
            "</html>",
            "",
        ]
    )


def write_attribution_csv(attributions: Sequence[Attribution], path: Union[str, Path]) -> None:
    records = [
        {"id": item.tweet_id, "token": token, "S": repr(float(s)), "I": repr(float(i))}
        for item in attributions
        for token, s, i in zip(item.tokens, item.S, item.I)
    ]
    pd.DataFrame(records, columns=["id", "token", "S", "I"]).to_csv(path, index=False)
