from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import ContractError
from . import tensor as T
from .networks import ModelBundle, forward
from .tensor import Node

logger = logging.getLogger(__name__)

XENT = "multilabel_xent"
MSE = "mse"


class TrainingExample(Protocol):
    """Anything with token ids and a target vector, e.g. a dataset record."""

    def token_ids(self) -> Sequence[int]: ...

    def target(self) -> np.ndarray: ...


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_settings(cls, adam) -> "AdamState":
        return cls(lr=adam.lr, beta1=adam.beta1, beta2=adam.beta2, eps=adam.eps)


@dataclass(frozen=True)
class TrainPlan:
    epochs: int
    batch_size: int = 8
    loss: str = MSE
    seed: int = 13
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss not in (XENT, MSE):
            raise ContractError(f"unknown loss {self.loss!r}")


@dataclass
class TrainResult:
    bundle: ModelBundle
    losses: List[float]


def adam_step(state: AdamState, params: Dict[str, Node], grads: Dict[str, np.ndarray]) -> Dict[str, Node]:
    """One bias-corrected Adam update, applied to the parameter nodes in place."""
    if set(params) != set(grads):
        raise ContractError("parameters and gradients name different tensors")
    for name, node in params.items():
        if grads[name].shape != node.shape:
            raise ContractError(f"gradient for {name} has shape {grads[name].shape}, expected {node.shape}")

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name in sorted(params):
        node, grad = params[name], grads[name]
        m = state.first_moments.get(name)
        v = state.second_moments.get(name)
        if m is None:
            m = np.zeros_like(node.value)
            v = np.zeros_like(node.value)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moments[name] = m
        state.second_moments[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        node.value = node.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def multilabel_xent(ve, y) -> Node:
    """Per-label binary cross-entropy averaged over labels; ve is clamped to [1e-12, 1-1e-12]."""
    ve = T.as_node(ve)
    target = np.asarray(y, dtype=np.float64)
    if target.shape != ve.shape:
        raise ContractError(f"label vector of length {target.size} does not match output of {ve.value.size}")
    return T.binary_cross_entropy(ve, target)


def mse(pred, gold) -> Node:
    """Mean of squared differences over a batch of intensities."""
    pred = T.as_node(pred)
    target = np.asarray(gold, dtype=np.float64).reshape(pred.shape)
    return T.scale(T.squared_error(pred, target), 1.0 / pred.value.size)


def _example_loss(m: ModelBundle, example: TrainingExample, plan: TrainPlan, rng: np.random.Generator) -> Node:
    _, ve = forward(m, example.token_ids(), training=True, rng=rng)
    if plan.loss == XENT:
        return multilabel_xent(ve, example.target())
    return mse(ve, example.target())


def train(
    m: ModelBundle,
    data: Sequence[TrainingExample],
    plan: TrainPlan,
    optimizer: Optional[AdamState] = None,
) -> TrainResult:
    """Train ``m`` in place with mini-batch Adam and return it with the per-epoch loss log.

    The last incomplete batch is trained. Shuffling and dropout masks draw
    from a generator seeded with ``plan.seed + epoch``, so a run is
    reproducible bit for bit.
    """
    if not data:
        raise ContractError("training data is empty")
    output_dim = m.config.output_dim
    for example in data:
        if np.asarray(example.target()).size != output_dim:
            raise ContractError(f"target of length {np.asarray(example.target()).size} does not fit output_dim {output_dim}")

    optimizer = optimizer or AdamState()
    params = m.trainable_parameters()
    losses: List[float] = []
    n = len(data)
    for epoch in range(plan.epochs):
        rng = np.random.default_rng(plan.seed + epoch)
        order = rng.permutation(n) if plan.shuffle else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, plan.batch_size):
            batch = order[start : start + plan.batch_size]
            for node in params.values():
                node.zero_grad()
            batch_loss: Optional[Node] = None
            for index in batch:
                loss = _example_loss(m, data[int(index)], plan, rng)
                batch_loss = loss if batch_loss is None else T.add(batch_loss, loss)
            batch_loss = T.scale(batch_loss, 1.0 / len(batch))
            T.backward(batch_loss)
            grads = {
                name: node.grad if node.grad is not None else np.zeros_like(node.value)
                for name, node in params.items()
            }
            adam_step(optimizer, params, grads)
            epoch_loss += float(batch_loss.value[0]) * len(batch)
        losses.append(epoch_loss / n)
        logger.info("epoch %d/%d loss %.6f", epoch + 1, plan.epochs, losses[-1])
    return TrainResult(bundle=m, losses=losses)


def write_loss_log(losses: Sequence[float], path: Union[str, Path]) -> None:
    frame = pd.DataFrame({"epoch": range(1, len(losses) + 1), "loss": [repr(float(v)) for v in losses]})
    frame.to_csv(path, index=False)
