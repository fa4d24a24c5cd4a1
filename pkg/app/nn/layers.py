"""Network building blocks: embedding, LSTM, same-padded Conv1D, max-pool over
time, dense sigmoid and inverted dropout.

All layers are functions over :class:`~app.nn.tensor.Node` graphs; parameter
containers are plain dataclasses of nodes so that a trained model can be
frozen by simply never calling ``backward`` on it again.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractError, DimensionError
from . import tensor as T
from .tensor import Node

PAD_ID = 0
GATES = ("f", "i", "o", "c")


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class LSTMParams:
    w_f: Node
    w_i: Node
    w_o: Node
    w_c: Node
    u_f: Node
    u_i: Node
    u_o: Node
    u_c: Node
    b_f: Node
    b_i: Node
    b_o: Node
    b_c: Node

    def __post_init__(self) -> None:
        units, input_dim = self.w_f.shape
        for gate in GATES:
            w, u, b = self.gate(gate)
            if w.shape != (units, input_dim) or u.shape != (units, units) or b.shape != (units,):
                raise DimensionError(f"LSTM gate {gate!r} has inconsistent parameter shapes")

    @property
    def units(self) -> int:
        return self.w_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_f.shape[1]

    def gate(self, name: str) -> Tuple[Node, Node, Node]:
        return getattr(self, f"w_{name}"), getattr(self, f"u_{name}"), getattr(self, f"b_{name}")

    def parameters(self) -> Dict[str, Node]:
        return {f"{kind}_{gate}": getattr(self, f"{kind}_{gate}") for kind in ("w", "u", "b") for gate in GATES}

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "LSTMParams":
        return cls(**{name: T.parameter(value, name=f"lstm.{name}") for name, value in arrays.items()})

    @classmethod
    def initialize(cls, input_dim: int, units: int, rng: np.random.Generator) -> "LSTMParams":
        arrays: Dict[str, np.ndarray] = {}
        for gate in GATES:
            arrays[f"w_{gate}"] = glorot_uniform(rng, (units, input_dim), input_dim, units)
            arrays[f"u_{gate}"] = glorot_uniform(rng, (units, units), units, units)
            arrays[f"b_{gate}"] = np.full(units, 1.0 if gate == "f" else 0.0)
        return cls.from_arrays(arrays)


@dataclass
class ConvParams:
    weights: Node  # [filters x kernel_size x input_dim]
    bias: Node  # [filters]

    def __post_init__(self) -> None:
        if self.weights.value.ndim != 3 or self.weights.shape[1] < 1:
            raise DimensionError("conv weights must be [filters x kernel_size x input_dim] with kernel_size >= 1")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError("conv bias must have one entry per filter")

    @property
    def filters(self) -> int:
        return self.weights.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[1]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[2]

    def parameters(self) -> Dict[str, Node]:
        return {"weights": self.weights, "bias": self.bias}

    @classmethod
    def initialize(cls, input_dim: int, filters: int, kernel_size: int, rng: np.random.Generator) -> "ConvParams":
        weights = glorot_uniform(
            rng, (filters, kernel_size, input_dim), kernel_size * input_dim, kernel_size * filters
        )
        return cls(T.parameter(weights, name="conv.weights"), T.parameter(np.zeros(filters), name="conv.bias"))


@dataclass
class DenseParams:
    weights: Node  # [outputs x inputs]
    bias: Node

    def parameters(self) -> Dict[str, Node]:
        return {"weights": self.weights, "bias": self.bias}

    @classmethod
    def initialize(cls, inputs: int, outputs: int, rng: np.random.Generator) -> "DenseParams":
        weights = glorot_uniform(rng, (outputs, inputs), inputs, outputs)
        return cls(T.parameter(weights, name="dense.weights"), T.parameter(np.zeros(outputs), name="dense.bias"))


@dataclass
class EmbeddingTable:
    weights: Node
    trainable: bool = False

    def __post_init__(self) -> None:
        matrix = self.weights.value
        if matrix.ndim != 2:
            raise DimensionError("embedding matrix must be [vocab_size x dim]")
        if not np.all(np.isfinite(matrix)):
            raise ContractError("embedding matrix has non-finite rows")
        if np.any(matrix[PAD_ID] != 0.0):
            raise ContractError("padding row of the embedding matrix must be all zero")
        self.weights.requires_grad = self.trainable

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, trainable: bool = False) -> "EmbeddingTable":
        return cls(Node(np.array(matrix, dtype=np.float64), requires_grad=trainable, name="embedding"), trainable)

    def lookup(self, ids: Sequence[int]) -> Node:
        return T.gather_rows(self.weights, ids)


def lstm_step(p: LSTMParams, x_t, h_prev, c_prev) -> Tuple[Node, Node]:
    x_t, h_prev, c_prev = T.as_node(x_t), T.as_node(h_prev), T.as_node(c_prev)
    if x_t.shape != (p.input_dim,) or h_prev.shape != (p.units,) or c_prev.shape != (p.units,):
        raise DimensionError(
            f"lstm_step expects x {(p.input_dim,)}, h/c {(p.units,)}; got {x_t.shape}, {h_prev.shape}, {c_prev.shape}"
        )

    def pre_activation(gate: str) -> Node:
        w, u, b = p.gate(gate)
        return T.add_bias(T.add(T.matmul(w, x_t), T.matmul(u, h_prev)), b)

    f_t = T.sigmoid(pre_activation("f"))
    i_t = T.sigmoid(pre_activation("i"))
    o_t = T.sigmoid(pre_activation("o"))
    c_t = T.add(T.mul(f_t, c_prev), T.mul(i_t, T.tanh(pre_activation("c"))))
    h_t = T.mul(o_t, T.tanh(c_t))
    return h_t, c_t


def lstm_sequence(
    p: LSTMParams,
    xs,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Node:
    """Run the cell over the rows of ``xs`` from zero state; row t of the result is h_t.

    Input projections of all four gates are computed in one stacked product
    per sequence; the recurrence itself follows :func:`lstm_step`.
    """
    xs = T.as_node(xs)
    if xs.value.ndim != 2 or xs.shape[0] < 1:
        raise ContractError("lstm_sequence needs a non-empty [T x input_dim] sequence")
    if xs.shape[1] != p.input_dim:
        raise DimensionError(f"lstm_sequence: input dim {xs.shape[1]} != {p.input_dim}")

    units = p.units
    w_all = T.concat([p.gate(g)[0] for g in GATES], axis=0)
    u_all = T.concat([p.gate(g)[1] for g in GATES], axis=0)
    b_all = T.concat([p.gate(g)[2] for g in GATES], axis=0)
    projected = T.add_bias(T.matmul(xs, T.transpose(w_all)), b_all)

    h = T.constant(np.zeros(units))
    c = T.constant(np.zeros(units))
    outputs: List[Node] = []
    for t in range(xs.shape[0]):
        z = T.add(projected[t], T.matmul(u_all, h))
        f_t = T.sigmoid(z[0:units])
        i_t = T.sigmoid(z[units : 2 * units])
        o_t = T.sigmoid(z[2 * units : 3 * units])
        candidate = T.tanh(z[3 * units :])
        c = T.add(T.mul(f_t, c), T.mul(i_t, candidate))
        h = T.mul(o_t, T.tanh(c))
        outputs.append(h)
    return dropout(T.stack_rows(outputs), dropout_rate, training, rng)


def conv1d_same(p: ConvParams, seq, activation: bool = True) -> Node:
    """Kernel-k convolution whose window at t covers rows t..t+k-1, zero rows appended at the end."""
    seq = T.as_node(seq)
    if seq.value.ndim != 2 or seq.shape[0] < 1:
        raise ContractError("conv1d_same needs a non-empty [T x d] sequence")
    if seq.shape[1] != p.input_dim:
        raise DimensionError(f"conv1d_same: input dim {seq.shape[1]} != {p.input_dim}")
    steps, dim = seq.shape
    k = p.kernel_size
    padded = seq if k == 1 else T.concat([seq, T.constant(np.zeros((k - 1, dim)))], axis=0)
    out: Optional[Node] = None
    for j in range(k):
        window = padded[j : j + steps]
        kernel = p.weights[:, j, :]
        term = T.matmul(window, T.transpose(kernel))
        out = term if out is None else T.add(out, term)
    out = T.add_bias(out, p.bias)
    return T.relu(out) if activation else out


def max_pool_over_time(seq) -> Node:
    seq = T.as_node(seq)
    if seq.value.ndim != 2 or seq.shape[0] < 1:
        raise ContractError("max_pool_over_time needs a non-empty [T x f] sequence")
    return T.max_over_rows(seq)


def dense_sigmoid(weights, bias, x) -> Node:
    weights, bias, x = T.as_node(weights), T.as_node(bias), T.as_node(x)
    if weights.value.ndim != 2 or x.shape != (weights.shape[1],) or bias.shape != (weights.shape[0],):
        raise DimensionError(f"dense_sigmoid: W {weights.shape}, b {bias.shape}, x {x.shape}")
    return T.sigmoid(T.add_bias(T.matmul(weights, x), bias))


def dropout(x: Node, rate: float, training: bool, rng: Optional[np.random.Generator] = None) -> Node:
    """Inverted dropout: kept activations are scaled by 1/(1-rate) at train time."""
    if not training or rate <= 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ContractError("training-mode dropout needs a random generator")
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return T.mul(x, T.constant(keep))
