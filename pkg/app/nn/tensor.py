"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Node` wraps a value array and, when it was produced by an
operation, links to its parents together with the local backward rule for
each of them. :func:`backward` walks the graph once in reverse topological
order and accumulates ``grad`` on every node that requires it.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError, DimensionError, NonFiniteError

ArrayLike = Union[np.ndarray, Sequence[float], float]
BackwardRule = Callable[[np.ndarray], np.ndarray]

_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Enable NaN/Inf assertions after every op. Off by default."""
    global _debug_checks
    _debug_checks = bool(enabled)


@contextmanager
def debug_checks() -> Iterator[None]:
    previous = _debug_checks
    set_debug_checks(True)
    try:
        yield
    finally:
        set_debug_checks(previous)


def tensor(data: ArrayLike) -> np.ndarray:
    """Validate and copy ``data`` into a read-only float64 array."""
    array = np.array(data, dtype=np.float64)
    if array.ndim == 0 or 0 in array.shape:
        raise DimensionError(f"tensors need at least one dimension and no empty axes, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteError("tensor contains NaN or Inf")
    array.setflags(write=False)
    return array


class Node:
    __slots__ = ("value", "grad", "requires_grad", "parents", "name")

    def __init__(
        self,
        value: ArrayLike,
        requires_grad: bool = False,
        parents: Optional[List[Tuple["Node", BackwardRule]]] = None,
        name: Optional[str] = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents = parents or []
        self.grad: Optional[np.ndarray] = None
        self.name = name
        if _debug_checks and not np.all(np.isfinite(self.value)):
            raise NonFiniteError(f"non-finite value produced{f' by {name}' if name else ''}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Node(shape={self.shape}, requires_grad={self.requires_grad}, name={self.name!r})"

    def __add__(self, other: "Node") -> "Node":
        return add(self, other)

    def __sub__(self, other: "Node") -> "Node":
        return sub(self, other)

    def __mul__(self, other: "Node") -> "Node":
        return mul(self, other)

    def __matmul__(self, other: "Node") -> "Node":
        return matmul(self, other)

    def __getitem__(self, index) -> "Node":
        return take(self, index)


def parameter(data: ArrayLike, name: Optional[str] = None) -> Node:
    return Node(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def constant(data: ArrayLike) -> Node:
    return Node(np.array(data, dtype=np.float64), requires_grad=False)


def as_node(value: Union[Node, ArrayLike]) -> Node:
    return value if isinstance(value, Node) else constant(value)


_as_node = as_node


def _result(value: np.ndarray, links: List[Tuple[Node, BackwardRule]], name: str) -> Node:
    live = [(node, rule) for node, rule in links if node.requires_grad]
    return Node(value, requires_grad=bool(live), parents=live, name=name)


def _same_shape(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a: Node, b: Node) -> Node:
    a, b = _as_node(a), _as_node(b)
    if a.value.ndim not in (1, 2) or b.value.ndim not in (1, 2) or (a.value.ndim == 1 and b.value.ndim == 1):
        raise DimensionError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise DimensionError(f"matmul: inner dimensions differ {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def grad_a(g: np.ndarray) -> np.ndarray:
        if bv.ndim == 1:
            return np.outer(g, bv)
        return g @ bv.T

    def grad_b(g: np.ndarray) -> np.ndarray:
        if av.ndim == 1:
            return np.outer(av, g)
        return av.T @ g

    return _result(av @ bv, [(a, grad_a), (b, grad_b)], "matmul")


def add(a: Node, b: Node) -> Node:
    a, b = _as_node(a), _as_node(b)
    _same_shape(a, b, "add")
    return _result(a.value + b.value, [(a, lambda g: g), (b, lambda g: g)], "add")


def sub(a: Node, b: Node) -> Node:
    a, b = _as_node(a), _as_node(b)
    _same_shape(a, b, "sub")
    return _result(a.value - b.value, [(a, lambda g: g), (b, lambda g: -g)], "sub")


def mul(a: Node, b: Node) -> Node:
    a, b = _as_node(a), _as_node(b)
    _same_shape(a, b, "mul")
    av, bv = a.value, b.value
    return _result(av * bv, [(a, lambda g: g * bv), (b, lambda g: g * av)], "mul")


def scale(a: Node, factor: float) -> Node:
    return _result(a.value * factor, [(a, lambda g: g * factor)], "scale")


def add_bias(x: Node, bias: Node) -> Node:
    """Add a bias vector to a vector or to every row of a matrix."""
    x, bias = _as_node(x), _as_node(bias)
    if bias.value.ndim != 1 or x.shape[-1] != bias.shape[0]:
        raise DimensionError(f"add_bias: bias {bias.shape} does not fit {x.shape}")
    if x.value.ndim == 1:
        return _result(x.value + bias.value, [(x, lambda g: g), (bias, lambda g: g)], "add_bias")
    return _result(
        x.value + bias.value,
        [(x, lambda g: g), (bias, lambda g: g.sum(axis=0))],
        "add_bias",
    )


def sigmoid_array(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def sigmoid(x: Node) -> Node:
    s = sigmoid_array(x.value)
    return _result(s, [(x, lambda g: g * s * (1.0 - s))], "sigmoid")


def tanh(x: Node) -> Node:
    t = np.tanh(x.value)
    return _result(t, [(x, lambda g: g * (1.0 - t * t))], "tanh")


def relu(x: Node) -> Node:
    active = (x.value > 0).astype(np.float64)
    return _result(x.value * active, [(x, lambda g: g * active)], "relu")


def log(x: Node) -> Node:
    xv = x.value
    return _result(np.log(xv), [(x, lambda g: g / xv)], "log")


def elementwise(op: str, *inputs: Node) -> Node:
    """Dispatch by name: add, mul, sigmoid, tanh, relu."""
    binary = {"add": add, "mul": mul}
    unary = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
    if op in binary:
        if len(inputs) != 2:
            raise ContractError(f"{op} takes two operands")
        return binary[op](*inputs)
    if op in unary:
        if len(inputs) != 1:
            raise ContractError(f"{op} takes one operand")
        return unary[op](inputs[0])
    raise ContractError(f"unknown elementwise op {op!r}")


def total(x: Node) -> Node:
    shape = x.shape
    return _result(np.array([x.value.sum()]), [(x, lambda g: np.full(shape, g[0]))], "sum")


def mean(x: Node) -> Node:
    return scale(total(x), 1.0 / x.value.size)


def transpose(x: Node) -> Node:
    if x.value.ndim != 2:
        raise DimensionError("transpose needs a matrix")
    return _result(x.value.T, [(x, lambda g: g.T)], "transpose")


def take(x: Node, index) -> Node:
    """Basic or integer-array indexing; gradient scatters back with add.at."""
    shape = x.shape
    out = np.array(x.value[index], dtype=np.float64)
    if out.ndim == 0:
        raise DimensionError("take: indexing must keep at least one dimension")

    def rule(g: np.ndarray) -> np.ndarray:
        full = np.zeros(shape)
        if isinstance(index, np.ndarray):
            np.add.at(full, index, g)
        else:
            full[index] += g
        return full

    return _result(out, [(x, rule)], "take")


def concat(nodes: Sequence[Node], axis: int = 0) -> Node:
    nodes = [_as_node(n) for n in nodes]
    if not nodes:
        raise ContractError("concat of nothing")
    values = [n.value for n in nodes]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from exc
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])
    links = []
    for node, start, stop in zip(nodes, bounds[:-1], bounds[1:]):
        def rule(g: np.ndarray, start=int(start), stop=int(stop)) -> np.ndarray:
            return np.take(g, np.arange(start, stop), axis=axis)

        links.append((node, rule))
    return _result(out, links, "concat")


def stack_rows(rows: Sequence[Node]) -> Node:
    """Stack equal-length vectors into a [T x n] matrix."""
    rows = [_as_node(r) for r in rows]
    if not rows:
        raise ContractError("stack_rows of nothing")
    width = rows[0].shape
    for r in rows:
        if r.shape != width or len(width) != 1:
            raise DimensionError("stack_rows needs vectors of one length")
    out = np.stack([r.value for r in rows])
    links = [(r, (lambda g, i=i: g[i])) for i, r in enumerate(rows)]
    return _result(out, links, "stack_rows")


def max_over_rows(x: Node) -> Node:
    """Column-wise max of a [T x f] matrix. Ties route gradient to the first row."""
    if x.value.ndim != 2 or x.shape[0] < 1:
        raise ContractError("max_over_rows needs a non-empty matrix")
    winners = np.argmax(x.value, axis=0)
    columns = np.arange(x.shape[1])
    shape = x.shape

    def rule(g: np.ndarray) -> np.ndarray:
        full = np.zeros(shape)
        full[winners, columns] = g
        return full

    return _result(x.value[winners, columns], [(x, rule)], "max_over_rows")


def gather_rows(table: Node, ids: Sequence[int]) -> Node:
    index = np.asarray(ids, dtype=np.int64)
    if index.ndim != 1 or index.size == 0:
        raise ContractError("gather_rows needs a non-empty id vector")
    if index.min() < 0 or index.max() >= table.shape[0]:
        raise ContractError(f"id out of range for table with {table.shape[0]} rows")
    return take(table, index)


def binary_cross_entropy(p: Node, y: ArrayLike, clamp: float = 1e-12) -> Node:
    """Mean over labels of -[y log p + (1-y) log(1-p)] with p clamped."""
    target = np.asarray(y, dtype=np.float64)
    if target.shape != p.shape:
        raise DimensionError(f"binary_cross_entropy: {p.shape} vs {target.shape}")
    pc = np.clip(p.value, clamp, 1.0 - clamp)
    k = pc.size
    loss = -np.sum(target * np.log(pc) + (1.0 - target) * np.log(1.0 - pc)) / k

    def rule(g: np.ndarray) -> np.ndarray:
        return g[0] * (pc - target) / (pc * (1.0 - pc)) / k

    return _result(np.array([loss]), [(p, rule)], "binary_cross_entropy")


def squared_error(pred: Node, gold: ArrayLike) -> Node:
    target = np.asarray(gold, dtype=np.float64)
    if target.shape != pred.shape:
        raise DimensionError(f"squared_error: {pred.shape} vs {target.shape}")
    diff = pred.value - target
    return _result(np.array([np.sum(diff * diff)]), [(pred, lambda g: 2.0 * g[0] * diff)], "squared_error")


def _topological_order(root: Node) -> List[Node]:
    order: List[Node] = []
    seen = set()
    stack: List[Tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> None:
    """Fill ``grad`` of every node reachable from a scalar ``loss``."""
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    pending = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g if node.grad is None else node.grad + g
        for parent, rule in node.parents:
            contribution = rule(g)
            key = id(parent)
            pending[key] = contribution if key not in pending else pending[key] + contribution
        if _debug_checks and not np.all(np.isfinite(node.grad)):
            raise NonFiniteError(f"non-finite gradient at {node!r}")
