"""Dense-matrix numerics with reverse-mode differentiation and Adam.

Values are 64-bit, row-major, strictly two-dimensional numpy arrays
(column vectors are n-by-1). Gradients are tracked on a Tape: entering a
``with Tape() as tape:`` block makes it the active tape; operations whose
operands require gradients append nodes in creation order, which is a
topological order by construction. ``tape.backward(loss)`` then sweeps
the node list once in reverse. Operations on constants are never
recorded, so fixed-weight paths (reservoirs) run at plain numpy speed.

One tape per training update; a tape cannot be swept twice. Instances
are single-threaded but independent of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NonFiniteError, UsageError

_ACTIVE_TAPE: "Tape | None" = None


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-D float64 row-major array; scalars become 1x1."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ConfigurationError(f"expected matrix-like value, got ndim={a.ndim}")
    return np.ascontiguousarray(a)


def assert_all_finite(a: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"non-finite values in {context}")


class Tensor:
    """A matrix value, optionally differentiable."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        self.value = as_matrix(value)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise UsageError(f"item() on non-scalar tensor of shape {self.value.shape}")
        return float(self.value[0, 0])

    def grad_or_zeros(self) -> np.ndarray:
        """Adjoint of this node; exactly zero when unreachable from the loss."""
        if self.grad is None:
            return np.zeros_like(self.value)
        return self.grad

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _wrap(other))

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def parameter(value) -> Tensor:
    """A trainable leaf."""
    return Tensor(value, requires_grad=True)


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of differentiable operations for one update."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise UsageError("a tape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def backward(self, loss: Tensor) -> None:
        """Reverse sweep from a scalar loss; populates .grad on reachable nodes."""
        if self._spent:
            raise UsageError("backward() already called on this tape")
        if loss.value.shape != (1, 1):
            raise UsageError(f"loss must be 1x1, got shape {loss.value.shape}")
        self._spent = True
        loss.grad = np.ones((1, 1), dtype=np.float64)
        for node in reversed(self.nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)


def _accum(p: Tensor, g: np.ndarray) -> None:
    if p.grad is None:
        p.grad = g.copy()
    else:
        p.grad += g


def _node(value: np.ndarray, parents: tuple, backward) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.value = value
    out.grad = None
    out.requires_grad = requires
    out._parents = ()
    out._backward = None
    if requires and _ACTIVE_TAPE is not None:
        out._parents = parents
        out._backward = backward
        _ACTIVE_TAPE.nodes.append(out)
    return out


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape[1] != b.value.shape[0]:
        raise ConfigurationError(
            f"matmul dimension mismatch: {a.value.shape} @ {b.value.shape}"
        )
    val = a.value @ b.value

    def backward(g):
        if a.requires_grad:
            _accum(a, g @ b.value.T)
        if b.requires_grad:
            _accum(b, a.value.T @ g)

    return _node(val, (a, b), backward)


def linear(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """Fused affine map w @ x + b (b is a column vector)."""
    if w.value.shape[1] != x.value.shape[0]:
        raise ConfigurationError(
            f"linear dimension mismatch: {w.value.shape} @ {x.value.shape}"
        )
    if b.value.shape != (w.value.shape[0], x.value.shape[1]):
        raise ConfigurationError(
            f"linear bias shape {b.value.shape} does not match output "
            f"({w.value.shape[0]}, {x.value.shape[1]})"
        )
    val = w.value @ x.value + b.value

    def backward(g):
        if w.requires_grad:
            _accum(w, g @ x.value.T)
        if x.requires_grad:
            _accum(x, w.value.T @ g)
        if b.requires_grad:
            _accum(b, g)

    return _node(val, (w, x, b), backward)


def _binary_shapes(a: Tensor, b: Tensor, opname: str) -> None:
    if a.value.shape != b.value.shape:
        raise ConfigurationError(
            f"{opname} shape mismatch: {a.value.shape} vs {b.value.shape}"
        )


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")

    def backward(g):
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, g)

    return _node(a.value + b.value, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, -g)

    return _node(a.value - b.value, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            _accum(a, g * b.value)
        if b.requires_grad:
            _accum(b, g * a.value)

    return _node(a.value * b.value, (a, b), backward)


def tanh(x: Tensor) -> Tensor:
    val = np.tanh(x.value)

    def backward(g):
        if x.requires_grad:
            _accum(x, g * (1.0 - val * val))

    return _node(val, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # numerically symmetric logistic; output strictly inside (0, 1)
    val = 0.5 * (np.tanh(0.5 * x.value) + 1.0)

    def backward(g):
        if x.requires_grad:
            _accum(x, g * val * (1.0 - val))

    return _node(val, (x,), backward)


def exp(x: Tensor) -> Tensor:
    val = np.exp(x.value)

    def backward(g):
        if x.requires_grad:
            _accum(x, g * val)

    return _node(val, (x,), backward)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        if x.requires_grad:
            _accum(x, c * g)

    return _node(c * x.value, (x,), backward)


def add_scalar(x: Tensor, c: float) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accum(x, g)

    return _node(x.value + float(c), (x,), backward)


def affine_const(x: Tensor, mul_c: float, add_c: float) -> Tensor:
    """Elementwise mul_c * x + add_c in one node (e.g. 1 - z as (-1, 1))."""
    mul_c = float(mul_c)

    def backward(g):
        if x.requires_grad:
            _accum(x, mul_c * g)

    return _node(mul_c * x.value + float(add_c), (x,), backward)


def vsum(x: Tensor) -> Tensor:
    """Sum of all entries as a 1x1 tensor."""

    def backward(g):
        if x.requires_grad:
            _accum(x, np.full_like(x.value, g[0, 0]))

    return _node(np.array([[x.value.sum()]]), (x,), backward)


def add_n(terms: list[Tensor]) -> Tensor:
    """Sum of equally shaped tensors in one node."""
    if not terms:
        raise ConfigurationError("add_n needs at least one term")
    val = terms[0].value.copy()
    for t in terms[1:]:
        _binary_shapes(terms[0], t, "add_n")
        val += t.value

    def backward(g):
        for t in terms:
            if t.requires_grad:
                _accum(t, g)

    return _node(val, tuple(terms), backward)


def pick(x: Tensor, i: int) -> Tensor:
    """Entry i of a column vector as a 1x1 tensor."""
    if x.value.shape[1] != 1:
        raise ConfigurationError("pick expects a column vector")
    if not 0 <= i < x.value.shape[0]:
        raise UsageError(f"pick index {i} out of range for length {x.value.shape[0]}")

    def backward(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.value)
            x.grad[i, 0] += g[0, 0]

    return _node(x.value[i:i + 1, 0:1].copy(), (x,), backward)


def log_softmax(x: Tensor) -> Tensor:
    """Log-probabilities of a column vector of logits."""
    if x.value.shape[1] != 1:
        raise ConfigurationError("log_softmax expects a column vector")
    z = x.value - x.value.max()
    lse = math.log(np.exp(z).sum())
    val = z - lse

    def backward(g):
        if x.requires_grad:
            _accum(x, g - np.exp(val) * g.sum())

    return _node(val, (x,), backward)


def entropy_from_logp(lp: Tensor) -> Tensor:
    """Shannon entropy -sum(p * log p) of log-probabilities, as 1x1."""
    p = np.exp(lp.value)
    val = np.array([[-(p * lp.value).sum()]])

    def backward(g):
        if lp.requires_grad:
            _accum(lp, -g[0, 0] * p * (1.0 + lp.value))

    return _node(val, (lp,), backward)


def squared_error(v: Tensor, target: float) -> Tensor:
    """(v - target)^2 for a 1x1 tensor, as 1x1."""
    if v.value.shape != (1, 1):
        raise ConfigurationError("squared_error expects a 1x1 tensor")
    d = v.value[0, 0] - float(target)

    def backward(g):
        if v.requires_grad:
            _accum(v, np.array([[2.0 * d * g[0, 0]]]))

    return _node(np.array([[d * d]]), (v,), backward)


_ELEMENTWISE = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "add": add,
    "mul": mul,
    "sub": sub,
}


def elementwise(op: str, *args: Tensor) -> Tensor:
    """Dispatch by name over the elementwise primitive set."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ConfigurationError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """Bias-corrected Adam moments for a fixed list of parameters."""

    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], learning_rate: float = 3e-4,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> "AdamState":
        st = cls(learning_rate, beta1, beta2, epsilon)
        st.first_moment = [np.zeros_like(p.value) for p in params]
        st.second_moment = [np.zeros_like(p.value) for p in params]
        return st


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState) -> None:
    """One in-place Adam update; aborts loudly on non-finite gradients."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ConfigurationError("params/grads/state length mismatch")
    for p, g in zip(params, grads):
        if g.shape != p.value.shape:
            raise ConfigurationError(
                f"gradient shape {g.shape} does not match parameter {p.value.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient passed to adam_step")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    lr = state.learning_rate
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
