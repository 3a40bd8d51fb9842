"""Small reverse-mode autodiff over numpy arrays.

Only what the additive models and the autoencoder need: affine layers,
ReLU/sigmoid, concatenation, elementwise arithmetic and reductions.
Everything is float64.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    pass


class GraphError(RuntimeError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # sum out axes that were broadcast in the forward pass
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus the bookkeeping needed to backpropagate into it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (), _backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward) -> "Tensor":
        live = tuple(p for p in parents if p.requires_grad)
        if not live:
            return Tensor(data)
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)

    def __add__(self, other):
        other = as_tensor(other)
        out_shape_a, out_shape_b = self.shape, other.shape

        def backward(g):
            return _unbroadcast(g, out_shape_a), _unbroadcast(g, out_shape_b)

        return Tensor._make(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._make(a * b, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return self * (1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent: float):
        a = self.data
        p = float(exponent)

        def backward(g):
            return (g * p * a ** (p - 1.0),)

        return Tensor._make(a**p, (self,), backward)

    def relu(self):
        return relu(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        old = self.shape
        return Tensor._make(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))

    def __getitem__(self, idx):
        old = self.shape

        def backward(g):
            full = np.zeros(old, dtype=DTYPE)
            np.add.at(full, idx, g)
            return (full,)

        return Tensor._make(self.data[idx], (self,), backward)

    # -- reverse pass -------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar loss, got shape {self.shape}")
        if self.is_leaf:
            raise GraphError("no recorded forward pass: backward called on a leaf tensor")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def backward(g):
        return g @ B.T, A.T @ g

    return Tensor._make(A @ B, (a, b), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor._make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor._make(s, (x,), lambda g: (g * s * (1.0 - s),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), backward)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._make(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def tmean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return tsum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def mse_loss(pred, target) -> Tensor:
    diff = as_tensor(pred) - as_tensor(target)
    return tmean(diff * diff)


def gradients(loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Run backward on ``loss`` and return d loss / d p for each p (zeros if unused)."""
    for p in params:
        p.zero_grad()
    loss.backward()
    return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


# ---------------------------------------------------------------------------
# MLP


class Mlp:
    """Fully connected ReLU network.

    With ``skip=True`` the network input is concatenated onto the input of
    every layer after the first, so layer ``i > 0`` has fan-in
    ``hidden + d_in``.  Dropout is inverted dropout on hidden activations and
    only acts when ``train`` is passed an rng.
    """

    def __init__(self, d_in: int, d_out: int, hidden: int = 100, n_layers: int = 4,
                 skip: bool = True, dropout: float = 0.0, rng: np.random.Generator | None = None,
                 zero: bool = False):
        if n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        self.d_in, self.d_out, self.hidden = d_in, d_out, hidden
        self.n_layers, self.skip, self.dropout = n_layers, skip, dropout
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in self.layer_dims():
            if zero:
                w, b = np.zeros((fan_in, fan_out)), np.zeros(fan_out)
            else:
                bound = 1.0 / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
                b = rng.uniform(-bound, bound, size=fan_out)
            self.weights.append(parameter(w))
            self.biases.append(parameter(b))

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = []
        for i in range(self.n_layers):
            if i == 0:
                fan_in = self.d_in
            else:
                fan_in = self.hidden + (self.d_in if self.skip else 0)
            fan_out = self.d_out if i == self.n_layers - 1 else self.hidden
            dims.append((fan_in, fan_out))
        return dims

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def __call__(self, x, rng: np.random.Generator | None = None, trace: list | None = None) -> Tensor:
        x = as_tensor(x)
        if x.data.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeError(f"expected input of shape (batch, {self.d_in}), got {x.shape}")
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if i > 0 and self.skip:
                h = concat([h, x], axis=1)
            h = matmul(h, w) + b
            if i < self.n_layers - 1:
                h = relu(h)
                if trace is not None:
                    trace.append(h.data)
                if rng is not None and self.dropout > 0:
                    keep = rng.random(h.shape) >= self.dropout
                    h = h * (keep / (1.0 - self.dropout))
        return h

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward on plain arrays, no graph."""
        x = np.asarray(x, dtype=DTYPE)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeError(f"expected input of shape (batch, {self.d_in}), got {x.shape}")
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if i > 0 and self.skip:
                h = np.concatenate([h, x], axis=1)
            h = h @ w.data + b.data
            if i < self.n_layers - 1:
                np.maximum(h, 0.0, out=h)
        return h

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w.data.copy()
            out[f"b{i}"] = b.data.copy()
        return out

    def load_state(self, state: dict[str, np.ndarray]):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if state[f"w{i}"].shape != w.shape or state[f"b{i}"].shape != b.shape:
                raise ShapeError(f"layer {i}: stored shape does not match network")
            w.data = np.array(state[f"w{i}"], dtype=DTYPE)
            b.data = np.array(state[f"b{i}"], dtype=DTYPE)

    def config(self) -> dict:
        return dict(d_in=self.d_in, d_out=self.d_out, hidden=self.hidden,
                    n_layers=self.n_layers, skip=self.skip, dropout=self.dropout)


# ---------------------------------------------------------------------------
# Optimisation


class Adam:
    """Adam with bias correction and decoupled weight decay.

    Decay is applied first (``p -= lr * weight_decay * p``), then the usual
    Adam delta.
    """

    def __init__(self, params: Iterable[Tensor], lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr, self.eps, self.weight_decay = lr, eps, weight_decay
        self.beta1, self.beta2 = betas
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray] | None = None):
        if grads is None:
            grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise ShapeError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        for p, g in zip(self.params, grads):
            if np.shape(g) != p.shape:
                raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def finite_diff_grad(f: Callable[[], float], params: Sequence[np.ndarray], step: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``f()`` w.r.t. each entry of each array in ``params``.

    The arrays are perturbed in place and restored, so ``f`` should read
    them (e.g. the ``.data`` of network parameters).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    out = []
    for arr in params:
        g = np.zeros_like(arr, dtype=DTYPE)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = float(f())
            flat[i] = orig - step
            fm = float(f())
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * step)
        out.append(g)
    return out
