"""Vectorized reverse-mode autodiff over numpy buffers.

A :class:`Tensor` records its parents and a backward closure; calling
``backward()`` on a scalar loss walks the graph in reverse topological order
and accumulates gradients into every tensor created with
``requires_grad=True``. Buffers are 64-bit in test mode and 32-bit in
training mode (:func:`set_default_dtype`); debug mode asserts that no
forward or backward pass produces non-finite values.
"""

from __future__ import annotations

import numpy as np

_DEFAULT_DTYPE = np.float64
_DEBUG_CHECKS = True


def set_default_dtype(dtype) -> None:
    """Switch between float64 (tests) and float32 (training throughput)."""
    global _DEFAULT_DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _DEFAULT_DTYPE = dtype


def default_dtype():
    return _DEFAULT_DTYPE


def set_debug_checks(enabled: bool) -> None:
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = enabled


def _check(buf: np.ndarray) -> np.ndarray:
    if _DEBUG_CHECKS and not np.isfinite(buf).all():
        raise FloatingPointError("non-finite value in pass")
    return buf


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum an upstream gradient down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Node in the autodiff graph wrapping a dense numpy buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100    # keep numpy from hijacking binary ops

    def __init__(self, data, requires_grad: bool = False,
                 parents=(), backward=None):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        _check(self.data)
        self.grad = None
        self.requires_grad = requires_grad or any(
            p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    # -- bookkeeping --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, grad: np.ndarray):
        grad = np.asarray(grad, dtype=_DEFAULT_DTYPE)
        self.grad = grad if self.grad is None else self.grad + grad

    def backward(self):
        """Reverse-mode sweep from a scalar loss."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo, seen = [], set()

        def visit(node):
            if id(node) in seen or not node.requires_grad:
                return
            seen.add(id(node))
            for parent in node._parents:
                visit(parent)
            topo.append(node)

        visit(self)
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)
                if _DEBUG_CHECKS:
                    for parent in node._parents:
                        if parent.grad is not None:
                            _check(parent.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g, self.shape))
            other._accumulate(_unbroadcast(g, other.shape))
        return Tensor(self.data + other.data, parents=(self, other),
                      backward=bwd)

    def __mul__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g * other.data, self.shape))
            other._accumulate(_unbroadcast(g * self.data, other.shape))
        return Tensor(self.data * other.data, parents=(self, other),
                      backward=bwd)

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    __radd__ = __add__
    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor division unsupported; multiply by exp "
                            "of a negated log instead")
        return self * (1.0 / scalar)

    def __matmul__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._accumulate(g @ other.data.swapaxes(-1, -2))
            other._accumulate(self.data.swapaxes(-1, -2) @ g)
        return Tensor(self.data @ other.data, parents=(self, other),
                      backward=bwd)

    def __getitem__(self, key):
        def bwd(g):
            full = np.zeros_like(self.data)
            np.add.at(full, key, g)
            self._accumulate(full)
        return Tensor(self.data[key], parents=(self,), backward=bwd)

    # -- shape --------------------------------------------------------------

    def reshape(self, *shape):
        old = self.shape

        def bwd(g):
            self._accumulate(g.reshape(old))
        return Tensor(self.data.reshape(*shape), parents=(self,),
                      backward=bwd)

    def transpose(self, *axes):
        inverse = np.argsort(axes)

        def bwd(g):
            self._accumulate(g.transpose(inverse))
        return Tensor(self.data.transpose(axes), parents=(self,),
                      backward=bwd)

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def bwd(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape))
        return Tensor(self.data.sum(axis=axis, keepdims=keepdims),
                      parents=(self,), backward=bwd)

    def mean(self, axis=None, keepdims=False):
        count = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


# ---------------------------------------------------------------------------
# Pointwise nonlinearities


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bwd(g):
        x._accumulate(g * mask)
    return Tensor(x.data * mask, parents=(x,), backward=bwd)


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        x._accumulate(g * out * (1.0 - out))
    return Tensor(out, parents=(x,), backward=bwd)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bwd(g):
        x._accumulate(g * (1.0 - out * out))
    return Tensor(out, parents=(x,), backward=bwd)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def bwd(g):
        x._accumulate(g * out)
    return Tensor(out, parents=(x,), backward=bwd)


def log(x: Tensor) -> Tensor:
    def bwd(g):
        x._accumulate(g / x.data)
    return Tensor(np.log(x.data), parents=(x,), backward=bwd)


def square(x: Tensor) -> Tensor:
    return x * x


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accumulate(piece)
    return Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                  parents=tuple(tensors), backward=bwd)


# ---------------------------------------------------------------------------
# Layers


def dense(x: Tensor, weight: Tensor, bias: Tensor | float = 0.0) -> Tensor:
    out = x @ weight
    if isinstance(bias, Tensor):
        out = out + bias
    elif bias:
        out = out + float(bias)
    return out


def embedding(table: Tensor, indices) -> Tensor:
    """Row lookup with scatter-add backward (action embeddings)."""
    indices = np.asarray(indices, dtype=np.int64)

    def bwd(g):
        full = np.zeros_like(table.data)
        np.add.at(full, indices, g)
        table._accumulate(full)
    return Tensor(table.data[indices], parents=(table,), backward=bwd)


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None = None) -> Tensor:
    """3x3 same-padding stride-1 convolution, NCHW layout."""
    n, c, h, w = x.shape
    o, ck, kh, kw = kernels.shape
    if (ck, kh, kw) != (c, 3, 3):
        raise ValueError(f"kernels must be (O, {c}, 3, 3), got "
                         f"{kernels.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, o, h, w), dtype=x.data.dtype)
    for di in range(3):
        for dj in range(3):
            patch = xp[:, :, di:di + h, dj:dj + w]
            out += np.einsum("nchw,oc->nohw", patch, kernels.data[:, :, di, dj],
                             optimize=True)

    def bwd(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(kernels.data)
        for di in range(3):
            for dj in range(3):
                patch = xp[:, :, di:di + h, dj:dj + w]
                gk[:, :, di, dj] = np.einsum("nohw,nchw->oc", g, patch,
                                             optimize=True)
                gxp[:, :, di:di + h, dj:dj + w] += np.einsum(
                    "nohw,oc->nchw", g, kernels.data[:, :, di, dj],
                    optimize=True)
        x._accumulate(gxp[:, :, 1:-1, 1:-1])
        kernels._accumulate(gk)
        if bias is not None:
            bias._accumulate(g.sum(axis=(0, 2, 3)))
    parents = (x, kernels) + ((bias,) if bias is not None else ())
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)
    return Tensor(out, parents=parents, backward=bwd)


def gru_cell(x: Tensor, h: Tensor, params: dict) -> Tensor:
    """Standard GRU cell from the primitive ops.

    ``params`` holds Wz/Uz/bz (update), Wr/Ur/br (reset), Wn/Un/bn
    (candidate), each a Tensor.
    """
    z = sigmoid(dense(x, params["Wz"]) + dense(h, params["Uz"]) +
                params["bz"])
    r = sigmoid(dense(x, params["Wr"]) + dense(h, params["Ur"]) +
                params["br"])
    n = tanh(dense(x, params["Wn"]) + dense(r * h, params["Un"]) +
             params["bn"])
    return (1.0 - z) * n + z * h


def gru_param_shapes(in_dim: int, hidden: int) -> dict:
    shapes = {}
    for gate in "zrn":
        shapes[f"W{gate}"] = (in_dim, hidden)
        shapes[f"U{gate}"] = (hidden, hidden)
        shapes[f"b{gate}"] = (hidden,)
    return shapes


# ---------------------------------------------------------------------------
# Heads


def log_softmax(logits: Tensor, axis: int = -1) -> Tensor:
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def bwd(g):
        soft = np.exp(out)
        logits._accumulate(g - soft * g.sum(axis=axis, keepdims=True))
    return Tensor(out, parents=(logits,), backward=bwd)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Plain-numpy softmax for sampling paths (no gradient)."""
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_logits_nll(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer targets under the logits."""
    targets = np.asarray(targets, dtype=np.int64)
    ls = log_softmax(logits)
    picked = ls[np.arange(len(targets)), targets]
    return -picked.mean()
