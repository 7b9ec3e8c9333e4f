"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy array plus an optional gradient buffer. Every
differentiable operation records its inputs and a backward closure on the
output tensor; ``Tensor.backward()`` topologically sorts the recorded graph
and replays it in reverse, accumulating gradients additively so that reused
tensors (e.g. shared embedding tables) receive the sum of all contributions.

Only float32 and float64 are supported. There is no broadcasting except for
multiplication by a python scalar (``scale``) and the explicit row-bias add
(``add_bias``); shape mismatches raise ``DimensionError`` immediately.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    ContractError,
    DimensionError,
    LabelError,
    ParameterError,
    TokenIndexError,
)

_grad_enabled = True

# Optional NaN/Inf guard on every op output. Off by default (costs a pass
# over each result); the training loop checks the loss explicitly.
CHECK_FINITE = False


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation / inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar root; fills ``grad`` on leaves."""
        if self.data.size != 1:
            raise ContractError(
                f"backward root must be scalar, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if g.shape != t.data.shape:
        raise ContractError(
            f"gradient shape {g.shape} does not match tensor shape {t.data.shape}"
        )
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad = t.grad + g


def _make(out_data: np.ndarray, parents: Sequence[Tensor],
          backward: Callable[[np.ndarray], None]) -> Tensor:
    if CHECK_FINITE and not np.all(np.isfinite(out_data)):
        raise ContractError("non-finite value produced by a forward op")
    out = Tensor(out_data, dtype=out_data.dtype)
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward
    return out


def _check_same_dtype(*ts: Tensor) -> None:
    dt = ts[0].data.dtype
    for t in ts[1:]:
        if t.data.dtype != dt:
            raise ContractError(f"dtype mismatch: {dt} vs {t.data.dtype}")


# ---------------------------------------------------------------------------
# core ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul shapes incompatible: {a.data.shape} x {b.data.shape}"
        )
    out_data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add shapes differ: {a.data.shape} vs {b.data.shape}")
    out_data = a.data + b.data

    def backward(g: np.ndarray) -> None:
        _accum(a, g)
        _accum(b, g)

    return _make(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul shapes differ: {a.data.shape} vs {b.data.shape}")
    out_data = a.data * b.data

    def backward(g: np.ndarray) -> None:
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make(out_data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out_data = a.data * a.data.dtype.type(c)

    def backward(g: np.ndarray) -> None:
        _accum(a, g * a.data.dtype.type(c))

    return _make(out_data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def backward(g: np.ndarray) -> None:
        _accum(a, g * (a.data > 0))

    return _make(out_data, (a,), backward)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a rank-1 bias to the last axis of ``x`` (explicit row broadcast)."""
    _check_same_dtype(x, b)
    if b.data.ndim != 1 or x.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(
            f"add_bias: bias shape {b.data.shape} vs input {x.data.shape}"
        )
    out_data = x.data + b.data

    def backward(g: np.ndarray) -> None:
        _accum(x, g)
        axes = tuple(range(g.ndim - 1))
        _accum(b, g.sum(axis=axes) if axes else g)

    return _make(out_data, (x, b), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax along the last axis, with max-subtraction for stability."""
    if x.data.shape[-1] < 1:
        raise DimensionError("softmax needs a non-empty last axis")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        _accum(x, (g - dot) * out_data)

    return _make(out_data, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    _check_same_dtype(x, gamma, beta)
    d = x.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise DimensionError(
            f"layer_norm: gamma/beta must be shape ({d},), got "
            f"{gamma.data.shape}/{beta.data.shape}"
        )
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv_std
    out_data = gamma.data * xhat + beta.data

    def backward(g: np.ndarray) -> None:
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accum(x, (dxhat - m1 - xhat * m2) * inv_std)
        lead = tuple(range(g.ndim - 1))
        _accum(gamma, (g * xhat).sum(axis=lead) if lead else g * xhat)
        _accum(beta, g.sum(axis=lead) if lead else g)

    return _make(out_data, (x, gamma, beta), backward)


def dropout(x: Tensor, p: float, training: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with prob ``p`` and rescale survivors by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        def backward_id(g: np.ndarray) -> None:
            _accum(x, g)
        return _make(x.data.copy(), (x,), backward_id)
    if rng is None:
        raise ParameterError("dropout in training mode requires an rng")
    keep = (rng.random(x.data.shape) >= p)
    factor = x.data.dtype.type(1.0 / (1.0 - p))
    mask = keep.astype(x.data.dtype) * factor
    out_data = x.data * mask

    def backward(g: np.ndarray) -> None:
        _accum(x, g * mask)

    return _make(out_data, (x,), backward)


def conv2d(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D convolution (cross-correlation), zero padding.

    ``x`` is C_in x H x W or batched B x C_in x H x W; ``w`` is
    C_out x C_in x k x k. Output spatial extent is
    floor((H + 2 pad - k) / stride) + 1.
    """
    _check_same_dtype(x, w)
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or w.data.ndim != 4:
        raise DimensionError(
            f"conv2d: input rank {x.data.ndim}, kernel rank {w.data.ndim}"
        )
    if stride < 1:
        raise ParameterError(f"conv2d stride must be >= 1, got {stride}")
    bsz, cin, h, wdt = xd.shape
    cout, cin_w, k, k2 = w.data.shape
    if cin != cin_w or k != k2:
        raise DimensionError(
            f"conv2d: kernel {w.data.shape} incompatible with input {x.data.shape}"
        )
    h_out = (h + 2 * pad - k) // stride + 1
    w_out = (wdt + 2 * pad - k) // stride + 1
    if h_out <= 0 or w_out <= 0:
        raise DimensionError(
            f"conv2d: non-positive output extent for input {x.data.shape}, "
            f"kernel {k}, stride {stride}, pad {pad}"
        )
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xd
    # im2col: (B, C, H', W', k, k) view, then one matmul for the whole batch
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(bsz * h_out * w_out, cin * k * k)
    w_mat = w.data.reshape(cout, cin * k * k)
    out_mat = cols @ w_mat.T
    out_data = out_mat.reshape(bsz, h_out, w_out, cout).transpose(0, 3, 1, 2)
    if squeeze:
        out_data = out_data[0]
    out_data = np.ascontiguousarray(out_data)

    def backward(g: np.ndarray) -> None:
        gd = g[None] if squeeze else g
        g_mat = gd.transpose(0, 2, 3, 1).reshape(bsz * h_out * w_out, cout)
        _accum(w, (g_mat.T @ cols).reshape(w.data.shape))
        dcols = (g_mat @ w_mat).reshape(bsz, h_out, w_out, cin, k, k)
        dxp = np.zeros((bsz, cin, h + 2 * pad, wdt + 2 * pad), dtype=xd.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + stride * h_out:stride,
                    j:j + stride * w_out:stride] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        dx = dxp[:, :, pad:pad + h, pad:pad + wdt] if pad else dxp
        _accum(x, dx[0] if squeeze else dx)

    return _make(out_data, (x, w), backward)


def channel_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over the spatial axes of a feature map.

    ``x`` is C x H x W or B x C x H x W; gamma/beta are rank-1 of length C.
    Deterministic replacement for batch norm inside residual blocks.
    """
    _check_same_dtype(x, gamma, beta)
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    c = xd.shape[1]
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise DimensionError(
            f"channel_norm: gamma/beta must be shape ({c},)"
        )
    mean = xd.mean(axis=(2, 3), keepdims=True)
    var = xd.var(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mean) * inv_std
    gm = gamma.data[None, :, None, None]
    out_data = gm * xhat + beta.data[None, :, None, None]
    if squeeze:
        out_data = out_data[0]

    def backward(g: np.ndarray) -> None:
        gd = g[None] if squeeze else g
        dxhat = gd * gm
        m1 = dxhat.mean(axis=(2, 3), keepdims=True)
        m2 = (dxhat * xhat).mean(axis=(2, 3), keepdims=True)
        dx = (dxhat - m1 - xhat * m2) * inv_std
        _accum(x, dx[0] if squeeze else dx)
        _accum(gamma, (gd * xhat).sum(axis=(0, 2, 3)))
        _accum(beta, gd.sum(axis=(0, 2, 3)))

    return _make(out_data, (x, gamma, beta), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """C x H x W -> length-C vector (batched: B x C x H x W -> B x C)."""
    if x.data.ndim not in (3, 4):
        raise DimensionError(f"global_avg_pool expects rank 3 or 4, got {x.data.ndim}")
    out_data = x.data.mean(axis=(-2, -1))
    h, wdt = x.data.shape[-2:]

    def backward(g: np.ndarray) -> None:
        expanded = np.repeat(np.repeat(g[..., None, None], h, axis=-2), wdt, axis=-1)
        _accum(x, expanded / (h * wdt))

    return _make(out_data, (x,), backward)


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of ``table``; backward scatter-adds (repeated ids accumulate)."""
    ids = list(ids)
    v = table.data.shape[0]
    for i in ids:
        if not 0 <= i < v:
            raise TokenIndexError(f"token id {i} out of range [0, {v})")
    idx = np.asarray(ids, dtype=np.int64)
    out_data = table.data[idx].copy()

    def backward(g: np.ndarray) -> None:
        dt = np.zeros_like(table.data)
        np.add.at(dt, idx, g)
        _accum(table, dt)

    return _make(out_data, (table,), backward)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two rank-1 tensors; backward splits the gradient."""
    _check_same_dtype(a, b)
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise DimensionError(
            f"concat expects rank-1 inputs, got {a.data.shape} and {b.data.shape}"
        )
    m = a.data.shape[0]
    out_data = np.concatenate([a.data, b.data])

    def backward(g: np.ndarray) -> None:
        _accum(a, g[:m])
        _accum(b, g[m:])

    return _make(out_data, (a, b), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two 2-D tensors along the feature (last) axis."""
    _check_same_dtype(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise DimensionError(
            f"concat_cols: incompatible shapes {a.data.shape} and {b.data.shape}"
        )
    m = a.data.shape[1]
    out_data = np.concatenate([a.data, b.data], axis=1)

    def backward(g: np.ndarray) -> None:
        _accum(a, g[:, :m])
        _accum(b, g[:, m:])

    return _make(out_data, (a, b), backward)


def stack_rows(ts: Sequence[Tensor]) -> Tensor:
    """Stack rank-1 tensors into a 2-D tensor, one per row."""
    ts = list(ts)
    if not ts or any(t.data.ndim != 1 for t in ts):
        raise DimensionError("stack_rows expects a non-empty list of rank-1 tensors")
    _check_same_dtype(*ts)
    out_data = np.stack([t.data for t in ts])

    def backward(g: np.ndarray) -> None:
        for i, t in enumerate(ts):
            _accum(t, g[i])

    return _make(out_data, tuple(ts), backward)


def take_row(x: Tensor, i: int) -> Tensor:
    """Extract row ``i`` of a 2-D tensor as a rank-1 tensor."""
    if x.data.ndim != 2:
        raise DimensionError(f"take_row expects rank-2, got {x.data.shape}")
    out_data = x.data[i].copy()

    def backward(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data)
        dx[i] = g
        _accum(x, dx)

    return _make(out_data, (x,), backward)


def slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    """Column slice [lo, hi) of a 2-D tensor."""
    if x.data.ndim != 2:
        raise DimensionError(f"slice_cols expects rank-2, got {x.data.shape}")
    out_data = x.data[:, lo:hi].copy()

    def backward(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data)
        dx[:, lo:hi] = g
        _accum(x, dx)

    return _make(out_data, (x,), backward)


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"transpose expects rank-2, got {x.data.shape}")
    out_data = x.data.T.copy()

    def backward(g: np.ndarray) -> None:
        _accum(x, g.T)

    return _make(out_data, (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = x.data.reshape(shape).copy()

    def backward(g: np.ndarray) -> None:
        _accum(x, g.reshape(x.data.shape))

    return _make(out_data, (x,), backward)


def add_const(x: Tensor, c: np.ndarray) -> Tensor:
    """Add a constant (non-differentiable) array of identical shape."""
    if c.shape != x.data.shape:
        raise DimensionError(f"add_const shapes differ: {x.data.shape} vs {c.shape}")
    out_data = x.data + c.astype(x.data.dtype)

    def backward(g: np.ndarray) -> None:
        _accum(x, g)

    return _make(out_data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out_data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def backward(g: np.ndarray) -> None:
        _accum(x, np.full_like(x.data, g))

    return _make(out_data, (x,), backward)


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(logits).

    ``logits`` is B x 2; computed through log-sum-exp so saturated logits
    stay finite. Backward is (softmax - one_hot) / B.
    """
    labels = list(labels)
    if logits.data.ndim != 2:
        raise DimensionError(f"cross_entropy expects B x C logits, got {logits.data.shape}")
    bsz, ncls = logits.data.shape
    if len(labels) != bsz:
        raise ContractError(f"{bsz} logit rows but {len(labels)} labels")
    for y in labels:
        if y not in (0, 1) or ncls <= y:
            raise LabelError(f"label {y} outside {{0, 1}}")
    idx = np.asarray(labels, dtype=np.int64)
    m = logits.data.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits.data - m).sum(axis=1))
    picked = logits.data[np.arange(bsz), idx]
    out_data = np.asarray((lse - picked).mean(), dtype=logits.data.dtype)

    def backward(g: np.ndarray) -> None:
        p = np.exp(logits.data - m)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(bsz), idx] -= 1.0
        _accum(logits, p * (g / bsz))

    return _make(out_data, (logits,), backward)


# ---------------------------------------------------------------------------
# finite-difference oracle


def grad_check(f: Callable[[], Tensor], params: Iterable[Tensor],
               eps: float = 1e-5,
               fd_f: Callable[[], Tensor] | None = None,
               fd_params: Iterable[Tensor] | None = None,
               floor: float = 1e-8) -> float:
    """Compare autodiff gradients of scalar ``f`` against central differences.

    ``f`` must rebuild its graph on every call from the tensors in ``params``.
    Optionally a higher-precision twin (``fd_f`` over ``fd_params``, same
    mathematical function, typically float64) supplies the finite-difference
    side. Returns the max relative error with denominator
    max(|analytic|, |numeric|, floor); raise ``floor`` when checking float32
    graphs, where near-zero gradients carry ~1e-10 rounding residue.
    """
    if eps <= 0:
        raise ParameterError(f"grad_check eps must be > 0, got {eps}")
    params = list(params)
    out = f()
    if out.data.size != 1:
        raise ContractError("grad_check target must be scalar-valued")
    for p in params:
        p.zero_grad()
    out = f()
    out.backward()
    analytic = [None if p.grad is None else p.grad.copy() for p in params]

    probe_f = fd_f if fd_f is not None else f
    probe_params = list(fd_params) if fd_params is not None else params

    worst = 0.0
    for p, pp, a in zip(params, probe_params, analytic):
        if a is None:
            continue
        flat = pp.data.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(probe_f().data)
            flat[i] = orig - eps
            f_minus = float(probe_f().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(float(a_flat[i])), abs(numeric), floor)
            err = abs(float(a_flat[i]) - numeric) / denom
            worst = max(worst, err)
    return worst
