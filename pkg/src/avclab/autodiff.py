"""Dense-tensor engine with reverse-mode differentiation.

Forward ops append records to a module-level tape (:class:`Graph`);
:func:`backward` replays the tape in reverse, accumulating gradients into
every ``requires_grad`` leaf. Arrays are numpy, float32 by default with
float64 selectable for finite-difference work. Stride is fixed at 1 for
convolutions; downsampling happens only through :func:`max_pool2`.
"""

from __future__ import annotations

import contextlib
from functools import lru_cache

import numpy as np

from .errors import ContractError, DimensionError

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """N-dimensional real array, optionally tracked for differentiation."""

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if dtype is not None:
            arr = np.asarray(data, dtype=dtype)
        elif isinstance(data, np.ndarray) and data.dtype in _FLOAT_DTYPES:
            arr = data
        else:
            arr = np.asarray(data, dtype=np.float32)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self.is_leaf = True

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError("item() requires a scalar tensor")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"


class OpRecord:
    """One tape entry: op kind, inputs, output, and a pullback closure."""

    __slots__ = ("kind", "inputs", "output", "backward_fn")

    def __init__(self, kind, inputs, output, backward_fn):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Graph:
    """Ordered operation tape; append order is topological by construction."""

    def __init__(self):
        self.records: list[OpRecord] = []
        self.recording = True

    def clear(self):
        self.records.clear()


_GRAPH = Graph()


def active_graph() -> Graph:
    return _GRAPH


@contextlib.contextmanager
def no_grad():
    """Disable tape recording (evaluation mode); restores on exit."""
    prev = _GRAPH.recording
    _GRAPH.recording = False
    try:
        yield
    finally:
        _GRAPH.recording = prev


def _make_output(kind, inputs, data, backward_fn):
    out = Tensor(data)
    if _GRAPH.recording and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        _GRAPH.records.append(OpRecord(kind, inputs, out, backward_fn))
    return out


def backward(loss: Tensor, graph: Graph | None = None):
    """Populate dLoss/dLeaf on every requires_grad leaf reachable from loss.

    Consumes (and clears) the tape. Gradients accumulate: repeated backward
    calls between optimizer steps sum their contributions, as do multiple
    uses of one tensor inside a single graph.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    g = graph if graph is not None else _GRAPH
    records = g.records
    g.records = []

    seed = np.ones_like(loss.data)
    loss.grad = seed if loss.grad is None else loss.grad + seed

    for rec in reversed(records):
        out_grad = rec.output.grad
        if out_grad is None:
            continue
        grads = rec.backward_fn(out_grad)
        for tensor, grad in zip(rec.inputs, grads):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor.grad is None:
                tensor.grad = grad
            else:
                tensor.grad = tensor.grad + grad
        if not rec.output.is_leaf:
            rec.output.grad = None


def _check_same_dtype(kind, *tensors):
    dtypes = {t.dtype for t in tensors}
    if len(dtypes) > 1:
        raise DimensionError(f"{kind}: mixed dtypes {sorted(d.name for d in dtypes)}")


# ---------------------------------------------------------------------------
# convolution

def _im2col(xp: np.ndarray, k: int, dilation: int, h_out: int, w_out: int) -> np.ndarray:
    c = xp.shape[0]
    cols = np.empty((c, k, k, h_out, w_out), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i * dilation: i * dilation + h_out, j * dilation: j * dilation + w_out]
    return cols.reshape(c * k * k, h_out * w_out)


def _col2im(dcols: np.ndarray, c: int, k: int, dilation: int, hp: int, wp: int,
            h_out: int, w_out: int) -> np.ndarray:
    dxp = np.zeros((c, hp, wp), dtype=dcols.dtype)
    dc = dcols.reshape(c, k, k, h_out, w_out)
    for i in range(k):
        for j in range(k):
            dxp[:, i * dilation: i * dilation + h_out, j * dilation: j * dilation + w_out] += dc[:, i, j]
    return dxp


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1,
           dilation: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution, stride 1, square kernel, optional dilation.

    x: (C_in, H, W); weight: (C_out, C_in, k, k); bias: (C_out,).
    Output spatial size is H + 2*padding - dilation*(k-1) per side.
    """
    if stride != 1:
        raise ContractError("conv2d supports stride 1 only")
    if x.data.ndim != 3:
        raise DimensionError(f"conv2d input must be (C,H,W), got {x.data.shape}")
    if weight.data.ndim != 4 or weight.data.shape[2] != weight.data.shape[3]:
        raise DimensionError(f"conv2d weight must be (O,C,k,k), got {weight.data.shape}")
    o, c_w, k, _ = weight.data.shape
    c, h, w = x.data.shape
    if c_w != c:
        raise DimensionError(f"conv2d: weight expects {c_w} input channels, input has {c}")
    if bias.data.shape != (o,):
        raise DimensionError(f"conv2d: bias shape {bias.data.shape} != ({o},)")
    if k < 1 or dilation < 1 or padding < 0:
        raise ContractError("conv2d: k >= 1, dilation >= 1, padding >= 0 required")
    _check_same_dtype("conv2d", x, weight, bias)

    h_out = h + 2 * padding - dilation * (k - 1)
    w_out = w + 2 * padding - dilation * (k - 1)
    if h_out < 1 or w_out < 1:
        raise DimensionError(f"conv2d: kernel span exceeds padded input ({h_out}x{w_out})")

    if padding:
        xp = np.zeros((c, h + 2 * padding, w + 2 * padding), dtype=x.data.dtype)
        xp[:, padding: padding + h, padding: padding + w] = x.data
    else:
        xp = x.data
    cols = _im2col(xp, k, dilation, h_out, w_out)
    w2d = weight.data.reshape(o, c * k * k)
    out = w2d @ cols
    out += bias.data[:, None]
    out = out.reshape(o, h_out, w_out)

    hp, wp = h + 2 * padding, w + 2 * padding
    needs_x = x.requires_grad

    def backward_fn(grad):
        go = grad.reshape(o, -1)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = (go @ cols.T).reshape(weight.data.shape)
        if bias.requires_grad:
            gb = go.sum(axis=1)
        if needs_x:
            dcols = w2d.T @ go
            dxp = _col2im(dcols, c, k, dilation, hp, wp, h_out, w_out)
            gx = dxp[:, padding: padding + h, padding: padding + w] if padding else dxp
        return gx, gw, gb

    return _make_output("conv2d", (x, weight, bias), out, backward_fn)


# ---------------------------------------------------------------------------
# dense / pointwise ops

def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out = weight @ x + bias for a vector input."""
    if x.data.ndim != 1:
        raise DimensionError(f"fully_connected input must be 1-D, got {x.data.shape}")
    o, d = weight.data.shape
    if x.data.shape[0] != d:
        raise DimensionError(f"fully_connected: weight expects {d} features, input has {x.data.shape[0]}")
    if bias.data.shape != (o,):
        raise DimensionError(f"fully_connected: bias shape {bias.data.shape} != ({o},)")
    _check_same_dtype("fully_connected", x, weight, bias)
    out = weight.data @ x.data + bias.data

    def backward_fn(grad):
        gx = weight.data.T @ grad if x.requires_grad else None
        gw = np.outer(grad, x.data) if weight.requires_grad else None
        gb = grad if bias.requires_grad else None
        return gx, gw, gb

    return _make_output("fully_connected", (x, weight, bias), out, backward_fn)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def backward_fn(grad):
        return (grad * (out > 0),)

    return _make_output("relu", (x,), out, backward_fn)


def max_pool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; spatial dims must be even."""
    if x.data.ndim != 3:
        raise DimensionError(f"max_pool2 input must be (C,H,W), got {x.data.shape}")
    c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise DimensionError(f"max_pool2 needs even spatial dims, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    windows = x.data.reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
    idx = windows.argmax(axis=3)
    out = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]

    def backward_fn(grad):
        gwin = np.zeros((c, h2, w2, 4), dtype=grad.dtype)
        np.put_along_axis(gwin, idx[..., None], grad[..., None], axis=3)
        gx = gwin.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)
        return (gx,)

    return _make_output("max_pool2", (x,), out, backward_fn)


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel: (C,H,W) -> (C,)."""
    if x.data.ndim != 3:
        raise DimensionError(f"global_avg_pool input must be (C,H,W), got {x.data.shape}")
    c, h, w = x.data.shape
    out = x.data.mean(axis=(1, 2))

    def backward_fn(grad):
        gx = np.broadcast_to(grad[:, None, None] / (h * w), (c, h, w)).astype(grad.dtype)
        return (np.ascontiguousarray(gx),)

    return _make_output("global_avg_pool", (x,), out, backward_fn)


def elementwise_affine(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """Per-channel affine y[c] = x[c]*scale[c] + shift[c], tiled over H, W."""
    if x.data.ndim != 3:
        raise DimensionError(f"elementwise_affine input must be (C,H,W), got {x.data.shape}")
    c = x.data.shape[0]
    if scale.data.shape != (c,) or shift.data.shape != (c,):
        raise DimensionError(
            f"elementwise_affine: scale/shift must have shape ({c},), got {scale.data.shape}/{shift.data.shape}")
    _check_same_dtype("elementwise_affine", x, scale, shift)
    out = x.data * scale.data[:, None, None] + shift.data[:, None, None]

    def backward_fn(grad):
        gx = grad * scale.data[:, None, None] if x.requires_grad else None
        gs = (grad * x.data).sum(axis=(1, 2)) if scale.requires_grad else None
        gb = grad.sum(axis=(1, 2)) if shift.requires_grad else None
        return gx, gs, gb

    return _make_output("elementwise_affine", (x, scale, shift), out, backward_fn)


@lru_cache(maxsize=64)
def _interp_matrix(n_in: int, factor: int, dtype_name: str) -> np.ndarray:
    """Bilinear interpolation matrix (n_in*factor, n_in), align-corners false."""
    n_out = n_in * factor
    mat = np.zeros((n_out, n_in), dtype=np.dtype(dtype_name))
    for o in range(n_out):
        src = (o + 0.5) / factor - 0.5
        lo = int(np.floor(src))
        t = src - lo
        i0 = min(max(lo, 0), n_in - 1)
        i1 = min(max(lo + 1, 0), n_in - 1)
        mat[o, i0] += 1.0 - t
        mat[o, i1] += t
    return mat


def upsample_bilinear(x: Tensor, factor: int) -> Tensor:
    """Bilinear upsampling by an integer factor (align-corners false)."""
    if x.data.ndim != 3:
        raise DimensionError(f"upsample_bilinear input must be (C,H,W), got {x.data.shape}")
    if factor < 1:
        raise ContractError("upsample_bilinear: factor >= 1 required")
    c, h, w = x.data.shape
    ah = _interp_matrix(h, factor, x.data.dtype.name)
    aw = _interp_matrix(w, factor, x.data.dtype.name)
    out = np.matmul(ah, x.data @ aw.T)

    def backward_fn(grad):
        gx = np.matmul(ah.T, grad) @ aw
        return (gx,)

    return _make_output("upsample_bilinear", (x,), out, backward_fn)


def sse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Sum of squared differences over all elements (scalar output)."""
    if pred.data.shape != target.data.shape:
        raise DimensionError(f"sse_loss: shape mismatch {pred.data.shape} vs {target.data.shape}")
    _check_same_dtype("sse_loss", pred, target)
    diff = pred.data - target.data
    out = np.asarray((diff * diff).sum(), dtype=pred.data.dtype)

    def backward_fn(grad):
        g = grad.reshape(())
        gp = 2.0 * diff * g if pred.requires_grad else None
        gt = -2.0 * diff * g if target.requires_grad else None
        return gp, gt

    return _make_output("sse_loss", (pred, target), out, backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")
    _check_same_dtype("add", a, b)
    out = a.data + b.data

    def backward_fn(grad):
        return grad, grad

    return _make_output("add", (a, b), out, backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")
    _check_same_dtype("mul", a, b)
    out = a.data * b.data

    def backward_fn(grad):
        ga = grad * b.data if a.requires_grad else None
        gb = grad * a.data if b.requires_grad else None
        return ga, gb

    return _make_output("mul", (a, b), out, backward_fn)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def backward_fn(grad):
        return (np.full(x.data.shape, grad.reshape(()), dtype=x.data.dtype),)

    return _make_output("sum_all", (x,), out, backward_fn)


def scale(x: Tensor, factor: float) -> Tensor:
    out = x.data * x.data.dtype.type(factor)

    def backward_fn(grad):
        return (grad * x.data.dtype.type(factor),)

    return _make_output("scale", (x,), out, backward_fn)
