"""Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a contiguous numpy array plus an optional gradient buffer.
Operations record a closed-over backward function on the result; calling
`backward()` on a scalar walks the tape in reverse topological order and
accumulates gradients into every node that requires them (intermediate
activations included, which the class-activation-map code relies on).

Only float32 and float64 are supported.  All layers check their input
shapes up front and raise DimensionError rather than letting numpy
broadcast silently.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, NumericError, ParameterError

SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in SUPPORTED_DTYPES:
        arr = arr.astype(np.float32)
    return np.ascontiguousarray(arr) if arr.ndim else arr


class Tensor:
    """N-dimensional float array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self):
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar tensor")
        if not np.isfinite(self.data).all():
            raise NumericError("backward() called on a non-finite value")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        _accum(self, np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # Small operator sugar used throughout the model code.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A named, trainable tensor.  The gradient buffer is always allocated
    and has the same shape as the value; the name fixes the parameter's
    position in the weight manifest."""

    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _accum(node: Tensor, g: np.ndarray):
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = g.copy()
    else:
        node.grad += g


def _op(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_same_dtype(*tensors: Tensor):
    first = tensors[0].data.dtype
    for t in tensors[1:]:
        if t.data.dtype != first:
            raise DimensionError(
                f"mixed dtypes in one operation: {first.name} vs {t.data.dtype.name}")


def _require_finite(arr: np.ndarray, what: str):
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {what}")


# ---------------------------------------------------------------------------
# elementwise / linear algebra primitives

def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b.  Shapes must match exactly, or b must align with a's trailing
    axes (the bias case); the backward pass then sums over the leading axes."""
    _check_same_dtype(a, b)
    if a.shape == b.shape:
        def back(g):
            _accum(a, g)
            _accum(b, g)
        return _op(a.data + b.data, (a, b), back)
    if b.data.ndim < a.data.ndim and a.shape[a.data.ndim - b.data.ndim:] == b.shape:
        n_lead = a.data.ndim - b.data.ndim

        def back(g):
            _accum(a, g)
            _accum(b, g.sum(axis=tuple(range(n_lead))))
        return _op(a.data + b.data, (a, b), back)
    raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes differ {a.shape} vs {b.shape}")

    def back(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)
    return _op(a.data * b.data, (a, b), back)


def scale(a: Tensor, s: float) -> Tensor:
    def back(g):
        _accum(a, g * s)
    return _op(a.data * s, (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D (or 1-D times 2-D) matrix product."""
    _check_same_dtype(a, b)
    if a.data.ndim not in (1, 2) or b.data.ndim != 2:
        raise DimensionError("matmul expects 1-D/2-D left and 2-D right operands")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dims differ {a.shape} vs {b.shape}")

    def back(g):
        if a.data.ndim == 1:
            _accum(a, g @ b.data.T)
            _accum(b, np.outer(a.data, g))
        else:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
    return _op(a.data @ b.data, (a, b), back)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError("transpose expects a 2-D tensor")

    def back(g):
        _accum(a, g.T)
    return _op(np.ascontiguousarray(a.data.T), (a,), back)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def back(g):
        _accum(a, g.reshape(a.shape))
    return _op(a.data.reshape(shape), (a,), back)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis; backward scatters into a zero tensor."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def back(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accum(a, full)
    return _op(np.ascontiguousarray(a.data[idx]), (a,), back)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    _check_same_dtype(*tensors)
    sizes = [t.shape[axis] for t in tensors]
    offs = np.cumsum([0] + sizes)

    def back(g):
        for t, o, n in zip(tensors, offs[:-1], sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(o, o + n)
            _accum(t, g[tuple(idx)])
    return _op(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        n = a.data.size

        def back(g):
            _accum(a, np.full_like(a.data, np.asarray(g).item() / n))
        return _op(np.asarray(a.data.mean(), dtype=a.dtype), (a,), back)
    n = a.shape[axis]

    def back(g):
        _accum(a, np.repeat(np.expand_dims(g / n, axis), n, axis=axis))
    return _op(a.data.mean(axis=axis), (a,), back)


def tsum(a: Tensor) -> Tensor:
    def back(g):
        _accum(a, np.full_like(a.data, np.asarray(g).item()))
    return _op(np.asarray(a.data.sum(), dtype=a.dtype), (a,), back)


def relu(a: Tensor) -> Tensor:
    """max(0, x); the subgradient at exactly zero is taken as 0."""
    mask = a.data > 0

    def back(g):
        _accum(a, g * mask)
    return _op(np.where(mask, a.data, 0.0), (a,), back)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def back(g):
        _accum(a, g * (1.0 - out * out))
    return _op(out, (a,), back)


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))

    def back(g):
        _accum(a, g * out * (1.0 - out))
    return _op(out, (a,), back)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max is subtracted first)."""
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _accum(a, out * (g - dot))
    return _op(out, (a,), back)


def dropout(a: Tensor, p: float, mode: str, rng: np.random.Generator | int) -> Tensor:
    """Inverted dropout: in train mode each element is zeroed with
    probability p and survivors are scaled by 1/(1-p); eval mode is the
    identity.  The mask comes from the supplied generator (or seed)."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if mode not in ("train", "eval"):
        raise ParameterError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or p == 0.0:
        def back(g):
            _accum(a, g)
        return _op(a.data.copy(), (a,), back)
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    keep = (rng.random(a.shape) >= p)
    factor = np.asarray(1.0 / (1.0 - p), dtype=a.dtype)
    mask = keep.astype(a.dtype) * factor

    def back(g):
        _accum(a, g * mask)
    return _op(a.data * mask, (a,), back)


# ---------------------------------------------------------------------------
# layers

def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """out = W @ x + b for a vector x, or x @ W.T + b row-wise for a batch."""
    _check_same_dtype(x, weights, bias)
    m, n = weights.shape
    if x.shape[-1] != n:
        raise DimensionError(f"dense: input size {x.shape[-1]} != weight columns {n}")
    if bias.shape != (m,):
        raise DimensionError(f"dense: bias shape {bias.shape} != ({m},)")

    def back(g):
        if x.data.ndim == 1:
            _accum(weights, np.outer(g, x.data))
            _accum(x, weights.data.T @ g)
            _accum(bias, g)
        else:
            _accum(weights, g.T @ x.data)
            _accum(x, g @ weights.data)
            _accum(bias, g.sum(axis=0))
    out = x.data @ weights.data.T + bias.data
    return _op(out, (x, weights, bias), back)


def _conv_geometry(h, w, kh, kw, sh, sw, ph, pw):
    if sh < 1 or sw < 1:
        raise ParameterError("conv/pool strides must be >= 1")
    if kh > h + 2 * ph or kw > w + 2 * pw:
        raise DimensionError(
            f"kernel ({kh},{kw}) larger than padded input ({h + 2 * ph},{w + 2 * pw})")
    return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1


def conv2d(x: Tensor, weights: Tensor, bias: Tensor,
           stride: tuple[int, int] = (1, 1),
           padding: tuple[int, int] = (0, 0)) -> Tensor:
    """2-D cross-correlation (no kernel flip) over [C,H,W] or [N,C,H,W] input.

    Output spatial size is floor((H + 2p - k) / s) + 1 per axis.  Backward
    fills gradients for the input, the weights and the bias.
    """
    _check_same_dtype(x, weights, bias)
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4:
        raise DimensionError(f"conv2d input must be [C,H,W] or [N,C,H,W], got {x.shape}")
    if weights.data.ndim != 4:
        raise DimensionError(f"conv2d weights must be [F,C,kH,kW], got {weights.shape}")
    n, c, h, w = xd.shape
    f, cw, kh, kw = weights.shape
    if cw != c:
        raise DimensionError(f"conv2d: input channels {c} != weight channels {cw}")
    if bias.shape != (f,):
        raise DimensionError(f"conv2d: bias shape {bias.shape} != ({f},)")
    sh, sw = stride
    ph, pw = padding
    ho, wo = _conv_geometry(h, w, kh, kw, sh, sw, ph, pw)
    _require_finite(xd, "conv2d input")

    if ph or pw:
        xp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=xd.dtype)
        xp[:, :, ph:ph + h, pw:pw + w] = xd
    else:
        xp = xd
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]                        # [N,C,Ho,Wo,kh,kw]
    patches = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    wmat = weights.data.reshape(f, c * kh * kw)
    out = patches @ wmat.T + bias.data
    out = out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2)

    def back(g):
        if single:
            g = g[None]
        gm = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        _accum(weights, (gm.T @ patches).reshape(weights.shape))
        _accum(bias, gm.sum(axis=0))
        if x.requires_grad:
            gp = (gm @ wmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros_like(xp)
            # scatter each kernel offset back with a strided slice add
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += gp[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, ph:ph + h, pw:pw + w] if (ph or pw) else gxp
            _accum(x, gx[0] if single else gx)

    return _op(out[0] if single else out, (x, weights, bias), back)


def maxpool2d(x: Tensor, kernel: tuple[int, int],
              stride: tuple[int, int] | None = None) -> tuple[Tensor, np.ndarray]:
    """Max pooling over [C,H,W] or [N,C,H,W].  Returns (output, argmax)
    where argmax holds flat input indices; ties go to the lowest linear
    index, which is where the backward pass routes the whole gradient."""
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4:
        raise DimensionError(f"maxpool2d input must be [C,H,W] or [N,C,H,W], got {x.shape}")
    kh, kw = kernel
    sh, sw = stride if stride is not None else kernel
    n, c, h, w = xd.shape
    if kh > h or kw > w:
        raise DimensionError(f"pool kernel ({kh},{kw}) larger than input ({h},{w})")
    ho, wo = _conv_geometry(h, w, kh, kw, sh, sw, 0, 0)

    win = np.lib.stride_tricks.sliding_window_view(xd, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw].reshape(n, c, ho, wo, kh * kw)
    arg = win.argmax(axis=-1)                           # first max wins ties
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    di, dj = np.divmod(arg, kw)
    iy = np.arange(ho)[None, None, :, None] * sh + di
    ix = np.arange(wo)[None, None, None, :] * sw + dj
    base = (np.arange(n)[:, None, None, None] * c + np.arange(c)[None, :, None, None]) * (h * w)
    flat = base + iy * w + ix

    def back(g):
        if single:
            g = g[None]
        gx = np.zeros(n * c * h * w, dtype=xd.dtype)
        np.add.at(gx, flat.reshape(-1), g.reshape(-1))
        gx = gx.reshape(n, c, h, w)
        _accum(x, gx[0] if single else gx)

    out_t = _op(out[0] if single else out, (x,), back)
    return out_t, (flat[0] if single else flat)


def spatial_mean(x: Tensor) -> Tensor:
    """Global average pool: [N,C,H,W] -> [N,C] (or [C,H,W] -> [C])."""
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    n, c, h, w = xd.shape
    out = xd.mean(axis=(2, 3))

    def back(g):
        if single:
            g = g[None]
        gx = np.broadcast_to((g / (h * w))[:, :, None, None], xd.shape).astype(xd.dtype)
        _accum(x, gx[0] if single else gx.copy())
    return _op(out[0] if single else out, (x,), back)


# ---------------------------------------------------------------------------
# recurrent cells

def lstm_cell(x_t: Tensor, h_prev: Tensor, c_prev: Tensor,
              weights: Tensor, bias: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step.

    `weights` is [D+H, 4H] applied to concat(x, h_prev); gate order along
    the last axis is (input, forget, output, candidate):
        i, f, o = sigmoid(z[:3H]),  g = tanh(z[3H:])
        c_t = f * c_prev + i * g,   h_t = o * tanh(c_t)
    """
    hdim = h_prev.shape[-1]
    if weights.shape != (x_t.shape[-1] + hdim, 4 * hdim):
        raise DimensionError(
            f"lstm weights {weights.shape} do not match input {x_t.shape} + hidden {h_prev.shape}")
    xh = concat([x_t, h_prev], axis=-1)
    z = add(matmul(xh, weights), bias)
    i = sigmoid(narrow(z, z.data.ndim - 1, 0, hdim))
    f = sigmoid(narrow(z, z.data.ndim - 1, hdim, hdim))
    o = sigmoid(narrow(z, z.data.ndim - 1, 2 * hdim, hdim))
    g = tanh(narrow(z, z.data.ndim - 1, 3 * hdim, hdim))
    c_t = add(mul(f, c_prev), mul(i, g))
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


def rnn_cell(x_t: Tensor, h_prev: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Vanilla (Elman) recurrent step: h_t = tanh(W @ [x, h] + b)."""
    xh = concat([x_t, h_prev], axis=-1)
    return tanh(add(matmul(xh, weights), bias))


# ---------------------------------------------------------------------------
# loss

LOG_EPS = 1e-12


def weighted_cross_entropy(probs: Tensor, label: int, weights: np.ndarray) -> Tensor:
    """Class-weighted negative log likelihood on an already-normalized
    distribution: loss = -w[label] * ln(p[label] + 1e-12).

    Composed with `softmax`, the gradient reaching the logits is
    w[label] * (p - onehot(label)).
    """
    k = probs.shape[-1]
    if probs.data.ndim != 1:
        raise DimensionError("weighted_cross_entropy expects a 1-D probability vector")
    if not 0 <= label < k:
        raise IndexError(f"label {label} out of range for {k} classes")
    weights = np.asarray(weights, dtype=probs.dtype)
    if weights.shape != (k,):
        raise DimensionError(f"class weight vector must have shape ({k},)")
    w = float(weights[label])
    p = float(probs.data[label])
    loss = -w * np.log(p + LOG_EPS)

    def back(g):
        gp = np.zeros_like(probs.data)
        gp[label] = -w / (p + LOG_EPS) * np.asarray(g).item()
        _accum(probs, gp)
    return _op(np.asarray(loss, dtype=probs.dtype), (probs,), back)
