"""Differentiable primitives.

Every function takes Tensors, returns a Tensor, and installs an exact
analytic backward closure. Shape validation raises ConfigError naming the
op and the offending dimensions. The finite-difference suite in
``gradcheck`` verifies every op here.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor

LAYER_NORM_VAR_FLOOR = 1e-12


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype), requires_grad=False)


def const(value, dtype=None) -> Tensor:
    return Tensor(np.asarray(value, dtype=dtype), requires_grad=False)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to the given shape (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic (broadcasting)
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._from_op(a.data + b.data, (a, b))
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accum_grad(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(out.grad, b.shape))

        out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._from_op(a.data - b.data, (a, b))
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accum_grad(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(-out.grad, b.shape))

        out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (broadcasting) product."""
    out = Tensor._from_op(a.data * b.data, (a, b))
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accum_grad(_unbroadcast(out.grad * b.data, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(out.grad * a.data, b.shape))

        out._backward = backward
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._from_op(a.data / b.data, (a, b))
    if out.requires_grad:

        def backward():
            if a.requires_grad:
                a._accum_grad(_unbroadcast(out.grad / b.data, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(-out.grad * a.data / (b.data * b.data), b.shape))

        out._backward = backward
    return out


def neg(x: Tensor) -> Tensor:
    out = Tensor._from_op(-x.data, (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(-out.grad)

        out._backward = backward
    return out


def pow_const(x: Tensor, p) -> Tensor:
    if not isinstance(p, (int, float)):
        raise ConfigError("pow_const exponent must be a python number")
    out = Tensor._from_op(x.data**p, (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad * p * x.data ** (p - 1))

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor._from_op(x.data.sum(axis=axis, keepdims=keepdims), (x,))
    if out.requires_grad:

        def backward():
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            x._accum_grad(np.broadcast_to(g, x.shape).astype(x.dtype, copy=False))

        out._backward = backward
    return out


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[i] for i in axes]))
    scaled = tsum(x, axis=axis, keepdims=keepdims)
    return mul(scaled, const(1.0 / count, dtype=x.dtype))


# ---------------------------------------------------------------------------
# transcendental / activations
# ---------------------------------------------------------------------------


def log(x: Tensor) -> Tensor:
    out = Tensor._from_op(np.log(x.data), (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad / x.data)

        out._backward = backward
    return out


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad * out_data)

        out._backward = backward
    return out


def sqrt(x: Tensor) -> Tensor:
    out_data = np.sqrt(x.data)
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad * 0.5 / out_data)

        out._backward = backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    out_data = _sigmoid(x.data)
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad * out_data * (1.0 - out_data))

        out._backward = backward
    return out


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad * (1.0 - out_data * out_data))

        out._backward = backward
    return out


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """max(0, x) + slope * min(0, x); slope broadcasts over x."""
    positive = x.data > 0
    out = Tensor._from_op(np.where(positive, x.data, slope.data * x.data), (x, slope))
    if out.requires_grad:

        def backward():
            if x.requires_grad:
                x._accum_grad(np.where(positive, out.grad, slope.data * out.grad))
            if slope.requires_grad:
                slope._accum_grad(_unbroadcast(np.where(positive, 0.0, x.data) * out.grad, slope.shape))

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def linear(weight: Tensor, x: Tensor) -> Tensor:
    """y = W x. W is (out, in); x is (in,) or (in, cols)."""
    if weight.ndim != 2 or x.shape[0] != weight.shape[1]:
        raise ConfigError(
            f"linear: weight {weight.shape} incompatible with input {x.shape}"
        )
    out = Tensor._from_op(weight.data @ x.data, (weight, x))
    if out.requires_grad:

        def backward():
            g = out.grad
            if weight.requires_grad:
                if x.ndim == 1:
                    weight._accum_grad(np.outer(g, x.data))
                else:
                    weight._accum_grad(g @ x.data.T)
            if x.requires_grad:
                x._accum_grad(weight.data.T @ g)

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# convolutions and pooling
# ---------------------------------------------------------------------------


def conv1d(x: Tensor, weight: Tensor, stride: int) -> Tensor:
    """1-D convolution. x is (C_in, T), weight is (C_out, C_in, K)."""
    if x.ndim != 2 or weight.ndim != 3:
        raise ConfigError(f"conv1d: expected (C,T) input and (O,C,K) weight, got {x.shape}, {weight.shape}")
    c_in, t_len = x.shape
    c_out, c_in_w, k_len = weight.shape
    if c_in != c_in_w:
        raise ConfigError(f"conv1d: input channels {c_in} != weight channels {c_in_w}")
    if t_len < k_len:
        raise ConfigError(f"conv1d: input length {t_len} shorter than kernel {k_len}")
    if stride < 1:
        raise ConfigError(f"conv1d: stride must be >= 1, got {stride}")
    cols = np.lib.stride_tricks.sliding_window_view(x.data, k_len, axis=1)[:, ::stride, :]
    frames = cols.shape[1]
    out_data = np.tensordot(weight.data, cols, axes=([1, 2], [0, 2]))
    out = Tensor._from_op(np.ascontiguousarray(out_data), (x, weight))
    if out.requires_grad:

        def backward():
            g = out.grad
            if weight.requires_grad:
                weight._accum_grad(np.tensordot(g, cols, axes=([1], [1])))
            if x.requires_grad:
                g_cols = np.einsum("ot,ock->ctk", g, weight.data)
                gx = np.zeros_like(x.data)
                last = (frames - 1) * stride
                for k in range(k_len):
                    gx[:, k : k + last + 1 : stride] += g_cols[:, :, k]
                x._accum_grad(gx)

        out._backward = backward
    return out


def conv2d(x: Tensor, weight: Tensor, padding: int = 1) -> Tensor:
    """2-D convolution, stride 1. x is (C_in, H, W), weight is (C_out, C_in, kh, kw)."""
    if x.ndim != 3 or weight.ndim != 4:
        raise ConfigError(f"conv2d: expected (C,H,W) input and (O,C,kh,kw) weight, got {x.shape}, {weight.shape}")
    c_in, height, width = x.shape
    c_out, c_in_w, kh, kw = weight.shape
    if c_in != c_in_w:
        raise ConfigError(f"conv2d: input channels {c_in} != weight channels {c_in_w}")
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    out_h = height + 2 * padding - kh + 1
    out_w = width + 2 * padding - kw + 1
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"conv2d: input {x.shape} too small for kernel ({kh},{kw})")
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    out_data = np.tensordot(weight.data, windows, axes=([1, 2, 3], [0, 3, 4]))
    out = Tensor._from_op(np.ascontiguousarray(out_data), (x, weight))
    if out.requires_grad:

        def backward():
            g = out.grad
            if weight.requires_grad:
                weight._accum_grad(np.tensordot(g, windows, axes=([1, 2], [1, 2])))
            if x.requires_grad:
                g_win = g.reshape(c_out, -1).T @ weight.data.reshape(c_out, -1)
                g_win = g_win.reshape(out_h, out_w, c_in, kh, kw)
                gxp = np.zeros_like(xp)
                for i in range(kh):
                    for j in range(kw):
                        gxp[:, i : i + out_h, j : j + out_w] += g_win[:, :, :, i, j].transpose(2, 0, 1)
                if padding:
                    gxp = gxp[:, padding:-padding, padding:-padding]
                x._accum_grad(gxp)

        out._backward = backward
    return out


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; trailing rows/cols that do not fit are dropped."""
    if x.ndim != 3:
        raise ConfigError(f"max_pool2d: expected (C,H,W), got {x.shape}")
    channels, height, width = x.shape
    out_h, out_w = height // size, width // size
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"max_pool2d: input {x.shape} smaller than pool {size}")
    trimmed = x.data[:, : out_h * size, : out_w * size]
    blocks = (
        trimmed.reshape(channels, out_h, size, out_w, size)
        .transpose(0, 1, 3, 2, 4)
        .reshape(channels, out_h, out_w, size * size)
    )
    arg = blocks.argmax(axis=3)
    out_data = np.take_along_axis(blocks, arg[..., None], axis=3)[..., 0]
    out = Tensor._from_op(np.ascontiguousarray(out_data), (x,))
    if out.requires_grad:

        def backward():
            g_blocks = np.zeros_like(blocks)
            np.put_along_axis(g_blocks, arg[..., None], out.grad[..., None], axis=3)
            g_trim = (
                g_blocks.reshape(channels, out_h, out_w, size, size)
                .transpose(0, 1, 3, 2, 4)
                .reshape(channels, out_h * size, out_w * size)
            )
            gx = np.zeros_like(x.data)
            gx[:, : out_h * size, : out_w * size] = g_trim
            x._accum_grad(gx)

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# recurrent cells
# ---------------------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp argument clamped so float32 never overflows; sigmoid(+-80) is 0/1 anyway
    return 1.0 / (1.0 + np.exp(np.minimum(-z, 80.0)))


def _lstm_gates(z: np.ndarray, hidden: int):
    i_f = _sigmoid(z[:, : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(z[:, 3 * hidden :])
    return i_f[:, :hidden], i_f[:, hidden:], g, o


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, w_ih: Tensor, w_hh: Tensor, bias: Tensor) -> Tensor:
    """One gated-recurrence step. Returns (B, 2H): new hidden and new cell, concatenated.

    Gate layout along the 4H axis is input, forget, cell, output.
    """
    batch, _ = x.shape
    hidden = w_hh.shape[1]
    if w_ih.shape != (4 * hidden, x.shape[1]) or w_hh.shape != (4 * hidden, hidden):
        raise ConfigError(
            f"lstm_cell: weight shapes {w_ih.shape}/{w_hh.shape} incompatible with input {x.shape}, hidden {hidden}"
        )
    z = x.data @ w_ih.data.T + h_prev.data @ w_hh.data.T + bias.data
    i, f, g, o = _lstm_gates(z, hidden)
    c_new = f * c_prev.data + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    out = Tensor._from_op(np.concatenate([h_new, c_new], axis=1), (x, h_prev, c_prev, w_ih, w_hh, bias))
    if out.requires_grad:

        def backward():
            gh = out.grad[:, :hidden]
            gc_up = out.grad[:, hidden:]
            dc = gh * o * (1.0 - tanh_c * tanh_c) + gc_up
            dz = np.empty_like(z)
            dz[:, :hidden] = dc * g * i * (1.0 - i)
            dz[:, hidden : 2 * hidden] = dc * c_prev.data * f * (1.0 - f)
            dz[:, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
            dz[:, 3 * hidden :] = gh * tanh_c * o * (1.0 - o)
            if x.requires_grad:
                x._accum_grad(dz @ w_ih.data)
            if h_prev.requires_grad:
                h_prev._accum_grad(dz @ w_hh.data)
            if c_prev.requires_grad:
                c_prev._accum_grad(dc * f)
            if w_ih.requires_grad:
                w_ih._accum_grad(dz.T @ x.data)
            if w_hh.requires_grad:
                w_hh._accum_grad(dz.T @ h_prev.data)
            if bias.requires_grad:
                bias._accum_grad(dz.sum(axis=0))

        out._backward = backward
    return out


def _lstm_run(x: np.ndarray, w_ih: np.ndarray, w_hh: np.ndarray, b: np.ndarray, reverse: bool):
    """Run one LSTM direction over (B, T, D). Returns hidden states and a BPTT cache."""
    batch, steps, _ = x.shape
    hidden = w_hh.shape[1]
    xz = x.reshape(batch * steps, -1) @ w_ih.T
    xz = xz.reshape(batch, steps, 4 * hidden) + b
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    hs = np.empty((batch, steps, hidden), dtype=x.dtype)
    cs = np.empty((batch, steps, hidden), dtype=x.dtype)
    gates = np.empty((batch, steps, 4 * hidden), dtype=x.dtype)
    h = np.zeros((batch, hidden), dtype=x.dtype)
    c = np.zeros((batch, hidden), dtype=x.dtype)
    for t in order:
        z = xz[:, t] + h @ w_hh.T
        i, f, g, o = _lstm_gates(z, hidden)
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :hidden] = i
        gates[:, t, hidden : 2 * hidden] = f
        gates[:, t, 2 * hidden : 3 * hidden] = g
        gates[:, t, 3 * hidden :] = o
        cs[:, t] = c
        hs[:, t] = h
    return hs, (x, gates, cs, hs, list(order))


def _lstm_grad(cache, w_ih: np.ndarray, w_hh: np.ndarray, g_h: np.ndarray):
    """BPTT through one direction; g_h is the upstream grad of the hidden states."""
    x, gates, cs, hs, order = cache
    batch, steps, _ = x.shape
    hidden = w_hh.shape[1]
    dzs = np.empty_like(gates)
    h_prev_all = np.empty_like(hs)
    dh_carry = np.zeros((batch, hidden), dtype=x.dtype)
    dc_carry = np.zeros((batch, hidden), dtype=x.dtype)
    for step_idx in range(len(order) - 1, -1, -1):
        t = order[step_idx]
        i = gates[:, t, :hidden]
        f = gates[:, t, hidden : 2 * hidden]
        g = gates[:, t, 2 * hidden : 3 * hidden]
        o = gates[:, t, 3 * hidden :]
        c_prev = cs[:, order[step_idx - 1]] if step_idx > 0 else np.zeros((batch, hidden), dtype=x.dtype)
        h_prev = hs[:, order[step_idx - 1]] if step_idx > 0 else np.zeros((batch, hidden), dtype=x.dtype)
        h_prev_all[:, t] = h_prev
        tanh_c = np.tanh(cs[:, t])
        dh = g_h[:, t] + dh_carry
        dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_carry
        dz = dzs[:, t]
        dz[:, :hidden] = dc * g * i * (1.0 - i)
        dz[:, hidden : 2 * hidden] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
        dz[:, 3 * hidden :] = dh * tanh_c * o * (1.0 - o)
        dh_carry = dz @ w_hh
        dc_carry = dc * f
    flat_dz = dzs.reshape(batch * steps, 4 * hidden)
    dw_ih = flat_dz.T @ x.reshape(batch * steps, -1)
    dw_hh = flat_dz.T @ h_prev_all.reshape(batch * steps, hidden)
    db = flat_dz.sum(axis=0)
    dx = (flat_dz @ w_ih).reshape(x.shape)
    return dx, dw_ih, dw_hh, db


def bilstm_layer(
    x: Tensor,
    w_ih_f: Tensor,
    w_hh_f: Tensor,
    b_f: Tensor,
    w_ih_b: Tensor,
    w_hh_b: Tensor,
    b_b: Tensor,
) -> Tensor:
    """Bidirectional LSTM over (B, T, D) -> (B, T, 2H).

    One pass runs left to right, the other right to left; per-step hidden
    states are concatenated on the feature axis. Implemented as a single
    fused node with manual truncated-free BPTT, which keeps graphs shallow.
    """
    if x.ndim != 3:
        raise ConfigError(f"bilstm_layer: expected (B,T,D), got {x.shape}")
    hidden = w_hh_f.shape[1]
    if w_ih_f.shape[1] != x.shape[2] or w_ih_b.shape[1] != x.shape[2]:
        raise ConfigError(
            f"bilstm_layer: input dim {x.shape[2]} incompatible with weights {w_ih_f.shape}, {w_ih_b.shape}"
        )
    hs_f, cache_f = _lstm_run(x.data, w_ih_f.data, w_hh_f.data, b_f.data, reverse=False)
    hs_b, cache_b = _lstm_run(x.data, w_ih_b.data, w_hh_b.data, b_b.data, reverse=True)
    out = Tensor._from_op(
        np.concatenate([hs_f, hs_b], axis=2), (x, w_ih_f, w_hh_f, b_f, w_ih_b, w_hh_b, b_b)
    )
    if out.requires_grad:

        def backward():
            g_f = out.grad[:, :, :hidden]
            g_b = out.grad[:, :, hidden:]
            dx_f, dwi_f, dwh_f, db_f = _lstm_grad(cache_f, w_ih_f.data, w_hh_f.data, g_f)
            dx_b, dwi_b, dwh_b, db_b = _lstm_grad(cache_b, w_ih_b.data, w_hh_b.data, g_b)
            if x.requires_grad:
                x._accum_grad(dx_f + dx_b)
            for tensor, grad in (
                (w_ih_f, dwi_f),
                (w_hh_f, dwh_f),
                (b_f, db_f),
                (w_ih_b, dwi_b),
                (w_hh_b, dwh_b),
                (b_b, db_b),
            ):
                if tensor.requires_grad:
                    tensor._accum_grad(grad)

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# normalization / softmax
# ---------------------------------------------------------------------------


def layer_norm(x: Tensor, axes) -> Tensor:
    """Normalize to zero mean, unit variance over the given axes (no affine).

    Slices whose variance falls below LAYER_NORM_VAR_FLOOR are mapped to
    zeros (and pass zero gradient), so constant inputs cannot blow up.
    """
    axes = (axes,) if isinstance(axes, int) else tuple(axes)
    mu = x.data.mean(axis=axes, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axes, keepdims=True)
    degenerate = var < LAYER_NORM_VAR_FLOOR
    inv_std = np.where(degenerate, 0.0, 1.0 / np.sqrt(np.where(degenerate, 1.0, var)))
    out_data = centered * inv_std
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            g = out.grad
            g_mean = g.mean(axis=axes, keepdims=True)
            gy_mean = (g * out_data).mean(axis=axes, keepdims=True)
            x._accum_grad(inv_std * (g - g_mean - out_data * gy_mean))

        out._backward = backward
    return out


def softmax(x: Tensor, axis: int) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            g = out.grad
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            x._accum_grad(out_data * (g - inner))

        out._backward = backward
    return out


def log_softmax(x: Tensor, axis: int) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - log_z
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            g = out.grad
            x._accum_grad(g - np.exp(out_data) * g.sum(axis=axis, keepdims=True))

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ConfigError("concat: empty tensor list")
    out = Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def backward():
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    index = [slice(None)] * out.ndim
                    index[axis] = slice(lo, hi)
                    t._accum_grad(out.grad[tuple(index)])

        out._backward = backward
    return out


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor._from_op(x.data.reshape(shape), (x,))
    if out.requires_grad:

        def backward():
            x._accum_grad(out.grad.reshape(x.shape))

        out._backward = backward
    return out


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    out = Tensor._from_op(np.transpose(x.data, axes), (x,))
    if out.requires_grad:
        inverse = tuple(np.argsort(axes))

        def backward():
            x._accum_grad(np.transpose(out.grad, inverse))

        out._backward = backward
    return out


def getitem(x: Tensor, key) -> Tensor:
    """Basic slicing only (slices, ints, tuples of those)."""
    out = Tensor._from_op(np.ascontiguousarray(x.data[key]), (x,))
    if out.requires_grad:

        def backward():
            gx = np.zeros_like(x.data)
            gx[key] += out.grad
            x._accum_grad(gx)

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# chunking for the dual-path separator
# ---------------------------------------------------------------------------


def chunk_layout(frames: int, chunk_len: int, hop: int) -> tuple[int, int]:
    """(chunk_count, padded_frames) for a frame axis of the given length.

    At least two chunks are always produced so the cross-chunk recurrence
    sees a sequence; the frame axis is zero-padded up to the exact layout.
    """
    if chunk_len < 2:
        raise ConfigError(f"chunk_layout: chunk_len must be >= 2, got {chunk_len}")
    if hop * 2 != chunk_len:
        raise ConfigError(f"chunk_layout: hop {hop} must be chunk_len/2 ({chunk_len}/2)")
    steps = max(1, math.ceil((frames - chunk_len) / hop))
    count = steps + 1
    padded = chunk_len + steps * hop
    return count, padded


def segment_chunks(x: Tensor, chunk_len: int, hop: int) -> tuple[Tensor, int]:
    """Split (F, T) into overlapping chunks -> ((F, K, C), pad_frames)."""
    if x.ndim != 2:
        raise ConfigError(f"segment_chunks: expected (F,T), got {x.shape}")
    feat, frames = x.shape
    count, padded = chunk_layout(frames, chunk_len, hop)
    pad = padded - frames
    xp = np.pad(x.data, ((0, 0), (0, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, chunk_len, axis=1)[:, ::hop, :]
    out_data = np.ascontiguousarray(windows.transpose(0, 2, 1))
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            g = out.grad
            gxp = np.zeros((feat, padded), dtype=x.dtype)
            last = (count - 1) * hop
            for k in range(chunk_len):
                gxp[:, k : k + last + 1 : hop] += g[:, k, :]
            x._accum_grad(gxp[:, :frames])

        out._backward = backward
    return out, pad


def merge_chunks(x: Tensor, hop: int, out_frames: int, pad_frames: int) -> Tensor:
    """Averaging overlap-add of (F, K, C) back to (F, out_frames); exact inverse of segment_chunks."""
    if x.ndim != 3:
        raise ConfigError(f"merge_chunks: expected (F,K,C), got {x.shape}")
    feat, chunk_len, count = x.shape
    padded = chunk_len + (count - 1) * hop
    if padded != out_frames + pad_frames:
        raise ConfigError(
            f"merge_chunks: layout {padded} != out_frames {out_frames} + pad {pad_frames}"
        )
    counts = np.zeros(padded)
    acc = np.zeros((feat, padded), dtype=x.dtype)
    last = (count - 1) * hop
    for k in range(chunk_len):
        acc[:, k : k + last + 1 : hop] += x.data[:, k, :]
        counts[k : k + last + 1 : hop] += 1.0
    counts = counts.astype(x.dtype)
    out_data = np.ascontiguousarray((acc / counts)[:, :out_frames])
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            gp = np.zeros((feat, padded), dtype=x.dtype)
            gp[:, :out_frames] = out.grad
            gp = gp / counts
            gx = np.empty_like(x.data)
            for k in range(chunk_len):
                gx[:, k, :] = gp[:, k : k + last + 1 : hop]
            x._accum_grad(gx)

        out._backward = backward
    return out


def overlap_add(x: Tensor, stride: int, out_len: int) -> Tensor:
    """Overlap-add frames (L, T) at the given stride into a signal of out_len samples.

    The natural length is (T-1)*stride + L; the result is trimmed or
    zero-padded to out_len.
    """
    if x.ndim != 2:
        raise ConfigError(f"overlap_add: expected (L,T), got {x.shape}")
    frame_len, frames = x.shape
    full = (frames - 1) * stride + frame_len
    y = np.zeros(full, dtype=x.dtype)
    last = (frames - 1) * stride
    for offset in range(frame_len):
        y[offset : offset + last + 1 : stride] += x.data[offset, :]
    if out_len <= full:
        out_data = np.ascontiguousarray(y[:out_len])
    else:
        out_data = np.concatenate([y, np.zeros(out_len - full, dtype=x.dtype)])
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            g_full = np.zeros(full, dtype=x.dtype)
            n = min(full, out_len)
            g_full[:n] = out.grad[:n]
            gx = np.empty_like(x.data)
            for offset in range(frame_len):
                gx[offset, :] = g_full[offset : offset + last + 1 : stride]
            x._accum_grad(gx)

        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# differentiable STFT
# ---------------------------------------------------------------------------


def reflect_index_map(length: int, pad: int) -> np.ndarray:
    """Original-sample index for each position of a reflect-padded signal."""
    if length <= pad:
        raise ConfigError(f"reflect padding {pad} needs signal length > {pad}, got {length}")
    idx = np.empty(length + 2 * pad, dtype=np.intp)
    idx[pad : pad + length] = np.arange(length)
    idx[:pad] = np.arange(pad, 0, -1)
    idx[pad + length :] = np.arange(length - 2, length - 2 - pad, -1)
    return idx


def frame_count(length: int, window_len: int, hop: int) -> int:
    return 1 + (length + 2 * (window_len // 2) - window_len) // hop


def stft_ri(x: Tensor, window: np.ndarray, hop: int) -> Tensor:
    """Windowed DFT of a 1-D signal -> (2, bins, frames): real part, imaginary part.

    Reflect-pads by half a window on each side. The backward pass is the
    exact adjoint of the one-sided DFT (interior bins are not doubled).
    """
    if x.ndim != 1:
        raise ConfigError(f"stft_ri: expected 1-D signal, got {x.shape}")
    window_len = len(window)
    pad = window_len // 2
    n = x.shape[0]
    if n <= pad:
        raise ConfigError(f"stft_ri: signal of {n} samples shorter than half a window ({pad})")
    idx = reflect_index_map(n, pad)
    xp = x.data[idx]
    frames = 1 + (len(xp) - window_len) // hop
    window = window.astype(x.dtype, copy=False)
    framed = np.lib.stride_tricks.sliding_window_view(xp, window_len)[::hop] * window
    spec = np.fft.rfft(framed, axis=1)
    bins = window_len // 2 + 1
    out_data = np.ascontiguousarray(
        np.stack([spec.real.T, spec.imag.T]).astype(x.dtype, copy=False)
    )
    out = Tensor._from_op(out_data, (x,))
    if out.requires_grad:

        def backward():
            g = out.grad[0].T + 1j * out.grad[1].T
            g = g.copy()
            if bins > 2:
                g[:, 1:-1] *= 0.5
            g_frames = np.fft.irfft(g, n=window_len, axis=1) * window_len
            g_frames = (g_frames * window).astype(x.dtype, copy=False)
            gxp = np.zeros(len(xp), dtype=x.dtype)
            for t in range(frames):
                gxp[t * hop : t * hop + window_len] += g_frames[t]
            gx = np.zeros(n, dtype=x.dtype)
            np.add.at(gx, idx, gxp)
            x._accum_grad(gx)

        out._backward = backward
    return out
