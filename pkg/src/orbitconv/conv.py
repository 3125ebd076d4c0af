"""Stride-1 2-D convolution, maxout group pooling, pointwise maps and BCE loss,
each with an exact backward pass.

Convolution is cross-correlation (no kernel mirroring), computed by im2col so
each output element reduces over (channel, row, column) of its window.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

PADDINGS = ("same", "valid")
BCE_EPS = 1e-7


def _pad_amount(kh: int, kw: int, padding: str) -> tuple[int, int]:
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"same padding needs odd kernels, got {kh}x{kw}")
        return kh // 2, kw // 2
    if padding == "valid":
        return 0, 0
    raise ValueError(f"unknown padding {padding!r}")


def _im2col(xc: np.ndarray, kh: int, kw: int, ph: int, pw: int) -> tuple[np.ndarray, int, int]:
    """Column matrix of a channel-major (C, N, H, W) input, shaped
    (C*kh*kw, N*Ho*Wo): rows in (c, u, v) order, columns in (n, i, j) order."""
    c, n, h, w = xc.shape
    if ph or pw:
        xp = np.zeros((c, n, h + 2 * ph, w + 2 * pw))
        xp[:, :, ph:ph + h, pw:pw + w] = xc
        xc = xp
    ho, wo = xc.shape[2] - kh + 1, xc.shape[3] - kw + 1
    cols = np.empty((c, kh, kw, n, ho, wo))
    for u in range(kh):
        for v in range(kw):
            cols[:, u, v] = xc[:, :, u:u + ho, v:v + wo]
    return cols.reshape(c * kh * kw, n * ho * wo), ho, wo


def _col2im(dcols: np.ndarray, h: int, w: int, ph: int, pw: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add column gradients back to (C, N, H, W)."""
    c, kh, kw, n, ho, wo = dcols.shape
    if not (ph or pw) and kh == 1 and kw == 1:
        return dcols.reshape(c, n, ho, wo)
    dxp = np.zeros((c, n, h + 2 * ph, w + 2 * pw))
    for u in range(kh):
        for v in range(kw):
            dxp[:, :, u:u + ho, v:v + wo] += dcols[:, u, v]
    return dxp[:, :, ph:ph + h, pw:pw + w]


def _check_conv(x, w, b=None):
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"expected 4-d x and w, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"x has {x.shape[1]} channels but kernel expects {w.shape[1]}")
    if b is not None and b.shape != (w.shape[0],):
        raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} output channels")


def to_cnhw(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).transpose(1, 0, 2, 3))


def to_nchw(xc) -> np.ndarray:
    return np.ascontiguousarray(xc.transpose(1, 0, 2, 3))


def conv2d_forward(x, w, b=None, padding: str = "same") -> np.ndarray:
    """y[n,o,i,j] = b[o] + sum_{c,u,v} x[n,c,i+u-ph,j+v-pw] * w[o,c,u,v]."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.zeros(w.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
    _check_conv(x, w, b)
    return to_nchw(conv_cnhw(to_cnhw(x), w, b, padding)[0])


def conv2d_backward(x, w, dy, padding: str = "same"):
    """Gradients of sum(dy * conv2d_forward(x, w, b)) w.r.t. x, w and b."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    _check_conv(x, w)
    ph, pw = _pad_amount(w.shape[2], w.shape[3], padding)
    xc = to_cnhw(x)
    cols, _, _ = _im2col(xc, w.shape[2], w.shape[3], ph, pw)
    dy = np.asarray(dy, dtype=np.float64)
    if dy.ndim != 4:
        raise ValueError(f"dy must be 4-d, got {dy.shape}")
    dxc, dw, db = conv_backward_cnhw(cols, xc.shape, w, to_cnhw(dy), padding)
    return to_nchw(dxc), dw, db


def conv_cnhw(xc, w, b, padding: str = "same"):
    """Channel-major forward: (Cin, N, H, W) -> (Cout, N, Ho, Wo), plus the
    im2col matrix for reuse in backward."""
    cout, cin, kh, kw = w.shape
    if xc.shape[0] != cin:
        raise ValueError(f"x has {xc.shape[0]} channels but kernel expects {cin}")
    ph, pw = _pad_amount(kh, kw, padding)
    cols, ho, wo = _im2col(xc, kh, kw, ph, pw)
    y = w.reshape(cout, -1) @ cols
    y += b[:, None]
    return y.reshape(cout, xc.shape[1], ho, wo), cols


def conv_backward_cnhw(cols, xc_shape, w, dyc, padding: str = "same", need_dx: bool = True):
    cin, n, h, wd = xc_shape
    cout, _, kh, kw = w.shape
    ph, pw = _pad_amount(kh, kw, padding)
    ho, wo = h + 2 * ph - kh + 1, wd + 2 * pw - kw + 1
    if dyc.shape != (cout, n, ho, wo):
        raise ValueError(f"dy shape {dyc.shape} does not match the forward output")
    dy_mat = dyc.reshape(cout, -1)
    dw = (dy_mat @ cols.T).reshape(w.shape)
    db = dy_mat.sum(axis=1)
    if not need_dx:
        return None, dw, db
    dcols = (w.reshape(cout, -1).T @ dy_mat).reshape(cin, kh, kw, n, ho, wo)
    return _col2im(dcols, h, wd, ph, pw), dw, db


def maxout_forward(groups: Sequence[np.ndarray] | np.ndarray):
    """Elementwise max over G equally shaped maps.

    Returns ``(y, routing)`` where routing holds the winning group index per
    element, ties going to the lowest index.
    """
    if len(groups) == 0:
        raise ValueError("maxout needs at least one group")
    if isinstance(groups, np.ndarray):
        stack = np.asarray(groups, dtype=np.float64)
    else:
        shapes = {np.shape(g) for g in groups}
        if len(shapes) != 1:
            raise ValueError(f"maxout groups differ in shape: {sorted(shapes)}")
        stack = np.stack([np.asarray(g, dtype=np.float64) for g in groups])
    y = stack[0].copy()
    rtype = np.uint8 if len(stack) <= 256 else np.intp
    routing = np.zeros(y.shape, dtype=rtype)
    better = np.empty(y.shape, dtype=bool)
    step = np.empty(y.shape, dtype=rtype)
    # strict comparison keeps the lowest winning index on ties; the winner is
    # the last group that strictly improved the running max, i.e. the largest
    # i with ``better`` set, so routing is a running max of i * better
    for i in range(1, len(stack)):
        np.greater(stack[i], y, out=better)
        np.multiply(better, i, out=step, casting="unsafe")
        np.maximum(routing, step, out=routing)
        np.maximum(y, stack[i], out=y)
    return y, routing


def maxout_backward(dy, routing, n_groups: int) -> np.ndarray:
    """Route ``dy`` to the winning group. Returns a (G, *dy.shape) array."""
    dy = np.asarray(dy, dtype=np.float64)
    routing = np.asarray(routing)
    if routing.shape != dy.shape:
        raise ValueError(f"routing shape {routing.shape} does not match dy {dy.shape}")
    if routing.size and (routing.max() >= n_groups or routing.min() < 0):
        raise ValueError(f"routing index out of range for {n_groups} groups")
    out = np.empty((n_groups,) + dy.shape)
    for i in range(n_groups):
        np.multiply(dy, routing == i, out=out[i])
    return out


def relu(x) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x, dy) -> np.ndarray:
    return np.where(np.asarray(x) > 0, dy, 0.0)


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_backward(y, dy) -> np.ndarray:
    """Backward given the forward *output* y."""
    return dy * y * (1.0 - y)


def bce_loss(prob, label):
    """Mean pixelwise binary cross-entropy and its gradient w.r.t. ``prob``.

    Probabilities are clamped to [eps, 1-eps]; the gradient is that of the
    clamped expression, so it is zero where clamping is active.
    """
    prob = np.asarray(prob, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if prob.shape != label.shape:
        raise ValueError(f"prob shape {prob.shape} does not match label {label.shape}")
    if not np.all((label == 0) | (label == 1)):
        raise ValueError("labels must be 0 or 1")
    p = np.clip(prob, BCE_EPS, 1.0 - BCE_EPS)
    loss = -np.mean(label * np.log(p) + (1.0 - label) * np.log1p(-p))
    inside = (prob > BCE_EPS) & (prob < 1.0 - BCE_EPS)
    dprob = np.where(inside, (p - label) / (p * (1.0 - p)), 0.0) / prob.size
    return float(loss), dprob
