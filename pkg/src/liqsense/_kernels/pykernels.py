"""Pure-numpy implementations of the hot kernels.

Same contracts as the Cython versions in ``_ckernels.pyx``; selected as
a fallback when the extension is not built (see package ``__init__``).
Convolutions use stride-1 kernels with symmetric zero padding; pooling
is 2x2/stride 2 with floor semantics (a trailing odd row/col is
dropped).  Max-pool ties go to the first window position in (di, dj)
scan order, matching the compiled kernel.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _im2col(xp: np.ndarray, kh: int, kw: int):
    n, c, hp, wp = xp.shape
    oh, ow = hp - kh + 1, wp - kw + 1
    s = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, (n, c, oh, ow, kh, kw), (s[0], s[1], s[2], s[3], s[2], s[3])
    )
    # (n, oh*ow, c*kh*kw); copy is implicit in reshape after transpose
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * kh * kw)
    return cols, oh, ow


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(x, w, b, pad=1):
    """x (N,C,H,W), w (F,C,KH,KW), b (F,) -> y (N,F,OH,OW)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    f, c, kh, kw = w.shape
    cols, oh, ow = _im2col(_pad(x, pad), kh, kw)
    y = cols @ w.reshape(f, -1).T + b
    return np.ascontiguousarray(y.reshape(x.shape[0], oh, ow, f).transpose(0, 3, 1, 2))


def conv2d_backward(x, w, dy, pad=1):
    """Gradients of a stride-1 convolution: returns (dx, dw, db)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    n, c, h, wid = x.shape
    f, _, kh, kw = w.shape
    cols, oh, ow = _im2col(_pad(x, pad), kh, kw)
    dyp = dy.transpose(0, 2, 3, 1).reshape(n, oh * ow, f)

    db = dy.sum(axis=(0, 2, 3))
    dw = np.tensordot(dyp, cols, axes=([0, 1], [0, 1])).reshape(f, c, kh, kw)

    dcols = (dyp @ w.reshape(f, -1)).reshape(n, oh, ow, c, kh, kw)
    hp, wp = h + 2 * pad, wid + 2 * pad
    dxp = np.zeros((n, c, hp, wp))
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + oh, j : j + ow] += dcols[:, :, :, :, i, j].transpose(
                0, 3, 1, 2
            )
    dx = dxp[:, :, pad : hp - pad, pad : wp - pad] if pad else dxp
    return np.ascontiguousarray(dx), dw, db


def maxpool2_forward(x):
    """2x2/stride-2 max pool; returns (y, argmax index 0..3 per window)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    xt = (
        x[:, :, : oh * 2, : ow * 2]
        .reshape(n, c, oh, 2, ow, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh, ow, 4)
    )
    idx = xt.argmax(axis=-1).astype(np.int32)
    y = np.take_along_axis(xt, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool2_backward(dy, idx, h, w):
    """Scatter pooled gradients back to the (N,C,h,w) input shape."""
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    n, c, oh, ow = dy.shape
    windows = np.zeros((n, c, oh, ow, 4))
    np.put_along_axis(windows, idx[..., None].astype(np.intp), dy[..., None], axis=-1)
    dx = np.zeros((n, c, h, w))
    dx[:, :, : oh * 2, : ow * 2] = (
        windows.reshape(n, c, oh, ow, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh * 2, ow * 2)
    )
    return dx


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def label_components(mask):
    """8-connected component labelling of a boolean grid.

    Returns (labels, n) with labels int32, 0 = background and
    components numbered 1..n in row-major discovery order.
    """
    mask = np.asarray(mask, dtype=bool)
    rows, cols = mask.shape
    labels = np.zeros((rows, cols), dtype=np.int32)
    n = 0
    for r0 in range(rows):
        for c0 in range(cols):
            if not mask[r0, c0] or labels[r0, c0]:
                continue
            n += 1
            stack = [(r0, c0)]
            labels[r0, c0] = n
            while stack:
                r, c = stack.pop()
                for dr, dc in _NEIGHBORS:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < rows and 0 <= cc < cols:
                        if mask[rr, cc] and not labels[rr, cc]:
                            labels[rr, cc] = n
                            stack.append((rr, cc))
    return labels, n
