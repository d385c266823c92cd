"""Forward and adjoint kernels for every supported layer kind.

All kernels are batched: activations carry a leading batch axis, images are
(N, C, H, W), vectors are (N, F). Everything runs in float64; reverse passes
are exact adjoints of the forward maps (max-pool routes to the first argmax
on ties).
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedLayer


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _im2col(xp: np.ndarray, k: int, s: int, oh: int, ow: int) -> np.ndarray:
    """(N, C, Hp, Wp) padded input -> (N, C*k*k, oh*ow) patch matrix."""
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, oh, ow), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + s * oh : s, j : j + s * ow : s]
    return cols.reshape(n, c * k * k, oh * ow)


def _col2im(gcols: np.ndarray, xp_shape, k: int, s: int, oh: int, ow: int) -> np.ndarray:
    n, c = xp_shape[:2]
    g = gcols.reshape(n, c, k, k, oh, ow)
    gxp = np.zeros(xp_shape, dtype=gcols.dtype)
    for i in range(k):
        for j in range(k):
            gxp[:, :, i : i + s * oh : s, j : j + s * ow : s] += g[:, :, i, j]
    return gxp


def _pool_windows(x: np.ndarray, k: int, s: int):
    n, c, h, w = x.shape
    oh, ow = (h - k) // s + 1, (w - k) // s + 1
    win = np.empty((n, c, k * k, oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            win[:, :, i * k + j] = x[:, :, i : i + s * oh : s, j : j + s * ow : s]
    return win, oh, ow


def forward(kind: str, xs: list[np.ndarray], params: dict[str, np.ndarray], attrs: dict):
    """Run one layer; returns (output, cache-for-backward)."""
    if kind == "conv2d":
        x = xs[0]
        w, b = params["weight"], params["bias"]
        o, _c, k, _ = w.shape
        s, p = int(attrs.get("stride", 1)), int(attrs.get("padding", 0))
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        nh, nw = xp.shape[2], xp.shape[3]
        oh, ow = (nh - k) // s + 1, (nw - k) // s + 1
        cols = _im2col(xp, k, s, oh, ow)
        y = np.matmul(w.reshape(o, -1), cols) + b[None, :, None]
        return y.reshape(x.shape[0], o, oh, ow), (x.shape, xp.shape, cols, w, k, s, p, oh, ow)

    if kind == "dense":
        x = xs[0]
        w, b = params["weight"], params["bias"]
        x2 = x.reshape(x.shape[0], -1)
        y = x2 @ w.T + b
        out_shape = tuple(attrs["output_shape"]) if "output_shape" in attrs else (w.shape[0],)
        return y.reshape((x.shape[0],) + out_shape), (x.shape, x2, w)

    if kind == "batchnorm":
        x = xs[0]
        eps = float(attrs.get("eps", 1e-5))
        bshape = (1, -1) + (1,) * (x.ndim - 2)
        scale = params["gamma"] / np.sqrt(params["running_var"] + eps)
        xhat = (x - params["running_mean"].reshape(bshape)) * (1.0 / np.sqrt(params["running_var"] + eps)).reshape(bshape)
        y = xhat * params["gamma"].reshape(bshape) + params["beta"].reshape(bshape)
        return y, (xhat, scale.reshape(bshape), bshape)

    if kind == "relu":
        x = xs[0]
        return np.maximum(x, 0.0), (x > 0)

    if kind == "sigmoid":
        y = _sigmoid(xs[0])
        return y, y

    if kind == "tanh":
        y = np.tanh(xs[0])
        return y, y

    if kind == "avgpool":
        x = xs[0]
        k = int(attrs["kernel"])
        s = int(attrs.get("stride", k))
        win, oh, ow = _pool_windows(x, k, s)
        return win.mean(axis=2), (x.shape, k, s, oh, ow)

    if kind == "maxpool":
        x = xs[0]
        k = int(attrs["kernel"])
        s = int(attrs.get("stride", k))
        win, oh, ow = _pool_windows(x, k, s)
        arg = win.argmax(axis=2)
        return win.max(axis=2), (x.shape, k, s, oh, ow, arg)

    if kind == "global_avg_pool":
        x = xs[0]
        return x.mean(axis=(2, 3)), x.shape

    if kind == "concat":
        sizes = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1), sizes

    if kind == "upsample_nearest":
        x = xs[0]
        f = int(attrs["factor"])
        return x.repeat(f, axis=2).repeat(f, axis=3), (x.shape, f)

    raise UnsupportedLayer(f"no forward registered for kind {kind!r}")


def backward(kind: str, gy: np.ndarray, cache, params: dict[str, np.ndarray]):
    """Adjoint of one layer; returns (grads per input, grads per param name)."""
    if kind == "conv2d":
        x_shape, xp_shape, cols, w, k, s, p, oh, ow = cache
        n, o = gy.shape[0], gy.shape[1]
        gyf = gy.reshape(n, o, oh * ow)
        gw = np.matmul(gyf, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        gb = gy.sum(axis=(0, 2, 3))
        gcols = np.matmul(w.reshape(o, -1).T, gyf)
        gxp = _col2im(gcols, xp_shape, k, s, oh, ow)
        gx = gxp[:, :, p : xp_shape[2] - p, p : xp_shape[3] - p] if p else gxp
        return [gx], {"weight": gw, "bias": gb}

    if kind == "dense":
        x_shape, x2, w = cache
        gy2 = gy.reshape(gy.shape[0], -1)
        gx = (gy2 @ w).reshape(x_shape)
        return [gx], {"weight": gy2.T @ x2, "bias": gy2.sum(axis=0)}

    if kind == "batchnorm":
        xhat, scale, bshape = cache
        axes = (0,) + tuple(range(2, gy.ndim))
        ggamma = (gy * xhat).sum(axis=axes)
        gbeta = gy.sum(axis=axes)
        gx = gy * scale
        zero = np.zeros_like(params["running_mean"])
        return [gx], {"gamma": ggamma, "beta": gbeta, "running_mean": zero, "running_var": zero.copy()}

    if kind == "relu":
        return [gy * cache], {}

    if kind == "sigmoid":
        y = cache
        return [gy * y * (1.0 - y)], {}

    if kind == "tanh":
        y = cache
        return [gy * (1.0 - y * y)], {}

    if kind == "avgpool":
        x_shape, k, s, oh, ow = cache
        gx = np.zeros(x_shape, dtype=gy.dtype)
        share = gy / (k * k)
        for i in range(k):
            for j in range(k):
                gx[:, :, i : i + s * oh : s, j : j + s * ow : s] += share
        return [gx], {}

    if kind == "maxpool":
        x_shape, k, s, oh, ow, arg = cache
        n, c = x_shape[0], x_shape[1]
        gwin = np.zeros((n, c, k * k, oh, ow), dtype=gy.dtype)
        np.put_along_axis(gwin, arg[:, :, None], gy[:, :, None], axis=2)
        gx = np.zeros(x_shape, dtype=gy.dtype)
        for i in range(k):
            for j in range(k):
                gx[:, :, i : i + s * oh : s, j : j + s * ow : s] += gwin[:, :, i * k + j]
        return [gx], {}

    if kind == "global_avg_pool":
        x_shape = cache
        area = x_shape[2] * x_shape[3]
        gx = np.broadcast_to(gy[:, :, None, None] / area, x_shape).copy()
        return [gx], {}

    if kind == "concat":
        sizes = cache
        splits = np.cumsum(sizes)[:-1]
        return list(np.split(gy, splits, axis=1)), {}

    if kind == "upsample_nearest":
        x_shape, f = cache
        n, c, h, w = x_shape
        gx = gy.reshape(n, c, h, f, w, f).sum(axis=(3, 5))
        return [gx], {}

    raise UnsupportedLayer(f"no adjoint registered for kind {kind!r}")
