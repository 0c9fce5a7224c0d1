"""Dense forward/backward primitives for the small-CNN engine.

Conventions, used everywhere in the package:

- feature maps are float64 arrays of shape (batch, h, w, c)  [NHWC]
- conv weights are float64 arrays of shape (kh, kw, c, n); C order, so the
  flattened layout has the filter index n varying fastest
- convolution is cross-correlation (no kernel flip) with zero padding
- every backward returns the exact gradient of the value its forward
  produced, so central finite differences validate each pair

All ops are pure functions of their inputs.
"""

import numpy as np

from ..errors import ShapeError


def conv2d_forward(x, w, stride=1, padding=0, layer=""):
    """Cross-correlate `x` (b,h,w,c) with `w` (kh,kw,c,n) -> (b,oh,ow,n)."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d{layer}: need 4D input/weights, "
                         f"got {x.shape} and {w.shape}")
    b, h, wd, c = x.shape
    kh, kw, wc, n = w.shape
    if c != wc:
        raise ShapeError(f"conv2d{layer}: input has {c} channels but "
                         f"weights expect {wc} (w shape {w.shape})")
    if stride < 1:
        raise ShapeError(f"conv2d{layer}: stride must be >= 1, got {stride}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d{layer}: kernel {kh}x{kw} with padding "
                         f"{padding} does not fit input {h}x{wd}")
    xp = _pad(x, padding)
    out = np.zeros((b, oh, ow, n), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, u:u + stride * oh:stride, v:v + stride * ow:stride, :]
            out += xs @ w[u, v]  # (b,oh,ow,c) @ (c,n)
    return out


def conv2d_backward(grad_out, x, w, stride=1, padding=0, layer=""):
    """Gradients of conv2d_forward w.r.t. input and weights."""
    b, h, wd, c = x.shape
    kh, kw, _, n = w.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    if grad_out.shape != (b, oh, ow, n):
        raise ShapeError(f"conv2d{layer}: grad_out shape {grad_out.shape} "
                         f"does not match forward output {(b, oh, ow, n)}")
    xp = _pad(x, padding)
    grad_w = np.zeros_like(w)
    grad_xp = np.zeros_like(xp)
    for u in range(kh):
        for v in range(kw):
            sl = (slice(None), slice(u, u + stride * oh, stride),
                  slice(v, v + stride * ow, stride), slice(None))
            # (b,oh,ow,c) x (b,oh,ow,n) summed over b,oh,ow -> (c,n)
            grad_w[u, v] = np.tensordot(xp[sl], grad_out, axes=([0, 1, 2], [0, 1, 2]))
            grad_xp[sl] += grad_out @ w[u, v].T
    if padding:
        grad_x = grad_xp[:, padding:padding + h, padding:padding + wd, :]
    else:
        grad_x = grad_xp
    return grad_x, grad_w


def _pad(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))


def dense_forward(x, w, b):
    """Affine map: (batch, d_in) @ (d_in, d_out) + (d_out,)."""
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense: input {x.shape} does not match weights {w.shape}")
    return x @ w + b


def dense_backward(grad_out, x, w):
    grad_w = x.T @ grad_out
    grad_b = grad_out.sum(axis=0)
    grad_x = grad_out @ w.T
    return grad_x, grad_w, grad_b


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(grad_out, x):
    return grad_out * (x > 0)


def maxpool2_forward(x):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    b, h, w, c = x.shape
    oh, ow = h // 2, w // 2
    if oh < 1 or ow < 1:
        raise ShapeError(f"maxpool2: input {h}x{w} too small to pool")
    xv = x[:, :2 * oh, :2 * ow, :].reshape(b, oh, 2, ow, 2, c)
    return xv.max(axis=(2, 4))


def maxpool2_backward(grad_out, x):
    """Routes each gradient to the first maximum of its 2x2 window."""
    b, h, w, c = x.shape
    oh, ow = h // 2, w // 2
    xv = x[:, :2 * oh, :2 * ow, :].reshape(b, oh, 2, ow, 2, c)
    flat = xv.transpose(0, 1, 3, 5, 2, 4).reshape(b, oh, ow, c, 4)
    arg = flat.argmax(axis=4)
    gflat = np.zeros_like(flat)
    np.put_along_axis(gflat, arg[..., None], grad_out[..., None], axis=4)
    g = (gflat.reshape(b, oh, ow, c, 2, 2)
              .transpose(0, 1, 4, 2, 5, 3)
              .reshape(b, 2 * oh, 2 * ow, c))
    if (2 * oh, 2 * ow) == (h, w):
        return g
    grad_x = np.zeros_like(x)
    grad_x[:, :2 * oh, :2 * ow, :] = g
    return grad_x


def flatten_forward(x):
    return x.reshape(x.shape[0], -1)


def flatten_backward(grad_out, x):
    return grad_out.reshape(x.shape)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    Returns (loss, grad) where grad = (softmax - one_hot) / batch, the exact
    gradient of the returned batch-mean loss.
    """
    b, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(f"softmax_ce: {b} logit rows but labels shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeError(f"softmax_ce: label out of range for {k} classes")
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(b), labels].mean()
    grad = np.exp(log_probs)
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return loss, grad
