"""Pure-numpy kernels; the fallback when the compiled core is unavailable.

Signatures mirror ``_ckernels``. Parameters are packed layer by layer as
``W`` (fan_in x fan_out, row-major) followed by ``b`` (fan_out).
"""

import numpy as np

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _layers(theta, sizes):
    out, pos = [], 0
    for fin, fout in zip(sizes[:-1], sizes[1:]):
        W = theta[pos:pos + fin * fout].reshape(fin, fout)
        pos += fin * fout
        out.append((W, theta[pos:pos + fout]))
        pos += fout
    return out


def _act(z, act):
    return np.maximum(z, 0.0) if act == 0 else np.tanh(z)


def softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def forward(theta, X, sizes, act):
    layers = _layers(theta, sizes)
    h = X
    for i, (W, b) in enumerate(layers):
        h = h @ W + b
        if i < len(layers) - 1:
            h = _act(h, act)
    return h


def loss_grad(theta, X, y_reg, y_lab, sizes, act, task, sigma_min, want_grad):
    """Per-row negative log-likelihood and the gradient of its sum."""
    layers = _layers(theta, sizes)
    hs, h = [X], X
    for i, (W, b) in enumerate(layers):
        h = h @ W + b
        if i < len(layers) - 1:
            h = _act(h, act)
        hs.append(h)
    out = hs[-1]
    n = X.shape[0]
    if task == 0:
        t = out.shape[1] // 2
        mu, s = out[:, :t], out[:, t:]
        sigma = softplus(s) + sigma_min
        r = y_reg - mu
        var = sigma * sigma
        rows = (HALF_LOG_2PI + np.log(sigma) + r * r / (2.0 * var)).sum(axis=1)
        if not want_grad:
            return rows, None
        dsig = 1.0 / sigma - r * r / (var * sigma)
        delta = np.concatenate([-r / var, dsig * sigmoid(s)], axis=1)
    else:
        m = out.max(axis=1, keepdims=True)
        lse = m + np.log(np.exp(out - m).sum(axis=1, keepdims=True))
        idx = np.arange(n)
        rows = lse[:, 0] - out[idx, y_lab]
        if not want_grad:
            return rows, None
        delta = np.exp(out - lse)
        delta[idx, y_lab] -= 1.0

    grads = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads.append(delta.sum(axis=0))
        grads.append((hs[i].T @ delta).ravel())
        if i > 0:
            delta = delta @ W.T
            if act == 0:
                delta = delta * (hs[i] > 0.0)
            else:
                delta = delta * (1.0 - hs[i] * hs[i])
    return rows, np.concatenate(grads[::-1])
