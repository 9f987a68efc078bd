"""Network building blocks with hand-written backward passes.

Every layer keeps its parameters and matching gradient buffers in plain
dicts, caches whatever its backward pass needs during forward, and returns
the gradient with respect to its input from backward. Inputs are batched
time series shaped (batch, time, channels).
"""

import numpy as np

from ..errors import InvalidInputError


class Layer:
    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}
        self._cache = None

    def _register(self, name, value):
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def zero_grad(self):
        for g in self.grads.values():
            g[...] = 0.0


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class Conv1d(Layer):
    """Temporal convolution with zero padding that preserves sequence length."""

    def __init__(self, in_ch, out_ch, kernel, rng):
        super().__init__()
        if kernel % 2 != 1:
            raise InvalidInputError("kernel width must be odd")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self._register("weight", _uniform_init(rng, (out_ch, in_ch, kernel), in_ch * kernel))
        self._register("bias", _uniform_init(rng, (out_ch,), in_ch * kernel))

    def forward(self, x, train=False):
        b, t, _ = x.shape
        pad = self.kernel // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        # patches[b, t, k, c] = xp[b, t + k, c]
        patches = np.stack([xp[:, k:k + t, :] for k in range(self.kernel)], axis=2)
        flat = patches.reshape(b, t, self.kernel * self.in_ch)
        w = self.params["weight"].transpose(0, 2, 1).reshape(self.out_ch, -1)
        self._cache = (flat, (b, t))
        return flat @ w.T + self.params["bias"]

    def backward(self, dy):
        flat, (b, t) = self._cache
        w = self.params["weight"].transpose(0, 2, 1).reshape(self.out_ch, -1)
        dy2 = dy.reshape(-1, self.out_ch)
        dw = dy2.T @ flat.reshape(-1, self.kernel * self.in_ch)
        self.grads["weight"] += dw.reshape(self.out_ch, self.kernel, self.in_ch).transpose(0, 2, 1)
        self.grads["bias"] += dy2.sum(axis=0)
        dflat = (dy2 @ w).reshape(b, t, self.kernel, self.in_ch)
        pad = self.kernel // 2
        dxp = np.zeros((b, t + 2 * pad, self.in_ch))
        for k in range(self.kernel):
            dxp[:, k:k + t, :] += dflat[:, :, k, :]
        return dxp[:, pad:pad + t, :]


class BatchNorm(Layer):
    """Per-channel normalization over the batch and time axes."""

    def __init__(self, ch, momentum=0.1, eps=1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self._register("gamma", np.ones(ch))
        self._register("beta", np.zeros(ch))
        self.buffers["running_mean"] = np.zeros(ch)
        self.buffers["running_var"] = np.ones(ch)

    def forward(self, x, train=False):
        if train:
            n = x.shape[0] * x.shape[1]
            mean = x.mean(axis=(0, 1))
            var = x.var(axis=(0, 1))
            m = self.momentum
            self.buffers["running_mean"] *= 1.0 - m
            self.buffers["running_mean"] += m * mean
            unbiased = var * n / max(n - 1, 1)
            self.buffers["running_var"] *= 1.0 - m
            self.buffers["running_var"] += m * unbiased
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, train, x.shape[0] * x.shape[1])
        return xhat * self.params["gamma"] + self.params["beta"]

    def backward(self, dy):
        xhat, inv, train, n = self._cache
        self.grads["gamma"] += np.sum(dy * xhat, axis=(0, 1))
        self.grads["beta"] += np.sum(dy, axis=(0, 1))
        dxhat = dy * self.params["gamma"]
        if not train:
            return dxhat * inv
        # batch statistics took part in the normalization, so fold their
        # derivatives back in
        return (
            dxhat - dxhat.mean(axis=(0, 1)) - xhat * np.mean(dxhat * xhat, axis=(0, 1))
        ) * inv


class ELU(Layer):
    def forward(self, x, train=False):
        y = np.where(x > 0.0, x, np.expm1(x))
        self._cache = (x > 0.0, y)
        return y

    def backward(self, dy):
        positive, y = self._cache
        return dy * np.where(positive, 1.0, y + 1.0)


class Dropout(Layer):
    def __init__(self, rate):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise InvalidInputError("dropout rate must lie in [0, 1)")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._cache = None
            return x
        if rng is None:
            raise InvalidInputError("training-mode dropout needs a random generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        self._cache = mask
        return x * mask

    def backward(self, dy):
        return dy if self._cache is None else dy * self._cache


class Affine(Layer):
    def __init__(self, in_dim, out_dim, rng):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self._register("weight", _uniform_init(rng, (out_dim, in_dim), in_dim))
        self._register("bias", _uniform_init(rng, (out_dim,), in_dim))

    def forward(self, x, train=False):
        self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dy):
        x = self._cache
        dy2 = dy.reshape(-1, self.out_dim)
        self.grads["weight"] += dy2.T @ x.reshape(-1, self.in_dim)
        self.grads["bias"] += dy2.sum(axis=0)
        return dy @ self.params["weight"]


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class GRU(Layer):
    """Single-layer gated recurrent unit returning the full hidden sequence.

    Gate layout follows the common [reset; update; candidate] stacking:
        r = sigmoid(Wi_r x + bi_r + Wh_r h + bh_r)
        z = sigmoid(Wi_z x + bi_z + Wh_z h + bh_z)
        n = tanh(Wi_n x + bi_n + r * (Wh_n h + bh_n))
        h' = (1 - z) * n + z * h
    """

    def __init__(self, in_dim, hidden, rng):
        super().__init__()
        self.in_dim = in_dim
        self.hidden = hidden
        self._register("w_input", _uniform_init(rng, (3 * hidden, in_dim), hidden))
        self._register("b_input", _uniform_init(rng, (3 * hidden,), hidden))
        self._register("w_hidden", _uniform_init(rng, (3 * hidden, hidden), hidden))
        self._register("b_hidden", _uniform_init(rng, (3 * hidden,), hidden))

    def forward(self, x, train=False):
        b, t, _ = x.shape
        h = np.zeros((b, self.hidden))
        steps = []
        out = np.empty((b, t, self.hidden))
        wi, bi = self.params["w_input"], self.params["b_input"]
        wh, bh = self.params["w_hidden"], self.params["b_hidden"]
        hs = self.hidden
        for k in range(t):
            xk = x[:, k, :]
            gi = xk @ wi.T + bi
            gh = h @ wh.T + bh
            r = _sigmoid(gi[:, :hs] + gh[:, :hs])
            z = _sigmoid(gi[:, hs:2 * hs] + gh[:, hs:2 * hs])
            n = np.tanh(gi[:, 2 * hs:] + r * gh[:, 2 * hs:])
            h_new = (1.0 - z) * n + z * h
            steps.append((xk, h, r, z, n, gh[:, 2 * hs:]))
            h = h_new
            out[:, k, :] = h
        self._cache = steps
        return out

    def backward(self, dout):
        steps = self._cache
        b = dout.shape[0]
        hs = self.hidden
        wi, wh = self.params["w_input"], self.params["w_hidden"]
        dh = np.zeros((b, hs))
        dx = np.empty((b, len(steps), self.in_dim))
        for k in range(len(steps) - 1, -1, -1):
            xk, h_prev, r, z, n, ghn = steps[k]
            dtotal = dout[:, k, :] + dh
            dz = dtotal * (h_prev - n)
            dn = dtotal * (1.0 - z)
            dh = dtotal * z
            dgn = dn * (1.0 - n * n)
            dr = dgn * ghn
            da_r = dr * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            dgi = np.concatenate([da_r, da_z, dgn], axis=1)
            dgh = np.concatenate([da_r, da_z, dgn * r], axis=1)
            self.grads["w_input"] += dgi.T @ xk
            self.grads["b_input"] += dgi.sum(axis=0)
            self.grads["w_hidden"] += dgh.T @ h_prev
            self.grads["b_hidden"] += dgh.sum(axis=0)
            dx[:, k, :] = dgi @ wi
            dh += dgh @ wh
        return dx
