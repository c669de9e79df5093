"""
Dense network layers with explicit forward and backward passes

Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``grads`` during ``backward``.
"""

from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


class Layer:
    """Base layer: no parameters, identity"""

    def __init__(self, name: str = ''):
        self.name = name
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad

    def children(self) -> Sequence['Layer']:
        return ()

    def walk(self) -> Iterator['Layer']:
        yield self
        for child in self.children():
            yield from child.walk()

    def zero_grad(self) -> None:
        for key, value in self.params.items():
            self.grads[key] = np.zeros_like(value)


class Linear(Layer):
    """y = x W + b, He-initialized"""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = ''):
        super().__init__(name)
        scale = np.sqrt(2.0 / n_in)
        self.params['weight'] = (rng.standard_normal((n_in, n_out)) * scale).astype(dtype)
        self.params['bias'] = np.zeros(n_out, dtype=dtype)
        self.zero_grad()
        self._x: Optional[np.ndarray] = None

    def forward(self, x, training=False):
        self._x = x
        return x @ self.params['weight'] + self.params['bias']

    def backward(self, grad):
        x = self._x
        flat_x = x.reshape(-1, x.shape[-1])
        flat_g = grad.reshape(-1, grad.shape[-1])
        self.grads['weight'] += flat_x.T @ flat_g
        self.grads['bias'] += flat_g.sum(axis=0)
        return grad @ self.params['weight'].T


class BatchNorm(Layer):
    """
    Batch normalization over the feature axis

    Training uses batch statistics and updates running estimates (unbiased
    variance); evaluation uses the running estimates only. A training batch
    of one sample is normalized with the running estimates.
    """

    def __init__(self, n: int, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32, name: str = ''):
        super().__init__(name)
        self.momentum = momentum
        self.eps = eps
        self.params['gamma'] = np.ones(n, dtype=dtype)
        self.params['beta'] = np.zeros(n, dtype=dtype)
        self.buffers['running_mean'] = np.zeros(n, dtype=dtype)
        self.buffers['running_var'] = np.ones(n, dtype=dtype)
        self.zero_grad()
        self._cache = None

    def forward(self, x, training=False):
        gamma, beta = self.params['gamma'], self.params['beta']
        if training and x.shape[0] > 1:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            n = x.shape[0]
            m = self.momentum
            self.buffers['running_mean'] = ((1 - m) * self.buffers['running_mean'] + m * mean).astype(x.dtype)
            self.buffers['running_var'] = ((1 - m) * self.buffers['running_var']
                                           + m * var * n / (n - 1)).astype(x.dtype)
            batch_stats = True
        else:
            mean = self.buffers['running_mean']
            var = self.buffers['running_var']
            batch_stats = False
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std, batch_stats)
        return x_hat * gamma + beta

    def backward(self, grad):
        x_hat, inv_std, batch_stats = self._cache
        self.grads['gamma'] += (grad * x_hat).sum(axis=0)
        self.grads['beta'] += grad.sum(axis=0)
        d_hat = grad * self.params['gamma']
        if not batch_stats:
            return d_hat * inv_std
        n = grad.shape[0]
        return (inv_std / n) * (n * d_hat - d_hat.sum(axis=0) - x_hat * (d_hat * x_hat).sum(axis=0))


class ReLU(Layer):
    def __init__(self, name: str = ''):
        super().__init__(name)
        self._mask = None

    def forward(self, x, training=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class Dropout(Layer):
    """Inverted dropout; masks are drawn from ``rng`` (the owning model's run RNG)"""

    def __init__(self, p: float, name: str = ''):
        super().__init__(name)
        self.p = p
        self.rng: Optional[np.random.Generator] = None
        self._mask = None

    def forward(self, x, training=False):
        if not training or self.p == 0.0:
            self._mask = None
            return x
        if self.rng is None:
            raise RuntimeError(f"dropout layer '{self.name}' has no RNG")
        keep = (self.rng.random(x.shape) >= self.p).astype(x.dtype)
        self._mask = keep / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


class Sequential(Layer):
    def __init__(self, layers: Sequence[Layer], name: str = ''):
        super().__init__(name)
        self.layers: List[Layer] = list(layers)

    def children(self):
        return self.layers

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


def dense_block(n_in: int, widths: Sequence[int], dropout: float, batch_norm: bool,
                rng: np.random.Generator, dtype, prefix: str) -> Tuple[Sequential, int]:
    """[linear -> batchnorm? -> relu -> dropout] per width; returns (block, output width)"""
    layers: List[Layer] = []
    for k, width in enumerate(widths):
        name = f"{prefix}{k}"
        layers.append(Linear(n_in, width, rng, dtype, f"{name}.linear"))
        if batch_norm:
            layers.append(BatchNorm(width, dtype=dtype, name=f"{name}.bn"))
        layers.append(ReLU(f"{name}.relu"))
        if dropout > 0:
            layers.append(Dropout(dropout, f"{name}.dropout"))
        n_in = width
    return Sequential(layers, prefix), n_in


class SelfAttention(Layer):
    """
    Multi-head self-attention over a (batch, tokens, dim) input

    Scaled dot-product attention per head; head outputs are concatenated and
    projected back to ``dim``.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = 'attn'):
        super().__init__(name)
        if dim % heads:
            raise ValueError(f"heads ({heads}) must divide dim ({dim})")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        scale = np.sqrt(1.0 / dim)
        for key in ('q', 'k', 'v', 'o'):
            self.params[f'w_{key}'] = (rng.standard_normal((dim, dim)) * scale).astype(dtype)
            self.params[f'b_{key}'] = np.zeros(dim, dtype=dtype)
        self.zero_grad()
        self._cache = None

    def _split(self, x):
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def _merge(self, x):
        b, h, t, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * d)

    def forward(self, x, training=False):
        p = self.params
        q = self._split(x @ p['w_q'] + p['b_q'])
        k = self._split(x @ p['w_k'] + p['b_k'])
        v = self._split(x @ p['w_v'] + p['b_v'])
        scale = 1.0 / np.sqrt(self.head_dim)
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        scores = scores - scores.max(axis=-1, keepdims=True)
        weights = np.exp(scores)
        weights /= weights.sum(axis=-1, keepdims=True)
        context = self._merge(weights @ v)
        self._cache = (x, q, k, v, weights, context, scale)
        return context @ p['w_o'] + p['b_o']

    def backward(self, grad):
        x, q, k, v, weights, context, scale = self._cache
        p, g = self.params, self.grads
        dim = self.dim

        g['w_o'] += context.reshape(-1, dim).T @ grad.reshape(-1, dim)
        g['b_o'] += grad.reshape(-1, dim).sum(axis=0)
        d_context = self._split(grad @ p['w_o'].T)

        d_weights = d_context @ v.transpose(0, 1, 3, 2)
        d_v = weights.transpose(0, 1, 3, 2) @ d_context
        d_scores = weights * (d_weights - (d_weights * weights).sum(axis=-1, keepdims=True))
        d_q = (d_scores @ k) * scale
        d_k = (d_scores.transpose(0, 1, 3, 2) @ q) * scale

        d_x = np.zeros_like(x)
        flat_x = x.reshape(-1, dim)
        for key, d in (('q', d_q), ('k', d_k), ('v', d_v)):
            d = self._merge(d)
            g[f'w_{key}'] += flat_x.T @ d.reshape(-1, dim)
            g[f'b_{key}'] += d.reshape(-1, dim).sum(axis=0)
            d_x += d @ p[f'w_{key}'].T
        return d_x


class MultiBranch(Layer):
    """
    Parallel branches over contiguous input slices followed by fusion

    Without attention the branch outputs are concatenated and mapped to
    ``fusion_dim`` by a linear layer and ReLU. With attention each branch
    output is projected to ``fusion_dim``; the projections form a token
    sequence for self-attention, which is mean-pooled.
    """

    def __init__(self, slices: Sequence[Tuple[int, int]], branches: Sequence[Sequential],
                 branch_dims: Sequence[int], fusion_dim: int, attention: bool, heads: int,
                 rng: np.random.Generator, dtype=np.float32, name: str = 'branches'):
        super().__init__(name)
        self.slices = tuple(slices)
        self.branches = list(branches)
        self.attention = attention
        self.fusion_dim = fusion_dim
        if attention:
            self.projections = [Linear(d, fusion_dim, rng, dtype, f"proj.{b.name}")
                                for d, b in zip(branch_dims, self.branches)]
            self.attn = SelfAttention(fusion_dim, heads, rng, dtype)
            self.fusion = None
        else:
            self.projections = []
            self.attn = None
            self.fusion = Sequential([Linear(sum(branch_dims), fusion_dim, rng, dtype, 'fusion.linear'),
                                      ReLU('fusion.relu')], 'fusion')
        self._input_shape = None
        self._branch_dims = tuple(branch_dims)

    def children(self):
        extra = [self.attn] if self.attention else [self.fusion]
        return list(self.branches) + list(self.projections) + extra

    def forward(self, x, training=False):
        self._input_shape = x.shape
        outputs = [branch.forward(x[:, a:b], training) for (a, b), branch in zip(self.slices, self.branches)]
        if not self.attention:
            return self.fusion.forward(np.concatenate(outputs, axis=1), training)
        tokens = np.stack([proj.forward(out, training) for proj, out in zip(self.projections, outputs)], axis=1)
        return self.attn.forward(tokens, training).mean(axis=1)

    def backward(self, grad):
        d_x = np.zeros(self._input_shape, dtype=grad.dtype)
        if not self.attention:
            d_cat = self.fusion.backward(grad)
            bounds = np.cumsum((0,) + self._branch_dims)
            d_outputs = [d_cat[:, bounds[k]:bounds[k + 1]] for k in range(len(self.branches))]
        else:
            n_tokens = len(self.branches)
            d_tokens = np.repeat(grad[:, None, :] / n_tokens, n_tokens, axis=1)
            d_tokens = self.attn.backward(d_tokens)
            d_outputs = [proj.backward(d_tokens[:, k, :]) for k, proj in enumerate(self.projections)]
        for (a, b), branch, d_out in zip(self.slices, self.branches, d_outputs):
            d_x[:, a:b] += branch.backward(d_out)
        return d_x
