"""Dense feed-forward networks with hand-written backprop, plus Adam."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, OptimizerError, StateError

OUTPUTS = ("identity", "tanh")


def _views(flat: np.ndarray, shapes) -> list[np.ndarray]:
    out, start = [], 0
    for sh in shapes:
        size = int(np.prod(sh))
        out.append(flat[start:start + size].reshape(sh))
        start += size
    return out


class Mlp:
    """ReLU hidden layers; identity or tanh output.

    ``params`` is the flat list ``[W0, b0, W1, b1, ...]``; optimizers update
    the arrays in place.  ``forward`` caches the activations that
    ``backward`` and ``input_gradient`` consume, so call them right after the
    forward pass they refer to.
    """

    def __init__(self, sizes, output="identity", rng=None, dtype=np.float64):
        sizes = tuple(int(n) for n in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigurationError(f"bad layer sizes {sizes}")
        if output not in OUTPUTS:
            raise ConfigurationError(f"unknown output activation {output!r}")
        rng = np.random.default_rng() if rng is None else rng
        self.sizes = sizes
        self.output = output
        # all parameters live in one flat vector; ``params`` are views into it
        shapes = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.float32, np.float64):
            raise ConfigurationError(f"unsupported parameter dtype {self.dtype}")
        self.flat = np.empty(sum(int(np.prod(sh)) for sh in shapes), dtype=self.dtype)
        self.params = _views(self.flat, shapes)
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[2 * i][...] = rng.uniform(-bound, bound, (fan_in, fan_out))
            self.params[2 * i + 1][...] = rng.uniform(-bound, bound, fan_out)
        self._cache = None

    @property
    def n_layers(self):
        return len(self.sizes) - 1

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.sizes = self.sizes
        new.output = self.output
        new.dtype = self.dtype
        new.flat = self.flat.copy()
        new.params = _views(new.flat, [p.shape for p in self.params])
        new._cache = None
        return new

    def load(self, params):
        for dst, src in zip(self.params, params):
            if dst.shape != src.shape:
                raise ConfigurationError(f"parameter shape {src.shape} != {dst.shape}")
            dst[...] = src

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ConfigurationError(
                f"input shape {x.shape} does not match input width {self.sizes[0]}")
        inputs = []
        h = x
        last = self.n_layers - 1
        for i in range(self.n_layers):
            inputs.append(h)
            z = h @ self.params[2 * i]
            z += self.params[2 * i + 1]
            if i < last:
                h = np.maximum(z, 0.0, out=z)
            elif self.output == "tanh":
                h = np.tanh(z, out=z)
            else:
                h = z
        self._cache = (inputs, h)
        return h

    __call__ = forward

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass that leaves the backprop cache untouched."""
        cache = self._cache
        try:
            return self.forward(x)
        finally:
            self._cache = cache

    def _output_delta(self, grad_out):
        if self._cache is None:
            raise StateError("backward called without a cached forward pass")
        inputs, out = self._cache
        grad_out = np.asarray(grad_out, dtype=self.dtype)
        if grad_out.shape != out.shape:
            raise ConfigurationError(f"gradient shape {grad_out.shape} != output shape {out.shape}")
        if self.output == "tanh":
            grad_out = grad_out * (1.0 - out * out)
        return inputs, grad_out

    def backward(self, grad_out: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients given dLoss/dOutput of the cached batch."""
        inputs, delta = self._output_delta(grad_out)
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for i in reversed(range(self.n_layers)):
            grads[2 * i] = inputs[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                # inputs[i] is the ReLU output of layer i - 1
                delta = delta @ self.params[2 * i].T
                delta *= inputs[i] > 0
        return grads

    def input_gradient(self, grad_out: np.ndarray) -> np.ndarray:
        """dLoss/dInput of the cached batch (no parameter gradients)."""
        inputs, delta = self._output_delta(grad_out)
        for i in reversed(range(self.n_layers)):
            delta = delta @ self.params[2 * i].T
            if i > 0:
                delta *= inputs[i] > 0
        return delta


class Adam:
    """Adam over a fixed list of parameter arrays (updated in place).

    The moments are kept as one flat vector covering every parameter.
    """

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = (float(b) for b in betas)
        self.eps = float(eps)
        sizes = [p.size for p in self.params]
        self._bounds = np.cumsum([0] + sizes)
        dtype = np.result_type(*self.params) if self.params else np.float64
        self.m = np.zeros(self._bounds[-1], dtype=dtype)
        self.v = np.zeros(self._bounds[-1], dtype=dtype)
        self.t = 0

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise ConfigurationError("gradient list does not match parameter list")
        for g, p in zip(grads, self.params):
            if g.shape != p.shape:
                raise ConfigurationError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        g = np.concatenate([np.ravel(g) for g in grads]).astype(self.m.dtype, copy=False)
        if not np.isfinite(g).all():
            raise OptimizerError("non-finite gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        m, v = self.m, self.v
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        g *= g
        g *= 1.0 - b2
        v += g
        denom = np.sqrt(v / c2)
        denom += self.eps
        upd = m / denom
        upd *= self.lr / c1
        lo = self._bounds
        for k, p in enumerate(self.params):
            p -= upd[lo[k]:lo[k + 1]].reshape(p.shape)


def optimize_step(opt: Adam, grads) -> None:
    opt.step(grads)


def polyak_update(target_params, source_params, tau: float) -> None:
    """target <- (1 - tau) target + tau source, in place."""
    for t, s in zip(target_params, source_params):
        t *= 1.0 - tau
        t += tau * s
