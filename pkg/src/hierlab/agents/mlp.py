"""Small fully connected networks with hand-written backprop, plus Adam.

All parameters of a network live in one flat vector ``theta``; ``params`` are
views into it (``[W0, b0, W1, b1, ...]``). Optimiser steps, Polyak averaging
and finiteness checks therefore touch a single array.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """tanh hidden layers, linear output."""

    def __init__(self, sizes, rng: np.random.Generator | None = None, dtype=np.float64):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) <= 0:
            raise ValueError(f"invalid layer sizes {sizes}")
        self.sizes = sizes
        self.dtype = np.dtype(dtype)
        self.shapes = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.shapes += [(fan_in, fan_out), (fan_out,)]
        self._counts = [int(np.prod(s)) for s in self.shapes]
        self.theta = np.zeros(sum(self._counts), dtype=self.dtype)
        self.params = self._views(self.theta)
        if rng is not None:
            for i, (fan_in, _) in enumerate(zip(sizes[:-1], sizes[1:])):
                bound = 1.0 / np.sqrt(fan_in)
                for p in self.params[2 * i:2 * i + 2]:
                    p[...] = rng.uniform(-bound, bound, size=p.shape)

    def _views(self, flat: np.ndarray) -> list[np.ndarray]:
        out, k = [], 0
        for s, n in zip(self.shapes, self._counts):
            out.append(flat[k:k + n].reshape(s))
            k += n
        return out

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "Mlp":
        net = Mlp(self.sizes, dtype=self.dtype)
        net.theta[...] = self.theta
        return net

    def forward(self, x: np.ndarray, keep: bool = False):
        """Evaluate on a batch ``(n, in)`` or a single vector.

        With ``keep=True`` also returns the activations ``backward`` needs.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {x.shape[-1]}")
        acts = [x]
        h = x
        last = self.n_layers - 1
        p = self.params
        for i in range(self.n_layers):
            h = h @ p[2 * i]
            h += p[2 * i + 1]
            if i != last:
                np.tanh(h, out=h)
            acts.append(h)
        return (h, acts) if keep else h

    __call__ = forward

    def backward(self, acts, grad_out: np.ndarray, input_grad: bool = False):
        """Reverse-mode pass given ``dL/doutput``.

        Returns the flat parameter gradient (same layout as ``theta``) and, if
        requested, the gradient w.r.t. the input.
        """
        flat = np.empty_like(self.theta)
        grads = self._views(flat)
        g = np.asarray(grad_out, dtype=self.dtype)
        batched = g.ndim == 2
        for i in range(self.n_layers - 1, -1, -1):
            inp = acts[i]
            if batched:
                np.dot(inp.T, g, out=grads[2 * i])
                g.sum(axis=0, out=grads[2 * i + 1])
            else:
                np.outer(inp, g, out=grads[2 * i])
                grads[2 * i + 1][...] = g
            if i > 0 or input_grad:
                g = g @ self.params[2 * i].T
                if i > 0:
                    a = acts[i]
                    g *= 1.0 - a * a
        return (flat, g) if input_grad else flat

    def grad_list(self, flat: np.ndarray) -> list[np.ndarray]:
        return self._views(flat)


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def mlp_gradients(net: Mlp, x: np.ndarray, loss_grad) -> list[np.ndarray]:
    """Per-parameter gradients of a loss given as ``loss_grad(output) -> dL/doutput``."""
    out, acts = net.forward(x, keep=True)
    return net.grad_list(net.backward(acts, loss_grad(out)))


class Adam:
    """Adam on a flat parameter vector, updated in place."""

    def __init__(self, theta: np.ndarray, lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        self.theta = theta
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = np.zeros_like(theta)
        self.v = np.zeros_like(theta)
        self.t = 0

    def step(self, grad: np.ndarray) -> None:
        self.t += 1
        if self.lr == 0:
            return
        b1, b2 = self.b1, self.b2
        self.m *= b1
        self.m += (1.0 - b1) * grad
        self.v *= b2
        self.v += (1.0 - b2) * (grad * grad)
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        denom = np.sqrt(self.v / c2)
        denom += self.eps
        self.theta -= (self.lr / c1) * self.m / denom


def polyak(target: Mlp, online: Mlp, tau: float) -> None:
    """In place ``target <- (1 - tau) * target + tau * online``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.sizes != online.sizes:
        raise ValueError(f"shape mismatch: {target.sizes} vs {online.sizes}")
    if tau == 1.0:
        target.theta[...] = online.theta
    elif tau != 0.0:
        target.theta *= 1.0 - tau
        target.theta += tau * online.theta
