"""Minimal neural toolkit: MLPs with analytic backprop, a diagonal
Gaussian policy head, Adam, and flat-file checkpoints.

Networks are value objects.  Clone one per worker for parallel rollouts;
never mutate a single instance from two threads.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import _kernels as k

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

_LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_MAGIC = 928765.0  # arbitrary sentinel, stored as a float64


class Mlp:
    """Fully connected net, tanh on hidden layers, identity output."""

    def __init__(
        self,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        final_scale: float = 1.0,
    ):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = list(int(s) for s in layer_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(self.layer_sizes) - 2
        for i, (n_in, n_out) in enumerate(
            zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        ):
            scale = math.sqrt(1.0 / n_in)
            if i == last:
                scale *= final_scale
            self.weights.append(rng.normal(0.0, scale, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def clone(self) -> "Mlp":
        dup = object.__new__(Mlp)
        dup.layer_sizes = list(self.layer_sizes)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.layer_sizes[0]:
            raise ValueError(
                f"input width {x.shape[-1]} != expected {self.layer_sizes[0]}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        squeeze = x.ndim == 1
        a = np.atleast_2d(x)
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = k.dense_forward(np.ascontiguousarray(a), w, b)
            if i < n_layers - 1:
                a = np.tanh(a)
        return a[0] if squeeze else a

    def forward_full(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward that also returns per-layer activations
        (inputs first, post-tanh hidden activations, raw output last)
        for use by backward().
        """
        x = self._check_input(np.atleast_2d(x))
        activations = [np.ascontiguousarray(x)]
        a = activations[0]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = k.dense_forward(a, w, b)
            if i < n_layers - 1:
                a = np.tanh(a)
            activations.append(a)
        return activations[-1], activations

    def backward(
        self, activations: list[np.ndarray], output_grad: np.ndarray
    ) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. every parameter, given the
        loss gradient at the output.  Returns arrays interleaved as
        [dW0, db0, dW1, db1, ...] matching params().
        """
        dz = np.atleast_2d(np.asarray(output_grad, dtype=np.float64))
        if dz.shape[-1] != self.layer_sizes[-1]:
            raise ValueError(
                f"output grad width {dz.shape[-1]} != {self.layer_sizes[-1]}"
            )
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.weights))
        dz = np.ascontiguousarray(dz)
        for i in range(len(self.weights) - 1, -1, -1):
            x = activations[i]
            dx, dw, db = k.dense_backward(x, self.weights[i], dz)
            grads[2 * i] = dw
            grads[2 * i + 1] = db
            if i > 0:
                # activations[i] is the post-tanh output of layer i-1.
                dz = np.ascontiguousarray(k.tanh_backward(x, dx))
        return grads


class Adam:
    """Adam with bias correction over a list of parameter arrays."""

    def __init__(
        self,
        params: Sequence[np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros(p.size) for p in params]
        self._v = [np.zeros(p.size) for p in params]
        self._shapes = [p.shape for p in params]

    def step(
        self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]
    ) -> None:
        if len(params) != len(self._m):
            raise ValueError("parameter list changed size under the optimizer")
        self.t += 1
        for p, g, m, v, shape in zip(
            params, grads, self._m, self._v, self._shapes
        ):
            if p.shape != shape or g.shape != shape:
                raise ValueError(
                    f"shape mismatch: expected {shape}, "
                    f"got param {p.shape} grad {g.shape}"
                )
            k.adam_step(
                p.ravel(),
                np.ascontiguousarray(g, dtype=np.float64).ravel(),
                m,
                v,
                self.t,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
            )


class GaussianPolicy:
    """Diagonal Gaussian over actions; the mean comes from an MLP and
    the log standard deviations are free parameters shared across states.

    Actions are sampled unclamped so the log-probability matches the
    density of what was actually drawn; the environment adapter clamps
    to [-1, 1] afterwards.
    """

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        rng: np.random.Generator,
        hidden: Sequence[int] = (64, 64),
        init_log_std: float = -0.5,
    ):
        self.mean_net = Mlp(
            [obs_dim, *hidden, act_dim], rng, final_scale=0.01
        )
        self.log_std = np.full(act_dim, float(init_log_std))

    @property
    def act_dim(self) -> int:
        return self.log_std.size

    def clone(self) -> "GaussianPolicy":
        dup = object.__new__(GaussianPolicy)
        dup.mean_net = self.mean_net.clone()
        dup.log_std = self.log_std.copy()
        return dup

    def params(self) -> list[np.ndarray]:
        return self.mean_net.params() + [self.log_std]

    def effective_log_std(self) -> np.ndarray:
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def sample(
        self, obs: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Draw one action; returns (clamped, raw, log_prob of raw)."""
        mean = self.mean_net.forward(obs)
        log_std = self.effective_log_std()
        std = np.exp(log_std)
        raw = mean + std * rng.standard_normal(self.act_dim)
        logp = float(self._log_prob_single(raw, mean, log_std, std))
        return np.clip(raw, -1.0, 1.0), raw, logp

    @staticmethod
    def _log_prob_single(raw, mean, log_std, std) -> float:
        z = (raw - mean) / std
        return float(np.sum(-0.5 * z * z - log_std - 0.5 * _LOG_2PI))

    def log_prob(
        self, obs: np.ndarray, raw_actions: np.ndarray
    ) -> np.ndarray:
        """Batched log-density of previously sampled raw actions."""
        mean = self.mean_net.forward(np.atleast_2d(obs))
        log_std = self.effective_log_std()
        std = np.exp(log_std)
        z = (np.atleast_2d(raw_actions) - mean) / std
        return np.sum(-0.5 * z * z - log_std - 0.5 * _LOG_2PI, axis=-1)

    def entropy(self) -> float:
        """Differential entropy of the action distribution (state-free)."""
        log_std = self.effective_log_std()
        return float(np.sum(log_std + 0.5 * (_LOG_2PI + 1.0)))


def write_checkpoint(
    path: str, net: Mlp, log_std: np.ndarray | None = None
) -> None:
    """Flat little-endian float64 file: magic, layer count, layer sizes,
    log_std length, then weights/biases layer by layer, then log_std.
    """
    header = [CHECKPOINT_MAGIC, float(len(net.layer_sizes))]
    header += [float(s) for s in net.layer_sizes]
    header.append(float(0 if log_std is None else log_std.size))
    chunks = [np.array(header)]
    for w, b in zip(net.weights, net.biases):
        chunks.append(w.ravel())
        chunks.append(b)
    if log_std is not None:
        chunks.append(log_std)
    flat = np.concatenate(chunks).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(flat.tobytes())


def read_checkpoint(path: str) -> tuple[Mlp, np.ndarray | None]:
    with open(path, "rb") as fh:
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if flat.size < 4 or flat[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    n_layers = int(flat[1])
    layer_sizes = [int(s) for s in flat[2 : 2 + n_layers]]
    cursor = 2 + n_layers
    log_std_len = int(flat[cursor])
    cursor += 1

    net = object.__new__(Mlp)
    net.layer_sizes = layer_sizes
    net.weights = []
    net.biases = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = flat[cursor : cursor + n_in * n_out].reshape(n_in, n_out)
        cursor += n_in * n_out
        b = flat[cursor : cursor + n_out]
        cursor += n_out
        net.weights.append(np.array(w))
        net.biases.append(np.array(b))
    log_std = None
    if log_std_len:
        log_std = np.array(flat[cursor : cursor + log_std_len])
        cursor += log_std_len
    if cursor != flat.size:
        raise ValueError(f"checkpoint has {flat.size - cursor} trailing values")
    return net, log_std


def write_policy_checkpoint(path: str, policy: GaussianPolicy) -> None:
    write_checkpoint(path, policy.mean_net, policy.log_std)


def read_policy_checkpoint(path: str) -> GaussianPolicy:
    net, log_std = read_checkpoint(path)
    if log_std is None:
        raise ValueError(f"checkpoint at {path} has no policy head")
    policy = object.__new__(GaussianPolicy)
    policy.mean_net = net
    policy.log_std = log_std
    return policy
