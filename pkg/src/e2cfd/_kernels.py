"""Numerical kernels, jitted when numba is available and enabled.

Every kernel is written as a vectorized numpy function, so the same
source serves two execution paths: compiled via numba.njit, or plain
numpy when numba is missing or the E2CFD_NO_NUMBA environment variable
is set to anything but "" / "0".  Jitted functions keep their original
Python implementation reachable as ``fn.py_func``, which is what the
benchmark and the agreement tests compare against.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("E2CFD_NO_NUMBA", "")
NUMBA_REQUESTED = _flag in ("", "0")

try:
    if not NUMBA_REQUESTED:
        raise ImportError("disabled by E2CFD_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def dense_forward(x, w, b):
    """Affine layer: (n, i) @ (i, o) + (o,) -> (n, o)."""
    return np.dot(x, w) + b


@njit(cache=True)
def dense_backward(x, w, dz):
    """Gradients of an affine layer given upstream dz of shape (n, o).

    Returns (dx, dw, db).  Transposes are copied to contiguous storage
    because the compiled matmul requires it.
    """
    dw = np.dot(np.ascontiguousarray(x.T), dz)
    db = np.sum(dz, axis=0)
    dx = np.dot(dz, np.ascontiguousarray(w.T))
    return dx, dw, db


@njit(cache=True)
def tanh_backward(activation, da):
    """Chain rule through tanh given the forward activation values."""
    return da * (1.0 - activation * activation)


@njit(cache=True)
def adam_step(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One fused Adam update, in place, on flat float64 arrays."""
    m[:] = beta1 * m + (1.0 - beta1) * grad
    v[:] = beta2 * v + (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


@njit(cache=True)
def gae_scan(rewards, values, gamma, lam):
    """Generalized advantage estimates for one episode.

    values carries one bootstrap entry beyond the rewards, so its length
    is len(rewards) + 1; the final entry is the value of the state the
    episode ended in (0 for terminal states).
    """
    n = rewards.shape[0]
    adv = np.empty(n, dtype=np.float64)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
    return adv


KERNELS = (dense_forward, dense_backward, tanh_backward, adam_step, gae_scan)


def python_impl(fn):
    """The uncompiled implementation behind a kernel."""
    return getattr(fn, "py_func", fn)
