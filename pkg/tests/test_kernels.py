import os
import subprocess
import sys

import numpy as np
import pytest

from e2cfd import _kernels as k


def rng():
    return np.random.default_rng(7)


def test_dense_forward_matches_numpy():
    r = rng()
    x = r.normal(size=(5, 3))
    w = r.normal(size=(3, 4))
    b = r.normal(size=4)
    out = k.dense_forward(x, w, b)
    assert out.shape == (5, 4)
    np.testing.assert_allclose(out, x @ w + b, rtol=1e-12)


def test_dense_backward_matches_numpy():
    r = rng()
    x = r.normal(size=(6, 3))
    w = r.normal(size=(3, 4))
    dz = r.normal(size=(6, 4))
    dx, dw, db = k.dense_backward(x, w, dz)
    np.testing.assert_allclose(dx, dz @ w.T, rtol=1e-12)
    np.testing.assert_allclose(dw, x.T @ dz, rtol=1e-12)
    np.testing.assert_allclose(db, dz.sum(axis=0), rtol=1e-12)


def test_tanh_backward():
    r = rng()
    a = np.tanh(r.normal(size=(4, 3)))
    da = r.normal(size=(4, 3))
    np.testing.assert_allclose(
        k.tanh_backward(a, da), da * (1 - a**2), rtol=1e-12
    )


def test_adam_step_first_update_magnitude():
    # With zero-initialized moments, the first step moves every parameter
    # by lr / (1 + eps/|g_hat|) ~ lr in the direction opposing the
    # gradient, independent of gradient magnitude.
    param = np.zeros(4)
    grad = np.array([0.5, -3.0, 10.0, -0.01])
    m = np.zeros(4)
    v = np.zeros(4)
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    k.adam_step(param, grad, m, v, 1, lr, b1, b2, eps)
    expected = -lr * np.sign(grad) / (1 + eps / np.abs(grad))
    np.testing.assert_allclose(param, expected, rtol=1e-9)


def test_adam_step_tracks_reference_loop():
    r = rng()
    param = r.normal(size=8)
    ref = param.copy()
    m = np.zeros(8)
    v = np.zeros(8)
    m_ref = np.zeros(8)
    v_ref = np.zeros(8)
    lr, b1, b2, eps = 3e-4, 0.9, 0.999, 1e-8
    for t in range(1, 6):
        grad = r.normal(size=8)
        k.adam_step(param, grad, m, v, t, lr, b1, b2, eps)
        m_ref = b1 * m_ref + (1 - b1) * grad
        v_ref = b2 * v_ref + (1 - b2) * grad**2
        mhat = m_ref / (1 - b1**t)
        vhat = v_ref / (1 - b2**t)
        ref = ref - lr * mhat / (np.sqrt(vhat) + eps)
    np.testing.assert_allclose(param, ref, rtol=1e-12)


def gae_reference(rewards, values, gamma, lam):
    n = len(rewards)
    deltas = [
        rewards[t] + gamma * values[t + 1] - values[t] for t in range(n)
    ]
    adv = np.zeros(n)
    for t in range(n):
        total = 0.0
        for j in range(t, n):
            total += (gamma * lam) ** (j - t) * deltas[j]
        adv[t] = total
    return adv


def test_gae_scan_matches_definition():
    r = rng()
    rewards = r.normal(size=12)
    values = r.normal(size=13)
    got = k.gae_scan(rewards, values, 0.99, 0.95)
    np.testing.assert_allclose(
        got, gae_reference(rewards, values, 0.99, 0.95), rtol=1e-10
    )


def test_gae_scan_single_step():
    rewards = np.array([2.0])
    values = np.array([0.5, 1.0])
    adv = k.gae_scan(rewards, values, 0.9, 0.95)
    assert adv[0] == pytest.approx(2.0 + 0.9 * 1.0 - 0.5)


def test_gae_scan_lambda_zero_is_td_error():
    r = rng()
    rewards = r.normal(size=20)
    values = r.normal(size=21)
    adv = k.gae_scan(rewards, values, 0.99, 0.0)
    deltas = rewards + 0.99 * values[1:] - values[:-1]
    np.testing.assert_allclose(adv, deltas, rtol=1e-12)


@pytest.mark.skipif(not k.HAVE_NUMBA, reason="compiled path unavailable")
def test_compiled_and_python_paths_agree():
    r = rng()
    x = r.normal(size=(32, 11))
    w = r.normal(size=(11, 16))
    b = r.normal(size=16)
    dz = r.normal(size=(32, 16))
    np.testing.assert_allclose(
        k.dense_forward(x, w, b),
        k.python_impl(k.dense_forward)(x, w, b),
        rtol=1e-12,
    )
    for got, want in zip(
        k.dense_backward(x, w, dz),
        k.python_impl(k.dense_backward)(x, w, dz),
    ):
        np.testing.assert_allclose(got, want, rtol=1e-12)

    rewards = r.normal(size=50)
    values = r.normal(size=51)
    np.testing.assert_allclose(
        k.gae_scan(rewards, values, 0.99, 0.95),
        k.python_impl(k.gae_scan)(rewards, values, 0.99, 0.95),
        rtol=1e-12,
    )

    p1 = r.normal(size=6)
    p2 = p1.copy()
    g = r.normal(size=6)
    s1 = [np.zeros(6), np.zeros(6)]
    s2 = [np.zeros(6), np.zeros(6)]
    k.adam_step(p1, g, s1[0], s1[1], 1, 1e-3, 0.9, 0.999, 1e-8)
    k.python_impl(k.adam_step)(p2, g, s2[0], s2[1], 1, 1e-3, 0.9, 0.999, 1e-8)
    np.testing.assert_allclose(p1, p2, rtol=1e-12)


def test_env_flag_disables_compilation():
    env = dict(os.environ, E2CFD_NO_NUMBA="1")
    code = (
        "from e2cfd import _kernels as k; "
        "assert not k.HAVE_NUMBA; "
        "import numpy as np; "
        "out = k.dense_forward(np.ones((2, 3)), np.ones((3, 2)), np.zeros(2)); "
        "assert out.shape == (2, 2) and float(out[0, 0]) == 3.0"
    )
    subprocess.run([sys.executable, "-c", code], check=True, env=env)
