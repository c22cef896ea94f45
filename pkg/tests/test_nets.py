import numpy as np
import pytest

from e2cfd.nets import (
    LOG_STD_MAX,
    Adam,
    GaussianPolicy,
    Mlp,
    read_checkpoint,
    read_policy_checkpoint,
    write_checkpoint,
    write_policy_checkpoint,
)


def test_zero_net_gives_zero_output():
    net = Mlp([3, 5, 2], np.random.default_rng(0))
    for w in net.weights:
        w[:] = 0.0
    out = net.forward(np.array([1.0, -2.0, 3.0]))
    np.testing.assert_array_equal(out, np.zeros(2))


def test_identity_linear_layer():
    net = Mlp([4, 4], np.random.default_rng(0))
    net.weights[0][:] = np.eye(4)
    net.biases[0][:] = 0.0
    x = np.array([0.5, -1.0, 2.0, 0.0])
    np.testing.assert_allclose(net.forward(x), x)


def test_forward_matches_reference():
    rng = np.random.default_rng(42)
    net = Mlp([2, 3, 1], rng)
    x = np.array([0.7, -0.3])
    expected = np.tanh(x @ net.weights[0] + net.biases[0])
    expected = expected @ net.weights[1] + net.biases[1]
    np.testing.assert_allclose(net.forward(x), expected, rtol=1e-12)


def test_forward_rejects_wrong_width():
    net = Mlp([3, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.zeros(4))


def test_backward_rejects_wrong_grad_width():
    net = Mlp([3, 2], np.random.default_rng(0))
    _, acts = net.forward_full(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        net.backward(acts, np.zeros((1, 3)))


def test_param_count():
    net = Mlp([4, 8, 2], np.random.default_rng(1))
    assert net.num_params == (4 * 8 + 8) + (8 * 2 + 2)


def loss_and_grads(net, x, upstream):
    out, acts = net.forward_full(x)
    loss = float(np.sum(out * upstream))
    return loss, net.backward(acts, upstream)


@pytest.mark.parametrize("seed", range(10))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = Mlp([4, 8, 2], rng)
    x = rng.normal(size=(3, 4))
    upstream = rng.normal(size=(3, 2))
    _, grads = loss_and_grads(net, x, upstream)

    h = 1e-5
    worst = 0.0
    for p, g in zip(net.params(), grads):
        flat = p.ravel()
        gflat = np.asarray(g).ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up, _ = loss_and_grads(net, x, upstream)
            flat[i] = keep - h
            down, _ = loss_and_grads(net, x, upstream)
            flat[i] = keep
            fd = (up - down) / (2 * h)
            rel = abs(gflat[i] - fd) / max(abs(fd), 1e-3)
            worst = max(worst, rel)
    assert worst < 1e-4


def test_backward_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(3)
    net = Mlp([4, 8, 2], rng)
    _, acts = net.forward_full(rng.normal(size=(5, 4)))
    grads = net.backward(acts, np.zeros((5, 2)))
    for g in grads:
        np.testing.assert_array_equal(g, np.zeros_like(g))


def test_backward_is_linear_in_upstream():
    rng = np.random.default_rng(4)
    net = Mlp([4, 8, 2], rng)
    x = rng.normal(size=(3, 4))
    upstream = rng.normal(size=(3, 2))
    _, acts = net.forward_full(x)
    once = net.backward(acts, upstream)
    twice = net.backward(acts, 2.0 * upstream)
    for a, b in zip(once, twice):
        np.testing.assert_allclose(2.0 * a, b, rtol=1e-12)


def test_adam_first_step_with_unit_gradient():
    rng = np.random.default_rng(5)
    net = Mlp([2, 2], rng)
    before = [p.copy() for p in net.params()]
    opt = Adam(net.params(), lr=1e-3)
    grads = [np.ones_like(p) for p in net.params()]
    opt.step(net.params(), grads)
    for b, p in zip(before, net.params()):
        delta = p - b
        np.testing.assert_allclose(
            delta, -1e-3 / (1 + 1e-8) * np.ones_like(delta), rtol=1e-9
        )


def test_adam_zero_gradient_leaves_params():
    rng = np.random.default_rng(6)
    net = Mlp([3, 3], rng)
    before = [p.copy() for p in net.params()]
    opt = Adam(net.params(), lr=0.1)
    opt.step(net.params(), [np.zeros_like(p) for p in net.params()])
    for b, p in zip(before, net.params()):
        np.testing.assert_array_equal(b, p)


def test_adam_two_steps_match_hand_computation():
    param = np.array([1.0])
    opt = Adam([param], lr=0.5, beta1=0.9, beta2=0.999, eps=1e-8)
    g1, g2 = np.array([2.0]), np.array([-1.0])

    m = 0.1 * 2.0
    v = 0.001 * 4.0
    x = 1.0 - 0.5 * (m / 0.1) / (np.sqrt(v / 0.001) + 1e-8)
    opt.step([param], [g1])
    np.testing.assert_allclose(param, [x], rtol=1e-12)

    m = 0.9 * m + 0.1 * (-1.0)
    v = 0.999 * v + 0.001 * 1.0
    mhat = m / (1 - 0.9**2)
    vhat = v / (1 - 0.999**2)
    x = x - 0.5 * mhat / (np.sqrt(vhat) + 1e-8)
    opt.step([param], [g2])
    np.testing.assert_allclose(param, [x], rtol=1e-12)


def test_adam_shape_mismatch():
    param = np.zeros((2, 2))
    opt = Adam([param], lr=0.1)
    with pytest.raises(ValueError):
        opt.step([param], [np.zeros(3)])


def test_policy_log_prob_integrates_to_one():
    rng = np.random.default_rng(7)
    policy = GaussianPolicy(3, 1, rng)
    obs = rng.normal(size=(1, 3))
    mean = float(policy.mean_net.forward(obs)[0, 0])
    std = float(np.exp(policy.effective_log_std()[0]))
    grid = np.linspace(mean - 8 * std, mean + 8 * std, 20001)
    density = np.exp(policy.log_prob(obs, grid.reshape(-1, 1)))
    dx = grid[1] - grid[0]
    integral = float(np.sum((density[1:] + density[:-1]) * 0.5 * dx))
    assert abs(integral - 1.0) < 1e-3


def test_policy_sample_log_prob_matches_density_of_raw_action():
    rng = np.random.default_rng(8)
    policy = GaussianPolicy(3, 2, rng)
    obs = rng.normal(size=3)
    clamped, raw, logp = policy.sample(obs, rng)
    assert np.all(np.abs(clamped) <= 1.0)
    recomputed = float(policy.log_prob(obs.reshape(1, -1), raw.reshape(1, -1))[0])
    assert logp == pytest.approx(recomputed, rel=1e-12)


def test_log_std_is_clamped():
    rng = np.random.default_rng(9)
    policy = GaussianPolicy(3, 2, rng)
    policy.log_std[:] = 10.0
    assert np.all(policy.effective_log_std() == LOG_STD_MAX)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    net = Mlp([4, 8, 2], rng)
    path = str(tmp_path / "net.ckpt")
    write_checkpoint(path, net)
    loaded, log_std = read_checkpoint(path)
    assert log_std is None
    assert loaded.layer_sizes == net.layer_sizes
    x = rng.normal(size=(5, 4))
    np.testing.assert_array_equal(loaded.forward(x), net.forward(x))


def test_policy_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    policy = GaussianPolicy(11, 2, rng)
    path = str(tmp_path / "policy.ckpt")
    write_policy_checkpoint(path, policy)
    loaded = read_policy_checkpoint(path)
    np.testing.assert_array_equal(loaded.log_std, policy.log_std)
    obs = rng.normal(size=(3, 11))
    np.testing.assert_array_equal(
        loaded.mean_net.forward(obs), policy.mean_net.forward(obs)
    )


def test_checkpoint_rejects_garbage(tmp_path):
    path = str(tmp_path / "junk.ckpt")
    with open(path, "wb") as fh:
        fh.write(b"\x00" * 64)
    with pytest.raises(ValueError):
        read_checkpoint(path)


def test_clone_is_independent():
    rng = np.random.default_rng(12)
    policy = GaussianPolicy(3, 2, rng)
    dup = policy.clone()
    dup.mean_net.weights[0][:] = 0.0
    dup.log_std[:] = 0.0
    assert not np.array_equal(
        dup.mean_net.weights[0], policy.mean_net.weights[0]
    )
    assert not np.array_equal(dup.log_std, policy.log_std)
