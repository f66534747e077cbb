import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aircombat.netpolicy import (AdamState, ActionDistribution, ChecksumMismatch,
                                 NonFiniteGradient, actor_backward, adam_update, critic_backward,
                                 dumps, entropy, forward_actor, forward_critic, init_params,
                                 load_checkpoint, loads, log_prob, make_actor, sample_action,
                                 save_checkpoint)


def small(seed=0, dtype=np.float64, hidden=(16, 16)):
    return init_params(np.random.default_rng(seed), hidden=hidden, dtype=dtype)


def zeroed(p):
    return p.with_tensors([np.zeros_like(t) for t in p.actor_tensors()],
                          [np.zeros_like(t) for t in p.critic_tensors()])


def test_default_shapes():
    p = init_params(np.random.default_rng(0))
    assert p.widths("actor") == [11, 256, 256, 4]
    assert p.widths("critic") == [11, 256, 256, 1]
    assert p.dtype == np.float32
    assert np.all(p.log_std == np.float32(-0.5))


def test_output_layer_init_is_small():
    p = init_params(np.random.default_rng(0))
    W_out = p.actor[-1][0]
    assert np.abs(W_out).max() <= 0.01 / math.sqrt(256)
    W_in = p.actor[0][0]
    assert np.abs(W_in).max() <= 1 / math.sqrt(11)


def test_zero_parameters_give_zero_outputs():
    p = zeroed(small())
    obs = np.random.default_rng(1).uniform(-1, 1, (5, 11))
    assert np.all(forward_actor(p, obs).mean == 0.0)
    assert np.all(forward_critic(p, obs) == 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=11, max_size=11), st.integers(0, 1000))
def test_outputs_bounded_and_finite(obs, seed):
    p = small(seed)
    # large weights still keep the tanh mean in range
    p = p.with_tensors([t * 50 for t in p.actor_tensors()[:-1]] + [p.log_std], p.critic_tensors())
    mean = forward_actor(p, np.array(obs)).mean
    assert np.all(np.abs(mean) <= 1.0)
    assert np.isfinite(forward_critic(p, np.array(obs)))


def _fd_check(p, which, loss_of, analytic, h=1e-5):
    tensors = p.actor_tensors()[:-1] if which == "actor" else p.critic_tensors()
    rng = np.random.default_rng(0)
    for k, (t, g) in enumerate(zip(tensors, analytic)):
        for _ in range(6):
            idx = tuple(rng.integers(s) for s in t.shape)
            old = t[idx]
            t[idx] = old + h
            up = loss_of()
            t[idx] = old - h
            down = loss_of()
            t[idx] = old
            fd = (up - down) / (2 * h)
            assert abs(fd - g[idx]) <= 1e-4 * max(abs(fd), abs(g[idx]), 1e-6), (which, k, idx)


def test_actor_jacobian_matches_finite_differences():
    p = small(3)
    p = p.with_tensors([t * 30 if t.ndim == 2 else t for t in p.actor_tensors()], p.critic_tensors())
    obs = np.random.default_rng(4).uniform(-1, 1, (7, 11))
    w = np.random.default_rng(5).normal(size=(7, 4))

    def loss():
        return float(np.sum(w * forward_actor(p, obs).mean))

    d, acts = forward_actor(p, obs, cache=True)
    _fd_check(p, "actor", loss, actor_backward(p, acts, w))


def test_critic_gradient_matches_finite_differences():
    p = small(6)
    obs = np.random.default_rng(7).uniform(-1, 1, (7, 11))
    w = np.random.default_rng(8).normal(size=7)

    def loss():
        return float(np.sum(w * forward_critic(p, obs)))

    v, acts = forward_critic(p, obs, cache=True)
    _fd_check(p, "critic", loss, critic_backward(p, acts, w))


def test_tiny_std_samples_the_mean():
    d = ActionDistribution(np.array([0.1, -0.2, 0.3, 0.0]), np.full(4, 1e-8))
    a, _ = sample_action(d, np.random.default_rng(0))
    assert a == pytest.approx(d.mean, abs=1e-6)


def test_log_prob_at_mode():
    std = np.array([0.5, 1.0, 2.0, 0.1])
    d = ActionDistribution(np.zeros(4), std)
    assert log_prob(d, d.mean) == pytest.approx(-np.sum(np.log(std * math.sqrt(2 * math.pi))))


@settings(max_examples=100)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4),
       st.lists(st.floats(-2, 2), min_size=4, max_size=4),
       st.lists(st.floats(-2, 1), min_size=4, max_size=4))
def test_log_prob_symmetric_and_matches_density(mean, x, log_std):
    mean, x, std = np.array(mean), np.array(x), np.exp(np.array(log_std))
    d = ActionDistribution(mean, std)
    assert log_prob(d, mean + x) == pytest.approx(log_prob(d, mean - x), rel=1e-12, abs=1e-12)
    density = np.prod(np.exp(-((x) ** 2) / (2 * std ** 2)) / (std * np.sqrt(2 * np.pi)))
    assert log_prob(d, mean + x) == pytest.approx(math.log(density), rel=1e-9, abs=1e-9)


def test_sample_mean_statistics():
    d = ActionDistribution(np.array([0.2, -0.4, 0.0, 0.9]), np.exp(np.full(4, -0.5)))
    rng = np.random.default_rng(9)
    n = 100_000
    samples = d.mean + d.std * rng.standard_normal((n, 4))
    # same sampler, vectorised: sample_action draws exactly this expression
    single, _ = sample_action(d, np.random.default_rng(9))
    assert single == pytest.approx(samples[0])
    assert np.all(np.abs(samples.mean(axis=0) - d.mean) < 3 * d.std / math.sqrt(n))


def test_entropy_formula():
    std = np.array([0.5, 1.0, 2.0, 0.3])
    d = ActionDistribution(np.zeros(4), std)
    assert entropy(d) == pytest.approx(np.sum(0.5 * np.log(2 * math.pi * math.e * std ** 2)))


def test_sampling_deterministic():
    p = small(0)
    obs = np.zeros(11)
    a1 = make_actor(p, np.random.default_rng(5))(obs)
    a2 = make_actor(p, np.random.default_rng(5))(obs)
    assert np.array_equal(a1, a2)
    assert np.array_equal(make_actor(p)(obs), forward_actor(p, obs).mean)


def test_adam_zero_gradient():
    params = [np.ones(3)]
    new, st_ = adam_update(params, [np.zeros(3)], AdamState.zeros_like(params), 0.1)
    assert np.array_equal(new[0], params[0]) and st_.step == 1


def test_adam_first_step_is_signed_lr():
    params = [np.zeros(4)]
    g = np.array([3.0, -0.5, 1e-3, -20.0])
    new, _ = adam_update(params, [g], AdamState.zeros_like(params), 0.01)
    assert new[0] == pytest.approx(-0.01 * np.sign(g), rel=1e-4)


def test_adam_constant_gradient_step_tends_to_lr():
    params = [np.zeros(2)]
    state = AdamState.zeros_like(params)
    g = [np.array([0.7, -4.0])]
    for _ in range(2000):
        prev = params[0].copy()
        params, state = adam_update(params, g, state, 0.001)
    assert np.abs(params[0] - prev) == pytest.approx(np.full(2, 0.001), rel=1e-6)


def test_adam_rejects_non_finite():
    params = [np.zeros(2)]
    with pytest.raises(NonFiniteGradient):
        adam_update(params, [np.array([np.nan, 0.0])], AdamState.zeros_like(params), 0.1)


def test_adam_does_not_mutate_inputs():
    params = [np.ones(3)]
    state = AdamState.zeros_like(params)
    adam_update(params, [np.ones(3)], state, 0.1)
    assert np.all(params[0] == 1.0) and state.step == 0 and np.all(state.m[0] == 0)


def test_checkpoint_round_trip(tmp_path):
    p = small(1, np.float32)
    aa = AdamState([t + 1 for t in p.actor_tensors()], [t + 2 for t in p.actor_tensors()], 7)
    ca = AdamState.zeros_like(p.critic_tensors())
    path = tmp_path / "c.acrl"
    save_checkpoint(path, p, aa, ca)
    q, qa, qc = load_checkpoint(path)
    for a, b in zip(p.actor_tensors() + p.critic_tensors(), q.actor_tensors() + q.critic_tensors()):
        assert a.dtype == b.dtype and np.array_equal(a, b)
    assert qa.step == 7 and all(np.array_equal(a, b) for a, b in zip(aa.m + aa.v, qa.m + qa.v))
    obs = np.random.default_rng(0).uniform(-1, 1, (4, 11)).astype(np.float32)
    assert np.array_equal(forward_actor(p, obs).mean, forward_actor(q, obs).mean)
    assert np.array_equal(forward_critic(p, obs), forward_critic(q, obs))
    assert dumps(q, qa, qc) == path.read_bytes()


def test_checkpoint_corruption_detected():
    data = bytearray(dumps(small(2, np.float32)))
    data[40] ^= 0x01
    with pytest.raises(ChecksumMismatch):
        loads(bytes(data))
    with pytest.raises(ValueError):
        loads(b"XXXX" + bytes(data[4:]))
