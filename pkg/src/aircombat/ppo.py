"""Clipped-surrogate PPO over self-play engagements.

The learner controls one side, the opponent snapshot the other; only the
learner's transitions are stored. Rewards are the sparse terminal outcome
(+1 / -1 / 0) and nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engagement import (ACT_DIM, OBS_DIM, AgentAction, EngagementConfig, Side, observe, reset,
                         sample_initial_conditions, step)
from .netpolicy import (AdamState, PolicyParameters, actor_backward, adam_update, critic_backward,
                        entropy, forward_actor, forward_critic, log_prob, sample_action)


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 6
    minibatch: int = 1024
    vf_coef: float = 0.5
    ent_coef: float = 0.0
    actor_lr: float = 0.002
    critic_lr: float = 0.001
    n_steps: int = 8192
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lam must lie in (0, 1]")
        if self.epochs < 0 or self.minibatch < 1 or self.n_steps < 1:
            raise ValueError("epochs, minibatch and n_steps must be non-negative / positive")


@dataclass
class Learner:
    params: PolicyParameters
    actor_adam: AdamState
    critic_adam: AdamState

    @classmethod
    def fresh(cls, params: PolicyParameters) -> "Learner":
        return cls(params, AdamState.zeros_like(params.actor_tensors()),
                   AdamState.zeros_like(params.critic_tensors()))

    def copy(self) -> "Learner":
        return Learner(self.params.copy(), self.actor_adam.copy(), self.critic_adam.copy())


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    last_value: float = 0.0
    truncated: bool = False
    outcomes: list = field(default_factory=list)
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass
class TrainStats:
    surrogate: float = 0.0
    value_loss: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    entropy: float = 0.0


# -- collection -------------------------------------------------------------------------

def collect_rollouts(learner: PolicyParameters, opponent: PolicyParameters, intervals, n_steps: int,
                     rng: np.random.Generator, env_cfg: EngagementConfig = EngagementConfig(),
                     side: Side = Side.RED) -> RolloutBuffer:
    """Play episodes until ``n_steps`` learner decisions are stored.

    Each episode gets its own generators for the initial state and for
    each side's action noise, spawned from ``rng``.
    """
    obs = np.zeros((n_steps, OBS_DIM))
    actions = np.zeros((n_steps, ACT_DIM))
    logps = np.zeros(n_steps)
    values = np.zeros(n_steps)
    rewards = np.zeros(n_steps)
    dones = np.zeros(n_steps, dtype=bool)
    outcomes = []
    i = 0
    last_value, truncated = 0.0, False
    while i < n_steps:
        ic_rng, own_rng, opp_rng = rng.spawn(3)
        s = reset(sample_initial_conditions(intervals, ic_rng, env_cfg), ic_rng, env_cfg)
        while True:
            o = observe(s, side, env_cfg)
            d = forward_actor(learner, o)
            a, lp = sample_action(d, own_rng)
            obs[i], actions[i], logps[i] = o, a, lp
            values[i] = float(forward_critic(learner, o))
            oa, _ = sample_action(forward_actor(opponent, observe(s, side.other, env_cfg)), opp_rng)
            act, opp_act = AgentAction.from_vector(a), AgentAction.from_vector(oa)
            if side is Side.RED:
                s, out = step(s, act, opp_act, env_cfg)
            else:
                s, out = step(s, opp_act, act, env_cfg)
            i += 1
            if out is not None:
                rewards[i - 1] = out.reward(side)
                dones[i - 1] = True
                outcomes.append(out)
                break
            if i == n_steps:
                truncated = True
                last_value = float(forward_critic(learner, observe(s, side, env_cfg)))
                break
    return RolloutBuffer(obs, actions, logps, values, rewards, dones, last_value, truncated, outcomes)


# -- advantages ---------------------------------------------------------------------------

def compute_advantages(buf: RolloutBuffer, last_value: Optional[float] = None,
                       cfg: PpoConfig = PpoConfig()) -> RolloutBuffer:
    """GAE(gamma, lambda); fills ``buf.advantages`` and ``buf.returns`` (unnormalized)."""
    if last_value is None:
        last_value = buf.last_value
    T = len(buf)
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 0.0 if buf.dones[t] else 1.0
        next_v = last_value if t == T - 1 else buf.values[t + 1]
        delta = buf.rewards[t] + cfg.gamma * next_v * nonterminal - buf.values[t]
        running = delta + cfg.gamma * cfg.lam * nonterminal * running
        adv[t] = running
    buf.advantages = adv
    buf.returns = adv + buf.values
    return buf


# -- objective ------------------------------------------------------------------------

def clipped_surrogate(ratio, advantage, eps: float):
    """min(r * A, clip(r, 1 - eps, 1 + eps) * A), elementwise."""
    ratio = np.asarray(ratio)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


def ppo_loss_and_grads(p: PolicyParameters, obs, actions, old_log_probs, advantages, returns,
                       cfg: PpoConfig = PpoConfig()):
    """Scalar loss (negated surrogate + value loss - entropy bonus) and its gradients.

    Returns ``(loss, actor_grads, critic_grads, stats)`` where the gradient
    lists line up with :meth:`PolicyParameters.actor_tensors` and
    :meth:`PolicyParameters.critic_tensors`.
    """
    n = len(advantages)
    dist, a_cache = forward_actor(p, obs, cache=True)
    value, c_cache = forward_critic(p, obs, cache=True)
    actions = np.asarray(actions, dtype=p.dtype)
    adv = np.asarray(advantages, dtype=p.dtype)
    ret = np.asarray(returns, dtype=p.dtype)

    lp = log_prob(dist, actions)
    log_ratio = lp - np.asarray(old_log_probs, dtype=p.dtype)
    ratio = np.exp(log_ratio)
    surr = clipped_surrogate(ratio, adv, cfg.clip_eps)
    ent = entropy(dist)
    err = value - ret
    value_loss = float(np.mean(err * err))
    loss = -float(np.mean(surr)) + cfg.vf_coef * value_loss - cfg.ent_coef * ent

    # the unclipped branch is the active one unless clipping lowered the objective
    active = ratio * adv <= np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
    g_lp = np.where(active, -adv * ratio / n, 0.0).astype(p.dtype)
    var = dist.std * dist.std
    diff = actions - dist.mean
    g_mean = g_lp[:, None] * diff / var
    g_log_std = np.sum(g_lp[:, None] * (diff * diff / var - 1.0), axis=0) - cfg.ent_coef
    actor_grads = actor_backward(p, a_cache, g_mean) + [g_log_std.astype(p.dtype)]
    critic_grads = critic_backward(p, c_cache, (2.0 * cfg.vf_coef / n) * err)

    stats = TrainStats(
        surrogate=float(np.mean(surr)),
        value_loss=value_loss,
        approx_kl=float(np.mean((ratio - 1.0) - log_ratio)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)),
        entropy=ent,
    )
    return loss, actor_grads, critic_grads, stats


def ppo_update(learner: Learner, buf: RolloutBuffer, cfg: PpoConfig,
               rng: np.random.Generator) -> tuple[Learner, TrainStats]:
    """``cfg.epochs`` passes of shuffled minibatch Adam steps on one buffer.

    Raises :class:`NonFiniteLoss` if any minibatch loss is not finite; the
    ``learner`` passed in is never modified.
    """
    if buf.advantages is None:
        raise ValueError("compute_advantages must run before ppo_update")
    dtype = learner.params.dtype
    adv = buf.advantages
    if cfg.normalize_advantages and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    obs = buf.obs.astype(dtype)
    acts = buf.actions.astype(dtype)
    old = buf.log_probs.astype(dtype)
    adv = adv.astype(dtype)
    ret = buf.returns.astype(dtype)

    p, aa, ca = learner.params, learner.actor_adam, learner.critic_adam
    n = len(buf)
    totals = np.zeros(5)
    batches = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = order[start:start + cfg.minibatch]
            loss, ga, gc, st = ppo_loss_and_grads(p, obs[idx], acts[idx], old[idx], adv[idx],
                                                  ret[idx], cfg)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss = {loss}")
            new_a, aa = adam_update(p.actor_tensors(), ga, aa, cfg.actor_lr)
            new_c, ca = adam_update(p.critic_tensors(), gc, ca, cfg.critic_lr)
            p = p.with_tensors(new_a, new_c)
            totals += (st.surrogate, st.value_loss, st.approx_kl, st.clip_fraction, st.entropy)
            batches += 1
    if batches:
        p = p.with_tensors(p.actor_tensors(), p.critic_tensors(), version=p.version + 1)
    stats = TrainStats(*(totals / max(batches, 1)))
    return Learner(p, aa, ca), stats
