"""Actor-critic multilayer perceptrons in plain numpy.

The actor maps an observation to the mean of a diagonal Gaussian over the
four action channels (tanh on every layer, including the output); the
standard deviation is a learned, state-independent ``exp(log_std)``. The
critic is the same trunk with a linear scalar head. Gradients are written
out by hand; :func:`actor_backward` and :func:`critic_backward` take the
upstream gradient w.r.t. the network output.

Checkpoint layout (all little-endian)::

    b"ACRL" | u32 format | u32 version tag
    u32 n_actor_layers | (n+1) x u32 widths
    u32 n_critic_layers | (n+1) x u32 widths
    f32 actor W0 b0 W1 b1 ... | f32 log_std | f32 critic W0 b0 ...
    per network (actor, critic): u32 adam step | f32 first moments | f32 second moments
    u32 crc32 of everything above
"""

from __future__ import annotations

import io
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
MAGIC = b"ACRL"
FORMAT_VERSION = 1


class NonFiniteParameters(FloatingPointError):
    pass


class NonFiniteGradient(FloatingPointError):
    pass


class ChecksumMismatch(ValueError):
    pass


Layers = list  # list of (W, b); W has shape (fan_in, fan_out)


@dataclass
class PolicyParameters:
    actor: Layers
    critic: Layers
    log_std: np.ndarray
    version: int = 0

    @property
    def dtype(self):
        return self.log_std.dtype

    def actor_tensors(self) -> list[np.ndarray]:
        return [t for layer in self.actor for t in layer] + [self.log_std]

    def critic_tensors(self) -> list[np.ndarray]:
        return [t for layer in self.critic for t in layer]

    def with_tensors(self, actor: list[np.ndarray], critic: list[np.ndarray],
                     version: Optional[int] = None) -> "PolicyParameters":
        na, nc = len(self.actor), len(self.critic)
        return PolicyParameters(
            actor=[(actor[2 * i], actor[2 * i + 1]) for i in range(na)],
            critic=[(critic[2 * i], critic[2 * i + 1]) for i in range(nc)],
            log_std=actor[-1],
            version=self.version if version is None else version,
        )

    def copy(self) -> "PolicyParameters":
        return self.with_tensors([t.copy() for t in self.actor_tensors()],
                                 [t.copy() for t in self.critic_tensors()])

    def astype(self, dtype) -> "PolicyParameters":
        return self.with_tensors([t.astype(dtype) for t in self.actor_tensors()],
                                 [t.astype(dtype) for t in self.critic_tensors()])

    def widths(self, which: str) -> list[int]:
        layers = self.actor if which == "actor" else self.critic
        return [layers[0][0].shape[0]] + [W.shape[1] for W, _ in layers]

    def checksum(self) -> int:
        crc = 0
        for t in self.actor_tensors() + self.critic_tensors():
            crc = zlib.crc32(np.ascontiguousarray(t).tobytes(), crc)
        return crc


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, tensors: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(t) for t in tensors], [np.zeros_like(t) for t in tensors], 0)

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v], self.step)


@dataclass
class ActionDistribution:
    mean: np.ndarray
    std: np.ndarray

    @property
    def log_std(self) -> np.ndarray:
        return np.log(self.std)


def _init_layers(rng: np.random.Generator, widths: list[int], out_gain: float, dtype) -> Layers:
    layers = []
    for i, (fi, fo) in enumerate(zip(widths[:-1], widths[1:])):
        gain = out_gain if i == len(widths) - 2 else 1.0
        lim = gain / math.sqrt(fi)
        W = rng.uniform(-lim, lim, size=(fi, fo)).astype(dtype)
        layers.append((W, np.zeros(fo, dtype=dtype)))
    return layers


def init_params(rng: np.random.Generator, obs_dim: int = 11, hidden=(256, 256), act_dim: int = 4,
                log_std_init: float = -0.5, dtype=np.float32) -> PolicyParameters:
    return PolicyParameters(
        actor=_init_layers(rng, [obs_dim, *hidden, act_dim], 0.01, dtype),
        critic=_init_layers(rng, [obs_dim, *hidden, 1], 1.0, dtype),
        log_std=np.full(act_dim, log_std_init, dtype=dtype),
    )


# -- forward / backward -----------------------------------------------------------

def _forward(layers: Layers, x: np.ndarray, tanh_out: bool):
    acts = [x]
    h = x
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        h = h @ W + b
        if i < last or tanh_out:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def _backward(layers: Layers, acts: list, grad_out: np.ndarray, tanh_out: bool) -> list[np.ndarray]:
    grads: list[np.ndarray] = [None] * (2 * len(layers))
    g = grad_out
    last = len(layers) - 1
    for i in range(last, -1, -1):
        W, _ = layers[i]
        if i < last or tanh_out:
            g = g * (1.0 - acts[i + 1] ** 2)
        grads[2 * i] = acts[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = g @ W.T
    return grads


def forward_actor(p: PolicyParameters, obs: np.ndarray, cache: bool = False):
    x = np.asarray(obs, dtype=p.dtype)
    mean, acts = _forward(p.actor, x, tanh_out=True)
    if not np.all(np.isfinite(mean)):
        raise NonFiniteParameters("actor output is not finite")
    d = ActionDistribution(mean, np.exp(p.log_std))
    return (d, acts) if cache else d


def forward_critic(p: PolicyParameters, obs: np.ndarray, cache: bool = False):
    x = np.asarray(obs, dtype=p.dtype)
    out, acts = _forward(p.critic, x, tanh_out=False)
    if not np.all(np.isfinite(out)):
        raise NonFiniteParameters("critic output is not finite")
    value = out[..., 0]
    return (value, acts) if cache else value


def actor_backward(p: PolicyParameters, acts: list, grad_mean: np.ndarray) -> list[np.ndarray]:
    """Gradients for the actor trunk (without log_std) given dL/dmean."""
    return _backward(p.actor, acts, np.atleast_2d(grad_mean), tanh_out=True)


def critic_backward(p: PolicyParameters, acts: list, grad_value: np.ndarray) -> list[np.ndarray]:
    return _backward(p.critic, acts, np.asarray(grad_value).reshape(-1, 1), tanh_out=False)


# -- distribution -------------------------------------------------------------------

def log_prob(d: ActionDistribution, action: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log density, summed over the last axis."""
    z = (np.asarray(action) - d.mean) / d.std
    return np.sum(-0.5 * z * z - np.log(d.std) - 0.5 * LOG_2PI, axis=-1)


def entropy(d: ActionDistribution) -> float:
    return float(np.sum(np.log(d.std) + 0.5 * (LOG_2PI + 1.0)))


def sample_action(d: ActionDistribution, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw an unclamped action; the environment clamps it to [-1, 1]."""
    a = d.mean + d.std * rng.standard_normal(d.mean.shape)
    return a, float(log_prob(d, a))


def make_actor(p: PolicyParameters, rng: Optional[np.random.Generator] = None):
    """Observation -> action callable; the distribution mean when ``rng`` is None."""
    if rng is None:
        return lambda obs: forward_actor(p, obs).mean
    return lambda obs: sample_action(forward_actor(p, obs), rng)[0]


# -- Adam -------------------------------------------------------------------------

ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


def adam_update(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, lr: float,
                beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                eps: float = ADAM_EPS) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam step. Inputs are not modified."""
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameters")
    for g, p in zip(grads, params):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("gradient contains NaN or Inf")
    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = g.astype(p.dtype, copy=False)
        m = (beta1 * m + (1.0 - beta1) * g).astype(p.dtype)
        v = (beta2 * v + (1.0 - beta2) * g * g).astype(p.dtype)
        step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_p.append((p - step).astype(p.dtype))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


# -- checkpoint ----------------------------------------------------------------------

def _f32(t: np.ndarray) -> bytes:
    return np.ascontiguousarray(t, dtype="<f4").tobytes()


def dumps(p: PolicyParameters, actor_adam: Optional[AdamState] = None,
          critic_adam: Optional[AdamState] = None) -> bytes:
    actor_adam = actor_adam or AdamState.zeros_like(p.actor_tensors())
    critic_adam = critic_adam or AdamState.zeros_like(p.critic_tensors())
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, p.version))
    for which in ("actor", "critic"):
        widths = p.widths(which)
        buf.write(struct.pack(f"<I{len(widths)}I", len(widths) - 1, *widths))
    for t in p.actor_tensors() + p.critic_tensors():
        buf.write(_f32(t))
    for st in (actor_adam, critic_adam):
        buf.write(struct.pack("<I", st.step))
        for t in st.m + st.v:
            buf.write(_f32(t))
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def loads(data: bytes) -> tuple[PolicyParameters, AdamState, AdamState]:
    if len(data) < 16 or data[:4] != MAGIC:
        raise ValueError("not a checkpoint (bad magic)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("checkpoint checksum mismatch")
    fmt, version = struct.unpack_from("<II", body, 4)
    if fmt != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {fmt}")
    off = 12
    shapes = {}
    for which in ("actor", "critic"):
        (n,) = struct.unpack_from("<I", body, off)
        widths = struct.unpack_from(f"<{n + 1}I", body, off + 4)
        off += 4 * (n + 2)
        shapes[which] = [s for fi, fo in zip(widths[:-1], widths[1:]) for s in ((fi, fo), (fo,))]
    shapes["actor"].append((shapes["actor"][-1][0],))

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        t = np.frombuffer(body, dtype="<f4", count=count, offset=off).reshape(shape).astype(np.float32)
        off += 4 * count
        return t

    actor = [take(s) for s in shapes["actor"]]
    critic = [take(s) for s in shapes["critic"]]
    adams = []
    for which in ("actor", "critic"):
        (step,) = struct.unpack_from("<I", body, off)
        off += 4
        m = [take(s) for s in shapes[which]]
        v = [take(s) for s in shapes[which]]
        adams.append(AdamState(m, v, step))
    if off != len(body):
        raise ValueError("trailing bytes in checkpoint")
    na = (len(actor) - 1) // 2
    p = PolicyParameters(
        actor=[(actor[2 * i], actor[2 * i + 1]) for i in range(na)],
        critic=[(critic[2 * i], critic[2 * i + 1]) for i in range(len(critic) // 2)],
        log_std=actor[-1], version=version)
    return p, adams[0], adams[1]


def save_checkpoint(path, p: PolicyParameters, actor_adam: Optional[AdamState] = None,
                    critic_adam: Optional[AdamState] = None) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(p, actor_adam, critic_adam))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[PolicyParameters, AdamState, AdamState]:
    return loads(Path(path).read_bytes())
