"""Automatic curriculum over the initial aspect-angle / distance intervals.

A probe phase plays untrained self-play episodes over the whole normalized
square and keeps the bounding box of the starts that produced a missile hit.
Training starts inside that box; each time the learner passes the test gate
against past snapshots, every bound moves outward by ``delta`` until the box
covers [-1, 1] on both axes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engagement import (EngagementConfig, Result, Side, play_episode, reset,
                         sample_initial_conditions)
from .missile import MissileVerdict
from .netpolicy import PolicyParameters, make_actor
from .ppo import (Learner, NonFiniteLoss, PpoConfig, TrainStats, collect_rollouts,
                  compute_advantages, ppo_update)

log = logging.getLogger(__name__)


class NoHitsFound(RuntimeError):
    pass


@dataclass(frozen=True)
class CurriculumIntervals:
    a_lo: float = -1.0
    a_hi: float = 1.0
    b_lo: float = -1.0
    b_hi: float = 1.0

    def __post_init__(self):
        if not (-1.0 <= self.a_lo <= self.a_hi <= 1.0 and -1.0 <= self.b_lo <= self.b_hi <= 1.0):
            raise ValueError(f"invalid intervals {self}")

    @property
    def is_full(self) -> bool:
        return (self.a_lo, self.a_hi, self.b_lo, self.b_hi) == (-1.0, 1.0, -1.0, 1.0)

    def contains(self, other: "CurriculumIntervals") -> bool:
        return (self.a_lo <= other.a_lo and other.a_hi <= self.a_hi
                and self.b_lo <= other.b_lo and other.b_hi <= self.b_hi)

    def expanded(self, delta: float) -> "CurriculumIntervals":
        def lo(x):
            return max(-1.0, round(x - delta, 12))

        def hi(x):
            return min(1.0, round(x + delta, 12))

        return CurriculumIntervals(lo(self.a_lo), hi(self.a_hi), lo(self.b_lo), hi(self.b_hi))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a_lo, self.a_hi, self.b_lo, self.b_hi)


FULL = CurriculumIntervals()


@dataclass(frozen=True)
class CurriculumConfig:
    enabled: bool = True
    delta: float = 0.1
    win_threshold: int = 20
    n_probe: int = 1000
    fallback_half_width: float = 0.1
    n_opponents: int = 36
    episodes_per_opponent: int = 1


@dataclass(frozen=True)
class CurriculumState:
    intervals: CurriculumIntervals = FULL
    subtask_index: int = 0
    delta: float = 0.1

    @property
    def complete(self) -> bool:
        return self.intervals.is_full


@dataclass(frozen=True)
class TestRecord:
    __test__ = False  # not a pytest class

    wins: int = 0
    losses: int = 0
    draws: int = 0
    opponents_used: tuple = ()

    @property
    def total(self) -> int:
        return self.wins + self.losses + self.draws


@dataclass
class OpponentPool:
    entries: list = field(default_factory=list)  # (tag, PolicyParameters)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> PolicyParameters:
        return self.entries[i][1]

    @property
    def tags(self) -> list[int]:
        return [t for t, _ in self.entries]


def push_opponent(pool: OpponentPool, snapshot: PolicyParameters, tag: int) -> OpponentPool:
    if pool.entries and tag <= pool.entries[-1][0]:
        raise ValueError(f"tag {tag} not greater than last tag {pool.entries[-1][0]}")
    pool.entries.append((tag, snapshot.copy()))
    return pool


# -- probe ---------------------------------------------------------------------------

def intervals_from_hits(hits: list[tuple[float, float]], delta: float = 0.1) -> CurriculumIntervals:
    """Bounding box of the hit starts; zero-width axes are widened by +-delta/2."""
    if not hits:
        raise NoHitsFound("no probe episode produced a hit")
    a = [h[0] for h in hits]
    b = [h[1] for h in hits]

    def axis(lo, hi):
        if lo == hi:
            lo, hi = lo - delta / 2, hi + delta / 2
        return max(lo, -1.0), min(hi, 1.0)

    a_lo, a_hi = axis(min(a), max(a))
    b_lo, b_hi = axis(min(b), max(b))
    return CurriculumIntervals(a_lo, a_hi, b_lo, b_hi)


def probe(policy: PolicyParameters, n_sims: int, rng: np.random.Generator,
          env_cfg: EngagementConfig = EngagementConfig(),
          delta: float = 0.1) -> tuple[CurriculumIntervals, list[tuple[float, float]]]:
    """Self-play ``n_sims`` stochastic episodes from the full square.

    Raises :class:`NoHitsFound` when no episode ends with a missile hit.
    """
    hits = []
    for _ in range(n_sims):
        ic_rng, red_rng, blue_rng = rng.spawn(3)
        ic = sample_initial_conditions(FULL, ic_rng, env_cfg)
        s, _ = play_episode(reset(ic, ic_rng, env_cfg), make_actor(policy, red_rng),
                            make_actor(policy, blue_rng), env_cfg)
        if any(m is not None and m.status is MissileVerdict.HIT
               for m in (s.red_missile, s.blue_missile)):
            hits.append((ic.a, ic.b))
    return intervals_from_hits(hits, delta), hits


def probe_or_fallback(policy, n_sims, rng, env_cfg=EngagementConfig(),
                      cfg: CurriculumConfig = CurriculumConfig()):
    try:
        return probe(policy, n_sims, rng, env_cfg, cfg.delta)
    except NoHitsFound:
        w = cfg.fallback_half_width
        log.warning("probe found no hits in %d episodes; using [-%g, %g]^2", n_sims, w, w)
        return CurriculumIntervals(-w, w, -w, w), []


# -- gate -------------------------------------------------------------------------------

def gate_passes(tr: TestRecord, win_threshold: int = 20) -> bool:
    return tr.wins > win_threshold and tr.wins > tr.losses


def advance(cs: CurriculumState, tr: TestRecord, win_threshold: int = 20) -> CurriculumState:
    """Widen every bound by ``cs.delta`` if the test record passes the gate."""
    if cs.complete or not gate_passes(tr, win_threshold):
        return cs
    return replace(cs, intervals=cs.intervals.expanded(cs.delta), subtask_index=cs.subtask_index + 1)


# -- evaluation --------------------------------------------------------------------------

def _tally(result: Result, learner_side: Side) -> str:
    if result is Result.DRAW:
        return "draw"
    won = (result is Result.RED_WIN) == (learner_side is Side.RED)
    return "win" if won else "loss"


def evaluate(learner: PolicyParameters, pool: OpponentPool, cs: CurriculumState, n_opponents: int,
             episodes_per_opponent: int, rng: np.random.Generator,
             env_cfg: EngagementConfig = EngagementConfig(), mirror: bool = False) -> TestRecord:
    """Deterministic matches of the learner against sampled past snapshots.

    Opponents are drawn without replacement; starts come from the current
    intervals. With ``mirror`` each start is also replayed with the two
    policies exchanged.
    """
    if len(pool) == 0:
        raise ValueError("opponent pool is empty")
    k = min(n_opponents, len(pool))
    chosen = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
    counts = {"win": 0, "loss": 0, "draw": 0}
    me = make_actor(learner)
    for idx in chosen:
        opp = make_actor(pool[idx])
        for _ in range(episodes_per_opponent):
            ic = sample_initial_conditions(cs.intervals, rng, env_cfg)
            s0 = reset(ic, None, env_cfg)
            s, _ = play_episode(s0, me, opp, env_cfg)
            counts[_tally(s.outcome.result, Side.RED)] += 1
            if mirror:
                s, _ = play_episode(s0, opp, me, env_cfg)
                counts[_tally(s.outcome.result, Side.BLUE)] += 1
    return TestRecord(counts["win"], counts["loss"], counts["draw"],
                      tuple(pool.tags[i] for i in chosen))


# -- one ACRL iteration ----------------------------------------------------------------------

def run_iteration(learner: Learner, pool: OpponentPool, cs: CurriculumState, iteration: int,
                  rng: np.random.Generator, env_cfg: EngagementConfig = EngagementConfig(),
                  ppo_cfg: PpoConfig = PpoConfig(),
                  cur_cfg: CurriculumConfig = CurriculumConfig()):
    """Collect, update, snapshot, test and maybe widen the intervals.

    The learner plays red on even iterations and blue on odd ones.
    Returns ``(learner, curriculum_state, test_record, train_stats)``.
    """
    collect_rng, update_rng, eval_rng = rng.spawn(3)
    opponent = pool[int(collect_rng.integers(len(pool)))]
    side = Side.RED if iteration % 2 == 0 else Side.BLUE
    buf = collect_rollouts(learner.params, opponent, cs.intervals, ppo_cfg.n_steps, collect_rng,
                           env_cfg, side)
    compute_advantages(buf, buf.last_value, ppo_cfg)
    try:
        learner, stats = ppo_update(learner, buf, ppo_cfg, update_rng)
    except NonFiniteLoss as e:
        log.warning("iteration %d: %s; keeping pre-update parameters", iteration, e)
        stats = TrainStats(*(math.nan,) * 5)
    push_opponent(pool, learner.params, iteration)
    record = evaluate(learner.params, pool, cs, cur_cfg.n_opponents,
                      cur_cfg.episodes_per_opponent, eval_rng, env_cfg)
    if cur_cfg.enabled:
        cs = advance(cs, record, cur_cfg.win_threshold)
    return learner, cs, record, stats


def initial_state(policy: PolicyParameters, rng: np.random.Generator,
                  env_cfg: EngagementConfig = EngagementConfig(),
                  cfg: CurriculumConfig = CurriculumConfig()) -> tuple[CurriculumState, list]:
    """Probe-derived starting curriculum, or the full square when disabled."""
    if not cfg.enabled:
        return CurriculumState(FULL, 0, cfg.delta), []
    intervals, hits = probe_or_fallback(policy, cfg.n_probe, rng, env_cfg, cfg)
    return CurriculumState(intervals, 0, cfg.delta), hits
