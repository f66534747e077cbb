import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aircombat.curriculum import (FULL, CurriculumConfig, CurriculumIntervals, CurriculumState,
                                  NoHitsFound, OpponentPool, TestRecord, advance, evaluate,
                                  gate_passes, initial_state, intervals_from_hits, probe,
                                  probe_or_fallback, push_opponent, run_iteration)
from aircombat.netpolicy import init_params
from aircombat.ppo import Learner, PpoConfig


def small(seed=0):
    return init_params(np.random.default_rng(seed), hidden=(16, 16))


def test_bounding_box_of_hits():
    iv = intervals_from_hits([(-0.1, 0.2), (0.3, -0.4)])
    assert iv.as_tuple() == (-0.1, 0.3, -0.4, 0.2)


def test_single_hit_is_widened():
    iv = intervals_from_hits([(0.0, 0.1)], delta=0.1)
    assert iv.as_tuple() == pytest.approx((-0.05, 0.05, 0.05, 0.15))


def test_full_span_hits_complete_immediately():
    iv = intervals_from_hits([(-1.0, -1.0), (1.0, 1.0)])
    assert CurriculumState(iv).complete


def test_no_hits_raises():
    with pytest.raises(NoHitsFound):
        intervals_from_hits([])


def test_advance_example():
    cs = CurriculumState(CurriculumIntervals(-0.1, 0.3, -0.4, 0.2))
    cs2 = advance(cs, TestRecord(25, 8, 3))
    assert cs2.intervals.as_tuple() == pytest.approx((-0.2, 0.4, -0.5, 0.3), abs=1e-12)
    assert cs2.subtask_index == 1


def test_gate_needs_more_than_twenty():
    cs = CurriculumState(CurriculumIntervals(-0.1, 0.3, -0.4, 0.2))
    assert advance(cs, TestRecord(20, 0, 16)) == cs


def test_advance_clamps_and_completes():
    cs = advance(CurriculumState(CurriculumIntervals(-0.95, 1.0, -1.0, 1.0)), TestRecord(30, 2, 4))
    assert cs.intervals == FULL and cs.complete


def test_complete_is_absorbing():
    cs = CurriculumState(FULL, 5)
    assert advance(cs, TestRecord(36, 0, 0)) == cs


def test_schedule_reaches_full_square_in_nine_passes():
    cs = CurriculumState(CurriculumIntervals(-0.1, 0.3, -0.4, 0.2))
    passes = 0
    while cs.intervals.a_lo > -1.0 or cs.intervals.a_hi < 1.0:
        cs = advance(cs, TestRecord(30, 0, 6))
        passes += 1
    assert passes == math.ceil(max(0.9, 0.7) / 0.1 - 1e-9) == 9


unit = st.floats(-1, 1)


@st.composite
def intervals(draw):
    a = sorted((draw(unit), draw(unit)))
    b = sorted((draw(unit), draw(unit)))
    return CurriculumIntervals(a[0], a[1], b[0], b[1])


records = st.builds(TestRecord, st.integers(0, 36), st.integers(0, 36), st.integers(0, 36))


@settings(max_examples=2000, deadline=None)
@given(intervals(), records)
def test_gate_and_expansion_properties(iv, tr):
    cs = CurriculumState(iv)
    nxt = advance(cs, tr)
    passes = tr.wins > 20 and tr.wins > tr.losses
    assert gate_passes(tr) == passes
    if not passes or cs.complete:
        assert nxt == cs
        return
    assert nxt.intervals.contains(iv) and FULL.contains(nxt.intervals)
    assert nxt.intervals.a_lo == max(-1.0, round(iv.a_lo - 0.1, 12))
    assert nxt.intervals.b_hi == min(1.0, round(iv.b_hi + 0.1, 12))
    assert nxt.subtask_index == cs.subtask_index + 1


@settings(max_examples=500, deadline=None)
@given(intervals())
def test_completion_within_twenty_passes(iv):
    cs = CurriculumState(iv)
    for _ in range(20):
        cs = advance(cs, TestRecord(21, 0, 15))
    assert cs.complete


def test_pool_push_and_tags():
    pool = OpponentPool()
    p = small()
    push_opponent(pool, p, 0)
    assert len(pool) == 1
    push_opponent(pool, small(1), 3)
    with pytest.raises(ValueError):
        push_opponent(pool, p, 3)
    assert pool.tags == [0, 3]
    assert pool[0].checksum() == p.checksum() and pool[0] is not p


def test_pool_smaller_than_quota():
    pool = OpponentPool()
    for i in range(5):
        push_opponent(pool, small(i), i)
    tr = evaluate(small(9), pool, CurriculumState(), 36, 1, np.random.default_rng(0))
    assert len(tr.opponents_used) == 5 and tr.total == 5


def test_evaluation_partitions_and_preserves_pool():
    pool = OpponentPool()
    for i in range(8):
        push_opponent(pool, small(i), i)
    sums = [pool[i].checksum() for i in range(len(pool))]
    tr = evaluate(small(20), pool, CurriculumState(), 6, 3, np.random.default_rng(1))
    assert tr.wins + tr.losses + tr.draws == 18 == tr.total
    assert [pool[i].checksum() for i in range(len(pool))] == sums


def test_self_mirror_is_balanced():
    p = small(4)
    pool = push_opponent(OpponentPool(), p, 0)
    tr = evaluate(p, pool, CurriculumState(), 1, 40, np.random.default_rng(2), mirror=True)
    assert tr.total == 80 and tr.wins == tr.losses


def test_probe_is_deterministic():
    p = small(0)
    a = probe(p, 60, np.random.default_rng(5))
    b = probe(p, 60, np.random.default_rng(5))
    assert a == b
    iv, hits = a
    assert hits and all(iv.a_lo <= x <= iv.a_hi and iv.b_lo <= y <= iv.b_hi for x, y in hits)


def test_probe_fallback_is_logged(caplog):
    cfg = CurriculumConfig(fallback_half_width=0.1)
    with caplog.at_level(logging.WARNING):
        iv, hits = probe_or_fallback(small(), 0, np.random.default_rng(0), cfg=cfg)
    assert iv.as_tuple() == (-0.1, 0.1, -0.1, 0.1) and hits == []
    assert "no hits" in caplog.text


def test_disabled_curriculum_pins_full_square():
    cs, hits = initial_state(small(), np.random.default_rng(0), cfg=CurriculumConfig(enabled=False))
    assert cs.intervals == FULL and hits == []


TINY_PPO = PpoConfig(n_steps=128, minibatch=64, epochs=1)


def test_iteration_with_failing_gate_keeps_intervals():
    iv = CurriculumIntervals(-0.1, 0.3, -0.4, 0.2)
    cs = CurriculumState(iv)
    p = init_params(np.random.default_rng(0), hidden=(8, 8))
    learner = Learner.fresh(p)
    pool = push_opponent(OpponentPool(), p, 0)
    # at most 8 test bouts per iteration here, never more than 36 wins
    cfg = CurriculumConfig(win_threshold=36, episodes_per_opponent=2)
    for it in range(1, 4):
        learner, cs, tr, _ = run_iteration(learner, pool, cs, it, np.random.default_rng(it),
                                           ppo_cfg=TINY_PPO, cur_cfg=cfg)
    assert cs.intervals == iv and len(pool) == 4 and pool.tags == [0, 1, 2, 3]
    assert learner.params.version == 3


def test_iteration_with_passing_gate_widens():
    iv = CurriculumIntervals(-0.1, 0.3, -0.4, 0.2)
    p = init_params(np.random.default_rng(0), hidden=(8, 8))
    pool = push_opponent(OpponentPool(), p, 0)
    cfg = CurriculumConfig(win_threshold=-1)  # any record with wins > losses passes
    learner, cs, tr, _ = run_iteration(Learner.fresh(p), pool, CurriculumState(iv), 1,
                                       np.random.default_rng(0), ppo_cfg=TINY_PPO, cur_cfg=cfg)
    if tr.wins > tr.losses:
        assert cs.intervals.as_tuple() == pytest.approx((-0.2, 0.4, -0.5, 0.3))
    else:
        assert cs.intervals == iv
