"""Experiment drivers behind the command line: probe, train, duel, export.

Output layout of ``train``::

    <out>/resolved_config.cfg
    <out>/metrics.csv            one row per (run, iteration); deterministic
    <out>/summary.csv            mean/std across runs of wins, losses, draws
    <out>/run<k>/probe.json
    <out>/run<k>/metrics.csv
    <out>/run<k>/timing.csv      wall-clock seconds per iteration
    <out>/run<k>/state.json      last completed iteration and curriculum state
    <out>/run<k>/ckpt/iter<NNN>.acrl

Every random stream is derived from (seed, run, purpose[, iteration]), so a
resumed run reproduces an uninterrupted one exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, dump_config
from .curriculum import (CurriculumIntervals, CurriculumState, FULL, OpponentPool,
                         initial_state, push_opponent, run_iteration)
from .engagement import InitialConditions, Side, play_episode, reset, sample_initial_conditions
from .netpolicy import init_params, load_checkpoint, make_actor, save_checkpoint
from .ppo import Learner

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("run_id", "iteration", "subtask_index", "a_lo", "a_hi", "b_lo", "b_hi",
                   "wins", "losses", "draws", "surrogate", "value_loss", "clip_fraction",
                   "approx_kl", "entropy")

_INIT, _ITER, _PROBE = 0, 1, 2


def _rng(cfg: ExperimentConfig, run_id: int, purpose: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, run_id, purpose, *extra])


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_resolved_config(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.cfg").write_text(dump_config(cfg))


# -- probe ---------------------------------------------------------------------------------

def cmd_probe(cfg: ExperimentConfig, run_id: int = 0) -> dict:
    """Probe with the run's initial policy; writes ``probe.json`` under the run directory."""
    out = cfg.out
    write_resolved_config(cfg, out)
    params = init_params(_rng(cfg, run_id, _INIT), hidden=cfg.experiment.hidden)
    cs, hits = initial_state(params, _rng(cfg, run_id, _PROBE), cfg.env(), cfg.curriculum)
    report = {
        "n_sims": cfg.curriculum.n_probe if cfg.curriculum.enabled else 0,
        "intervals": dict(zip(("a_lo", "a_hi", "b_lo", "b_hi"), cs.intervals.as_tuple())),
        "fallback": cfg.curriculum.enabled and not hits,
        "hits": [{"a": a, "b": b} for a, b in hits],
    }
    run_dir = out / f"run{run_id}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "probe.json").write_text(json.dumps(report, indent=1))
    return report


# -- train ---------------------------------------------------------------------------------

@dataclass
class RunState:
    iteration: int
    intervals: tuple
    subtask_index: int
    pool_tags: list


def _ckpt(run_dir: Path, it: int) -> Path:
    return run_dir / "ckpt" / f"iter{it:03d}.acrl"


def _metrics_row(run_id, it, cs: CurriculumState, tr, st) -> list[str]:
    vals = [run_id, it, cs.subtask_index, *cs.intervals.as_tuple(), tr.wins, tr.losses, tr.draws,
            st.surrogate, st.value_loss, st.clip_fraction, st.approx_kl, st.entropy]
    return [_fmt(v) for v in vals]


def _read_rows(path: Path) -> list[list[str]]:
    if not path.exists():
        return []
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    return rows[1:]


def _write_rows(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(buf.getvalue())
    tmp.replace(path)


def _load_run(run_dir: Path, cfg: ExperimentConfig):
    st = json.loads((run_dir / "state.json").read_text())
    state = RunState(**st)
    pool = OpponentPool()
    for tag in state.pool_tags:
        p, _, _ = load_checkpoint(_ckpt(run_dir, tag))
        push_opponent(pool, p, tag)
    p, aa, ca = load_checkpoint(_ckpt(run_dir, state.iteration))
    cs = CurriculumState(CurriculumIntervals(*state.intervals), state.subtask_index,
                         cfg.curriculum.delta)
    return state.iteration, Learner(p, aa, ca), pool, cs


def train_run(cfg: ExperimentConfig, run_id: int, stop_after: Optional[int] = None) -> list[list[str]]:
    """Run (or resume) one seeded run; returns its metrics rows.

    ``stop_after`` ends the run early after that iteration, leaving a
    resumable state behind (used to exercise resume).
    """
    run_dir = cfg.out / f"run{run_id}"
    (run_dir / "ckpt").mkdir(parents=True, exist_ok=True)
    metrics_path, timing_path = run_dir / "metrics.csv", run_dir / "timing.csv"
    env = cfg.env()

    if (run_dir / "state.json").exists():
        start, learner, pool, cs = _load_run(run_dir, cfg)
        rows = _read_rows(metrics_path)[:start]
        timings = _read_rows(timing_path)[:start]
        log.info("run %d: resuming after iteration %d", run_id, start)
    else:
        params = init_params(_rng(cfg, run_id, _INIT), hidden=cfg.experiment.hidden)
        cs, hits = initial_state(params, _rng(cfg, run_id, _PROBE), env, cfg.curriculum)
        (run_dir / "probe.json").write_text(json.dumps(
            {"intervals": cs.intervals.as_tuple(), "hits": hits}, indent=1))
        learner = Learner.fresh(params)
        pool = push_opponent(OpponentPool(), params, 0)
        save_checkpoint(_ckpt(run_dir, 0), learner.params, learner.actor_adam, learner.critic_adam)
        start, rows, timings = 0, [], []

    for it in range(start + 1, cfg.experiment.iterations + 1):
        t0 = time.perf_counter()
        used = cs
        learner, cs, tr, st = run_iteration(learner, pool, cs, it, _rng(cfg, run_id, _ITER, it), env,
                                            cfg.ppo, cfg.curriculum)
        rows.append(_metrics_row(run_id, it, used, tr, st))
        timings.append([str(run_id), str(it), f"{time.perf_counter() - t0:.3f}"])
        save_checkpoint(_ckpt(run_dir, it), learner.params, learner.actor_adam, learner.critic_adam)
        _write_rows(metrics_path, METRICS_COLUMNS, rows)
        _write_rows(timing_path, ("run_id", "iteration", "wall_seconds"), timings)
        state = RunState(it, cs.intervals.as_tuple(), cs.subtask_index, pool.tags)
        (run_dir / "state.json").write_text(json.dumps(asdict(state)))
        log.info("run %d iter %d: W/L/D %d/%d/%d intervals %s", run_id, it, tr.wins, tr.losses,
                 tr.draws, cs.intervals.as_tuple())
        if stop_after is not None and it >= stop_after:
            break
    return rows


def summarize(rows: list[list[str]]) -> list[list[str]]:
    """Per-iteration mean and population std across runs of wins/losses/draws."""
    by_it: dict[int, list] = {}
    idx = {c: i for i, c in enumerate(METRICS_COLUMNS)}
    for r in rows:
        by_it.setdefault(int(r[idx["iteration"]]), []).append(r)
    out = []
    for it in sorted(by_it):
        rs = by_it[it]
        line = [str(it), str(len(rs))]
        for col in ("wins", "losses", "draws"):
            x = np.array([float(r[idx[col]]) for r in rs])
            line += [_fmt(x.mean()), _fmt(x.std())]
        out.append(line)
    return out


SUMMARY_COLUMNS = ("iteration", "runs", "wins_mean", "wins_std", "losses_mean", "losses_std",
                   "draws_mean", "draws_std")


def cmd_train(cfg: ExperimentConfig) -> list[list[str]]:
    write_resolved_config(cfg, cfg.out)
    rows = []
    for run_id in range(cfg.experiment.runs):
        rows += train_run(cfg, run_id)
    _write_rows(cfg.out / "metrics.csv", METRICS_COLUMNS, rows)
    _write_rows(cfg.out / "summary.csv", SUMMARY_COLUMNS, summarize(rows))
    return rows


# -- duel / export ----------------------------------------------------------------------------

def parse_intervals(text: Optional[str]) -> CurriculumIntervals:
    if not text:
        return FULL
    vals = [float(x) for x in text.split(",")]
    if len(vals) != 4:
        raise ValueError("intervals must be a_lo,a_hi,b_lo,b_hi")
    return CurriculumIntervals(*vals)


def cmd_duel(checkpoint_a, checkpoint_b, n_episodes: int, intervals: CurriculumIntervals,
             seed: int, cfg: ExperimentConfig = ExperimentConfig(), mirror: bool = True) -> dict:
    """Deterministic bouts of A against B, reported from A's side.

    With ``mirror``, episodes come in pairs sharing a start, the second
    with the two policies exchanged, so a policy against itself scores
    wins == losses.
    """
    pa, _, _ = load_checkpoint(checkpoint_a)
    pb, _, _ = load_checkpoint(checkpoint_b)
    env = cfg.env()
    rng = np.random.default_rng(seed)
    act_a, act_b = make_actor(pa), make_actor(pb)
    counts = {"wins": 0, "losses": 0, "draws": 0}
    lengths = []
    s0 = None
    for i in range(n_episodes):
        swap = mirror and i % 2 == 1
        if not swap:
            s0 = reset(sample_initial_conditions(intervals, rng, env), None, env)
            s, n = play_episode(s0, act_a, act_b, env)
            a_side = Side.RED
        else:
            s, n = play_episode(s0, act_b, act_a, env)
            a_side = Side.BLUE
        lengths.append(n)
        winner = s.outcome.winner()
        if winner is None:
            counts["draws"] += 1
        elif winner is a_side:
            counts["wins"] += 1
        else:
            counts["losses"] += 1
    return {"episodes": n_episodes, **counts,
            "mean_length": float(np.mean(lengths)) if lengths else 0.0}


def cmd_export(checkpoint, ic: InitialConditions, seed: int, path,
               cfg: ExperimentConfig = ExperimentConfig(), opponent=None) -> list[dict]:
    """One deterministic self-play episode written as JSON lines."""
    p, _, _ = load_checkpoint(checkpoint)
    q = p if opponent is None else load_checkpoint(opponent)[0]
    env = cfg.env()
    records: list[dict] = []
    play_episode(reset(ic, seed, env), make_actor(p), make_actor(q), env, record=records)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    return records


def read_trajectory(path) -> list[dict]:
    with Path(path).open() as f:
        return [json.loads(line) for line in f if line.strip()]

