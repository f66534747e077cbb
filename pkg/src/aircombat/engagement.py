"""One-versus-one engagement: launch gating, termination, reward and observations.

Both sides are advanced by identical code from the same pre-step snapshot, so
swapping the red and blue states (and their action streams) swaps the
outcome labels exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .flightdyn import (AircraftState, GroundImpact, PhysicsConfig, clamp_controls,
                        step_aircraft, wrap_angle)
from .missile import (MissileConfig, MissileState, MissileVerdict, advance_missile,
                      check_fuze, launch, off_boresight)

OBS_DIM = 11
ACT_DIM = 4
OBS_NAMES = ("phi", "gamma", "v", "z", "d", "f1", "phi1", "gamma1", "d1", "hca", "f2")


class AlreadyFired(RuntimeError):
    pass


class SteppedAfterTerminal(RuntimeError):
    pass


class Side(enum.Enum):
    RED = "red"
    BLUE = "blue"

    @property
    def other(self) -> "Side":
        return Side.BLUE if self is Side.RED else Side.RED


class Result(enum.Enum):
    RED_WIN = "red_win"
    BLUE_WIN = "blue_win"
    DRAW = "draw"


class Reason(enum.Enum):
    FUZE = "fuze"
    BOTH_MISSED = "both_missed"
    TIMEOUT = "timeout"
    GROUND_IMPACT = "ground_impact"


@dataclass(frozen=True)
class Outcome:
    result: Result
    reason: Reason

    @property
    def reward_red(self) -> int:
        return {Result.RED_WIN: 1, Result.BLUE_WIN: -1, Result.DRAW: 0}[self.result]

    @property
    def reward_blue(self) -> int:
        return -self.reward_red

    def reward(self, side: Side) -> int:
        return self.reward_red if side is Side.RED else self.reward_blue

    def winner(self) -> Optional[Side]:
        return {Result.RED_WIN: Side.RED, Result.BLUE_WIN: Side.BLUE}.get(self.result)

    def swapped(self) -> "Outcome":
        flip = {Result.RED_WIN: Result.BLUE_WIN, Result.BLUE_WIN: Result.RED_WIN,
                Result.DRAW: Result.DRAW}
        return Outcome(flip[self.result], self.reason)


@dataclass(frozen=True)
class EngagementConfig:
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    missile: MissileConfig = field(default_factory=MissileConfig)
    decision_substeps: int = 10
    t_max: float = 100.0
    dist_min: float = 4000.0
    dist_max: float = 16000.0
    alt_min: float = 3000.0
    alt_max: float = 9000.0
    # observation normalization bounds
    obs_d_max: float = 20000.0
    obs_z_max: float = 15000.0

    @property
    def decision_dt(self) -> float:
        return self.decision_substeps * self.physics.dt

    @property
    def max_decisions(self) -> int:
        return math.ceil(round(self.t_max / self.decision_dt, 9))


@dataclass(frozen=True)
class InitialConditions:
    a: float
    b: float
    v_red: Optional[float] = None
    v_blue: Optional[float] = None
    z_red: Optional[float] = None
    z_blue: Optional[float] = None

    def angle(self) -> float:
        """Denormalized aspect angle in radians, [-pi, pi]."""
        return self.a * math.pi

    def distance(self, cfg: EngagementConfig) -> float:
        return cfg.dist_min + (self.b + 1.0) / 2.0 * (cfg.dist_max - cfg.dist_min)


@dataclass(frozen=True)
class AgentAction:
    controls_raw: tuple[float, float, float]
    fire_raw: float

    @property
    def fire(self) -> bool:
        return self.fire_raw > 0.0

    @classmethod
    def from_vector(cls, a: Sequence[float]) -> "AgentAction":
        v = [min(max(float(x), -1.0), 1.0) for x in a]
        return cls((v[0], v[1], v[2]), v[3])


@dataclass(frozen=True)
class EngagementState:
    red: AircraftState
    blue: AircraftState
    red_missile: Optional[MissileState] = None
    blue_missile: Optional[MissileState] = None
    red_fired: bool = False
    blue_fired: bool = False
    ticks: int = 0
    t: float = 0.0
    outcome: Optional[Outcome] = None

    def aircraft(self, side: Side) -> AircraftState:
        return self.red if side is Side.RED else self.blue

    def missile(self, side: Side) -> Optional[MissileState]:
        return self.red_missile if side is Side.RED else self.blue_missile

    def fired(self, side: Side) -> bool:
        return self.red_fired if side is Side.RED else self.blue_fired

    def swapped(self) -> "EngagementState":
        return EngagementState(
            self.blue, self.red, self.blue_missile, self.red_missile,
            self.blue_fired, self.red_fired, self.ticks, self.t,
            None if self.outcome is None else self.outcome.swapped(),
        )


# -- initial conditions -------------------------------------------------------

def sample_initial_conditions(intervals, rng: np.random.Generator,
                              cfg: EngagementConfig = EngagementConfig()) -> InitialConditions:
    """Draw (a, b) uniformly from ``intervals`` plus speeds and altitudes."""
    a = float(rng.uniform(intervals.a_lo, intervals.a_hi))
    b = float(rng.uniform(intervals.b_lo, intervals.b_hi))
    p = cfg.physics
    v_red, v_blue = (float(x) for x in rng.uniform(p.v_min, p.v_max, size=2))
    z_red, z_blue = (float(x) for x in rng.uniform(cfg.alt_min, cfg.alt_max, size=2))
    return InitialConditions(a, b, v_red, v_blue, z_red, z_blue)


def reset(ic: InitialConditions, seed=None,
          cfg: EngagementConfig = EngagementConfig()) -> EngagementState:
    """Place red at the origin heading +x and blue at bearing ``ic.angle()``.

    Blue's heading mirrors red's view: red sits at the same absolute
    off-nose angle from blue, so angle 0 is head-on and +-180 deg is
    tail-to-tail. Unset speeds/altitudes are drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    p = cfg.physics
    v = rng.uniform(p.v_min, p.v_max, size=2)
    z = rng.uniform(cfg.alt_min, cfg.alt_max, size=2)
    v_red = float(v[0]) if ic.v_red is None else ic.v_red
    v_blue = float(v[1]) if ic.v_blue is None else ic.v_blue
    z_red = float(z[0]) if ic.z_red is None else ic.z_red
    z_blue = float(z[1]) if ic.z_blue is None else ic.z_blue
    theta = ic.angle()
    d = ic.distance(cfg)
    red = AircraftState(0.0, 0.0, z_red, v_red, 0.0, 0.0)
    blue = AircraftState(d * math.cos(theta), d * math.sin(theta), z_blue, v_blue, 0.0,
                         wrap_angle(math.pi + 2.0 * theta))
    return EngagementState(red, blue)


# -- observation ---------------------------------------------------------------

def _norm(x: float, lo: float, hi: float) -> float:
    return min(max(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0), 1.0)


def observe(s: EngagementState, side: Side, cfg: EngagementConfig = EngagementConfig()) -> np.ndarray:
    """11-element observation from ``side``'s point of view, each in [-1, 1]."""
    own, opp = s.aircraft(side), s.aircraft(side.other)
    p = cfg.physics
    pi, hpi = math.pi, math.pi / 2
    d = math.dist(own.position(), opp.position())
    m = s.missile(side)
    if m is not None and m.active:
        f1 = 1.0
        phi1 = _norm(m.phi_m, -pi, pi)
        gamma1 = _norm(m.gamma_m, -hpi, hpi)
        d1 = _norm(math.dist(m.position(), opp.position()), 0.0, cfg.obs_d_max)
    else:
        f1 = phi1 = gamma1 = d1 = -1.0
        # sentinel for absent missile
    m2 = s.missile(side.other)
    f2 = 1.0 if (m2 is not None and m2.active) else -1.0
    return np.array([
        _norm(own.phi, -pi, pi),
        _norm(own.gamma, -hpi, hpi),
        _norm(own.v, p.v_min, p.v_max),
        _norm(own.z, 0.0, cfg.obs_z_max),
        _norm(d, 0.0, cfg.obs_d_max),
        f1, phi1, gamma1, d1,
        _norm(wrap_angle(opp.phi - own.phi), -pi, pi),
        f2,
    ])


# -- launch and step -----------------------------------------------------------

def try_launch(s: EngagementState, side: Side,
               cfg: EngagementConfig = EngagementConfig()) -> tuple[EngagementState, bool]:
    """Fire ``side``'s single missile. Returns the new state and whether it is live.

    Outside the off-axis cone the missile is created already missed.
    """
    if s.fired(side):
        raise AlreadyFired(side.value)
    shooter, target = s.aircraft(side), s.aircraft(side.other)
    m = launch(shooter.position(), shooter.v, shooter.gamma, shooter.phi, target.position())
    off = off_boresight(shooter.velocity(), shooter.position(), target.position())
    live = off <= math.radians(cfg.missile.off_axis_deg)
    if not live:
        m = replace(m, status=MissileVerdict.MISSED)
    if side is Side.RED:
        s = replace(s, red_missile=m, red_fired=True)
    else:
        s = replace(s, blue_missile=m, blue_fired=True)
    return s, live


def _advance_aircraft(a: AircraftState, controls, p: PhysicsConfig) -> tuple[AircraftState, bool]:
    try:
        return step_aircraft(a, controls, p), False
    except GroundImpact as e:
        return e.state, True


def _advance_missile(m: Optional[MissileState], target: AircraftState, target_next: AircraftState,
                     cfg: EngagementConfig) -> Optional[MissileState]:
    if m is None or not m.active:
        return m
    m = advance_missile(m, cfg.missile, cfg.physics.dt, target.position(), target_next.position(),
                        target.velocity(), target.gamma)
    verdict = check_fuze(m, cfg.missile)
    return m if verdict is MissileVerdict.IN_FLIGHT else replace(m, status=verdict)


def _hit(m: Optional[MissileState]) -> bool:
    return m is not None and m.status is MissileVerdict.HIT


def _missed(m: Optional[MissileState]) -> bool:
    return m is not None and m.status is MissileVerdict.MISSED


def _terminal(s: EngagementState, red_crash: bool, blue_crash: bool,
              cfg: EngagementConfig) -> Optional[Outcome]:
    red_scores, blue_scores = _hit(s.red_missile), _hit(s.blue_missile)
    if red_scores or blue_scores:
        if red_scores and blue_scores:
            return Outcome(Result.DRAW, Reason.FUZE)
        return Outcome(Result.RED_WIN if red_scores else Result.BLUE_WIN, Reason.FUZE)
    if red_crash or blue_crash:
        if red_crash and blue_crash:
            return Outcome(Result.DRAW, Reason.GROUND_IMPACT)
        return Outcome(Result.BLUE_WIN if red_crash else Result.RED_WIN, Reason.GROUND_IMPACT)
    if _missed(s.red_missile) and _missed(s.blue_missile):
        return Outcome(Result.DRAW, Reason.BOTH_MISSED)
    if s.t >= cfg.t_max - 1e-9:
        return Outcome(Result.DRAW, Reason.TIMEOUT)
    return None


def physics_tick(s: EngagementState, red_controls, blue_controls,
                 cfg: EngagementConfig = EngagementConfig()) -> EngagementState:
    """Advance aircraft and missiles by one physics step and set the outcome if terminal."""
    p = cfg.physics
    red, red_crash = _advance_aircraft(s.red, red_controls, p)
    blue, blue_crash = _advance_aircraft(s.blue, blue_controls, p)
    red_missile = _advance_missile(s.red_missile, s.blue, blue, cfg)
    blue_missile = _advance_missile(s.blue_missile, s.red, red, cfg)
    ticks = s.ticks + 1
    s = replace(s, red=red, blue=blue, red_missile=red_missile, blue_missile=blue_missile,
                ticks=ticks, t=round(ticks * p.dt, 9))
    out = _terminal(s, red_crash, blue_crash, cfg)
    return s if out is None else replace(s, outcome=out)


def step(s: EngagementState, act_red: AgentAction, act_blue: AgentAction,
         cfg: EngagementConfig = EngagementConfig()) -> tuple[EngagementState, Optional[Outcome]]:
    """One decision period: launches, then ``decision_substeps`` physics ticks."""
    if s.outcome is not None:
        raise SteppedAfterTerminal(str(s.outcome))
    pre = s
    if act_red.fire and not pre.red_fired:
        s, _ = try_launch(s, Side.RED, cfg)
    if act_blue.fire and not pre.blue_fired:
        s, _ = try_launch(s, Side.BLUE, cfg)
    rc = clamp_controls(act_red.controls_raw, cfg.physics)
    bc = clamp_controls(act_blue.controls_raw, cfg.physics)
    # an off-axis launch by both sides ends the episode before any motion
    out = _terminal(s, False, False, cfg) if s.t < cfg.t_max else None
    if out is not None:
        return replace(s, outcome=out), out
    for _ in range(cfg.decision_substeps):
        s = physics_tick(s, rc, bc, cfg)
        if s.outcome is not None:
            break
    return s, s.outcome


# -- episodes and trajectory records ----------------------------------------------

Actor = Callable[[np.ndarray], np.ndarray]
TRAJECTORY_SCHEMA = 1


def _aircraft_record(a: AircraftState) -> dict:
    return {"x": a.x, "y": a.y, "z": a.z, "v": a.v, "gamma": a.gamma, "phi": a.phi}


def _missile_record(m: Optional[MissileState]) -> Optional[dict]:
    if m is None:
        return None
    return {"x": m.x_m, "y": m.y_m, "z": m.z_m, "v": m.v_m, "gamma": m.gamma_m,
            "phi": m.phi_m, "t_flight": m.t_flight,
            "min_approach": None if math.isinf(m.min_approach) else m.min_approach,
            "status": m.status.value}


def trajectory_record(s: EngagementState, act_red: AgentAction, act_blue: AgentAction,
                      after: EngagementState) -> dict:
    """One line of the trajectory export: pre-step state, actions, ticks run."""
    rec = {
        "schema": TRAJECTORY_SCHEMA,
        "t": s.t,
        "red": _aircraft_record(s.red),
        "blue": _aircraft_record(s.blue),
        "red_missile": _missile_record(s.red_missile),
        "blue_missile": _missile_record(s.blue_missile),
        "action_red": [*act_red.controls_raw, act_red.fire_raw],
        "action_blue": [*act_blue.controls_raw, act_blue.fire_raw],
        "ticks": after.ticks - s.ticks,
    }
    if after.outcome is not None:
        rec["outcome"] = {"result": after.outcome.result.value,
                          "reason": after.outcome.reason.value,
                          "reward_red": after.outcome.reward_red,
                          "reward_blue": after.outcome.reward_blue}
    return rec


def play_episode(s: EngagementState, red_actor: Actor, blue_actor: Actor,
                 cfg: EngagementConfig = EngagementConfig(),
                 record: Optional[list] = None) -> tuple[EngagementState, int]:
    """Run to termination. Returns the final state and the number of decisions."""
    n = 0
    while s.outcome is None:
        ar = AgentAction.from_vector(red_actor(observe(s, Side.RED, cfg)))
        ab = AgentAction.from_vector(blue_actor(observe(s, Side.BLUE, cfg)))
        nxt, _ = step(s, ar, ab, cfg)
        if record is not None:
            record.append(trajectory_record(s, ar, ab, nxt))
        s = nxt
        n += 1
    return s, n
