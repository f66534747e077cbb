"""Missile point-mass model, propulsion schedule and proportional navigation.

The missile flies the same kinematic equations as the aircraft, but its speed
is driven by thrust, drag and a burning mass, and its turn rates come from
the guidance commands ``n_mc`` (yaw plane) and ``n_mh`` (pitch plane).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .flightdyn import G0 as GRAVITY, GAMMA_LIMIT, wrap_angle


class DegenerateGeometry(ValueError):
    """Target directly above or below the missile; LOS yaw undefined."""


class GuidanceSingularity(ArithmeticError):
    """cos(eps + beta) too small for the pitch-plane command."""


class MissileVerdict(enum.Enum):
    IN_FLIGHT = "in_flight"
    HIT = "hit"
    MISSED = "missed"


@dataclass(frozen=True)
class MissileConfig:
    # P0, G0 and G_t are model choices, not measured values: they put the
    # burnout speed in the Mach 3 class.
    P0: float = 12000.0
    G0: float = 170.0
    G_t: float = 5.0
    t_w: float = 12.0
    rho: float = 0.607
    S_m: float = 0.0324
    C_Dm: float = 0.9
    K: float = 4.0
    fuze_radius: float = 30.0
    timeout: float = 27.0
    n_cap: float = 40.0
    off_axis_deg: float = 60.0
    v_floor: float = 50.0
    guidance_substeps: int = 5
    terminal_range: float = 3000.0
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("P0", "G0", "G_t", "t_w", "rho", "S_m", "C_Dm", "K",
                     "fuze_radius", "timeout", "n_cap", "off_axis_deg", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.guidance_substeps < 1:
            raise ValueError("guidance_substeps must be >= 1")
        if self.G0 - self.G_t * self.t_w <= 0:
            raise ValueError("burnout mass must be positive")


@dataclass(frozen=True)
class GuidanceCommand:
    n_mc: float = 0.0
    n_mh: float = 1.0


@dataclass(frozen=True)
class MissileState:
    x_m: float
    y_m: float
    z_m: float
    v_m: float
    gamma_m: float
    phi_m: float
    t_flight: float = 0.0
    min_approach: float = math.inf
    status: MissileVerdict = MissileVerdict.IN_FLIGHT
    cmd: GuidanceCommand = GuidanceCommand()

    @property
    def active(self) -> bool:
        return self.status is MissileVerdict.IN_FLIGHT

    def position(self) -> tuple[float, float, float]:
        return (self.x_m, self.y_m, self.z_m)

    def velocity(self) -> tuple[float, float, float]:
        cg = math.cos(self.gamma_m)
        return (self.v_m * cg * math.cos(self.phi_m),
                self.v_m * cg * math.sin(self.phi_m),
                self.v_m * math.sin(self.gamma_m))


@dataclass(frozen=True)
class LineOfSight:
    beta: float
    eps: float
    beta_dot: float
    eps_dot: float
    r: tuple[float, float, float]
    R: float


def propulsion(t_flight: float, cfg: MissileConfig, v_m: float) -> tuple[float, float, float]:
    """Thrust, drag and mass at ``t_flight`` seconds after launch."""
    burning = t_flight <= cfg.t_w
    thrust = cfg.P0 if burning else 0.0
    drag = 0.5 * cfg.rho * v_m ** 2 * cfg.S_m * cfg.C_Dm
    mass = cfg.G0 - cfg.G_t * (t_flight if burning else cfg.t_w)
    return thrust, drag, mass


def line_of_sight(missile: MissileState, target_pos, target_vel) -> LineOfSight:
    mx, my, mz = missile.position()
    vx, vy, vz = missile.velocity()
    rx, ry, rz = target_pos[0] - mx, target_pos[1] - my, target_pos[2] - mz
    drx, dry, drz = target_vel[0] - vx, target_vel[1] - vy, target_vel[2] - vz
    h2 = rx * rx + ry * ry
    if h2 < 1e-6:
        raise DegenerateGeometry("horizontal range is zero")
    h = math.sqrt(h2)
    R2 = h2 + rz * rz
    return LineOfSight(
        beta=math.atan2(ry, rx),
        eps=math.atan2(rz, h),
        beta_dot=(dry * rx - drx * ry) / h2,
        eps_dot=(h2 * drz - rz * (drx * rx + dry * ry)) / (R2 * h),
        r=(rx, ry, rz),
        R=math.sqrt(R2),
    )


def png_commands(los: LineOfSight, missile: MissileState, cfg: MissileConfig,
                 gamma_t: float) -> GuidanceCommand:
    """Proportional-navigation load-factor commands, saturated to ``cfg.n_cap``.

    ``los.beta`` enters the formula through tan/cos of (eps + beta), so the
    caller decides the reference it is measured from (see
    :func:`guidance_los`).
    """
    c = math.cos(los.eps + los.beta)
    if abs(c) <= 1e-3:
        raise GuidanceSingularity(f"cos(eps + beta) = {c:.3g}")
    v, K, g = missile.v_m, cfg.K, cfg.g
    n_mc = K * v * math.cos(gamma_t) / g * (
        los.beta_dot + math.tan(los.eps) * math.tan(los.eps + los.beta) * los.eps_dot)
    n_mh = v * K * los.eps_dot / (g * c)
    cap = cfg.n_cap
    return GuidanceCommand(min(max(n_mc, -cap), cap), min(max(n_mh, -cap), cap))


def guidance_los(missile: MissileState, target_pos, target_vel) -> LineOfSight:
    """LOS with the yaw angle measured from the missile's own heading.

    Rates are frame independent; only ``beta`` changes. With this reference
    the guidance law is invariant to the engagement's world orientation.
    """
    los = line_of_sight(missile, target_pos, target_vel)
    return replace(los, beta=wrap_angle(los.beta - missile.phi_m))


def guide(missile: MissileState, target_pos, target_vel, gamma_t: float,
          cfg: MissileConfig) -> GuidanceCommand:
    """PNG command for one step; holds the previous command at singular geometry."""
    try:
        return png_commands(guidance_los(missile, target_pos, target_vel), missile, cfg, gamma_t)
    except (GuidanceSingularity, DegenerateGeometry):
        return missile.cmd


def _derivs(t, y, cmd: GuidanceCommand, cfg: MissileConfig):
    _, _, _, v, gam, phi = y
    v = max(v, cfg.v_floor)
    cg, sg = math.cos(gam), math.sin(gam)
    P, Q, G = propulsion(t, cfg, v)
    g = cfg.g
    vc = v * cg
    return (
        vc * math.cos(phi),
        vc * math.sin(phi),
        v * sg,
        (P - Q) * g / G - g * sg,
        (cmd.n_mh - cg) * g / v,
        cmd.n_mc * g / vc,
    )


def _segment_distance(p0, p1) -> float:
    """Distance from the origin to the segment p0-p1."""
    ax, ay, az = p0
    dx, dy, dz = p1[0] - ax, p1[1] - ay, p1[2] - az
    dd = dx * dx + dy * dy + dz * dz
    s = 0.0 if dd == 0.0 else min(max(-(ax * dx + ay * dy + az * dz) / dd, 0.0), 1.0)
    return math.sqrt((ax + s * dx) ** 2 + (ay + s * dy) ** 2 + (az + s * dz) ** 2)


def step_missile(m: MissileState, cmd: GuidanceCommand, cfg: MissileConfig, dt: float,
                 target_pos, target_prev=None) -> MissileState:
    """RK4 advance by ``dt`` with continuous closest-approach tracking.

    ``target_prev`` is the target position at the start of the step; when
    given, closest approach is taken along the relative-motion segment,
    otherwise the target is treated as fixed at ``target_pos``.
    """
    t = m.t_flight
    h = 0.5 * dt
    y0 = (m.x_m, m.y_m, m.z_m, m.v_m, m.gamma_m, m.phi_m)
    k1 = _derivs(t, y0, cmd, cfg)
    k2 = _derivs(t + h, [a + h * k for a, k in zip(y0, k1)], cmd, cfg)
    k3 = _derivs(t + h, [a + h * k for a, k in zip(y0, k2)], cmd, cfg)
    k4 = _derivs(t + dt, [a + dt * k for a, k in zip(y0, k3)], cmd, cfg)
    x, y, z, v, gam, phi = [a + dt / 6.0 * (p + 2.0 * q + 2.0 * r + w)
                            for a, p, q, r, w in zip(y0, k1, k2, k3, k4)]

    if target_prev is None:
        target_prev = target_pos
    rel0 = (y0[0] - target_prev[0], y0[1] - target_prev[1], y0[2] - target_prev[2])
    rel1 = (x - target_pos[0], y - target_pos[1], z - target_pos[2])
    closest = min(m.min_approach, _segment_distance(rel0, rel1))

    status = m.status
    if z <= 0.0 and closest > cfg.fuze_radius:
        status = MissileVerdict.MISSED
    return MissileState(
        x, y, z, max(v, cfg.v_floor),
        min(max(gam, -GAMMA_LIMIT), GAMMA_LIMIT), wrap_angle(phi),
        t_flight=round(t + dt, 9), min_approach=closest, status=status, cmd=cmd,
    )


def advance_missile(m: MissileState, cfg: MissileConfig, dt: float, target_prev, target_next,
                    target_vel, gamma_t: float) -> MissileState:
    """Guide and fly the missile across one physics step of length ``dt``.

    Inside ``cfg.terminal_range`` the step is split into
    ``cfg.guidance_substeps`` guidance updates with the target position
    interpolated linearly between ``target_prev`` and ``target_next``: the
    guidance law is stiff near intercept, so the command is refreshed faster
    there than elsewhere.
    """
    n = cfg.guidance_substeps
    if n == 1 or math.dist(m.position(), target_prev) > cfg.terminal_range:
        cmd = guide(m, target_prev, target_vel, gamma_t, cfg)
        return step_missile(m, cmd, cfg, dt, target_next, target_prev)
    h = dt / n
    p0 = target_prev
    for i in range(1, n + 1):
        s1 = i / n
        p1 = tuple(a + s1 * (b - a) for a, b in zip(target_prev, target_next))
        cmd = guide(m, p0, target_vel, gamma_t, cfg)
        m = step_missile(m, cmd, cfg, h, p1, p0)
        p0 = p1
    return m


def check_fuze(m: MissileState, cfg: MissileConfig) -> MissileVerdict:
    if m.min_approach <= cfg.fuze_radius:
        return MissileVerdict.HIT
    if m.status is MissileVerdict.MISSED or m.t_flight > cfg.timeout:
        return MissileVerdict.MISSED
    return MissileVerdict.IN_FLIGHT


def launch(shooter_pos, shooter_v: float, shooter_gamma: float, shooter_phi: float,
           target_pos) -> MissileState:
    d = math.dist(shooter_pos, target_pos)
    return MissileState(*shooter_pos, shooter_v, shooter_gamma, shooter_phi, min_approach=d)


def off_boresight(shooter_vel, shooter_pos, target_pos) -> float:
    """Angle in radians between the shooter's velocity and the LOS to the target."""
    r = [b - a for a, b in zip(shooter_pos, target_pos)]
    nr = math.sqrt(sum(c * c for c in r))
    nv = math.sqrt(sum(c * c for c in shooter_vel))
    if nr == 0.0 or nv == 0.0:
        return 0.0
    cosang = sum(a * b for a, b in zip(r, shooter_vel)) / (nr * nv)
    return math.acos(min(max(cosang, -1.0), 1.0))
