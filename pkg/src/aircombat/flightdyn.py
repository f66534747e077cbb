"""Three-degree-of-freedom point-mass aircraft model.

State is (x, y, z, v, gamma, phi) with z up, gamma the flight-path angle and
phi the heading measured from +x towards +y. Controls are bank angle ``mu``
and the load factors ``nx`` (along the velocity) and ``nz`` (normal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

G0 = 9.81
V_MIN, V_MAX = 250.0, 400.0
GAMMA_LIMIT = 1.48


class DegenerateState(ValueError):
    """Flight-path angle too close to vertical for the heading equation."""


class GroundImpact(Exception):
    """Raised by :func:`step_aircraft` when the aircraft reaches z <= 0."""

    def __init__(self, state: "AircraftState"):
        super().__init__(f"ground impact at x={state.x:.1f}, y={state.y:.1f}")
        self.state = state


@dataclass(frozen=True)
class AircraftState:
    x: float
    y: float
    z: float
    v: float
    gamma: float
    phi: float

    def velocity(self) -> tuple[float, float, float]:
        cg = math.cos(self.gamma)
        return (self.v * cg * math.cos(self.phi),
                self.v * cg * math.sin(self.phi),
                self.v * math.sin(self.gamma))

    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.x, self.y, self.z, self.v, self.gamma, self.phi)


@dataclass(frozen=True)
class AircraftControls:
    mu: float
    nx: float
    nz: float


@dataclass(frozen=True)
class PhysicsConfig:
    g: float = G0
    dt: float = 0.05
    nx_min: float = -1.0
    nx_max: float = 2.0
    nz_min: float = 0.0
    nz_max: float = 8.0
    v_min: float = V_MIN
    v_max: float = V_MAX
    z_max: float = 15000.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (self.nx_min < self.nx_max and self.nz_min < self.nz_max):
            raise ValueError("control bounds must be ordered")
        if not self.v_min < self.v_max:
            raise ValueError("speed bounds must be ordered")


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def aircraft_derivatives(s: AircraftState, c: AircraftControls, g: float = G0) -> tuple[float, ...]:
    """Time derivative (xdot, ydot, zdot, vdot, gammadot, phidot)."""
    cg = math.cos(s.gamma)
    if abs(cg) < 1e-6:
        raise DegenerateState(f"cos(gamma) = {cg:.3g}")
    sg = math.sin(s.gamma)
    return (
        s.v * cg * math.cos(s.phi),
        s.v * cg * math.sin(s.phi),
        s.v * sg,
        g * (c.nx - sg),
        g / s.v * (c.nz * math.cos(c.mu) - cg),
        g / (s.v * cg) * c.nz * math.sin(c.mu),
    )


def _rk4(s: AircraftState, c: AircraftControls, g: float, dt: float) -> tuple[float, ...]:
    y0 = s.as_tuple()
    k1 = aircraft_derivatives(s, c, g)
    k2 = aircraft_derivatives(AircraftState(*(a + 0.5 * dt * k for a, k in zip(y0, k1))), c, g)
    k3 = aircraft_derivatives(AircraftState(*(a + 0.5 * dt * k for a, k in zip(y0, k2))), c, g)
    k4 = aircraft_derivatives(AircraftState(*(a + dt * k for a, k in zip(y0, k3))), c, g)
    return tuple(a + dt / 6.0 * (p + 2.0 * q + 2.0 * r + w)
                 for a, p, q, r, w in zip(y0, k1, k2, k3, k4))


def step_aircraft(s: AircraftState, c: AircraftControls, cfg: PhysicsConfig = PhysicsConfig(),
                  dt: float | None = None) -> AircraftState:
    """Advance one RK4 step, then apply the speed/pitch clamps and heading wrap.

    Raises :class:`GroundImpact` if the new altitude is not positive.
    """
    x, y, z, v, gamma, phi = _rk4(s, c, cfg.g, cfg.dt if dt is None else dt)
    out = AircraftState(
        x, y, min(z, cfg.z_max),
        min(max(v, cfg.v_min), cfg.v_max),
        min(max(gamma, -GAMMA_LIMIT), GAMMA_LIMIT),
        wrap_angle(phi),
    )
    if out.z <= 0.0:
        raise GroundImpact(out)
    return out


def clamp_controls(raw: Sequence[float], cfg: PhysicsConfig = PhysicsConfig()) -> AircraftControls:
    """Affine map from a policy output triple in [-1, 1] to physical controls."""
    r0, r1, r2 = (min(max(float(r), -1.0), 1.0) for r in raw[:3])
    return AircraftControls(
        mu=r0 * math.pi,
        nx=cfg.nx_min + (r1 + 1.0) / 2.0 * (cfg.nx_max - cfg.nx_min),
        nz=cfg.nz_min + (r2 + 1.0) / 2.0 * (cfg.nz_max - cfg.nz_min),
    )

