"""Desk-scale quadrotor plant: rigid body + actuator and environment effects.

The vehicle is a point mass with a tracked attitude (second-order roll/pitch
tracker, first-order yaw-rate lag).  Thrust F = u * F_max * eta * ge acts
along the body z axis, where eta is the battery efficiency (decays with
integrated command) and ge the ground-effect multiplier.  Off-center
payloads bias the attitude tracker through their static gravity torque.
Integration happens in the selected kernel backend in substeps <= dt_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import GRAVITY, Attitude, ControlCommand, Vec3, VehicleState

DEFAULT_INNER_DT = 0.0025


@dataclass(frozen=True)
class Payload:
    """Point mass rigidly attached at a body-frame offset from the CoM."""

    mass: float
    offset: Vec3 = Vec3(0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.mass <= 0.0 or not math.isfinite(self.mass):
            raise ValueError(f"payload mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class Disturbance:
    """Constant world-frame force applied over [start, start + duration)."""

    force: Vec3
    start: float
    duration: float

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError(f"disturbance duration must be positive, got {self.duration}")
        if self.start < 0.0:
            raise ValueError(f"disturbance start must be >= 0, got {self.start}")

    def active(self, t: float) -> bool:
        return self.start <= t < self.start + self.duration


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 2.5
    inertia: Vec3 = Vec3(0.082, 0.082, 0.149)
    f_max: float = 60.0
    rotor_radius: float = 0.23
    attitude_omega_n: float = 12.0
    attitude_zeta: float = 0.9
    yaw_tau: float = 0.15
    battery_eta: float = 1.0
    battery_decay: float = 0.0
    eta_min: float = 0.6
    ground_effect: bool = True
    ground_plane: bool = True
    gravity: float = GRAVITY

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if min(self.inertia.as_tuple()) <= 0.0:
            raise ValueError("inertia components must be positive")
        if self.f_max <= 0.0 or self.rotor_radius <= 0.0:
            raise ValueError("f_max and rotor_radius must be positive")
        if not 0.0 < self.battery_eta <= 1.0:
            raise ValueError(f"battery_eta must be in (0, 1], got {self.battery_eta}")
        if not 0.0 < self.eta_min <= self.battery_eta:
            raise ValueError("eta_min must be in (0, battery_eta]")
        if self.battery_decay < 0.0:
            raise ValueError("battery_decay must be >= 0")
        if (
            self.attitude_omega_n <= 0.0
            or self.attitude_zeta <= 0.0
            or self.yaw_tau <= 0.0
        ):
            raise ValueError("attitude tracker parameters must be positive")
        if self.f_max * self.battery_eta <= self.mass * self.gravity:
            raise ValueError(
                "vehicle cannot hover: f_max * eta must exceed mass * g"
            )


def total_mass(params: VehicleParams, attachments: list[Payload]) -> float:
    """Base mass plus all attached payloads."""
    return params.mass + sum(p.mass for p in attachments)


def payload_moment(attachments: list[Payload]) -> Vec3:
    """First mass moment sum(m_i * r_i) of the attachments (kg*m, body frame)."""
    m = Vec3(0.0, 0.0, 0.0)
    for p in attachments:
        m = m + p.offset * p.mass
    return m


def payload_torque(
    attachments: list[Payload], attitude: Attitude, gravity: float = GRAVITY
) -> Vec3:
    """Static torque of off-center payloads, in angle sense (roll, pitch, yaw).

    The lever arms act against the gravity-compensation direction
    g_b = R^T (0, 0, +g): torque = sum(m_i r_i) x g_b.  A payload forward of
    the CoM on a level vehicle gives a negative (nose-down) pitch component.
    """
    mom = payload_moment(attachments)
    sphi, cphi = math.sin(attitude.roll), math.cos(attitude.roll)
    sth, cth = math.sin(attitude.pitch), math.cos(attitude.pitch)
    gb = Vec3(gravity * sth, -gravity * cth * sphi, gravity * cth * cphi)
    return mom.cross(gb)


def ground_effect_multiplier(z: float, rotor_radius: float) -> float:
    """Thrust gain near the ground: 1 / (1 - (R / 4z)^2), z floored at 0.3R."""
    if rotor_radius <= 0.0:
        raise ValueError("rotor_radius must be positive")
    zq = max(z, 0.3 * rotor_radius)
    r4 = rotor_radius / (4.0 * zq)
    return 1.0 / (1.0 - r4 * r4)


def battery_eta(
    eta_base: float, decay: float, u_integral: float, eta_min: float
) -> float:
    """Battery efficiency after drawing u_integral = int u dt: linear decay, floored."""
    return max(eta_min, eta_base - decay * u_integral)


_REST = VehicleState(
    position=Vec3(0.0, 0.0, 0.0),
    velocity=Vec3(0.0, 0.0, 0.0),
    acceleration=Vec3(0.0, 0.0, 0.0),
    attitude=Attitude(0.0, 0.0, 0.0),
)


class Plant:
    """Stateful simulation plant advanced in control-event-sized steps."""

    def __init__(
        self,
        params: VehicleParams,
        initial: VehicleState = _REST,
        attachments: tuple[Payload, ...] = (),
        inner_dt: float = DEFAULT_INNER_DT,
    ):
        if inner_dt <= 0.0:
            raise ValueError("inner_dt must be positive")
        self.params = params
        self.inner_dt = inner_dt
        self.attachments: list[Payload] = list(attachments)
        self._eta_base = params.battery_eta
        self._u_integral = 0.0
        self._state = np.zeros(15, dtype=np.float64)
        self._cmd = np.zeros(4, dtype=np.float64)
        self._phys = np.zeros(19, dtype=np.float64)
        self._load_state(initial)

    def _load_state(self, s: VehicleState) -> None:
        self._state[0:3] = s.position.as_tuple()
        self._state[3:6] = s.velocity.as_tuple()
        self._state[6:9] = s.acceleration.as_tuple()
        self._state[9:12] = (s.attitude.roll, s.attitude.pitch, s.attitude.yaw)
        self._state[12:15] = s.body_rates.as_tuple()

    @property
    def total_mass(self) -> float:
        return total_mass(self.params, self.attachments)

    @property
    def eta(self) -> float:
        return battery_eta(
            self._eta_base,
            self.params.battery_decay,
            self._u_integral,
            self.params.eta_min,
        )

    @property
    def u_integral(self) -> float:
        return self._u_integral

    def state(self) -> VehicleState:
        s = self._state
        return VehicleState(
            position=Vec3(s[0], s[1], s[2]),
            velocity=Vec3(s[3], s[4], s[5]),
            acceleration=Vec3(s[6], s[7], s[8]),
            attitude=Attitude(s[9], s[10], s[11]),
            body_rates=Vec3(s[12], s[13], s[14]),
        )

    def attach(self, payload: Payload) -> None:
        self.attachments.append(payload)

    def detach(self, index: int = -1) -> Payload:
        if not self.attachments:
            raise IndexError("no payload attached")
        return self.attachments.pop(index)

    def set_battery(self, eta: float) -> None:
        """Discontinuous battery-state change; decay continues from here."""
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {eta}")
        self._eta_base = eta
        self._u_integral = 0.0

    def step(
        self,
        cmd: ControlCommand,
        duration: float,
        external_force: Vec3 = Vec3(0.0, 0.0, 0.0),
    ) -> None:
        """Integrate forward by `duration` under a constant command and force."""
        if duration <= 0.0:
            return
        p = self.params
        mom = payload_moment(self.attachments)
        self._cmd[:] = (cmd.u, cmd.roll_sp, cmd.pitch_sp, cmd.yaw_rate_sp)
        ph = self._phys
        ph[0] = self.total_mass
        ph[1:4] = p.inertia.as_tuple()
        ph[4] = p.f_max
        ph[5] = self.eta
        ph[6] = p.rotor_radius
        ph[7] = 1.0 if p.ground_effect else 0.0
        ph[8] = 1.0 if p.ground_plane else 0.0
        ph[9:12] = mom.as_tuple()
        ph[12:15] = external_force.as_tuple()
        ph[15] = p.attitude_omega_n
        ph[16] = p.attitude_zeta
        ph[17] = p.yaw_tau
        ph[18] = p.gravity
        kernels.integrate(self._state, self._cmd, ph, duration, self.inner_dt)
        self._u_integral += cmd.u * duration
