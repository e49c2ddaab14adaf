"""Core types and frame math for the flight-control stack.

Frames and conventions used throughout the package:

- World frame: x forward, y left, z up. Gravity acts along -z.
- Body attitude is Z-Y-X Euler (yaw psi, pitch theta, roll phi) with the
  rotation built as R = Rz(psi) @ Ry(-theta) @ Rx(-phi), i.e. positive theta
  is nose-up and positive phi is left-bank.  Under this convention a
  positive +x acceleration demand maps to a negative pitch command and a
  positive +y demand maps to a positive roll command.
- Thrust acts along the body z axis (third column of R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

GRAVITY = 9.81
EPS = 1e-12

# Command envelope defaults; scenario configs may narrow them.
DEFAULT_TILT_LIMIT = math.radians(30.0)
DEFAULT_U_MIN = 0.05
DEFAULT_U_MAX = 0.95


def clamp(value: float, lo: float, hi: float) -> float:
    """Clamp `value` into [lo, hi]."""
    if value < lo:
        return lo
    if value > hi:
        return hi
    return value


def wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi].

    Uses fmod so the compiled and pure-Python plant kernels can share the
    exact same arithmetic.
    """
    if not math.isfinite(angle):
        raise ValueError(f"cannot wrap non-finite angle {angle!r}")
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} contains non-finite component {v!r}")


@dataclass(frozen=True)
class Vec3:
    """Immutable 3-vector. Construction rejects NaN/Inf."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self) -> None:
        _require_finite("Vec3", self.x, self.y, self.z)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def hadamard(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x * other.x, self.y * other.y, self.z * other.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @classmethod
    def from_seq(cls, seq) -> "Vec3":
        x, y, z = seq
        return cls(float(x), float(y), float(z))

    @classmethod
    def zero(cls) -> "Vec3":
        return cls(0.0, 0.0, 0.0)


# Physical tilt ceiling for attitude states; the plant clamps slightly inside.
MAX_PHYSICAL_TILT = math.pi / 2.0


@dataclass(frozen=True)
class Attitude:
    """Z-Y-X Euler attitude. Yaw is wrapped into (-pi, pi] on construction."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        _require_finite("Attitude", self.roll, self.pitch, self.yaw)
        if abs(self.roll) >= MAX_PHYSICAL_TILT or abs(self.pitch) >= MAX_PHYSICAL_TILT:
            raise ValueError(
                f"attitude out of physical range: roll={self.roll}, pitch={self.pitch}"
            )
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


def euler_to_rotation(att: Attitude) -> np.ndarray:
    """Body-to-world rotation matrix R = Rz(yaw) @ Ry(-pitch) @ Rx(-roll)."""
    sphi, cphi = math.sin(att.roll), math.cos(att.roll)
    sth, cth = math.sin(att.pitch), math.cos(att.pitch)
    spsi, cpsi = math.sin(att.yaw), math.cos(att.yaw)
    # M = Ry(-pitch) @ Rx(-roll)
    m = np.array(
        [
            [cth, sth * sphi, -sth * cphi],
            [0.0, cphi, sphi],
            [sth, -cth * sphi, cth * cphi],
        ]
    )
    rz = np.array(
        [
            [cpsi, -spsi, 0.0],
            [spsi, cpsi, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    return rz @ m


def thrust_axis(att: Attitude) -> Vec3:
    """Unit body-z axis expressed in the world frame (thrust direction)."""
    sphi, cphi = math.sin(att.roll), math.cos(att.roll)
    sth, cth = math.sin(att.pitch), math.cos(att.pitch)
    spsi, cpsi = math.sin(att.yaw), math.cos(att.yaw)
    bx = -sth * cphi
    by = sphi
    return Vec3(cpsi * bx - spsi * by, spsi * bx + cpsi * by, cth * cphi)


def yaw_rotate_world_to_body(v: Vec3, yaw: float) -> Vec3:
    """Rotate a world-frame vector into the yaw-aligned (heading) frame."""
    s, c = math.sin(yaw), math.cos(yaw)
    return Vec3(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)


class AxisMode(Enum):
    """Per-axis setpoint interpretation."""

    POSITION = "position"
    VELOCITY = "velocity"


@dataclass(frozen=True)
class Setpoint:
    """Commanded reference: per-axis value with mode, plus a yaw target."""

    modes: tuple[AxisMode, AxisMode, AxisMode]
    value: Vec3
    yaw: float = 0.0

    def __post_init__(self) -> None:
        _require_finite("Setpoint", self.yaw)

    def mode(self, axis: int) -> AxisMode:
        return self.modes[axis]

    @classmethod
    def position(cls, value: Vec3, yaw: float = 0.0) -> "Setpoint":
        return cls((AxisMode.POSITION,) * 3, value, yaw)


@dataclass(frozen=True)
class ControlCommand:
    """Output of one thrust-loop tick: normalized thrust plus attitude targets."""

    u: float
    roll_sp: float
    pitch_sp: float
    yaw_rate_sp: float

    def __post_init__(self) -> None:
        _require_finite(
            "ControlCommand", self.u, self.roll_sp, self.pitch_sp, self.yaw_rate_sp
        )
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"thrust command out of [0, 1]: {self.u}")
        if abs(self.roll_sp) >= MAX_PHYSICAL_TILT or abs(self.pitch_sp) >= MAX_PHYSICAL_TILT:
            raise ValueError("attitude command out of physical range")


@dataclass(frozen=True)
class VehicleState:
    """True or estimated rigid-body state in the world frame."""

    position: Vec3
    velocity: Vec3
    acceleration: Vec3
    attitude: Attitude
    body_rates: Vec3 = Vec3(0.0, 0.0, 0.0)
