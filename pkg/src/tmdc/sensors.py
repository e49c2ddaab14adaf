"""Sensor models and the onboard state estimator.

Position fixes arrive at the position-loop rate with Gaussian noise;
accelerometer samples arrive at the thrust-loop rate with noise plus a
constant bias.  Velocity is not measured: the estimator differentiates
position fixes over the nominal sample period and smooths the result with
the cosine-weighted moving average.  All randomness comes from stdlib
Random instances seeded per purpose, so runs are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import Attitude, Vec3, VehicleState
from .filters import CwmaFilter, Differentiator


@dataclass(frozen=True)
class SensorConfig:
    position_rate: float = 30.0
    accel_rate: float = 80.0
    sigma_position: float = 0.0
    sigma_accel: float = 0.0
    accel_bias: Vec3 = Vec3(0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.position_rate <= 0.0 or self.accel_rate <= 0.0:
            raise ValueError("sensor rates must be positive")
        if self.sigma_position < 0.0 or self.sigma_accel < 0.0:
            raise ValueError("noise sigmas must be >= 0")


class SensorSuite:
    """Generates noisy measurements from the true state."""

    def __init__(self, config: SensorConfig, seed):
        self.config = config
        self._rng_pos = random.Random(f"{seed}:pos")
        self._rng_acc = random.Random(f"{seed}:acc")

    def sample_position(self, true_state: VehicleState) -> Vec3:
        p = true_state.position
        s = self.config.sigma_position
        if s == 0.0:
            return p
        return Vec3(
            p.x + self._rng_pos.gauss(0.0, s),
            p.y + self._rng_pos.gauss(0.0, s),
            p.z + self._rng_pos.gauss(0.0, s),
        )

    def sample_accel(self, true_state: VehicleState) -> Vec3:
        a = true_state.acceleration
        b = self.config.accel_bias
        s = self.config.sigma_accel
        if s == 0.0:
            return a + b
        return Vec3(
            a.x + b.x + self._rng_acc.gauss(0.0, s),
            a.y + b.y + self._rng_acc.gauss(0.0, s),
            a.z + b.z + self._rng_acc.gauss(0.0, s),
        )

    def sample_attitude(self, true_state: VehicleState) -> Attitude:
        return true_state.attitude


@dataclass(frozen=True)
class EstimatedState:
    """Latest fused estimate with per-channel freshness timestamps."""

    position: Vec3
    velocity: Vec3
    acceleration: Vec3
    attitude: Attitude
    body_rates: Vec3 = Vec3(0.0, 0.0, 0.0)
    t_position: float = -math.inf
    t_accel: float = -math.inf
    t_attitude: float = -math.inf


class Estimator:
    """Holds the latest measurements and derives velocity from position fixes.

    The derivative divides by the nominal position-sample period (not the
    jittered arrival gap) and is smoothed per axis by a CWMA filter.  The
    first fix only primes the differentiators; velocity stays zero until a
    second fix exists.
    """

    def __init__(self, position_period: float, window: int = 4,
                 zeta_max: float = math.radians(80.0), accel_filter: bool = False):
        if position_period <= 0.0:
            raise ValueError("position_period must be positive")
        self._diff = [Differentiator(position_period) for _ in range(3)]
        self._filt = [CwmaFilter(window, zeta_max) for _ in range(3)]
        # Acceleration is passed through raw by default; the optional filter
        # exists for baseline ablations, not for the accumulator law.
        self._accel_filter = (
            [CwmaFilter(window, zeta_max) for _ in range(3)] if accel_filter else None
        )
        self._position = Vec3(0.0, 0.0, 0.0)
        self._velocity = Vec3(0.0, 0.0, 0.0)
        self._accel = Vec3(0.0, 0.0, 0.0)
        self._attitude = Attitude(0.0, 0.0, 0.0)
        self._t_position = -math.inf
        self._t_accel = -math.inf
        self._t_attitude = -math.inf
        self._primed = False

    def reset(self) -> None:
        for d in self._diff:
            d.reset()
        for f in self._filt:
            f.reset()
        if self._accel_filter is not None:
            for f in self._accel_filter:
                f.reset()
        self._position = Vec3(0.0, 0.0, 0.0)
        self._velocity = Vec3(0.0, 0.0, 0.0)
        self._accel = Vec3(0.0, 0.0, 0.0)
        self._attitude = Attitude(0.0, 0.0, 0.0)
        self._t_position = -math.inf
        self._t_accel = -math.inf
        self._t_attitude = -math.inf
        self._primed = False

    def on_position(self, fix: Vec3, t: float) -> None:
        primed = self._primed
        d = (
            self._diff[0].push(fix.x, t),
            self._diff[1].push(fix.y, t),
            self._diff[2].push(fix.z, t),
        )
        if primed:
            self._velocity = Vec3(
                self._filt[0].push(d[0]),
                self._filt[1].push(d[1]),
                self._filt[2].push(d[2]),
            )
        self._primed = True
        self._position = fix
        self._t_position = t

    def on_accel(self, sample: Vec3, t: float) -> None:
        if self._accel_filter is not None:
            sample = Vec3(
                self._accel_filter[0].push(sample.x),
                self._accel_filter[1].push(sample.y),
                self._accel_filter[2].push(sample.z),
            )
        self._accel = sample
        self._t_accel = t

    def on_attitude(self, att: Attitude, t: float) -> None:
        self._attitude = att
        self._t_attitude = t

    def estimate(self) -> EstimatedState:
        return EstimatedState(
            position=self._position,
            velocity=self._velocity,
            acceleration=self._accel,
            attitude=self._attitude,
            t_position=self._t_position,
            t_accel=self._t_accel,
            t_attitude=self._t_attitude,
        )
