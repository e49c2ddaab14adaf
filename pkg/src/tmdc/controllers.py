"""Control laws: PID, thrust-accumulator (TMAF), baselines, attitude paths.

Thrust-law outputs are normalized rotor commands (u units, thrust divided by
F_max at full battery); converting acceleration errors into u is each law's
job.  TMAF does it without knowing mass, gravity or F_max: it accumulates
alpha * e_a + beta * de_a/dt directly into the command, so the plant itself
closes the unit gap.  The API enforces that blindness: TmafController takes
no mass-, gravity- or thrust-scale arguments anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    DEFAULT_TILT_LIMIT,
    DEFAULT_U_MAX,
    DEFAULT_U_MIN,
    EPS,
    GRAVITY,
    Attitude,
    AxisMode,
    ControlCommand,
    Setpoint,
    Vec3,
    VehicleState,
    clamp,
    thrust_axis,
    wrap_angle,
    yaw_rotate_world_to_body,
)
from .filters import CwmaFilter, Differentiator


class FreeFallError(RuntimeError):
    """Raised when the thrust axis tilts too far from vertical to hold altitude."""

    def __init__(self, cos_tilt: float, attitude: Attitude):
        super().__init__(
            f"free-fall guard: thrust axis cos(tilt)={cos_tilt:.4f} <= guard, "
            f"attitude roll={attitude.roll:.3f} pitch={attitude.pitch:.3f}"
        )
        self.cos_tilt = cos_tilt
        self.attitude = attitude


class DegenerateThrustError(ValueError):
    """Raised when a force setpoint is too small to define a thrust direction."""


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = math.inf
    output_limit: float = math.inf

    def __post_init__(self) -> None:
        if self.integral_limit <= 0.0 or self.output_limit <= 0.0:
            raise ValueError("PID limits must be positive")

    def scaled(self, factor: float) -> "PidGains":
        return PidGains(
            self.kp * factor,
            self.ki * factor,
            self.kd * factor,
            self.integral_limit,
            self.output_limit,
        )


class Pid:
    """PID with CWMA-smoothed derivative and conditional anti-windup.

    The integral uses rectangle integration of error * dt and is frozen on
    any step where the output saturates in the direction the error is
    pushing.  The derivative is a backward difference of the error divided
    by the dt argument (callers pass the nominal loop period), smoothed by
    the cosine-weighted filter.
    """

    def __init__(self, gains: PidGains):
        self.gains = gains
        self._integral = 0.0
        self._prev_error: float | None = None
        self._dfilter = CwmaFilter()

    def reset(self) -> None:
        self._integral = 0.0
        self._prev_error = None
        self._dfilter.reset()

    @property
    def integral(self) -> float:
        return self._integral

    def step(self, error: float, dt: float) -> float:
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        g = self.gains
        if self._prev_error is None:
            d_raw = 0.0
        else:
            d_raw = (error - self._prev_error) / dt
        self._prev_error = error
        d = self._dfilter.push(d_raw)

        candidate = clamp(
            self._integral + error * dt, -g.integral_limit, g.integral_limit
        )
        out = g.kp * error + g.ki * candidate + g.kd * d
        if abs(out) > g.output_limit and out * error > 0.0:
            # Saturated and the error would push further: keep the old integral.
            candidate = self._integral
            out = g.kp * error + g.ki * candidate + g.kd * d
        self._integral = candidate
        return clamp(out, -g.output_limit, g.output_limit)


def mi_force(
    a_sp: Vec3,
    mass: float,
    gravity: float = GRAVITY,
    external_force: Vec3 = Vec3(0.0, 0.0, 0.0),
) -> Vec3:
    """Mass-informed feedforward force (Newtons): m*(a* + g*zhat) - f_ext."""
    if mass <= 0.0:
        raise ValueError(f"mass must be positive, got {mass}")
    return Vec3(
        mass * a_sp.x - external_force.x,
        mass * a_sp.y - external_force.y,
        mass * (a_sp.z + gravity) - external_force.z,
    )


class DaController:
    """Direct-adaptive baseline: normalized PI on acceleration error.

    u = mu o (a* + g*zhat) + lambda o I,  I += (a* - a_meas) * dt (clamped).
    mu and lambda are in u-units per m/s^2; the integral uses measured dt,
    which is what makes this law sensitive to loop-rate jitter.
    """

    def __init__(
        self,
        mu: Vec3,
        lam: Vec3,
        integral_limit: float = 0.3,
        gravity: float = GRAVITY,
        u_min: float = DEFAULT_U_MIN,
        u_max: float = DEFAULT_U_MAX,
    ):
        if integral_limit <= 0.0:
            raise ValueError("integral_limit must be positive")
        self.mu = mu
        self.lam = lam
        self.integral_limit = integral_limit
        self.gravity = gravity
        self.u_min = u_min
        self.u_max = u_max
        self._integral = Vec3(0.0, 0.0, 0.0)

    def reset(self) -> None:
        self._integral = Vec3(0.0, 0.0, 0.0)

    @property
    def integral(self) -> Vec3:
        return self._integral

    def step(self, a_sp: Vec3, a_meas: Vec3, dt: float) -> Vec3:
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        lim = self.integral_limit
        e = a_sp - a_meas
        self._integral = Vec3(
            clamp(self._integral.x + e.x * dt, -lim, lim),
            clamp(self._integral.y + e.y * dt, -lim, lim),
            clamp(self._integral.z + e.z * dt, -lim, lim),
        )
        demand = Vec3(a_sp.x, a_sp.y, a_sp.z + self.gravity)
        out = self.mu.hadamard(demand) + self.lam.hadamard(self._integral)
        return Vec3(
            clamp(out.x, -self.u_max, self.u_max),
            clamp(out.y, -self.u_max, self.u_max),
            clamp(out.z, self.u_min, self.u_max),
        )


class TmafController:
    """Thrust microstepping accumulator (per axis).

    Gamma_t = Gamma_{t-1} + alpha * e_a + beta * de_a/dt, Gamma_0 = 0.
    The jerk term is a backward difference over the nominal loop period, so
    the law needs no clock input; step() takes only the two accelerations.
    Axis z is clamped into [u_min, u_max], lateral axes into +-u_max.
    """

    def __init__(
        self,
        alpha: Vec3,
        beta: Vec3,
        period: float,
        u_min: float = DEFAULT_U_MIN,
        u_max: float = DEFAULT_U_MAX,
    ):
        if alpha.x < 0 or alpha.y < 0 or alpha.z < 0:
            raise ValueError("alpha components must be >= 0")
        if beta.x < 0 or beta.y < 0 or beta.z < 0:
            raise ValueError("beta components must be >= 0")
        if not 0.0 <= u_min < u_max <= 1.0:
            raise ValueError("need 0 <= u_min < u_max <= 1")
        self.alpha = alpha
        self.beta = beta
        self.u_min = u_min
        self.u_max = u_max
        self._diff = [Differentiator(period) for _ in range(3)]
        self._ticks = 0
        # Gamma_0 = 0; the [u_min, u_max] clamp applies after steps only.
        self._gamma = Vec3(0.0, 0.0, 0.0)

    @property
    def period(self) -> float:
        return self._diff[0].period

    def set_period(self, period: float) -> None:
        if period <= 0.0:
            raise ValueError(f"period must be positive, got {period}")
        for d in self._diff:
            d.period = period

    def reset(self) -> None:
        for d in self._diff:
            d.reset()
        self._ticks = 0
        self._gamma = Vec3(0.0, 0.0, 0.0)

    @property
    def gamma(self) -> Vec3:
        return self._gamma

    def step(self, a_sp: Vec3, a_meas: Vec3) -> Vec3:
        """Advance one tick and return the accumulated force command (u units)."""
        e = a_sp - a_meas
        self._ticks += 1
        t = self._ticks * self.period
        edot = Vec3(
            self._diff[0].push(e.x, t),
            self._diff[1].push(e.y, t),
            self._diff[2].push(e.z, t),
        )
        g = self._gamma
        self._gamma = Vec3(
            clamp(g.x + self.alpha.x * e.x + self.beta.x * edot.x, -self.u_max, self.u_max),
            clamp(g.y + self.alpha.y * e.y + self.beta.y * edot.y, -self.u_max, self.u_max),
            clamp(g.z + self.alpha.z * e.z + self.beta.z * edot.z, self.u_min, self.u_max),
        )
        return self._gamma


def gt_attitude(
    f_sp: Vec3,
    yaw_sp: float,
    attitude: Attitude,
    tilt_limit: float = DEFAULT_TILT_LIMIT,
) -> tuple[float, float, float]:
    """Geometric attitude extraction from a desired force vector.

    Returns (intensity, roll_sp, pitch_sp): the attitude whose thrust axis
    points along f_sp at the commanded yaw, plus the projection of f_sp on
    the *current* thrust axis (same units as f_sp).  Angles are clamped to
    tilt_limit.
    """
    n = f_sp.norm()
    if n <= EPS or f_sp.z <= EPS:
        raise DegenerateThrustError(
            f"force setpoint {f_sp.as_tuple()} cannot define a thrust direction"
        )
    zd = f_sp * (1.0 / n)
    # De-rotate by commanded yaw; in the heading frame the body z axis is
    # (-sin(pitch)cos(roll), sin(roll), cos(pitch)cos(roll)).
    s, c = math.sin(yaw_sp), math.cos(yaw_sp)
    bx = c * zd.x + s * zd.y
    by = -s * zd.x + c * zd.y
    bz = zd.z
    roll_sp = clamp(math.asin(clamp(by, -1.0, 1.0)), -tilt_limit, tilt_limit)
    pitch_sp = clamp(math.atan2(-bx, bz), -tilt_limit, tilt_limit)
    intensity = f_sp.dot(thrust_axis(attitude))
    return intensity, roll_sp, pitch_sp


def dmc_lateral(
    v_sp: Vec3,
    v_meas: Vec3,
    yaw: float,
    pid_x: Pid,
    pid_y: Pid,
    dt: float,
    tilt_limit: float = DEFAULT_TILT_LIMIT,
) -> tuple[float, float]:
    """Decoupled lateral velocity control in the heading frame.

    Velocity errors are rotated into the yaw-aligned frame and fed to
    per-axis PIDs whose outputs *are* the attitude commands: forward error
    maps to negative pitch, left error to positive roll.
    """
    sp_b = yaw_rotate_world_to_body(v_sp, yaw)
    ms_b = yaw_rotate_world_to_body(v_meas, yaw)
    pitch_sp = clamp(-pid_x.step(sp_b.x - ms_b.x, dt), -tilt_limit, tilt_limit)
    roll_sp = clamp(pid_y.step(sp_b.y - ms_b.y, dt), -tilt_limit, tilt_limit)
    return roll_sp, pitch_sp


FREE_FALL_GUARD = 0.1


def dmc_thrust(
    f_z: float,
    attitude: Attitude,
    u_min: float = DEFAULT_U_MIN,
    u_max: float = DEFAULT_U_MAX,
    guard: float = FREE_FALL_GUARD,
) -> float:
    """Tilt-compensated vertical thrust: u = f_z / (thrust_axis . zhat).

    Raises FreeFallError when the tilt compensation would exceed 1/guard
    (thrust axis nearly horizontal), instead of commanding unbounded thrust.
    """
    cos_tilt = thrust_axis(attitude).z
    if cos_tilt <= guard:
        raise FreeFallError(cos_tilt, attitude)
    return clamp(f_z / cos_tilt, u_min, u_max)


VARIANTS = ("tmaf+dmc", "tmaf+gt", "da+gt", "mi+gt")


@dataclass
class CascadeConfig:
    """Gains and limits for one control cascade instance.

    Velocity gains are in acceleration units (m/s^2 per m/s); lateral gains
    are in attitude units (rad per m/s) and only used by the DMC path.
    TMAF alpha/beta are per-axis; only z matters for tmaf+dmc.
    """

    # Starting defaults only; scenarios carry gains re-tuned with the sweep
    # tool (tune order: tmaf, then pid_v, then pid_p / yaw).
    variant: str = "tmaf+dmc"
    position_gains: tuple[PidGains, PidGains, PidGains] = (
        PidGains(kp=1.2, ki=0.02, output_limit=1.0),
    ) * 3
    velocity_gains: tuple[PidGains, PidGains, PidGains] = (
        PidGains(kp=2.0, ki=0.1, kd=0.05, integral_limit=2.0, output_limit=5.0),
    ) * 3
    lateral_gains: tuple[PidGains, PidGains] = (
        PidGains(kp=0.16, ki=0.04, kd=0.02, integral_limit=3.0, output_limit=0.6),
    ) * 2
    yaw_gains: PidGains = PidGains(kp=1.5, output_limit=1.5)
    tmaf_alpha: Vec3 = Vec3(0.04, 0.04, 0.04)
    tmaf_beta: Vec3 = Vec3(0.01, 0.01, 0.01)
    da_mu: Vec3 = Vec3(0.0417, 0.0417, 0.0417)
    da_lambda: Vec3 = Vec3(0.02, 0.02, 0.02)
    da_integral_limit: float = 0.3
    mi_mass: float = 0.0  # assumed mass for MI; runner freezes initial total mass
    mi_f_max: float = 60.0
    mi_external_force: Vec3 = Vec3(0.0, 0.0, 0.0)
    tilt_limit: float = DEFAULT_TILT_LIMIT
    u_min: float = DEFAULT_U_MIN
    u_max: float = DEFAULT_U_MAX

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not 0.0 <= self.u_min < self.u_max <= 1.0:
            raise ValueError("need 0 <= u_min < u_max <= 1")
        if not 0.0 < self.tilt_limit < math.pi / 2.0:
            raise ValueError("tilt_limit must be in (0, pi/2)")


class Cascade:
    """Three-stage cascade: position (30 Hz) -> velocity (60 Hz) -> thrust (80 Hz).

    The same class implements all four variants; the variant picks the
    thrust law (tmaf / da / mi) and the attitude path (dmc / gt).  Stage
    methods are called by the scheduler at their loop rates with the nominal
    period as dt (DA's integral gets the measured dt separately).
    """

    def __init__(self, cfg: CascadeConfig, thrust_period: float):
        self.cfg = cfg
        thrust_law, self.attitude_path = cfg.variant.split("+")
        self.thrust_law = thrust_law
        self._pid_pos = [Pid(g) for g in cfg.position_gains]
        self._pid_vel = [Pid(g) for g in cfg.velocity_gains]
        self._pid_lat = [Pid(g) for g in cfg.lateral_gains]
        self._pid_yaw = Pid(cfg.yaw_gains)
        self.tmaf: TmafController | None = None
        self.da: DaController | None = None
        if thrust_law == "tmaf":
            alpha, beta = cfg.tmaf_alpha, cfg.tmaf_beta
            if self.attitude_path == "dmc":
                # DMC handles lateral motion by attitude; TMAF runs z only.
                alpha = Vec3(0.0, 0.0, alpha.z)
                beta = Vec3(0.0, 0.0, beta.z)
            self.tmaf = TmafController(
                alpha, beta, thrust_period, cfg.u_min, cfg.u_max
            )
        elif thrust_law == "da":
            self.da = DaController(
                cfg.da_mu,
                cfg.da_lambda,
                cfg.da_integral_limit,
                u_min=cfg.u_min,
                u_max=cfg.u_max,
            )
        elif thrust_law != "mi":
            raise ValueError(f"unknown thrust law {thrust_law!r}")
        # Latched inter-stage values.
        self._v_sp_pos = [0.0, 0.0, 0.0]
        self._a_sp = Vec3(0.0, 0.0, 0.0)
        self._roll_sp = 0.0
        self._pitch_sp = 0.0
        self._last_v_sp = Vec3(0.0, 0.0, 0.0)

    def reset(self) -> None:
        for p in (*self._pid_pos, *self._pid_vel, *self._pid_lat, self._pid_yaw):
            p.reset()
        if self.tmaf:
            self.tmaf.reset()
        if self.da:
            self.da.reset()
        self._v_sp_pos = [0.0, 0.0, 0.0]
        self._a_sp = Vec3(0.0, 0.0, 0.0)
        self._roll_sp = 0.0
        self._pitch_sp = 0.0
        self._last_v_sp = Vec3(0.0, 0.0, 0.0)

    def set_thrust_period(self, period: float) -> None:
        if self.tmaf:
            self.tmaf.set_period(period)

    def on_position_tick(self, est: VehicleState, sp: Setpoint, dt: float) -> None:
        """Outer loop: position error -> velocity setpoint (position-mode axes)."""
        p = est.position.as_tuple()
        v = sp.value.as_tuple()
        for i in range(3):
            if sp.modes[i] is AxisMode.POSITION:
                self._v_sp_pos[i] = self._pid_pos[i].step(v[i] - p[i], dt)

    def velocity_setpoint(self, sp: Setpoint) -> Vec3:
        """Per-axis v*: setpoint value in velocity mode, else the latched PID out."""
        vals = sp.value.as_tuple()
        out = [
            vals[i] if sp.modes[i] is AxisMode.VELOCITY else self._v_sp_pos[i]
            for i in range(3)
        ]
        return Vec3(*out)

    def on_velocity_tick(self, est: VehicleState, sp: Setpoint, dt: float) -> None:
        """Middle loop: velocity error -> acceleration setpoint (and DMC angles)."""
        v_sp = self.velocity_setpoint(sp)
        self._last_v_sp = v_sp
        v = est.velocity
        if self.attitude_path == "dmc":
            self._roll_sp, self._pitch_sp = dmc_lateral(
                v_sp,
                v,
                est.attitude.yaw,
                self._pid_lat[0],
                self._pid_lat[1],
                dt,
                self.cfg.tilt_limit,
            )
            az = self._pid_vel[2].step(v_sp.z - v.z, dt)
            self._a_sp = Vec3(0.0, 0.0, az)
        else:
            self._a_sp = Vec3(
                self._pid_vel[0].step(v_sp.x - v.x, dt),
                self._pid_vel[1].step(v_sp.y - v.y, dt),
                self._pid_vel[2].step(v_sp.z - v.z, dt),
            )

    def on_thrust_tick(
        self, est: VehicleState, sp: Setpoint, dt: float, measured_dt: float | None = None
    ) -> ControlCommand:
        """Inner loop: acceleration error -> thrust command + attitude targets."""
        cfg = self.cfg
        yaw_rate_sp = self._pid_yaw.step(wrap_angle(sp.yaw - est.attitude.yaw), dt)
        a_meas = est.acceleration
        if self.attitude_path == "dmc":
            f_u = self.tmaf.step(Vec3(0.0, 0.0, self._a_sp.z), Vec3(0.0, 0.0, a_meas.z))
            u = dmc_thrust(f_u.z, est.attitude, cfg.u_min, cfg.u_max)
            roll_sp, pitch_sp = self._roll_sp, self._pitch_sp
        else:
            if self.thrust_law == "tmaf":
                f_u = self.tmaf.step(self._a_sp, a_meas)
            elif self.thrust_law == "da":
                f_u = self.da.step(
                    self._a_sp, a_meas, measured_dt if measured_dt is not None else dt
                )
            else:
                f_n = mi_force(
                    self._a_sp, cfg.mi_mass, GRAVITY, cfg.mi_external_force
                )
                f_u = f_n * (1.0 / cfg.mi_f_max)
            try:
                intensity, roll_sp, pitch_sp = gt_attitude(
                    f_u, sp.yaw, est.attitude, cfg.tilt_limit
                )
                u = clamp(intensity, cfg.u_min, cfg.u_max)
            except DegenerateThrustError:
                # Idle start: a zero accumulator cannot define a direction yet.
                u, roll_sp, pitch_sp = cfg.u_min, 0.0, 0.0
        return ControlCommand(u, roll_sp, pitch_sp, yaw_rate_sp)


def make_cascade(cfg: CascadeConfig, thrust_period: float) -> Cascade:
    """Factory: builds the cascade for cfg.variant (all variants share the class)."""
    return Cascade(cfg, thrust_period)
