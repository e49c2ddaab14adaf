"""Scenario files, the run engine, variant comparison, and gain sweeps.

Scenarios are TOML documents (`.scn`) with a mandatory `version = 1`.  A
scenario fully determines a run: vehicle, sensors, loop rates, controller
variant and gains, a setpoint program, and a timed event list.  Runs are
deterministic given the seed.  See the bundled files under
`tmdc/scenarios/` for the schema in use.
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

try:
    import tomllib as _toml
except ImportError:  # Python < 3.11
    import tomli as _toml

from .controllers import (
    CascadeConfig,
    FreeFallError,
    PidGains,
    VARIANTS,
    make_cascade,
)
from .core import (
    Attitude,
    AxisMode,
    ControlCommand,
    Setpoint,
    Vec3,
    VehicleState,
)
from .metrics import CompareRow, CompareTable, Metrics, RunRecord, compute_metrics
from .plant import DEFAULT_INNER_DT, Payload, Plant, VehicleParams
from .scheduler import LoopSpec, Scheduler, SchedulerStats, Timeline
from .sensors import Estimator, SensorConfig, SensorSuite

SCENARIO_VERSION = 1

VARIANT_ALIASES = {
    "tmdc": "tmaf+dmc",
    "gt": "mi+gt",
    "da": "da+gt",
    "mi": "mi+gt",
}


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate; message names the key."""


def canonical_variant(name: str) -> str:
    v = VARIANT_ALIASES.get(name.strip().lower(), name.strip().lower())
    if v not in VARIANTS:
        raise ScenarioError(
            f"unknown variant {name!r}; choose from {VARIANTS} or aliases {tuple(VARIANT_ALIASES)}"
        )
    return v


@dataclass(frozen=True)
class CircleSpec:
    radius: float
    period: float
    center: Vec3
    start_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.radius <= 0.0 or self.period <= 0.0:
            raise ScenarioError("circle radius and period must be positive")


@dataclass(frozen=True)
class Segment:
    """One piece of the setpoint program, active from t until the next piece."""

    t: float
    modes: tuple[AxisMode, AxisMode, AxisMode] = (AxisMode.POSITION,) * 3
    value: Vec3 = Vec3(0.0, 0.0, 0.0)
    yaw: float = 0.0
    circle: CircleSpec | None = None

    def at(self, time: float) -> Setpoint:
        if self.circle is None:
            return Setpoint(self.modes, self.value, self.yaw)
        c = self.circle
        ang = math.radians(c.start_deg) + 2.0 * math.pi * (time - self.t) / c.period
        value = Vec3(
            c.center.x + c.radius * math.cos(ang),
            c.center.y + c.radius * math.sin(ang),
            c.center.z,
        )
        return Setpoint((AxisMode.POSITION,) * 3, value, self.yaw)


class SetpointProgram:
    """Piecewise setpoint source; segments sorted by start time, ZOH between."""

    def __init__(self, segments: tuple[Segment, ...]):
        if not segments:
            raise ScenarioError("setpoint program must not be empty")
        self.segments = tuple(sorted(segments, key=lambda s: s.t))
        if self.segments[0].t != 0.0:
            raise ScenarioError("first setpoint segment must start at t = 0")
        self._starts = [s.t for s in self.segments]

    def at(self, time: float) -> Setpoint:
        i = bisect_right(self._starts, time) - 1
        if i < 0:
            i = 0
        return self.segments[i].at(time)


EVENT_KINDS = (
    "attach_payload",
    "detach_payload",
    "battery_step",
    "gust",
    "rate_scale",
    "jitter_set",
)
EVENT_LOOPS = ("all", "position", "velocity", "thrust")


@dataclass(frozen=True)
class EventSpec:
    """One scripted event; unused fields stay at defaults for other kinds."""

    t: float
    kind: str
    payload: Payload | None = None
    index: int = -1
    eta: float = 1.0
    force: Vec3 = Vec3(0.0, 0.0, 0.0)
    duration: float = 0.0
    loop: str = "all"
    factor: float = 1.0
    amplitude: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ScenarioError(f"unknown event kind {self.kind!r}")
        if self.t < 0.0:
            raise ScenarioError("event time must be >= 0")
        if self.kind == "attach_payload" and self.payload is None:
            raise ScenarioError("attach_payload needs mass/offset")
        if self.kind == "battery_step" and not 0.0 < self.eta <= 1.0:
            raise ScenarioError("battery_step eta must be in (0, 1]")
        if self.kind == "gust" and self.duration <= 0.0:
            raise ScenarioError("gust duration must be positive")
        if self.kind == "rate_scale" and self.factor <= 0.0:
            raise ScenarioError("rate_scale factor must be positive")
        if self.kind == "jitter_set" and self.amplitude < 0.0:
            raise ScenarioError("jitter amplitude must be >= 0")
        if self.kind in ("rate_scale", "jitter_set") and self.loop not in EVENT_LOOPS:
            raise ScenarioError(f"loop must be one of {EVENT_LOOPS}")


@dataclass(frozen=True)
class LoopConfig:
    """Control-loop rates; rate_scale and jitter apply to control loops only."""

    position_rate: float = 30.0
    velocity_rate: float = 60.0
    thrust_rate: float = 80.0
    rate_scale: float = 1.0
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if min(self.position_rate, self.velocity_rate, self.thrust_rate) <= 0.0:
            raise ScenarioError("loop rates must be positive")
        if self.rate_scale <= 0.0:
            raise ScenarioError("rate_scale must be positive")
        if self.jitter < 0.0:
            raise ScenarioError("jitter must be >= 0")

    def spec(self, name: str) -> LoopSpec:
        rate = {
            "position": self.position_rate,
            "velocity": self.velocity_rate,
            "thrust": self.thrust_rate,
        }[name]
        return LoopSpec(name, rate, self.rate_scale, self.jitter)


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    seed: int
    vehicle: VehicleParams
    attachments: tuple[Payload, ...]
    initial_position: Vec3
    initial_yaw: float
    sensors: SensorConfig
    loops: LoopConfig
    controller: CascadeConfig
    segments: tuple[Segment, ...]
    events: tuple[EventSpec, ...]
    inner_dt: float = DEFAULT_INNER_DT
    accel_filter: bool = False

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ScenarioError("duration must be positive")
        for ev in self.events:
            if not 0.0 <= ev.t <= self.duration:
                raise ScenarioError(
                    f"event at t={ev.t} outside scenario duration {self.duration}"
                )
        for seg in self.segments:
            if not 0.0 <= seg.t <= self.duration:
                raise ScenarioError(
                    f"setpoint segment at t={seg.t} outside duration {self.duration}"
                )
        SetpointProgram(self.segments)  # validates non-empty, t0 = 0

    @property
    def program(self) -> SetpointProgram:
        return SetpointProgram(self.segments)

    def with_variant(self, variant: str) -> "Scenario":
        return replace(self, controller=replace(self.controller, variant=canonical_variant(variant)))


# ---------------------------------------------------------------------------
# Loading


def _expect_table(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"{path}: expected a table")
    return value


def _get_num(tab: dict, key: str, path: str, default=None) -> float:
    if key not in tab:
        if default is None:
            raise ScenarioError(f"{path}.{key}: required number missing")
        return default
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number, got {type(v).__name__}")
    return float(v)


def _get_int(tab: dict, key: str, path: str, default=None) -> int:
    if key not in tab:
        if default is None:
            raise ScenarioError(f"{path}.{key}: required integer missing")
        return default
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{path}.{key}: expected an integer")
    return v

def _get_bool(tab: dict, key: str, path: str, default: bool) -> bool:
    v = tab.get(key, default)
    if not isinstance(v, bool):
        raise ScenarioError(f"{path}.{key}: expected a boolean")
    return v


def _get_str(tab: dict, key: str, path: str, default=None) -> str:
    if key not in tab:
        if default is None:
            raise ScenarioError(f"{path}.{key}: required string missing")
        return default
    v = tab[key]
    if not isinstance(v, str):
        raise ScenarioError(f"{path}.{key}: expected a string")
    return v


def _get_vec3(tab: dict, key: str, path: str, default: Vec3 | None) -> Vec3:
    if key not in tab:
        if default is None:
            raise ScenarioError(f"{path}.{key}: required 3-vector missing")
        return default
    v = tab[key]
    if not isinstance(v, list) or len(v) != 3 or any(
        isinstance(c, bool) or not isinstance(c, (int, float)) for c in v
    ):
        raise ScenarioError(f"{path}.{key}: expected an array of 3 numbers")
    try:
        return Vec3.from_seq(v)
    except ValueError as e:
        raise ScenarioError(f"{path}.{key}: {e}") from None


def _get_floats(tab: dict, key: str, path: str, n: int, default) -> list[float]:
    if key not in tab:
        return list(default)
    v = tab[key]
    if not isinstance(v, list) or len(v) != n or any(
        isinstance(c, bool) or not isinstance(c, (int, float)) for c in v
    ):
        raise ScenarioError(f"{path}.{key}: expected an array of {n} numbers")
    return [float(c) for c in v]


def _pid_gains_list(tab: dict, path: str, n: int, defaults: tuple[PidGains, ...]) -> tuple:
    kp = _get_floats(tab, "kp", path, n, [g.kp for g in defaults])
    ki = _get_floats(tab, "ki", path, n, [g.ki for g in defaults])
    kd = _get_floats(tab, "kd", path, n, [g.kd for g in defaults])
    il = _get_floats(tab, "integral_limit", path, n, [g.integral_limit for g in defaults])
    ol = _get_floats(tab, "output_limit", path, n, [g.output_limit for g in defaults])
    try:
        return tuple(
            PidGains(kp[i], ki[i], kd[i], il[i], ol[i]) for i in range(n)
        )
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from None


def _load_payload(tab: dict, path: str) -> Payload:
    try:
        return Payload(
            mass=_get_num(tab, "mass", path),
            offset=_get_vec3(tab, "offset", path, Vec3(0.0, 0.0, 0.0)),
        )
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from None


def _load_segment(tab: dict, path: str) -> Segment:
    t = _get_num(tab, "t", path, 0.0)
    yaw = _get_num(tab, "yaw", path, 0.0)
    if "circle" in tab:
        ctab = _expect_table(tab["circle"], f"{path}.circle")
        circle = CircleSpec(
            radius=_get_num(ctab, "radius", f"{path}.circle"),
            period=_get_num(ctab, "period", f"{path}.circle"),
            center=_get_vec3(ctab, "center", f"{path}.circle", None),
            start_deg=_get_num(ctab, "start_deg", f"{path}.circle", 0.0),
        )
        return Segment(t=t, yaw=yaw, circle=circle)
    modes_raw = tab.get("mode", ["position", "position", "position"])
    if not isinstance(modes_raw, list) or len(modes_raw) != 3:
        raise ScenarioError(f"{path}.mode: expected an array of 3 mode strings")
    modes = []
    for m in modes_raw:
        try:
            modes.append(AxisMode(m))
        except ValueError:
            raise ScenarioError(
                f"{path}.mode: {m!r} is not 'position' or 'velocity'"
            ) from None
    value = _get_vec3(tab, "value", path, None)
    return Segment(t=t, modes=tuple(modes), value=value, yaw=yaw)


def _load_event(tab: dict, path: str) -> EventSpec:
    kind = _get_str(tab, "kind", path)
    t = _get_num(tab, "t", path)
    kwargs = {}
    if kind == "attach_payload":
        kwargs["payload"] = _load_payload(tab, path)
    elif kind == "detach_payload":
        kwargs["index"] = _get_int(tab, "index", path, -1)
    elif kind == "battery_step":
        kwargs["eta"] = _get_num(tab, "eta", path)
    elif kind == "gust":
        kwargs["force"] = _get_vec3(tab, "force", path, None)
        kwargs["duration"] = _get_num(tab, "duration", path)
    elif kind == "rate_scale":
        kwargs["loop"] = _get_str(tab, "loop", path, "all")
        kwargs["factor"] = _get_num(tab, "factor", path)
    elif kind == "jitter_set":
        kwargs["loop"] = _get_str(tab, "loop", path, "all")
        kwargs["amplitude"] = _get_num(tab, "amplitude", path)
    try:
        return EventSpec(t=t, kind=kind, **kwargs)
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from None


def _load_controller(tab: dict, vehicle: VehicleParams, m0: float) -> CascadeConfig:
    path = "controller"
    base = CascadeConfig()
    variant = canonical_variant(_get_str(tab, "variant", path, "tmaf+dmc"))
    tilt_limit = math.radians(_get_num(tab, "tilt_limit_deg", path, math.degrees(base.tilt_limit)))
    u_min = _get_num(tab, "u_min", path, base.u_min)
    u_max = _get_num(tab, "u_max", path, base.u_max)

    tm = _expect_table(tab.get("tmaf", {}), f"{path}.tmaf")
    alpha = _get_vec3(tm, "alpha", f"{path}.tmaf", base.tmaf_alpha)
    beta = _get_vec3(tm, "beta", f"{path}.tmaf", base.tmaf_beta)

    da = _expect_table(tab.get("da", {}), f"{path}.da")
    mu_default = Vec3(m0 / vehicle.f_max, m0 / vehicle.f_max, m0 / vehicle.f_max)
    mu = _get_vec3(da, "mu", f"{path}.da", mu_default)
    lam = _get_vec3(da, "lambda", f"{path}.da", base.da_lambda)
    da_lim = _get_num(da, "integral_limit", f"{path}.da", base.da_integral_limit)

    mi = _expect_table(tab.get("mi", {}), f"{path}.mi")
    mi_mass = _get_num(mi, "assumed_mass", f"{path}.mi", 0.0)
    mi_fe = _get_vec3(mi, "external_force", f"{path}.mi", Vec3(0.0, 0.0, 0.0))

    pp = _expect_table(tab.get("pid_position", {}), f"{path}.pid_position")
    pv = _expect_table(tab.get("pid_velocity", {}), f"{path}.pid_velocity")
    pl = _expect_table(tab.get("pid_lateral", {}), f"{path}.pid_lateral")
    py = _expect_table(tab.get("pid_yaw", {}), f"{path}.pid_yaw")
    try:
        return CascadeConfig(
            variant=variant,
            position_gains=_pid_gains_list(pp, f"{path}.pid_position", 3, base.position_gains),
            velocity_gains=_pid_gains_list(pv, f"{path}.pid_velocity", 3, base.velocity_gains),
            lateral_gains=_pid_gains_list(pl, f"{path}.pid_lateral", 2, base.lateral_gains),
            yaw_gains=_pid_gains_list(py, f"{path}.pid_yaw", 1, (base.yaw_gains,))[0],
            tmaf_alpha=alpha,
            tmaf_beta=beta,
            da_mu=mu,
            da_lambda=lam,
            da_integral_limit=da_lim,
            mi_mass=mi_mass if mi_mass > 0.0 else m0,
            mi_f_max=vehicle.f_max,
            mi_external_force=mi_fe,
            tilt_limit=tilt_limit,
            u_min=u_min,
            u_max=u_max,
        )
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from None


def loads_scenario(text: str, name: str = "<string>") -> Scenario:
    """Parse and validate a scenario document from a string."""
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as e:
        raise ScenarioError(f"{name}: parse error: {e}") from None

    version = _get_int(doc, "version", name)
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"{name}: unsupported version {version} (expected 1)")
    sname = _get_str(doc, "name", name, "unnamed")
    duration = _get_num(doc, "duration", name)
    seed = _get_int(doc, "seed", name, 0)
    inner_dt = _get_num(doc, "inner_dt", name, DEFAULT_INNER_DT)
    if inner_dt <= 0.0 or inner_dt > 0.005:
        raise ScenarioError(f"{name}.inner_dt: must be in (0, 0.005]")

    vt = _expect_table(doc.get("vehicle", {}), "vehicle")
    attachments = tuple(
        _load_payload(_expect_table(p, f"vehicle.attachments[{i}]"), f"vehicle.attachments[{i}]")
        for i, p in enumerate(vt.get("attachments", []))
    )
    try:
        vehicle = VehicleParams(
            mass=_get_num(vt, "mass", "vehicle", 2.5),
            inertia=_get_vec3(vt, "inertia", "vehicle", Vec3(0.082, 0.082, 0.149)),
            f_max=_get_num(vt, "f_max", "vehicle", 60.0),
            rotor_radius=_get_num(vt, "rotor_radius", "vehicle", 0.23),
            attitude_omega_n=_get_num(vt, "attitude_omega_n", "vehicle", 12.0),
            attitude_zeta=_get_num(vt, "attitude_zeta", "vehicle", 0.9),
            yaw_tau=_get_num(vt, "yaw_tau", "vehicle", 0.15),
            battery_eta=_get_num(vt, "battery_eta", "vehicle", 1.0),
            battery_decay=_get_num(vt, "battery_decay", "vehicle", 0.0),
            eta_min=_get_num(vt, "eta_min", "vehicle", 0.6),
            ground_effect=_get_bool(vt, "ground_effect", "vehicle", True),
            ground_plane=_get_bool(vt, "ground_plane", "vehicle", True),
        )
    except ValueError as e:
        raise ScenarioError(f"vehicle: {e}") from None

    st = _expect_table(doc.get("sensors", {}), "sensors")
    try:
        sensors = SensorConfig(
            position_rate=_get_num(st, "position_rate", "sensors", 30.0),
            accel_rate=_get_num(st, "accel_rate", "sensors", 80.0),
            sigma_position=_get_num(st, "sigma_position", "sensors", 0.0),
            sigma_accel=_get_num(st, "sigma_accel", "sensors", 0.0),
            accel_bias=_get_vec3(st, "accel_bias", "sensors", Vec3(0.0, 0.0, 0.0)),
        )
    except ValueError as e:
        raise ScenarioError(f"sensors: {e}") from None
    accel_filter = _get_bool(st, "accel_filter", "sensors", False)

    lt = _expect_table(doc.get("loops", {}), "loops")
    try:
        loops = LoopConfig(
            position_rate=_get_num(lt, "position_rate", "loops", 30.0),
            velocity_rate=_get_num(lt, "velocity_rate", "loops", 60.0),
            thrust_rate=_get_num(lt, "thrust_rate", "loops", 80.0),
            rate_scale=_get_num(lt, "rate_scale", "loops", 1.0),
            jitter=_get_num(lt, "jitter", "loops", 0.0),
        )
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(f"loops: {e}") from None

    segs_raw = doc.get("setpoints", [])
    if not isinstance(segs_raw, list) or not segs_raw:
        raise ScenarioError("setpoints: at least one [[setpoints]] segment required")
    segments = tuple(
        _load_segment(_expect_table(s, f"setpoints[{i}]"), f"setpoints[{i}]")
        for i, s in enumerate(segs_raw)
    )

    events_raw = doc.get("events", [])
    if not isinstance(events_raw, list):
        raise ScenarioError("events: expected an array of tables")
    events = tuple(
        _load_event(_expect_table(e, f"events[{i}]"), f"events[{i}]")
        for i, e in enumerate(events_raw)
    )

    m0 = vehicle.mass + sum(p.mass for p in attachments)
    controller = _load_controller(
        _expect_table(doc.get("controller", {}), "controller"), vehicle, m0
    )

    it = _expect_table(doc.get("initial", {}), "initial")
    first = segments[0]
    default_pos = Vec3(
        first.value.x if first.modes[0] is AxisMode.POSITION else 0.0,
        first.value.y if first.modes[1] is AxisMode.POSITION else 0.0,
        first.value.z if first.modes[2] is AxisMode.POSITION else 0.0,
    ) if first.circle is None else first.at(0.0).value
    initial_position = _get_vec3(it, "position", "initial", default_pos)
    initial_yaw = _get_num(it, "yaw", "initial", first.yaw)

    try:
        return Scenario(
            name=sname,
            duration=duration,
            seed=seed,
            vehicle=vehicle,
            attachments=attachments,
            initial_position=initial_position,
            initial_yaw=initial_yaw,
            sensors=sensors,
            loops=loops,
            controller=controller,
            segments=segments,
            events=events,
            inner_dt=inner_dt,
            accel_filter=accel_filter,
        )
    except ValueError as e:
        raise ScenarioError(str(e)) from None


def load_scenario(path) -> Scenario:
    """Load and validate a `.scn` file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ScenarioError(f"{path}: {e}") from None
    return loads_scenario(text, name=str(path))


# ---------------------------------------------------------------------------
# Running


@dataclass
class RunResult:
    record: RunRecord
    metrics: Metrics
    stats: SchedulerStats

    @property
    def aborted(self) -> bool:
        return self.record.aborted


def run_scenario(scenario: Scenario) -> RunResult:
    """Wire plant, sensors, controllers and scheduler, then execute the run."""
    s = scenario
    initial = VehicleState(
        position=s.initial_position,
        velocity=Vec3(0.0, 0.0, 0.0),
        acceleration=Vec3(0.0, 0.0, 0.0),
        attitude=Attitude(0.0, 0.0, s.initial_yaw),
    )
    plant = Plant(s.vehicle, initial, s.attachments, s.inner_dt)
    suite = SensorSuite(s.sensors, s.seed)
    estimator = Estimator(
        1.0 / s.sensors.position_rate, accel_filter=s.accel_filter
    )
    program = s.program
    sched = Scheduler(s.seed)
    record = RunRecord(scenario=s.name, seed=s.seed)

    current_cmd = [ControlCommand(0.0, 0.0, 0.0, 0.0)]
    active_forces: list[Vec3] = []

    def advance(t0: float, t1: float) -> None:
        force = Vec3(0.0, 0.0, 0.0)
        for f in active_forces:
            force = force + f
        plant.step(current_cmd[0], t1 - t0, force)

    sched.advance = advance

    def on_pos_sample(now: float, _dt: float) -> None:
        estimator.on_position(suite.sample_position(plant.state()), now)

    def on_acc_sample(now: float, _dt: float) -> None:
        true = plant.state()
        estimator.on_accel(suite.sample_accel(true), now)
        estimator.on_attitude(suite.sample_attitude(true), now)

    sched.register(LoopSpec("sensor_pos", s.sensors.position_rate), on_pos_sample)
    sched.register(LoopSpec("sensor_accel", s.sensors.accel_rate), on_acc_sample)

    cascade = make_cascade(s.controller, s.loops.spec("thrust").period)

    def on_position(now: float, _dt: float) -> None:
        cascade.on_position_tick(
            estimator.estimate(), program.at(now), handles["position"].period
        )

    def on_velocity(now: float, _dt: float) -> None:
        cascade.on_velocity_tick(
            estimator.estimate(), program.at(now), handles["velocity"].period
        )

    def on_thrust(now: float, measured_dt: float) -> None:
        sp = program.at(now)
        try:
            cmd = cascade.on_thrust_tick(
                estimator.estimate(), sp, handles["thrust"].period, measured_dt
            )
        except FreeFallError as e:
            record.mark_aborted(now, str(e))
            sched.stop()
            return
        current_cmd[0] = cmd
        true = plant.state()
        record.append((
            now,
            true.position.x, true.position.y, true.position.z,
            true.velocity.x, true.velocity.y, true.velocity.z,
            true.acceleration.x, true.acceleration.y, true.acceleration.z,
            true.attitude.roll, true.attitude.pitch, true.attitude.yaw,
            cmd.u, cmd.roll_sp, cmd.pitch_sp,
            sp.value.x, sp.value.y, sp.value.z,
            plant.total_mass, plant.eta,
        ))

    handles = {
        "position": sched.register(s.loops.spec("position"), on_position),
        "velocity": sched.register(s.loops.spec("velocity"), on_velocity),
        "thrust": sched.register(s.loops.spec("thrust"), on_thrust),
    }

    def select_loops(which: str) -> list[str]:
        return list(handles) if which == "all" else [which]

    for ev in s.events:
        if ev.kind == "attach_payload":
            sched.at(ev.t, lambda _t, p=ev.payload: plant.attach(p))
        elif ev.kind == "detach_payload":
            sched.at(ev.t, lambda _t, i=ev.index: plant.detach(i))
        elif ev.kind == "battery_step":
            sched.at(ev.t, lambda _t, e=ev.eta: plant.set_battery(e))
        elif ev.kind == "gust":
            force = ev.force

            def begin(_t, f=force):
                active_forces.append(f)

            def end(_t, f=force):
                active_forces.remove(f)

            sched.at(ev.t, begin)
            if ev.t + ev.duration < s.duration:
                sched.at(ev.t + ev.duration, end)
        elif ev.kind == "rate_scale":
            def scale(now, names=select_loops(ev.loop), f=ev.factor):
                for n in names:
                    handles[n].set_rate_scale(f, now)
                if "thrust" in names:
                    cascade.set_thrust_period(handles["thrust"].period)

            sched.at(ev.t, scale)
        elif ev.kind == "jitter_set":
            def jitter(_now, names=select_loops(ev.loop), a=ev.amplitude):
                for n in names:
                    handles[n].set_jitter(a)

            sched.at(ev.t, jitter)

    stats = sched.run(Timeline(s.duration, s.seed, s.inner_dt))
    metrics = compute_metrics(record, program, s.events, s.duration)
    return RunResult(record=record, metrics=metrics, stats=stats)


# ---------------------------------------------------------------------------
# Comparison and sweeps


def compare_variants(
    scenario: Scenario, variants: list[str], jobs: int = 1
) -> CompareTable:
    """Run the scenario once per variant (identical seed/events) and tabulate."""
    if len(variants) < 1:
        raise ScenarioError("compare needs at least one variant")
    canon = [canonical_variant(v) for v in variants]

    def one(v: str) -> CompareRow:
        result = run_scenario(scenario.with_variant(v))
        return CompareRow(variant=v, metrics=result.metrics, aborted=result.aborted)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, canon))
    else:
        rows = [one(v) for v in canon]
    return CompareTable(scenario=scenario.name, rows=tuple(rows))


SWEEP_STAGES = ("tmaf", "pid_v", "pid_p", "yaw")
_STAGE_SECTION = {
    "tmaf": "tmaf",
    "pid_v": "pid_velocity",
    "pid_p": "pid_position",
    "yaw": "pid_yaw",
}
_STAGE_PARAMS = {
    "tmaf": ("alpha", "beta"),
    "pid_v": ("kp", "ki", "kd", "lat_kp", "lat_ki", "lat_kd"),
    "pid_p": ("kp", "ki", "kd"),
    "yaw": ("kp", "ki", "kd"),
}


class SweepOrderError(ScenarioError):
    """Raised when a sweep stage is requested before its prerequisites."""


@dataclass(frozen=True)
class SweepRow:
    params: dict
    rank: float
    metrics: Metrics | None
    aborted: bool


@dataclass(frozen=True)
class SweepResult:
    stage: str
    rows: tuple[SweepRow, ...]

    @property
    def best(self) -> SweepRow | None:
        ok = [r for r in self.rows if not r.aborted and math.isfinite(r.rank)]
        return min(ok, key=lambda r: r.rank) if ok else None

    def to_csv(self, precision: int = 9) -> str:
        names = sorted({k for r in self.rows for k in r.params})
        lines = [",".join(names + ["rank", "aborted"])]
        for r in sorted(self.rows, key=lambda r: (math.isnan(r.rank), r.rank)):
            cells = ["%.*g" % (precision, r.params.get(n, math.nan)) for n in names]
            cells.append("%.*g" % (precision, r.rank))
            cells.append("1" if r.aborted else "0")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _required_stages(scenario: Scenario, stage: str) -> list[str]:
    idx = SWEEP_STAGES.index(stage)
    needed = list(SWEEP_STAGES[:idx])
    if "tmaf" in needed and not scenario.controller.variant.startswith("tmaf"):
        needed.remove("tmaf")
    return needed


def check_sweep_order(scenario: Scenario, stage: str, pinned_sections: set[str]) -> None:
    """Later stages need the earlier stages' tuned gains pinned explicitly."""
    if stage not in SWEEP_STAGES:
        raise ScenarioError(f"unknown sweep stage {stage!r}; stages are {SWEEP_STAGES}")
    missing = [
        s for s in _required_stages(scenario, stage)
        if _STAGE_SECTION[s] not in pinned_sections
    ]
    if missing:
        raise SweepOrderError(
            f"stage '{stage}' swept before {missing}: the tuning order is "
            "tmaf -> pid_v -> pid_p -> yaw; pin earlier stages with --gains-file "
            "(sections " + ", ".join(f"[controller.{_STAGE_SECTION[m]}]" for m in missing) + ")"
        )


def _apply_stage(cfg: CascadeConfig, stage: str, params: dict) -> CascadeConfig:
    def triple(gains: tuple, **kw) -> tuple:
        return tuple(replace(g, **kw) for g in gains)

    if stage == "tmaf":
        out = cfg
        if "alpha" in params:
            a = params["alpha"]
            out = replace(out, tmaf_alpha=Vec3(a, a, a))
        if "beta" in params:
            b = params["beta"]
            out = replace(out, tmaf_beta=Vec3(b, b, b))
        return out
    if stage == "pid_v":
        kw = {k: params[k] for k in ("kp", "ki", "kd") if k in params}
        out = replace(cfg, velocity_gains=triple(cfg.velocity_gains, **kw)) if kw else cfg
        lat = {k[4:]: params[k] for k in ("lat_kp", "lat_ki", "lat_kd") if k in params}
        if lat:
            out = replace(out, lateral_gains=triple(out.lateral_gains, **lat))
        return out
    if stage == "pid_p":
        kw = {k: params[k] for k in ("kp", "ki", "kd") if k in params}
        return replace(cfg, position_gains=triple(cfg.position_gains, **kw)) if kw else cfg
    if stage == "yaw":
        kw = {k: params[k] for k in ("kp", "ki", "kd") if k in params}
        return replace(cfg, yaw_gains=replace(cfg.yaw_gains, **kw)) if kw else cfg
    raise ScenarioError(f"unknown sweep stage {stage!r}")


def _sweep_rank(stage: str, metrics: Metrics) -> float:
    if stage in ("tmaf", "pid_v"):
        return metrics.rmse.z
    if stage == "pid_p":
        r = metrics.rmse
        return math.sqrt((r.x * r.x + r.y * r.y + r.z * r.z) / 3.0)
    return metrics.yaw_rmse


def sweep_stage(
    scenario: Scenario,
    stage: str,
    grids: dict[str, list[float]],
    pinned_sections: set[str] | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Grid-evaluate one tuning stage; rows ranked by the stage's RMSE metric."""
    check_sweep_order(scenario, stage, pinned_sections or set())
    if not grids:
        raise ScenarioError("sweep needs at least one parameter range")
    for name, values in grids.items():
        if name not in _STAGE_PARAMS[stage]:
            raise ScenarioError(
                f"parameter {name!r} not valid for stage '{stage}' "
                f"(valid: {_STAGE_PARAMS[stage]})"
            )
        if not values:
            raise ScenarioError(f"parameter {name!r} has an empty range")

    names = list(grids)
    combos = [dict(zip(names, vals)) for vals in itertools.product(*(grids[n] for n in names))]

    def one(params: dict) -> SweepRow:
        cfg = _apply_stage(scenario.controller, stage, params)
        try:
            result = run_scenario(replace(scenario, controller=cfg))
        except ValueError:
            return SweepRow(params=params, rank=math.inf, metrics=None, aborted=True)
        rank = math.inf if result.aborted else _sweep_rank(stage, result.metrics)
        if math.isnan(rank):
            rank = math.inf
        return SweepRow(
            params=params, rank=rank, metrics=result.metrics, aborted=result.aborted
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, combos))
    else:
        rows = [one(p) for p in combos]
    return SweepResult(stage=stage, rows=tuple(rows))


def gains_fragment(stage: str, cfg: CascadeConfig) -> str:
    """Render the tuned stage section as TOML mergeable into scenario files."""
    def arr(vals) -> str:
        return "[" + ", ".join("%.9g" % v for v in vals) + "]"

    if stage == "tmaf":
        a, b = cfg.tmaf_alpha, cfg.tmaf_beta
        return (
            "[controller.tmaf]\n"
            f"alpha = {arr(a.as_tuple())}\n"
            f"beta = {arr(b.as_tuple())}\n"
        )
    section = _STAGE_SECTION[stage]
    if stage == "pid_v":
        gains_list = cfg.velocity_gains
    elif stage == "pid_p":
        gains_list = cfg.position_gains
    else:
        gains_list = (cfg.yaw_gains,)
    lines = [f"[controller.{section}]"]
    for key in ("kp", "ki", "kd"):
        lines.append(f"{key} = {arr(getattr(g, key) for g in gains_list)}")
    out = "\n".join(lines) + "\n"
    if stage == "pid_v":
        lat = cfg.lateral_gains
        out += (
            "\n[controller.pid_lateral]\n"
            f"kp = {arr(g.kp for g in lat)}\n"
            f"ki = {arr(g.ki for g in lat)}\n"
            f"kd = {arr(g.kd for g in lat)}\n"
        )
    return out
