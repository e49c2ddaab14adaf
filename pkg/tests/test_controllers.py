"""Control laws: PID, TMAF microstepping, DA, MI, DMC and GT attitude paths."""

import inspect
import math

import pytest
from hypothesis import given, settings, strategies as st

from tmdc.controllers import (
    Cascade,
    CascadeConfig,
    DaController,
    DegenerateThrustError,
    FREE_FALL_GUARD,
    FreeFallError,
    Pid,
    PidGains,
    TmafController,
    VARIANTS,
    dmc_lateral,
    dmc_thrust,
    gt_attitude,
    make_cascade,
    mi_force,
)
from tmdc.core import (
    Attitude,
    AxisMode,
    Setpoint,
    Vec3,
    VehicleState,
    thrust_axis,
)

T80 = 1.0 / 80.0


class TestPid:
    def test_pure_proportional(self):
        pid = Pid(PidGains(kp=2.0))
        assert pid.step(1.5, 0.1) == pytest.approx(3.0)

    def test_integral_rectangle(self):
        pid = Pid(PidGains(kp=0.0, ki=1.0))
        assert pid.step(2.0, 0.5) == pytest.approx(1.0)
        assert pid.step(2.0, 0.5) == pytest.approx(2.0)

    def test_integral_clamp(self):
        pid = Pid(PidGains(kp=0.0, ki=1.0, integral_limit=0.8))
        for _ in range(10):
            out = pid.step(1.0, 0.5)
        assert out == pytest.approx(0.8)

    def test_output_clamp_and_antiwindup(self):
        pid = Pid(PidGains(kp=1.0, ki=1.0, output_limit=1.0))
        for _ in range(20):
            out = pid.step(5.0, 0.1)
        assert out == 1.0
        # integral froze instead of winding: error reversal must bite instantly
        pid_frozen_integral = pid.integral
        assert pid_frozen_integral < 1.0
        out = pid.step(-5.0, 0.1)
        assert out < 0.0

    def test_unwinding_allowed_when_saturated(self):
        # error pulling the output back from the rail must still integrate
        pid = Pid(PidGains(kp=0.0, ki=1.0, output_limit=0.5))
        for _ in range(10):
            pid.step(1.0, 0.5)
        top = pid.integral
        pid.step(-1.0, 0.5)
        assert pid.integral < top

    def test_derivative_filtered(self):
        gains = PidGains(kp=0.0, ki=0.0, kd=1.0)
        pid = Pid(gains)
        pid.step(0.0, 0.1)
        out = pid.step(1.0, 0.1)  # raw derivative = 10
        # first push primes the filter with derivative 0, so the second
        # output is the CWMA of [10, 0] with newest-first weights
        from tmdc.filters import cosine_weights

        w = cosine_weights(4, math.radians(80.0))
        expect = (w[0] * 10.0 + w[1] * 0.0) / (w[0] + w[1])
        assert out == pytest.approx(expect)

    def test_reset(self):
        pid = Pid(PidGains(kp=1.0, ki=1.0, kd=1.0))
        pid.step(3.0, 0.1)
        pid.reset()
        assert pid.integral == 0.0
        assert pid.step(0.0, 0.1) == 0.0

    def test_gains_validation(self):
        with pytest.raises(ValueError):
            PidGains(kp=1.0, integral_limit=0.0)
        with pytest.raises(ValueError):
            PidGains(kp=1.0, output_limit=-1.0)

    def test_scaled(self):
        g = PidGains(kp=1.0, ki=0.4, kd=0.2).scaled(0.5)
        assert (g.kp, g.ki, g.kd) == (0.5, 0.2, 0.1)


class TestTmaf:
    def test_initial_gamma_zero(self):
        ctl = TmafController(Vec3(1.0, 1.0, 1.0), Vec3.zero(), period=T80)
        assert ctl.gamma == Vec3(0.0, 0.0, 0.0)

    def test_documented_single_step(self):
        # fresh state, alpha=1, beta=0, e_a=(0,0,0.5) -> output (0,0,0.5)
        ctl = TmafController(
            Vec3(1.0, 1.0, 1.0), Vec3.zero(), period=T80, u_min=0.0, u_max=1.0
        )
        out = ctl.step(Vec3(0.0, 0.0, 0.5), Vec3(0.0, 0.0, 0.0))
        assert out == Vec3(0.0, 0.0, 0.5)

    def test_no_mass_or_dt_in_interface(self):
        # the law is deliberately blind to mass, gravity and timestep
        params = set(inspect.signature(TmafController.__init__).parameters)
        assert params.isdisjoint({"mass", "m", "gravity", "g", "dt"})
        step_params = set(inspect.signature(TmafController.step).parameters)
        assert step_params.isdisjoint({"mass", "m", "gravity", "g", "dt", "t"})

    def test_accumulation_exact(self):
        # pure proportional microsteps must sum exactly (float determinism)
        alpha = 0.5
        ctl = TmafController(
            Vec3(alpha, alpha, alpha), Vec3.zero(), period=T80, u_min=0.0, u_max=1.0
        )
        gamma = 0.0
        errors = [0.001, 0.002, -0.0005, 0.0015, 0.0008] * 40
        for e in errors:
            out = ctl.step(Vec3(0.0, 0.0, e), Vec3.zero())
            gamma += alpha * e
            gamma = min(max(gamma, 0.0), 1.0)
        assert abs(out.z - gamma) <= 1e-9

    def test_z_clamped_to_band(self):
        ctl = TmafController(
            Vec3(1.0, 1.0, 1.0), Vec3.zero(), period=T80, u_min=0.05, u_max=0.95
        )
        out = ctl.step(Vec3(0.0, 0.0, 100.0), Vec3.zero())
        assert out.z == 0.95
        out = ctl.step(Vec3(0.0, 0.0, -100.0), Vec3.zero())
        assert out.z == 0.05

    def test_lateral_clamped_symmetric(self):
        ctl = TmafController(
            Vec3(1.0, 1.0, 1.0), Vec3.zero(), period=T80, u_min=0.05, u_max=0.95
        )
        out = ctl.step(Vec3(-100.0, 100.0, 0.0), Vec3.zero())
        assert out.x == -0.95
        assert out.y == 0.95

    def test_beta_uses_error_derivative(self):
        # beta acts on the backward difference of the error over nominal T
        beta = 0.1
        ctl = TmafController(
            Vec3(0.0, 0.0, 0.0), Vec3(beta, beta, beta), period=0.5,
            u_min=0.0, u_max=1.0,
        )
        ctl.step(Vec3(0.0, 0.0, 0.1), Vec3.zero())  # first: derivative 0
        out = ctl.step(Vec3(0.0, 0.0, 0.3), Vec3.zero())
        # d(e)/dt = (0.3 - 0.1) / 0.5 = 0.4 -> delta = beta * 0.4 = 0.04
        assert out.z == pytest.approx(0.04)

    def test_set_period(self):
        ctl = TmafController(Vec3.zero(), Vec3(0.0, 0.0, 0.1), period=0.5)
        ctl.set_period(0.25)
        assert ctl.period == 0.25


class TestDa:
    def test_feedforward_term(self):
        # u = mu*(a* + g*zhat) with zero integral on the first step half
        mu = Vec3(0.0417, 0.0417, 0.0417)
        da = DaController(mu, Vec3.zero(), u_min=0.0, u_max=1.0)
        out = da.step(Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, 0.0), dt=T80)
        assert out.z == pytest.approx(0.0417 * 9.81)

    def test_integral_accumulates_measured_dt(self):
        # I += (a* - a_meas) * dt with the *measured* gap, not nominal
        lam = Vec3(0.0, 0.0, 1.0)
        da = DaController(
            Vec3.zero(), lam, integral_limit=10.0, u_min=0.0, u_max=1.0
        )
        da.step(Vec3(0.0, 0.0, 1.0), Vec3.zero(), dt=0.5)
        out = da.step(Vec3(0.0, 0.0, 1.0), Vec3.zero(), dt=0.25)
        assert da.integral.z == pytest.approx(0.75)
        assert out.z == pytest.approx(0.75)

    def test_integral_clamp(self):
        lam = Vec3(0.0, 0.0, 1.0)
        da = DaController(Vec3.zero(), lam, integral_limit=0.3, u_min=0.0, u_max=1.0)
        for _ in range(100):
            out = da.step(Vec3(0.0, 0.0, 5.0), Vec3.zero(), dt=0.5)
        assert da.integral.z == pytest.approx(0.3)
        assert out.z == pytest.approx(0.3)

    def test_output_clamps(self):
        da = DaController(
            Vec3(1.0, 1.0, 1.0), Vec3.zero(), u_min=0.05, u_max=0.95
        )
        out = da.step(Vec3(50.0, -50.0, 100.0), Vec3.zero(), dt=T80)
        assert out.z == 0.95
        assert out.x == 0.95
        assert out.y == -0.95
        out = da.step(Vec3(0.0, 0.0, -100.0), Vec3.zero(), dt=T80)
        assert out.z == 0.05


class TestMi:
    def test_hover_force(self):
        f = mi_force(Vec3.zero(), mass=4.1)
        assert f.z == pytest.approx(4.1 * 9.81)
        assert f.x == 0.0 and f.y == 0.0

    def test_external_force_subtracted(self):
        f = mi_force(Vec3.zero(), mass=2.0, external_force=Vec3(1.0, 0.0, -3.0))
        assert f.x == pytest.approx(-1.0)
        assert f.z == pytest.approx(2.0 * 9.81 + 3.0)

    def test_mass_validation(self):
        with pytest.raises(ValueError):
            mi_force(Vec3.zero(), mass=0.0)


class TestGtAttitude:
    def test_diagonal_force_pitch(self):
        # force (1,0,1)/sqrt(2) at yaw 0 -> pitch -45 deg, roll 0
        f = Vec3(1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0))
        intensity, roll_sp, pitch_sp = gt_attitude(
            f, 0.0, Attitude(0.0, 0.0, 0.0), tilt_limit=math.radians(60.0)
        )
        assert pitch_sp == pytest.approx(-math.pi / 4.0)
        assert roll_sp == pytest.approx(0.0, abs=1e-12)
        assert intensity == pytest.approx(f.z)  # projection on current (level) axis

    def test_lateral_y_force_rolls_positive(self):
        f = Vec3(0.0, 0.5, 9.0)
        _, roll_sp, pitch_sp = gt_attitude(f, 0.0, Attitude(0.0, 0.0, 0.0))
        assert roll_sp > 0.0
        assert pitch_sp == pytest.approx(0.0, abs=1e-12)

    def test_consistency_with_thrust_axis(self):
        # commanded attitude's thrust axis must align with the force direction
        f = Vec3(0.8, -0.6, 9.5)
        _, roll_sp, pitch_sp = gt_attitude(
            f, 0.3, Attitude(0.0, 0.0, 0.3), tilt_limit=math.radians(45.0)
        )
        z_b = thrust_axis(Attitude(roll_sp, pitch_sp, 0.3))
        f_dir = f * (1.0 / f.norm())
        assert z_b.dot(f_dir) == pytest.approx(1.0, abs=1e-9)

    def test_tilt_limit_clamps(self):
        f = Vec3(100.0, 0.0, 1.0)
        _, roll_sp, pitch_sp = gt_attitude(
            f, 0.0, Attitude(0.0, 0.0, 0.0), tilt_limit=math.radians(20.0)
        )
        assert abs(pitch_sp) <= math.radians(20.0) + 1e-12

    def test_degenerate_cases(self):
        with pytest.raises(DegenerateThrustError):
            gt_attitude(Vec3.zero(), 0.0, Attitude(0.0, 0.0, 0.0))
        with pytest.raises(DegenerateThrustError):
            gt_attitude(Vec3(1.0, 0.0, -0.5), 0.0, Attitude(0.0, 0.0, 0.0))


class TestDmc:
    def test_thrust_inversion_exact(self):
        # u * cos(tilt) must reproduce f_z to 1e-12 when unclamped
        for roll, pitch in [(0.1, -0.2), (0.3, 0.25), (-0.4, 0.1)]:
            att = Attitude(roll, pitch, 1.3)
            f_z = 0.6
            u = dmc_thrust(f_z, att, u_min=0.0, u_max=1.0)
            assert abs(u * thrust_axis(att).z - f_z) <= 1e-12

    def test_thrust_clamps(self):
        att = Attitude(0.0, 0.0, 0.0)
        assert dmc_thrust(2.0, att) == 0.95
        assert dmc_thrust(-1.0, att) == 0.05

    def test_free_fall_guard(self):
        # cos(tilt) <= 0.1 must raise, not command huge thrust
        att = Attitude(0.0, 1.48, 0.0)  # cos ~ 0.0907
        with pytest.raises(FreeFallError) as exc:
            dmc_thrust(0.4, att, guard=FREE_FALL_GUARD)
        assert exc.value.cos_tilt <= FREE_FALL_GUARD

    def test_guard_threshold_boundary(self):
        att = Attitude(0.0, 1.43, 0.0)  # cos ~ 0.1423 > guard
        dmc_thrust(0.4, att)  # no raise

    def test_lateral_sign_convention(self):
        # +x velocity demand -> negative pitch; +y demand -> positive roll
        pid_x, pid_y = Pid(PidGains(kp=1.0)), Pid(PidGains(kp=1.0))
        roll_sp, pitch_sp = dmc_lateral(
            Vec3(1.0, 0.0, 0.0), Vec3.zero(), 0.0, pid_x, pid_y, dt=T80,
            tilt_limit=math.radians(80.0),
        )
        assert pitch_sp < 0.0
        assert roll_sp == pytest.approx(0.0, abs=1e-12)
        pid_x.reset(), pid_y.reset()
        roll_sp, pitch_sp = dmc_lateral(
            Vec3(0.0, 1.0, 0.0), Vec3.zero(), 0.0, pid_x, pid_y, dt=T80,
            tilt_limit=math.radians(80.0),
        )
        assert roll_sp > 0.0
        assert pitch_sp == pytest.approx(0.0, abs=1e-12)

    def test_lateral_heading_frame(self):
        # at yaw=90 deg a world +x demand is a body -y demand
        pid_x, pid_y = Pid(PidGains(kp=1.0)), Pid(PidGains(kp=1.0))
        roll_sp, pitch_sp = dmc_lateral(
            Vec3(1.0, 0.0, 0.0), Vec3.zero(), math.pi / 2.0, pid_x, pid_y, dt=T80,
            tilt_limit=math.radians(80.0),
        )
        assert roll_sp < 0.0
        assert pitch_sp == pytest.approx(0.0, abs=1e-9)

    def test_lateral_tilt_clamp(self):
        pid_x, pid_y = Pid(PidGains(kp=10.0)), Pid(PidGains(kp=10.0))
        roll_sp, pitch_sp = dmc_lateral(
            Vec3(100.0, 100.0, 0.0), Vec3.zero(), 0.0, pid_x, pid_y, dt=T80,
            tilt_limit=math.radians(25.0),
        )
        assert abs(roll_sp) <= math.radians(25.0)
        assert abs(pitch_sp) <= math.radians(25.0)


def _estimate(z=0.5, vz=0.0, az=0.0):
    return VehicleState(
        position=Vec3(0.0, 0.0, z),
        velocity=Vec3(0.0, 0.0, vz),
        acceleration=Vec3(0.0, 0.0, az),
        attitude=Attitude(0.0, 0.0, 0.0),
    )


class TestCascade:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_all_variants_produce_commands(self, variant):
        cfg = CascadeConfig(variant=variant, mi_mass=2.5)
        cascade = make_cascade(cfg, thrust_period=T80)
        sp = Setpoint.position(Vec3(0.0, 0.0, 0.5))
        est = _estimate()
        cascade.on_position_tick(est, sp, 1.0 / 30.0)
        cascade.on_velocity_tick(est, sp, 1.0 / 60.0)
        cmd = cascade.on_thrust_tick(est, sp, T80, T80)
        assert 0.0 <= cmd.u <= 1.0
        assert abs(cmd.roll_sp) < math.pi / 2.0

    def test_velocity_mode_bypasses_position_loop(self):
        cfg = CascadeConfig()
        cascade = make_cascade(cfg, thrust_period=T80)
        sp = Setpoint(
            (AxisMode.POSITION, AxisMode.POSITION, AxisMode.VELOCITY),
            Vec3(0.0, 0.0, 0.77),
            0.0,
        )
        # no position tick at all: velocity setpoint must still be available
        v_sp = cascade.velocity_setpoint(sp)
        assert v_sp.z == 0.77

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            CascadeConfig(variant="tmaf+mi")

    def test_gt_path_idles_at_degenerate_start(self):
        # TMAF starts at Gamma=0; with zero acceleration error the force
        # vector stays (0,0,0) and the GT path must fall back to an idle
        # level command instead of raising
        cfg = CascadeConfig(variant="tmaf+gt")
        cascade = make_cascade(cfg, thrust_period=T80)
        sp = Setpoint.position(Vec3(0.0, 0.0, 0.5))
        est = _estimate(az=0.0)
        cmd = cascade.on_thrust_tick(est, sp, T80, T80)
        assert cmd.u == cfg.u_min
        assert cmd.roll_sp == 0.0 and cmd.pitch_sp == 0.0
