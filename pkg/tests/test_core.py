"""Core math: vectors, angles, the Euler convention, and value types."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tmdc.core import (
    Attitude,
    AxisMode,
    ControlCommand,
    Setpoint,
    Vec3,
    clamp,
    euler_to_rotation,
    thrust_axis,
    wrap_angle,
    yaw_rotate_world_to_body,
)

angles = st.floats(
    min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False
)
tilts = st.floats(min_value=-1.55, max_value=1.55)
finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_clamp():
    assert clamp(0.5, 0.0, 1.0) == 0.5
    assert clamp(-1.0, 0.0, 1.0) == 0.0
    assert clamp(2.0, 0.0, 1.0) == 1.0


class TestWrapAngle:
    # boundary convention: result lives in (-pi, pi]
    def test_cases(self):
        assert wrap_angle(0.0) == 0.0
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)
        assert wrap_angle(2.0 * math.pi) == pytest.approx(0.0, abs=1e-12)
        assert wrap_angle(math.pi + 0.1) == pytest.approx(-math.pi + 0.1)
        assert wrap_angle(-math.pi - 0.1) == pytest.approx(math.pi - 0.1)
        assert wrap_angle(7.5 * math.pi) == pytest.approx(-0.5 * math.pi)

    @given(angles)
    def test_range_and_equivalence(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi + 1e-12
        # same point on the circle
        assert math.cos(w) == pytest.approx(math.cos(a), abs=1e-9)
        assert math.sin(w) == pytest.approx(math.sin(a), abs=1e-9)


class TestVec3:
    def test_arithmetic_matches_numpy(self):
        a = Vec3(1.0, -2.0, 3.0)
        b = Vec3(0.5, 4.0, -1.0)
        np.testing.assert_allclose((a + b).as_array(), a.as_array() + b.as_array())
        np.testing.assert_allclose((a - b).as_array(), a.as_array() - b.as_array())
        np.testing.assert_allclose((a * 2.5).as_array(), a.as_array() * 2.5)
        assert a.dot(b) == pytest.approx(float(np.dot(a.as_array(), b.as_array())))
        np.testing.assert_allclose(
            a.cross(b).as_array(), np.cross(a.as_array(), b.as_array())
        )
        assert a.norm() == pytest.approx(float(np.linalg.norm(a.as_array())))
        np.testing.assert_allclose(
            a.hadamard(b).as_array(), a.as_array() * b.as_array()
        )

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Vec3(float("nan"), 0.0, 0.0)
        with pytest.raises(ValueError):
            Vec3(0.0, float("inf"), 0.0)

    def test_frozen(self):
        v = Vec3(1.0, 2.0, 3.0)
        with pytest.raises(AttributeError):
            v.x = 5.0

    @given(finite, finite, finite, finite, finite, finite)
    def test_cross_orthogonality(self, ax, ay, az, bx, by, bz):
        a, b = Vec3(ax, ay, az), Vec3(bx, by, bz)
        c = a.cross(b)
        scale = max(a.norm() * b.norm(), 1.0)
        assert abs(c.dot(a)) <= 1e-7 * scale * max(a.norm(), 1.0)
        assert abs(c.dot(b)) <= 1e-7 * scale * max(b.norm(), 1.0)


class TestAttitude:
    def test_yaw_wraps(self):
        att = Attitude(0.0, 0.0, 3.0 * math.pi)
        assert att.yaw == pytest.approx(math.pi)

    def test_tilt_bounds(self):
        with pytest.raises(ValueError):
            Attitude(math.pi / 2.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            Attitude(0.0, -math.pi / 2.0, 0.0)
        Attitude(1.55, -1.55, 0.0)  # inside the open interval


class TestRotation:
    @given(tilts, tilts, angles)
    def test_orthonormal(self, roll, pitch, yaw):
        R = euler_to_rotation(Attitude(roll, pitch, yaw))
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_identity_at_level(self):
        R = euler_to_rotation(Attitude(0.0, 0.0, 0.0))
        np.testing.assert_allclose(R, np.eye(3), atol=1e-15)

    def test_third_row_closed_form(self):
        # bottom row of R must be (sin th, -cos th sin phi, cos th cos phi)
        for roll, pitch, yaw in [(0.2, -0.3, 0.7), (-0.5, 0.4, -2.0), (0.0, 1.0, 3.0)]:
            R = euler_to_rotation(Attitude(roll, pitch, yaw))
            expect = np.array([
                math.sin(pitch),
                -math.cos(pitch) * math.sin(roll),
                math.cos(pitch) * math.cos(roll),
            ])
            np.testing.assert_allclose(R[2, :], expect, atol=1e-15)

    @given(tilts, tilts, angles)
    def test_thrust_axis_is_third_column(self, roll, pitch, yaw):
        att = Attitude(roll, pitch, yaw)
        R = euler_to_rotation(att)
        np.testing.assert_allclose(thrust_axis(att).as_array(), R[:, 2], atol=1e-14)

    def test_positive_pitch_tilts_thrust_backward(self):
        # +theta leans the thrust axis toward -x: accelerating +x needs -theta
        z_b = thrust_axis(Attitude(0.0, 0.3, 0.0))
        assert z_b.x < 0.0
        # +phi leans it toward +y
        z_b = thrust_axis(Attitude(0.3, 0.0, 0.0))
        assert z_b.y > 0.0

    def test_yaw_rotate_world_to_body(self):
        v = yaw_rotate_world_to_body(Vec3(1.0, 0.0, 0.0), math.pi / 2.0)
        assert v.x == pytest.approx(0.0, abs=1e-15)
        assert v.y == pytest.approx(-1.0)
        assert v.z == 0.0


class TestValueTypes:
    def test_setpoint_modes(self):
        sp = Setpoint(
            (AxisMode.POSITION, AxisMode.VELOCITY, AxisMode.POSITION),
            Vec3(1.0, 0.2, 0.5),
            yaw=0.1,
        )
        assert sp.mode(0) is AxisMode.POSITION
        assert sp.mode(1) is AxisMode.VELOCITY
        full = Setpoint.position(Vec3(0.0, 0.0, 0.5))
        assert all(full.mode(i) is AxisMode.POSITION for i in range(3))

    def test_control_command_bounds(self):
        ControlCommand(0.0, 0.0, 0.0, 0.0)
        ControlCommand(1.0, 1.2, -1.2, 0.5)
        with pytest.raises(ValueError):
            ControlCommand(1.1, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            ControlCommand(-0.1, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            ControlCommand(0.5, math.pi / 2.0, 0.0, 0.0)
