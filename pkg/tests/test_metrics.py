"""Trace records, window metrics, and the CSV formats."""

import math

import numpy as np
import pytest

from tmdc.core import AxisMode, Setpoint, Vec3
from tmdc.metrics import (
    COMPARE_HEADER,
    METRICS_HEADER,
    RunRecord,
    TRACE_COLUMNS,
    TRACE_HEADER,
    compute_metrics,
    compute_peak_offset,
    compute_rmse,
    format_float,
)
from tmdc.scenario import Segment, SetpointProgram


def _row(t, x=0.0, y=0.0, z=0.5, **kw):
    base = dict(
        t=t, x=x, y=y, z=z, vx=0.0, vy=0.0, vz=0.0, ax=0.0, ay=0.0, az=0.0,
        phi=0.0, theta=0.0, psi=0.0, u=0.41, phi_sp=0.0, theta_sp=0.0,
        x_sp=0.0, y_sp=0.0, z_sp=0.5, mass=2.5, eta=1.0,
    )
    base.update(kw)
    return tuple(base[c] for c in TRACE_COLUMNS)


def _record(rows):
    rec = RunRecord(scenario="synthetic", seed=0)
    for r in rows:
        rec.append(r)
    return rec


def _hover_program(z=0.5):
    return SetpointProgram((Segment(t=0.0, value=Vec3(0.0, 0.0, z)),))


class TestRunRecord:
    def test_header_layout(self):
        assert TRACE_HEADER == (
            "t,x,y,z,vx,vy,vz,ax,ay,az,phi,theta,psi,u,"
            "phi_sp,theta_sp,x_sp,y_sp,z_sp,mass,eta"
        )

    def test_append_validates_width(self):
        rec = RunRecord()
        with pytest.raises(ValueError):
            rec.append((1.0, 2.0))

    def test_csv_comment_line(self):
        rec = _record([_row(0.0)])
        rec.scenario, rec.seed = "hover", 7
        lines = rec.to_csv().splitlines()
        assert lines[0] == "# tmdc-trace v1 scenario=hover seed=7 jitter=uniform"
        assert lines[1] == TRACE_HEADER
        assert len(lines) == 3

    def test_csv_negative_zero_normalized(self):
        rec = _record([_row(0.0, theta_sp=-0.0)])
        assert "-0," not in rec.to_csv()

    def test_csv_precision(self):
        rec = _record([_row(0.0, x=1.0 / 3.0)])
        assert "0.333" in rec.to_csv(precision=3)
        assert "0.333333333" in rec.to_csv(precision=9)

    def test_abort_annotation(self):
        rec = _record([_row(0.0)])
        rec.mark_aborted(0.375, "guard")
        assert rec.to_csv().splitlines()[-1].startswith("# aborted t=0.375")

    def test_format_float(self):
        assert format_float(-0.0) == "0"
        assert format_float(1.5) == "1.5"
        assert format_float(math.pi, 4) == "3.142"


class TestWindows:
    def test_rmse_oracle(self):
        # z error alternates +-0.1 -> rmse exactly 0.1
        rows = [_row(k * 0.0125, z=0.5 + (0.1 if k % 2 else -0.1)) for k in range(100)]
        rec = _record(rows)
        rmse = compute_rmse(rec, _hover_program(), (0.0, 1.25))
        assert rmse.z == pytest.approx(0.1, rel=1e-12)
        assert rmse.x == 0.0

    def test_peak_oracle(self):
        rows = [_row(k * 0.0125, z=0.5) for k in range(100)]
        rows[40] = _row(40 * 0.0125, z=0.62)
        rec = _record(rows)
        peak = compute_peak_offset(rec, _hover_program(), (0.0, 1.25))
        assert peak.z == pytest.approx(0.12)

    def test_rmse_le_peak(self):
        rng = np.random.default_rng(1)
        rows = [
            _row(k * 0.0125, x=rng.normal(), z=0.5 + rng.normal()) for k in range(50)
        ]
        rec = _record(rows)
        win = (0.0, 0.625)
        rmse = compute_rmse(rec, _hover_program(), win)
        peak = compute_peak_offset(rec, _hover_program(), win)
        for axis in "xyz":
            assert getattr(rmse, axis) <= getattr(peak, axis) + 1e-12

    def test_velocity_mode_axes_use_sentinel(self):
        program = SetpointProgram((
            Segment(
                t=0.0,
                modes=(AxisMode.POSITION, AxisMode.POSITION, AxisMode.VELOCITY),
                value=Vec3(0.0, 0.0, 0.2),
            ),
        ))
        rows = [_row(k * 0.0125, z=123.0) for k in range(10)]
        rec = _record(rows)
        rmse = compute_rmse(rec, program, (0.0, 0.125))
        # z never in position mode inside the window -> 0.0 sentinel
        assert rmse.z == 0.0

    def test_empty_window_rejected(self):
        rec = _record([_row(0.0)])
        with pytest.raises(ValueError):
            compute_rmse(rec, _hover_program(), (5.0, 6.0))


class TestComputeMetrics:
    def test_settle_splits_takeoff_and_hover(self):
        # error decays below the 0.05 band at t=2 and stays there
        rows = []
        for k in range(800):
            t = k * 0.0125
            err = 0.2 * math.exp(-t / 0.7)
            rows.append(_row(t, z=0.5 - err))
        rec = _record(rows)
        m = compute_metrics(rec, _hover_program(), (), 10.0)
        names = [w.name for w in m.windows]
        assert names == ["takeoff", "hover"]
        hover = m.window("hover")
        expected_settle = 0.7 * math.log(0.2 / 0.05)
        assert hover.t0 == pytest.approx(expected_settle, abs=0.1)
        # primary metrics come from the hover window
        assert m.rmse.z == hover.rmse.z

    def test_event_window_and_resettle(self):
        rows = []
        for k in range(2400):
            t = k * 0.0125
            err = 0.0
            if t >= 10.0:
                err = 0.2 * math.exp(-(t - 10.0) / 0.5)
            rows.append(_row(t, z=0.5 - err))
        rec = _record(rows)

        class Ev:
            t = 10.0

        m = compute_metrics(rec, _hover_program(), (Ev(),), 30.0)
        w = m.window("event@10")
        assert w is not None
        assert w.t1 == pytest.approx(20.0)
        # resettle when the exponential re-enters the band and holds
        assert w.settle_time == pytest.approx(0.5 * math.log(0.2 / 0.05), abs=0.2)

    def test_headers(self):
        assert METRICS_HEADER.startswith("window,t0,t1,rmse_x")
        assert COMPARE_HEADER.startswith("variant,rmse_x")
