"""Run records, error metrics, and comparison tables.

A RunRecord is one row per thrust tick of the true state, setpoint values,
and command.  Metrics mirror flight-report practice: the flight is split
into take-off / hover / land windows, the hover window starting once the
altitude error stays inside a band for a hold time, plus one window per
scripted event to report recovery.  RMSE and peaks are computed per axis
over samples where that axis is under position control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import AxisMode, Vec3, wrap_angle

TRACE_COLUMNS = (
    "t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az",
    "phi", "theta", "psi", "u", "phi_sp", "theta_sp",
    "x_sp", "y_sp", "z_sp", "mass", "eta",
)
TRACE_HEADER = ",".join(TRACE_COLUMNS)

SETTLE_BAND = 0.05  # m, |z error| band defining "settled"
SETTLE_HOLD = 1.0  # s the error must stay inside the band


def format_float(value: float, precision: int = 9) -> str:
    return "%.*g" % (precision, value + 0.0)  # +0.0 folds -0.0 into 0


@dataclass
class RunRecord:
    """Time-indexed trace of one scenario run."""

    scenario: str = ""
    seed: int | str = 0
    rows: list[tuple] = field(default_factory=list)
    aborted: bool = False
    abort_time: float | None = None
    abort_reason: str = ""

    def append(self, row: tuple) -> None:
        if len(row) != len(TRACE_COLUMNS):
            raise ValueError(f"trace row needs {len(TRACE_COLUMNS)} fields, got {len(row)}")
        self.rows.append(row)

    def mark_aborted(self, t: float, reason: str) -> None:
        self.aborted = True
        self.abort_time = t
        self.abort_reason = reason

    def as_array(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, len(TRACE_COLUMNS)))
        cached = getattr(self, "_cache", None)
        if cached is None or cached.shape[0] != len(self.rows):
            cached = np.asarray(self.rows, dtype=float)
            object.__setattr__(self, "_cache", cached)
        return cached

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, TRACE_COLUMNS.index(name)]

    def to_csv(self, precision: int = 9) -> str:
        """Serialize with LF endings and 9 significant digits by default.

        The leading comment line records run identity and the jitter
        distribution; the header row follows.
        """
        lines = [
            f"# tmdc-trace v1 scenario={self.scenario} seed={self.seed} jitter=uniform",
            TRACE_HEADER,
        ]
        for row in self.rows:
            lines.append(",".join(format_float(v, precision) for v in row))
        if self.aborted:
            lines.append(
                f"# aborted t={format_float(self.abort_time or 0.0, precision)} "
                f"reason={self.abort_reason}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path, precision: int = 9) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv(precision))


@dataclass(frozen=True)
class WindowMetrics:
    name: str
    t0: float
    t1: float
    rmse: Vec3
    peak: Vec3
    mean_u: float
    max_u: float
    settle_time: float  # NaN when not applicable / never settled
    yaw_rmse: float
    samples: int


@dataclass(frozen=True)
class Metrics:
    """Primary (hover-window) metrics plus all per-window breakdowns."""

    rmse: Vec3
    peak: Vec3
    mean_u: float
    max_u: float
    settle_time: float
    yaw_rmse: float
    windows: tuple[WindowMetrics, ...]

    def window(self, name: str) -> WindowMetrics:
        for w in self.windows:
            if w.name == name:
                return w
        raise KeyError(name)


def _axis_errors(arr: np.ndarray, program, axis: int) -> np.ndarray:
    """Position error for one axis; NaN where the axis is not position-mode."""
    t = arr[:, 0]
    pos = arr[:, 1 + axis]
    sp = arr[:, 16 + axis]
    err = sp - pos
    mask = np.fromiter(
        (program.at(ti).modes[axis] is AxisMode.POSITION for ti in t),
        dtype=bool,
        count=len(t),
    )
    out = np.where(mask, err, np.nan)
    return out


def _masked_rmse(err: np.ndarray) -> float:
    ok = ~np.isnan(err)
    if not ok.any():
        return math.nan
    return float(np.sqrt(np.mean(err[ok] ** 2)))


def _masked_peak(err: np.ndarray) -> float:
    ok = ~np.isnan(err)
    if not ok.any():
        return math.nan
    return float(np.max(np.abs(err[ok])))


def compute_rmse(record: RunRecord, program, window: tuple[float, float]) -> Vec3:
    """Per-axis position RMSE over [t0, t1]; axes never under position control
    give NaN.  An empty window is an error."""
    err, _ = _window_errors(record, program, window)
    return Vec3.from_seq(
        [_nan_to(val) for val in (_masked_rmse(err[:, i]) for i in range(3))]
    )


def compute_peak_offset(record: RunRecord, program, window: tuple[float, float]) -> Vec3:
    """Per-axis max |error| over [t0, t1]; same masking rules as compute_rmse."""
    err, _ = _window_errors(record, program, window)
    return Vec3.from_seq(
        [_nan_to(val) for val in (_masked_peak(err[:, i]) for i in range(3))]
    )


def _nan_to(v: float) -> float:
    # Vec3 rejects NaN; metrics carry NaN per-axis as a sentinel via inf-free
    # encoding: use 0.0 for axes with no position-mode samples.
    return 0.0 if math.isnan(v) else v


def _window_errors(record: RunRecord, program, window):
    t0, t1 = window
    if t1 <= t0:
        raise ValueError(f"empty metric window [{t0}, {t1}]")
    arr = record.as_array()
    if arr.shape[0] == 0:
        raise ValueError("empty trace")
    sel = (arr[:, 0] >= t0) & (arr[:, 0] <= t1)
    sub = arr[sel]
    if sub.shape[0] == 0:
        raise ValueError(f"no samples in window [{t0}, {t1}]")
    err = np.column_stack([_axis_errors(sub, program, i) for i in range(3)])
    return err, sub


def _window_metrics(
    name: str, record: RunRecord, program, t0: float, t1: float,
    settle_time: float = math.nan,
) -> WindowMetrics | None:
    try:
        err, sub = _window_errors(record, program, (t0, t1))
    except ValueError:
        return None
    rmse = Vec3.from_seq([_nan_to(_masked_rmse(err[:, i])) for i in range(3)])
    peak = Vec3.from_seq([_nan_to(_masked_peak(err[:, i])) for i in range(3)])
    u = sub[:, TRACE_COLUMNS.index("u")]
    psi = sub[:, TRACE_COLUMNS.index("psi")]
    yaw_err = np.array(
        [wrap_angle(program.at(ti).yaw - p) for ti, p in zip(sub[:, 0], psi)]
    )
    return WindowMetrics(
        name=name,
        t0=t0,
        t1=t1,
        rmse=rmse,
        peak=peak,
        mean_u=float(np.mean(u)),
        max_u=float(np.max(u)),
        settle_time=settle_time,
        yaw_rmse=float(np.sqrt(np.mean(yaw_err**2))),
        samples=sub.shape[0],
    )


def _find_settle(
    arr: np.ndarray, program, start: float, band: float, hold: float
) -> float:
    """First time >= start after which |z error| stays < band for `hold` s.

    Returns NaN if it never happens.  Only samples with z in position mode
    count; the hold interval must itself be fully inside the trace.
    """
    t = arr[:, 0]
    ez = np.abs(_axis_errors(arr, program, 2))
    inside = ez < band  # NaN compares false
    n = len(t)
    i = int(np.searchsorted(t, start, side="left"))
    while i < n:
        if not inside[i]:
            i += 1
            continue
        # extend the in-band run starting at i
        j = i
        while j + 1 < n and inside[j + 1]:
            j += 1
        if t[j] - t[i] >= hold:
            return float(t[i])
        i = j + 1
    return math.nan


def compute_metrics(
    record: RunRecord,
    program,
    events,
    duration: float,
    band: float = SETTLE_BAND,
    hold: float = SETTLE_HOLD,
) -> Metrics:
    """Split the flight into windows and compute per-window statistics.

    Windows: `takeoff` ([0, hover start], present when settling happens after
    t=0), `hover` (settled flight, excluding any trailing descent segments),
    `land` (trailing z-velocity-descent segments), and `event@T` (hold-band
    recovery window after each scripted event).
    """
    arr = record.as_array()
    if arr.shape[0] == 0:
        empty = Vec3(0.0, 0.0, 0.0)
        return Metrics(empty, empty, 0.0, 0.0, math.nan, 0.0, ())
    end = float(arr[-1, 0])

    land_start = None
    for seg in reversed(program.segments):
        if seg.circle is None and seg.modes[2] is AxisMode.VELOCITY and seg.value.z < 0.0:
            land_start = seg.t
        else:
            break
    hover_end = land_start if land_start is not None else end

    settle = _find_settle(arr, program, 0.0, band, hold)
    hover_start = settle if not math.isnan(settle) else 0.0

    windows: list[WindowMetrics] = []
    if hover_start > 0.0:
        w = _window_metrics("takeoff", record, program, 0.0, hover_start)
        if w:
            windows.append(w)
    hover = _window_metrics(
        "hover", record, program, hover_start, hover_end, settle_time=settle
    )
    if hover:
        windows.append(hover)
    if land_start is not None and land_start < end:
        w = _window_metrics("land", record, program, land_start, end)
        if w:
            windows.append(w)

    for ev in events:
        if ev.t >= end:
            continue
        resettle = _find_settle(arr, program, ev.t, band, hold)
        w = _window_metrics(
            f"event@{ev.t:g}",
            record,
            program,
            ev.t,
            min(ev.t + 10.0, end),
            settle_time=(resettle - ev.t) if not math.isnan(resettle) else math.nan,
        )
        if w:
            windows.append(w)

    primary = hover if hover is not None else (windows[0] if windows else None)
    if primary is None:
        empty = Vec3(0.0, 0.0, 0.0)
        return Metrics(empty, empty, 0.0, 0.0, math.nan, 0.0, ())
    return Metrics(
        rmse=primary.rmse,
        peak=primary.peak,
        mean_u=primary.mean_u,
        max_u=primary.max_u,
        settle_time=primary.settle_time,
        yaw_rmse=primary.yaw_rmse,
        windows=tuple(windows),
    )


METRICS_HEADER = (
    "window,t0,t1,rmse_x,rmse_y,rmse_z,peak_x,peak_y,peak_z,"
    "mean_u,max_u,settle_time,yaw_rmse,samples"
)


def metrics_to_csv(metrics: Metrics, precision: int = 9) -> str:
    lines = [METRICS_HEADER]
    for w in metrics.windows:
        cells = [w.name] + [
            format_float(v, precision)
            for v in (
                w.t0, w.t1,
                w.rmse.x, w.rmse.y, w.rmse.z,
                w.peak.x, w.peak.y, w.peak.z,
                w.mean_u, w.max_u, w.settle_time, w.yaw_rmse,
            )
        ] + [str(w.samples)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


COMPARE_HEADER = (
    "variant,rmse_x,rmse_y,rmse_z,peak_x,peak_y,peak_z,"
    "mean_u,max_u,settle_time,yaw_rmse,aborted"
)


@dataclass(frozen=True)
class CompareRow:
    variant: str
    metrics: Metrics
    aborted: bool


@dataclass(frozen=True)
class CompareTable:
    scenario: str
    rows: tuple[CompareRow, ...]

    def to_csv(self, precision: int = 9) -> str:
        lines = [COMPARE_HEADER]
        for r in self.rows:
            m = r.metrics
            cells = [r.variant] + [
                format_float(v, precision)
                for v in (
                    m.rmse.x, m.rmse.y, m.rmse.z,
                    m.peak.x, m.peak.y, m.peak.z,
                    m.mean_u, m.max_u, m.settle_time, m.yaw_rmse,
                )
            ] + ["1" if r.aborted else "0"]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def orderings(self) -> list[str]:
        """Ascending orderings of the headline columns across variants."""
        out = []
        for label, key in (
            ("rmse_z", lambda m: m.rmse.z),
            ("peak_x", lambda m: m.peak.x),
            ("peak_z", lambda m: m.peak.z),
        ):
            ranked = sorted(
                (r for r in self.rows if not r.aborted), key=lambda r: key(r.metrics)
            )
            if len(ranked) >= 2:
                out.append(f"{label}: " + " < ".join(r.variant for r in ranked))
        return out

    def to_text(self) -> str:
        cols = COMPARE_HEADER.split(",")
        table = [cols]
        for r in self.rows:
            m = r.metrics
            table.append(
                [r.variant]
                + ["%.4f" % v for v in (
                    m.rmse.x, m.rmse.y, m.rmse.z,
                    m.peak.x, m.peak.y, m.peak.z,
                    m.mean_u, m.max_u, m.settle_time, m.yaw_rmse,
                )]
                + ["yes" if r.aborted else "no"]
            )
        widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
        lines = [
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in table
        ]
        lines.extend(self.orderings())
        return "\n".join(lines) + "\n"
