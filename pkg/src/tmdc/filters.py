"""Cosine-weighted smoothing and finite-difference building blocks.

The estimator and the PID derivative path both smooth noisy finite
differences with a short cosine-weighted moving average (CWMA): sample i
(i = 0 newest) gets weight cos(i * zeta), zeta = zeta_max / window.  With
the default window of 4 and zeta_max of 80 deg the weights are
[1, cos 20, cos 40, cos 60] ~= [1, 0.9397, 0.7660, 0.5].
"""

from __future__ import annotations

import math
from collections import deque


def cosine_weights(window: int, zeta_max: float) -> list[float]:
    """Weights w_i = cos(i * zeta_max / window) for i = 0 .. window-1.

    Parameters
    ----------
    window : number of taps, >= 1.
    zeta_max : total angular span in radians, 0 <= zeta_max < pi/2 so all
        weights stay positive.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not 0.0 <= zeta_max < math.pi / 2.0:
        raise ValueError(f"zeta_max must be in [0, pi/2), got {zeta_max}")
    step = zeta_max / window
    return [math.cos(i * step) for i in range(window)]


class CwmaFilter:
    """Cosine-weighted moving average over the most recent `window` samples.

    Partial windows renormalize over the filled taps only, so the output is
    always a convex combination of pushed samples (a constant input is
    reproduced exactly from the first push).
    """

    def __init__(self, window: int = 4, zeta_max: float = math.radians(80.0)):
        self.weights = cosine_weights(window, zeta_max)
        self._buf: deque[float] = deque(maxlen=window)

    def reset(self) -> None:
        self._buf.clear()

    def push(self, sample: float) -> float:
        """Insert `sample` (newest) and return the current filtered value."""
        if not math.isfinite(sample):
            raise ValueError(f"non-finite sample {sample!r}")
        self._buf.appendleft(sample)
        num = 0.0
        den = 0.0
        for w, s in zip(self.weights, self._buf):
            num += w * s
            den += w
        return num / den

    @property
    def filled(self) -> int:
        return len(self._buf)


class Differentiator:
    """Backward-difference derivative over a nominal period.

    By default the divisor is the fixed nominal period T regardless of when
    samples actually arrive; this is what lets accumulator-style controllers
    shrug off loop-rate jitter.  Setting measured_dt=True divides by the
    actual timestamp gap instead (the ablation alternative).
    """

    def __init__(self, period: float, measured_dt: bool = False):
        if period <= 0.0:
            raise ValueError(f"period must be positive, got {period}")
        self.period = period
        self.measured_dt = measured_dt
        self._prev_sample: float | None = None
        self._prev_t: float | None = None

    def reset(self) -> None:
        self._prev_sample = None
        self._prev_t = None

    def push(self, sample: float, t: float) -> float:
        """Feed one sample at time t; returns the derivative (0 on first call)."""
        if not math.isfinite(sample) or not math.isfinite(t):
            raise ValueError("non-finite sample or timestamp")
        if self._prev_t is not None and t <= self._prev_t:
            raise ValueError(
                f"non-monotonic timestamps: {t} after {self._prev_t}"
            )
        if self._prev_sample is None:
            self._prev_sample = sample
            self._prev_t = t
            return 0.0
        dt = (t - self._prev_t) if self.measured_dt else self.period
        out = (sample - self._prev_sample) / dt
        self._prev_sample = sample
        self._prev_t = t
        return out
