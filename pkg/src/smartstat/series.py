"""Uniformly handled time series: epoch-second samples with linear interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, GapTooLarge, TooFewPoints


@dataclass(frozen=True, init=False)
class TimeSeries:
    """Sorted (time, value) samples. Times are epoch seconds (float)."""

    times: np.ndarray
    values: np.ndarray

    def __init__(self, times, values):
        t = np.asarray(times, dtype=np.float64)
        v = np.asarray(values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size == 0:
            raise ValueError("a series needs at least one sample")
        if np.any(np.diff(t) <= 0):
            order = np.argsort(t, kind="stable")
            t = t[order]
            v = v[order]
            if np.any(np.diff(t) == 0):
                raise ValueError("duplicate timestamps in series")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def at(self, t) -> np.ndarray:
        """Linear interpolation, clamped at the ends."""
        return np.interp(np.asarray(t, dtype=np.float64), self.times, self.values)

    def covers(self, t0: float, t1: float, slack_s: float = 0.0) -> bool:
        return self.start <= t0 + slack_s and self.end >= t1 - slack_s

    def require_cover(self, t0: float, t1: float, slack_s: float = 0.0) -> None:
        if not self.covers(t0, t1, slack_s):
            raise CoverageError(
                f"series [{self.start:.0f}, {self.end:.0f}] does not cover "
                f"[{t0:.0f}, {t1:.0f}]"
            )

    def slice(self, t0: float, t1: float) -> "TimeSeries":
        mask = (self.times >= t0) & (self.times <= t1)
        if not mask.any():
            raise CoverageError(f"no samples in [{t0:.0f}, {t1:.0f}]")
        return TimeSeries(self.times[mask], self.values[mask])

    def resample(self, dt_s: float, max_gap_s: float | None = None) -> "TimeSeries":
        """Resample onto a uniform grid starting at the first sample.

        Refuses to paper over holes: any consecutive-sample gap beyond
        ``max_gap_s`` raises GapTooLarge.
        """
        if len(self) < 2:
            raise TooFewPoints("resampling needs at least two samples")
        if dt_s <= 0:
            raise ValueError("dt_s must be positive")
        gaps = np.diff(self.times)
        if max_gap_s is not None and gaps.max() > max_gap_s:
            i = int(np.argmax(gaps))
            raise GapTooLarge(
                f"gap of {gaps[i]:.0f} s at t={self.times[i]:.0f} exceeds "
                f"{max_gap_s:.0f} s"
            )
        n = int(np.floor((self.end - self.start) / dt_s)) + 1
        grid = self.start + dt_s * np.arange(n)
        return TimeSeries(grid, self.at(grid))


def constant_series(t0: float, t1: float, value: float) -> TimeSeries:
    return TimeSeries(np.array([t0, t1]), np.array([value, value]))
