"""Residual-based condition monitoring.

A trained nowcaster describes normal behaviour; sustained over-temperature
relative to it raises an alarm.  Residuals ``r_t = T^b_t - T_hat_t`` are
smoothed with an EWMA and compared with ``k * sigma0``, where ``sigma0`` is the
residual standard deviation over a clean calibration period.  An alarm is
raised on the ``min_consecutive``-th consecutive exceedance and stays active
until the smoothed residual falls below half the threshold.  Detection is
one-sided: bearings fail hot.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .errors import NoWindows
from .scada_data import DEFAULT_LAGS, TurbineSeries, build_windows, format_timestamp


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    turbine_id: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        if ts.shape != v.shape:
            raise ValueError("timestamps and values differ in length")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def select(self, mask) -> "ResidualSeries":
        return ResidualSeries(self.turbine_id, self.timestamps[mask], self.values[mask])

    def before(self, t: int) -> "ResidualSeries":
        return self.select(self.timestamps < t)

    def since(self, t: int) -> "ResidualSeries":
        return self.select(self.timestamps >= t)


@dataclass(frozen=True)
class AlarmConfig:
    sigma0: float
    ewma_weight: float = 0.1
    threshold_sigmas: float = 4.0
    min_consecutive: int = 6

    def __post_init__(self):
        if not 0 < self.ewma_weight <= 1:
            raise ValueError("ewma_weight must lie in (0, 1]")
        if not self.threshold_sigmas > 0:
            raise ValueError("threshold_sigmas must be > 0")
        if self.min_consecutive < 1:
            raise ValueError("min_consecutive must be >= 1")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0; calibrate first")

    @property
    def threshold(self) -> float:
        return self.threshold_sigmas * self.sigma0


@dataclass(frozen=True)
class AlarmEvent:
    turbine_id: str
    onset: int
    peak_residual: float
    duration_steps: int


def residuals(model, series: TurbineSeries, lags: int = DEFAULT_LAGS) -> ResidualSeries:
    """Measured minus nowcast bearing temperature for every feasible window."""
    if hasattr(model, "lags"):
        lags = model.lags
    windows, _ = build_windows(series, lags)
    if len(windows) == 0:
        raise NoWindows(f"turbine {series.turbine_id!r} yields no windows with {lags} lags")
    pred = np.asarray(model.predict(windows), dtype=float)
    return ResidualSeries(series.turbine_id, windows.timestamps, windows.targets - pred)


def ewma(values, weight: float):
    """``s_t = w * r_t + (1 - w) * s_{t-1}`` with ``s_0 = r_0``.

    Accepts an array or a :class:`ResidualSeries` and returns the same kind.
    """
    if not 0 < weight <= 1:
        raise ValueError("weight must lie in (0, 1]")
    if isinstance(values, ResidualSeries):
        return ResidualSeries(values.turbine_id, values.timestamps, ewma(values.values, weight))
    r = np.asarray(values, dtype=np.float64).tolist()
    out = [0.0] * len(r)
    if r:
        s = r[0]
        out[0] = s
        keep = 1.0 - weight
        for i in range(1, len(r)):
            s = weight * r[i] + keep * s
            out[i] = s
    return np.asarray(out)


def calibrate(calibration: ResidualSeries, **kwargs) -> AlarmConfig:
    """Alarm configuration with ``sigma0`` = std of the clean calibration residuals."""
    if len(calibration) < 2:
        raise NoWindows("need at least two calibration residuals")
    return AlarmConfig(sigma0=float(np.std(calibration.values)), **kwargs)


def alarm_state(smoothed, config: AlarmConfig) -> np.ndarray:
    """Boolean per step: is an alarm active?"""
    s = smoothed.values if isinstance(smoothed, ResidualSeries) else np.asarray(smoothed, dtype=float)
    thr, low = config.threshold, config.threshold / 2
    active = np.zeros(s.size, dtype=bool)
    on, run = False, 0
    for i, v in enumerate(s.tolist()):
        if on:
            if v < low:
                on, run = False, 0
            else:
                active[i] = True
                continue
        run = run + 1 if v > thr else 0
        if run >= config.min_consecutive:
            on = True
            active[i] = True
    return active


def detect(smoothed: ResidualSeries, config: AlarmConfig) -> list[AlarmEvent]:
    """Alarm events of a smoothed residual series.

    ``onset`` is the timestamp at which the alarm fires, i.e. the
    ``min_consecutive``-th consecutive exceedance of ``k * sigma0``.
    """
    active = alarm_state(smoothed, config)
    s = smoothed.values
    events = []
    edges = np.flatnonzero(np.diff(np.concatenate([[0], active.astype(np.int8), [0]])))
    for start, stop in zip(edges[::2], edges[1::2]):
        first = max(0, start - config.min_consecutive + 1)
        events.append(AlarmEvent(smoothed.turbine_id, int(smoothed.timestamps[start]),
                                 float(s[first:stop].max()), int(stop - start)))
    return events


def monitor(model, series: TurbineSeries, config: AlarmConfig, lags: int = DEFAULT_LAGS
            ) -> tuple[ResidualSeries, ResidualSeries, list[AlarmEvent]]:
    """Residuals, smoothed residuals and alarm events for one turbine."""
    r = residuals(model, series, lags)
    s = ewma(r, config.ewma_weight)
    return r, s, detect(s, config)


def write_alarms_csv(events: Iterable[AlarmEvent], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["turbine_id", "onset", "peak_residual", "duration_steps"])
        for e in events:
            w.writerow([e.turbine_id, format_timestamp(e.onset), repr(e.peak_residual), e.duration_steps])
    return path
