"""SCADA time series: ingestion, windowing, standardization and splitting.

Timestamps are kept internally as integer seconds since the Unix epoch (UTC),
aligned to the 10-minute SCADA grid.  Each supervised sample holds ``M + 1``
state vectors ``x_s = (T^a_s, omega_s, P_s, T^b_{s-1})`` and the nowcast target
``T^b_t``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping, NamedTuple, Sequence, TextIO, Union

import numpy as np

from .errors import (
    DegenerateFeature,
    DuplicateTimestamp,
    EmptySide,
    MalformedRow,
    MissingHeader,
    NotEnoughTurbines,
    OffGridTimestamp,
)

GRID_SECONDS = 600
DEFAULT_LAGS = 5
DEFAULT_NOMINAL_POWER = 850.0
POWER_TOLERANCE_KW = 1.0

CSV_HEADER = ("timestamp", "turbine_id", "ambient_temp", "rotor_speed", "power", "bearing_temp")
FEATURE_NAMES = ("ambient_temp", "rotor_speed", "power", "prev_bearing_temp")

# state-vector columns
AMBIENT, ROTOR, POWER, PREV_TEMP = range(4)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

Timestamp = Union[int, np.integer, datetime, str]


# ---------------------------------------------------------------------------
# timestamps
# ---------------------------------------------------------------------------

def parse_timestamp(text: str) -> int:
    """Parse an RFC 3339 timestamp into integer epoch seconds.

    A UTC offset (``Z`` or ``+hh:mm``) is mandatory.  Sub-second parts must be
    zero, otherwise :class:`ValueError` is raised.
    """
    s = text.strip()
    if s[-1:] in ("Z", "z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    delta = dt - _EPOCH
    if delta.microseconds:
        raise ValueError(f"timestamp {text!r} has a fractional second")
    return delta.days * 86400 + delta.seconds


def format_timestamp(seconds: int) -> str:
    return (_EPOCH + timedelta(seconds=int(seconds))).strftime("%Y-%m-%dT%H:%M:%SZ")


def to_epoch(value: Timestamp) -> int:
    """Coerce a datetime, RFC 3339 string or integer into epoch seconds."""
    if isinstance(value, str):
        return parse_timestamp(value)
    if isinstance(value, datetime):
        if value.tzinfo is None:
            raise ValueError("naive datetimes are ambiguous; attach a timezone")
        delta = value - _EPOCH
        return delta.days * 86400 + delta.seconds
    return int(value)


def to_datetime(seconds: int) -> datetime:
    return _EPOCH + timedelta(seconds=int(seconds))


# ---------------------------------------------------------------------------
# records and series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScadaRecord:
    timestamp: int
    turbine_id: str
    ambient_temp: float
    rotor_speed: float
    power: float
    bearing_temp: float


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TurbineSeries:
    """Grid-aligned measurements of one turbine, ordered by time.

    Columns are stored as read-only numpy arrays.  Gaps in the grid are allowed;
    :attr:`contiguous` flags which records directly follow their predecessor.
    """

    turbine_id: str
    timestamps: np.ndarray
    ambient_temp: np.ndarray
    rotor_speed: np.ndarray
    power: np.ndarray
    bearing_temp: np.ndarray

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        object.__setattr__(self, "timestamps", ts)
        for name in ("ambient_temp", "rotor_speed", "power", "bearing_temp"):
            col = _frozen(getattr(self, name), np.float64)
            if col.shape != ts.shape:
                raise ValueError(f"column {name} has {col.shape[0]} values, expected {ts.shape[0]}")
            object.__setattr__(self, name, col)
        if ts.ndim != 1:
            raise ValueError("timestamps must be one-dimensional")
        off = np.flatnonzero(ts % GRID_SECONDS)
        if off.size:
            raise OffGridTimestamp(self.turbine_id, format_timestamp(ts[off[0]]))
        if ts.size > 1:
            steps = np.diff(ts)
            if np.any(steps == 0):
                raise DuplicateTimestamp(self.turbine_id, format_timestamp(ts[1:][steps == 0][0]))
            if np.any(steps < 0):
                raise ValueError(f"timestamps of turbine {self.turbine_id!r} are not increasing")

    @classmethod
    def from_records(cls, records: Sequence[ScadaRecord]) -> "TurbineSeries":
        if not records:
            raise ValueError("cannot build a series from zero records")
        tid = records[0].turbine_id
        if any(r.turbine_id != tid for r in records):
            raise ValueError("records belong to more than one turbine")
        return cls(
            tid,
            [r.timestamp for r in records],
            [r.ambient_temp for r in records],
            [r.rotor_speed for r in records],
            [r.power for r in records],
            [r.bearing_temp for r in records],
        )

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TurbineSeries):
            return NotImplemented
        return self.turbine_id == other.turbine_id and all(
            np.array_equal(getattr(self, c), getattr(other, c))
            for c in ("timestamps", "ambient_temp", "rotor_speed", "power", "bearing_temp")
        )

    __hash__ = None

    @property
    def records(self) -> list[ScadaRecord]:
        return [
            ScadaRecord(int(t), self.turbine_id, float(a), float(w), float(p), float(b))
            for t, a, w, p, b in zip(
                self.timestamps, self.ambient_temp, self.rotor_speed, self.power, self.bearing_temp
            )
        ]

    @property
    def contiguous(self) -> np.ndarray:
        """``contiguous[i]`` is True when record ``i`` sits one grid step after ``i - 1``."""
        flags = np.zeros(len(self), dtype=bool)
        if len(self) > 1:
            flags[1:] = np.diff(self.timestamps) == GRID_SECONDS
        return flags

    def gaps(self) -> list["Gap"]:
        out = []
        for i in np.flatnonzero(~self.contiguous[1:]) + 1:
            out.append(Gap(self.turbine_id,
                           int(self.timestamps[i - 1]) + GRID_SECONDS,
                           int(self.timestamps[i]) - GRID_SECONDS))
        return out

    def select(self, mask_or_index) -> "TurbineSeries":
        return TurbineSeries(
            self.turbine_id,
            self.timestamps[mask_or_index],
            self.ambient_temp[mask_or_index],
            self.rotor_speed[mask_or_index],
            self.power[mask_or_index],
            self.bearing_temp[mask_or_index],
        )

    def with_bearing_temp(self, bearing_temp) -> "TurbineSeries":
        return TurbineSeries(self.turbine_id, self.timestamps, self.ambient_temp,
                             self.rotor_speed, self.power, bearing_temp)


class Gap(NamedTuple):
    """Missing grid slots ``gap_start .. gap_end`` (inclusive, epoch seconds)."""

    turbine_id: str
    gap_start: int
    gap_end: int


@dataclass(frozen=True, eq=False)
class PlantDataset:
    plant_id: str
    turbines: Mapping[str, TurbineSeries] = field(default_factory=dict)
    nominal_power: float = DEFAULT_NOMINAL_POWER

    def __post_init__(self):
        if not self.nominal_power > 0:
            raise ValueError("nominal_power must be positive")
        for tid, s in self.turbines.items():
            if s.turbine_id != tid:
                raise ValueError(f"turbine key {tid!r} does not match series id {s.turbine_id!r}")
        object.__setattr__(self, "turbines", dict(sorted(self.turbines.items())))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlantDataset):
            return NotImplemented
        return (self.plant_id == other.plant_id
                and self.nominal_power == other.nominal_power
                and list(self.turbines) == list(other.turbines)
                and all(self.turbines[k] == other.turbines[k] for k in self.turbines))

    __hash__ = None

    @property
    def turbine_ids(self) -> list[str]:
        return list(self.turbines)

    @property
    def n_records(self) -> int:
        return sum(len(s) for s in self.turbines.values())

    def time_range(self) -> tuple[int, int]:
        series = [s for s in self.turbines.values() if len(s)]
        if not series:
            raise ValueError(f"plant {self.plant_id!r} has no records")
        return (min(int(s.timestamps[0]) for s in series),
                max(int(s.timestamps[-1]) for s in series))

    def subset(self, turbine_ids: Iterable[str]) -> "PlantDataset":
        return PlantDataset(self.plant_id, {t: self.turbines[t] for t in turbine_ids},
                            self.nominal_power)

    def replace_turbine(self, series: TurbineSeries) -> "PlantDataset":
        turbines = dict(self.turbines)
        turbines[series.turbine_id] = series
        return PlantDataset(self.plant_id, turbines, self.nominal_power)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8-sig")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data


def parse_scada_csv(
    source: Union[bytes, str, BinaryIO, TextIO],
    plant_id: str = "plant",
    nominal_power: float = DEFAULT_NOMINAL_POWER,
) -> PlantDataset:
    """Parse a SCADA CSV document into a :class:`PlantDataset`.

    Parameters
    ----------
    source
        Raw bytes, decoded text, or an open binary/text stream.  The first line
        must be exactly the header ``timestamp,turbine_id,ambient_temp,
        rotor_speed,power,bearing_temp``.
    plant_id, nominal_power
        Plant metadata; the CSV itself does not carry them.

    Raises
    ------
    MissingHeader
        The header line is absent or differs from the expected columns.
    MalformedRow
        Any row failed to parse.  All bad rows are reported together, with
        their 1-based line numbers.
    OffGridTimestamp, DuplicateTimestamp
        Grid violations, checked after all rows parsed.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise MissingHeader(f"expected header {','.join(CSV_HEADER)!r}, got {header!r}")

    columns: dict[str, list] = {}
    bad_lines: list[int] = []
    reasons: list[str] = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            bad_lines.append(line)
            reasons.append(f"expected {len(CSV_HEADER)} fields, got {len(row)}")
            continue
        try:
            ts = parse_timestamp(row[0])
            tid = row[1].strip()
            if not tid:
                raise ValueError("empty turbine_id")
            ta, w, p, tb = (float(v) for v in row[2:])
            if not all(math.isfinite(v) for v in (ta, w, p, tb)):
                raise ValueError("non-finite value")
            if w < 0:
                raise ValueError(f"negative rotor_speed {w}")
            if p < 0:
                if p < -POWER_TOLERANCE_KW:
                    raise ValueError(f"power {p} below the -1 kW sensor tolerance")
                p = 0.0
        except ValueError as exc:
            bad_lines.append(line)
            reasons.append(str(exc))
            continue
        cols = columns.setdefault(tid, [[], [], [], [], []])
        cols[0].append(ts)
        cols[1].append(ta)
        cols[2].append(w)
        cols[3].append(p)
        cols[4].append(tb)
    if bad_lines:
        raise MalformedRow(bad_lines, reasons)

    turbines = {}
    for tid, (ts, ta, w, p, tb) in columns.items():
        ts = np.asarray(ts, dtype=np.int64)
        off = np.flatnonzero(ts % GRID_SECONDS)
        if off.size:
            raise OffGridTimestamp(tid, format_timestamp(ts[off[0]]))
        order = np.argsort(ts, kind="stable")
        ts = ts[order]
        dup = np.flatnonzero(np.diff(ts) == 0)
        if dup.size:
            raise DuplicateTimestamp(tid, format_timestamp(ts[dup[0]]))
        turbines[tid] = TurbineSeries(tid, ts, np.asarray(ta)[order], np.asarray(w)[order],
                                      np.asarray(p)[order], np.asarray(tb)[order])
    return PlantDataset(plant_id, turbines, nominal_power)


def serialize_scada_csv(dataset: PlantDataset) -> str:
    """Render a dataset as RFC 4180 CSV (CRLF line ends, turbines in id order).

    Floats use Python's shortest round-trip representation, so
    ``parse_scada_csv(serialize_scada_csv(d))`` reproduces ``d`` exactly.
    """
    lines = [",".join(CSV_HEADER)]
    for tid, s in dataset.turbines.items():
        for t, a, w, p, b in zip(s.timestamps.tolist(), s.ambient_temp.tolist(),
                                 s.rotor_speed.tolist(), s.power.tolist(),
                                 s.bearing_temp.tolist()):
            lines.append(f"{format_timestamp(t)},{tid},{a!r},{w!r},{p!r},{b!r}")
    return "\r\n".join(lines) + "\r\n"


def write_plant_csv(dataset: PlantDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_scada_csv(dataset).encode("utf-8"))
    return path


def read_plant_csv(path: Union[str, Path], plant_id: str | None = None,
                   nominal_power: float = DEFAULT_NOMINAL_POWER) -> PlantDataset:
    path = Path(path)
    return parse_scada_csv(path.read_bytes(), plant_id or path.stem, nominal_power)


def load_plant_dir(directory: Union[str, Path],
                   nominal_power: float = DEFAULT_NOMINAL_POWER) -> dict[str, PlantDataset]:
    """Load every ``*.csv`` in ``directory``; the file stem is the plant id."""
    directory = Path(directory)
    files = sorted(p for p in directory.glob("*.csv") if p.name != "gaps.csv")
    return {p.stem: read_plant_csv(p, p.stem, nominal_power) for p in files}


def write_gap_report(gaps: Iterable[Gap], path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["turbine_id", "gap_start", "gap_end"])
        for g in gaps:
            w.writerow([g.turbine_id, format_timestamp(g.gap_start), format_timestamp(g.gap_end)])
    return path


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WindowSample:
    """One nowcasting example.

    ``states[k]`` is the state at time ``t - M + k``, so the last row is the
    current state ``x_t`` whose final entry is ``T^b_{t-1}``.
    """

    states: np.ndarray
    target: float
    turbine_id: str
    timestamp: int

    @property
    def lags(self) -> int:
        return self.states.shape[0] - 1

    @property
    def prev_temp(self) -> float:
        return float(self.states[-1, PREV_TEMP])

    @property
    def true_delta(self) -> float:
        return self.target - self.prev_temp


@dataclass(frozen=True, eq=False)
class WindowSet:
    """A batch of windows stored column-wise.

    Behaves as a sequence of :class:`WindowSample`; integer indexing returns a
    sample, slices and index arrays return a new :class:`WindowSet`.
    """

    states: np.ndarray          # (n, M+1, 4)
    targets: np.ndarray         # (n,)
    turbine_ids: np.ndarray     # (n,) str
    timestamps: np.ndarray      # (n,) int64

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 3 or states.shape[2] != 4:
            raise ValueError(f"states must have shape (n, M+1, 4), got {states.shape}")
        n = states.shape[0]
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=np.float64).reshape(n))
        object.__setattr__(self, "turbine_ids", np.asarray(self.turbine_ids, dtype=str).reshape(n))
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=np.int64).reshape(n))

    @classmethod
    def empty(cls, lags: int = DEFAULT_LAGS) -> "WindowSet":
        return cls(np.zeros((0, lags + 1, 4)), np.zeros(0), np.zeros(0, dtype=str), np.zeros(0, np.int64))

    @classmethod
    def from_samples(cls, samples: Sequence[WindowSample]) -> "WindowSet":
        if not samples:
            raise ValueError("need at least one sample")
        return cls(np.stack([s.states for s in samples]), [s.target for s in samples],
                   [s.turbine_id for s in samples], [s.timestamp for s in samples])

    @classmethod
    def concat(cls, sets: Sequence["WindowSet"]) -> "WindowSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            raise ValueError("nothing to concatenate")
        return cls(np.concatenate([s.states for s in sets]),
                   np.concatenate([s.targets for s in sets]),
                   np.concatenate([s.turbine_ids for s in sets]),
                   np.concatenate([s.timestamps for s in sets]))

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            return WindowSample(self.states[key].copy(), float(self.targets[key]),
                                str(self.turbine_ids[key]), int(self.timestamps[key]))
        return WindowSet(self.states[key], self.targets[key], self.turbine_ids[key], self.timestamps[key])

    @property
    def lags(self) -> int:
        return self.states.shape[1] - 1

    @property
    def prev_temps(self) -> np.ndarray:
        return self.states[:, -1, PREV_TEMP]

    @property
    def true_deltas(self) -> np.ndarray:
        return self.targets - self.prev_temps

    @property
    def current_states(self) -> np.ndarray:
        return self.states[:, -1, :]

    def chronological_order(self) -> np.ndarray:
        """Indices sorting windows by (timestamp, turbine_id)."""
        return np.lexsort((self.turbine_ids, self.timestamps))


def build_windows(series: TurbineSeries, lags: int = DEFAULT_LAGS) -> tuple[WindowSet, list[Gap]]:
    """Cut every fully contiguous ``lags + 2``-record span into a window.

    The window for time ``t`` needs records ``t - lags - 1 .. t``: the extra
    leading record supplies ``T^b_{t-lags-1}`` for the oldest state.  Gaps are
    never imputed; they only reduce the yield and are returned as a report.
    """
    if lags < 0:
        raise ValueError("lags must be >= 0")
    n = len(series)
    gaps = series.gaps()
    if n < lags + 2:
        return WindowSet.empty(lags), gaps
    new_run = ~series.contiguous
    starts = np.flatnonzero(new_run)
    run_id = np.cumsum(new_run) - 1
    pos = np.arange(n) - starts[run_id]
    t_idx = np.flatnonzero(pos >= lags + 1)
    if t_idx.size == 0:
        return WindowSet.empty(lags), gaps
    idx = t_idx[:, None] + np.arange(-lags, 1)[None, :]
    states = np.stack(
        [series.ambient_temp[idx], series.rotor_speed[idx], series.power[idx],
         series.bearing_temp[idx - 1]],
        axis=-1,
    )
    windows = WindowSet(states, series.bearing_temp[t_idx],
                        np.full(t_idx.size, series.turbine_id), series.timestamps[t_idx])
    return windows, gaps


def build_plant_windows(dataset: PlantDataset, lags: int = DEFAULT_LAGS) -> tuple[WindowSet, list[Gap]]:
    """Windows of all turbines, concatenated in turbine-id order."""
    sets, gaps = [], []
    for s in dataset.turbines.values():
        w, g = build_windows(s, lags)
        sets.append(w)
        gaps.extend(g)
    nonempty = [w for w in sets if len(w)]
    return (WindowSet.concat(nonempty) if nonempty else WindowSet.empty(lags)), gaps


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean, np.float64).reshape(4))
        object.__setattr__(self, "std", _frozen(self.std, np.float64).reshape(4))
        for name, s in zip(FEATURE_NAMES, self.std):
            if not s > 0:
                raise DegenerateFeature(name)

    def __eq__(self, other):
        if not isinstance(other, StandardizationStats):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)

    __hash__ = None

    @property
    def temp_mean(self) -> float:
        return float(self.mean[PREV_TEMP])

    @property
    def temp_std(self) -> float:
        return float(self.std[PREV_TEMP])

    def to_dict(self) -> dict:
        return {"features": list(FEATURE_NAMES), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StandardizationStats":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def fit_standardization(windows: WindowSet) -> StandardizationStats:
    """Per-feature mean and population std over every state vector of ``windows``."""
    if len(windows) == 0:
        raise ValueError("cannot fit standardization on zero windows")
    flat = windows.states.reshape(-1, 4)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    for name, m, s in zip(FEATURE_NAMES, mean, std):
        if s <= 1e-12 * max(1.0, abs(m)):
            raise DegenerateFeature(name)
    return StandardizationStats(mean, std)


def standardize_states(states: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    return (states - stats.mean) / stats.std


def destandardize_temp(values, stats: StandardizationStats):
    return stats.temp_mean + stats.temp_std * np.asarray(values)


def standardize_temp(values, stats: StandardizationStats):
    return (np.asarray(values) - stats.temp_mean) / stats.temp_std


def apply_standardization(windows, stats: StandardizationStats):
    """Standardize states (per feature) and targets (with the ``T^b`` statistics)."""
    if isinstance(windows, WindowSample):
        return WindowSample(standardize_states(windows.states, stats),
                            float(standardize_temp(windows.target, stats)),
                            windows.turbine_id, windows.timestamp)
    return WindowSet(standardize_states(windows.states, stats), standardize_temp(windows.targets, stats),
                     windows.turbine_ids, windows.timestamps)


def invert_standardization(windows, stats: StandardizationStats):
    if isinstance(windows, WindowSample):
        return WindowSample(windows.states * stats.std + stats.mean,
                            float(destandardize_temp(windows.target, stats)),
                            windows.turbine_id, windows.timestamp)
    return WindowSet(windows.states * stats.std + stats.mean, destandardize_temp(windows.targets, stats),
                     windows.turbine_ids, windows.timestamps)


# ---------------------------------------------------------------------------
# splitting and sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Train = strictly before ``boundary``; test = at or after it."""

    boundary: int

    def __post_init__(self):
        object.__setattr__(self, "boundary", to_epoch(self.boundary))


def time_split(dataset: PlantDataset, spec: Union[SplitSpec, Timestamp]) -> tuple[PlantDataset, PlantDataset]:
    boundary = spec.boundary if isinstance(spec, SplitSpec) else to_epoch(spec)
    train, test = {}, {}
    for tid, s in dataset.turbines.items():
        before = s.timestamps < boundary
        if before.any():
            train[tid] = s.select(before)
        if (~before).any():
            test[tid] = s.select(~before)
    if not train:
        raise EmptySide("train")
    if not test:
        raise EmptySide("test")
    return (PlantDataset(dataset.plant_id, train, dataset.nominal_power),
            PlantDataset(dataset.plant_id, test, dataset.nominal_power))


def sample_turbines(dataset: PlantDataset, n: int, seed: int) -> tuple[PlantDataset, PlantDataset]:
    """Draw ``n`` turbines uniformly without replacement; both halves keep id order."""
    ids = dataset.turbine_ids
    if not 1 <= n <= len(ids):
        raise NotEnoughTurbines(f"cannot sample {n} of {len(ids)} turbines in plant {dataset.plant_id!r}")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(len(ids), size=n, replace=False).tolist())
    selected = [t for i, t in enumerate(ids) if i in chosen]
    held_out = [t for i, t in enumerate(ids) if i not in chosen]
    return dataset.subset(selected), dataset.subset(held_out)
