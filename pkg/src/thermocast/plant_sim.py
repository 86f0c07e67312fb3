"""Synthetic wind-plant SCADA generator built on a lumped bearing heat balance.

The bearing node obeys, per 10-minute step (explicit Euler, inputs taken at the
new time step)::

    T_b[t+1] = T_b[t] + dt / C_p * ( (T_a[t+1] - T_b[t]) / R
                                     + mu * omega[t+1]
                                     + alpha_deg * 1000 * P[t+1] )   # P in kW

Random streams
--------------
All randomness is derived from one master seed.  ``derive_seed(seed, 0)``
drives the plant-level streams (ambient temperature, curtailment schedule);
``derive_seed(seed, i + 1)`` drives turbine ``i``.  Each turbine seed is
expanded with :class:`numpy.random.SeedSequence` into four independent
generators, in this order: coefficient jitter, wind, process noise, sensor
noise.  Generating turbines in any order or in parallel gives the same data.
Runs that simulate several plants from one seed use ``plant_seed`` so plants
do not share noise streams.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass, field, replace
from datetime import timedelta
from typing import NamedTuple, Optional, Union

import numpy as np

from .errors import InvalidDuration, OnsetOutOfRange, UnstableIntegration
from .scada_data import (
    DEFAULT_LAGS,
    GRID_SECONDS,
    PlantDataset,
    TurbineSeries,
    Timestamp,
    to_epoch,
)

_MASK64 = (1 << 64) - 1
YEAR_SECONDS = 365.25 * 86400.0
DAY_SECONDS = 86400.0


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream: int) -> int:
    """Seed of substream ``stream``: ``splitmix64(master ^ splitmix64(stream))``."""
    return splitmix64((int(master) & _MASK64) ^ splitmix64(int(stream)))


def plant_seed(master: int, plant_id: str) -> int:
    """Master seed of one plant when several plants share a run seed."""
    return derive_seed(master, (1 << 32) | zlib.crc32(plant_id.encode("utf-8")))


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlantPhysicsConfig:
    """Ground-truth heat-balance coefficients of one bearing.

    Attributes
    ----------
    c_p : float
        Effective heat capacity [J/K].
    resistance : float
        Thermal resistance to ambient [K/W].
    mu : float
        Friction heat per unit rotor speed [W per rad/s].
    alpha_deg : float
        Fraction of electrical power dissipated as bearing heat.
    dt : float
        Integration step [s]; must equal the SCADA grid for generated plants.
    temp_noise_std, sensor_noise_std : float
        Process noise added per step, and measurement noise on the reported
        bearing temperature [degC].
    """

    c_p: float = 80_000.0
    resistance: float = 0.01
    mu: float = 500.0
    alpha_deg: float = 0.002
    dt: float = float(GRID_SECONDS)
    temp_noise_std: float = 0.1
    sensor_noise_std: float = 0.25

    def __post_init__(self):
        if not self.c_p > 0:
            raise ValueError("c_p must be positive")
        if not self.resistance > 0:
            raise ValueError("resistance must be positive")
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")
        if not 0 <= self.alpha_deg < 1:
            raise ValueError("alpha_deg must lie in [0, 1)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.temp_noise_std < 0 or self.sensor_noise_std < 0:
            raise ValueError("noise levels must be non-negative")

    @property
    def euler_ratio(self) -> float:
        """``dt / (C_p R)``; explicit Euler is monotone and stable below 1."""
        return self.dt / (self.c_p * self.resistance)

    @property
    def true_lambdas(self) -> tuple[float, float, float]:
        """Coefficients of the per-step delta model in SCADA units (degC, rad/s, kW)."""
        return (self.dt / (self.c_p * self.resistance),
                self.dt * self.mu / self.c_p,
                self.dt * self.alpha_deg * 1000.0 / self.c_p)

    def steady_state(self, ambient, omega, power_kw):
        return ambient + self.resistance * (self.mu * omega + self.alpha_deg * power_kw * 1000.0)

    def noise_free(self) -> "PlantPhysicsConfig":
        return replace(self, temp_noise_std=0.0, sensor_noise_std=0.0)

    def scaled(self, c_p=1.0, resistance=1.0, mu=1.0, alpha_deg=1.0) -> "PlantPhysicsConfig":
        return replace(self, c_p=self.c_p * c_p, resistance=self.resistance * resistance,
                       mu=self.mu * mu, alpha_deg=self.alpha_deg * alpha_deg)


@dataclass(frozen=True)
class WindModelConfig:
    """Mean-reverting (Ornstein-Uhlenbeck) hub-height wind speed.

    ``volatility`` is the diffusion coefficient; the stationary standard
    deviation is ``volatility / sqrt(2 * reversion_rate)``.  With
    ``initial_speed=None`` the path starts from a stationary draw.
    """

    mean_speed: float = 7.5
    reversion_rate: float = 1.0 / (6 * 3600)
    volatility: float = 3.5 * math.sqrt(2.0 / (6 * 3600))
    initial_speed: Optional[float] = None

    def __post_init__(self):
        if self.mean_speed < 0 or self.reversion_rate <= 0 or self.volatility < 0:
            raise ValueError("invalid wind model parameters")

    @property
    def stationary_std(self) -> float:
        return self.volatility / math.sqrt(2.0 * self.reversion_rate)


@dataclass(frozen=True)
class PowerCurve:
    """Variable-speed turbine operating curve.

    Below ``cut_in`` and above ``cut_out`` the rotor is parked (0, 0).  Between
    ``cut_in`` and ``rated`` the rotor runs at a constant tip-speed ratio
    (``omega = omega_n * v / rated``) and power follows the cubic law
    ``P = P_n * (v^3 - cut_in^3) / (rated^3 - cut_in^3)``.  From ``rated`` up
    to and including ``cut_out`` both are at their nominal values.
    """

    nominal_power: float = 850.0
    nominal_rotor_speed: float = 2.8
    cut_in: float = 3.5
    rated: float = 12.5
    cut_out: float = 25.0

    def __post_init__(self):
        if not 0 < self.cut_in < self.rated < self.cut_out:
            raise ValueError("need 0 < cut_in < rated < cut_out")
        if self.nominal_power <= 0 or self.nominal_rotor_speed <= 0:
            raise ValueError("nominal power and rotor speed must be positive")


@dataclass(frozen=True)
class AmbientModel:
    """Ambient temperature: annual and daily cosines plus AR(1) weather noise.

    The annual minimum falls on 15 January, the daily minimum at 03:00 UTC.
    The noise has stationary std ``noise_std`` and a 3-hour correlation time.
    """

    daily_mean: float = 10.0
    diurnal_amplitude: float = 4.0
    seasonal_amplitude: float = 8.0
    noise_std: float = 0.5
    correlation_time: float = 3 * 3600.0

    def __post_init__(self):
        if min(self.diurnal_amplitude, self.seasonal_amplitude, self.noise_std) < 0:
            raise ValueError("amplitudes and noise must be non-negative")


@dataclass(frozen=True)
class CurtailmentModel:
    """Plant-wide curtailment episodes capping power at ``level * P_n``.

    Episodes start as a Bernoulli process with ``rate_per_day`` expected starts
    per day and last ``duration_hours``.
    """

    rate_per_day: float = 0.0
    duration_hours: float = 6.0
    level: float = 0.5

    def __post_init__(self):
        if self.rate_per_day < 0 or self.duration_hours <= 0 or not 0 <= self.level <= 1:
            raise ValueError("invalid curtailment model")


@dataclass(frozen=True)
class FaultProfile:
    """Friction fault: ``mu`` is scaled by a factor ramping 1 -> ``mu_multiplier``."""

    onset: int
    mu_multiplier: float
    ramp_duration: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "onset", to_epoch(self.onset))
        if self.mu_multiplier < 1:
            raise ValueError("mu_multiplier must be >= 1")
        if self.ramp_duration < 0:
            raise ValueError("ramp_duration must be >= 0")

    @property
    def ramp_end(self) -> int:
        return self.onset + int(round(self.ramp_duration))

    def multiplier_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.ramp_duration == 0:
            frac = (t >= self.onset).astype(np.float64)
        else:
            frac = np.clip((t - self.onset) / self.ramp_duration, 0.0, 1.0)
        return 1.0 + (self.mu_multiplier - 1.0) * frac


@dataclass(frozen=True)
class PlantPreset:
    plant_id: str
    physics: PlantPhysicsConfig
    wind: WindModelConfig
    ambient: AmbientModel
    curve: PowerCurve = field(default_factory=PowerCurve)
    curtailment: CurtailmentModel = field(default_factory=CurtailmentModel)
    jitter: float = 0.1


_BASE = PlantPhysicsConfig()

# Three climates emulating a cross-plant distribution shift.
PRESETS: dict[str, PlantPreset] = {
    "A": PlantPreset(
        "A",
        _BASE,
        WindModelConfig(mean_speed=7.0),
        AmbientModel(daily_mean=9.0, diurnal_amplitude=4.0, seasonal_amplitude=8.0),
        curtailment=CurtailmentModel(rate_per_day=0.05),
    ),
    "B": PlantPreset(
        "B",
        _BASE.scaled(c_p=1.05, resistance=0.95, mu=1.10, alpha_deg=0.95),
        WindModelConfig(mean_speed=8.5, volatility=4.0 * math.sqrt(2.0 / (6 * 3600))),
        AmbientModel(daily_mean=12.0, diurnal_amplitude=3.0, seasonal_amplitude=6.0),
        curtailment=CurtailmentModel(rate_per_day=0.1, level=0.6),
    ),
    "C": PlantPreset(
        "C",
        _BASE.scaled(c_p=0.95, resistance=1.05, mu=0.90, alpha_deg=1.05),
        WindModelConfig(mean_speed=6.0, reversion_rate=1.0 / (4 * 3600),
                        volatility=3.0 * math.sqrt(2.0 / (4 * 3600))),
        AmbientModel(daily_mean=5.0, diurnal_amplitude=5.0, seasonal_amplitude=10.0),
        curtailment=CurtailmentModel(rate_per_day=0.2, duration_hours=4.0, level=0.4),
    ),
}


# ---------------------------------------------------------------------------
# component models
# ---------------------------------------------------------------------------

def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def simulate_wind(config: WindModelConfig, steps: int, seed, dt: float = GRID_SECONDS) -> np.ndarray:
    """Exactly discretized OU path, clamped at 0 for output only."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = _rng(seed)
    phi = math.exp(-config.reversion_rate * dt)
    step_std = config.volatility * math.sqrt((1.0 - phi * phi) / (2.0 * config.reversion_rate))
    z = rng.standard_normal(steps)
    if config.initial_speed is None:
        v = config.mean_speed + config.stationary_std * z[0]
    else:
        v = float(config.initial_speed)
    out = np.empty(steps)
    out[0] = v
    m = config.mean_speed
    for i in range(1, steps):
        v = m + (v - m) * phi + step_std * z[i]
        out[i] = v
    return np.maximum(out, 0.0)


def operating_point(wind, curve: PowerCurve, curtailment=1.0):
    """Rotor speed [rad/s] and power [kW] for wind speed(s) [m/s].

    ``curtailment`` is a power cap as a fraction of nominal power (scalar or
    array); capped power scales rotor speed by the same ratio.
    """
    v = np.asarray(wind, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("wind speed must be non-negative")
    partial = (v >= curve.cut_in) & (v < curve.rated)
    full = (v >= curve.rated) & (v <= curve.cut_out)
    ci3, r3 = curve.cut_in ** 3, curve.rated ** 3
    power = np.where(partial, curve.nominal_power * (v ** 3 - ci3) / (r3 - ci3), 0.0)
    power = np.where(full, curve.nominal_power, power)
    omega = np.where(partial, curve.nominal_rotor_speed * v / curve.rated, 0.0)
    omega = np.where(full, curve.nominal_rotor_speed, omega)
    cap = np.asarray(curtailment, dtype=np.float64) * curve.nominal_power
    over = power > cap
    if np.any(over):
        ratio = np.where(over, cap / np.where(power > 0, power, 1.0), 1.0)
        omega = omega * ratio
        power = np.where(over, cap, power)
    if np.ndim(power) == 0:
        return float(omega), float(power)
    return omega, power


def simulate_ambient(model: AmbientModel, timestamps: np.ndarray, seed) -> np.ndarray:
    rng = _rng(seed)
    t = np.asarray(timestamps, dtype=np.float64)
    # 1970-01-15 is a mid-January anchor; the annual phase drifts by < 1 day per century
    season = -np.cos(2 * np.pi * (t - 14 * DAY_SECONDS) / YEAR_SECONDS)
    diurnal = -np.cos(2 * np.pi * (t - 3 * 3600.0) / DAY_SECONDS)
    base = model.daily_mean + model.seasonal_amplitude * season + model.diurnal_amplitude * diurnal
    z = rng.standard_normal(t.size)
    if model.noise_std == 0 or t.size == 0:
        return base
    phi = math.exp(-GRID_SECONDS / model.correlation_time)
    innov = model.noise_std * math.sqrt(1 - phi * phi)
    noise = np.empty(t.size)
    e = model.noise_std * z[0]
    noise[0] = e
    for i in range(1, t.size):
        e = phi * e + innov * z[i]
        noise[i] = e
    return base + noise


def simulate_curtailment(model: CurtailmentModel, steps: int, seed) -> np.ndarray:
    """Per-step power cap fraction (1.0 = unconstrained)."""
    rng = _rng(seed)
    cap = np.ones(steps)
    if model.rate_per_day == 0:
        return cap
    p_start = model.rate_per_day * GRID_SECONDS / DAY_SECONDS
    length = max(1, int(round(model.duration_hours * 3600 / GRID_SECONDS)))
    for s in np.flatnonzero(rng.random(steps) < p_start):
        cap[s:s + length] = model.level
    return cap


# ---------------------------------------------------------------------------
# heat balance
# ---------------------------------------------------------------------------

def check_stability(cfg: PlantPhysicsConfig) -> None:
    if cfg.euler_ratio >= 1:
        raise UnstableIntegration(
            f"dt/(C_p R) = {cfg.euler_ratio:.3g} >= 1: explicit Euler would oscillate or diverge")


def step_bearing_temp(t_b: float, t_a: float, omega: float, power_kw: float,
                      cfg: PlantPhysicsConfig, noise: float = 0.0) -> float:
    """One explicit Euler step of the bearing heat balance.

    ``noise`` is the process-noise increment for this step (already scaled,
    typically ``cfg.temp_noise_std * N(0, 1)``).  No stability check is made
    here; see :func:`check_stability`.
    """
    heat = (t_a - t_b) / cfg.resistance + cfg.mu * omega + cfg.alpha_deg * power_kw * 1000.0
    return t_b + cfg.dt / cfg.c_p * heat + noise


def integrate_bearing(ambient, omega, power_kw, cfg: PlantPhysicsConfig,
                      initial: Optional[float] = None, process_noise=None) -> np.ndarray:
    """True bearing temperature path.

    ``initial`` defaults to the steady state of the first inputs.
    ``process_noise[i]`` (already scaled) is added on the step into index ``i``;
    entry 0 is unused.
    """
    ta = np.asarray(ambient, dtype=np.float64).tolist()
    w = np.asarray(omega, dtype=np.float64).tolist()
    p = np.asarray(power_kw, dtype=np.float64).tolist()
    n = len(ta)
    noise = [0.0] * n if process_noise is None else np.asarray(process_noise, dtype=np.float64).tolist()
    out = [0.0] * n
    if n == 0:
        return np.zeros(0)
    tb = float(cfg.steady_state(ta[0], w[0], p[0])) if initial is None else float(initial)
    out[0] = tb
    for i in range(1, n):
        tb = step_bearing_temp(tb, ta[i], w[i], p[i], cfg, noise[i])
        out[i] = tb
    return np.asarray(out)


# ---------------------------------------------------------------------------
# plant generation
# ---------------------------------------------------------------------------

class TurbineStreams(NamedTuple):
    jitter: np.random.Generator
    wind: np.random.Generator
    process: np.random.Generator
    sensor: np.random.Generator


def turbine_streams(seed: int, index: int) -> TurbineStreams:
    children = np.random.SeedSequence(derive_seed(seed, index + 1)).spawn(4)
    return TurbineStreams(*(np.random.default_rng(c) for c in children))


def turbine_coefficients(physics: PlantPhysicsConfig, n_turbines: int, seed: int,
                         jitter: float = 0.1) -> list[PlantPhysicsConfig]:
    """Per-turbine physics, each of C_p, R, mu, alpha_deg scaled by U(1 - jitter, 1 + jitter)."""
    out = []
    for i in range(n_turbines):
        f = turbine_streams(seed, i).jitter.uniform(1 - jitter, 1 + jitter, size=4)
        out.append(physics.scaled(*f.tolist()))
    return out


def turbine_id(plant_id: str, index: int) -> str:
    return f"{plant_id}-T{index + 1:02d}"


def _steps_for(duration) -> int:
    if isinstance(duration, timedelta):
        seconds = duration.total_seconds()
    else:
        seconds = float(duration)
    return int(seconds // GRID_SECONDS)


def generate_plant(
    physics: PlantPhysicsConfig,
    wind: WindModelConfig,
    ambient: AmbientModel,
    curve: PowerCurve,
    n_turbines: int,
    duration: Union[timedelta, float],
    seed: int,
    plant_id: str = "plant",
    start: Timestamp = "2022-01-01T00:00:00Z",
    curtailment: CurtailmentModel = CurtailmentModel(),
    jitter: float = 0.1,
    lags: int = DEFAULT_LAGS,
) -> PlantDataset:
    """Simulate a plant of ``n_turbines`` turbines over ``duration``.

    ``duration`` is a timedelta or a number of seconds.  Ambient temperature and
    curtailment are shared by the plant; wind, coefficient jitter, process and
    sensor noise are independent per turbine.

    Raises
    ------
    InvalidDuration
        Fewer than ``2 * (lags + 2)`` grid steps.
    UnstableIntegration
        Any (jittered) turbine has ``dt / (C_p R) >= 1``.
    """
    steps = _steps_for(duration)
    if steps < 2 * (lags + 2):
        raise InvalidDuration(f"{steps} steps is shorter than the minimum {2 * (lags + 2)}")
    if physics.dt != GRID_SECONDS:
        raise ValueError(f"physics.dt must equal the {GRID_SECONDS} s SCADA grid")
    t0 = to_epoch(start)
    if t0 % GRID_SECONDS:
        raise ValueError("start must be grid aligned")
    ts = t0 + GRID_SECONDS * np.arange(steps, dtype=np.int64)

    plant_seq = np.random.SeedSequence(derive_seed(seed, 0)).spawn(2)
    t_a = simulate_ambient(ambient, ts, np.random.default_rng(plant_seq[0]))
    caps = simulate_curtailment(curtailment, steps, np.random.default_rng(plant_seq[1]))

    coeffs = turbine_coefficients(physics, n_turbines, seed, jitter)
    for c in coeffs:
        check_stability(c)

    turbines = {}
    for i, cfg in enumerate(coeffs):
        streams = turbine_streams(seed, i)
        v = simulate_wind(wind, steps, streams.wind)
        omega, power = operating_point(v, curve, caps)
        proc = cfg.temp_noise_std * streams.process.standard_normal(steps)
        true_tb = integrate_bearing(t_a, omega, power, cfg, process_noise=proc)
        measured = true_tb + cfg.sensor_noise_std * streams.sensor.standard_normal(steps)
        tid = turbine_id(plant_id, i)
        turbines[tid] = TurbineSeries(tid, ts, t_a, omega, power, measured)
    return PlantDataset(plant_id, turbines, curve.nominal_power)


def generate_preset(preset: Union[str, PlantPreset], n_turbines: int, duration, seed: int,
                    start: Timestamp = "2022-01-01T00:00:00Z", **overrides) -> PlantDataset:
    p = PRESETS[preset] if isinstance(preset, str) else preset
    if overrides:
        p = replace(p, **overrides)
    return generate_plant(p.physics, p.wind, p.ambient, p.curve, n_turbines, duration, seed,
                          plant_id=p.plant_id, start=start, curtailment=p.curtailment,
                          jitter=p.jitter)


def fault_excess(timestamps, omega, cfg: PlantPhysicsConfig, fault: FaultProfile) -> np.ndarray:
    """Extra bearing temperature caused by ``fault``, zero before onset.

    The heat balance is linear in temperature, so the faulted path equals the
    clean path plus this excess whatever the noise realisation was.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    w = np.asarray(omega, dtype=np.float64)
    extra_mu = ((fault.multiplier_at(ts) - 1.0) * cfg.mu).tolist()
    w = w.tolist()
    excess = [0.0] * len(w)
    e = 0.0
    start = int(np.searchsorted(ts, fault.onset, side="left"))
    gain = cfg.dt / cfg.c_p
    for i in range(start, len(w)):
        e = e + gain * (-e / cfg.resistance + extra_mu[i] * w[i])
        excess[i] = e
    return np.asarray(excess)


def inject_fault(series: TurbineSeries, physics: PlantPhysicsConfig, fault: FaultProfile) -> TurbineSeries:
    """Return ``series`` with bearing temperatures regenerated under ``fault``.

    ``physics`` must be the turbine's own coefficients (see
    :func:`turbine_coefficients`).  Ambient, rotor speed and power are
    untouched, and every record before the onset is bitwise unchanged.
    """
    if len(series) == 0 or not series.timestamps[0] <= fault.onset <= series.timestamps[-1]:
        raise OnsetOutOfRange(f"fault onset {fault.onset} outside the series range")
    excess = fault_excess(series.timestamps, series.rotor_speed, physics, fault)
    start = int(np.searchsorted(series.timestamps, fault.onset, side="left"))
    tb = series.bearing_temp.copy()
    tb[start:] = tb[start:] + excess[start:]
    return series.with_bearing_temp(tb)


def ground_truth(preset_or_physics, n_turbines: int, seed: int, plant_id: str,
                 jitter: float = 0.1, faults: Optional[dict] = None) -> dict:
    """JSON-ready record of per-turbine true coefficients and fault schedules."""
    physics = preset_or_physics.physics if isinstance(preset_or_physics, PlantPreset) else preset_or_physics
    out = {"plant_id": plant_id, "seed": int(seed), "jitter": jitter,
           "plant_physics": asdict(physics), "turbines": {}}
    faults = faults or {}
    for i, cfg in enumerate(turbine_coefficients(physics, n_turbines, seed, jitter)):
        tid = turbine_id(plant_id, i)
        entry = {"physics": asdict(cfg), "true_lambdas": list(cfg.true_lambdas)}
        if tid in faults:
            f = faults[tid]
            entry["fault"] = {"onset": int(f.onset), "mu_multiplier": f.mu_multiplier,
                              "ramp_duration": f.ramp_duration}
        out["turbines"][tid] = entry
    return out
