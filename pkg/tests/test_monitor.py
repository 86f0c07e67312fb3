from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermocast.errors import NoWindows
from thermocast.models import fit_linear, physics_delta
from thermocast.monitor import (
    AlarmConfig,
    AlarmEvent,
    ResidualSeries,
    alarm_state,
    calibrate,
    detect,
    ewma,
    monitor,
    residuals,
    write_alarms_csv,
)
from thermocast.plant_sim import PRESETS, generate_preset
from thermocast.scada_data import GRID_SECONDS, WindowSet, build_windows, time_split

from conftest import T0, make_series

DAY = 86400
values = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60)


def series_of(v, tid="T"):
    v = np.asarray(v, dtype=float)
    return ResidualSeries(tid, T0 + GRID_SECONDS * np.arange(v.size), v)


class ConstantModel:
    def __init__(self, offset):
        self.offset = offset

    def predict(self, windows):
        return windows.targets - self.offset


# -- ewma ---------------------------------------------------------------------

def test_ewma_weight_one_is_identity():
    v = np.random.default_rng(0).normal(size=50)
    assert np.array_equal(ewma(v, 1.0), v)


def test_ewma_constant_converges():
    assert ewma(np.full(300, 2.5), 0.1)[-1] == pytest.approx(2.5, abs=1e-12)
    s = ewma(np.r_[0.0, np.full(400, 1.0)], 0.1)
    assert abs(s[-1] - 1.0) < 1e-15 + 0.9 ** 400


def test_ewma_matches_recurrence_oracle():
    r = np.random.default_rng(1).normal(size=200)
    w = 0.37
    expect = [r[0]]
    for x in r[1:]:
        expect.append(w * x + (1 - w) * expect[-1])
    assert np.allclose(ewma(r, w), expect, rtol=0, atol=1e-13)


def test_ewma_keeps_series_metadata():
    s = series_of([1.0, 2.0, 3.0], "X")
    out = ewma(s, 0.5)
    assert isinstance(out, ResidualSeries) and out.turbine_id == "X"
    assert np.array_equal(out.timestamps, s.timestamps)
    with pytest.raises(ValueError):
        ewma(s, 0.0)
    assert ewma([], 0.5).size == 0


@given(values, st.floats(1e-3, 1.0))
def test_ewma_is_convex_combination(v, w):
    s = ewma(v, w)
    slack = 1e-9 * (1 + max(abs(x) for x in v))
    for t in range(len(v)):
        assert min(v[:t + 1]) - slack <= s[t] <= max(v[:t + 1]) + slack


# -- config -------------------------------------------------------------------

def test_alarm_config_validation():
    AlarmConfig(1.0)
    for kw in ({"ewma_weight": 0}, {"ewma_weight": 1.5}, {"threshold_sigmas": 0}, {"min_consecutive": 0}):
        with pytest.raises(ValueError):
            AlarmConfig(1.0, **kw)
    with pytest.raises(ValueError):
        AlarmConfig(0.0)
    assert AlarmConfig(0.5, threshold_sigmas=4).threshold == 2.0


def test_calibrate_uses_population_std():
    r = np.random.default_rng(2).normal(0, 0.3, 1000)
    cfg = calibrate(series_of(r), threshold_sigmas=5)
    assert cfg.sigma0 == pytest.approx(float(np.std(r))) and cfg.threshold_sigmas == 5
    with pytest.raises(NoWindows):
        calibrate(series_of([1.0]))


# -- detect -------------------------------------------------------------------

def test_zero_residuals_raise_nothing():
    assert detect(series_of(np.zeros(500)), AlarmConfig(1.0)) == []


def test_step_gives_one_event_at_sixth_exceedance():
    sigma0 = 0.2
    v = np.zeros(400)
    v[100:200] = 10 * sigma0
    cfg = AlarmConfig(sigma0, min_consecutive=6)
    events = detect(series_of(v), cfg)
    assert len(events) == 1
    e = events[0]
    assert e.onset == T0 + GRID_SECONDS * 105
    assert e.peak_residual == pytest.approx(10 * sigma0)
    assert e.duration_steps == 95


def test_short_bursts_do_not_alarm():
    v = np.zeros(100)
    v[10:15] = 10.0
    assert detect(series_of(v), AlarmConfig(1.0, min_consecutive=6)) == []


def test_hysteresis_merges_dips_above_half_threshold():
    thr = 4.0
    v = np.zeros(100)
    v[10:30] = 5.0
    v[30:33] = 2.5          # below k*sigma0 but above half of it
    v[33:50] = 5.0
    events = detect(series_of(v), AlarmConfig(1.0, threshold_sigmas=thr))
    assert len(events) == 1 and events[0].duration_steps == 50 - 15
    v[30:33] = 1.0          # below half: the alarm clears and must re-arm
    events = detect(series_of(v), AlarmConfig(1.0, threshold_sigmas=thr))
    assert [e.onset for e in events] == [T0 + GRID_SECONDS * 15, T0 + GRID_SECONDS * 38]


def test_detection_is_one_sided():
    v = np.zeros(100)
    v[20:80] = -50.0
    assert detect(series_of(v), AlarmConfig(1.0)) == []


@given(values, st.floats(1.0, 10.0), st.integers(1, 8))
def test_scaling_up_never_removes_alarms(v, c, m):
    cfg = AlarmConfig(1.0, min_consecutive=m)
    before = alarm_state(np.asarray(v), cfg)
    after = alarm_state(c * np.asarray(v), cfg)
    if before.any():
        assert after.any()


@given(values, st.integers(1, 8))
def test_events_satisfy_their_invariants(v, m):
    cfg = AlarmConfig(1.0, min_consecutive=m)
    s = series_of(v)
    for e in detect(s, cfg):
        i = int(np.searchsorted(s.timestamps, e.onset))
        assert np.all(s.values[i - m + 1:i + 1] > cfg.threshold)
        assert e.duration_steps >= 1 and e.peak_residual > cfg.threshold


# -- residuals and the pipeline -----------------------------------------------

def test_residuals_of_perfect_and_biased_models():
    s = make_series(300)
    w = build_windows(s)[0]
    r = residuals(ConstantModel(0.0), s)
    assert len(r) == len(w) and np.all(r.values == 0.0)
    r = residuals(ConstantModel(1.25), s)
    assert np.mean(r.values) == pytest.approx(1.25)
    assert np.array_equal(r.timestamps, w.timestamps)
    with pytest.raises(NoWindows):
        residuals(ConstantModel(0.0), make_series(4))


def test_exact_physics_nowcaster_has_zero_residuals():
    preset = PRESETS["A"]
    physics = preset.physics.noise_free()
    ds = generate_preset(replace(preset, physics=physics, jitter=0.0), 1, 5 * DAY, seed=4)
    s = next(iter(ds.turbines.values()))

    class Exact:
        def predict(self, windows):
            return windows.prev_temps + physics_delta(physics.true_lambdas, windows.current_states)

    assert np.max(np.abs(residuals(Exact(), s).values)) < 1e-9


@pytest.fixture(scope="module")
def calibrated_plant():
    ds = generate_preset("B", 2, 40 * DAY, seed=8)
    boundary = T0 + 20 * DAY
    train_ds, test_ds = time_split(ds, boundary)
    windows = [build_windows(s)[0] for s in train_ds.turbines.values()]
    model = fit_linear(WindowSet.concat(windows))
    return ds, test_ds, model, boundary


def test_heldout_residual_std_matches_calibration(calibrated_plant):
    ds, test_ds, model, boundary = calibrated_plant
    for tid, s in ds.turbines.items():
        r = residuals(model, s)
        sigma0 = calibrate(r.before(boundary)).sigma0
        held = np.std(residuals(model, test_ds.turbines[tid]).values)
        assert abs(held / sigma0 - 1) < 0.2


def test_clean_calibration_series_has_no_alarms(calibrated_plant):
    ds, _, model, boundary = calibrated_plant
    for s in ds.turbines.values():
        cal = residuals(model, s).before(boundary)
        cfg = calibrate(cal)
        assert detect(ewma(cal, cfg.ewma_weight), cfg) == []


def test_monitor_pipeline_and_csv(calibrated_plant, tmp_path):
    ds, _, model, boundary = calibrated_plant
    s = next(iter(ds.turbines.values()))
    cfg = calibrate(residuals(model, s).before(boundary))
    r, sm, events = monitor(model, s, cfg)
    assert len(r) == len(sm) and np.allclose(sm.values, ewma(r.values, cfg.ewma_weight))
    path = write_alarms_csv(events, tmp_path / "alarms.csv")
    assert path.read_text().splitlines()[0] == "turbine_id,onset,peak_residual,duration_steps"
    write_alarms_csv([AlarmEvent("A-T01", T0, 1.5, 7)], path)
    assert path.read_text().splitlines()[1] == "A-T01,2022-01-01T00:00:00Z,1.5,7"
