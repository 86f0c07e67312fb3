import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thermocast.plant_sim import generate_preset
from thermocast.scada_data import GRID_SECONDS, TurbineSeries

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

T0 = 1_640_995_200  # 2022-01-01T00:00:00Z


def make_series(n, tid="T1", start=T0, seed=0, missing=()):
    """Random grid-aligned series of ``n`` slots with the given slot indexes dropped."""
    rng = np.random.default_rng(seed)
    keep = np.array([i for i in range(n) if i not in set(missing)], dtype=np.int64)
    ts = start + GRID_SECONDS * keep
    m = keep.size
    return TurbineSeries(tid, ts, rng.normal(10, 3, m), rng.uniform(0, 3, m),
                         rng.uniform(0, 850, m), rng.normal(40, 5, m))


@pytest.fixture(scope="session")
def week_plant():
    return generate_preset("A", 2, 7 * 86400, seed=11)


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion: ``acceptance(n, ok, detail)`` then assert it."""
    results = request.config.stash[ACCEPTANCE]

    def record(n, ok, detail):
        results[n] = (bool(ok), detail)
        assert ok, f"criterion {n}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
