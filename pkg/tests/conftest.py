import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ltune.domain import ROCKSDB_SCHEMA, Dataset, ParameterSpace, ParameterSpec

settings.register_profile("ltune", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ltune")


def make_small_space() -> ParameterSpace:
    return ParameterSpace((
        ParameterSpec("buffer", "continuous", 0.0, 100.0, default=25.0),
        ParameterSpec("threads", "integer", 1.0, 64.0, default=4.0),
        ParameterSpec("mode", "categorical", categories=("a", "b", "c"), default=1),
    ))


def make_small_dataset(small_space: ParameterSpace) -> Dataset:
    rng = np.random.default_rng(3)
    n = 40
    confs = np.column_stack([
        rng.uniform(0, 100, n),
        rng.integers(1, 65, n).astype(float),
        rng.integers(0, 3, n).astype(float),
    ])
    base = 1.0 + confs[:, 0] / 100.0 + confs[:, 2]
    metrics = np.column_stack([100.0 / base, 1000.0 * base, 2.0 + confs[:, 1] / 64.0, 1.1 + 0.0 * base])
    metrics[:, 3] += rng.uniform(0, 0.05, n)
    return Dataset(small_space, ROCKSDB_SCHEMA, confs, metrics)


@pytest.fixture
def small_space():
    return make_small_space()


@pytest.fixture
def small_dataset(small_space):
    return make_small_dataset(small_space)


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, passed, detail)."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        lines.append((number, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
