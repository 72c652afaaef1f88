import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from softsense.dataio import FEATURES, Dataset

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_dataset(n: int, seed: int = 0, flags=None) -> Dataset:
    rng = np.random.default_rng(seed)
    cols = {f: rng.standard_normal(n) for f in FEATURES}
    y = cols["A"] - 2 * cols["B"] + 0.1 * rng.standard_normal(n)
    return Dataset(cols, y, flags)


@pytest.fixture
def small_data() -> Dataset:
    return random_dataset(60, seed=11)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance(request, capsys):
    """Record one PASS/FAIL line for a criterion, echo it live, and assert it."""

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
