import numpy as np
import pytest

from scbf.spectral_space import SpectralSpace
from scbf.verify import RandomFieldLaw, random_field


@pytest.fixture(scope="session")
def space():
    return SpectralSpace(2, 16)


@pytest.fixture(scope="session")
def small_space():
    return SpectralSpace(2, 8)


@pytest.fixture(scope="session")
def space3():
    return SpectralSpace(3, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_field(space, seed=0, amplitude=1.0, decay=1.0, cutoff=None, batch=()):
    law = RandomFieldLaw(decay=decay, amplitude=amplitude, seed=seed, cutoff=cutoff)
    return random_field(space, law, batch=batch)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; the lines are repeated in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}" + (f" | {detail}" if detail else "")
        print(line)
        lines.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
