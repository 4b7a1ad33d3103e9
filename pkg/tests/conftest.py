import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qlloyd.statevector import Register, StateVector

settings.register_profile(
    "qlloyd", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qlloyd")


def random_amplitudes(rng, dim, real=False):
    amps = rng.normal(size=dim) if real else rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return amps / np.linalg.norm(amps)


def random_state(rng, *dims, names=None):
    names = names or [f"r{i}" for i in range(len(dims))]
    layout = tuple(Register(n, d) for n, d in zip(names, dims))
    return StateVector(layout, random_amplitudes(rng, int(np.prod(dims))).astype(complex))


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def two_blobs(rng, per_blob, n, separation=4.0, spread=0.3):
    centre = np.zeros(n)
    centre[0] = separation / 2
    a = rng.normal(0, spread, (per_blob, n)) + centre
    b = rng.normal(0, spread, (per_blob, n)) - centre
    return np.vstack([a, b])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
