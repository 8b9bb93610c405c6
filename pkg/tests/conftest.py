import numpy as np
import pytest

from nvatmosphere.params import PhysicalParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_density_matrix(rng, dim=4):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def rk4_propagate(rho, h, t, substeps=1000):
    """Independent reference: RK4 on dρ/dt = -i 2π [H, ρ]."""
    dt = t / substeps

    def f(r):
        return -2j * np.pi * (h @ r - r @ h)

    r = np.array(rho, dtype=complex)
    for _ in range(substeps):
        k1 = f(r)
        k2 = f(r + 0.5 * dt * k1)
        k3 = f(r + 0.5 * dt * k2)
        k4 = f(r + dt * k3)
        r = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return r


def fringe_amplitude(trace, freq=1.0):
    """Lock-in magnitude of the mean-free trace at ``freq`` (MHz)."""
    v = trace.values - trace.values.mean()
    return abs(np.sum(v * np.exp(-2j * np.pi * freq * trace.tau_grid)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
