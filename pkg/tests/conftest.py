import numpy as np
import pytest

from nmrclone.nmrsim.system import default_system


@pytest.fixture
def sys():
    return default_system()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_density(rng, n_qubits=3):
    """Random full-rank mixed state."""
    d = 2**n_qubits
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_ket(rng, n_qubits=1):
    d = 2**n_qubits
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_deviation(rng):
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = g + g.conj().T
    return h - np.trace(h) / 8 * np.eye(8)


# One status line per acceptance criterion, printed after the run.
ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def report():
    def record(key: str, title: str, passed: bool, value: str, observation: bool = False) -> None:
        status = "OBSERVED" if observation else ("PASS" if passed else "FAIL")
        line = f"[{status:8s}] {key:3s} {title}: {value}"
        ACCEPTANCE[key] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        digits = "".join(c for c in key if c.isdigit())
        return (int(digits), key)

    for key in sorted(ACCEPTANCE, key=order):
        terminalreporter.write_line(ACCEPTANCE[key])
