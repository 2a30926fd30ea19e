import numpy as np
import pytest

from kahlervar.bakry_emery import KahlerState
from kahlervar.spectral_fields import FourierSpec, TorusGrid

ROOT = __import__("pathlib").Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def spec(*terms):
    return FourierSpec.from_list([{"mode": list(m), "amp": a, "kind": k} for m, a, k in terms])


def curved_state(n=1, res=32, amp=None, h_amp=0.1):
    grid = TorusGrid(n, res)
    if n == 1:
        amp = 0.05 if amp is None else amp
        phi = spec(((1, 0), amp, "cos"), ((0, 1), 0.6 * amp, "sin"))
        h = spec(((1, 0), h_amp, "cos"), ((1, 1), 0.5 * h_amp, "sin"))
    else:
        amp = 0.002 if amp is None else amp
        phi = spec(((1, 0, 0, 0), amp, "cos"), ((0, 0, 1, 0), 0.6 * amp, "sin"), ((0, 1, 1, 0), 0.5 * amp, "cos"))
        h = spec(((1, 0, 0, 0), h_amp, "cos"), ((1, 0, 1, 0), 0.5 * h_amp, "sin"))
    return KahlerState.from_potential(grid, phi.synthesize(grid), h.synthesize(grid))


@pytest.fixture(scope="session")
def state_n1():
    return curved_state(1, 64)


@pytest.fixture(scope="session")
def state_n2_small():
    return curved_state(2, 8, amp=0.002)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
