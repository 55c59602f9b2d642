import math

import numpy as np
import pytest

from rabi_xtalk.core import (
    ChipGroundTruth,
    ChipTopology,
    CrosstalkMatrix,
    PulseEnvelope,
    ReadoutErrorModel,
    TransmonParams,
    random_chip,
)
from rabi_xtalk.oracle import DriveTermInstance

R_DEFAULT = 2.5 * math.pi


@pytest.fixture(scope="session")
def transmon():
    return TransmonParams.from_hz(5.0e9, -600e6)


def pair_drives(transmon, beta, theta=0.0, delta_phi=0.0, rotation_angle=R_DEFAULT, duration=160e-9, extra=()):
    """Primary drive plus secondaries, with the virtual-Z phase already applied."""
    env = PulseEnvelope(duration=duration, rotation_angle=rotation_angle)
    out = [DriveTermInstance(1.0, 0.0, 0.0, transmon.frequency, env)]
    terms = [(beta, theta)] if beta is not None else []
    terms += list(extra)
    for b, t in terms:
        out.append(DriveTermInstance(b, t, -delta_phi, transmon.frequency, env))
    return out


@pytest.fixture
def make_drives(transmon):
    def _make(*args, **kwargs):
        return pair_drives(transmon, *args, **kwargs)

    return _make


def chip_from_matrices(beta, theta, readout=ReadoutErrorModel(), disabled=()):
    n = len(beta)
    return ChipGroundTruth.build(
        CrosstalkMatrix(beta, theta, np.zeros((n, n))),
        topology=ChipTopology.ring(n, disabled),
        readout=readout,
    )


@pytest.fixture(scope="session")
def chip8():
    """8-qubit ring, qubit 5 readout disabled, beta in [0.02, 0.15]."""
    return random_chip(8, 2024, (0.02, 0.15), topology=ChipTopology.ring(8, [5]))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> bool:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
