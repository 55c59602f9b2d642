import math

import numpy as np
import pytest

from rabi_xtalk.analytic import PairwiseDriveSpec, pair_expectations, predict_z_curve
from rabi_xtalk.core import PulseEnvelope, TransmonParams
from rabi_xtalk.oracle import (
    DriveTermInstance,
    Frame,
    IntegrationError,
    SimulationConfig,
    evolve_target,
    expectation_xyz,
    rabi_curve,
)

from conftest import R_DEFAULT

RWA = SimulationConfig()


def z_of(transmon, drives, config=RWA):
    return expectation_xyz(evolve_target(transmon, drives, config))


@pytest.mark.parametrize("angle, z", [(math.pi, -1.0), (2 * math.pi, 1.0)])
def test_single_drive_rotation(transmon, make_drives, angle, z):
    e = z_of(transmon, make_drives(None, rotation_angle=angle))
    assert e.z == pytest.approx(z, abs=1e-6)


@pytest.mark.parametrize(
    "beta, theta, dphi",
    [(0.1, math.pi / 4, 0.0), (0.08, 1.0, 2.0), (0.3, -2.5, 0.4), (0.0, 0.0, 1.0)],
)
def test_pair_matches_closed_form(transmon, make_drives, beta, theta, dphi):
    got = z_of(transmon, make_drives(beta, theta, dphi))
    want = pair_expectations(PairwiseDriveSpec(beta, theta, rotation_angle=R_DEFAULT), delta_phi=dphi)
    assert got.z == pytest.approx(want.z, abs=1e-6)
    assert got.x == pytest.approx(want.x, abs=1e-6)
    # closed-form Y uses the opposite sign to the standard Pauli Y
    assert got.y == pytest.approx(-want.y, abs=1e-6)


def test_multi_drive_matches_coherent_sum(transmon, make_drives):
    terms = [(0.1, 0.3), (0.06, -2.0), (0.04, 1.1)]
    for dphi in (0.0, 1.7, 4.0):
        got = z_of(transmon, make_drives(None, delta_phi=dphi, extra=terms)).z
        want = predict_z_curve([b for b, _ in terms], [t for _, t in terms], dphi, R_DEFAULT)
        assert got == pytest.approx(float(want), abs=1e-6)


@pytest.mark.parametrize(
    "state, expected",
    [
        ([1, 0], (0, 0, 1, 0)),
        ([0, 1], (0, 0, -1, 0)),
        ([1 / math.sqrt(2), 1 / math.sqrt(2)], (1, 0, 0, 0)),
        ([1 / math.sqrt(2), 1j / math.sqrt(2)], (0, 1, 0, 0)),
    ],
)
def test_expectation_examples(state, expected):
    assert tuple(expectation_xyz(state)) == pytest.approx(expected, abs=1e-12)


def test_expectation_leakage():
    state = [math.sqrt(0.98), 0.0, math.sqrt(0.02)]
    e = expectation_xyz(state)
    assert e.leakage == pytest.approx(0.02, abs=1e-12)
    assert e.z == pytest.approx(0.98, abs=1e-12)


def test_step_halving_converged(transmon, make_drives):
    drives = make_drives(0.12, 0.8, 1.3)
    coarse = z_of(transmon, drives, SimulationConfig(time_step=160e-9 / 4000)).z
    fine = z_of(transmon, drives, SimulationConfig(time_step=160e-9 / 8000)).z
    assert abs(coarse - fine) <= 1e-8


def test_adaptive_mode_agrees(transmon, make_drives):
    drives = make_drives(0.12, 0.8, 1.3)
    fixed = z_of(transmon, drives).z
    adaptive = z_of(transmon, drives, SimulationConfig(tolerance=1e-10)).z
    assert adaptive == pytest.approx(fixed, abs=1e-7)


def test_zero_delay_identical_to_no_delay(transmon, make_drives):
    drives = make_drives(0.1, 0.5, 0.2)
    on = evolve_target(transmon, drives, SimulationConfig(include_delays=True))
    off = evolve_target(transmon, drives, SimulationConfig(include_delays=False))
    assert np.array_equal(on, off)


def test_delay_changes_result(transmon, make_drives):
    drives = make_drives(0.2, 0.5, 0.2)
    d = drives[1]
    shifted = [drives[0], DriveTermInstance(d.beta, d.theta, d.phi, d.carrier, d.envelope, 20e-9)]
    a = z_of(transmon, drives).z
    b = z_of(transmon, shifted).z
    c = z_of(transmon, shifted, SimulationConfig(include_delays=False)).z
    assert a != pytest.approx(b, abs=1e-4)
    assert c == pytest.approx(a, abs=1e-12)


def test_norm_preserved_and_contract_enforced(transmon, make_drives):
    psi = evolve_target(transmon, make_drives(0.2, 0.1, 0.0))
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-9
    with pytest.raises(IntegrationError):
        evolve_target(transmon, make_drives(0.2, 0.1, 0.0), SimulationConfig(time_step=40e-9))


def test_bit_reproducible(transmon, make_drives):
    drives = make_drives(0.11, 2.0, -0.3)
    assert np.array_equal(evolve_target(transmon, drives), evolve_target(transmon, drives))


def test_rabi_curve_flat_without_crosstalk(transmon, make_drives):
    grid = np.linspace(0, 2 * math.pi, 9, endpoint=False)
    z = rabi_curve(transmon, make_drives(0.0, 0.0), RWA, grid)
    assert np.max(np.abs(z - math.cos(R_DEFAULT))) < 1e-6


def test_rabi_curve_workers_identical(transmon, make_drives):
    grid = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    drives = make_drives(0.1, 0.7)
    assert np.array_equal(rabi_curve(transmon, drives, RWA, grid, 1), rabi_curve(transmon, drives, RWA, grid, 4))


def test_rabi_curve_extremum_at_theta(transmon, make_drives):
    # deviation from the bare rotation is largest where the lines add in phase
    theta = 1.1
    grid = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    z = rabi_curve(transmon, make_drives(0.1, theta), RWA, grid)
    analytic = predict_z_curve([0.1], [theta], grid, R_DEFAULT)
    assert np.max(np.abs(z - analytic)) < 1e-6
    dev = np.abs(z - math.cos(1.1 * R_DEFAULT))
    assert abs(grid[np.argmin(dev)] - theta) <= 2 * math.pi / 64


@pytest.mark.slow
def test_lab_frame_three_level_close_to_rwa(transmon, make_drives):
    lab = SimulationConfig(levels=3, frame=Frame.LAB)
    for dphi in (0.0, 1.5, 3.0):
        drives = make_drives(0.1, 0.6, dphi)
        a = z_of(transmon, drives, lab)
        b = z_of(transmon, drives).z
        assert abs(a.z - b) <= 2e-2
        assert a.leakage < 2e-2


@pytest.mark.slow
def test_frame_discrepancy_shrinks_with_duration():
    # weak drives: two-level lab frame converges to RWA as the pulse lengthens
    q = TransmonParams.from_hz(1.0e9, -300e6)
    gaps = []
    for duration in (10e-9, 20e-9, 40e-9):
        env = PulseEnvelope(duration=duration, rotation_angle=R_DEFAULT)
        drives = [
            DriveTermInstance(1.0, 0.0, 0.0, q.frequency, env),
            DriveTermInstance(0.1, 0.4, -0.3, q.frequency, env),
        ]
        lab = z_of(q, drives, SimulationConfig(frame=Frame.LAB)).z
        rwa = z_of(q, drives).z
        gaps.append(abs(lab - rwa))
    assert gaps[0] > gaps[1] > gaps[2]
