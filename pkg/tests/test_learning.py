import math

import numpy as np
import pytest

from rabi_xtalk.core import ReadoutErrorModel, canonicalize_phase, random_chip
from rabi_xtalk.experiment import Protocol, noiseless_curve, synthesize_dataset
from rabi_xtalk.learning import (
    BOUNDARY_HIT,
    THETA_UNIDENTIFIABLE,
    ChipFitReport,
    PairFitResult,
    characterize_chip,
    chi_squared_per_dof,
    coarse_grid,
    correlation_null_band,
    fit_pair,
    load_report,
    pair_model,
    save_report,
)

from conftest import R_DEFAULT, chip_from_matrices

PROTOCOL = Protocol()


def pair_chip(beta, theta):
    b = np.eye(2)
    t = np.zeros((2, 2))
    b[0, 1], t[0, 1] = beta, theta
    return chip_from_matrices(b, t)


def curve_for(beta, theta):
    return noiseless_curve(pair_chip(beta, theta), 0, (1,))


def datasets_for(beta, theta, seeds, shots=1000):
    curve = curve_for(beta, theta)
    p = Protocol(shots=shots)
    return [synthesize_dataset(curve, 0, (1,), p, ReadoutErrorModel(), s) for s in seeds]


def test_chi2_examples():
    assert chi_squared_per_dof([1, 2, 3], [1, 2, 3], [1, 1, 1], 0) == 0.0
    assert chi_squared_per_dof([1, 2, 3, 4], [0, 1, 2, 3], [1, 1, 1, 1], 2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        chi_squared_per_dof([1, 2], [1, 2], [1, 1], 2)


def test_flat_data_gives_zero_beta():
    curve = np.full(33, math.cos(R_DEFAULT))
    ds = synthesize_dataset(curve, 0, (1,), PROTOCOL, ReadoutErrorModel(1.0, 1.0), 0)
    exact = type(ds)(**{**ds.__dict__, "observed_z": curve, "sigma": np.full(33, 0.03)})
    fit = fit_pair(exact)
    assert fit.beta_hat < 1e-3
    assert THETA_UNIDENTIFIABLE in fit.flags


def test_fit_is_grid_argmin_or_better():
    ds = datasets_for(0.08, -2.0, [3])[0]
    fit = fit_pair(ds)
    betas, thetas = coarse_grid()
    model = pair_model(betas[:, None, None], thetas[None, :, None], ds.phases[None, None, :], R_DEFAULT)
    grid_best = np.min(np.sum(((ds.observed_z - model) / ds.sigma) ** 2, axis=-1))
    own = np.sum(((ds.observed_z - pair_model(fit.beta_hat, fit.theta_hat, ds.phases, R_DEFAULT)) / ds.sigma) ** 2)
    assert own <= grid_best + 1e-9
    assert fit.chi2_per_dof == pytest.approx(own / 31, rel=1e-12)


def test_phase_wrap_equivalence():
    fit = fit_pair(datasets_for(0.1, math.pi - 0.02, [5])[0])
    wrapped = canonicalize_phase(fit.theta_hat - (math.pi - 0.02))
    assert abs(wrapped) < 0.1
    assert -math.pi <= fit.theta_hat < math.pi


@pytest.mark.slow
def test_recovery_rate_at_reference_point():
    hits = 0
    for ds in datasets_for(0.10, 1.2, range(100)):
        f = fit_pair(ds)
        if abs(f.beta_hat - 0.10) <= 0.01 and abs(canonicalize_phase(f.theta_hat - 1.2)) <= 0.1:
            hits += 1
    assert hits >= 95


def test_strong_beta_not_at_boundary():
    fit = fit_pair(datasets_for(0.15, 0.3, [2])[0])
    assert BOUNDARY_HIT not in fit.flags
    assert fit.beta_hat == pytest.approx(0.15, abs=0.01)


@pytest.mark.slow
def test_theta_stderr_nonincreasing_in_beta():
    med = []
    for beta in (0.02, 0.05, 0.1, 0.2):
        med.append(np.median([fit_pair(ds).theta_stderr for ds in datasets_for(beta, 0.7, range(50))]))
    assert all(x >= y for x, y in zip(med, med[1:])), med


@pytest.mark.slow
def test_error_shrinks_with_shots():
    errs = {}
    for shots in (1000, 4000):
        fits = [fit_pair(ds) for ds in datasets_for(0.07, -1.0, range(50), shots)]
        errs[shots] = np.median([abs(f.beta_hat - 0.07) for f in fits])
    assert errs[4000] < errs[1000]


def test_stderr_matches_scatter():
    fits = [fit_pair(ds) for ds in datasets_for(0.1, 0.5, range(60))]
    spread = np.std([f.beta_hat for f in fits])
    assert np.median([f.beta_stderr for f in fits]) == pytest.approx(spread, rel=0.35)


@pytest.mark.slow
def test_characterize_chip_with_disabled_readout(chip8):
    report = characterize_chip(chip8, seed=1, workers=4)
    assert len(report.results) == 49
    assert all(r.pair[0] != 5 for r in report.results)
    assert 0.6 < report.median_chi2 < 1.5
    assert 5 in report.disabled_readout_qubits


def test_report_round_trip(tmp_path):
    chip = random_chip(3, 4, (0.02, 0.15))
    report = characterize_chip(chip, seed=2, pairs=[(0, 1), (1, 2), (2, 0)])
    path = tmp_path / "fit.json"
    save_report(report, path)
    back = load_report(path)
    assert back == report
    assert back.get(1, 2) == report.get(1, 2)
    assert report.get(1, 0) is None


def test_infinite_stderr_serialises():
    r = PairFitResult((0, 1), 0.0, 0.0, 1.0, 0.01, math.inf, frozenset({THETA_UNIDENTIFIABLE}), 33)
    assert r.to_dict()["theta_stderr"] is None
    assert PairFitResult.from_dict(r.to_dict()) == r


def test_correlation_and_null_band():
    rng = np.random.default_rng(0)
    b = rng.uniform(0, 0.15, 49)
    t = rng.uniform(-math.pi, math.pi, 49)
    band = correlation_null_band(b, t, n_perm=500)
    # the 95% band for 49 independent samples is close to 1.96/sqrt(48)
    assert band == pytest.approx(1.96 / math.sqrt(48), rel=0.25)
    results = [PairFitResult((0, i), bi, ti, 1.0, 0.0, 0.0) for i, (bi, ti) in enumerate(zip(b, t))]
    report = ChipFitReport(tuple(results), 50)
    assert report.beta_theta_correlation == pytest.approx(np.corrcoef(b, t)[0, 1])
