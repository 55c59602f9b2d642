"""Fit directional crosstalk (beta, theta) to phase-sweep data by chi-squared minimisation."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from .analytic import eta_pair
from .core import (
    ChipGroundTruth,
    CrosstalkMatrix,
    canonicalize_phase,
    chip_to_dict,
    dumps,
    map_ordered,
    write_text_atomic,
)
from .experiment import PhaseSweepDataset, Protocol, run_characterization
from .oracle import SimulationConfig

log = logging.getLogger(__name__)

BETA_FLOOR = 0.005
BETA_MAX = 0.5
BETA_GRID_STEP = 0.01
THETA_GRID_BINS = 64
PARAM_TOLERANCE = 1e-5
# p-value below which a fit is flagged as inconsistent with its error bars
POOR_FIT_PVALUE = 1e-4
REPORT_SCHEMA_VERSION = 1

THETA_UNIDENTIFIABLE = "theta_unidentifiable"
BOUNDARY_HIT = "boundary_hit"
POOR_FIT = "poor_fit"


def chi_squared_per_dof(observed, model, sigma, n_params: int) -> float:
    """Sum of squared normalised residuals divided by ``N - n_params``."""
    o = np.asarray(observed, dtype=float)
    m = np.asarray(model, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if not (o.shape == m.shape == s.shape):
        raise ValueError("observed, model and sigma must have equal length")
    dof = o.size - n_params
    if dof <= 0:
        raise ValueError(f"need more points ({o.size}) than parameters ({n_params})")
    if np.any(s <= 0):
        raise ValueError("sigma must be > 0")
    return float(np.sum(((o - m) / s) ** 2) / dof)


def pair_model(beta, theta, phases, rotation_angle):
    return np.cos(rotation_angle * eta_pair(beta, theta, phases))


@dataclass(frozen=True)
class PairFitResult:
    pair: tuple  # (measured a, source b)
    beta_hat: float
    theta_hat: float
    chi2_per_dof: float
    beta_stderr: float
    theta_stderr: float
    flags: frozenset = frozenset()
    n_points: int = 0

    def to_dict(self) -> dict:
        def fin(x):
            return x if math.isfinite(x) else None

        return {
            "pair": list(self.pair),
            "beta_hat": self.beta_hat,
            "theta_hat": self.theta_hat,
            "chi2_per_dof": self.chi2_per_dof,
            "beta_stderr": fin(self.beta_stderr),
            "theta_stderr": fin(self.theta_stderr),
            "flags": sorted(self.flags),
            "n_points": self.n_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairFitResult":
        def fin(x):
            return math.inf if x is None else float(x)

        return cls(
            tuple(d["pair"]),
            float(d["beta_hat"]),
            float(d["theta_hat"]),
            float(d["chi2_per_dof"]),
            fin(d["beta_stderr"]),
            fin(d["theta_stderr"]),
            frozenset(d.get("flags", ())),
            int(d.get("n_points", 0)),
        )


def _chi2_total(params, phases, obs, sigma, rotation_angle):
    beta, theta = params
    if beta < 0:
        beta, theta = -beta, theta + math.pi
    r = (obs - pair_model(beta, theta, phases, rotation_angle)) / sigma
    return float(np.dot(r, r))


def coarse_grid(beta_max=BETA_MAX, beta_step=BETA_GRID_STEP, theta_bins=THETA_GRID_BINS):
    betas = np.arange(0.0, beta_max + 0.5 * beta_step, beta_step)
    thetas = -math.pi + np.arange(theta_bins) * (2.0 * math.pi / theta_bins)
    return betas, thetas


def _stderr(beta, theta, phases, sigma, rotation_angle):
    """1-sigma errors from the Gauss-Newton curvature of chi-squared (delta chi2 = 1)."""
    eta = eta_pair(beta, theta, phases)
    safe = np.where(eta > 1e-12, eta, 1e-12)
    common = -rotation_angle * np.sin(rotation_angle * eta) / safe
    jac = np.column_stack(
        [common * (beta + np.cos(phases - theta)), common * beta * np.sin(phases - theta)]
    ) / sigma[:, None]
    fisher = jac.T @ jac
    try:
        cov = np.linalg.inv(fisher)
        if np.any(np.diag(cov) < 0) or not np.all(np.isfinite(cov)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        b = fisher[0, 0]
        return (1.0 / math.sqrt(b) if b > 0 else math.inf), math.inf
    return math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])


def fit_pair(
    dataset: PhaseSweepDataset,
    beta_max: float = BETA_MAX,
    beta_step: float = BETA_GRID_STEP,
    theta_bins: int = THETA_GRID_BINS,
    tolerance: float = PARAM_TOLERANCE,
) -> PairFitResult:
    """Grid search over (beta, theta) followed by bounded Nelder-Mead refinement."""
    a, b = dataset.pair
    phases = dataset.phases
    obs = dataset.observed_z
    sigma = dataset.sigma
    R = dataset.rotation_angle
    if len(phases) < 8:
        raise ValueError("need at least 8 phase points to fit")

    betas, thetas = coarse_grid(beta_max, beta_step, theta_bins)
    model = pair_model(
        betas[:, None, None], thetas[None, :, None], phases[None, None, :], R
    )
    chi2_grid = np.sum(((obs - model) / sigma) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmin(chi2_grid), chi2_grid.shape)
    b0, t0 = float(betas[i]), float(thetas[j])
    grid_best = float(chi2_grid[i, j])

    flags = set()
    simplex = [[b0, t0], [min(b0 + beta_step, beta_max), t0], [b0, t0 + 2 * math.pi / theta_bins]]
    res = optimize.minimize(
        _chi2_total,
        x0=[b0, t0],
        args=(phases, obs, sigma, R),
        method="Nelder-Mead",
        bounds=[(0.0, beta_max), (None, None)],
        options={
            "xatol": tolerance,
            "fatol": 1e-10,
            "initial_simplex": simplex,
            "maxiter": 4000,
        },
    )
    refined_ok = res.success and np.all(np.isfinite(res.x))
    if refined_ok and res.fun <= grid_best:
        beta_hat, theta_hat = float(res.x[0]), float(res.x[1])
        best = float(res.fun)
    else:
        # a converged simplex can still sit a rounding error above its start
        if not refined_ok:
            log.warning("refinement failed for pair %s: %s", (a, b), res.message)
            flags.add(POOR_FIT)
        beta_hat, theta_hat, best = b0, t0, grid_best

    theta_hat = canonicalize_phase(theta_hat)
    dof = len(phases) - 2
    chi2 = best / dof
    if beta_hat < BETA_FLOOR:
        flags.add(THETA_UNIDENTIFIABLE)
    if beta_hat >= beta_max - 0.1 * beta_step:
        flags.add(BOUNDARY_HIT)
    if stats.chi2.sf(best, dof) < POOR_FIT_PVALUE:
        flags.add(POOR_FIT)
    be, te = _stderr(beta_hat, theta_hat, phases, sigma, R)
    return PairFitResult((a, b), beta_hat, theta_hat, chi2, be, te, frozenset(flags), len(phases))


@dataclass(frozen=True)
class ChipFitReport:
    results: tuple
    qubit_count: int
    disabled_readout_qubits: frozenset = frozenset()
    protocol: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(sorted(self.results, key=lambda r: tuple(r.pair))))
        object.__setattr__(self, "disabled_readout_qubits", frozenset(self.disabled_readout_qubits))

    @property
    def median_chi2(self) -> float:
        return float(np.median([r.chi2_per_dof for r in self.results])) if self.results else math.nan

    @property
    def beta_theta_correlation(self) -> float:
        if len(self.results) < 3:
            return math.nan
        b = np.array([r.beta_hat for r in self.results])
        t = np.array([r.theta_hat for r in self.results])
        if np.ptp(b) == 0 or np.ptp(t) == 0:
            return math.nan
        return float(np.corrcoef(b, t)[0, 1])

    def get(self, a: int, b: int) -> PairFitResult | None:
        for r in self.results:
            if tuple(r.pair) == (a, b):
                return r
        return None

    def as_crosstalk(self) -> CrosstalkMatrix:
        """beta/theta matrices; unmeasured rows keep the ideal (no-crosstalk) values."""
        n = self.qubit_count
        beta = np.eye(n)
        theta = np.zeros((n, n))
        for r in self.results:
            a, b = r.pair
            beta[a, b] = r.beta_hat
            theta[a, b] = r.theta_hat
        return CrosstalkMatrix(beta, theta, np.zeros((n, n)))


def correlation_null_band(betas, thetas, n_perm: int = 2000, seed: int = 0, level: float = 0.95) -> float:
    """Half-width of the ``level`` permutation band of Pearson r under independence."""
    b = np.asarray(betas, dtype=float)
    t = np.asarray(thetas, dtype=float)
    rng = np.random.default_rng(seed)
    rs = np.array([np.corrcoef(b, rng.permutation(t))[0, 1] for _ in range(n_perm)])
    return float(np.quantile(np.abs(rs), level))


def fit_datasets(
    datasets: Iterable[PhaseSweepDataset],
    qubit_count: int,
    disabled_readout_qubits: Iterable[int] = (),
    workers: int = 1,
    **fit_kwargs,
) -> ChipFitReport:
    datasets = list(datasets)
    results = map_ordered(lambda ds: fit_pair(ds, **fit_kwargs), datasets, workers)
    protocol = dict(datasets[0].protocol) if datasets else {}
    return ChipFitReport(tuple(results), qubit_count, frozenset(disabled_readout_qubits), protocol)


def characterize_chip(
    source,
    protocol: Protocol = Protocol(),
    seed: int = 0,
    config: SimulationConfig = SimulationConfig(),
    pairs: Sequence[tuple[int, int]] | None = None,
    workers: int = 1,
    qubit_count: int | None = None,
) -> ChipFitReport:
    """Run and fit every directed pair of a chip, or fit an existing dataset collection."""
    if isinstance(source, ChipGroundTruth):
        datasets = run_characterization(source, protocol, seed, config, pairs, workers)
        return fit_datasets(
            datasets, source.qubit_count, source.topology.disabled_readout_qubits, workers
        )
    datasets = list(source)
    if qubit_count is None:
        qubit_count = 1 + max(max(ds.primary_qubit, *ds.secondary_qubits) for ds in datasets)
    return fit_datasets(datasets, qubit_count, (), workers)


def report_to_dict(report: ChipFitReport) -> dict:
    def fin(x):
        return x if math.isfinite(x) else None

    return {
        "version": REPORT_SCHEMA_VERSION,
        "qubit_count": report.qubit_count,
        "disabled_readout_qubits": sorted(report.disabled_readout_qubits),
        "protocol": report.protocol,
        "median_chi2_per_dof": fin(report.median_chi2),
        "beta_theta_correlation": fin(report.beta_theta_correlation),
        "results": [r.to_dict() for r in report.results],
    }


def report_from_dict(d: dict) -> ChipFitReport:
    if d.get("version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unsupported fit report version {d.get('version')!r}")
    return ChipFitReport(
        tuple(PairFitResult.from_dict(r) for r in d["results"]),
        int(d["qubit_count"]),
        frozenset(d.get("disabled_readout_qubits", ())),
        d.get("protocol", {}),
    )


def save_report(report: ChipFitReport, path) -> None:
    write_text_atomic(path, dumps(report_to_dict(report)))


def load_report(path) -> ChipFitReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def fitted_chip(report: ChipFitReport, base: ChipGroundTruth | None = None) -> ChipGroundTruth:
    """Chip whose crosstalk is the fitted beta/theta, for feeding back into simulation."""
    xt = report.as_crosstalk()
    if base is None:
        from .core import ChipTopology

        return ChipGroundTruth.build(
            xt, topology=ChipTopology.ring(report.qubit_count, report.disabled_readout_qubits)
        )
    return ChipGroundTruth(base.transmons, base.drives, xt, base.topology, base.readout)


def save_fitted_chip(report: ChipFitReport, path, base: ChipGroundTruth | None = None) -> None:
    write_text_atomic(path, dumps(chip_to_dict(fitted_chip(report, base))))
