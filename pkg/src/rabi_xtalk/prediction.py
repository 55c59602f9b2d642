"""Zero-parameter prediction of multi-drive experiments from pairwise fits."""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .analytic import predict_z_curve
from .core import dumps, write_text_atomic
from .experiment import PhaseSweepDataset, Protocol
from .learning import ChipFitReport, chi_squared_per_dof

PREDICTION_SCHEMA_VERSION = 1


class MissingPairFitError(KeyError):
    def __init__(self, a, b):
        super().__init__(f"no pair fit for measured qubit {a} with source {b}")
        self.pair = (a, b)

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True, eq=False)
class MultipletPrediction:
    primary_qubit: int
    secondaries: tuple
    rotation_angle: float
    phases: np.ndarray
    predicted_z: np.ndarray
    contributions: tuple  # ((source, beta, theta), ...)
    chi2_per_dof_vs_data: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "secondaries", tuple(int(q) for q in self.secondaries))
        for name in ("phases", "predicted_z"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self, "contributions", tuple((int(k), float(b), float(t)) for k, b, t in self.contributions)
        )

    def with_score(self, chi2: float) -> "MultipletPrediction":
        return MultipletPrediction(
            self.primary_qubit, self.secondaries, self.rotation_angle,
            self.phases, self.predicted_z, self.contributions, chi2,
        )


def predict_multiplet(
    report: ChipFitReport,
    a: int,
    secondaries: Sequence[int],
    protocol: Protocol = Protocol(),
) -> MultipletPrediction:
    """Coherent sum of the fitted pair terms; nothing is refitted."""
    if a in report.disabled_readout_qubits:
        raise ValueError(f"qubit {a} has disabled readout")
    contribs = []
    for k in secondaries:
        fit = report.get(a, k)
        if fit is None:
            raise MissingPairFitError(a, k)
        contribs.append((k, fit.beta_hat, fit.theta_hat))
    phases = protocol.phase_grid()
    betas = [c[1] for c in contribs]
    thetas = [c[2] for c in contribs]
    z = predict_z_curve(betas, thetas, phases, protocol.rotation_angle)
    return MultipletPrediction(a, tuple(secondaries), protocol.rotation_angle, phases, z, tuple(contribs))


def _check_grid(prediction: MultipletPrediction, dataset: PhaseSweepDataset):
    if len(prediction.phases) != len(dataset.phases) or not np.allclose(
        prediction.phases, dataset.phases, rtol=0, atol=1e-12
    ):
        raise ValueError("prediction and dataset phase grids differ")


def score_prediction(prediction: MultipletPrediction, dataset: PhaseSweepDataset) -> float:
    """Chi-squared per degree of freedom with no fitted parameters."""
    _check_grid(prediction, dataset)
    return chi_squared_per_dof(dataset.observed_z, prediction.predicted_z, dataset.sigma, n_params=0)


class ResidualReport(NamedTuple):
    residuals: np.ndarray  # data - prediction
    pulls: np.ndarray  # residual / sigma
    extreme_points: list  # indices where |prediction| > 0.9 and |pull| > 3


def residual_report(prediction: MultipletPrediction, dataset: PhaseSweepDataset) -> ResidualReport:
    """Per-point residuals, with large misses near <Z> = +-1 listed separately."""
    _check_grid(prediction, dataset)
    res = dataset.observed_z - prediction.predicted_z
    pulls = res / dataset.sigma
    extreme = [
        int(i)
        for i in np.nonzero((np.abs(prediction.predicted_z) > 0.9) & (np.abs(pulls) > 3.0))[0]
    ]
    return ResidualReport(res, pulls, extreme)


def decompose_accumulation(
    report: ChipFitReport,
    a: int,
    secondaries: Sequence[int],
    protocol: Protocol = Protocol(),
) -> list[MultipletPrediction]:
    """Predictions for every nonempty subset of ``secondaries``.

    Ordered by subset size, then lexicographically; the full set is last.
    """
    secs = sorted(secondaries)
    out = []
    for size in range(1, len(secs) + 1):
        for subset in itertools.combinations(secs, size):
            out.append(predict_multiplet(report, a, subset, protocol))
    return out


def select_multiplets(
    readout_qubits: Sequence[int],
    qubit_count: int,
    n_secondaries: int,
    count: int,
    seed: int,
) -> list[tuple[int, tuple]]:
    """Distinct random (primary, secondaries) choices, without replacement."""
    universe = [
        (a, secs)
        for a in sorted(readout_qubits)
        for secs in itertools.combinations([q for q in range(qubit_count) if q != a], n_secondaries)
    ]
    rng = np.random.default_rng(seed)
    count = min(count, len(universe))
    idx = rng.choice(len(universe), size=count, replace=False)
    return [universe[i] for i in idx]


def prediction_to_dict(p: MultipletPrediction) -> dict:
    chi2 = p.chi2_per_dof_vs_data
    return {
        "version": PREDICTION_SCHEMA_VERSION,
        "primary": p.primary_qubit,
        "secondaries": list(p.secondaries),
        "rotation_angle": p.rotation_angle,
        "phases": p.phases.tolist(),
        "predicted_z": p.predicted_z.tolist(),
        "contributions": [{"source": k, "beta": b, "theta": t} for k, b, t in p.contributions],
        "chi2_per_dof": chi2 if chi2 is not None and math.isfinite(chi2) else None,
    }


def prediction_from_dict(d: dict) -> MultipletPrediction:
    return MultipletPrediction(
        int(d["primary"]),
        tuple(d["secondaries"]),
        float(d["rotation_angle"]),
        d["phases"],
        d["predicted_z"],
        tuple((c["source"], c["beta"], c["theta"]) for c in d["contributions"]),
        d.get("chi2_per_dof"),
    )


def save_prediction(p: MultipletPrediction, path) -> None:
    write_text_atomic(path, dumps(prediction_to_dict(p)))


def load_prediction(path) -> MultipletPrediction:
    with open(path, encoding="utf-8") as fh:
        return prediction_from_dict(json.load(fh))


def prediction_csv(p: MultipletPrediction, dataset: PhaseSweepDataset | None = None) -> str:
    """Overlay table: phase, prediction and, when given, the measured points."""
    buf = io.StringIO()
    if dataset is None:
        buf.write("delta_phi,predicted_z\n")
        for ph, z in zip(p.phases, p.predicted_z):
            buf.write(f"{float(ph)!r},{float(z)!r}\n")
    else:
        _check_grid(p, dataset)
        buf.write("delta_phi,z,sigma,predicted_z\n")
        for ph, z, s, m in zip(p.phases, dataset.observed_z, dataset.sigma, p.predicted_z):
            buf.write(f"{float(ph)!r},{float(z)!r},{float(s)!r},{float(m)!r}\n")
    return buf.getvalue()


def prediction_stem(p: MultipletPrediction) -> str:
    return f"a{p.primary_qubit}_" + "-".join(f"b{q}" for q in p.secondaries)
