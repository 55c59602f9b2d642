"""Synthetic simultaneous-Rabi experiments: shot noise, readout error and mitigation."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    DEFAULT_DURATION,
    DEFAULT_ROTATION_ANGLE,
    ChipGroundTruth,
    PulseEnvelope,
    ReadoutErrorModel,
    dumps,
    map_ordered,
    write_text_atomic,
)
from .oracle import DriveTermInstance, SimulationConfig, rabi_curve

SIGMA_FLOOR = 1e-3
DATASET_SCHEMA_VERSION = 1


class DisabledReadoutError(ValueError):
    """The requested primary qubit has no usable readout."""


@dataclass(frozen=True)
class Protocol:
    """Phase sweep settings; defaults are the 33-point, 1000-shot, 2.5 pi, 160 ns sweep."""

    phases: int = 33
    shots: int = 1000
    rotation_angle: float = DEFAULT_ROTATION_ANGLE
    duration: float = DEFAULT_DURATION

    def __post_init__(self):
        if self.phases < 1:
            raise ValueError("phases must be >= 1")
        if self.shots < 2:
            raise ValueError("shots must be >= 2")
        if not self.rotation_angle >= 0 or not self.duration > 0:
            raise ValueError("rotation_angle must be >= 0 and duration > 0")

    def phase_grid(self) -> np.ndarray:
        # uniform on [0, 2pi), endpoint excluded
        return np.arange(self.phases) * (2.0 * math.pi / self.phases)

    def to_dict(self) -> dict:
        return {
            "phases": self.phases,
            "shots": self.shots,
            "rotation_angle": self.rotation_angle,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Protocol":
        return cls(
            int(d.get("phases", 33)),
            int(d.get("shots", 1000)),
            float(d.get("rotation_angle", DEFAULT_ROTATION_ANGLE)),
            float(d.get("duration", DEFAULT_DURATION)),
        )


# ------------------------------------------------------------ noise primitives


def sample_counts(p_excited: float, shots: int, rng: np.random.Generator) -> tuple[int, int]:
    """Projective measurement outcomes ``(n0, n1)`` for excited-state probability ``p``."""
    if not 0.0 <= p_excited <= 1.0:
        raise ValueError(f"p_excited must lie in [0, 1], got {p_excited}")
    n1 = int(rng.binomial(shots, p_excited))
    return shots - n1, n1


def apply_readout_error(counts, model: ReadoutErrorModel, rng: np.random.Generator) -> tuple[int, int]:
    """Flip each shot independently according to the assignment probabilities."""
    n0, n1 = counts
    flip01 = int(rng.binomial(n0, 1.0 - model.p0_given_0))
    flip10 = int(rng.binomial(n1, 1.0 - model.p1_given_1))
    return n0 - flip01 + flip10, n1 - flip10 + flip01


class Mitigated(NamedTuple):
    f0: float
    f1: float
    clipped: bool


def mitigate_readout(observed, model: ReadoutErrorModel) -> Mitigated:
    """Invert the 2x2 confusion matrix; out-of-range results are clipped and flagged."""
    f = np.asarray(observed, dtype=float)
    raw = np.linalg.solve(model.confusion, f)
    # keep the total at exactly one
    f1 = float(raw[1]) / float(raw.sum()) if raw.sum() != 0 else float(raw[1])
    clipped = not (0.0 <= f1 <= 1.0)
    if clipped:
        f1 = min(1.0, max(0.0, f1))
    return Mitigated(1.0 - f1, f1, clipped)


def sigma_from_counts(corrected_z: float, shots: int, model: ReadoutErrorModel = ReadoutErrorModel()) -> float:
    """Standard deviation of a mitigated ``<Z>`` estimate.

    Binomial variance of the raw (pre-mitigation) frequency, pushed through
    the inverse confusion matrix and floored at ``SIGMA_FLOOR``.
    """
    if shots < 2:
        raise ValueError("shots must be >= 2")
    p = min(1.0, max(0.0, 0.5 * (1.0 - corrected_z)))
    q = (1.0 - model.p0_given_0) * (1.0 - p) + model.p1_given_1 * p
    sigma = 2.0 * math.sqrt(q * (1.0 - q) / shots) / model.contrast
    return max(sigma, SIGMA_FLOOR)


# ------------------------------------------------------------------ datasets


@dataclass(frozen=True, eq=False)
class PhaseSweepDataset:
    primary_qubit: int
    secondary_qubits: tuple
    rotation_angle: float
    phases: np.ndarray
    observed_z: np.ndarray
    sigma: np.ndarray
    shots: int
    seed: int | None = None
    clipped: np.ndarray | None = None
    protocol: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "secondary_qubits", tuple(int(q) for q in self.secondary_qubits))
        for name in ("phases", "observed_z", "sigma"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.phases)
        if len(self.observed_z) != n or len(self.sigma) != n:
            raise ValueError("phases, observed_z and sigma must have equal length")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be > 0")
        clipped = np.zeros(n, dtype=bool) if self.clipped is None else np.array(self.clipped, dtype=bool)
        clipped.setflags(write=False)
        object.__setattr__(self, "clipped", clipped)

    @property
    def pair(self) -> tuple[int, int]:
        if len(self.secondary_qubits) != 1:
            raise ValueError("dataset is not a pair experiment")
        return self.primary_qubit, self.secondary_qubits[0]

    @property
    def out_of_range(self) -> np.ndarray:
        return np.abs(self.observed_z) > 1.0

    def __eq__(self, other):
        if not isinstance(other, PhaseSweepDataset):
            return NotImplemented
        return dataset_to_dict(self) == dataset_to_dict(other)

    __hash__ = None


def dataset_to_dict(ds: PhaseSweepDataset) -> dict:
    return {
        "version": DATASET_SCHEMA_VERSION,
        "qubits": {"primary": ds.primary_qubit, "secondaries": list(ds.secondary_qubits)},
        "protocol": dict(ds.protocol) or {"rotation_angle": ds.rotation_angle, "phases": len(ds.phases), "shots": ds.shots},
        "rotation_angle": ds.rotation_angle,
        "phases": ds.phases.tolist(),
        "observed_z": ds.observed_z.tolist(),
        "sigma": ds.sigma.tolist(),
        "shots": ds.shots,
        "seed": ds.seed,
        "clipped": [int(c) for c in ds.clipped],
    }


def dataset_from_dict(d: dict) -> PhaseSweepDataset:
    if d.get("version") != DATASET_SCHEMA_VERSION:
        raise ValueError(f"unsupported dataset version {d.get('version')!r}")
    return PhaseSweepDataset(
        primary_qubit=int(d["qubits"]["primary"]),
        secondary_qubits=tuple(d["qubits"]["secondaries"]),
        rotation_angle=float(d["rotation_angle"]),
        phases=d["phases"],
        observed_z=d["observed_z"],
        sigma=d["sigma"],
        shots=int(d["shots"]),
        seed=d.get("seed"),
        clipped=d.get("clipped"),
        protocol=d.get("protocol", {}),
    )


def save_dataset(ds: PhaseSweepDataset, path) -> None:
    write_text_atomic(path, dumps(dataset_to_dict(ds)))


def load_dataset(path) -> PhaseSweepDataset:
    with open(path, encoding="utf-8") as fh:
        return dataset_from_dict(json.load(fh))


def dataset_csv(ds: PhaseSweepDataset) -> str:
    buf = io.StringIO()
    buf.write("delta_phi,z,sigma\n")
    for p, z, s in zip(ds.phases, ds.observed_z, ds.sigma):
        buf.write(f"{float(p)!r},{float(z)!r},{float(s)!r}\n")
    return buf.getvalue()


def dataset_stem(ds: PhaseSweepDataset) -> str:
    return f"a{ds.primary_qubit}_" + "-".join(f"b{q}" for q in ds.secondary_qubits)


# --------------------------------------------------------------- experiments


def experiment_drives(
    chip: ChipGroundTruth, a: int, secondaries: Sequence[int], protocol: Protocol
) -> list[DriveTermInstance]:
    """Drive terms acting on qubit ``a``; every line is played at the carrier of ``a``."""
    xt = chip.crosstalk
    carrier = chip.drives[a].carrier_frequency
    out = []
    for k in (a, *secondaries):
        env = PulseEnvelope(chip.drives[k].envelope.shape, protocol.duration, protocol.rotation_angle)
        out.append(
            DriveTermInstance(
                beta=float(xt.beta[a, k]),
                theta=float(xt.theta[a, k]),
                phi=chip.drives[k].software_phase,
                carrier=carrier,
                envelope=env,
                delay=float(xt.tau[a, k]),
            )
        )
    return out


def _check_qubits(chip: ChipGroundTruth, a: int, secondaries: Sequence[int]):
    n = chip.qubit_count
    if not 0 <= a < n or any(not 0 <= k < n for k in secondaries):
        raise ValueError(f"qubit index out of range for {n}-qubit chip")
    if a in secondaries or len(set(secondaries)) != len(secondaries):
        raise ValueError("primary and secondary qubits must be distinct")
    if a in chip.topology.disabled_readout_qubits:
        raise DisabledReadoutError(f"qubit {a} has disabled readout and cannot be the primary")


def noiseless_curve(
    chip: ChipGroundTruth,
    a: int,
    secondaries: Sequence[int],
    protocol: Protocol = Protocol(),
    config: SimulationConfig = SimulationConfig(),
    workers: int = 1,
) -> np.ndarray:
    _check_qubits(chip, a, secondaries)
    drives = experiment_drives(chip, a, secondaries, protocol)
    return rabi_curve(chip.transmons[a], drives, config, protocol.phase_grid(), workers=workers)


def point_rng(seed: int, a: int, secondaries: Sequence[int], index: int) -> np.random.Generator:
    """Independent stream per (qubits, phase index) so results do not depend on scheduling."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(a), *map(int, secondaries), int(index)))
    return np.random.default_rng(ss)


def synthesize_dataset(
    true_z: Sequence[float],
    a: int,
    secondaries: Sequence[int],
    protocol: Protocol,
    readout: ReadoutErrorModel,
    seed: int,
) -> PhaseSweepDataset:
    """Shot sampling, readout corruption, mitigation and sigma estimation for one sweep."""
    true_z = np.asarray(true_z, dtype=float)
    obs = np.empty_like(true_z)
    sig = np.empty_like(true_z)
    clipped = np.zeros(len(true_z), dtype=bool)
    for i, z in enumerate(true_z):
        rng = point_rng(seed, a, secondaries, i)
        p1 = min(1.0, max(0.0, 0.5 * (1.0 - z)))
        counts = apply_readout_error(sample_counts(p1, protocol.shots, rng), readout, rng)
        m = mitigate_readout((counts[0] / protocol.shots, counts[1] / protocol.shots), readout)
        obs[i] = m.f0 - m.f1
        sig[i] = sigma_from_counts(obs[i], protocol.shots, readout)
        clipped[i] = m.clipped
    return PhaseSweepDataset(
        primary_qubit=a,
        secondary_qubits=tuple(secondaries),
        rotation_angle=protocol.rotation_angle,
        phases=protocol.phase_grid(),
        observed_z=obs,
        sigma=sig,
        shots=protocol.shots,
        seed=int(seed),
        clipped=clipped,
        protocol=protocol.to_dict(),
    )


def run_multiplet_experiment(
    chip: ChipGroundTruth,
    a: int,
    secondaries: Sequence[int],
    protocol: Protocol = Protocol(),
    seed: int = 0,
    config: SimulationConfig = SimulationConfig(),
    workers: int = 1,
) -> PhaseSweepDataset:
    """Simultaneous drive of ``a`` and all ``secondaries`` with a common phase offset."""
    curve = noiseless_curve(chip, a, secondaries, protocol, config, workers)
    return synthesize_dataset(curve, a, secondaries, protocol, chip.readout[a], seed)


def run_pair_experiment(
    chip: ChipGroundTruth,
    a: int,
    b: int,
    protocol: Protocol = Protocol(),
    seed: int = 0,
    config: SimulationConfig = SimulationConfig(),
    workers: int = 1,
) -> PhaseSweepDataset:
    return run_multiplet_experiment(chip, a, (b,), protocol, seed, config, workers)


def directed_pairs(chip: ChipGroundTruth) -> list[tuple[int, int]]:
    """All (measured, source) pairs whose measured qubit has working readout."""
    n = chip.qubit_count
    return [(a, b) for a in chip.topology.readout_qubits() for b in range(n) if b != a]


def run_characterization(
    chip: ChipGroundTruth,
    protocol: Protocol = Protocol(),
    seed: int = 0,
    config: SimulationConfig = SimulationConfig(),
    pairs: Sequence[tuple[int, int]] | None = None,
    workers: int = 1,
) -> list[PhaseSweepDataset]:
    pairs = directed_pairs(chip) if pairs is None else [tuple(p) for p in pairs]
    return map_ordered(
        lambda ab: run_pair_experiment(chip, ab[0], ab[1], protocol, seed, config), pairs, workers
    )
