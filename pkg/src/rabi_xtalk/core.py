"""Physical parameters and shared domain types for drive-crosstalk modelling.

All frequencies are angular (rad/s) in memory.  The chip file stores them in
Hz and the conversion happens only at the file boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

CHIP_SCHEMA_VERSION = 1

# placeholder values; the source chip's frequencies are not published
DEFAULT_FREQUENCY_HZ = 5.0e9
DEFAULT_ANHARMONICITY_HZ = -600e6
DEFAULT_DURATION = 160e-9
DEFAULT_ROTATION_ANGLE = 2.5 * math.pi
BETA_DIAGONAL_TOLERANCE = 0.05


class ChipFormatError(ValueError):
    """Raised when a chip document cannot be decoded."""


def canonicalize_phase(x: float) -> float:
    """Map ``x`` onto the half-open interval [-pi, pi)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"phase must be finite, got {x!r}")
    y = math.fmod(x + math.pi, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    y -= math.pi
    # fmod rounding can land exactly on +pi
    if y >= math.pi:
        y -= TWO_PI
    return y


def hz_to_angular(f_hz: float) -> float:
    return TWO_PI * float(f_hz)


def angular_to_hz(omega: float) -> float:
    """Inverse of :func:`hz_to_angular` that round-trips exactly when possible.

    ``omega / 2pi`` is not always the float whose product with 2pi gives back
    ``omega``; a few neighbouring floats are tried before giving up.
    """
    omega = float(omega)
    guess = omega / TWO_PI
    if TWO_PI * guess == omega:
        return guess
    lo = hi = guess
    for _ in range(8):
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
        for cand in (lo, hi):
            if TWO_PI * cand == omega:
                return cand
    return guess


class EnvelopeShape(str, Enum):
    COSINE = "cosine"
    FLAT = "flat"


@dataclass(frozen=True)
class PulseEnvelope:
    """Pulse amplitude profile whose time integral equals ``rotation_angle``."""

    shape: EnvelopeShape = EnvelopeShape.COSINE
    duration: float = DEFAULT_DURATION
    rotation_angle: float = DEFAULT_ROTATION_ANGLE

    def __post_init__(self):
        object.__setattr__(self, "shape", EnvelopeShape(self.shape))
        if not self.duration > 0:
            raise ValueError("envelope duration must be > 0")
        if not self.rotation_angle >= 0:
            raise ValueError("rotation_angle must be >= 0")

    @property
    def peak(self) -> float:
        """Maximum of the envelope, rad/s."""
        if self.shape is EnvelopeShape.COSINE:
            return 2.0 * self.rotation_angle / self.duration
        return self.rotation_angle / self.duration

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= 0.0) & (s <= self.duration)
        if self.shape is EnvelopeShape.COSINE:
            val = 0.5 * self.peak * (1.0 - np.cos(TWO_PI * s / self.duration))
        else:
            val = np.full_like(s, self.peak)
        return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class TransmonParams:
    frequency: float  # rad/s
    anharmonicity: float = hz_to_angular(DEFAULT_ANHARMONICITY_HZ)  # rad/s

    @classmethod
    def from_hz(cls, frequency_hz: float, anharmonicity_hz: float = DEFAULT_ANHARMONICITY_HZ):
        return cls(hz_to_angular(frequency_hz), hz_to_angular(anharmonicity_hz))

    def energies(self, levels: int) -> np.ndarray:
        n = np.arange(levels, dtype=float)
        return self.frequency * n + 0.5 * self.anharmonicity * n * (n - 1.0)


@dataclass(frozen=True)
class DriveChannel:
    carrier_frequency: float  # rad/s
    software_phase: float = 0.0
    envelope: PulseEnvelope = field(default_factory=PulseEnvelope)

    def __post_init__(self):
        object.__setattr__(self, "software_phase", canonicalize_phase(self.software_phase))


def _frozen_matrix(a, n=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if n is not None and arr.shape != (n, n):
        raise ValueError(f"expected {n}x{n} matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CrosstalkMatrix:
    """Directional drive crosstalk.

    ``beta[j, k]`` and ``theta[j, k]`` describe how drive ``k`` acts on
    transmon ``j``; ``tau[j, k]`` is the relative arrival delay in seconds.
    """

    beta: np.ndarray
    theta: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        beta = _frozen_matrix(self.beta)
        if beta.ndim != 2 or beta.shape[0] != beta.shape[1]:
            raise ValueError("beta must be square")
        n = beta.shape[0]
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "theta", _frozen_matrix(self.theta, n))
        object.__setattr__(self, "tau", _frozen_matrix(self.tau, n))

    @property
    def size(self) -> int:
        return self.beta.shape[0]

    @classmethod
    def ideal(cls, n: int) -> "CrosstalkMatrix":
        return cls(np.eye(n), np.zeros((n, n)), np.zeros((n, n)))

    @staticmethod
    def tau_from_row(row: Sequence[float]) -> np.ndarray:
        """Full skew-symmetric delay matrix from the row ``tau[0, :]``."""
        r = np.asarray(row, dtype=float)
        # tau[0][k] = t0 - tk, hence tau[j][k] = tau[0][k] - tau[0][j]
        return r[None, :] - r[:, None]

    def __eq__(self, other):
        if not isinstance(other, CrosstalkMatrix):
            return NotImplemented
        return (
            np.array_equal(self.beta, other.beta)
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.tau, other.tau)
        )

    __hash__ = None


@dataclass(frozen=True)
class ChipTopology:
    qubit_count: int
    coupler_edges: frozenset = frozenset()
    disabled_readout_qubits: frozenset = frozenset()

    def __post_init__(self):
        edges = frozenset(frozenset(map(int, e)) for e in self.coupler_edges)
        object.__setattr__(self, "coupler_edges", edges)
        object.__setattr__(
            self, "disabled_readout_qubits", frozenset(int(q) for q in self.disabled_readout_qubits)
        )

    @classmethod
    def ring(cls, n: int, disabled: Iterable[int] = ()) -> "ChipTopology":
        return cls(n, frozenset(frozenset((i, (i + 1) % n)) for i in range(n)), frozenset(disabled))

    def has_coupler(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.coupler_edges

    def readout_qubits(self) -> list[int]:
        return [q for q in range(self.qubit_count) if q not in self.disabled_readout_qubits]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.coupler_edges)


@dataclass(frozen=True)
class ReadoutErrorModel:
    """Single-qubit assignment probabilities P(read 0 | 0) and P(read 1 | 1)."""

    p0_given_0: float = 1.0
    p1_given_1: float = 1.0

    def __post_init__(self):
        for name in ("p0_given_0", "p1_given_1"):
            v = getattr(self, name)
            if not 0.5 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0.5, 1.0], got {v}")

    @property
    def confusion(self) -> np.ndarray:
        """Column-stochastic matrix mapping true (P0, P1) to observed."""
        return np.array(
            [[self.p0_given_0, 1.0 - self.p1_given_1], [1.0 - self.p0_given_0, self.p1_given_1]]
        )

    @property
    def contrast(self) -> float:
        return self.p0_given_0 + self.p1_given_1 - 1.0


@dataclass(frozen=True)
class ChipGroundTruth:
    transmons: tuple
    drives: tuple
    crosstalk: CrosstalkMatrix
    topology: ChipTopology
    readout: tuple

    def __post_init__(self):
        object.__setattr__(self, "transmons", tuple(self.transmons))
        object.__setattr__(self, "drives", tuple(self.drives))
        object.__setattr__(self, "readout", tuple(self.readout))

    @property
    def qubit_count(self) -> int:
        return self.topology.qubit_count

    @classmethod
    def build(
        cls,
        crosstalk: CrosstalkMatrix,
        topology: ChipTopology | None = None,
        frequencies_hz: Sequence[float] | None = None,
        anharmonicity_hz: float = DEFAULT_ANHARMONICITY_HZ,
        readout: ReadoutErrorModel | Sequence[ReadoutErrorModel] | None = None,
        envelope: PulseEnvelope | None = None,
    ) -> "ChipGroundTruth":
        """Assemble a chip with resonant drives and shared pulse envelope."""
        n = crosstalk.size
        topology = topology or ChipTopology.ring(n)
        if frequencies_hz is None:
            frequencies_hz = [DEFAULT_FREQUENCY_HZ + 100e6 * q for q in range(n)]
        transmons = [TransmonParams.from_hz(f, anharmonicity_hz) for f in frequencies_hz]
        env = envelope or PulseEnvelope()
        drives = [DriveChannel(t.frequency, 0.0, env) for t in transmons]
        if readout is None:
            readout = ReadoutErrorModel()
        if isinstance(readout, ReadoutErrorModel):
            readout = [readout] * n
        return cls(tuple(transmons), tuple(drives), crosstalk, topology, tuple(readout))


def validate_chip(chip: ChipGroundTruth, beta_tol: float = BETA_DIAGONAL_TOLERANCE) -> list[str]:
    """Check every type invariant; returns human-readable violations."""
    errs: list[str] = []
    n = chip.topology.qubit_count
    for name in ("transmons", "drives", "readout"):
        if len(getattr(chip, name)) != n:
            errs.append(f"{name}: length {len(getattr(chip, name))} != qubit_count {n}")
    if chip.crosstalk.size != n:
        errs.append(f"crosstalk: size {chip.crosstalk.size} != qubit_count {n}")

    for j, t in enumerate(chip.transmons):
        if not t.frequency > 0:
            errs.append(f"transmons[{j}].frequency must be > 0")
        if t.anharmonicity == 0:
            errs.append(f"transmons[{j}].anharmonicity must be nonzero for 3-level simulation")
    for k, d in enumerate(chip.drives):
        if not d.carrier_frequency > 0:
            errs.append(f"drives[{k}].carrier_frequency must be > 0")
        if not -math.pi <= d.software_phase < math.pi:
            errs.append(f"drives[{k}].software_phase must lie in [-pi, pi)")

    xt = chip.crosstalk
    beta, theta, tau = xt.beta, xt.theta, xt.tau
    for j in range(xt.size):
        if abs(beta[j, j] - 1.0) > beta_tol:
            errs.append(f"beta[{j}][{j}]: beta diagonal must be 1 within {beta_tol}")
        if theta[j, j] != 0.0:
            errs.append(f"theta[{j}][{j}]: theta diagonal must be 0")
        if tau[j, j] != 0.0:
            errs.append(f"tau[{j}][{j}]: tau diagonal must be 0")
    for j, k in zip(*np.nonzero(beta < 0)):
        errs.append(f"beta[{j}][{k}]: beta must be nonnegative")
    for j, k in zip(*np.nonzero(~np.isfinite(theta) | (theta < -math.pi) | (theta >= math.pi))):
        errs.append(f"theta[{j}][{k}]: theta must lie in [-pi, pi)")
    for j, k in zip(*np.nonzero(tau + tau.T != 0.0)):
        if j < k:
            errs.append(f"tau[{j}][{k}]: tau must be skew-symmetric")
    if not errs:
        derived = CrosstalkMatrix.tau_from_row(tau[0, :])
        if not np.allclose(derived, tau, rtol=1e-12, atol=1e-24):
            errs.append("tau: rows inconsistent with tau[j][k] = tau[j][0] - tau[k][0]")

    top = chip.topology
    for e in top.coupler_edges:
        if len(e) != 2:
            errs.append(f"topology: self-edge {sorted(e)}")
        elif not all(0 <= q < n for q in e):
            errs.append(f"topology: edge {sorted(e)} references invalid qubit")
    for q in top.disabled_readout_qubits:
        if not 0 <= q < n:
            errs.append(f"topology: disabled readout qubit {q} out of range")
    return errs


# ---------------------------------------------------------------- file format


def _envelope_to_dict(env: PulseEnvelope) -> dict:
    return {"shape": env.shape.value, "duration": env.duration, "rotation_angle": env.rotation_angle}


def _envelope_from_dict(d: dict) -> PulseEnvelope:
    return PulseEnvelope(EnvelopeShape(d["shape"]), float(d["duration"]), float(d["rotation_angle"]))


def chip_to_dict(chip: ChipGroundTruth) -> dict:
    xt = chip.crosstalk
    return {
        "version": CHIP_SCHEMA_VERSION,
        "qubits": [
            {
                "frequency_hz": angular_to_hz(t.frequency),
                "anharmonicity_hz": angular_to_hz(t.anharmonicity),
            }
            for t in chip.transmons
        ],
        "drives": [
            {
                "carrier_frequency_hz": angular_to_hz(d.carrier_frequency),
                "software_phase": d.software_phase,
                "envelope": _envelope_to_dict(d.envelope),
            }
            for d in chip.drives
        ],
        "crosstalk": {
            "beta": xt.beta.tolist(),
            "theta": xt.theta.tolist(),
            "tau": xt.tau.tolist(),
        },
        "topology": {
            "qubit_count": chip.topology.qubit_count,
            "coupler_edges": [list(e) for e in chip.topology.sorted_edges()],
            "disabled_readout_qubits": sorted(chip.topology.disabled_readout_qubits),
        },
        "readout": [{"p0_given_0": r.p0_given_0, "p1_given_1": r.p1_given_1} for r in chip.readout],
    }


def chip_from_dict(doc: dict) -> ChipGroundTruth:
    try:
        version = doc["version"]
        if version != CHIP_SCHEMA_VERSION:
            raise ChipFormatError(f"unsupported chip schema version {version!r}")
        transmons = [
            TransmonParams(hz_to_angular(q["frequency_hz"]), hz_to_angular(q["anharmonicity_hz"]))
            for q in doc["qubits"]
        ]
        n = len(transmons)
        xt = doc["crosstalk"]
        crosstalk = CrosstalkMatrix(xt["beta"], xt["theta"], xt.get("tau", np.zeros((n, n))))
        top = doc.get("topology", {})
        topology = ChipTopology(
            int(top.get("qubit_count", n)),
            frozenset(frozenset(e) for e in top.get("coupler_edges", [])),
            frozenset(top.get("disabled_readout_qubits", [])),
        )
        if "drives" in doc:
            drives = [
                DriveChannel(
                    hz_to_angular(d["carrier_frequency_hz"]),
                    float(d.get("software_phase", 0.0)),
                    _envelope_from_dict(d["envelope"]) if "envelope" in d else PulseEnvelope(),
                )
                for d in doc["drives"]
            ]
        else:
            drives = [DriveChannel(t.frequency) for t in transmons]
        readout = [
            ReadoutErrorModel(float(r["p0_given_0"]), float(r["p1_given_1"]))
            for r in doc.get("readout", [{"p0_given_0": 1.0, "p1_given_1": 1.0}] * n)
        ]
    except ChipFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ChipFormatError(f"invalid chip document: {exc}") from exc
    return ChipGroundTruth(tuple(transmons), tuple(drives), crosstalk, topology, tuple(readout))


def dumps(doc: Any) -> str:
    """Stable JSON text: sorted keys, shortest round-trip float repr."""
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_text_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    tmp.replace(path)


def save_chip(chip: ChipGroundTruth, path: str | Path) -> None:
    write_text_atomic(path, dumps(chip_to_dict(chip)))


def load_chip(path: str | Path) -> ChipGroundTruth:
    with open(path, encoding="utf-8") as fh:
        return chip_from_dict(json.load(fh))


def random_chip(
    n: int,
    seed: int,
    beta_range: tuple[float, float] = (0.0, 0.15),
    topology: ChipTopology | None = None,
    readout: ReadoutErrorModel | None = None,
    envelope: PulseEnvelope | None = None,
    frequencies_hz: Sequence[float] | None = None,
) -> ChipGroundTruth:
    """Synthetic chip with off-diagonal beta uniform in ``beta_range`` and uniform theta."""
    rng = np.random.default_rng(seed)
    lo, hi = beta_range
    beta = rng.uniform(lo, hi, size=(n, n)) if hi > lo else np.full((n, n), float(lo))
    theta = rng.uniform(-math.pi, math.pi, size=(n, n))
    np.fill_diagonal(beta, 1.0)
    np.fill_diagonal(theta, 0.0)
    theta = np.vectorize(canonicalize_phase)(theta)
    crosstalk = CrosstalkMatrix(beta, theta, np.zeros((n, n)))
    return ChipGroundTruth.build(
        crosstalk,
        topology=topology,
        frequencies_hz=frequencies_hz,
        readout=readout if readout is not None else ReadoutErrorModel(0.97, 0.95),
        envelope=envelope,
    )


def map_ordered(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order preserved."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
