"""Brute-force time integration of a driven transmon.

Solves the Schroedinger equation for one target transmon under any number of
simultaneous drive lines, each entering as
``beta * Omega(t - tau) * cos(carrier * (t - tau) - theta - phi) * (a + a^dag)``.

The state is propagated in the interaction picture of the bare transmon
Hamiltonian, which is exact (no approximation) and keeps the propagated
Hamiltonian small, so fixed-step RK4 stays accurate even in the lab frame.
In ``rotating_rwa`` mode only the co-rotating drive terms are kept.

Returned states are expressed in the frame rotating at the carrier of the
first drive, so qubit-subspace X/Y expectations are directly comparable
between modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .core import DriveChannel, EnvelopeShape, PulseEnvelope, TransmonParams, TWO_PI

_SHAPE_CODES = {EnvelopeShape.COSINE: 0, EnvelopeShape.FLAT: 1}

NORM_TOLERANCE = 1e-9


class Frame(str, Enum):
    LAB = "lab"
    ROTATING_RWA = "rotating_rwa"


class IntegrationError(RuntimeError):
    """The integrator could not meet its accuracy contract."""


@dataclass(frozen=True)
class SimulationConfig:
    levels: int = 2
    frame: Frame = Frame.ROTATING_RWA
    time_step: float | None = None  # None: automatic, see _auto_step
    tolerance: float | None = None  # set to switch to adaptive integration
    include_delays: bool = True
    steps_per_period: int = 200
    min_steps: int = 4000

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))
        if self.levels not in (2, 3):
            raise ValueError("levels must be 2 or 3")
        if self.time_step is not None and not self.time_step > 0:
            raise ValueError("time_step must be > 0")
        if self.tolerance is not None and not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")


@dataclass(frozen=True)
class DriveTermInstance:
    """One drive line as seen by the simulated transmon."""

    beta: float
    theta: float
    phi: float
    carrier: float  # rad/s
    envelope: PulseEnvelope
    delay: float = 0.0

    @classmethod
    def from_channel(cls, channel: DriveChannel, beta, theta, delay=0.0, phase_offset=0.0):
        return cls(
            float(beta),
            float(theta),
            channel.software_phase + phase_offset,
            channel.carrier_frequency,
            channel.envelope,
            float(delay),
        )


@numba.njit(cache=True, inline="always")
def _envelope(code, peak, duration, s):
    if s < 0.0 or s > duration:
        return 0.0
    if code == 0:
        return 0.5 * peak * (1.0 - math.cos(2.0 * math.pi * s / duration))
    return peak


@numba.njit(cache=True)
def _couplings(t, lab, gaps, beta, phase, carrier, delay, code, peak, duration, out):
    """Fill ``out[n]`` = <n+1|H_I(t)|n> for the tridiagonal interaction Hamiltonian."""
    nd = beta.shape[0]
    for n in range(gaps.shape[0]):
        out[n] = 0.0
    if lab:
        d = 0.0
        for k in range(nd):
            s = t - delay[k]
            env = _envelope(code[k], peak[k], duration[k], s)
            if env != 0.0:
                d += beta[k] * env * math.cos(carrier[k] * s - phase[k])
        if d != 0.0:
            for n in range(gaps.shape[0]):
                out[n] = math.sqrt(n + 1.0) * d * complex(math.cos(gaps[n] * t), math.sin(gaps[n] * t))
    else:
        for k in range(nd):
            s = t - delay[k]
            env = _envelope(code[k], peak[k], duration[k], s)
            if env == 0.0:
                continue
            amp = 0.5 * beta[k] * env
            for n in range(gaps.shape[0]):
                ang = (gaps[n] - carrier[k]) * t + phase[k] + carrier[k] * delay[k]
                out[n] += math.sqrt(n + 1.0) * amp * complex(math.cos(ang), math.sin(ang))


@numba.njit(cache=True)
def _deriv(psi, h, out):
    # d psi / dt = -i H psi with H tridiagonal: H[n+1, n] = h[n], H[n, n+1] = conj(h[n])
    L = psi.shape[0]
    for n in range(L):
        acc = 0.0j
        if n > 0:
            acc += h[n - 1] * psi[n - 1]
        if n < L - 1:
            acc += h[n].conjugate() * psi[n + 1]
        out[n] = -1j * acc


@numba.njit(cache=True, nogil=True)
def _rk4(psi0, t0, dt, nsteps, lab, gaps, beta, phase, carrier, delay, code, peak, duration):
    L = psi0.shape[0]
    psi = psi0.copy()
    h = np.zeros(L - 1, dtype=np.complex128)
    k1 = np.empty(L, dtype=np.complex128)
    k2 = np.empty(L, dtype=np.complex128)
    k3 = np.empty(L, dtype=np.complex128)
    k4 = np.empty(L, dtype=np.complex128)
    tmp = np.empty(L, dtype=np.complex128)
    max_drift = 0.0
    for i in range(nsteps):
        t = t0 + i * dt
        _couplings(t, lab, gaps, beta, phase, carrier, delay, code, peak, duration, h)
        _deriv(psi, h, k1)
        _couplings(t + 0.5 * dt, lab, gaps, beta, phase, carrier, delay, code, peak, duration, h)
        for n in range(L):
            tmp[n] = psi[n] + 0.5 * dt * k1[n]
        _deriv(tmp, h, k2)
        for n in range(L):
            tmp[n] = psi[n] + 0.5 * dt * k2[n]
        _deriv(tmp, h, k3)
        _couplings(t + dt, lab, gaps, beta, phase, carrier, delay, code, peak, duration, h)
        for n in range(L):
            tmp[n] = psi[n] + dt * k3[n]
        _deriv(tmp, h, k4)
        nrm = 0.0
        for n in range(L):
            psi[n] += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])
            nrm += psi[n].real ** 2 + psi[n].imag ** 2
        drift = abs(math.sqrt(nrm) - 1.0)
        if drift > max_drift:
            max_drift = drift
    return psi, max_drift


class _Prepared(NamedTuple):
    lab: bool
    gaps: np.ndarray
    energies: np.ndarray
    beta: np.ndarray
    phase: np.ndarray
    carrier: np.ndarray
    delay: np.ndarray
    code: np.ndarray
    peak: np.ndarray
    duration: np.ndarray
    t0: float
    t1: float
    ref_carrier: float


def _prepare(target: TransmonParams, drives: Sequence[DriveTermInstance], config: SimulationConfig):
    if not drives:
        raise ValueError("at least one drive is required")
    energies = target.energies(config.levels)
    delays = np.array([d.delay if config.include_delays else 0.0 for d in drives], dtype=float)
    durations = np.array([d.envelope.duration for d in drives], dtype=float)
    return _Prepared(
        lab=config.frame is Frame.LAB,
        gaps=np.diff(energies),
        energies=energies,
        beta=np.array([d.beta for d in drives], dtype=float),
        phase=np.array([d.theta + d.phi for d in drives], dtype=float),
        carrier=np.array([d.carrier for d in drives], dtype=float),
        delay=delays,
        code=np.array([_SHAPE_CODES[d.envelope.shape] for d in drives], dtype=np.int64),
        peak=np.array([d.envelope.peak for d in drives], dtype=float),
        duration=durations,
        t0=float(np.min(delays)),
        t1=float(np.max(delays + durations)),
        ref_carrier=float(drives[0].carrier),
    )


def _auto_step(p: _Prepared, config: SimulationConfig) -> float:
    """Step bound of ``1 / (steps_per_period * f_max)`` over all rates in the propagated frame."""
    span = p.t1 - p.t0
    sq = math.sqrt(len(p.gaps))
    rabi = sq * float(np.sum(p.beta * p.peak))
    if p.lab:
        rates = np.abs(p.gaps[:, None]) + np.abs(p.carrier[None, :])
    else:
        rates = np.abs(p.gaps[:, None] - p.carrier[None, :])
        rabi *= 0.5
    f_max = (float(np.max(rates)) + rabi) / TWO_PI + 1.0 / float(np.min(p.duration))
    dt = 1.0 / (config.steps_per_period * f_max)
    return min(dt, span / config.min_steps)


def _to_reference_frame(psi_int: np.ndarray, p: _Prepared, t: float) -> np.ndarray:
    n = np.arange(len(psi_int))
    return psi_int * np.exp(1j * (n * p.ref_carrier - p.energies) * t)


def _rhs_python(p: _Prepared):
    h = np.zeros(len(p.gaps), dtype=np.complex128)

    def rhs(t, psi):
        _couplings(t, p.lab, p.gaps, p.beta, p.phase, p.carrier, p.delay, p.code, p.peak, p.duration, h)
        out = np.empty_like(psi)
        _deriv(psi, h, out)
        return out

    return rhs


def evolve_target(
    target: TransmonParams,
    drives: Sequence[DriveTermInstance],
    config: SimulationConfig = SimulationConfig(),
) -> np.ndarray:
    """Integrate from the ground state through all pulses.

    Returns the final state (length ``config.levels``) in the frame rotating
    at ``drives[0].carrier``.  Raises :class:`IntegrationError` if the norm
    drifts by more than ``NORM_TOLERANCE`` or the adaptive solver fails.
    """
    p = _prepare(target, drives, config)
    psi0 = np.zeros(config.levels, dtype=np.complex128)
    psi0[0] = 1.0
    span = p.t1 - p.t0

    if config.tolerance is not None:
        from scipy.integrate import solve_ivp

        sol = solve_ivp(
            _rhs_python(p),
            (p.t0, p.t1),
            psi0,
            method="DOP853",
            rtol=config.tolerance,
            atol=config.tolerance * 1e-3,
            max_step=_auto_step(p, config) * 50,
        )
        if not sol.success:
            raise IntegrationError(f"adaptive integration failed: {sol.message} (t0={p.t0}, t1={p.t1})")
        psi = sol.y[:, -1]
        drift = abs(np.linalg.norm(psi) - 1.0)
    else:
        dt = config.time_step if config.time_step is not None else _auto_step(p, config)
        nsteps = max(1, int(math.ceil(span / dt - 1e-9)))
        dt = span / nsteps
        psi, drift = _rk4(
            psi0, p.t0, dt, nsteps, p.lab, p.gaps, p.beta, p.phase,
            p.carrier, p.delay, p.code, p.peak, p.duration,
        )
    if drift > NORM_TOLERANCE:
        raise IntegrationError(
            f"norm drift {drift:.3e} exceeds {NORM_TOLERANCE:g}; reduce time_step "
            f"(span={span:.3e} s, levels={config.levels}, frame={config.frame.value})"
        )
    return _to_reference_frame(psi, p, p.t1)


class QubitExpectation(NamedTuple):
    x: float
    y: float
    z: float
    leakage: float


def expectation_xyz(state) -> QubitExpectation:
    """Pauli expectations on the {|0>, |1>} subspace plus population outside it."""
    psi = np.asarray(state, dtype=np.complex128)
    c0, c1 = psi[0], psi[1]
    p0 = abs(c0) ** 2
    p1 = abs(c1) ** 2
    coh = np.conj(c0) * c1
    # X = |0><1| + |1><0|, Y = -i|0><1| + i|1><0|
    x = 2.0 * coh.real
    y = 2.0 * coh.imag
    leak = max(0.0, 1.0 - p0 - p1) if len(psi) > 2 else 0.0
    return QubitExpectation(float(x), float(y), float(p0 - p1), float(leak))


def with_phase_offset(drives: Sequence[DriveTermInstance], delta_phi: float) -> list[DriveTermInstance]:
    """Apply a virtual Z rotation by ``delta_phi`` to every drive except the first."""
    out = [drives[0]]
    for d in drives[1:]:
        out.append(
            DriveTermInstance(d.beta, d.theta, d.phi - delta_phi, d.carrier, d.envelope, d.delay)
        )
    return out


def rabi_curve(
    target: TransmonParams,
    drives: Sequence[DriveTermInstance],
    config: SimulationConfig,
    delta_phi_grid: Sequence[float],
    workers: int = 1,
) -> np.ndarray:
    """Noiseless ``<Z>`` of the target for each phase offset on the secondaries."""
    grid = list(delta_phi_grid)
    if not grid:
        raise ValueError("delta_phi_grid must be nonempty")
    from .core import map_ordered

    def one(dphi):
        return expectation_xyz(evolve_target(target, with_phase_offset(drives, dphi), config)).z

    return np.array(map_ordered(one, grid, workers), dtype=float)
