"""Closed-form expectation values for a resonantly driven qubit with drive crosstalk.

The qubit is driven by its own line (unit strength, zero phase) and by any
number of secondary lines with relative strength ``beta`` and phase
``theta``.  All secondaries carry the same software phase offset ``delta_phi``.
In the two-level, rotating-wave limit the drives add coherently and the
effective Rabi angle is ``rotation_angle * eta`` with

    eta = |1 + sum_k beta_k exp(i (delta_phi - theta_k))|.

Anharmonic effects are not part of these formulas; see :mod:`rabi_xtalk.oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

# below this |x| the sinc factor is evaluated by its Taylor series
_SINC_SERIES_CUTOFF = 1e-4


def _check_beta(beta):
    if np.any(np.asarray(beta) < 0):
        raise ValueError("beta must be nonnegative")


def eta_pair(beta, theta, delta_phi):
    """Drive amplitude scale factor for one crosstalk source.

    Broadcasts over array arguments.
    """
    _check_beta(beta)
    beta = np.asarray(beta, dtype=float)
    arg = 1.0 + beta * beta + 2.0 * beta * np.cos(np.asarray(delta_phi) - theta)
    # exact cancellation can leave a tiny negative radicand
    out = np.sqrt(np.maximum(arg, 0.0))
    return out[()] if out.ndim == 0 else out


def eta_weak(beta, theta, delta_phi):
    """First-order (small ``beta``) expansion of :func:`eta_pair`."""
    _check_beta(beta)
    out = 1.0 + np.asarray(beta, dtype=float) * np.cos(np.asarray(delta_phi) - theta)
    return out[()] if np.ndim(out) == 0 else out


def sinc_angle(eta, rotation_angle):
    """``sin(eta * rotation_angle) / eta`` with the eta -> 0 limit filled in."""
    eta = np.asarray(eta, dtype=float)
    x = eta * rotation_angle
    small = np.abs(x) < _SINC_SERIES_CUTOFF
    safe = np.where(small, 1.0, eta)
    direct = np.sin(x) / safe
    x2 = x * x
    series = rotation_angle * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
    out = np.where(small, series, direct)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PairwiseDriveSpec:
    beta_ab: float
    theta_ab: float
    phi_a: float = 0.0
    phi_b: float = 0.0
    rotation_angle: float = 2.5 * np.pi

    def __post_init__(self):
        if not self.beta_ab >= 0:
            raise ValueError("beta_ab must be nonnegative")
        if not all(np.isfinite([self.theta_ab, self.phi_a, self.phi_b, self.rotation_angle])):
            raise ValueError("phases and rotation angle must be finite")

    @property
    def delta_phi(self) -> float:
        # a virtual Z rotation by dphi on line b shifts its drive phase by -dphi
        return self.phi_a - self.phi_b


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float


def pair_expectations(spec: PairwiseDriveSpec, delta_phi=None) -> BlochVector:
    """Bloch vector of qubit ``a`` after the simultaneous pulse pair.

    If ``delta_phi`` is given it replaces the phase of line ``b`` by
    ``phi_b = phi_a - delta_phi``; otherwise the spec's own phases are used.
    Broadcasts over an array ``delta_phi``.

    The transverse components follow the sign convention
    ``<X> = Im(c) sin(eta R)/eta``, ``<Y> = Re(c) sin(eta R)/eta`` with
    ``c = exp(i phi_a) + beta exp(i (theta + phi_b))``.  Against the
    numerical integrator (standard Pauli Y), ``<X>`` and ``<Z>`` agree and
    ``<Y>`` has the opposite sign.
    """
    if delta_phi is None:
        phi_b = spec.phi_b
    else:
        phi_b = spec.phi_a - np.asarray(delta_phi, dtype=float)
    dphi = spec.phi_a - phi_b
    eta = eta_pair(spec.beta_ab, spec.theta_ab, dphi)
    s = sinc_angle(eta, spec.rotation_angle)
    x = (np.sin(spec.phi_a) + spec.beta_ab * np.sin(spec.theta_ab + phi_b)) * s
    y = (np.cos(spec.phi_a) + spec.beta_ab * np.cos(spec.theta_ab + phi_b)) * s
    z = np.cos(eta * spec.rotation_angle)
    return BlochVector(x, y, z)


@dataclass(frozen=True)
class MultiDriveSpec:
    """Primary drive plus secondaries sharing one phase offset."""

    rotation_angle: float
    terms: tuple = field(default_factory=tuple)  # ((beta, theta), ...)
    delta_phi: float = 0.0

    def __post_init__(self):
        terms = tuple((float(b), float(t)) for b, t in self.terms)
        if any(b < 0 for b, _ in terms):
            raise ValueError("all beta must be nonnegative")
        object.__setattr__(self, "terms", terms)

    @property
    def betas(self) -> np.ndarray:
        return np.array([b for b, _ in self.terms], dtype=float)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([t for _, t in self.terms], dtype=float)


def eta_multi_curve(betas: Sequence[float], thetas: Sequence[float], delta_phi):
    """Coherent-sum eta for arrays of ``delta_phi``."""
    betas = np.asarray(betas, dtype=float).reshape(-1)
    thetas = np.asarray(thetas, dtype=float).reshape(-1)
    _check_beta(betas)
    dphi = np.asarray(delta_phi, dtype=float)
    c = 1.0 + np.sum(betas * np.exp(1j * (dphi[..., None] - thetas)), axis=-1)
    out = np.abs(c)
    return out[()] if out.ndim == 0 else out


def eta_multi(spec: MultiDriveSpec) -> float:
    return float(eta_multi_curve(spec.betas, spec.thetas, spec.delta_phi))


def eta_multi_expanded(spec: MultiDriveSpec) -> float:
    """Same quantity as :func:`eta_multi`, via the explicit cosine expansion."""
    b, t, d = spec.betas, spec.thetas, spec.delta_phi
    sq = 1.0 + np.sum(b * b) + 2.0 * np.sum(b * np.cos(d - t))
    for k in range(len(b)):
        for m in range(k + 1, len(b)):
            sq += 2.0 * b[k] * b[m] * np.cos(t[k] - t[m])
    return float(np.sqrt(max(sq, 0.0)))


def predict_z_multi(spec: MultiDriveSpec) -> float:
    return float(np.cos(spec.rotation_angle * eta_multi(spec)))


def predict_z_curve(betas, thetas, delta_phi, rotation_angle):
    """Vectorised ``<Z>`` over a grid of phase offsets."""
    return np.cos(rotation_angle * eta_multi_curve(betas, thetas, delta_phi))
