"""Jones-calculus channel model: one rotation plus a global and a differential phase.

The accumulated birefringence of a single-mode fiber link is modeled as

    M(theta, phi, delta) = R(theta) @ G(phi) @ C(delta)

where R is a real rotation by theta, G = exp(i phi) * I is a global phase common
to both polarizations (signal relative to the receiver's local oscillator), and
C = diag(exp(i delta/2), exp(-i delta/2)) is a differential phase between the
horizontal and vertical modes.  C acts first on the state.

Quadrature pairs are read as complex amplitudes x + i p.  Components may be
scalars or equally-shaped numpy arrays, so a whole packet of pulses can be pushed
through the algebra at once.

The triple (theta, phi, delta) is redundant: M(theta + pi, phi, delta) =
M(theta, phi + pi, delta) and M(theta, phi, delta + 2 pi) = M(theta, phi + pi,
delta).  ``canonicalize`` reduces a triple to theta in [0, pi), phi in [0, 2 pi),
delta in [-pi, pi) without changing the matrix.

A channel maps onto the Poincare sphere through its Stokes image
(s1, s2, s3) = (-cos(delta) sin(2 theta), cos(delta) cos(2 theta), sin(delta)),
which does not depend on the global phase phi.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class ComplexAmplitude:
    """Quadrature pair of one polarization mode, read as the amplitude x + i p.

    Fields may be floats or equally-shaped arrays (a batch of pulses).
    """

    x: float | np.ndarray
    p: float | np.ndarray

    @property
    def as_complex(self):
        return self.x + 1j * self.p

    @property
    def magnitude_sq(self):
        return self.x * self.x + self.p * self.p

    @classmethod
    def from_complex(cls, z) -> "ComplexAmplitude":
        return cls(np.real(z), np.imag(z))


@dataclass(frozen=True)
class DualPolState:
    """Horizontal and vertical complex amplitudes of one pulse (or a batch)."""

    h: ComplexAmplitude
    v: ComplexAmplitude

    @property
    def norm_sq(self):
        """Total squared magnitude over both polarizations."""
        return self.h.magnitude_sq + self.v.magnitude_sq

    def as_vector(self) -> np.ndarray:
        """Complex Jones vector, shape (2,) for a pulse or (2, n) for a batch."""
        return np.asarray([self.h.as_complex, self.v.as_complex])

    @classmethod
    def from_vector(cls, vec) -> "DualPolState":
        return cls(ComplexAmplitude.from_complex(vec[0]),
                   ComplexAmplitude.from_complex(vec[1]))


@dataclass(frozen=True)
class PolarizationParams:
    """Channel parameters: rotation theta, global phase phi, differential phase delta.

    All angles in radians.  Construction rejects non-finite values; use
    ``canonicalize`` to land a triple in the canonical gauge ranges.
    """

    theta: float
    phi: float
    delta: float

    def __post_init__(self):
        for name in ("theta", "phi", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class StokesVector:
    """Point on the Poincare sphere; s1^2 + s2^2 + s3^2 = 1."""

    s1: float
    s2: float
    s3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])


def rotation(theta: float) -> np.ndarray:
    """Real rotation of the polarization plane by theta."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def global_phase(phi: float) -> np.ndarray:
    """Phase exp(i phi) applied to both polarizations."""
    g = cmath.exp(1j * phi)
    return np.array([[g, 0.0], [0.0, g]])


def differential_phase(delta: float) -> np.ndarray:
    """Opposite half-phases +/- delta/2 on the two polarizations."""
    e = cmath.exp(0.5j * delta)
    return np.array([[e, 0.0], [0.0, e.conjugate()]])


def jones_matrix(params: PolarizationParams) -> np.ndarray:
    """Channel matrix R(theta) @ G(phi) @ C(delta); C acts first on the state."""
    return rotation(params.theta) @ global_phase(params.phi) @ differential_phase(params.delta)


def is_unitary(m: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    """True when m^H m equals the identity within tol per entry."""
    m = np.asarray(m)
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)


def apply_transform(m: np.ndarray, s: DualPolState) -> DualPolState:
    """Apply a unitary Jones matrix to a state; conserves the total magnitude."""
    if not is_unitary(m):
        raise ValueError("matrix is not unitary")
    return DualPolState.from_vector(np.asarray(m) @ s.as_vector())


def transformed_quadratures_closed_form(params: PolarizationParams,
                                        a: DualPolState) -> DualPolState:
    """Channel output quadratures from the explicit trigonometric expansion.

    Equivalent to ``apply_transform(jones_matrix(params), a)`` to machine
    precision, but avoids complex arithmetic; this is the hot path for packet
    batches and the model the parameter estimator fits.
    """
    psi1 = params.phi + 0.5 * params.delta
    psi2 = params.phi - 0.5 * params.delta
    cp, sp = math.cos(psi1), math.sin(psi1)
    cm, sm = math.cos(psi2), math.sin(psi2)
    ct, st = math.cos(params.theta), math.sin(params.theta)

    hx, hp = a.h.x, a.h.p
    vx, vp = a.v.x, a.v.p
    x_h = (hx * cp - hp * sp) * ct - (vx * cm - vp * sm) * st
    p_h = (hx * sp + hp * cp) * ct - (vx * sm + vp * cm) * st
    x_v = (hx * cp - hp * sp) * st + (vx * cm - vp * sm) * ct
    p_v = (hx * sp + hp * cp) * st + (vx * sm + vp * cm) * ct
    return DualPolState(ComplexAmplitude(x_h, p_h), ComplexAmplitude(x_v, p_v))


def stokes_from_params(params: PolarizationParams) -> StokesVector:
    """Poincare-sphere image of a channel; ignores the global phase phi."""
    cd = math.cos(params.delta)
    return StokesVector(-cd * math.sin(2.0 * params.theta),
                        cd * math.cos(2.0 * params.theta),
                        math.sin(params.delta))


def canonicalize(params: PolarizationParams) -> PolarizationParams:
    """Reduce to the canonical gauge: theta in [0, pi), phi in [0, 2 pi), delta in [-pi, pi).

    Uses only moves that leave the Jones matrix exactly unchanged: a 2 pi shift
    of delta and a pi shift of theta each trade against a pi shift of phi.
    """
    theta, phi, delta = params.theta, params.phi, params.delta
    k = math.floor((delta + math.pi) / TWO_PI)
    delta -= TWO_PI * k
    phi += math.pi * k
    m = math.floor(theta / math.pi)
    theta -= math.pi * m
    phi += math.pi * m
    phi %= TWO_PI
    return PolarizationParams(theta, phi, delta)


def sample_uniform_transform(rng: np.random.Generator) -> PolarizationParams:
    """Draw channel parameters whose Stokes image is uniform on the sphere.

    Draw order is fixed for reproducibility: s3 ~ U(-1, 1), sphere azimuth
    ~ U(0, 2 pi), then phi ~ U(0, 2 pi).
    """
    s3 = rng.uniform(-1.0, 1.0)
    azimuth = rng.uniform(0.0, TWO_PI)
    phi = rng.uniform(0.0, TWO_PI)
    r = math.sqrt(max(0.0, 1.0 - s3 * s3))
    s1 = r * math.cos(azimuth)
    s2 = r * math.sin(azimuth)
    delta = math.asin(s3)
    theta = 0.5 * math.atan2(-s1, s2)
    return canonicalize(PolarizationParams(theta, phi, delta))
