"""Security-parameter arithmetic: Bob's variance, correlation bounds, and the
asymptotic trusted-detector secret-key rate for dual-quadrature detection.

Notation (all variances in shot-noise units): V = V_A + 1 is the EPR-equivalent
modulation variance, chi_line = 1/T - 1 + xi the channel-added noise referred to
the channel input, chi_het = (1 + (1 - eta) + 2 v_el) / eta the detector-added
noise with v_el = epsilon, and chi_tot = chi_line + chi_het / T.

Mutual information (both quadratures measured):

    I_AB = log2((V + chi_tot) / (1 + chi_tot))

Holevo bound against collective Gaussian attacks with a trusted detector, from
the symplectic spectra before and after Bob's measurement:

    A = V^2 (1 - 2T) + 2T + T^2 (V + chi_line)^2
    B = T^2 (V chi_line + 1)^2
    lambda_{1,2}^2 = (A +/- sqrt(A^2 - 4B)) / 2
    C = [A chi_het^2 + B + 1 + 2 chi_het (V sqrt(B) + T (V + chi_line))
         + 2 T (V^2 - 1)] / (T (V + chi_tot))^2
    D = ((V + sqrt(B) chi_het) / (T (V + chi_tot)))^2
    lambda_{3,4}^2 = (C +/- sqrt(C^2 - 4D)) / 2,   lambda_5 = 1
    chi_BE = sum_{1,2} g((lambda-1)/2) - sum_{3,4} g((lambda-1)/2)

with g(x) = (x+1) log2(x+1) - x log2 x.  The secret fraction is
K = beta I_AB - chi_BE in bits per pulse.  Finite-size effects are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .channel import transmission_from_distance

_G_NEGATIVE_TOL = 1e-9


@dataclass(frozen=True)
class KeyRateInputs:
    """Operating point for the key-rate formulas."""

    v_a: float
    t: float
    xi: float
    eta: float
    epsilon: float
    beta: float = 0.95

    def __post_init__(self):
        if not self.v_a > 0:
            raise ValueError("v_a must be positive")
        if not 0.0 < self.t <= 1.0:
            raise ValueError("t must be in (0, 1]")
        if self.xi < 0.0:
            raise ValueError("xi must be non-negative")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")


@dataclass(frozen=True)
class KeyRateResult:
    """Mutual information, Holevo bound, secret fraction, and the symplectic spectrum."""

    i_ab: float
    chi_be: float
    k: float
    symplectic: tuple[float, float, float, float, float]


def v_b(inputs: KeyRateInputs) -> float:
    """Bob's measured variance (eta T / 2)(V_A + xi) + 1 + epsilon."""
    return 0.5 * inputs.eta * inputs.t * (inputs.v_a + inputs.xi) + 1.0 + inputs.epsilon


def r2_bounds(inputs: KeyRateInputs) -> tuple[float, float]:
    """Extreme correlation values +/- eta T V_A / (2 V_B)."""
    m = 0.5 * inputs.eta * inputs.t * inputs.v_a / v_b(inputs)
    return m, -m


def holevo_g(x: float) -> float:
    """Bosonic entropy g(x) = (x+1) log2(x+1) - x log2 x; g(0) = 0.

    Tiny negative arguments from floating-point noise are clamped to zero.
    """
    if x < -_G_NEGATIVE_TOL:
        raise ValueError(f"holevo_g argument must be non-negative, got {x}")
    if x <= 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def _sym_eig_pair(s: float, p: float, context: str) -> tuple[float, float]:
    """Solve lambda^4 - s lambda^2 + p = 0 for the two symplectic eigenvalues."""
    disc = s * s - 4.0 * p
    if disc < 0.0:
        if disc < -1e-9 * max(1.0, s * s):
            raise ValueError(f"negative discriminant in {context}: {disc}")
        disc = 0.0
    root = math.sqrt(disc)
    lam_sq_plus = 0.5 * (s + root)
    lam_sq_minus = 0.5 * (s - root)
    if lam_sq_minus < 0.0:
        if lam_sq_minus < -1e-9:
            raise ValueError(f"negative squared eigenvalue in {context}: {lam_sq_minus}")
        lam_sq_minus = 0.0
    return math.sqrt(lam_sq_plus), math.sqrt(lam_sq_minus)


def secret_key_rate(inputs: KeyRateInputs) -> KeyRateResult:
    """Asymptotic trusted-detector secret fraction in bits per pulse."""
    if not inputs.t > 0.0:
        raise ValueError("t must be positive")
    v = inputs.v_a + 1.0
    t = inputs.t
    chi_line = 1.0 / t - 1.0 + inputs.xi
    chi_het = (2.0 - inputs.eta + 2.0 * inputs.epsilon) / inputs.eta
    chi_tot = chi_line + chi_het / t

    i_ab = math.log2((v + chi_tot) / (1.0 + chi_tot))

    a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line) ** 2
    b = (t * (v * chi_line + 1.0)) ** 2
    lam1, lam2 = _sym_eig_pair(a, b, "channel spectrum")

    sqrt_b = math.sqrt(b)
    denom = (t * (v + chi_tot)) ** 2
    c = (a * chi_het * chi_het + b + 1.0
         + 2.0 * chi_het * (v * sqrt_b + t * (v + chi_line))
         + 2.0 * t * (v * v - 1.0)) / denom
    d = ((v + sqrt_b * chi_het) ** 2) / denom
    lam3, lam4 = _sym_eig_pair(c, d, "conditional spectrum")
    lam5 = 1.0

    chi_be = (holevo_g(0.5 * (lam1 - 1.0)) + holevo_g(0.5 * (lam2 - 1.0))
              - holevo_g(0.5 * (lam3 - 1.0)) - holevo_g(0.5 * (lam4 - 1.0)))
    k = inputs.beta * i_ab - chi_be
    return KeyRateResult(i_ab=i_ab, chi_be=chi_be, k=k,
                         symplectic=(lam1, lam2, lam3, lam4, lam5))


def keyrate_curve(inputs: KeyRateInputs, alpha_db_per_km: float,
                  distances: Iterable[float]) -> list[tuple[float, float, KeyRateResult]]:
    """Evaluate the key rate along a fiber-distance sweep.

    Returns (distance_km, transmission, result) rows; the operating point keeps
    everything from ``inputs`` except the transmission, which follows the
    distance.
    """
    rows: list[tuple[float, float, KeyRateResult]] = []
    for dist in distances:
        t = transmission_from_distance(dist, alpha_db_per_km)
        point = KeyRateInputs(v_a=inputs.v_a, t=t, xi=inputs.xi, eta=inputs.eta,
                              epsilon=inputs.epsilon, beta=inputs.beta)
        rows.append((float(dist), t, secret_key_rate(point)))
    return rows
