"""Channel-parameter recovery from revealed pulses and digital correction.

Bob reveals a fraction of his measured (x_bh, p_bh) pairs.  Alice fits the
sampled channel model

    J(theta, phi, delta, g) = sum_i (x_i - g Xhat_i)^2 + (p_i - g Phat_i)^2

where (Xhat, Phat) are the transformed h-quadratures of her stored encodings
and g = sqrt(eta T / 2) is the amplitude gain.  The model is exactly linear in

    (a, b) = g cos(theta) (cos psi1, sin psi1),  psi1 = phi + delta/2
    (c, d) = g sin(theta) (cos psi2, sin psi2),  psi2 = phi - delta/2

with  g Xhat = a x_h - b p_h - c x_v + d p_v  and
      g Phat = b x_h + a p_h - d x_v - c p_v,

so the default fit solves an ordinary least-squares problem in (a, b, c, d) and
maps back to angles: this reaches the exact global minimum of J in one shot.  A
multi-start derivative-based optimizer over the raw angles is kept as an
alternative method and agrees with the direct solve (see tests).

Identifiability: only the h-row of the channel matrix is observed, so the sign
of the unobserved v-row cannot be determined from single-polarization data (the
triples (theta, phi, delta) and (pi - theta, phi + pi/2, delta + pi) produce the
same h-row).  The fit reports the branch with theta in [0, pi/2]; matrix errors
against a known truth are therefore measured up to that sign with
``matrix_error_frobenius``.  Corrected h-quadratures, the quantity the protocol
consumes, are identical on both branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoding import Packet
from .polarization import (DualPolState, PolarizationParams, canonicalize,
                           jones_matrix, transformed_quadratures_closed_form)
from .receiver import DetectorConfig, Measurement

MIN_REVEALED_PULSES = 50

_FIT_FTOL = 1e-10
_FIT_MAX_NFEV = 200


@dataclass(frozen=True)
class RevealedSet:
    """Alice's stored encodings and Bob's measurements for the disclosed pulses."""

    indices: np.ndarray
    alice: DualPolState
    x_bh: np.ndarray
    p_bh: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    @classmethod
    def from_packet(cls, packet: Packet, meas: Measurement,
                    indices: np.ndarray) -> "RevealedSet":
        indices = np.asarray(indices, dtype=np.int64)
        if len(np.unique(indices)) != len(indices):
            raise ValueError("revealed indices must be unique")
        b = packet.pulses
        alice = DualPolState.from_vector(np.asarray([b.h.as_complex[indices],
                                                     b.v.as_complex[indices]]))
        return cls(indices, alice,
                   np.asarray(meas.x_bh)[indices], np.asarray(meas.p_bh)[indices])


@dataclass(frozen=True)
class EstimationResult:
    """Fitted channel parameters with residual diagnostics.

    ``t_hat`` lands in (0, 1.2] for sane data (the slack absorbs estimation
    noise); ``xi_hat`` may come out slightly negative from finite sampling and
    is reported raw.
    """

    params_hat: PolarizationParams
    gain_hat: float
    t_hat: float
    xi_hat: float
    residual_ms: float
    objective: float
    starts_tried: int
    converged: bool


def _design_matrix(alice: DualPolState) -> np.ndarray:
    """Stack the linear model rows: x-residual block on top, p-block below."""
    x_h, p_h = np.asarray(alice.h.x), np.asarray(alice.h.p)
    x_v, p_v = np.asarray(alice.v.x), np.asarray(alice.v.p)
    top = np.column_stack([x_h, -p_h, -x_v, p_v])
    bottom = np.column_stack([p_h, x_h, -p_v, -x_v])
    return np.vstack([top, bottom])


def _coeffs_from_angles(theta: float, phi: float, delta: float,
                        gain: float) -> np.ndarray:
    psi1 = phi + 0.5 * delta
    psi2 = phi - 0.5 * delta
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([gain * ct * math.cos(psi1), gain * ct * math.sin(psi1),
                     gain * st * math.cos(psi2), gain * st * math.sin(psi2)])


def _coeff_jacobian(theta: float, phi: float, delta: float,
                    gain: float) -> np.ndarray:
    """d(a, b, c, d)/d(theta, phi, delta, gain), shape (4, 4)."""
    psi1 = phi + 0.5 * delta
    psi2 = phi - 0.5 * delta
    ct, st = math.cos(theta), math.sin(theta)
    c1, s1 = math.cos(psi1), math.sin(psi1)
    c2, s2 = math.cos(psi2), math.sin(psi2)
    d_theta = gain * np.array([-st * c1, -st * s1, ct * c2, ct * s2])
    d_phi = gain * np.array([-ct * s1, ct * c1, -st * s2, st * c2])
    d_delta = 0.5 * gain * np.array([-ct * s1, ct * c1, st * s2, -st * c2])
    d_gain = np.array([ct * c1, ct * s1, st * c2, st * s2])
    return np.column_stack([d_theta, d_phi, d_delta, d_gain])


def _angles_from_coeffs(u: np.ndarray) -> tuple[float, PolarizationParams]:
    a, b, c, d = (float(x) for x in u)
    r1 = math.hypot(a, b)
    r2 = math.hypot(c, d)
    gain = math.hypot(r1, r2)
    theta = math.atan2(r2, r1)
    psi1 = math.atan2(b, a) if r1 > 0.0 else 0.0
    psi2 = math.atan2(d, c) if r2 > 0.0 else 0.0
    params = canonicalize(PolarizationParams(theta, 0.5 * (psi1 + psi2), psi1 - psi2))
    return gain, params


def _fit_multistart(a_mat: np.ndarray, y: np.ndarray, gain0: float,
                    fixed_gain: float | None) -> tuple[np.ndarray, int, bool]:
    """Grid of 4 x 4 x 4 angle starts refined by Levenberg-Marquardt."""
    from scipy.optimize import least_squares

    joint = fixed_gain is None

    def residual(p):
        gain = p[3] if joint else fixed_gain
        return a_mat @ _coeffs_from_angles(p[0], p[1], p[2], gain) - y

    def jacobian(p):
        gain = p[3] if joint else fixed_gain
        ju = _coeff_jacobian(p[0], p[1], p[2], gain)
        full = a_mat @ ju
        return full if joint else full[:, :3]

    theta_starts = [(i + 0.5) * math.pi / 4.0 for i in range(4)]
    phi_starts = [(i + 0.5) * math.pi / 2.0 for i in range(4)]
    delta_starts = [-math.pi + (i + 0.5) * math.pi / 2.0 for i in range(4)]

    best = None
    starts = 0
    for theta0 in theta_starts:
        for phi0 in phi_starts:
            for delta0 in delta_starts:
                starts += 1
                x0 = [theta0, phi0, delta0] + ([gain0] if joint else [])
                res = least_squares(residual, x0, jac=jacobian, method="lm",
                                    ftol=_FIT_FTOL, max_nfev=_FIT_MAX_NFEV)
                if best is None or res.cost < best.cost:
                    best = res
    p = best.x
    gain = p[3] if joint else fixed_gain
    u = _coeffs_from_angles(p[0], p[1], p[2], gain)
    return u, starts, bool(best.status > 0)


def _fit_fixed_gain(a_mat: np.ndarray, y: np.ndarray, u0: np.ndarray,
                    fixed_gain: float) -> tuple[np.ndarray, bool]:
    """Refine angles under a calibration-pinned gain, starting from the joint solution."""
    from scipy.optimize import least_squares

    _, p0 = _angles_from_coeffs(u0)

    def residual(p):
        return a_mat @ _coeffs_from_angles(p[0], p[1], p[2], fixed_gain) - y

    def jacobian(p):
        return (a_mat @ _coeff_jacobian(p[0], p[1], p[2], fixed_gain))[:, :3]

    res = least_squares(residual, [p0.theta, p0.phi, p0.delta], jac=jacobian,
                        method="lm", ftol=_FIT_FTOL, max_nfev=_FIT_MAX_NFEV)
    u = _coeffs_from_angles(res.x[0], res.x[1], res.x[2], fixed_gain)
    return u, bool(res.status > 0)


def fit(revealed: RevealedSet, det: DetectorConfig, *,
        fixed_gain: float | None = None, method: str = "exact") -> EstimationResult:
    """Recover (theta, phi, delta, T, xi) from a revealed set.

    ``method="exact"`` (default) solves the equivalent linear least squares
    directly; ``method="multistart"`` runs the 4 x 4 x 4 grid of
    Levenberg-Marquardt starts over the raw angles.  ``fixed_gain`` pins the
    amplitude gain to a calibration value instead of fitting it jointly.
    """
    n = len(revealed)
    if n < MIN_REVEALED_PULSES:
        raise ValueError(f"need at least {MIN_REVEALED_PULSES} revealed pulses, got {n}")

    a_mat = _design_matrix(revealed.alice)
    y = np.concatenate([revealed.x_bh, revealed.p_bh])

    if method == "exact":
        u, _, rank, _ = np.linalg.lstsq(a_mat, y, rcond=None)
        starts = 1
        converged = bool(rank == 4)
        if fixed_gain is not None:
            u, ok = _fit_fixed_gain(a_mat, y, u, fixed_gain)
            converged = converged and ok
    elif method == "multistart":
        gain0 = fixed_gain if fixed_gain is not None else math.sqrt(det.eta / 2.0)
        u, starts, converged = _fit_multistart(a_mat, y, gain0, fixed_gain)
    else:
        raise ValueError(f"unknown fit method {method!r}")

    objective = float(np.sum((a_mat @ u - y) ** 2))
    gain, params = _angles_from_coeffs(u)
    n_free = 3 if fixed_gain is not None else 4
    residual_ms = objective / (2 * n - n_free)
    t_hat = 2.0 * gain * gain / det.eta
    if gain > 0.0:
        xi_hat = estimate_excess_noise(residual_ms, gain, det.epsilon)
    else:
        xi_hat = math.nan
        converged = False
    return EstimationResult(params_hat=params, gain_hat=gain, t_hat=t_hat,
                            xi_hat=xi_hat, residual_ms=residual_ms,
                            objective=objective, starts_tried=starts,
                            converged=converged)


def correct_alice(packet: Packet, params_hat: PolarizationParams) -> DualPolState:
    """Digitally rotate Alice's stored encodings by the estimated channel.

    Returns the corrected batch aligned with the packet's pulse order; the
    h-components are the reconciliation inputs matching Bob's (x_bh, p_bh).
    """
    return transformed_quadratures_closed_form(params_hat, packet.pulses)


def r_squared(alice_q, bob_q, v_b: float, gain: float) -> float:
    """Correlation figure 1 - sum((bob - gain * alice)^2) / (N v_b)."""
    alice_q = np.asarray(alice_q, dtype=float)
    bob_q = np.asarray(bob_q, dtype=float)
    if alice_q.shape != bob_q.shape:
        raise ValueError("alice_q and bob_q must have equal length")
    n = len(alice_q)
    if n < 2:
        raise ValueError("need at least 2 samples")
    rss = float(np.sum((bob_q - gain * alice_q) ** 2))
    return 1.0 - rss / (n * v_b)


def estimate_excess_noise(residual_ms: float, gain: float, epsilon: float) -> float:
    """Invert the measured-variance model: xi = (residual_ms - 1 - epsilon) / gain^2.

    Finite sampling can push the estimate slightly negative; it is not clamped.
    """
    if not gain > 0.0:
        raise ValueError("gain must be positive")
    return (residual_ms - 1.0 - epsilon) / (gain * gain)


def matrix_error_frobenius(params_hat: PolarizationParams,
                           params_true: PolarizationParams) -> float:
    """Frobenius distance between channel matrices, up to the unobservable v-row sign.

    Single-polarization data fixes only the h-row of the matrix, so the
    comparison takes the smaller distance over the two v-row signs.
    """
    m_hat = jones_matrix(params_hat)
    m_true = jones_matrix(params_true)
    flip = np.diag([1.0, -1.0]) @ m_hat
    return float(min(np.linalg.norm(m_hat - m_true), np.linalg.norm(flip - m_true)))
