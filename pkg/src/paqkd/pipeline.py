"""Per-packet simulation pipeline shared by the in-process and networked modes.

Each packet is a pure function of (master seed, packet id): every random draw
comes from a substream derived as SeedSequence(master_seed, spawn_key=(packet_id,
stream_tag)).  Packets can therefore be simulated in any order or concurrently
and still reproduce bit-identical results, and both endpoints of a networked
session can co-simulate the optical layer from the shared seed.

Per-packet statistics conventions:

* R^2 columns are computed on the x quadrature over the whole packet, against
  the packet's measured variance of x_bh (the experiment computes V_B per
  received packet) and the fitted gain.
* ``r2_uncorrected`` applies the phase corrections (phi, delta) but no rotation
  correction, which is the decaying-correlation curve; ``r2_corrected`` applies
  the full estimated transform.
* The per-packet key rate is evaluated at the estimated (T, xi), with T clamped
  into (0, 1] and xi clamped to >= 0 since estimation noise can step just
  outside the physical domain.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .channel import ChannelConfig, propagate
from .config import CampaignConfig
from .encoding import Packet, make_packet
from .estimation import (EstimationResult, RevealedSet, correct_alice, fit,
                         matrix_error_frobenius, r_squared)
from .keyrate import KeyRateInputs, KeyRateResult, secret_key_rate
from .polarization import PolarizationParams, canonicalize, sample_uniform_transform
from .receiver import DetectorConfig, Measurement, measure

STREAM_TAGS = {"encoding": 0, "channel": 1, "noise": 2, "reveal": 3}


def derive_rng(master_seed: int, packet_id: int, stream: str) -> np.random.Generator:
    """Independent, reproducible substream for one packet and one purpose."""
    tag = STREAM_TAGS[stream]
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(packet_id, tag))
    return np.random.default_rng(seq)


def reveal_indices(rng: np.random.Generator, pulse_count: int,
                   fraction: float) -> np.ndarray:
    """Deterministic stride selection (every 10th pulse for 10%), random offset."""
    stride = max(1, round(1.0 / fraction))
    offset = int(rng.integers(stride))
    return np.arange(offset, pulse_count, stride, dtype=np.int64)


@dataclass(frozen=True)
class PacketRecord:
    """One row of the per-packet campaign dataset (packets.csv)."""

    packet_id: int
    theta_true: float
    phi_true: float
    delta_true: float
    theta_est: float
    phi_est: float
    delta_est: float
    matrix_err_frobenius: float
    t_est: float
    xi_est: float
    r2_uncorrected: float
    r2_corrected: float
    v_b_x: float
    v_b_p: float
    residual_ms: float
    converged: bool


PACKET_COLUMNS = [f.name for f in fields(PacketRecord)]


@dataclass(frozen=True)
class PacketSimulation:
    """Full state of one simulated packet; the record is the persisted part."""

    record: PacketRecord
    packet: Packet
    params_true: PolarizationParams
    measurement: Measurement
    revealed: RevealedSet
    estimation: EstimationResult


def alice_packet(cfg: CampaignConfig, packet_id: int) -> Packet:
    """The transmitter's stored encodings for one packet (encoding stream only)."""
    rng = derive_rng(cfg.master_seed, packet_id, "encoding")
    return make_packet(rng, cfg.v_a, cfg.pulses_per_packet, packet_id=packet_id)


def sample_packet_transform(cfg: CampaignConfig, packet_id: int) -> PolarizationParams:
    params = sample_uniform_transform(derive_rng(cfg.master_seed, packet_id, "channel"))
    if cfg.force_theta is not None:
        params = canonicalize(PolarizationParams(cfg.force_theta, params.phi, params.delta))
    return params


def keyrate_from_estimate(cfg: CampaignConfig, est: EstimationResult) -> KeyRateResult:
    """Key rate at the estimated operating point, clamped into the physical domain."""
    t = min(max(est.t_hat, 1e-12), 1.0)
    xi = max(est.xi_hat, 0.0)
    inputs = KeyRateInputs(v_a=cfg.v_a, t=t, xi=xi, eta=cfg.eta,
                           epsilon=cfg.epsilon, beta=cfg.beta)
    return secret_key_rate(inputs)


def simulate_packet(cfg: CampaignConfig, packet_id: int) -> PacketSimulation:
    """Run encode -> channel -> measure -> reveal -> fit -> correct for one packet."""
    packet = alice_packet(cfg, packet_id)
    params_true = sample_packet_transform(cfg, packet_id)
    chan_cfg = ChannelConfig(t=cfg.t, xi=cfg.xi, v_a=cfg.v_a)
    det = DetectorConfig(eta=cfg.eta, epsilon=cfg.epsilon)

    out = propagate(packet.pulses, params_true, chan_cfg)
    meas = measure(out, det, chan_cfg, derive_rng(cfg.master_seed, packet_id, "noise"))

    indices = reveal_indices(derive_rng(cfg.master_seed, packet_id, "reveal"),
                             cfg.pulses_per_packet, cfg.reveal_fraction)
    revealed = RevealedSet.from_packet(packet, meas, indices)
    est = fit(revealed, det)

    corrected = correct_alice(packet, est.params_hat)
    phase_only = correct_alice(packet, PolarizationParams(0.0, est.params_hat.phi,
                                                          est.params_hat.delta))
    x_bh = np.asarray(meas.x_bh)
    p_bh = np.asarray(meas.p_bh)
    v_b_x = float(np.var(x_bh, ddof=1))
    v_b_p = float(np.var(p_bh, ddof=1))
    r2_corrected = r_squared(corrected.h.x, x_bh, v_b_x, est.gain_hat)
    r2_uncorrected = r_squared(phase_only.h.x, x_bh, v_b_x, est.gain_hat)

    record = PacketRecord(
        packet_id=packet_id,
        theta_true=params_true.theta,
        phi_true=params_true.phi,
        delta_true=params_true.delta,
        theta_est=est.params_hat.theta,
        phi_est=est.params_hat.phi,
        delta_est=est.params_hat.delta,
        matrix_err_frobenius=matrix_error_frobenius(est.params_hat, params_true),
        t_est=est.t_hat,
        xi_est=est.xi_hat,
        r2_uncorrected=r2_uncorrected,
        r2_corrected=r2_corrected,
        v_b_x=v_b_x,
        v_b_p=v_b_p,
        residual_ms=est.residual_ms,
        converged=est.converged,
    )
    return PacketSimulation(record=record, packet=packet, params_true=params_true,
                            measurement=meas, revealed=revealed, estimation=est)
