"""Optical link model: per-packet polarization transform, loss, and noise bookkeeping.

The channel applies the unitary polarization transform to Alice's encoding and
scales amplitudes by sqrt(T).  Excess noise attributed to the adversary is
referred to the channel output: it is realized as an additive Gaussian of
variance (eta T / 2) * xi in measured shot-noise units, drawn at measurement
time (see ``receiver.measure``), so that Bob's variance model holds exactly in
expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoding import AliceEncoding
from .polarization import (ComplexAmplitude, DualPolState, PolarizationParams,
                           transformed_quadratures_closed_form)

DEFAULT_ALPHA_DB_PER_KM = 0.2


@dataclass(frozen=True)
class ChannelConfig:
    """Physical link parameters: transmission t, excess noise xi, modulation variance v_a."""

    t: float = 1.0
    xi: float = 0.0328
    v_a: float = 1.16

    def __post_init__(self):
        if not 0.0 < self.t <= 1.0:
            raise ValueError("t must be in (0, 1]")
        if self.xi < 0.0:
            raise ValueError("xi must be non-negative")
        if not self.v_a > 0.0:
            raise ValueError("v_a must be positive")


@dataclass(frozen=True)
class ChannelOutput:
    """Transformed state before loss (``ideal``) and after the sqrt(T) scaling."""

    ideal: DualPolState
    attenuated: DualPolState


def propagate(enc: AliceEncoding, params: PolarizationParams,
              cfg: ChannelConfig,
              rng: np.random.Generator | None = None) -> ChannelOutput:
    """Push an encoding (or a packet batch) through the link.

    ``rng`` is accepted for interface symmetry with the measurement stage; the
    excess-noise draw itself happens at measurement, where its variance is known
    in measured units.
    """
    ideal = transformed_quadratures_closed_form(params, enc)
    s = math.sqrt(cfg.t)
    attenuated = DualPolState(ComplexAmplitude(s * ideal.h.x, s * ideal.h.p),
                              ComplexAmplitude(s * ideal.v.x, s * ideal.v.p))
    return ChannelOutput(ideal=ideal, attenuated=attenuated)


def transmission_from_distance(length_km: float,
                               alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM) -> float:
    """Fiber transmission 10^(-alpha L / 10) for a length in km and loss in dB/km."""
    if length_km < 0:
        raise ValueError("length_km must be non-negative")
    if not alpha_db_per_km > 0:
        raise ValueError("alpha_db_per_km must be positive")
    return 10.0 ** (-alpha_db_per_km * length_km / 10.0)
