"""Receiver model: dual-quadrature homodyne measurement of one polarization.

Bob measures x and p of the horizontal mode simultaneously.  The measured
quadrature is

    x_bh = sqrt(eta T / 2) * x_ideal + n,   n ~ N(0, 1 + epsilon + (eta T / 2) xi)

with independent noise per quadrature: the "1" is shot noise, epsilon the
electronic noise of the detector, and (eta T / 2) xi the channel excess noise
referred to the measurement.  The amplitude scaling sqrt(eta T / 2) makes
variances scale as eta T / 2, so Bob's variance is

    V_B = (eta T / 2) (V_A + xi) + 1 + epsilon

for any polarization transform.  The factor 1/2 of the dual-quadrature split is
folded into the single scaling constant; no beamsplitter is simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, ChannelOutput


@dataclass(frozen=True)
class DetectorConfig:
    """Detector efficiency eta, electronic noise epsilon (SNU), optional v-mode monitor."""

    eta: float = 0.5
    epsilon: float = 0.024
    monitor_v: bool = False

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")


@dataclass(frozen=True)
class Measurement:
    """Measured quadratures in sqrt(SNU); v-components present only when monitored."""

    x_bh: float | np.ndarray
    p_bh: float | np.ndarray
    x_bv: float | np.ndarray | None = None
    p_bv: float | np.ndarray | None = None


def _noise_like(rng: np.random.Generator, sigma: float, template) -> float | np.ndarray:
    size = np.shape(template) or None
    return rng.normal(0.0, sigma, size=size)


def measure(chan_out: ChannelOutput, det: DetectorConfig, cfg: ChannelConfig,
            rng: np.random.Generator, add_noise: bool = True) -> Measurement:
    """Measure the h-polarization (and optionally v) of a channel output.

    Noise draws are ordered x_bh, p_bh, then x_bv, p_bv when ``monitor_v``.
    ``add_noise=False`` is a test hook returning the noise-free scaled
    quadratures.
    """
    gain = math.sqrt(det.eta * cfg.t / 2.0)
    sigma = math.sqrt(1.0 + det.epsilon + gain * gain * cfg.xi)
    ideal = chan_out.ideal

    def measured(component):
        value = gain * component
        if add_noise:
            value = value + _noise_like(rng, sigma, component)
        return value

    x_bh = measured(ideal.h.x)
    p_bh = measured(ideal.h.p)
    if not det.monitor_v:
        return Measurement(x_bh, p_bh)
    return Measurement(x_bh, p_bh, measured(ideal.v.x), measured(ideal.v.p))


def calibrate_shot_noise(det: DetectorConfig, rng: np.random.Generator,
                         n_samples: int) -> float:
    """Sample variance of signal-free measurements; expectation 1 + epsilon SNU."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    draws = rng.normal(0.0, math.sqrt(1.0 + det.epsilon), size=n_samples)
    return float(np.var(draws, ddof=1))
