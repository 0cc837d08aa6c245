"""Transmitter-side Gaussian source: dual-polarization quadrature sampling and packets.

Each pulse carries four independent draws from N(0, V_A): the (x, p) quadratures
of the horizontal and of the vertical polarization.  With the x + i p amplitude
convention used here the per-mode mean of (x^2 + p^2)/2 equals V_A; the
experiment's photon-number accounting, which normalizes amplitudes differently,
quotes <n> = V_A / 2 per mode.  Both polarizations together then carry twice
that.  Packets group pulses that will share one channel realization; the
repetition period is bookkeeping only (nothing is paced in real time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polarization import ComplexAmplitude, DualPolState

# An encoding is just one dual-polarization state drawn by Alice.
AliceEncoding = DualPolState

DEFAULT_PULSES_PER_PACKET = 7800
DEFAULT_REP_PERIOD_US = 1.0


@dataclass(frozen=True)
class Packet:
    """A block of pulses sharing one polarization-channel realization.

    ``pulses`` holds the batch as array-valued quadratures (struct-of-arrays);
    ``pulse(i)`` extracts a single scalar-valued encoding.
    """

    packet_id: int
    pulses: DualPolState
    pulse_count: int
    rep_period_us: float = DEFAULT_REP_PERIOD_US

    def pulse(self, i: int) -> DualPolState:
        b = self.pulses
        return DualPolState(ComplexAmplitude(float(b.h.x[i]), float(b.h.p[i])),
                            ComplexAmplitude(float(b.v.x[i]), float(b.v.p[i])))

    @property
    def duration_us(self) -> float:
        return self.pulse_count * self.rep_period_us


def sample_encoding(rng: np.random.Generator, v_a: float) -> AliceEncoding:
    """One pulse: four independent draws from N(0, v_a), in the order
    (x_h, p_h, x_v, p_v)."""
    if not v_a > 0:
        raise ValueError("v_a must be positive")
    x_h, p_h, x_v, p_v = rng.normal(0.0, math.sqrt(v_a), size=4)
    return DualPolState(ComplexAmplitude(x_h, p_h), ComplexAmplitude(x_v, p_v))


def make_packet(rng: np.random.Generator, v_a: float, pulse_count: int,
                packet_id: int = 0,
                rep_period_us: float = DEFAULT_REP_PERIOD_US) -> Packet:
    """Draw a full packet of independent encodings.

    Draws are batched row-wise (all x_h, then p_h, x_v, p_v) for speed; the
    result is deterministic for a given generator state.
    """
    if not v_a > 0:
        raise ValueError("v_a must be positive")
    if pulse_count < 1:
        raise ValueError("pulse_count must be at least 1")
    draws = rng.normal(0.0, math.sqrt(v_a), size=(4, pulse_count))
    pulses = DualPolState(ComplexAmplitude(draws[0], draws[1]),
                          ComplexAmplitude(draws[2], draws[3]))
    return Packet(packet_id, pulses, pulse_count, rep_period_us)
