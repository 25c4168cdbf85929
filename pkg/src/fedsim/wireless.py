"""Rayleigh-fading uplink model and per-round device cost functions.

A worker transmits its sign packet at rate ``rate`` (bits/s/Hz) with transmit
power ``power`` over bandwidth ``B``.  A packet outage inverts every sign in
the packet; otherwise the packet arrives intact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DeviceModel",
    "ChannelModel",
    "outage_probability",
    "outage_surrogate",
    "power_for_outage",
    "sample_rayleigh_outage",
    "apply_channel",
    "compute_time",
    "compute_energy",
    "comm_time",
    "comm_energy",
    "round_time",
    "round_energy",
]


@dataclass(frozen=True)
class DeviceModel:
    """Physical constants of one worker.

    ``alpha`` is the effective switched capacitance, ``c`` the cycles per bit,
    ``D`` the local data size in bits; ``f_min``/``f_max`` bound the CPU
    frequency (Hz) and ``P_min``/``P_max`` the transmit power (W).
    """

    alpha: float
    c: float
    D: float
    f_min: float
    f_max: float
    P_max: float
    P_min: float = 0.0

    def __post_init__(self):
        if min(self.alpha, self.c, self.D) <= 0.0:
            raise ValueError("alpha, c, D must be positive")
        if not (0.0 < self.f_min <= self.f_max):
            raise ValueError("need 0 < f_min <= f_max")
        if not (0.0 <= self.P_min < self.P_max):
            raise ValueError("need 0 <= P_min < P_max")


@dataclass(frozen=True)
class ChannelModel:
    """Uplink parameters: noise power density ``N0`` (W/Hz), bandwidth ``B``
    (Hz), and uplink packet size ``packet_bits``."""

    N0: float
    B: float
    packet_bits: float

    def __post_init__(self):
        if min(self.N0, self.B, self.packet_bits) <= 0.0:
            raise ValueError("N0, B, packet_bits must be positive")


def outage_probability(rate: float, power: float, ch: ChannelModel) -> float:
    """Probability that a Rayleigh-faded packet at the given rate and power
    fails decoding: 1 - exp(-(2^rate - 1) N0 B / power).

    Zero rate never outages; zero power always does (unless rate is zero).
    """
    if rate < 0.0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    if power < 0.0:
        raise ValueError(f"power must be nonnegative, got {power}")
    if power == 0.0:
        return 1.0 if rate > 0.0 else 0.0
    return float(-np.expm1(-(2.0**rate - 1.0) * ch.N0 * ch.B / power))


def outage_surrogate(rate: float, power: float, ch: ChannelModel) -> float:
    """High-SNR upper bound (2^rate - 1) N0 B / power on the outage
    probability; unbounded above unlike the exact expression."""
    if rate < 0.0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    if power < 0.0:
        raise ValueError(f"power must be nonnegative, got {power}")
    if power == 0.0:
        return float("inf") if rate > 0.0 else 0.0
    return float((2.0**rate - 1.0) * ch.N0 * ch.B / power)


def power_for_outage(rate: float, p_out: float, ch: ChannelModel) -> float:
    """Smallest power achieving outage probability exactly ``p_out`` at the
    given rate: -(2^rate - 1) N0 B / ln(1 - p_out)."""
    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    if not (0.0 < p_out < 1.0):
        raise ValueError(f"p_out must be in (0, 1), got {p_out}")
    return float(-(2.0**rate - 1.0) * ch.N0 * ch.B / np.log1p(-p_out))


def sample_rayleigh_outage(
    rate: float, power: float, ch: ChannelModel, rng: np.random.Generator, size=None
):
    """Sample outage events physically: draw a unit-mean exponential channel
    power gain and report whether the instantaneous SNR falls below the
    decoding threshold 2^rate - 1.

    Distributionally identical to Bernoulli(:func:`outage_probability`); kept
    as a cross-check for the closed form.
    """
    if rate < 0.0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    if power < 0.0:
        raise ValueError(f"power must be nonnegative, got {power}")
    gain = rng.exponential(1.0, size)
    threshold = 2.0**rate - 1.0
    out = power * gain / (ch.N0 * ch.B) < threshold
    return out if size is not None else bool(out)


def apply_channel(
    packet: np.ndarray, p_out: float, rng: np.random.Generator
) -> tuple[np.ndarray, bool]:
    """Pass one sign packet through the fading channel.

    With probability ``p_out`` the whole packet is received sign-inverted;
    returns the received packet and whether an outage occurred.
    """
    if not (0.0 <= p_out <= 1.0):
        raise ValueError(f"p_out must be in [0, 1], got {p_out}")
    outage = bool(rng.random() < p_out)
    received = -packet if outage else packet
    return np.asarray(received, dtype=np.int8), outage


def compute_time(dev: DeviceModel, f: float) -> float:
    """Local gradient computation time c D / f at CPU frequency ``f``."""
    if f <= 0.0:
        raise ValueError(f"frequency must be positive, got {f}")
    return dev.c * dev.D / f


def compute_energy(dev: DeviceModel, f: float) -> float:
    """Local computation energy (alpha/2) c D f^2."""
    if f <= 0.0:
        raise ValueError(f"frequency must be positive, got {f}")
    return 0.5 * dev.alpha * dev.c * dev.D * f * f


def comm_time(ch: ChannelModel, rate: float) -> float:
    """Uplink transmission time packet_bits / (rate * B)."""
    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    return ch.packet_bits / (rate * ch.B)


def comm_energy(ch: ChannelModel, rate: float, power: float) -> float:
    """Uplink transmission energy power * packet_bits / (rate * B)."""
    if power < 0.0:
        raise ValueError(f"power must be nonnegative, got {power}")
    return power * comm_time(ch, rate)


def round_time(dev: DeviceModel, ch: ChannelModel, f: float, rate: float) -> float:
    """Computation plus transmission time of one round for one worker."""
    return compute_time(dev, f) + comm_time(ch, rate)


def round_energy(
    dev: DeviceModel, ch: ChannelModel, f: float, rate: float, power: float
) -> float:
    """Computation plus transmission energy of one round for one worker."""
    return compute_energy(dev, f) + comm_energy(ch, rate, power)
