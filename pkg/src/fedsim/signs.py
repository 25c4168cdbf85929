"""Sign quantization, stochastic sign encoding, and majority-vote aggregation.

Gradients are plain 1-D float arrays; sign vectors are int8 arrays over
{-1, +1}.  The convention sign(0) = +1 is applied everywhere (quantizer and
vote tie-break) so that runs are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "StochasticSignConfig",
    "sign_quantize",
    "flip_probabilities",
    "stochastic_sign_encode",
    "majority_vote",
    "apply_sign_update",
    "pack_signs",
    "unpack_signs",
]


def _as_gradient(g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gradient must be a non-empty 1-D array")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite entries")
    return g


def _as_signs(s) -> np.ndarray:
    s = np.asarray(s)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("sign vector must be a non-empty 1-D array")
    if not np.all(np.abs(s) == 1):
        raise ValueError("sign vector entries must be -1 or +1")
    return s.astype(np.int8)


@dataclass(frozen=True)
class StochasticSignConfig:
    """Parameters of the stochastic sign pre-processing.

    ``b`` scales gradient magnitudes into flip probabilities; ``p_out`` is the
    packet outage probability the encoder assumes for the channel it feeds.
    """

    b: float
    p_out: float

    def __post_init__(self):
        if not (0.0 <= self.p_out < 0.5):
            raise ValueError(f"p_out must be in [0, 0.5), got {self.p_out}")
        if self.b < 0.0:
            raise ValueError(f"b must be nonnegative, got {self.b}")


def sign_quantize(g) -> np.ndarray:
    """Coordinate-wise sign of ``g`` with sign(0) = +1."""
    g = _as_gradient(g)
    return np.where(g >= 0.0, 1, -1).astype(np.int8)


def flip_probabilities(g, cfg: StochasticSignConfig) -> tuple[np.ndarray, int]:
    """Per-coordinate probability of transmitting the opposite sign.

    The raw value (1/2 - p_out - b*|g_i|) / (1 - 2*p_out) is clamped into
    [0, 1/2]; the second return value counts clamped coordinates (those whose
    magnitude violates the b constraint and fall back to the true sign).
    """
    g = _as_gradient(g)
    raw = (0.5 - cfg.p_out - cfg.b * np.abs(g)) / (1.0 - 2.0 * cfg.p_out)
    clamped = int(np.count_nonzero(raw < 0.0))
    return np.clip(raw, 0.0, 0.5), clamped


def stochastic_sign_encode(
    g, cfg: StochasticSignConfig, rng: np.random.Generator
) -> np.ndarray:
    """Randomized sign encoding: each coordinate flips its true sign with the
    probability given by :func:`flip_probabilities`, independently."""
    signs = sign_quantize(g)
    probs, _ = flip_probabilities(g, cfg)
    flips = rng.random(signs.shape) < probs
    return np.where(flips, -signs, signs).astype(np.int8)


def majority_vote(packets) -> np.ndarray:
    """Coordinate-wise majority sign over the received packets.

    Even splits resolve to +1, consistent with sign(0) = +1.
    """
    if len(packets) == 0:
        raise ValueError("majority_vote needs at least one packet")
    mats = [_as_signs(p) for p in packets]
    dim = mats[0].size
    for m in mats:
        if m.size != dim:
            raise ValueError("packets have mismatched dimensions")
    total = np.sum(np.stack(mats).astype(np.int64), axis=0)
    return np.where(total >= 0, 1, -1).astype(np.int8)


def apply_sign_update(w, vote, eta: float) -> np.ndarray:
    """One sign-descent step ``w - eta * vote``."""
    if eta <= 0.0:
        raise ValueError(f"learning rate must be positive, got {eta}")
    w = _as_gradient(w)
    vote = _as_signs(vote)
    if w.size != vote.size:
        raise ValueError("weight and vote dimensions differ")
    return w - eta * vote.astype(np.float64)


def pack_signs(signs) -> bytes:
    """Pack a sign vector into a little-endian bitfield, bit=1 meaning +1.

    Output length is ceil(d/8) bytes; trailing pad bits are zero.
    """
    signs = _as_signs(signs)
    return np.packbits(signs == 1, bitorder="little").tobytes()


def unpack_signs(data: bytes, dim: int) -> np.ndarray:
    """Inverse of :func:`pack_signs` for a vector of known dimension."""
    if dim <= 0:
        raise ValueError("dim must be positive")
    if len(data) != (dim + 7) // 8:
        raise ValueError(f"expected {(dim + 7) // 8} bytes for dim={dim}, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=dim, bitorder="little")
    return np.where(bits == 1, 1, -1).astype(np.int8)
