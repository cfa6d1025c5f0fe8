"""Flat MIMO channel draws, application, and the real-representation
singular-value distortion diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    EXPLICIT,
    IDENTITY_AWGN,
    RAYLEIGH_IID,
    ChannelRealization,
    DomainError,
    make_rng,
)

__all__ = [
    "ReceivedFrame",
    "identity_channel",
    "draw_rayleigh",
    "complex_noise",
    "apply_channel",
    "svd_distortion_ratio",
]

RATE_T = "T"
RATE_T_HALF = "T/2"


@dataclass(frozen=True)
class ReceivedFrame:
    """T-spaced (or T/2-spaced) received samples plus the channel they saw."""

    samples: np.ndarray  # (K, n) complex
    channel: ChannelRealization
    rate: str = RATE_T

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", s)
        if s.ndim != 2 or s.shape[1] != self.channel.n_antennas:
            raise DomainError("sample dimensions inconsistent with the channel")
        if self.rate not in (RATE_T, RATE_T_HALF):
            raise DomainError(f"unknown sampling rate tag {self.rate!r}")


def identity_channel(n: int, sigma2: float) -> ChannelRealization:
    return ChannelRealization(np.eye(n, dtype=np.complex128), sigma2, IDENTITY_AWGN)


def draw_rayleigh(n: int, sigma2: float, seed: int, *stream: int) -> ChannelRealization:
    """H entries i.i.d. CN(0, 1): real/imag parts independent N(0, 1/2)."""
    if n < 1:
        raise DomainError("antenna count must be >= 1")
    rng = make_rng(seed, *stream)
    h = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    return ChannelRealization(h, sigma2, RAYLEIGH_IID)


def complex_noise(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    """i.i.d. CN(0, sigma2) per entry."""
    if sigma2 == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    scale = np.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(x, ch: ChannelRealization, seed: int, *stream: int) -> ReceivedFrame:
    """y[k] = H x[k] + n[k] with white noise of variance sigma2 per component."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[1] != ch.n_antennas:
        raise DomainError("symbol dimensions inconsistent with the channel")
    rng = make_rng(seed, *stream)
    y = x @ ch.H.T + complex_noise(rng, x.shape, ch.sigma2)
    return ReceivedFrame(y, ch)


def real_representation(h: np.ndarray) -> np.ndarray:
    """2n x 2n real matrix [[Re H, -Im H], [Im H, Re H]]."""
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def svd_distortion_ratio(ch: ChannelRealization) -> float:
    """Ratio of extreme singular values of the real representation of H.

    1 means the channel maps the hypersphere to a hypersphere; large values
    mean opposing constellation points can be squeezed together.
    """
    sv = np.linalg.svd(real_representation(ch.H), compute_uv=False)
    smin = float(sv.min())
    if smin <= 1e-300:
        return float("inf")
    return float(sv.max()) / smin
