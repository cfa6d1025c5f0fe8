"""Shared domain types, deterministic RNG handling, and energy/SNR bookkeeping.

Conventions used throughout the package:

* the symbol period is normalized to T = 1 and continuous time is represented
  at an integer oversampling factor Q (samples per symbol period),
* constellation points are complex n-vectors of squared norm Es (default 1),
* noise variances are per complex component,
* every stochastic operation takes an explicit 64-bit integer seed; equal
  seed and equal configuration give bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "ConstellationSet",
    "ChannelRealization",
    "Waveform",
    "make_rng",
    "ebn0_awgn",
    "ebn0_fading",
    "sigma2_for_ebn0",
    "db",
    "undb",
]

NORM_RTOL = 1e-9

# channel kinds
IDENTITY_AWGN = "identity_awgn"
RAYLEIGH_IID = "rayleigh_iid"
EXPLICIT = "explicit"

# constellation generator tags
GENERATOR_TAGS = ("EQPA", "KMC", "PM", "PAPSK", "EXTERNAL")


class DomainError(ValueError):
    """Raised when an argument violates a documented precondition."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic RNG for a seed plus an optional sub-stream path.

    Sub-stream integers (e.g. grid point index, frame index) extend the seed
    so that independent Monte Carlo shards can be generated in any order, by
    any number of workers, with identical results.
    """
    if not 0 <= int(seed) < 2**64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng([int(seed), *[int(s) for s in stream]])


def db(x: float) -> float:
    return 10.0 * math.log10(x)


def undb(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class ConstellationSet:
    """Ordered set of M complex n-vectors on the hypersphere of radius sqrt(Es).

    The row index is the symbol label; label bits are the binary expansion of
    the index.
    """

    points: np.ndarray  # (M, n) complex128
    symbol_energy: float = 1.0
    generator: str = "EXTERNAL"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.ndim != 2:
            raise DomainError("points must be a 2-D (M, n) array")
        object.__setattr__(self, "points", pts)
        m, _ = pts.shape
        if m < 2 or m & (m - 1) != 0:
            raise DomainError(f"M={m} is not a power of two >= 2")
        if self.generator not in GENERATOR_TAGS:
            raise DomainError(f"unknown generator tag {self.generator!r}")
        es = float(self.symbol_energy)
        if es <= 0:
            raise DomainError("symbol energy must be positive")
        norms2 = np.sum(np.abs(pts) ** 2, axis=1)
        if not np.allclose(norms2, es, rtol=NORM_RTOL, atol=0.0):
            worst = float(np.max(np.abs(norms2 - es))) / es
            raise DomainError(f"points are off the sphere (relative error {worst:.3e})")
        # distinctness: cheapest exact check is the full pairwise scan
        d2 = _pairwise_sq_dists(pts)
        np.fill_diagonal(d2, np.inf)
        if float(d2.min()) <= 0.0:
            raise DomainError("constellation contains duplicate points")
        pts.flags.writeable = False

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.points.shape[1]

    @property
    def rate_rm(self) -> int:
        """Bits per modulation interval, log2(M)."""
        return self.points.shape[0].bit_length() - 1


def _pairwise_sq_dists(pts: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances between complex rows."""
    gram = pts @ pts.conj().T
    norms = np.real(np.diag(gram))
    d2 = norms[:, None] + norms[None, :] - 2.0 * np.real(gram)
    return np.maximum(d2, 0.0)


@dataclass(frozen=True)
class ChannelRealization:
    """Flat MIMO channel: y = H x + n with noise variance sigma2 per complex component."""

    H: np.ndarray  # (n, n) complex128
    sigma2: float
    kind: str = EXPLICIT

    def __post_init__(self):
        h = np.asarray(self.H, dtype=np.complex128)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DomainError("H must be square (n_R = n_T for this model)")
        object.__setattr__(self, "H", h)
        if self.sigma2 < 0:
            raise DomainError("sigma2 must be non-negative")
        h.flags.writeable = False

    @property
    def n_antennas(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class Waveform:
    """Multi-antenna sample stream at Q samples per symbol period."""

    samples: np.ndarray  # (n, total) complex128
    oversampling_q: int
    symbols_k: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 2:
            raise DomainError("samples must be a 2-D (n, total) array")
        object.__setattr__(self, "samples", s)
        if self.oversampling_q < 1:
            raise DomainError("oversampling factor must be >= 1")
        if s.shape[1] % self.oversampling_q != 0:
            raise DomainError("sample count must be an exact multiple of Q")
        s.flags.writeable = False

    @property
    def n_antennas(self) -> int:
        return self.samples.shape[0]


def ebn0_awgn(es: float, rm: int, sigma2: float) -> float:
    """Received Eb/N0 (linear) on the vector AWGN channel: Es / (Rm * sigma2)."""
    _check_positive(es=es, rm=rm, sigma2=sigma2)
    return es / (rm * sigma2)


def ebn0_fading(es: float, rm: int, sigma2: float, n: int) -> float:
    """Average received Eb/N0 (linear) on the flat Rayleigh channel: n Es / (Rm sigma2)."""
    _check_positive(es=es, rm=rm, sigma2=sigma2, n=n)
    return n * es / (rm * sigma2)


def sigma2_for_ebn0(
    target_ebn0_db: float,
    es: float,
    rm: int,
    n: int = 1,
    channel_kind: str = IDENTITY_AWGN,
) -> float:
    """Noise variance per complex component that hits a target Eb/N0 in dB.

    Inverse of :func:`ebn0_awgn` / :func:`ebn0_fading`, used to build sweep axes.
    """
    _check_positive(es=es, rm=rm, n=n)
    if not math.isfinite(target_ebn0_db):
        raise DomainError("target Eb/N0 must be finite")
    ratio = undb(target_ebn0_db)
    if channel_kind == RAYLEIGH_IID:
        return n * es / (rm * ratio)
    if channel_kind == IDENTITY_AWGN:
        return es / (rm * ratio)
    raise DomainError(f"no Eb/N0 convention for channel kind {channel_kind!r}")


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value}")
