"""Pulse shapes, spherical interpolation, and transmit waveform synthesis.

Three signaling schemes share one synthesis core:

* conventional PAM: one constellation point per symbol period,
* half-rate signaling: data and midpoint interpolants at T/2 spacing, shaped
  by a pulse built for an effective period of T/2 and scaled by 1/sqrt(2),
* interpolated signaling: the data point plus f_ip - 1 great-circle
  interpolants per period, all shaped by the ordinary T-rate pulse.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import DomainError, Waveform

__all__ = [
    "PulseShape",
    "AutocorrelationTable",
    "AntipodalPointsError",
    "make_pulse",
    "slerp",
    "synthesize_pam",
    "synthesize_t2",
    "synthesize_si",
    "autocorr_table",
    "save_waveform",
    "load_waveform",
]

RRC = "rrc"
SINC2 = "sinc2"
RECT = "rect"


class AntipodalPointsError(DomainError):
    """Great-circle interpolation between antipodal points is undefined."""


@dataclass(frozen=True)
class PulseShape:
    kind: str
    rolloff_beta: float
    span_symbols: int
    oversampling_q: int
    taps: np.ndarray  # real, length span*Q + 1, even-symmetric

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.float64)
        object.__setattr__(self, "taps", t)
        if t.shape != (self.span_symbols * self.oversampling_q + 1,):
            raise DomainError("taps length must be span*Q + 1")
        if not np.allclose(t, t[::-1], rtol=0, atol=1e-12):
            raise DomainError("pulse taps must be even-symmetric")
        t.flags.writeable = False

    @property
    def energy(self) -> float:
        return float(np.sum(self.taps**2) / self.oversampling_q)


def make_pulse(kind: str, beta: float = 0.25, span_symbols: int = 16, q: int = 16) -> PulseShape:
    """Sample a closed-form pulse and normalize it to unit energy.

    Root-raised-cosine singular points (t = 0 and t = +/- 1/(4 beta)) use the
    analytic limits. The rectangular pulse takes the midpoint value 1/2 at its
    jump, so a grid point landing exactly on the edge is shared between the
    two adjacent symbols.
    """
    if kind in (RRC, SINC2):
        if q < 4:
            raise DomainError("need Q >= 4 for shaped pulses")
        if span_symbols < 8:
            raise DomainError("need span >= 8 symbols for shaped pulses")
    if span_symbols * q % 2 != 0:
        raise DomainError("span*Q must be even for a symmetric tap grid")
    half = span_symbols * q // 2
    t = np.arange(-half, half + 1) / q
    if kind == RRC:
        if not 0.0 <= beta <= 1.0:
            raise DomainError(f"roll-off must be in [0, 1], got {beta}")
        taps = _rrc_samples(t, beta)
    elif kind == SINC2:
        taps = np.sinc(t) ** 2
    elif kind == RECT:
        taps = np.where(np.abs(t) < 0.5, 1.0, 0.0)
        taps[np.isclose(np.abs(t), 0.5)] = 0.5
    else:
        raise DomainError(f"unknown pulse kind {kind!r}")
    taps = taps / math.sqrt(np.sum(taps**2) / q)
    return PulseShape(kind, beta if kind == RRC else 0.0, span_symbols, q, taps)


def _rrc_samples(t: np.ndarray, beta: float) -> np.ndarray:
    out = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            out[i] = 1.0 - beta + 4.0 * beta / math.pi
        elif beta > 0 and abs(abs(ti) - 1.0 / (4.0 * beta)) < 1e-9:
            out[i] = (beta / math.sqrt(2)) * (
                (1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
                + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta))
            )
        else:
            num = math.sin(math.pi * ti * (1 - beta)) + 4 * beta * ti * math.cos(
                math.pi * ti * (1 + beta)
            )
            den = math.pi * ti * (1 - (4 * beta * ti) ** 2)
            out[i] = num / den
    return out


# ---------------------------------------------------------------------------
# spherical interpolation

def slerp(x1: np.ndarray, x2: np.ndarray, tau: float) -> np.ndarray:
    """Great-circle interpolation between equal-norm complex vectors.

    Geometry lives in the real 2n-dimensional representation, so the angle is
    taken from the real part of the complex inner product.
    """
    x1 = np.asarray(x1, dtype=np.complex128)
    x2 = np.asarray(x2, dtype=np.complex128)
    if x1.shape != x2.shape:
        raise DomainError("slerp endpoints must have the same shape")
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must be in [0, 1], got {tau}")
    n1 = math.sqrt(float(np.sum(np.abs(x1) ** 2)))
    n2 = math.sqrt(float(np.sum(np.abs(x2) ** 2)))
    if n1 == 0 or abs(n1 - n2) > 1e-9 * n1:
        raise DomainError("slerp endpoints must have equal nonzero norms")
    return _slerp_rows(x1[None, :], x2[None, :], tau)[0]


def _slerp_rows(x1: np.ndarray, x2: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise slerp for arrays of equal-norm vectors (no norm validation)."""
    norm2 = np.sum(np.abs(x1) ** 2, axis=1)
    cos = np.real(np.sum(x1 * np.conj(x2), axis=1)) / norm2
    cos = np.clip(cos, -1.0, 1.0)
    theta = np.arccos(cos)
    if np.any(theta > math.pi - 1e-6):
        raise AntipodalPointsError(
            "antipodal points: the connecting great circle is not unique"
        )
    small = theta < 1e-6
    sin = np.where(small, 1.0, np.sin(theta))
    w1 = np.where(small, 1.0 - tau, np.sin((1.0 - tau) * theta) / sin)
    w2 = np.where(small, tau, np.sin(tau * theta) / sin)
    out = w1[:, None] * x1 + w2[:, None] * x2
    if np.any(small):
        # nearly coincident endpoints: linear interpolation, renormalized
        rows = np.where(small)[0]
        cur = np.sqrt(np.sum(np.abs(out[rows]) ** 2, axis=1))
        out[rows] *= (np.sqrt(norm2[rows]) / cur)[:, None]
    return out


# ---------------------------------------------------------------------------
# synthesis

def _as_symbol_array(symbols) -> np.ndarray:
    arr = np.asarray(symbols, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise DomainError("symbols must be a nonempty (K, n) array")
    return arr


def _place_and_filter(points: np.ndarray, taps: np.ndarray, step: int) -> np.ndarray:
    """Superpose `points` every `step` samples through `taps`; (n, total)."""
    k, n = points.shape
    up = np.zeros((k * step, n), dtype=np.complex128)
    up[::step] = points
    return np.stack([np.convolve(up[:, a], taps, mode="full") for a in range(n)])


def synthesize_pam(symbols, pulse: PulseShape) -> Waveform:
    """Conventional pulse-amplitude modulation with full leading/trailing tails."""
    x = _as_symbol_array(symbols)
    q = pulse.oversampling_q
    samples = _place_and_filter(x, pulse.taps, q)
    return Waveform(samples, q, x.shape[0])


def synthesize_si(symbols, pulse: PulseShape, f_ip: int) -> Waveform:
    """Interpolated signaling: data plus f_ip - 1 interpolants per period.

    The final period interpolates the last symbol toward itself (constant
    extension). f_ip = 1 is bit-identical to synthesize_pam.
    """
    x = _as_symbol_array(symbols)
    q = pulse.oversampling_q
    if f_ip < 1:
        raise DomainError("f_ip must be >= 1")
    if q % f_ip != 0:
        raise DomainError(f"Q={q} must be divisible by f_ip={f_ip}")
    z = interpolated_stream(x, f_ip)
    samples = _place_and_filter(z, pulse.taps, q // f_ip)
    return Waveform(samples, q, x.shape[0])


def interpolated_stream(x: np.ndarray, f_ip: int) -> np.ndarray:
    """(K*f_ip, n) stream of data points and great-circle interpolants."""
    if f_ip == 1:
        return x
    k = x.shape[0]
    nxt = np.vstack([x[1:], x[-1:]])
    z = np.empty((k * f_ip, x.shape[1]), dtype=np.complex128)
    z[0::f_ip] = x
    for l in range(1, f_ip):
        z[l::f_ip] = _slerp_rows(x, nxt, l / f_ip)
    return z


def synthesize_t2(symbols, pulse: PulseShape) -> Waveform:
    """Half-rate signaling: data and midpoint interpolants at T/2 spacing.

    `pulse` must be built for an effective period of T/2, i.e. its
    oversampling factor counts samples per half symbol period. Data and
    interpolation points are scaled by 1/sqrt(2) so one symbol period still
    carries Es.
    """
    x = _as_symbol_array(symbols)
    qh = pulse.oversampling_q
    if pulse.span_symbols % 2 != 0:
        raise DomainError("half-rate pulse span must be even in T/2 units")
    k = x.shape[0]
    z = interpolated_stream(x, 2) / math.sqrt(2.0)
    samples = _place_and_filter(z, pulse.taps, qh)
    return Waveform(samples, 2 * qh, k)


# ---------------------------------------------------------------------------
# pulse autocorrelation

@dataclass(frozen=True)
class AutocorrelationTable:
    """Deterministic autocorrelation of the pulse taps at T/Q resolution."""

    values: np.ndarray  # length 2*span*Q + 1, center at index span*Q
    oversampling_q: int
    fip: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        v.flags.writeable = False

    @property
    def center(self) -> int:
        return (len(self.values) - 1) // 2

    def phi(self, offset_samples: int) -> float:
        """Autocorrelation at an integer sample offset (0 outside support)."""
        i = self.center + offset_samples
        if 0 <= i < len(self.values):
            return float(self.values[i])
        return 0.0

    def phi_at(self, symbol_offset: float) -> float:
        """Autocorrelation at a symbol-unit offset that lands on the grid."""
        s = symbol_offset * self.oversampling_q
        k = round(s)
        if abs(s - k) > 1e-9:
            raise DomainError(f"offset {symbol_offset} is off the T/Q grid")
        return self.phi(k)


def autocorr_table(pulse: PulseShape, f_ip: int = 1) -> AutocorrelationTable:
    """Numerically exact discrete autocorrelation of the pulse taps.

    Normalization matches the continuous integral: phi[0] equals the pulse
    energy (1 for pulses from make_pulse). Offsets that are multiples of
    T/f_ip are what the interpolated-signaling receiver consumes.
    """
    q = pulse.oversampling_q
    if f_ip < 1 or q % f_ip != 0:
        raise DomainError("f_ip must be >= 1 and divide Q")
    full = np.correlate(pulse.taps, pulse.taps, mode="full") / q
    return AutocorrelationTable(full, q, f_ip)


# ---------------------------------------------------------------------------
# waveform dump (binary, little-endian)

_HEADER = struct.Struct("<III")


def save_waveform(w: Waveform, path) -> None:
    """Header (n, K, Q as u32 LE), then antenna-major interleaved re/im f64."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(w.n_antennas, w.symbols_k, w.oversampling_q))
        inter = np.empty((w.n_antennas, w.samples.shape[1] * 2), dtype="<f8")
        inter[:, 0::2] = w.samples.real
        inter[:, 1::2] = w.samples.imag
        fh.write(inter.tobytes())


def load_waveform(path) -> Waveform:
    with open(path, "rb") as fh:
        n, k, q = _HEADER.unpack(fh.read(_HEADER.size))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size % (2 * n) != 0:
        raise DomainError("waveform payload size mismatch")
    inter = raw.reshape(n, -1)
    return Waveform(inter[:, 0::2] + 1j * inter[:, 1::2], q, k)
