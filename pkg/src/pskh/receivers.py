"""Detection and sequence estimation.

One trellis engine serves every estimator. A decode works on a frame of
observations and a branch-metric model; the model knows how the observation
at index m depends on the symbols around it:

* linear tap models (ISI-free, whitened sinc^2): y[m] = H sum_i w[i] x[m-i],
* the half-rate slerp model: alternating data and midpoint observations,
* the interpolated-signaling model: y[m] is a pulse-autocorrelation-weighted
  sum over symbol intervals, each interval contributing its data point and
  its great-circle interpolants toward the next symbol.

Frames start from silence (symbols before the frame read as a null index
that contributes nothing) and the final interpolation interval extends the
last symbol toward itself, matching the synthesis conventions in
:mod:`pskh.modulation`. Ties in add-compare-select resolve to the lower
state/symbol index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import RATE_T, RATE_T_HALF, ReceivedFrame, identity_channel
from .constellations import HypersymbolPartition, neighbor_table
from .core import ChannelRealization, ConstellationSet, DomainError
from .modulation import (
    SINC2,
    AutocorrelationTable,
    PulseShape,
    _slerp_rows,
    autocorr_table,
    make_pulse,
)

__all__ = [
    "WhitenedImpulse",
    "TrellisDecodeConfig",
    "BranchMetricModel",
    "InfeasibleComplexityError",
    "build_wmf_sinc2",
    "detect_symbolwise",
    "viterbi",
    "dfe",
    "ddfse",
    "rsse",
    "iterative_va",
    "complexity_xi",
    "matched_filter_downsample",
    "LinkModel",
    "sequence_metric",
]

ISI_FREE = "isi_free"
SINC2_WMF = "sinc2_wmf"
T2_SLERP = "t2_slerp"
SI_PHI = "si_phi"

DEFAULT_BRANCH_CAP = 1 << 20


class InfeasibleComplexityError(DomainError):
    """Configured trellis exceeds the branch-count cap."""

    def __init__(self, xi: int, cap: int):
        super().__init__(f"trellis needs {xi} branches per step, cap is {cap}")
        self.xi = xi
        self.cap = cap


@dataclass(frozen=True)
class WhitenedImpulse:
    """Causal minimum-phase ISI model after the whitened matched filter."""

    taps: np.ndarray  # (L+1,) complex

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.complex128)
        object.__setattr__(self, "taps", t)
        if t.ndim != 1 or len(t) < 1:
            raise DomainError("whitened impulse needs at least one tap")
        if len(t) > 1:
            zeros = np.roots(t)
            if np.any(np.abs(zeros) > 1.0 - 1e-9):
                raise DomainError("whitened impulse is not strictly minimum-phase")
        t.flags.writeable = False

    @property
    def isi_length(self) -> int:
        return len(self.taps) - 1

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


@dataclass(frozen=True)
class BranchMetricModel:
    """Which discrete-time model branch metrics are computed against."""

    kind: str
    wmf: WhitenedImpulse | None = None
    table: AutocorrelationTable | None = None
    f_ip: int = 1
    dfe_tail_taps: int = 2

    def __post_init__(self):
        if self.kind not in (ISI_FREE, SINC2_WMF, T2_SLERP, SI_PHI):
            raise DomainError(f"unknown model kind {self.kind!r}")
        if self.kind == SINC2_WMF and self.wmf is None:
            raise DomainError("sinc2 model needs a whitened impulse")
        if self.kind == SI_PHI:
            if self.table is None:
                raise DomainError("interpolation model needs an autocorrelation table")
            if self.f_ip < 1:
                raise DomainError("f_ip must be >= 1")
        if self.dfe_tail_taps < 0:
            raise DomainError("dfe_tail_taps must be >= 0")

    @staticmethod
    def isi_free() -> "BranchMetricModel":
        return BranchMetricModel(ISI_FREE, dfe_tail_taps=0)

    @staticmethod
    def sinc2_wmf(wmf: WhitenedImpulse) -> "BranchMetricModel":
        return BranchMetricModel(SINC2_WMF, wmf=wmf, dfe_tail_taps=wmf.isi_length)

    @staticmethod
    def t2_slerp() -> "BranchMetricModel":
        return BranchMetricModel(T2_SLERP, dfe_tail_taps=0)

    @staticmethod
    def si_phi(
        table: AutocorrelationTable, f_ip: int, dfe_tail_taps: int = 2
    ) -> "BranchMetricModel":
        return BranchMetricModel(SI_PHI, table=table, f_ip=f_ip, dfe_tail_taps=dfe_tail_taps)


@dataclass(frozen=True)
class TrellisDecodeConfig:
    estimator: str  # symbolwise | va | dfe | ddfse | rsse | iter_va
    nu: int = 0
    nu_max: int = 0
    n_nb: int = 0
    partition: HypersymbolPartition | None = None
    traceback_depth: int | None = None
    branch_cap: int = DEFAULT_BRANCH_CAP
    neighbor_source: str = "HA"  # or "A"

    def __post_init__(self):
        est = self.estimator
        if est not in ("symbolwise", "va", "dfe", "ddfse", "rsse", "iter_va"):
            raise DomainError(f"unknown estimator {est!r}")
        if est in ("ddfse", "rsse") and self.nu < 1:
            raise DomainError(f"{est} needs nu >= 1")
        if est == "rsse" and self.partition is None:
            raise DomainError("rsse needs a hypersymbol partition")
        if est == "iter_va" and (self.nu_max < 1 or self.n_nb < 1):
            raise DomainError("iter_va needs nu_max >= 1 and n_nb >= 1")
        if self.neighbor_source not in ("HA", "A"):
            raise DomainError("neighbor_source must be 'HA' or 'A'")
        if self.traceback_depth is not None and self.traceback_depth < 1:
            raise DomainError("traceback_depth must be >= 1")


# ---------------------------------------------------------------------------
# whitened matched filter

def build_wmf_sinc2(q: int = 16, span: int = 16) -> WhitenedImpulse:
    """Minimum-phase factor of the T-sampled sinc^2 pulse autocorrelation.

    Spectral factorization goes through the roots of the finite Laurent
    polynomial sum_k phi[k] z^-k; the roots strictly inside the unit circle
    form the causal factor, normalized so the tap energy equals phi[0].
    """
    pulse = make_pulse(SINC2, span_symbols=span, q=q)
    table = autocorr_table(pulse)
    phi = np.array([table.phi_at(k) for k in range(span + 1)])
    sym = np.concatenate([phi[:0:-1], phi])  # phi[span] ... phi[0] ... phi[span]
    nz = np.where(np.abs(sym) > 1e-14)[0]
    sym = sym[nz[0] : nz[-1] + 1]
    roots = np.roots(sym)
    if np.any(np.abs(np.abs(roots) - 1.0) < 1e-9):
        raise DomainError("autocorrelation has near-unit-circle zeros; cannot factor")
    inside = roots[np.abs(roots) < 1.0]
    taps = np.atleast_1d(np.poly(inside))
    if np.max(np.abs(taps.imag)) > 1e-9:
        raise DomainError("spectral factor came out complex for a real pulse")
    taps = taps.real
    taps *= math.sqrt(phi[0] / np.sum(taps * taps))
    if taps[0] < 0:
        taps = -taps
    return WhitenedImpulse(taps.astype(np.complex128))


# ---------------------------------------------------------------------------
# complexity count

def complexity_xi(
    estimator: str,
    m: int,
    nu: int | None = None,
    element_orders=None,
    iterations=None,
) -> int:
    """Trellis branches per time step.

    * standard VA (and its DDFSE truncation): M^(nu+1)
    * RSSE: M * prod(per-element orders)
    * iterative VA: M^2 + sum over iterations i >= 2 of (n_nb_i + 1)^(nu_i + 1),
      with iterations given as (n_nb_i, nu_i) pairs.
    """
    est = estimator.lower()
    if est in ("va", "viterbi", "ddfse"):
        if nu is None:
            raise DomainError("va complexity needs nu")
        return m ** (nu + 1)
    if est == "rsse":
        if not element_orders:
            raise DomainError("rsse complexity needs per-element orders")
        return m * int(np.prod(element_orders))
    if est in ("iter", "iter_va", "iterative"):
        if iterations is None:
            raise DomainError("iterative complexity needs (n_nb, nu) per iteration")
        total = m * m
        for n_nb_i, nu_i in iterations:
            total += (n_nb_i + 1) ** (nu_i + 1)
        return total
    raise DomainError(f"no complexity formula for estimator {estimator!r}")


def _iterations_for(cfg: TrellisDecodeConfig) -> list[tuple[int, int]]:
    return [(cfg.n_nb, i) for i in range(2, cfg.nu_max + 1)]


# ---------------------------------------------------------------------------
# front ends

def matched_filter_downsample(w, pulse: PulseShape, rate: str = RATE_T) -> ReceivedFrame:
    """Convolve with the time-reversed pulse and sample at T (or T/2).

    Group delay is span*Q samples: synthesis puts symbol k's peak at
    k*Q + span*Q/2 and the matched filter adds another span*Q/2.
    """
    q = pulse.oversampling_q
    if rate == RATE_T:
        if w.oversampling_q != q:
            raise DomainError("waveform oversampling does not match the pulse")
        n_out = w.symbols_k
    elif rate == RATE_T_HALF:
        if w.oversampling_q != 2 * q:
            raise DomainError("half-rate sampling needs a pulse built for T/2")
        n_out = 2 * w.symbols_k
    else:
        raise DomainError(f"unknown sampling rate {rate!r}")
    delay = pulse.span_symbols * q
    out = np.empty((n_out, w.n_antennas), dtype=np.complex128)
    for ant in range(w.n_antennas):
        mf = np.convolve(w.samples[ant], pulse.taps[::-1]) / q
        out[:, ant] = mf[delay :: q][:n_out]
    return ReceivedFrame(out, identity_channel(w.n_antennas, 0.0), rate)


def detect_symbolwise(frame: ReceivedFrame, a: ConstellationSet) -> np.ndarray:
    """Per-symbol maximum likelihood: argmin_j ||y - H a_j||^2, low index wins ties."""
    ha = a.points @ frame.channel.H.T  # (M, n)
    y = frame.samples
    d2 = (
        np.sum(np.abs(y) ** 2, axis=1)[:, None]
        + np.sum(np.abs(ha) ** 2, axis=1)[None, :]
        - 2.0 * np.real(y @ ha.conj().T)
    )
    return np.argmin(d2, axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# model contexts
#
# A context binds (constellation, model, nu, channel H) and exposes to the
# engine: nu, delta (step t consumes observation t - delta), flush (extra
# forced-copy steps at the end of the frame), tail / hist_width (survivor
# feedback), plus
#   v_table(t)   -> (B or 1, B, D): input-dependent prediction term, row =
#                   newest state symbol, column = input symbol,
#   state_pred(state_syms, hist) -> (P, D): everything the state determines,
#   obs_for_step(obs, t) -> observation vector or None.
# The alphabet is extended with a null index B-1 = M that contributes zero.

class _LinearCtx:
    """y[m] = H sum_i w[i] x[m-i]; step t consumes observation t."""

    def __init__(self, points: np.ndarray, w: np.ndarray, h: np.ndarray, nu: int, tail: int):
        m, n = points.shape
        ext = np.vstack([points, np.zeros((1, n))])
        self.ha = ext @ h.T  # (B, n)
        self.w = np.asarray(w, dtype=np.complex128)
        self.nu = nu
        self.delta = 0
        self.flush = 0
        self.tail = min(tail, max(len(self.w) - 1 - nu, 0))
        self.hist_width = self.tail
        self.b = m + 1
        self.n = n
        self._v = (self.w[0] * self.ha)[None, :, :]  # (1, B, n)

    def v_table(self, t: int) -> np.ndarray:
        return self._v

    def state_pred(self, state_syms: np.ndarray, hist: np.ndarray) -> np.ndarray:
        p = state_syms.shape[0]
        out = np.zeros((p, self.n), dtype=np.complex128)
        for i in range(1, min(self.nu, len(self.w) - 1) + 1):
            out += self.w[i] * self.ha[state_syms[:, i - 1]]
        for qx in range(self.tail):
            out += self.w[self.nu + 1 + qx] * self.ha[hist[:, qx]]
        return out

    def obs_for_step(self, obs: np.ndarray, t: int):
        if 0 <= t < len(obs):
            return obs[t]
        return None


class _PairCtx:
    """Interpolated-signaling model: observations are autocorrelation-weighted
    sums over symbol intervals (pairs of adjacent symbols)."""

    def __init__(self, link: "LinkModel", h: np.ndarray, nu: int, tail: int):
        if nu < 1:
            raise DomainError("interval model needs at least one memory element")
        self.nu = nu
        self.n = link.points.shape[1]
        self.b = link.points.shape[0] + 1
        window, j0 = link.si_window(nu)
        self.window = window  # offsets j0 .. j0+nu-1, newest pair last
        self.delta = nu + j0
        if self.delta < 0:
            raise DomainError("interval window would need future observations")
        self.flush = self.delta
        self.tail = tail
        self.hist_width = tail
        need = set(window)
        for qx in range(tail):
            need.add(window[0] - 1 - qx)
        self.hp = {
            j: link.pair_table(j) @ h.T
            for j in need
            if j in window or link.si_energy(j) > 0.0
        }
        self._v = self.hp[window[-1]]  # (B, B, n)

    def v_table(self, t: int) -> np.ndarray:
        return self._v

    def state_pred(self, state_syms: np.ndarray, hist: np.ndarray) -> np.ndarray:
        p = state_syms.shape[0]
        out = np.zeros((p, self.n), dtype=np.complex128)
        # pairs entirely inside the state: offsets window[0] .. window[-2];
        # pair q counts from the oldest interval
        for qx in range(self.nu - 1):
            j = self.window[qx]
            if j not in self.hp:
                continue
            older = state_syms[:, self.nu - 1 - qx]
            newer = state_syms[:, self.nu - 2 - qx]
            out += self.hp[j][older, newer]
        # survivor-feedback pairs older than the window
        for qx in range(self.tail):
            j = self.window[0] - 1 - qx
            if j not in self.hp:
                continue
            older = hist[:, qx]
            newer = hist[:, qx - 1] if qx >= 1 else state_syms[:, self.nu - 1]
            out += self.hp[j][older, newer]
        return out

    def obs_for_step(self, obs: np.ndarray, t: int):
        mi = t - self.delta
        if 0 <= mi < len(obs):
            return obs[mi]
        return None


class _T2Ctx:
    """Half-rate model: step t sees the data sample d[t] and the midpoint
    sample between t-1 and t; observation vectors are stacked (2n,)."""

    def __init__(self, points: np.ndarray, h: np.ndarray, n_symbols: int):
        m, n = points.shape
        self.nu = 1
        self.n = 2 * n
        self.b = m + 1
        self.delta = 0
        self.flush = 1
        self.tail = 0
        self.hist_width = 0
        self.n_symbols = n_symbols
        b = self.b
        ext = np.vstack([points, np.zeros((1, n))]) / math.sqrt(2.0)
        hd = ext @ h.T  # (B, n)
        left = np.repeat(ext, b, axis=0)
        right = np.tile(ext, (b, 1))
        both_real = (np.arange(b * b) // b < m) & (np.arange(b * b) % b < m)
        mids_flat = np.zeros((b * b, n), dtype=np.complex128)
        mids_flat[both_real] = _slerp_rows(left[both_real], right[both_real], 0.5)
        mids = mids_flat.reshape(b, b, n) @ h.T
        # main table: rows = previous symbol, cols = input
        self._v = np.concatenate(
            [np.broadcast_to(hd[None, :, :], (b, b, n)), mids], axis=2
        )
        # first step: no midpoint observation yet
        first = np.concatenate([hd[None, :, :], np.zeros((1, b, n))], axis=2)
        self._v0 = np.ascontiguousarray(np.broadcast_to(first, (b, b, 2 * n)))
        # flush step: only the final midpoint observation
        self._vf = np.concatenate([np.zeros_like(mids), mids], axis=2)

    def v_table(self, t: int) -> np.ndarray:
        if t == 0:
            return self._v0
        if t >= self.n_symbols:
            return self._vf
        return self._v

    def state_pred(self, state_syms: np.ndarray, hist: np.ndarray) -> np.ndarray:
        return np.zeros((state_syms.shape[0], self.n), dtype=np.complex128)

    def obs_for_step(self, obs: np.ndarray, t: int):
        if 0 <= t < len(obs):
            return obs[t]
        return None


class LinkModel:
    """Channel-independent part of a (constellation, branch model) pairing.

    Builds interpolant pair tables once; binding a channel realization then
    produces the per-frame decode context, and `generate` produces the exact
    discrete-time observations the context models (including the intervals a
    truncated estimator will treat as noise).
    """

    def __init__(self, a: ConstellationSet, model: BranchMetricModel):
        self.constellation = a
        self.model = model
        self.points = a.points
        if model.kind == SI_PHI:
            tab = model.table
            f = model.f_ip
            if tab.oversampling_q % f != 0:
                raise DomainError("autocorrelation resolution must divide by f_ip")
            self._tab = tab
            self._f = f
            self._grid_step = tab.oversampling_q // f
            self._max_offset = (len(tab.values) - 1) // (2 * tab.oversampling_q) + 1
            self._interp: list[np.ndarray | None] = [None] * f
            self._pair_cache: dict[int, np.ndarray] = {}
            self._energy_cache: dict[int, float] = {}

    # ---- interpolated-signaling tables

    def _interp_table(self, l: int) -> np.ndarray:
        if self._interp[l] is None:
            m, n = self.points.shape
            left = np.repeat(self.points, m, axis=0)
            right = np.tile(self.points, (m, 1))
            self._interp[l] = _slerp_rows(left, right, l / self._f).reshape(m, m, n)
        return self._interp[l]

    def pair_table(self, j: int) -> np.ndarray:
        """(B, B, n) contribution of interval (a, b) to the observation at
        interval offset j; the null row/column stays zero."""
        if j in self._pair_cache:
            return self._pair_cache[j]
        m, n = self.points.shape
        b = m + 1
        tab = np.zeros((b, b, n), dtype=np.complex128)
        q = self._tab.oversampling_q
        w_data = self._tab.phi(j * q)
        if w_data != 0.0:
            tab[:m, :m] += w_data * self.points[:, None, :]
        for l in range(1, self._f):
            w = self._tab.phi(j * q + l * self._grid_step)
            if w != 0.0:
                tab[:m, :m] += w * self._interp_table(l)
        self._pair_cache[j] = tab
        return tab

    def si_energy(self, j: int) -> float:
        """Sum of squared autocorrelation weights of interval offset j."""
        if j not in self._energy_cache:
            q = self._tab.oversampling_q
            e = self._tab.phi(j * q) ** 2
            for l in range(1, self._f):
                e += self._tab.phi(j * q + l * self._grid_step) ** 2
            self._energy_cache[j] = e
        return self._energy_cache[j]

    def si_window(self, nu: int) -> tuple[list[int], int]:
        """The nu consecutive interval offsets with the highest total energy."""
        lo, hi = -self._max_offset, self._max_offset
        best_j0, best_e = 0, -1.0
        for j0 in range(lo, hi - nu + 2):
            e = sum(self.si_energy(j) for j in range(j0, j0 + nu))
            if e > best_e + 1e-15:
                best_e, best_j0 = e, j0
        return list(range(best_j0, best_j0 + nu)), best_j0

    # ---- binding and generation

    def bind(self, h: np.ndarray, nu: int, tail: int, n_inputs: int):
        kind = self.model.kind
        if kind == ISI_FREE:
            return _LinearCtx(self.points, np.ones(1), h, nu, 0)
        if kind == SINC2_WMF:
            return _LinearCtx(self.points, self.model.wmf.taps, h, nu, tail)
        if kind == T2_SLERP:
            if nu != 1:
                raise DomainError("half-rate model uses exactly one memory element")
            return _T2Ctx(self.points, h, n_inputs)
        if kind == SI_PHI:
            return _PairCtx(self, h, nu, tail)
        raise DomainError(f"unknown model kind {kind!r}")

    def generate(self, syms: np.ndarray, ch: ChannelRealization, rng) -> np.ndarray:
        """Observations for a frame of symbol indices (all model terms included)."""
        from .channel import complex_noise

        kind = self.model.kind
        x = self.points[syms]
        k = len(syms)
        h = ch.H
        if kind == ISI_FREE:
            clean = x @ h.T
            return clean + complex_noise(rng, clean.shape, ch.sigma2)
        if kind == SINC2_WMF:
            w = self.model.wmf.taps
            conv = np.stack(
                [np.convolve(x[:, a], w)[:k] for a in range(x.shape[1])], axis=1
            )
            clean = conv @ h.T
            return clean + complex_noise(rng, clean.shape, ch.sigma2)
        if kind == T2_SLERP:
            n = x.shape[1]
            nxt = np.vstack([x[1:], x[-1:]])
            data = (x / math.sqrt(2.0)) @ h.T
            mids = (_slerp_rows(x, nxt, 0.5) / math.sqrt(2.0)) @ h.T
            data += complex_noise(rng, data.shape, ch.sigma2)
            mids += complex_noise(rng, mids.shape, ch.sigma2)
            # physical alternating T/2 stream: d0, m0, d1, m1, ...
            obs = np.empty((2 * k, n), dtype=np.complex128)
            obs[0::2] = data
            obs[1::2] = mids
            return obs
        if kind == SI_PHI:
            from .modulation import interpolated_stream

            f = self._f
            z = interpolated_stream(x, f)
            phi_grid = self._tab.values[:: self._grid_step]
            center = (len(phi_grid) - 1) // 2
            clean = np.empty((k, x.shape[1]), dtype=np.complex128)
            for ant in range(x.shape[1]):
                c = np.convolve(z[:, ant], phi_grid)
                clean[:, ant] = c[center :: f][:k]
            clean = clean @ h.T
            return clean + complex_noise(rng, clean.shape, ch.sigma2)
        raise DomainError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# trellis engine

def _state_digits(b: int, nu: int, ids: np.ndarray) -> np.ndarray:
    """(P, nu) digit array, digit 0 = newest symbol."""
    out = np.empty((len(ids), nu), dtype=np.int64)
    for qx in range(nu):
        out[:, qx] = (ids // b ** (nu - 1 - qx)) % b
    return out


def _decode_nu0(ctx, obs: np.ndarray, k: int) -> np.ndarray:
    """Zero-memory decisions with decision feedback (plain DFE)."""
    width = max(ctx.hist_width, 1)
    hist = np.full((1, width), ctx.b - 1, dtype=np.int64)
    empty_state = np.empty((1, 0), dtype=np.int64)
    cols = np.arange(ctx.b - 1)
    out = np.empty(k, dtype=np.int64)
    for t in range(k):
        y = ctx.obs_for_step(obs, t)
        if y is None:
            out[t] = 0
        else:
            vt = ctx.v_table(t)[0]  # (B, D); linear models are row-independent
            pred = ctx.state_pred(empty_state, hist)[0]
            u = y - pred
            d2 = np.sum(np.abs(u[None, :] - vt[cols]) ** 2, axis=1)
            out[t] = int(np.argmin(d2))
        if ctx.tail > 0:
            hist = np.roll(hist, 1, axis=1)
            hist[0, 0] = out[t]
    return out


def _decode_full(ctx, obs: np.ndarray, k: int) -> np.ndarray:
    """Full-alphabet trellis over state ids in base B = M+1 (index M = null)."""
    nu, b, n = ctx.nu, ctx.b, ctx.n
    if nu == 0:
        return _decode_nu0(ctx, obs, k)
    m = b - 1
    g = b ** (nu - 1)
    p_count = b**nu
    ids = np.arange(p_count)
    syms = _state_digits(b, nu, ids)
    tail = ctx.tail
    width = max(ctx.hist_width, 1)
    hist = np.full((p_count, width), m, dtype=np.int64)
    path = np.full(p_count, np.inf)
    path[p_count - 1] = 0.0  # all-null state

    cand = np.arange(m)
    c = m
    grp_rows = np.arange(g)
    bp: list[tuple[str, np.ndarray]] = []
    steps = k + ctx.flush
    for t in range(steps):
        y = ctx.obs_for_step(obs, t)
        v = ctx.v_table(t)
        pred = ctx.state_pred(syms, hist)
        if t >= k:  # flush: input forced to the newest state symbol
            s1 = syms[:, 0]
            if y is None:
                bm = np.zeros(p_count)
            else:
                vg = v[s1, s1] if v.shape[0] > 1 else v[0, s1]
                bm = np.sum(np.abs((y[None, :] - pred) - vg) ** 2, axis=1)
            totals = path + bm
            tot = totals.reshape(g, b)
            args = np.argmin(tot, axis=1)  # dropped oldest symbol per group
            mins = tot[grp_rows, args]
            prev = grp_rows * b + args
            new_s1 = syms[prev, 0]
            new_ids = new_s1 * g + grp_rows  # injective: one target per group
            new_path = np.full(p_count, np.inf)
            new_path[new_ids] = mins
            filled = np.full(p_count, -1, dtype=np.int64)
            filled[new_ids] = prev
            bp.append(("flush", filled))
            path = new_path
            if tail > 0:
                new_hist = np.full_like(hist, m)
                new_hist[new_ids, 0] = syms[prev, nu - 1]
                if tail > 1:
                    new_hist[new_ids, 1:tail] = hist[prev, : tail - 1]
                hist = new_hist
            continue

        if y is None:
            metric = np.zeros((p_count, c))
        else:
            u = y[None, :] - pred  # (P, D)
            uu = np.sum(np.abs(u) ** 2, axis=1)
            if v.shape[0] == 1:
                vt = v[0]  # (B, D); columns beyond the alphabet unused
                cross = np.real(u @ vt[:m].conj().T)
                vv = np.sum(np.abs(vt[:m]) ** 2, axis=1)[None, :]
                metric = uu[:, None] + vv - 2.0 * cross
            else:
                vt = v[:, :m]  # (B, c, D)
                ub = u.reshape(b, g, n)
                cross = np.real(np.matmul(ub, vt.conj().transpose(0, 2, 1)))
                vv = np.sum(np.abs(vt) ** 2, axis=2)
                metric = (uu.reshape(b, g, 1) + vv[:, None, :] - 2.0 * cross).reshape(
                    p_count, c
                )
        totals = path[:, None] + metric  # (P, c)
        tot = totals.reshape(g, b, c)
        args = np.argmin(tot, axis=1).astype(np.int32)  # (G, c) dropped symbol
        mins = tot[grp_rows[:, None], args, np.arange(c)[None, :]]  # (G, c)
        new_path = np.full(p_count, np.inf)
        new_path.reshape(b, g)[:m, :] = mins.T
        bp.append(("step", args))
        path = new_path
        if tail > 0:
            prev = grp_rows[:, None] * b + args  # (G, c)
            block = np.empty((g, c, width), dtype=np.int64)
            block[:, :, 0] = args
            if tail > 1:
                block[:, :, 1:tail] = hist[prev, : tail - 1]
            new_hist = np.full_like(hist, m)
            new_hist.reshape(b, g, width)[:m] = block.transpose(1, 0, 2)
            hist = new_hist

    best = int(np.argmin(path))
    out = np.empty(steps, dtype=np.int64)
    cur = best
    for t in range(steps - 1, -1, -1):
        tag, data = bp[t]
        out[t] = cur // g  # newest symbol of the state after step t
        if tag == "flush":
            cur = int(data[cur])
        else:
            grp = cur % g
            j = cur // g
            cur = grp * b + int(data[grp, j])
    return out[:k]


def _decode_sparse(ctx, obs: np.ndarray, k: int, cands: list[np.ndarray]) -> np.ndarray:
    """Trellis over explicit per-step state lists (small candidate sets)."""
    nu, b = ctx.nu, ctx.b
    m = b - 1
    tail = ctx.tail
    width = max(ctx.hist_width, 1)
    states = np.full((1, nu), m, dtype=np.int64)
    hist = np.full((1, width), m, dtype=np.int64)
    path = np.zeros(1)
    trace: list[tuple[np.ndarray, np.ndarray]] = []  # (prev index, emitted symbol)
    steps = k + ctx.flush
    for t in range(steps):
        y = ctx.obs_for_step(obs, t)
        v = ctx.v_table(t)
        pred = ctx.state_pred(states, hist)
        p_count = len(states)
        if t >= k:  # forced copy of the newest symbol
            if y is None:
                bm = np.zeros(p_count)
            else:
                rows = states[:, 0] if v.shape[0] > 1 else np.zeros(p_count, dtype=int)
                vg = v[rows, states[:, 0]]
                bm = np.sum(np.abs((y[None, :] - pred) - vg) ** 2, axis=1)
            totals = path + bm
            flat_prev = np.arange(p_count)
            branch_inputs = states[:, 0]
        else:
            cset = cands[t]
            c = len(cset)
            if y is None:
                bm = np.zeros((p_count, c))
            else:
                rows = states[:, 0] if v.shape[0] > 1 else np.zeros(p_count, dtype=int)
                vg = v[rows[:, None], cset[None, :]]  # (P, c, D)
                u = y[None, None, :] - pred[:, None, :]
                bm = np.sum(np.abs(u - vg) ** 2, axis=2)
            totals = (path[:, None] + bm).ravel()
            flat_prev = np.repeat(np.arange(p_count), c)
            branch_inputs = np.tile(cset, p_count)
        keys = np.concatenate(
            [branch_inputs[:, None], states[flat_prev][:, : nu - 1]], axis=1
        )
        new_states, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = np.lexsort((totals, inverse))
        first = np.ones(len(order), dtype=bool)
        first[1:] = inverse[order][1:] != inverse[order][:-1]
        winners = order[first]  # lowest metric (then lowest branch index) per state
        prev_idx = flat_prev[winners]
        path = totals[winners]
        trace.append((prev_idx, new_states[:, 0].copy()))
        if tail > 0:
            new_hist = np.empty((len(new_states), width), dtype=np.int64)
            new_hist.fill(m)
            new_hist[:, 0] = states[prev_idx, nu - 1]
            if tail > 1:
                new_hist[:, 1:tail] = hist[prev_idx, : tail - 1]
            hist = new_hist
        states = new_states

    best = int(np.argmin(path))
    out = np.empty(steps, dtype=np.int64)
    cur = best
    for t in range(steps - 1, -1, -1):
        prev_idx, emitted = trace[t]
        out[t] = int(emitted[cur])
        cur = int(prev_idx[cur])
    return out[:k]


def _decode_rsse(ctx, obs: np.ndarray, k: int, part: HypersymbolPartition) -> np.ndarray:
    """nu = 2 trellis with the older delay element reduced to hypersymbols.

    Branch metrics use the survivor's actual older symbol; only the state
    bookkeeping is by hypersymbol.
    """
    b, n = ctx.b, ctx.n
    m = b - 1
    k2 = part.n_subsets
    jmap = np.empty(b, dtype=np.int64)
    jmap[:m] = part.subset_of()
    jmap[m] = k2  # null hypersymbol
    n_state = b * (k2 + 1)
    s1_of = np.arange(n_state) // (k2 + 1)
    path = np.full(n_state, np.inf)
    path[n_state - 1] = 0.0  # (null, null-hypersymbol)
    resolved = np.full(n_state, m, dtype=np.int64)  # survivor's actual older symbol
    tail = ctx.tail
    width = max(ctx.hist_width, 1)
    hist = np.full((n_state, width), m, dtype=np.int64)
    preds = [np.where(jmap[s1_of] == jp)[0] for jp in range(k2 + 1)]
    cand = np.arange(m)

    bp: list[tuple[str, np.ndarray]] = []
    steps = k + ctx.flush
    for t in range(steps):
        y = ctx.obs_for_step(obs, t)
        v = ctx.v_table(t)
        state_syms = np.stack([s1_of, resolved], axis=1)
        pred = ctx.state_pred(state_syms, hist)
        if t >= k:
            if y is None:
                bm = np.zeros(n_state)
            else:
                vg = v[s1_of, s1_of] if v.shape[0] > 1 else v[0, s1_of]
                bm = np.sum(np.abs((y[None, :] - pred) - vg) ** 2, axis=1)
            totals = path + bm
            new_path = np.full(n_state, np.inf)
            new_resolved = np.full(n_state, m, dtype=np.int64)
            new_hist = np.full_like(hist, m)
            filled = np.full(n_state, -1, dtype=np.int64)
            for pidx in np.argsort(totals, kind="stable"):
                if not np.isfinite(totals[pidx]):
                    break
                tgt = s1_of[pidx] * (k2 + 1) + jmap[s1_of[pidx]]
                if totals[pidx] < new_path[tgt]:
                    new_path[tgt] = totals[pidx]
                    filled[tgt] = pidx
                    new_resolved[tgt] = s1_of[pidx]
                    if tail > 0:
                        new_hist[tgt, 0] = resolved[pidx]
                        if tail > 1:
                            new_hist[tgt, 1:tail] = hist[pidx, : tail - 1]
            bp.append(("flush", filled))
            path, resolved, hist = new_path, new_resolved, new_hist
            continue
        if y is None:
            metric = np.zeros((n_state, m))
        else:
            u = y[None, :] - pred
            uu = np.sum(np.abs(u) ** 2, axis=1)
            if v.shape[0] == 1:
                vt = v[0, :m]
                cross = np.real(u @ vt.conj().T)
                vv = np.sum(np.abs(vt) ** 2, axis=1)[None, :]
                metric = uu[:, None] + vv - 2.0 * cross
            else:
                vt = v[:, :m]
                ub = u.reshape(b, k2 + 1, n)
                cross = np.real(np.matmul(ub, vt.conj().transpose(0, 2, 1)))
                vv = np.sum(np.abs(vt) ** 2, axis=2)
                metric = (uu.reshape(b, k2 + 1, 1) + vv[:, None, :] - 2.0 * cross).reshape(
                    n_state, m
                )
        totals = path[:, None] + metric  # (n_state, M)
        new_path = np.full(n_state, np.inf)
        new_resolved = np.full(n_state, m, dtype=np.int64)
        new_hist = np.full_like(hist, m)
        winners = np.full(n_state, -1, dtype=np.int64)
        for jp in range(k2 + 1):
            rows = preds[jp]
            sub = totals[rows]  # (R, M)
            arg = np.argmin(sub, axis=0)
            tgt = cand * (k2 + 1) + jp
            new_path[tgt] = sub[arg, cand]
            winners[tgt] = rows[arg]
        ok = winners >= 0
        new_resolved[ok] = s1_of[winners[ok]]
        if tail > 0:
            new_hist[ok, 0] = resolved[winners[ok]]
            if tail > 1:
                new_hist[ok, 1:tail] = hist[winners[ok], : tail - 1]
        bp.append(("step", winners))
        path, resolved, hist = new_path, new_resolved, new_hist

    best = int(np.argmin(path))
    out = np.empty(steps, dtype=np.int64)
    cur = best
    for t in range(steps - 1, -1, -1):
        out[t] = cur // (k2 + 1)
        cur = int(bp[t][1][cur])
    return out[:k]


# ---------------------------------------------------------------------------
# public estimators

def _check_cap(xi: int, cap: int) -> None:
    if xi > cap:
        raise InfeasibleComplexityError(xi, cap)


def _t2_stack(half: np.ndarray) -> np.ndarray:
    """Alternating T/2 stream (d0, m0, d1, m1, ...) -> stacked rows where row t
    holds (d[t], midpoint between t-1 and t), plus one row for the last
    midpoint."""
    if len(half) % 2 != 0:
        raise DomainError("alternating half-rate frame needs an even sample count")
    k = len(half) // 2
    n = half.shape[1]
    obs = np.zeros((k + 1, 2 * n), dtype=np.complex128)
    obs[:k, :n] = half[0::2]
    obs[1:, n:] = half[1::2]
    return obs


def _obs_and_inputs(frame_samples: np.ndarray, model: BranchMetricModel):
    if model.kind == T2_SLERP:
        return _t2_stack(frame_samples), len(frame_samples) // 2
    return frame_samples, len(frame_samples)


def viterbi(
    frame: ReceivedFrame,
    a: ConstellationSet,
    model: BranchMetricModel,
    cfg: TrellisDecodeConfig,
    link: LinkModel | None = None,
) -> np.ndarray:
    """Vector-valued Viterbi sequence estimation over nu memory elements.

    Exact maximum likelihood under the truncated model (retained taps or
    interval window only; no survivor feedback for older terms).
    """
    _check_cap(complexity_xi("va", a.size, nu=cfg.nu), cfg.branch_cap)
    link = link or LinkModel(a, model)
    obs, k = _obs_and_inputs(frame.samples, model)
    ctx = link.bind(frame.channel.H, cfg.nu, 0, k)
    return _decode_full(ctx, obs, k)


def ddfse(
    frame: ReceivedFrame,
    a: ConstellationSet,
    model: BranchMetricModel,
    cfg: TrellisDecodeConfig,
    link: LinkModel | None = None,
) -> np.ndarray:
    """Truncated trellis plus per-survivor decision feedback for older taps."""
    _check_cap(complexity_xi("va", a.size, nu=cfg.nu), cfg.branch_cap)
    link = link or LinkModel(a, model)
    obs, k = _obs_and_inputs(frame.samples, model)
    ctx = link.bind(frame.channel.H, cfg.nu, model.dfe_tail_taps, k)
    return _decode_full(ctx, obs, k)


def dfe(
    frame: ReceivedFrame,
    a: ConstellationSet,
    model: BranchMetricModel,
    cfg: TrellisDecodeConfig | None = None,
    link: LinkModel | None = None,
) -> np.ndarray:
    """Symbol-by-symbol decisions, past decisions cancelling the causal tail."""
    if model.kind not in (ISI_FREE, SINC2_WMF):
        raise DomainError("decision feedback needs a causal tap model")
    link = link or LinkModel(a, model)
    obs, k = _obs_and_inputs(frame.samples, model)
    ctx = link.bind(frame.channel.H, 0, model.dfe_tail_taps, k)
    return _decode_nu0(ctx, obs, k)


def rsse(
    frame: ReceivedFrame,
    a: ConstellationSet,
    model: BranchMetricModel,
    cfg: TrellisDecodeConfig,
    link: LinkModel | None = None,
) -> np.ndarray:
    """Reduced-state sequence estimation: full first delay element,
    hypersymbols in the second."""
    if cfg.nu != 2:
        raise DomainError("this reduced-state scheme uses nu = 2")
    part = cfg.partition
    m = a.size
    if sum(len(s) for s in part.subsets) != m:
        raise DomainError("partition does not cover the constellation")
    _check_cap(
        complexity_xi("rsse", m, element_orders=[m, part.n_subsets]), cfg.branch_cap
    )
    link = link or LinkModel(a, model)
    obs, k = _obs_and_inputs(frame.samples, model)
    ctx = link.bind(frame.channel.H, 2, model.dfe_tail_taps, k)
    return _decode_rsse(ctx, obs, k, part)


def iterative_va(
    frame: ReceivedFrame,
    a: ConstellationSet,
    model: BranchMetricModel,
    cfg: TrellisDecodeConfig,
    link: LinkModel | None = None,
) -> np.ndarray:
    """Iterative Viterbi: a full pass with one memory element, then deeper
    passes restricted to each step's previous estimate and its neighbors."""
    m = a.size
    _check_cap(
        complexity_xi("iter", m, iterations=_iterations_for(cfg)), cfg.branch_cap
    )
    link = link or LinkModel(a, model)
    h = frame.channel.H
    obs, k = _obs_and_inputs(frame.samples, model)
    tail = model.dfe_tail_taps
    est = _decode_full(link.bind(h, 1, tail, k), obs, k)
    if cfg.nu_max == 1:
        return est
    if cfg.n_nb >= m - 1:
        # unrestricted: identical to the full trellis with nu_max elements
        return _decode_full(link.bind(h, cfg.nu_max, tail, k), obs, k)
    src = (a.points @ h.T) if cfg.neighbor_source == "HA" else a.points
    nbr = neighbor_table(src, cfg.n_nb)
    for nu in range(2, cfg.nu_max + 1):
        cands = [np.unique(np.append(nbr[est[t]], est[t])) for t in range(k)]
        est = _decode_sparse(link.bind(h, nu, tail, k), obs, k, cands)
    return est


# ---------------------------------------------------------------------------
# reference metric for oracle tests

def sequence_metric(
    link: LinkModel,
    ch: ChannelRealization,
    obs: np.ndarray,
    seq,
    nu: int,
    tail: int,
) -> float:
    """Total truncated-model metric of a full candidate sequence.

    Mirrors the decode conventions (null symbols before the frame, forced
    constant extension after it) by direct evaluation; exhaustive oracles
    minimize this over all sequences.
    """
    seq = list(seq)
    k = len(seq)
    obs, _ = _obs_and_inputs(np.asarray(obs), link.model)
    ctx = link.bind(ch.H, nu, tail, k)
    m = link.constellation.size
    ext = seq + [seq[-1]] * ctx.flush
    width = max(ctx.hist_width, 1)
    total = 0.0
    for t in range(k + ctx.flush):
        y = ctx.obs_for_step(obs, t)
        if y is None:
            continue
        past = [ext[t - 1 - i] if t - 1 - i >= 0 else m for i in range(nu)]
        state = np.array([past], dtype=np.int64) if nu else np.empty((1, 0), dtype=np.int64)
        hist = np.array(
            [[ext[t - nu - 1 - qx] if t - nu - 1 - qx >= 0 else m for qx in range(width)]],
            dtype=np.int64,
        )
        pred = ctx.state_pred(state, hist)[0]
        v = ctx.v_table(t)
        row = past[0] if nu and v.shape[0] > 1 else 0
        pred = pred + v[row, ext[t]]
        total += float(np.sum(np.abs(y - pred) ** 2))
    return total
