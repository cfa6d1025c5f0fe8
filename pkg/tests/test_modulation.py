import math

import numpy as np
import pytest

from pskh import modulation as mod
from pskh.core import DomainError


def unit_vec(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


# --- pulses -------------------------------------------------------------------

def test_sinc2_zero_at_nonzero_integers():
    p = mod.make_pulse(mod.SINC2, span_symbols=16, q=16)
    c = len(p.taps) // 2
    for k in range(1, 8):
        assert p.taps[c + 16 * k] == pytest.approx(0.0, abs=1e-12)
    assert p.taps[c] > 0


def test_rrc_beta0_is_sinc():
    p = mod.make_pulse(mod.RRC, beta=0.0, span_symbols=16, q=8)
    t = np.arange(-64, 65) / 8
    ref = np.sinc(t)
    ref /= math.sqrt(np.sum(ref**2) / 8)
    assert np.allclose(p.taps, ref, atol=1e-12)


def test_rrc_sqrt_nyquist_autocorr():
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=16, q=16)
    # independent numeric autocorrelation oracle
    phi = np.correlate(p.taps, p.taps, mode="full") / 16
    c = len(p.taps) - 1
    assert phi[c] == pytest.approx(1.0, rel=1e-12)
    assert abs(phi[c + 16]) < 1e-3
    assert abs(phi[c + 32]) < 1e-3


def test_pulse_taps_shape_and_symmetry():
    for kind in (mod.RRC, mod.SINC2):
        p = mod.make_pulse(kind, beta=0.3, span_symbols=10, q=12)
        assert len(p.taps) == 10 * 12 + 1
        assert np.allclose(p.taps, p.taps[::-1])
        assert p.energy == pytest.approx(1.0, rel=1e-12)


def test_rect_midpoint_convention():
    p = mod.make_pulse(mod.RECT, span_symbols=2, q=16)
    c = len(p.taps) // 2
    raw = p.taps / p.taps[c]
    assert raw[c + 7] == pytest.approx(1.0)
    assert raw[c + 8] == pytest.approx(0.5)  # exactly on the t=1/2 edge
    assert raw[c + 9] == pytest.approx(0.0)


def test_make_pulse_domain_errors():
    with pytest.raises(DomainError):
        mod.make_pulse(mod.RRC, beta=1.5)
    with pytest.raises(DomainError):
        mod.make_pulse(mod.RRC, beta=0.25, q=2)
    with pytest.raises(DomainError):
        mod.make_pulse(mod.RRC, beta=0.25, span_symbols=4)
    with pytest.raises(DomainError):
        mod.make_pulse("triangle")


# --- slerp -------------------------------------------------------------------

def test_slerp_endpoints():
    rng = np.random.default_rng(0)
    x, y = unit_vec(rng, 3), unit_vec(rng, 3)
    assert np.allclose(mod.slerp(x, y, 0.0), x, atol=1e-12)
    assert np.allclose(mod.slerp(x, y, 1.0), y, atol=1e-12)


def test_slerp_orthogonal_midpoint():
    e1 = np.array([1.0 + 0j, 0.0])
    e2 = np.array([0.0, 1.0 + 0j])
    mid = mod.slerp(e1, e2, 0.5)
    assert np.allclose(mid, (e1 + e2) / math.sqrt(2), atol=1e-12)


def test_slerp_midpoint_equidistant_unit():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = unit_vec(rng, 4), unit_vec(rng, 4)
        mid = mod.slerp(x, y, 0.5)
        assert np.linalg.norm(mid) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(mid - x) == pytest.approx(np.linalg.norm(mid - y), abs=1e-9)


def test_slerp_norm_and_geodesic_property_10k():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        n = int(rng.integers(1, 5))
        x, y = unit_vec(rng, n), unit_vec(rng, n)
        cos = float(np.clip(np.real(np.vdot(y, x)), -1, 1))
        theta = math.acos(cos)
        if theta > math.pi - 1e-3:
            continue
        tau = float(rng.uniform())
        z = mod.slerp(x, y, tau)
        assert abs(np.linalg.norm(z) - 1.0) < 1e-9
        ang = math.acos(float(np.clip(np.real(np.vdot(z, x)), -1, 1)))
        assert abs(ang - tau * theta) < 1e-7 * max(1.0, theta)


def test_slerp_antipodal_raises():
    x = np.array([1.0 + 0j])
    with pytest.raises(mod.AntipodalPointsError):
        mod.slerp(x, -x, 0.5)


def test_slerp_tiny_angle_renormalizes():
    x = np.array([1.0 + 0j, 0j])
    y = x + np.array([0, 1e-9 + 0j])
    y /= np.linalg.norm(y)
    z = mod.slerp(x, y, 0.3)
    assert np.linalg.norm(z) == pytest.approx(1.0, abs=1e-12)


def test_slerp_preconditions():
    x = np.array([1.0 + 0j])
    with pytest.raises(DomainError):
        mod.slerp(x, 2 * x, 0.5)
    with pytest.raises(DomainError):
        mod.slerp(x, 1j * x, 1.5)


# --- synthesis ----------------------------------------------------------------

def test_pam_single_symbol_rect_constant_norm():
    p = mod.make_pulse(mod.RECT, span_symbols=2, q=15)
    x = np.array([[0.6 + 0.8j]])
    w = mod.synthesize_pam(x, p)
    assert w.samples.shape == (1, 3 * 15)
    power = np.abs(w.samples[0]) ** 2
    occupied = power[power > 1e-20]
    assert len(occupied) == 15
    assert np.allclose(occupied, occupied[0], rtol=1e-12)


def test_pam_matched_filter_recovers_symbols():
    rng = np.random.default_rng(3)
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=16, q=16)
    x = np.stack([unit_vec(rng, 2), unit_vec(rng, 2)])
    w = mod.synthesize_pam(x, p)
    # independent matched-filter oracle: convolve with reversed taps, T-sample
    for ant in range(2):
        mf = np.convolve(w.samples[ant], p.taps[::-1]) / 16
        delay = 16 * 16  # span*Q: synthesis group delay + filter group delay
        got = mf[delay :: 16][:2]
        assert np.allclose(got, x[:, ant], atol=1e-3)


def test_pam_constant_sequence_matches_direct_convolution():
    rng = np.random.default_rng(4)
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    x0 = unit_vec(rng, 3)
    x = np.tile(x0, (5, 1))
    w = mod.synthesize_pam(x, p)
    k, q = 5, 8
    up = np.zeros((k * q, 3), dtype=complex)
    up[::q] = x
    for ant in range(3):
        ref = np.convolve(up[:, ant], p.taps)
        assert np.allclose(w.samples[ant], ref, atol=1e-14)


def test_t2_constant_sequence_is_double_rate_pam():
    rng = np.random.default_rng(5)
    ph = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=16, q=8)  # T/2 pulse
    x0 = unit_vec(rng, 2)
    x = np.tile(x0, (6, 1))
    w = mod.synthesize_t2(x, ph)
    assert w.oversampling_q == 16
    z = np.tile(x0 / math.sqrt(2), (12, 1))
    ref = mod.synthesize_pam(z, ph)  # PAM at the half-rate grid
    assert np.array_equal(w.samples, ref.samples)


def test_t2_receiver_energy_audit():
    # after matched filtering and T/2 sampling, data+interpolant energy per T
    # averages to Es within 1%
    rng = np.random.default_rng(6)
    ph = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=16, q=8)
    k = 400
    pts = np.stack([unit_vec(rng, 3) for _ in range(64)])
    x = pts[rng.integers(0, 64, k)]
    try:
        w = mod.synthesize_t2(x, ph)
    except mod.AntipodalPointsError:
        pytest.skip("random draw produced an antipodal pair")
    qh = 8
    energy = np.zeros(2 * k)
    for ant in range(3):
        mf = np.convolve(w.samples[ant], ph.taps[::-1]) / qh
        delay = 16 * qh
        samp = mf[delay :: qh][: 2 * k]
        energy[: len(samp)] += np.abs(samp) ** 2
    per_t = energy[20 : 2 * k - 20].reshape(-1, 2).sum(axis=1)
    assert per_t.mean() == pytest.approx(1.0, rel=0.01)


def test_t2_orthogonal_midpoint_direction():
    e1 = np.array([1.0 + 0j, 0j])
    e2 = np.array([0j, 1.0 + 0j])
    z = mod.interpolated_stream(np.stack([e1, e2]), 2)
    assert np.allclose(z[1], (e1 + e2) / math.sqrt(2), atol=1e-12)


def test_si_fip1_bit_identical_to_pam():
    rng = np.random.default_rng(7)
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    x = np.stack([unit_vec(rng, 2) for _ in range(20)])
    a = mod.synthesize_si(x, p, f_ip=1)
    b = mod.synthesize_pam(x, p)
    assert np.array_equal(a.samples, b.samples)


def test_si_constant_sequence_matches_direct_convolution():
    rng = np.random.default_rng(8)
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    x0 = unit_vec(rng, 2)
    x = np.tile(x0, (6, 1))
    w = mod.synthesize_si(x, p, f_ip=4)
    # constant sequence: every interpolant equals the data point, so the
    # waveform is PAM of the same constant at rate T/4
    up = np.zeros((6 * 8, 2), dtype=complex)
    up[::2] = x0
    for ant in range(2):
        ref = np.convolve(up[:, ant], p.taps)
        assert np.allclose(w.samples[ant], ref, atol=1e-14)


def test_si_requires_divisible_q():
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    x = np.ones((4, 1), dtype=complex)
    with pytest.raises(DomainError):
        mod.synthesize_si(x, p, f_ip=3)


def test_synthesis_scale_equivariance():
    rng = np.random.default_rng(9)
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    x = np.stack([unit_vec(rng, 2) for _ in range(10)])
    for synth in (
        lambda s: mod.synthesize_pam(s, p),
        lambda s: mod.synthesize_si(s, p, 4),
    ):
        a = synth(x)
        b = synth(3.0 * x)
        assert np.allclose(b.samples, 3.0 * a.samples, rtol=1e-12)


# --- autocorrelation table ------------------------------------------------------

def test_autocorr_phi0_is_energy():
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=16, q=16)
    t = mod.autocorr_table(p, f_ip=4)
    assert t.phi(0) == pytest.approx(1.0, rel=1e-12)


def test_autocorr_nyquist_offsets_small():
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=16, q=16)
    t = mod.autocorr_table(p)
    for k in range(1, 8):
        assert abs(t.phi_at(k)) < 1e-3


def test_autocorr_even_exact():
    p = mod.make_pulse(mod.SINC2, span_symbols=12, q=8)
    t = mod.autocorr_table(p)
    for k in range(0, 12 * 8 + 1, 7):
        assert t.phi(k) == t.phi(-k)
    assert t.phi(10**6) == 0.0


def test_autocorr_off_grid_rejected():
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    t = mod.autocorr_table(p)
    with pytest.raises(DomainError):
        t.phi_at(0.3)


# --- waveform dump ----------------------------------------------------------------

def test_waveform_dump_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    p = mod.make_pulse(mod.RRC, beta=0.25, span_symbols=8, q=8)
    x = np.stack([unit_vec(rng, 2) for _ in range(5)])
    w = mod.synthesize_pam(x, p)
    path = tmp_path / "w.bin"
    mod.save_waveform(w, path)
    back = mod.load_waveform(path)
    assert back.oversampling_q == w.oversampling_q
    assert back.symbols_k == w.symbols_k
    assert np.array_equal(back.samples, w.samples)
