import itertools
import math

import numpy as np
import pytest

from pskh import constellations as con
from pskh.core import ConstellationSet, DomainError


def brute_pairwise(pts):
    """Independent double-loop distance scan."""
    m = len(pts)
    out = np.full((m, m), np.inf)
    for i in range(m):
        for j in range(m):
            if i != j:
                out[i, j] = np.linalg.norm(pts[i] - pts[j])
    return out


# --- EQPA ------------------------------------------------------------------

def test_eqpa_m2_antipodal():
    c = con.gen_eqpa(1, 2)
    prof = con.distance_profile(c)
    assert prof.d_min == pytest.approx(2.0, rel=1e-12)


def test_eqpa_3_64_table_value():
    c = con.gen_eqpa(3, 64)
    prof = con.distance_profile(c)
    assert prof.d_min == pytest.approx(0.6611, abs=0.05)


def test_eqpa_deterministic():
    a = con.gen_eqpa(2, 16)
    b = con.gen_eqpa(2, 16)
    assert np.array_equal(a.points, b.points)


# --- kMC ---------------------------------------------------------------------

def test_kmc_circle_m4_square():
    c = con.gen_kmc(1, 4, n_samples=2000, seed=1)
    prof = con.distance_profile(c)
    assert prof.d_nb_avg == pytest.approx(math.sqrt(2), rel=0.05)


def test_kmc_seed_determinism():
    a = con.gen_kmc(2, 8, n_samples=1000, seed=9)
    b = con.gen_kmc(2, 8, n_samples=1000, seed=9)
    assert np.array_equal(a.points, b.points)
    c = con.gen_kmc(2, 8, n_samples=1000, seed=10)
    assert not np.array_equal(a.points, c.points)


def test_kmc_rejects_small_sample():
    with pytest.raises(DomainError):
        con.gen_kmc(1, 4, n_samples=100)


# --- PM ----------------------------------------------------------------------

def test_pm_two_points_antipodal():
    c = con.gen_pm(1, 2, steps=1500, seed=1)
    prof = con.distance_profile(c)
    assert prof.d_min == pytest.approx(2.0, abs=1e-3)


def test_pm_3_64_band():
    c = con.gen_pm(3, 64, seed=0)
    prof = con.distance_profile(c)
    assert prof.d_min >= 0.88


def test_pm_seed_determinism():
    a = con.gen_pm(2, 8, steps=200, seed=4)
    b = con.gen_pm(2, 8, steps=200, seed=4)
    assert np.array_equal(a.points, b.points)


# --- PA-PSK ------------------------------------------------------------------

def test_papsk_3_64_qpsk_per_antenna():
    c = con.gen_papsk(3, 64)
    assert con.papsk_orders(3, 64) == [4, 4, 4]
    prof = con.distance_profile(c)
    target = math.sqrt(2.0 / 3.0)
    assert prof.d_min == pytest.approx(target, abs=1e-3)
    assert prof.d_nb_avg == pytest.approx(target, abs=1e-3)


def test_papsk_1_4_is_qpsk():
    c = con.gen_papsk(1, 4)
    prof = con.distance_profile(c)
    assert prof.d_min == pytest.approx(math.sqrt(2), rel=1e-12)


def test_papsk_3_512_vs_brute_force_scan():
    c = con.gen_papsk(3, 512)
    assert con.papsk_orders(3, 512) == [8, 8, 8]
    d = brute_pairwise(c.points)
    scan_dmin = d.min()
    prof = con.distance_profile(c)
    assert prof.d_min == pytest.approx(scan_dmin, rel=1e-12)
    # adjacent 8-PSK step on one antenna of radius sqrt(1/3)
    assert scan_dmin == pytest.approx(math.sqrt(1 / 3) * math.sqrt(2 - math.sqrt(2)), abs=1e-9)
    assert scan_dmin == pytest.approx(0.4419, abs=1e-3)


def test_papsk_orders_uneven_split():
    # larger orders sit on lower antenna indices
    assert con.papsk_orders(3, 32) == [4, 4, 2]
    assert con.papsk_orders(2, 8) == [4, 2]
    assert con.papsk_orders(4, 256) == [4, 4, 4, 4]


def test_papsk_bit_flip_touches_one_antenna():
    c = con.gen_papsk(3, 64)
    rm = 6
    for label in (0, 13, 37, 63):
        for bit in range(rm):
            other = label ^ (1 << bit)
            diff = ~np.isclose(c.points[label], c.points[other])
            assert diff.sum() == 1


# --- invariants shared by generators ------------------------------------------

@pytest.mark.parametrize(
    "make",
    [
        lambda: con.gen_eqpa(2, 16, es=2.5),
        lambda: con.gen_kmc(2, 16, es=2.5, n_samples=3200, seed=3),
        lambda: con.gen_pm(2, 16, es=2.5, steps=300, seed=3),
        lambda: con.gen_papsk(2, 16, es=2.5),
    ],
)
def test_generator_norms(make):
    c = make()
    norms2 = np.sum(np.abs(c.points) ** 2, axis=1)
    assert np.allclose(norms2, 2.5, rtol=1e-9)


# --- distance profile ----------------------------------------------------------

def test_distance_profile_vs_oracle_random8():
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    c = ConstellationSet(pts, 1.0, "EXTERNAL")
    prof = con.distance_profile(c, n_nb=3)
    d = brute_pairwise(pts)
    assert prof.d_min == pytest.approx(d.min(), rel=1e-12)
    assert prof.d_nb_avg == pytest.approx(d.min(axis=1).mean(), rel=1e-12)
    for i in range(8):
        assert prof.nearest_neighbor_index[i] == np.argmin(d[i])
        assert prof.nearest_neighbor_index[i] != i
        expect = np.argsort(d[i], kind="stable")[:3]
        assert np.array_equal(prof.neighbor_tables[3][i], expect)
    # d_min equals the min over nearest-neighbor distances
    nn = prof.nearest_neighbor_index
    assert prof.d_min == pytest.approx(min(d[i, nn[i]] for i in range(8)))
    assert prof.d_min <= prof.d_nb_avg


def test_distance_profile_scales_homogeneously():
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    a = con.distance_profile(ConstellationSet(pts, 1.0, "EXTERNAL"))
    b = con.distance_profile(ConstellationSet(2.0 * pts, 4.0, "EXTERNAL"))
    assert b.d_min == pytest.approx(2 * a.d_min, rel=1e-12)
    assert b.d_nb_avg == pytest.approx(2 * a.d_nb_avg, rel=1e-12)


# --- hypersymbol partition ------------------------------------------------------

def _random_set(m, n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return ConstellationSet(pts, 1.0, "EXTERNAL")


def test_partition_singletons():
    c = _random_set(8, 2, 7)
    p = con.hypersymbol_partition(c, 8)
    assert p.n_subsets == 8
    assert all(v == math.inf for v in p.intra_subset_dmin)


def test_partition_single_subset():
    c = _random_set(8, 2, 7)
    p = con.hypersymbol_partition(c, 1)
    prof = con.distance_profile(c)
    assert p.intra_subset_dmin[0] == pytest.approx(prof.d_min, rel=1e-12)


def test_partition_must_divide():
    c = _random_set(8, 2, 7)
    with pytest.raises(DomainError):
        con.hypersymbol_partition(c, 3)


def test_partition_m8_k2_matches_exhaustive():
    c = _random_set(8, 2, 11)
    d = brute_pairwise(c.points)

    def intra(sub):
        vals = [d[i, j] for i, j in itertools.combinations(sub, 2)]
        return min(vals)

    best = -1.0
    for half in itertools.combinations(range(8), 4):
        if 0 not in half:
            continue  # each split counted once
        other = tuple(i for i in range(8) if i not in half)
        best = max(best, min(intra(half), intra(other)))

    p = con.hypersymbol_partition(c, 2, seed=0)
    ours = min(p.intra_subset_dmin)
    assert ours == pytest.approx(best, rel=1e-12)


def test_partition_subset_of_covers_everything():
    c = _random_set(16, 2, 3)
    p = con.hypersymbol_partition(c, 4)
    mapping = p.subset_of()
    assert sorted(np.concatenate([list(s) for s in p.subsets])) == list(range(16))
    for j, sub in enumerate(p.subsets):
        assert all(mapping[i] == j for i in sub)
        assert len(sub) == 4


# --- file format ------------------------------------------------------------------

def test_constellation_roundtrip(tmp_path):
    c = con.gen_papsk(3, 64)
    path = tmp_path / "c.pskh"
    con.save_constellation(c, path)
    back = con.load_constellation(path)
    assert back.generator == "PAPSK"
    assert back.symbol_energy == pytest.approx(1.0)
    assert np.allclose(back.points, c.points, rtol=0, atol=1e-16)
    header = path.read_text().splitlines()[0]
    assert header.startswith("PSKH v1 n=3 M=64 ")


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.pskh"
    path.write_text("WRONG v1 n=1 M=2 Es=1 gen=EXTERNAL\n1 0\n-1 0\n")
    with pytest.raises(DomainError):
        con.load_constellation(path)


def test_load_validates_invariants(tmp_path):
    path = tmp_path / "off.pskh"
    path.write_text("PSKH v1 n=1 M=2 Es=1 gen=EXTERNAL\n1 0\n-1.1 0\n")
    with pytest.raises(DomainError):
        con.load_constellation(path)
