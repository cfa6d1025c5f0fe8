"""Constellation generators on the hypersphere and their distance structure.

All four generators work on the real sphere S^(2n-1); real coordinates are
paired into complex antenna amplitudes as (re_1, im_1, ..., re_n, im_n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .core import ConstellationSet, DomainError, _pairwise_sq_dists, make_rng

__all__ = [
    "DistanceProfile",
    "HypersymbolPartition",
    "gen_eqpa",
    "gen_kmc",
    "gen_pm",
    "gen_papsk",
    "distance_profile",
    "hypersymbol_partition",
    "save_constellation",
    "load_constellation",
]


@dataclass(frozen=True)
class DistanceProfile:
    """Pairwise distance summary of a constellation.

    neighbor_tables maps a neighbor count to an (M, count) index array whose
    row i holds the nearest neighbors of point i, closest first, ties broken
    by lower index.
    """

    d_min: float
    d_nb_avg: float
    nearest_neighbor_index: np.ndarray  # (M,) int
    neighbor_tables: dict[int, np.ndarray]


@dataclass(frozen=True)
class HypersymbolPartition:
    """Disjoint index subsets covering 0..M-1, sized M/K each."""

    subsets: tuple[tuple[int, ...], ...]
    intra_subset_dmin: tuple[float, ...]

    @property
    def n_subsets(self) -> int:
        return len(self.subsets)

    def subset_of(self) -> np.ndarray:
        """Map point index -> subset index."""
        m = sum(len(s) for s in self.subsets)
        out = np.empty(m, dtype=np.int64)
        for j, sub in enumerate(self.subsets):
            out[list(sub)] = j
        return out


def _complexify(real_pts: np.ndarray) -> np.ndarray:
    """(M, 2n) real -> (M, n) complex with (re, im) coordinate pairing."""
    return real_pts[:, 0::2] + 1j * real_pts[:, 1::2]


def _realify(pts: np.ndarray) -> np.ndarray:
    m, n = pts.shape
    out = np.empty((m, 2 * n))
    out[:, 0::2] = pts.real
    out[:, 1::2] = pts.imag
    return out


# ---------------------------------------------------------------------------
# equal-area partitioning (recursive zonal construction)

def _area_sphere(d: int) -> float:
    # surface area of the unit sphere S^d embedded in R^(d+1)
    return 2.0 * math.pi ** ((d + 1) / 2) / special.gamma((d + 1) / 2)


def _area_cap(d: int, theta: float) -> float:
    if d == 1:
        return 2.0 * theta
    coeff = _area_sphere(d - 1)
    val, _ = integrate.quad(lambda p: math.sin(p) ** (d - 1), 0.0, theta)
    return coeff * val


def _cap_colat(d: int, area: float) -> float:
    total = _area_sphere(d)
    if area <= 0.0:
        return 0.0
    if area >= total:
        return math.pi
    return optimize.brentq(lambda t: _area_cap(d, t) - area, 0.0, math.pi, xtol=1e-14)


def _round_preserving_sum(ideal: list[float]) -> list[int]:
    out = []
    carry = 0.0
    for y in ideal:
        m = int(round(y + carry))
        carry += y - m
        out.append(m)
    return out


def _eq_point_set(d: int, n: int) -> np.ndarray:
    """Centers of a recursive zonal equal-area partition of S^d, shape (n, d+1)."""
    if n == 1:
        p = np.zeros((1, d + 1))
        p[0, -1] = 1.0
        return p
    if d == 1:
        ang = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if n == 2:
        p = np.zeros((2, d + 1))
        p[0, -1] = 1.0
        p[1, -1] = -1.0
        return p
    v_region = _area_sphere(d) / n
    c_polar = _cap_colat(d, v_region)
    a_ideal = v_region ** (1.0 / d)
    n_collars = max(1, int(round((math.pi - 2 * c_polar) / a_ideal)))
    a_fit = (math.pi - 2 * c_polar) / n_collars
    ideal = []
    prev = _area_cap(d, c_polar)
    for i in range(1, n_collars + 1):
        cur = _area_cap(d, c_polar + i * a_fit)
        ideal.append((cur - prev) / v_region)
        prev = cur
    counts = _round_preserving_sum(ideal)
    # zone boundaries re-fitted so every zone holds an integer region count
    cum = np.cumsum([1] + counts)
    colats = [_cap_colat(d, c * v_region) for c in cum]
    blocks = [np.concatenate([np.zeros(d), [1.0]])[None, :]]
    for i, m_i in enumerate(counts):
        if m_i == 0:
            continue
        theta = 0.5 * (colats[i] + colats[i + 1])
        sub = _eq_point_set(d - 1, m_i)
        blocks.append(
            np.concatenate(
                [math.sin(theta) * sub, math.cos(theta) * np.ones((m_i, 1))], axis=1
            )
        )
    blocks.append(np.concatenate([np.zeros(d), [-1.0]])[None, :])
    return np.vstack(blocks)


def gen_eqpa(n: int, m: int, es: float = 1.0) -> ConstellationSet:
    """Equal-area partition constellation: region centers on S^(2n-1).

    Deterministic; no randomness involved.
    """
    _check_gen_args(n, m, es)
    real = _eq_point_set(2 * n - 1, m)
    real *= math.sqrt(es) / np.linalg.norm(real, axis=1, keepdims=True)
    return ConstellationSet(_complexify(real), es, "EQPA")


# ---------------------------------------------------------------------------
# spherical k-means

def gen_kmc(
    n: int,
    m: int,
    es: float = 1.0,
    n_samples: int | None = None,
    max_iters: int = 500,
    seed: int = 0,
) -> ConstellationSet:
    """Centroids of spherical k-means over uniform samples of S^(2n-1).

    Initial centroids are chosen by greedy farthest-point selection from the
    sample cloud. An emptied cluster is re-seeded from the sample farthest
    from its assigned centroid (documented behavior, not an error).
    """
    _check_gen_args(n, m, es)
    if n_samples is None:
        n_samples = 200 * m
    if n_samples < 100 * m:
        raise DomainError(f"n_samples must be >= 100*M, got {n_samples}")
    rng = make_rng(seed)
    dim = 2 * n
    x = rng.standard_normal((n_samples, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)

    # farthest-point init
    idx = [0]
    closest = 1.0 - x @ x[0]
    for _ in range(m - 1):
        j = int(np.argmax(closest))
        idx.append(j)
        closest = np.minimum(closest, 1.0 - x @ x[j])
    c = x[idx].copy()

    assign = np.full(n_samples, -1)
    for _ in range(max_iters):
        new_assign = np.argmax(x @ c.T, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(m):
            members = assign == j
            if not members.any():
                far = int(np.argmin(np.einsum("ij,ij->i", x, c[assign])))
                c[j] = x[far]
                assign[far] = j
                members = assign == j
            mean = x[members].sum(axis=0)
            c[j] = mean / np.linalg.norm(mean)
    c *= math.sqrt(es)
    return ConstellationSet(_complexify(c), es, "KMC")


# ---------------------------------------------------------------------------
# potential (Riesz energy) minimization

def gen_pm(
    n: int,
    m: int,
    es: float = 1.0,
    riesz_exponent: float = 6.0,
    steps: int = 5000,
    step_size: float = 0.05,
    seed: int = 0,
) -> ConstellationSet:
    """Repulsion-optimized constellation by gradient descent on Riesz energy.

    Minimizes sum_{i<j} ||a_i - a_j||^(-riesz_exponent) on the sphere, with
    per-point normalized steps annealed by a 0.999 decay, projecting back to
    the sphere after every step. Returns the lowest-energy iterate.
    """
    _check_gen_args(n, m, es)
    if riesz_exponent <= 0:
        raise DomainError("riesz_exponent must be positive")
    if steps < 1:
        raise DomainError("steps must be >= 1")
    s = float(riesz_exponent)
    rng = make_rng(seed)
    a = rng.standard_normal((m, 2 * n))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    best, best_energy = a.copy(), np.inf
    eta = step_size
    for _ in range(steps):
        gram = a @ a.T
        d2 = np.clip(2.0 - 2.0 * gram, 0.0, None)
        np.fill_diagonal(d2, np.inf)
        if float(d2.min()) < 1e-24:
            # numerically overlapping pair: jitter and continue
            a += 1e-8 * rng.standard_normal(a.shape)
            a /= np.linalg.norm(a, axis=1, keepdims=True)
            continue
        energy = 0.5 * float(np.sum(d2 ** (-s / 2.0), where=np.isfinite(d2)))
        if energy < best_energy:
            best_energy, best = energy, a.copy()
        w = d2 ** (-(s + 2.0) / 2.0)
        np.fill_diagonal(w, 0.0)
        push = s * (w.sum(axis=1, keepdims=True) * a - w @ a)  # -gradient
        push /= np.linalg.norm(push, axis=1, keepdims=True) + 1e-30
        a = a + eta * push
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        eta *= 0.999
    best *= math.sqrt(es)
    return ConstellationSet(_complexify(best), es, "PM")


# ---------------------------------------------------------------------------
# per-antenna PSK

def papsk_orders(n: int, m: int) -> list[int]:
    """Per-antenna PSK orders: powers of two, product M, as equal as possible,
    larger orders on lower antenna indices."""
    rm = m.bit_length() - 1
    base, extra = divmod(rm, n)
    return [2 ** (base + (1 if i < extra else 0)) for i in range(n)]


def gen_papsk(n: int, m: int, es: float = 1.0) -> ConstellationSet:
    """Independent PSK per antenna, each carrying energy Es/n.

    Labels enumerate the per-antenna phase indices in row-major order
    (antenna 0 owns the most significant bits), so flipping one label bit
    changes exactly one antenna's phase.
    """
    _check_gen_args(n, m, es)
    orders = papsk_orders(n, m)
    if any(o < 2 for o in orders):
        raise DomainError(f"M={m} cannot fill {n} antennas with PSK orders >= 2")
    radius = math.sqrt(es / n)
    pts = np.empty((m, n), dtype=np.complex128)
    for label in range(m):
        rem = label
        for ant in range(n - 1, -1, -1):
            rem, phase_idx = divmod(rem, orders[ant])
            pts[label, ant] = radius * np.exp(2j * math.pi * phase_idx / orders[ant])
    return ConstellationSet(pts, es, "PAPSK")


def _check_gen_args(n: int, m: int, es: float) -> None:
    if n < 1:
        raise DomainError("antenna count must be >= 1")
    if m < 2 or m & (m - 1) != 0:
        raise DomainError(f"M={m} must be a power of two >= 2")
    if es <= 0:
        raise DomainError("Es must be positive")


# ---------------------------------------------------------------------------
# distance structure

def distance_profile(a: ConstellationSet, n_nb: int = 1) -> DistanceProfile:
    """Exact O(M^2) pairwise distances, nearest neighbors, neighbor tables."""
    pts = a.points
    m = a.size
    if m < 2:
        raise DomainError("need at least two points")
    if not 1 <= n_nb <= m - 1:
        raise DomainError(f"n_nb must be in [1, M-1], got {n_nb}")
    d2 = _pairwise_sq_dists(pts)
    np.fill_diagonal(d2, np.inf)
    d = np.sqrt(d2)
    nn_dist = d.min(axis=1)
    # stable sort: equal distances resolve to the lower index
    order = np.argsort(d, axis=1, kind="stable")
    table = order[:, :n_nb].astype(np.int64)
    return DistanceProfile(
        d_min=float(nn_dist.min()),
        d_nb_avg=float(nn_dist.mean()),
        nearest_neighbor_index=table[:, 0].copy(),
        neighbor_tables={n_nb: table},
    )


def neighbor_table(points: np.ndarray, n_nb: int) -> np.ndarray:
    """(M, n_nb) nearest-neighbor indices for an arbitrary complex point set."""
    d2 = _pairwise_sq_dists(points)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :n_nb].astype(np.int64)


def _intra_dmin(d: np.ndarray, subset: list[int]) -> float:
    if len(subset) < 2:
        return math.inf
    sub = d[np.ix_(subset, subset)]
    iu = np.triu_indices(len(subset), 1)
    return float(sub[iu].min())


def hypersymbol_partition(
    a: ConstellationSet, k: int, seed: int = 0
) -> HypersymbolPartition:
    """Partition labels into K equal subsets maximizing the worst intra-subset
    minimum distance (greedy max-min seeding plus pairwise-swap local search).
    """
    m = a.size
    if k < 1 or m % k != 0:
        raise DomainError(f"K={k} must divide M={m}")
    size = m // k
    d2 = _pairwise_sq_dists(a.points)
    np.fill_diagonal(d2, np.inf)
    d = np.sqrt(d2)

    if k == m:
        subsets = tuple((i,) for i in range(m))
        return HypersymbolPartition(subsets, tuple(math.inf for _ in range(m)))
    if k == 1:
        prof = distance_profile(a)
        return HypersymbolPartition((tuple(range(m)),), (prof.d_min,))

    # seed with K mutually far points (greedy farthest-point over the set)
    seeds = [0]
    closest = d[0].copy()
    closest[0] = -math.inf
    for _ in range(k - 1):
        j = int(np.argmax(np.where(np.isfinite(closest), closest, -math.inf)))
        seeds.append(j)
        closest = np.minimum(closest, d[j])
        closest[j] = -math.inf
    subsets = [[s] for s in seeds]
    remaining = [i for i in range(m) if i not in set(seeds)]

    # greedy assignment: each point goes where it keeps the intra d_min largest,
    # subject to the equal-size cap
    for i in remaining:
        best_j, best_val = -1, -math.inf
        for j in range(k):
            if len(subsets[j]) >= size:
                continue
            val = float(d[i, subsets[j]].min())
            if val > best_val:
                best_val, best_j = val, j
        subsets[best_j].append(i)

    # pairwise-swap local search on the max-min objective
    def objective(subs):
        return min(_intra_dmin(d, s) for s in subs)

    current = objective(subsets)
    improved = True
    while improved:
        improved = False
        for j1 in range(k):
            for j2 in range(j1 + 1, k):
                for p1 in range(size):
                    for p2 in range(size):
                        subsets[j1][p1], subsets[j2][p2] = (
                            subsets[j2][p2],
                            subsets[j1][p1],
                        )
                        val = objective(subsets)
                        if val > current + 1e-15:
                            current = val
                            improved = True
                        else:
                            subsets[j1][p1], subsets[j2][p2] = (
                                subsets[j2][p2],
                                subsets[j1][p1],
                            )
    subsets = tuple(tuple(sorted(s)) for s in subsets)
    return HypersymbolPartition(subsets, tuple(_intra_dmin(d, list(s)) for s in subsets))


# ---------------------------------------------------------------------------
# constellation file format

def save_constellation(a: ConstellationSet, path) -> None:
    """Text format: header line, then M lines of 2n floats (re/im interleaved)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"PSKH v1 n={a.n_antennas} M={a.size} Es={a.symbol_energy:.17g} "
            f"gen={a.generator}\n"
        )
        for row in a.points:
            vals = []
            for z in row:
                vals.append(f"{z.real:.17g}")
                vals.append(f"{z.imag:.17g}")
            fh.write(" ".join(vals) + "\n")


def load_constellation(path) -> ConstellationSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = header.split()
        if len(fields) != 6 or fields[0] != "PSKH" or fields[1] != "v1":
            raise DomainError(f"bad constellation header: {header!r}")
        kv = dict(f.split("=", 1) for f in fields[2:])
        n = int(kv["n"])
        m = int(kv["M"])
        es = float(kv["Es"])
        gen = kv["gen"]
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = [float(v) for v in line.split()]
            if len(vals) != 2 * n:
                raise DomainError(f"expected {2*n} floats per line, got {len(vals)}")
            arr = np.array(vals)
            rows.append(arr[0::2] + 1j * arr[1::2])
    if len(rows) != m:
        raise DomainError(f"expected {m} points, found {len(rows)}")
    return ConstellationSet(np.array(rows), es, gen)
