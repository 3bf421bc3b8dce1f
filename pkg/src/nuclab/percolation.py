"""3D percolation on the simple cubic lattice.

Bond percolation is the primary mode (each of the 3 forward bonds per site
open with probability p); site percolation sits behind a flag.  The lattice
is fully open (no bonds leave any face) so the x = 0 and x = Lx-1 faces are
distinguishable for spanning detection.  Cluster counts n_s are reported per
lattice site.
"""

from dataclasses import dataclass

import numpy as np

from .exponents import EventRecord
from .lattice import OPEN, PERIODIC, RngStream, label_from_edges, validate_dims

_AXES = 3


def _generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def plus_neighbor_table(dims, boundary=OPEN) -> np.ndarray:
    """(N, 3) flat indices of the +x, +y, +z neighbors; -1 where the bond leaves
    an open lattice."""
    dims = validate_dims(dims)
    lx, ly, lz = dims
    n = lx * ly * lz
    x, y, z = np.unravel_index(np.arange(n), dims)
    out = np.empty((n, _AXES), dtype=np.int64)
    for axis, (xx, yy, zz) in enumerate(((x + 1, y, z), (x, y + 1, z), (x, y, z + 1))):
        if boundary == PERIODIC:
            out[:, axis] = np.ravel_multi_index((xx % lx, yy % ly, zz % lz), dims)
        else:
            ok = (xx < lx) & (yy < ly) & (zz < lz)
            flat = np.ravel_multi_index(
                (np.minimum(xx, lx - 1), np.minimum(yy, ly - 1), np.minimum(zz, lz - 1)),
                dims)
            out[:, axis] = np.where(ok, flat, -1)
    return out


@dataclass
class BondConfig:
    dims: tuple
    p: float
    open_bonds: np.ndarray  # (N, 3) bool, +x/+y/+z per site
    boundary: str = OPEN

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz

    @property
    def n_bonds(self) -> int:
        """Number of bonds that exist on this lattice (not the open ones)."""
        return int((plus_neighbor_table(self.dims, self.boundary) >= 0).sum())


@dataclass
class SiteConfig:
    dims: tuple
    p: float
    occupied: np.ndarray  # (N,) bool
    boundary: str = OPEN

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz


def bond_uniforms(dims, rng) -> np.ndarray:
    """One uniform per potential bond; thresholding them at p gives a coupled
    family of configs, monotone in p."""
    dims = validate_dims(dims)
    n = dims[0] * dims[1] * dims[2]
    return _generator(rng).random((n, _AXES))


def config_from_uniforms(dims, uniforms, p, boundary=OPEN) -> BondConfig:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"bond probability {p} outside [0, 1]")
    exists = plus_neighbor_table(dims, boundary) >= 0
    return BondConfig(validate_dims(dims), float(p), (uniforms < p) & exists, boundary)


def sample_config(dims, p, rng, boundary=OPEN) -> BondConfig:
    """Each existing bond open independently with probability p."""
    return config_from_uniforms(dims, bond_uniforms(dims, rng), p, boundary)


def sample_site_config(dims, p, rng, boundary=OPEN) -> SiteConfig:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"site probability {p} outside [0, 1]")
    dims = validate_dims(dims)
    n = dims[0] * dims[1] * dims[2]
    return SiteConfig(dims, float(p), _generator(rng).random(n) < p, boundary)


def config_edges(config):
    """(ea, eb) endpoint arrays of the joined pairs of the configuration."""
    plus = plus_neighbor_table(config.dims, config.boundary)
    if isinstance(config, BondConfig):
        src, axis = np.nonzero(config.open_bonds & (plus >= 0))
        return src.astype(np.int64), plus[src, axis]
    occ = config.occupied
    src, axis = np.nonzero(occ[:, None] & (plus >= 0))
    dst = plus[src, axis]
    keep = occ[dst]
    return src[keep].astype(np.int64), dst[keep]


def _face_indices(dims):
    lx, ly, lz = dims
    face0 = np.arange(ly * lz, dtype=np.int64)
    face1 = face0 + (lx - 1) * ly * lz
    return face0, face1


@dataclass
class PercoStats:
    """Cluster statistics of one configuration; n_s is per lattice site."""

    n_sites: int
    sizes: np.ndarray        # distinct finite-cluster sizes
    counts: np.ndarray       # number of clusters of each size
    p_inf: float
    second_moment: float
    spanning: bool
    spanning_size: int = 0
    largest: int = 0

    @property
    def n_s(self) -> dict:
        return {int(s): c / self.n_sites for s, c in zip(self.sizes, self.counts)}


def _cluster_sizes_and_spanning(config):
    """Labels restricted to active elements, their sizes, and spanning labels."""
    ea, eb = config_edges(config)
    face0, face1 = _face_indices(config.dims)
    if isinstance(config, BondConfig):
        part = label_from_edges(config.n_sites, ea, eb)
        lab0, lab1 = part.labels[face0], part.labels[face1]
    else:
        occ = config.occupied
        occ_idx = np.nonzero(occ)[0]
        compact = np.full(config.n_sites, -1, dtype=np.int64)
        compact[occ_idx] = np.arange(occ_idx.size)
        part = label_from_edges(occ_idx.size, compact[ea], compact[eb])
        lab0 = part.labels[compact[face0[occ[face0]]]]
        lab1 = part.labels[compact[face1[occ[face1]]]]
    span_labels = np.intersect1d(lab0, lab1)
    return part, span_labels


def spanning_cluster(config):
    """(spanning, cluster label or None) along the x axis."""
    if config.boundary != OPEN:
        raise ValueError("spanning detection requires an open boundary in x")
    _part, span = _cluster_sizes_and_spanning(config)
    if span.size:
        return True, int(span[0])
    return False, None


def compute_stats(config, exclude_spanning=True) -> PercoStats:
    part, span_labels = _cluster_sizes_and_spanning(config)
    n = config.n_sites
    label_vals = np.fromiter(part.cluster_sizes.keys(), dtype=np.int64,
                             count=len(part.cluster_sizes))
    size_vals = np.fromiter(part.cluster_sizes.values(), dtype=np.int64,
                            count=len(part.cluster_sizes))
    spanning = span_labels.size > 0
    span_mass = int(size_vals[np.isin(label_vals, span_labels)].sum()) if spanning else 0
    largest = int(size_vals.max()) if size_vals.size else 0
    if exclude_spanning and spanning:
        keep = ~np.isin(label_vals, span_labels)
        size_vals = size_vals[keep]
    sizes, counts = np.unique(size_vals, return_counts=True) if size_vals.size else \
        (np.empty(0, np.int64), np.empty(0, np.int64))
    second_moment = float(np.sum(sizes.astype(np.float64) ** 2 * counts) / n)
    p_inf = span_mass / n if spanning else 0.0
    return PercoStats(n_sites=n, sizes=sizes, counts=counts, p_inf=p_inf,
                      second_moment=second_moment, spanning=spanning,
                      spanning_size=span_mass, largest=largest)


@dataclass
class ScanRow:
    p: float
    spanning_prob: float
    spanning_prob_se: float
    p_inf: float
    p_inf_se: float
    second_moment: float
    second_moment_se: float
    largest: float
    largest_se: float


@dataclass
class ScanResult:
    rows: list
    p_c: float

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return float(values.mean()) if values.size else 0.0, 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def threshold_scan(dims, p_grid, n_samples, rng: RngStream, mode="bond",
                   exclude_spanning=True) -> ScanResult:
    """Monte Carlo estimates along a sorted p grid, plus the interpolated
    p where the spanning probability crosses 0.5."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    p_grid = np.asarray(p_grid, dtype=np.float64)
    if np.any(np.diff(p_grid) < 0):
        raise ValueError("p_grid must be sorted ascending")
    rows = []
    for ip, p in enumerate(p_grid):
        span, pinf, s2, largest = [], [], [], []
        for s in range(n_samples):
            stream = rng.substream(ip * n_samples + s)
            if mode == "bond":
                config = sample_config(dims, p, stream)
            elif mode == "site":
                config = sample_site_config(dims, p, stream)
            else:
                raise ValueError(f"unknown percolation mode {mode!r}")
            stats = compute_stats(config, exclude_spanning=exclude_spanning)
            span.append(1.0 if stats.spanning else 0.0)
            pinf.append(stats.p_inf)
            s2.append(stats.second_moment)
            largest.append(stats.largest)
        f = float(np.mean(span))
        f_se = float(np.sqrt(f * (1 - f) / n_samples))
        rows.append(ScanRow(float(p), f, f_se, *_mean_se(pinf), *_mean_se(s2),
                            *_mean_se(largest)))
    return ScanResult(rows, _crossing(p_grid, np.array([r.spanning_prob for r in rows])))


def _crossing(p_grid, probs, level=0.5):
    for i in range(len(p_grid) - 1):
        lo, hi = probs[i], probs[i + 1]
        if lo <= level < hi or (lo < level <= hi):
            if hi == lo:
                return float(p_grid[i])
            t = (level - lo) / (hi - lo)
            return float(p_grid[i] + t * (p_grid[i + 1] - p_grid[i]))
    return float("nan")


def sample_events(dims, p, n_configs, rng: RngStream, mode="bond",
                  exclude_spanning=True, stream_offset=0):
    """EventRecords (finite-cluster sizes per config) for the fitting pipeline."""
    events = []
    for s in range(n_configs):
        stream = rng.substream(stream_offset + s)
        config = sample_config(dims, p, stream) if mode == "bond" \
            else sample_site_config(dims, p, stream)
        stats = compute_stats(config, exclude_spanning=exclude_spanning)
        sizes = np.repeat(stats.sizes, stats.counts)
        events.append(EventRecord(sizes, control=float(p)))
    return events


def tau_from_beta_gamma(beta: float, gamma: float) -> float:
    """tau = 2 + beta/(beta + gamma)."""
    _check_beta_gamma(beta, gamma)
    return 2.0 + beta / (beta + gamma)


def sigma_from_beta_gamma(beta: float, gamma: float) -> float:
    """sigma = 1/(beta + gamma)."""
    _check_beta_gamma(beta, gamma)
    return 1.0 / (beta + gamma)


def _check_beta_gamma(beta, gamma):
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if beta + gamma == 0:
        raise ValueError("beta + gamma must be nonzero")
