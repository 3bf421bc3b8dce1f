"""Spin-1 (S in {-1, 0, +1}) cubic-lattice Monte Carlo with a heat-bath rule.

Energy is E = -J * sum_<ij> S_i S_j - h * sum_i S_i with nearest-neighbor
pairs counted once.  A move proposes one of the two other spin values at a
random site and accepts with probability 1/(1 + exp(dH/T)), which satisfies
detailed balance for the symmetric two-candidate proposal.

Sweeps consume pre-generated random arrays (site indices, candidate bits,
acceptance uniforms), so trajectories are reproducible per stream and
identical between the numba and fallback paths.
"""

from dataclasses import dataclass, field

import numpy as np

from ._accel import jit
from .exponents import EventRecord
from .lattice import PERIODIC, RngStream, label_from_edges, neighbor_table, validate_dims

SPIN_VALUES = (-1, 0, 1)

# candidate table: row = old spin + 1, columns = the two other spin values
_CANDIDATES = np.array([[0, 1], [-1, 1], [-1, 0]], dtype=np.int8)


@dataclass
class SpinLattice:
    dims: tuple
    spins: np.ndarray           # flat int8 in {-1, 0, +1}
    J: float = 1.0
    h: float = 0.0
    T: float = 1.0
    boundary: str = PERIODIC
    _nbr: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.dims = validate_dims(self.dims)
        if self.spins.dtype != np.int8:
            self.spins = self.spins.astype(np.int8)
        if not np.isin(self.spins, SPIN_VALUES).all():
            raise ValueError("spins must take values in {-1, 0, +1}")
        if self._nbr is None:
            self._nbr = neighbor_table(self.dims, self.boundary)

    @classmethod
    def random(cls, dims, rng, J=1.0, h=0.0, T=1.0, boundary=PERIODIC):
        dims = validate_dims(dims)
        n = dims[0] * dims[1] * dims[2]
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        spins = gen.integers(-1, 2, size=n).astype(np.int8)
        return cls(dims, spins, J, h, T, boundary)

    @classmethod
    def aligned(cls, dims, value=1, J=1.0, h=0.0, T=1.0, boundary=PERIODIC):
        dims = validate_dims(dims)
        n = dims[0] * dims[1] * dims[2]
        return cls(dims, np.full(n, value, dtype=np.int8), J, h, T, boundary)

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz

    @property
    def magnetization(self) -> int:
        return int(self.spins.sum())


@jit
def _total_energy_kernel(spins, nbr, J, h):
    e_bond = 0.0
    e_field = 0.0
    n = spins.shape[0]
    for i in range(n):
        s = spins[i]
        e_field += s
        for col in (0, 2, 4):  # +x, +y, +z: each pair once
            j = nbr[i, col]
            if j >= 0:
                e_bond += s * spins[j]
    return -J * e_bond - h * e_field


def total_energy(lattice: SpinLattice) -> float:
    """E = -J sum_<ij> S_i S_j - h sum_i S_i, nearest-neighbor pairs once."""
    return float(_total_energy_kernel(lattice.spins, lattice._nbr,
                                      float(lattice.J), float(lattice.h)))


def delta_energy(lattice: SpinLattice, site: int, new_spin: int) -> float:
    """Energy change of setting one site to new_spin."""
    if new_spin not in SPIN_VALUES:
        raise ValueError("new_spin must be in {-1, 0, +1}")
    row = lattice._nbr[site]
    nsum = int(lattice.spins[row[row >= 0]].sum())
    ds = new_spin - int(lattice.spins[site])
    return ds * (-lattice.J * nsum - lattice.h)


@jit
def _acceptance_probability(dh, T):
    x = dh / T
    if x >= 0.0:
        if x > 745.0:
            return 0.0
        y = np.exp(-x)
        return y / (1.0 + y)
    if x < -745.0:
        return 1.0
    y = np.exp(x)
    return 1.0 - y / (1.0 + y)


def acceptance_probability(delta_h: float, temperature: float) -> float:
    """Heat-bath acceptance p = e^(-dH/T) / (1 + e^(-dH/T)).

    Computed so that p(dH) + p(-dH) == 1 exactly in floating point.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return float(_acceptance_probability(float(delta_h), float(temperature)))


@jit
def _sweep_kernel(spins, nbr, J, h, T, sites, cand_bits, uniforms, candidates):
    accepted = 0
    for k in range(sites.shape[0]):
        i = sites[k]
        s_old = spins[i]
        s_new = candidates[s_old + 1, cand_bits[k]]
        nsum = 0
        for col in range(6):
            j = nbr[i, col]
            if j >= 0:
                nsum += spins[j]
        dh = (s_new - s_old) * (-J * nsum - h)
        if uniforms[k] < _acceptance_probability(dh, T):
            spins[i] = s_new
            accepted += 1
    return accepted


def sweep(lattice: SpinLattice, rng, n_steps=None) -> float:
    """N single-site heat-bath steps (one sweep); returns the acceptance rate."""
    if lattice.T <= 0:
        raise ValueError("temperature must be positive for dynamics")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n = lattice.n_sites if n_steps is None else int(n_steps)
    sites = gen.integers(0, lattice.n_sites, size=n)
    bits = gen.integers(0, 2, size=n)
    uniforms = gen.random(n)
    accepted = _sweep_kernel(lattice.spins, lattice._nbr, float(lattice.J),
                             float(lattice.h), float(lattice.T),
                             sites, bits, uniforms, _CANDIDATES)
    return accepted / n


def heat_bath_step(lattice: SpinLattice, rng) -> bool:
    """One random-site heat-bath update; True if the move was accepted."""
    return sweep(lattice, rng, n_steps=1) > 0


@dataclass
class ThermoSample:
    T: float
    mean_magnetization: float
    mean_magnetization_se: float
    susceptibility: float
    susceptibility_se: float
    energy_per_site: float
    accept_rate: float
    n_sweeps_measured: int
    n_sweeps_discarded: int
    mean_abs_magnetization: float = 0.0
    mean_largest_domain: float = 0.0


def _blocked_se(values, n_blocks=20):
    values = np.asarray(values, dtype=np.float64)
    n_blocks = min(n_blocks, values.size)
    if n_blocks < 2:
        return 0.0
    blocks = np.array_split(values, n_blocks)
    means = np.array([b.mean() for b in blocks])
    return float(means.std(ddof=1) / np.sqrt(n_blocks))


def measure_at(dims, T, rng: RngStream, J=1.0, h=0.0, sweeps_discard=1000,
               sweeps_measure=10_000, init="aligned", n_blocks=20,
               abs_mag=True, track_largest=False) -> ThermoSample:
    """Equilibrate and measure one temperature point."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if init == "aligned":
        lat = SpinLattice.aligned(dims, 1, J=J, h=h, T=T)
    else:
        lat = SpinLattice.random(dims, gen, J=J, h=h, T=T)
    n = lat.n_sites
    for _ in range(sweeps_discard):
        sweep(lat, gen)
    mags = np.empty(sweeps_measure)
    energies = np.empty(sweeps_measure)
    largest = np.empty(sweeps_measure) if track_largest else None
    acc = 0.0
    for k in range(sweeps_measure):
        acc += sweep(lat, gen)
        mags[k] = lat.magnetization
        energies[k] = total_energy(lat)
        if track_largest:
            part = domain_clusters(lat)
            largest[k] = max(part.cluster_sizes.values()) if part.cluster_sizes else 0
    m_for_chi = np.abs(mags) if abs_mag else mags
    chi = float((mags ** 2).mean() - m_for_chi.mean() ** 2) / (n * T)
    # one susceptibility estimate per block
    chi_blocks = np.array([(b ** 2).mean() - (np.abs(b) if abs_mag else b).mean() ** 2
                           for b in np.array_split(mags, min(n_blocks, mags.size))]) / (n * T)
    chi_se = float(chi_blocks.std(ddof=1) / np.sqrt(chi_blocks.size)) \
        if chi_blocks.size > 1 else 0.0
    return ThermoSample(
        T=float(T),
        mean_magnetization=float(mags.mean() / n),
        mean_magnetization_se=_blocked_se(mags / n, n_blocks),
        susceptibility=chi,
        susceptibility_se=chi_se,
        energy_per_site=float(energies.mean() / n),
        accept_rate=acc / sweeps_measure,
        n_sweeps_measured=sweeps_measure,
        n_sweeps_discarded=sweeps_discard,
        mean_abs_magnetization=float(np.abs(mags).mean() / n),
        mean_largest_domain=float(largest.mean()) if track_largest else 0.0,
    )


def susceptibility_scan(dims, t_grid, rng: RngStream, J=1.0, h=0.0,
                        sweeps_discard=1000, sweeps_measure=10_000,
                        init="aligned", track_largest=False):
    """ThermoSamples over a temperature grid plus the peak location T_hat_c."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(t_grid <= 0):
        raise ValueError("temperatures must be positive")
    samples = [measure_at(dims, t, rng.substream(i), J=J, h=h,
                          sweeps_discard=sweeps_discard,
                          sweeps_measure=sweeps_measure, init=init,
                          track_largest=track_largest)
               for i, t in enumerate(t_grid)]
    chis = np.array([s.susceptibility for s in samples])
    t_peak = float(t_grid[int(np.argmax(chis))])
    return samples, t_peak


def domain_clusters(lattice: SpinLattice):
    """Clusters of equal nonzero spin over nearest neighbors; zeros unclustered.

    Returns a ClusterPartition over the nonzero sites (compacted indexing).
    """
    spins = lattice.spins
    nonzero = np.nonzero(spins)[0]
    compact = np.full(lattice.n_sites, -1, dtype=np.int64)
    compact[nonzero] = np.arange(nonzero.size)
    plus = lattice._nbr[:, (0, 2, 4)]
    src = np.repeat(np.arange(lattice.n_sites, dtype=np.int64), 3)
    dst = plus.reshape(-1)
    ok = (dst >= 0) & (src != dst)
    src, dst = src[ok], dst[ok]
    same = (spins[src] == spins[dst]) & (spins[src] != 0)
    return label_from_edges(nonzero.size, compact[src[same]], compact[dst[same]])


def sample_domain_events(dims, T, rng: RngStream, J=1.0, h=0.0,
                         sweeps_discard=1000, n_samples=200, thin=5,
                         init="aligned") -> list:
    """Domain-size EventRecords from a thinned equilibrium trajectory."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if init == "aligned":
        lat = SpinLattice.aligned(dims, 1, J=J, h=h, T=T)
    else:
        lat = SpinLattice.random(dims, gen, J=J, h=h, T=T)
    for _ in range(sweeps_discard):
        sweep(lat, gen)
    events = []
    for _ in range(n_samples):
        for _ in range(thin):
            sweep(lat, gen)
        part = domain_clusters(lat)
        sizes = np.fromiter(part.cluster_sizes.values(), dtype=np.int64,
                            count=len(part.cluster_sizes))
        events.append(EventRecord(sizes, control=float(T)))
    return events
