"""Shared lattice substrate: 3D grid indexing, seeded RNG streams, and
union-find cluster labeling.

All simulators index sites flat in C order, ``flat = (x*Ly + y)*Lz + z``.
Cluster labels are canonical: every element carries the smallest flat index
of its cluster.
"""

from dataclasses import dataclass, field

import numpy as np

from ._accel import jit

PERIODIC = "periodic"
OPEN = "open"

RNG_ID = "numpy-philox4x64"

# neighbor-table column order: +x, -x, +y, -y, +z, -z
_OFFSETS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    Identical (seed, stream_id) pairs reproduce identical draw sequences on
    every platform; distinct stream_ids are independent Philox keys with no
    shared state.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF,
                        self.stream_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        """Derived stream; distinct k give independent generators."""
        return RngStream(self.seed, self.stream_id * 1_000_003 + 1 + k)


def validate_dims(dims):
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ValueError(f"dims must be three positive site counts, got {dims}")
    return dims


@dataclass
class Lattice3D:
    """Dense cubic lattice of per-site states, stored flat in C order."""

    dims: tuple
    sites: np.ndarray
    boundary: str = PERIODIC

    def __post_init__(self):
        self.dims = validate_dims(self.dims)
        if self.boundary not in (PERIODIC, OPEN):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.sites.shape != (self.n_sites,):
            raise ValueError("sites must be a flat array of length Lx*Ly*Lz")

    @classmethod
    def filled(cls, dims, value=0, boundary=PERIODIC, dtype=np.int8):
        dims = validate_dims(dims)
        n = dims[0] * dims[1] * dims[2]
        return cls(dims, np.full(n, value, dtype=dtype), boundary)

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz

    def site_index(self, x: int, y: int, z: int) -> int:
        lx, ly, lz = self.dims
        if not (0 <= x < lx and 0 <= y < ly and 0 <= z < lz):
            raise IndexError(f"site ({x},{y},{z}) outside dims {self.dims}")
        return (x * ly + y) * lz + z

    def site_coords(self, i: int):
        lx, ly, lz = self.dims
        if not 0 <= i < self.n_sites:
            raise IndexError(f"flat index {i} outside lattice of {self.n_sites} sites")
        x, rem = divmod(i, ly * lz)
        y, z = divmod(rem, lz)
        return x, y, z


def neighbor_table(dims, boundary) -> np.ndarray:
    """(N, 6) array of neighbor flat indices, columns +x,-x,+y,-y,+z,-z.

    Under open boundary, out-of-lattice entries are -1.
    """
    dims = validate_dims(dims)
    lx, ly, lz = dims
    n = lx * ly * lz
    x, y, z = np.unravel_index(np.arange(n), dims)
    out = np.empty((n, 6), dtype=np.int64)
    for col, (dx, dy, dz) in enumerate(_OFFSETS):
        xx, yy, zz = x + dx, y + dy, z + dz
        if boundary == PERIODIC:
            out[:, col] = np.ravel_multi_index((xx % lx, yy % ly, zz % lz), dims)
        else:
            ok = ((0 <= xx) & (xx < lx) & (0 <= yy) & (yy < ly)
                  & (0 <= zz) & (zz < lz))
            flat = np.ravel_multi_index(
                (np.clip(xx, 0, lx - 1), np.clip(yy, 0, ly - 1), np.clip(zz, 0, lz - 1)),
                dims)
            out[:, col] = np.where(ok, flat, -1)
    return out


def neighbors(lattice: Lattice3D, site: int) -> np.ndarray:
    """Nearest neighbors of a site: 6 under periodic, 3-6 under open boundary."""
    if not 0 <= site < lattice.n_sites:
        raise IndexError(f"site index {site} out of range")
    row = neighbor_table(lattice.dims, lattice.boundary)[site]
    return row[row >= 0]


@dataclass
class ClusterPartition:
    """Disjoint-cluster labeling; label = smallest member index of the cluster."""

    labels: np.ndarray
    n_elements: int
    cluster_sizes: dict = field(default_factory=dict)

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "ClusterPartition":
        labels = np.asarray(labels, dtype=np.int64)
        uniq, counts = np.unique(labels, return_counts=True)
        return cls(labels, len(labels), dict(zip(uniq.tolist(), counts.tolist())))

    def sizes(self) -> np.ndarray:
        """Cluster sizes in ascending-label order."""
        if not self.cluster_sizes:
            return np.empty(0, dtype=np.int64)
        return np.array([self.cluster_sizes[k] for k in sorted(self.cluster_sizes)],
                        dtype=np.int64)

    def size_histogram(self):
        """(sizes, counts): number of clusters of each size."""
        return np.unique(self.sizes(), return_counts=True)


@jit
def _find_root(parent, i):
    # path halving
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@jit
def _labels_from_edges(n, edges_a, edges_b):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for k in range(edges_a.shape[0]):
        ra = _find_root(parent, edges_a[k])
        rb = _find_root(parent, edges_b[k])
        if ra != rb:
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
    # canonicalize: smallest member index labels the cluster
    roots = np.empty(n, dtype=np.int64)
    canon = np.full(n, n, dtype=np.int64)
    for i in range(n):
        r = _find_root(parent, i)
        roots[i] = r
        if canon[r] > i:
            canon[r] = i
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = canon[roots[i]]
    return labels


def label_from_edges(n_elements: int, edges_a, edges_b) -> ClusterPartition:
    """Union-find labeling of n elements joined by the given edge endpoint arrays."""
    edges_a = np.ascontiguousarray(edges_a, dtype=np.int64)
    edges_b = np.ascontiguousarray(edges_b, dtype=np.int64)
    labels = _labels_from_edges(n_elements, edges_a, edges_b)
    return ClusterPartition.from_labels(labels)


def label_clusters(n_elements: int, adjacency, connected) -> ClusterPartition:
    """Generic cluster labeling.

    adjacency(i) yields candidate neighbors of element i; connected(i, j) says
    whether the adjacent pair is joined.  Both are assumed symmetric, so each
    pair is examined once (j > i).
    """
    ea, eb = [], []
    for i in range(n_elements):
        for j in adjacency(i):
            if j > i and connected(i, j):
                ea.append(i)
                eb.append(j)
    return label_from_edges(n_elements,
                            np.array(ea, dtype=np.int64),
                            np.array(eb, dtype=np.int64))


def lattice_edges(dims, boundary):
    """All nearest-neighbor (a, b) index pairs of the lattice, each pair once."""
    table = neighbor_table(dims, boundary)
    n = table.shape[0]
    src = np.repeat(np.arange(n, dtype=np.int64), 3)
    dst = table[:, (0, 2, 4)].reshape(-1)  # +x, +y, +z columns
    keep = dst >= 0
    if boundary == PERIODIC:
        # L<=2 wraps can duplicate or self-loop; harmless for union-find but
        # drop self-loops anyway
        keep &= src != dst
    return src[keep], dst[keep]
