import numpy as np
import pytest

from nuclab.lattice import (
    OPEN, PERIODIC, ClusterPartition, Lattice3D, RngStream, label_clusters,
    label_from_edges, lattice_edges, neighbor_table, neighbors,
)
from helpers import flood_fill_labels


def test_index_round_trip():
    lat = Lattice3D.filled((3, 4, 5))
    for i in range(lat.n_sites):
        assert lat.site_index(*lat.site_coords(i)) == i


def test_index_rejects_out_of_range():
    lat = Lattice3D.filled((4, 4, 4))
    with pytest.raises(IndexError):
        lat.site_index(4, 0, 0)
    with pytest.raises(IndexError):
        lat.site_coords(64)


def test_neighbors_open_corner():
    lat = Lattice3D.filled((4, 4, 4), boundary=OPEN)
    corner = lat.site_index(0, 0, 0)
    nbrs = neighbors(lat, corner)
    assert len(nbrs) == 3
    expected = {lat.site_index(1, 0, 0), lat.site_index(0, 1, 0), lat.site_index(0, 0, 1)}
    assert set(nbrs.tolist()) == expected


def test_neighbors_periodic_count_and_wrap():
    lat = Lattice3D.filled((4, 4, 4), boundary=PERIODIC)
    for site in [0, 17, 63]:
        assert len(neighbors(lat, site)) == 6
    wrap = lat.site_index(3, 0, 0)
    assert wrap in neighbors(lat, lat.site_index(0, 0, 0)).tolist()


def test_neighbors_open_interior_count():
    lat = Lattice3D.filled((4, 4, 4), boundary=OPEN)
    assert len(neighbors(lat, lat.site_index(1, 2, 1))) == 6
    assert len(neighbors(lat, lat.site_index(0, 2, 1))) == 5


def test_label_fully_connected():
    ea, eb = lattice_edges((2, 2, 2), OPEN)
    part = label_from_edges(8, ea, eb)
    assert part.cluster_sizes == {0: 8}


def test_label_no_edges():
    part = label_from_edges(10, np.empty(0, np.int64), np.empty(0, np.int64))
    assert len(part.cluster_sizes) == 10
    assert all(v == 1 for v in part.cluster_sizes.values())
    assert np.array_equal(part.labels, np.arange(10))


def test_label_clusters_generic_matches_edges():
    table = neighbor_table((3, 3, 3), OPEN)
    gen = RngStream(11, 0).generator()
    bond = gen.random((27, 27)) < 0.3

    def adjacency(i):
        row = table[i]
        return row[row >= 0]

    def connected(i, j):
        return bool(bond[min(i, j), max(i, j)])

    part = label_clusters(27, adjacency, connected)
    ea, eb = [], []
    for i in range(27):
        for j in adjacency(i):
            if j > i and connected(i, j):
                ea.append(i)
                eb.append(j)
    ref = label_from_edges(27, np.array(ea), np.array(eb))
    assert np.array_equal(part.labels, ref.labels)


@pytest.mark.parametrize("seed", range(4))
def test_union_find_matches_flood_fill_random(seed):
    gen = RngStream(2024, seed).generator()
    for _ in range(250):
        lx, ly, lz = gen.integers(2, 17, size=3)
        ea, eb = lattice_edges((lx, ly, lz), OPEN)
        keep = gen.random(ea.size) < gen.random()
        ea, eb = ea[keep], eb[keep]
        n = lx * ly * lz
        part = label_from_edges(n, ea, eb)
        oracle = flood_fill_labels(n, ea, eb)
        assert np.array_equal(part.labels, oracle)


def test_labeling_idempotent():
    gen = RngStream(7, 3).generator()
    ea, eb = lattice_edges((8, 8, 8), OPEN)
    keep = gen.random(ea.size) < 0.25
    part = label_from_edges(512, ea[keep], eb[keep])
    labels = part.labels

    def adjacency(i):
        return range(i + 1, 512)

    def connected(i, j):
        return labels[i] == labels[j]

    again = label_clusters(512, adjacency, connected)
    assert np.array_equal(again.labels, labels)


def test_partition_bookkeeping():
    part = ClusterPartition.from_labels(np.array([0, 0, 2, 2, 2, 5]))
    assert part.n_elements == 6
    assert sum(part.cluster_sizes.values()) == 6
    assert part.cluster_sizes == {0: 2, 2: 3, 5: 1}
    sizes, counts = part.size_histogram()
    assert np.array_equal(sizes, [1, 2, 3])
    assert np.array_equal(counts, [1, 1, 1])


def test_rng_stream_reproducible():
    a = RngStream(42, 7).generator().random(1000)
    b = RngStream(42, 7).generator().random(1000)
    assert np.array_equal(a, b)


def test_rng_streams_distinct():
    a = RngStream(42, 0).generator().random(1000)
    b = RngStream(42, 1).generator().random(1000)
    assert not np.array_equal(a, b)
    # crude independence: no matching draws, small cross-correlation
    assert np.max(np.abs(np.corrcoef(a, b)[0, 1])) < 0.15


def test_rng_substream_deterministic():
    s = RngStream(5, 2)
    assert s.substream(3) == RngStream(5, 2).substream(3)
    assert s.substream(3) != s.substream(4)
