import math

import numpy as np
import pytest

from nuclab.exponents import build_histogram, fit_tau
from nuclab.lattice import OPEN, RngStream, label_from_edges
from nuclab.percolation import (
    BondConfig, bond_uniforms, compute_stats, config_edges, config_from_uniforms,
    plus_neighbor_table, sample_config, sample_events, sample_site_config,
    sigma_from_beta_gamma, spanning_cluster, tau_from_beta_gamma, threshold_scan,
)
from helpers import flood_fill_labels


def test_sample_config_degenerate_probabilities():
    rng = RngStream(1, 0)
    cfg0 = sample_config((6, 6, 6), 0.0, rng)
    assert cfg0.open_bonds.sum() == 0
    cfg1 = sample_config((6, 6, 6), 1.0, rng)
    assert cfg1.open_bonds.sum() == cfg1.n_bonds


def test_sample_config_rejects_bad_p():
    with pytest.raises(ValueError):
        sample_config((4, 4, 4), 1.5, RngStream(0))
    with pytest.raises(ValueError):
        sample_config((4, 4, 4), -0.1, RngStream(0))


def test_open_boundary_bond_count():
    cfg = sample_config((4, 5, 6), 0.3, RngStream(2))
    lx, ly, lz = 4, 5, 6
    expected = 3 * lx * ly * lz - (ly * lz + lx * lz + lx * ly)
    assert cfg.n_bonds == expected


def test_sample_config_binomial_concentration():
    # 5 sigma bound on the open fraction at p = 0.5 over >= 1e5 bonds
    cfg = sample_config((34, 34, 30), 0.5, RngStream(3, 1))
    n_bonds = cfg.n_bonds
    assert n_bonds >= 100_000
    frac = cfg.open_bonds.sum() / n_bonds
    assert abs(frac - 0.5) < 5 * math.sqrt(0.25 / n_bonds)


def test_sample_config_deterministic():
    a = sample_config((8, 8, 8), 0.3, RngStream(9, 4))
    b = sample_config((8, 8, 8), 0.3, RngStream(9, 4))
    assert np.array_equal(a.open_bonds, b.open_bonds)


def test_spanning_full_and_empty():
    full = sample_config((4, 4, 4), 1.0, RngStream(1))
    assert spanning_cluster(full)[0]
    empty = sample_config((4, 4, 4), 0.0, RngStream(1))
    assert not spanning_cluster(empty)[0]


def test_spanning_straight_chain():
    dims = (4, 4, 4)
    bonds = np.zeros((64, 3), dtype=bool)
    plus = plus_neighbor_table(dims, OPEN)
    site = 0
    for _ in range(3):  # bonds (0,0,0)->(1,0,0)->(2,0,0)->(3,0,0)
        bonds[site, 0] = True
        site = plus[site, 0]
    cfg = BondConfig(dims, 0.0, bonds)
    spanning, label = spanning_cluster(cfg)
    assert spanning
    stats = compute_stats(cfg, exclude_spanning=True)
    assert stats.spanning_size == 4
    assert math.isclose(stats.p_inf, 4 / 64)


def test_stats_degenerate_probabilities():
    stats0 = compute_stats(sample_config((6, 6, 6), 0.0, RngStream(4)))
    assert stats0.n_s == {1: 1.0}
    assert stats0.p_inf == 0.0
    assert math.isclose(stats0.second_moment, 1.0)
    stats1 = compute_stats(sample_config((6, 6, 6), 1.0, RngStream(4)))
    assert stats1.p_inf == 1.0
    assert stats1.sizes.size == 0
    assert stats1.second_moment == 0.0


def test_stats_match_flood_fill_oracle():
    rng = RngStream(77, 0)
    n = 16 ** 3
    for k in range(200):
        cfg = sample_config((16, 16, 16), 0.30, rng.substream(k))
        stats = compute_stats(cfg, exclude_spanning=True)
        ea, eb = config_edges(cfg)
        labels = flood_fill_labels(n, ea, eb)
        assert np.array_equal(labels, label_from_edges(n, ea, eb).labels)
        uniq, counts = np.unique(labels, return_counts=True)
        # oracle recomputation of spanning, p_inf, second moment
        lab0 = labels[np.arange(16 * 16)]
        lab1 = labels[np.arange(16 * 16) + 15 * 16 * 16]
        span = np.intersect1d(lab0, lab1)
        assert stats.spanning == bool(span.size)
        sizes = counts[~np.isin(uniq, span)]
        assert math.isclose(stats.second_moment, float(np.sum(sizes.astype(float) ** 2)) / n)
        assert math.isclose(stats.p_inf, counts[np.isin(uniq, span)].sum() / n)
        # mass conservation, exact
        assert int(np.repeat(stats.sizes, stats.counts).sum()) + stats.spanning_size == n


def test_exclude_spanning_noop_below_threshold():
    rng = RngStream(5, 0)
    for k in range(20):
        cfg = sample_config((8, 8, 8), 0.12, rng.substream(k))
        a = compute_stats(cfg, exclude_spanning=True)
        b = compute_stats(cfg, exclude_spanning=False)
        assert not a.spanning
        assert np.array_equal(a.sizes, b.sizes) and np.array_equal(a.counts, b.counts)
        assert a.second_moment == b.second_moment


def test_monotone_coupling():
    rng = RngStream(21, 0)
    p_values = [0.05, 0.15, 0.2488, 0.35, 0.6, 0.9]
    for k in range(20):
        uniforms = bond_uniforms((8, 8, 8), rng.substream(k))
        prev_span, prev_largest, prev_bonds = 0, 0, -1
        for p in p_values:
            cfg = config_from_uniforms((8, 8, 8), uniforms, p)
            stats = compute_stats(cfg, exclude_spanning=False)
            n_bonds_open = int(cfg.open_bonds.sum())
            span = 1 if stats.spanning else 0
            assert span >= prev_span
            assert stats.largest >= prev_largest
            assert n_bonds_open >= prev_bonds
            prev_span, prev_largest, prev_bonds = span, stats.largest, n_bonds_open


def test_threshold_scan_degenerate_grid():
    scan = threshold_scan((5, 5, 5), [0.0, 1.0], 4, RngStream(6, 0))
    assert scan.rows[0].spanning_prob == 0.0
    assert scan.rows[1].spanning_prob == 1.0
    assert math.isclose(scan.p_c, 0.5)


def test_threshold_scan_rejects_bad_args():
    with pytest.raises(ValueError):
        threshold_scan((4, 4, 4), [0.2, 0.3], 0, RngStream(0))
    with pytest.raises(ValueError):
        threshold_scan((4, 4, 4), [0.3, 0.2], 5, RngStream(0))


def _spanning_probability_oracle(dims, p, n_samples, rng):
    hits = 0
    for k in range(n_samples):
        cfg = sample_config(dims, p, rng.substream(k))
        if spanning_cluster(cfg)[0]:
            hits += 1
    return hits / n_samples


def test_threshold_estimate_against_bisection_oracle():
    scan = threshold_scan((16, 16, 16), np.arange(0.20, 0.3001, 0.0125), 80,
                          RngStream(30, 0))
    # independent coarse bisection at L = 24
    rng = RngStream(31, 0)
    lo, hi = 0.18, 0.32
    for it in range(6):
        mid = 0.5 * (lo + hi)
        f = _spanning_probability_oracle((24, 24, 24), mid, 60, rng.substream(it))
        if f < 0.5:
            lo = mid
        else:
            hi = mid
    p_c_oracle = 0.5 * (lo + hi)
    assert abs(scan.p_c - p_c_oracle) <= 0.02


def test_site_mode_basics():
    cfg = sample_site_config((6, 6, 6), 0.0, RngStream(7))
    stats = compute_stats(cfg)
    assert stats.sizes.size == 0 and not stats.spanning
    cfg = sample_site_config((6, 6, 6), 1.0, RngStream(7))
    stats = compute_stats(cfg, exclude_spanning=False)
    assert stats.spanning and stats.largest == 216
    # occupied mass conservation at intermediate p
    cfg = sample_site_config((8, 8, 8), 0.4, RngStream(8, 2))
    stats = compute_stats(cfg, exclude_spanning=False)
    assert int(np.repeat(stats.sizes, stats.counts).sum()) == int(cfg.occupied.sum())


def test_exponent_relations_trivial_points():
    assert tau_from_beta_gamma(0.0, 1.7) == 2.0
    assert math.isclose(sigma_from_beta_gamma(0.0, 1.7), 1 / 1.7)
    assert math.isclose(tau_from_beta_gamma(0.9, 0.9), 2.5)


def test_exponent_relations_reference_values():
    # beta, gamma chosen to invert the reference pair tau = 2.18, sigma = 0.45
    tau = tau_from_beta_gamma(0.4, 1.8222)
    sigma = sigma_from_beta_gamma(0.4, 1.8222)
    assert abs(tau - 2.18) < 0.001
    assert abs(sigma - 0.45) < 0.001


def test_exponent_relations_reject_bad_inputs():
    with pytest.raises(ValueError):
        tau_from_beta_gamma(-0.1, 1.0)
    with pytest.raises(ValueError):
        tau_from_beta_gamma(0.5, 0.0)
    with pytest.raises(ValueError):
        sigma_from_beta_gamma(0.5, -0.5)


def test_sample_events_and_fit_smoke():
    events = sample_events((12, 12, 12), 0.2488, 150, RngStream(40, 0))
    hist = build_histogram(events, a_system=12 ** 3)
    fit = fit_tau(hist, fit_range=(2, 12))
    assert 1.8 < fit.tau < 3.0
    assert all(ev.control == 0.2488 for ev in events)
