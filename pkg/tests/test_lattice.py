import itertools

import numpy as np
import pytest

from schn.lattice import (FrozenSpec, Lattice, LatticeError, ModelParams,
                          Segment, SpinConfiguration, build_lattice,
                          flip_delta, hamiltonian, strip_lattice)


def test_free_site_counts():
    assert build_lattice(2, FrozenSpec(-1, ())).n_free == 9
    seg = Segment(-1, 0, 0, 1)
    assert build_lattice(2, FrozenSpec(-1, (seg,))).n_free == 7
    assert build_lattice(1, FrozenSpec(-1, ())).n_free == 1


def test_free_count_formula():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        y = int(rng.integers(-(m - 1), m))
        x0 = int(rng.integers(-(m - 1), m - 1))
        x1 = int(rng.integers(x0, m - 1))
        lat = build_lattice(m, FrozenSpec(-1, (Segment(x0, x1, y, 1),)))
        ring = (2 * m + 1) ** 2 - (2 * m - 1) ** 2
        assert lat.n_free == (2 * m + 1) ** 2 - ring - (x1 - x0 + 1)


def test_segment_outside_box_rejected():
    with pytest.raises(LatticeError):
        build_lattice(2, FrozenSpec(-1, (Segment(-2, 2, 0, 1),)))
    with pytest.raises(LatticeError):
        build_lattice(2, FrozenSpec(-1, (Segment(0, 1, 2, 1),)))


def test_segments_disjoint():
    with pytest.raises(LatticeError):
        FrozenSpec(-1, (Segment(-1, 0, 0, 1), Segment(0, 1, 0, -1)))


def test_hamiltonian_small_examples():
    lat = build_lattice(1, FrozenSpec(-1, ()))
    cold = lat.cold_config()
    assert hamiltonian(cold) == -4
    g = cold.grid.copy()
    g[1, 1] = 1
    flipped = SpinConfiguration(lat, g)
    assert hamiltonian(flipped) - hamiltonian(cold) == 8
    assert flip_delta(cold, (0, 0)) == 8


def test_flip_delta_matches_hamiltonian_exhaustively():
    lat = build_lattice(2, FrozenSpec(-1, ()))
    free = lat.free_sites
    base = lat.cold_config().grid
    for bits in itertools.product((-1, 1), repeat=9):
        g = base.copy()
        for s, b in zip(free, bits):
            iy, ix = lat.index(s)
            g[iy, ix] = b
        cfg = SpinConfiguration(lat, g)
        h = hamiltonian(cfg)
        for s in free:
            g2 = g.copy()
            iy, ix = lat.index(s)
            g2[iy, ix] = -g2[iy, ix]
            assert hamiltonian(SpinConfiguration(lat, g2)) - h == flip_delta(cfg, s)


def test_flip_delta_zero_local_field():
    lat = build_lattice(2, FrozenSpec(-1, ()))
    g = lat.cold_config().grid.copy()
    # two + and two - neighbours around the origin
    for s in ((0, 1), (1, 0)):
        iy, ix = lat.index(s)
        g[iy, ix] = 1
    cfg = SpinConfiguration(lat, g)
    assert flip_delta(cfg, (0, 0)) == 0


def test_flip_frozen_rejected():
    lat = build_lattice(2, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    cfg = lat.cold_config()
    with pytest.raises(LatticeError):
        flip_delta(cfg, (0, 0))
    with pytest.raises(LatticeError):
        flip_delta(cfg, (2, 0))  # ring site


def test_global_flip_covariance():
    rng = np.random.default_rng(11)
    spec = FrozenSpec(-1, (Segment(-1, 1, 1, 1),))
    lat = build_lattice(3, spec)
    lat_f = build_lattice(3, spec.flipped())
    for _ in range(25):
        g = lat.cold_config().grid.copy()
        mask = (rng.random(g.shape) < 0.5) & ~lat.frozen_mask
        g[mask] *= -1
        cfg = SpinConfiguration(lat, g)
        assert hamiltonian(cfg) == hamiltonian(cfg.flipped_global(lat_f))


def test_config_must_respect_frozen_spec():
    lat = build_lattice(2, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    g = lat.cold_config().grid.copy()
    iy, ix = lat.index((0, 0))
    g[iy, ix] = -1
    with pytest.raises(LatticeError):
        SpinConfiguration(lat, g)


def test_strip_and_rect_geometry():
    lat = strip_lattice(8, 3, FrozenSpec(-1, ()))
    assert lat.n_free == 6
    assert lat.m is None
    assert build_lattice(3, FrozenSpec(-1, ())).m == 3
    r = Lattice(-2, 4, -1, 3, FrozenSpec(-1, ()))
    assert r.n_free == 5 * 3


def test_model_params_validation():
    with pytest.raises(LatticeError):
        ModelParams(-0.1)
