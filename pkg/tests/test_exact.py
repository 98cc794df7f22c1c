import math

import numpy as np
import pytest

from schn.exact import (ExactError, brute_probability, fkg_audit,
                        transfer_probability)
from schn.lattice import (FrozenSpec, Lattice, LatticeError, ModelParams,
                          Segment, build_lattice, strip_lattice)


def one_segment_specs(m):
    """All one-segment frozen specs strictly inside a box of half-side m."""
    out = []
    for y in range(-(m - 1), m):
        for x0 in range(-(m - 1), m):
            for x1 in range(x0, m - 1 + 1):
                if x1 > m - 1:
                    continue
                for val in (-1, 1):
                    out.append(FrozenSpec(-1, (Segment(x0, x1, y, val),)))
    return out


def test_beta_zero_is_uniform():
    lat = build_lattice(2, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    for site in ((1, 0), (0, 1)):
        r = brute_probability(lat, ModelParams(0.0), [(site, 1)])
        assert abs(r.probability - 0.5) < 1e-14
    rt = transfer_probability(lat, ModelParams(0.0), [((1, 0), 1)])
    assert abs(rt.probability - 0.5) < 1e-14


def test_single_free_site_analytic():
    lat = build_lattice(1, FrozenSpec(-1, ()))
    r = brute_probability(lat, ModelParams(0.5), [((0, 0), 1)])
    assert abs(r.probability - 1.0 / (1.0 + math.exp(4.0))) < 1e-15


def test_m2_segment_regression_and_cross_method():
    lat = build_lattice(2, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    params = ModelParams(0.8)
    rb = brute_probability(lat, params, [((1, 0), 1)])
    rt = transfer_probability(lat, params, [((1, 0), 1)])
    # frozen from the 2^7-term enumeration
    assert abs(rb.probability - 0.04744998806889483) < 1e-12
    assert abs(rb.probability - rt.probability) < 1e-12
    assert abs(rb.log_partition - rt.log_partition) < 1e-9


def test_brute_transfer_sweep_m2():
    worst = 0.0
    for beta in (0.0, 0.5, 1.0, 2.0):
        params = ModelParams(beta)
        for spec in one_segment_specs(2):
            lat = build_lattice(2, spec)
            site = lat.free_sites[0]
            pb = brute_probability(lat, params, [(site, 1)]).probability
            pt = transfer_probability(lat, params, [(site, 1)]).probability
            worst = max(worst, abs(pb - pt))
    assert worst < 1e-12


def test_normalization_and_spin_flip_symmetry():
    spec = FrozenSpec(-1, (Segment(0, 1, -1, 1),))
    lat = build_lattice(2, spec)
    lat_f = build_lattice(2, spec.flipped())
    params = ModelParams(0.7)
    for site in ((1, 0), (0, 0)):
        p_plus = brute_probability(lat, params, [(site, 1)]).probability
        p_minus = brute_probability(lat, params, [(site, -1)]).probability
        assert abs(p_plus + p_minus - 1.0) < 1e-12
        p_flip = brute_probability(lat_f, params, [(site, -1)]).probability
        assert abs(p_plus - p_flip) < 1e-12


def test_strip_center_regression():
    lat = strip_lattice(8, 3, FrozenSpec(-1, ()))
    r = transfer_probability(lat, ModelParams(1.0), [((4, 1), 1)])
    assert r.probability < 0.05
    assert abs(r.probability - 0.00034773194886347775) < 1e-12
    rb = brute_probability(lat, ModelParams(1.0), [((4, 1), 1)])
    assert abs(rb.probability - r.probability) < 1e-12


def test_transfer_rejections():
    tall = Lattice(0, 4, 0, 14, FrozenSpec(-1, ()))
    with pytest.raises(ExactError):
        transfer_probability(tall, ModelParams(1.0), [((2, 7), 1)])
    lat = strip_lattice(8, 3, FrozenSpec(-1, ()))
    with pytest.raises(ExactError):
        transfer_probability(lat, ModelParams(1.0),
                             [((2, 1), 1), ((3, 1), 1)])  # two columns


def test_brute_cap_and_event_validation():
    lat = build_lattice(4, FrozenSpec(-1, ()))  # 49 free sites
    with pytest.raises(ExactError):
        brute_probability(lat, ModelParams(1.0), [((0, 0), 1)])
    lat2 = build_lattice(2, FrozenSpec(-1, ()))
    with pytest.raises(LatticeError):
        brute_probability(lat2, ModelParams(1.0), [((2, 2), 1)])  # ring site


def test_fkg_examples():
    params = ModelParams(0.8)
    low = build_lattice(2, FrozenSpec(-1, ()))
    high = build_lattice(2, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    p_low, p_high = fkg_audit(low, high, params, (1, 0))
    assert p_low <= p_high + 1e-12
    # equal specs -> equal probabilities
    p1, p2 = fkg_audit(low, low, params, (1, 0))
    assert p1 == p2


def test_fkg_segment_length_monotone_m3():
    params = ModelParams(0.8)
    short = build_lattice(3, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    long_ = build_lattice(3, FrozenSpec(-1, (Segment(-2, 0, 0, 1),)))
    p_short, p_long = fkg_audit(short, long_, params, (1, 0))
    assert p_short <= p_long + 1e-12


def test_fkg_incomparable_rejected():
    params = ModelParams(0.8)
    a = build_lattice(2, FrozenSpec(-1, (Segment(-1, 0, 0, 1),)))
    b = build_lattice(2, FrozenSpec(-1, (Segment(0, 1, 0, -1),)))
    with pytest.raises(ExactError):
        fkg_audit(a, b, params, (1, 1))
