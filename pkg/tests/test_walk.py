import math
from fractions import Fraction

import numpy as np
import pytest

from schn import walk as W


def test_fragment_law_concentrates_at_large_beta():
    steps, rep = W.build_steps_from_animals(6.0, 8)
    assert steps.prob(1, 0) > 0.995
    assert not rep.flagged


def test_fragment_law_symmetric_and_theta_positive():
    steps, _ = W.build_steps_from_animals(2.0, 8)
    assert steps.thetas.min() >= 1
    for t, z in zip(steps.thetas, steps.zetas):
        assert steps.prob(t, z) == steps.prob(t, -z)
    assert abs(steps.probs.sum() - 1.0) < 1e-12


def test_fragment_tail_rate_grows_with_beta():
    rates = []
    for beta in (1.5, 2.0, 3.0):
        steps, _ = W.build_steps_from_animals(beta, 8)
        c, a = steps.zeta_tail_rate()
        ks, ps = steps.zeta_marginal()
        assert (ps <= a * np.exp(-c * np.abs(ks)) + 1e-12).all()
        rates.append(c)
    assert rates[0] < rates[1] < rates[2]
    assert rates[1] >= 2.0


def test_fragment_mass_flagging():
    _, rep = W.build_steps_from_animals(1.5, 8)
    assert rep.flagged  # cutoff 8 leaves > 0.1% of mass at this beta
    _, rep2 = W.build_steps_from_animals(2.0, 8)
    assert not rep2.flagged


def test_parametric_normalisation_and_var_oracle():
    steps = W.parametric_steps(math.log(2), 0.5)
    assert abs(steps.probs.sum() - 1.0) < 1e-12
    # direct summation over the untrimmed table
    ks = np.arange(-60, 61)
    wk = np.exp(-math.log(2) * np.abs(ks))
    var = float((wk * ks ** 2).sum() / wk.sum())
    assert abs(steps.var_zeta - var) < 1e-9
    assert abs(steps.mean_zeta) < 1e-15
    for t, z in zip(steps.thetas, steps.zetas):
        assert steps.prob(t, z) == steps.prob(t, -z)


def test_parametric_degenerate_limit():
    steps = W.parametric_steps(math.inf, 0.5)
    assert set(steps.zetas.tolist()) == {0}
    assert steps.is_degenerate()


def test_ballot_single_step():
    steps = W.parametric_steps(math.log(2), 0.5)
    r = W.ballot_dp(1, 2, 3, steps)
    assert abs(r.probability - steps.prob(1, 1)) < 1e-15


def test_ballot_matches_reflection_exactly():
    for N in (8, 16, 64):
        for u in (1, 2, 3):
            for v in (1, 2, 4):
                refl = W.reflection_ballot(N, u, v)
                exact = W.ballot_exact_simple(N, u, v)
                assert refl == exact
                if refl > 0:
                    dp = W.ballot_dp(N, u, v, W.simple_steps())
                    assert abs(dp.probability - float(refl)) < 1e-12 * float(refl) + 1e-18


def test_ballot_mc_agrees_with_dp():
    steps, _ = W.build_steps_from_animals(2.0, 8)
    dp = W.ballot_dp(48, 1, 1, steps)
    mc = W.ballot_mc(48, 1, 1, steps, 20000, 3)
    assert mc == W.ballot_mc(48, 1, 1, steps, 20000, 3)  # determinism
    assert abs(mc.probability - dp.probability) <= 3 * mc.stderr


def test_ballot_cap_insensitivity():
    r = W.ballot_dp(64, 1, 1, W.simple_steps())
    assert not r.flagged
    assert r.cap_sensitivity <= 1e-10


def test_h_unit_step_identity():
    unit = W.simple_steps()
    for x in (1, 2, 5, 9):
        h = W.h_plus(x, unit, horizon=500)
        assert abs(h.value - x) < 1e-12
        assert not h.flagged


def test_h_monotone_and_reflection_symmetric():
    steps = W.parametric_steps(math.log(2), 0.5)
    hs = [W.h_plus(x, steps, horizon=300).value for x in range(1, 13)]
    assert all(b >= a - 1e-12 for a, b in zip(hs, hs[1:]))
    hm = [W.h_minus(x, steps, horizon=300).value for x in range(1, 13)]
    assert max(abs(a - b) for a, b in zip(hs, hm)) < 1e-12


def test_h_flags_jumpy_laws():
    steps = W.parametric_steps(math.log(2), 0.5)
    h = W.h_plus(1, steps, horizon=200)
    assert h.flagged  # overshoot bound cannot reach 1e-8 at desk horizons


def test_h_rejects_degenerate():
    with pytest.raises(W.WalkError):
        W.h_plus(1, W.degenerate_steps())


def test_scaling_simple_walk():
    rep = W.scaling_suite(W.simple_steps(), 1, 1, [64, 128, 256, 512])
    assert abs(rep.exponent + 1.5) <= 0.15
    assert rep.r_squared >= 0.99
    assert rep.middle_ratio_spread <= 0.25
    # bulk points are exact reflection counts
    for N, vv, r in rep.bulk_points:
        exact = float(W.reflection_ballot(N, 1, vv))
        assert abs(r.probability - exact) <= 1e-9 * exact


def test_scaling_animal_law():
    steps, _ = W.build_steps_from_animals(2.0, 8)
    rep = W.scaling_suite(steps, 1, 1, [64, 128, 256, 512])
    assert abs(rep.exponent + 1.5) <= 0.2
    assert rep.r_squared >= 0.99


def test_degenerate_law_excluded_from_scaling():
    deg = W.degenerate_steps()
    with pytest.raises(W.WalkError):
        W.scaling_suite(deg, 1, 1, [16, 32, 64, 128])
    # but the walk itself is well defined and never moves vertically
    p = W.ballot_dp(64, 1, 1, deg)
    assert p.probability > 0
    assert W.endpoint_ratio_walk(64, 1, 1, deg) == 0.0


def test_endpoint_ratio_regression_and_positivity():
    steps = W.parametric_steps(math.log(2), 0.5)
    r = W.endpoint_ratio_walk(16, 1, 1, steps)
    assert abs(r - 1.3640067298730585) < 1e-9
    assert r >= 0.0


def test_uniformity_scan_flat_for_diffusive_law():
    steps = W.parametric_steps(0.5, 0.5)
    per_n, slope = W.uniformity_scan(steps, [16, 32, 64, 128, 256])
    assert abs(slope) <= 0.02
    first = per_n[0][1]
    assert max(r for _, r in per_n) <= 1.1 * first
