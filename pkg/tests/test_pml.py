import cmath
import math

import numpy as np
import pytest

from pwmodes.pml import (
    CutoffModeError,
    ModeExponents,
    OutOfDomainError,
    PmlProfile,
    RegionViolationError,
    dtn_coth_deviation,
    eval_s,
    hz_lower_bound_check,
    sigma_integral,
    sqrt_nia,
)

PROFILE = PmlProfile(H=1.0, delta=0.5, strength=40.0)


def test_eval_s_physical_region_is_one():
    assert eval_s(PROFILE, 0.3) == 1.0
    assert eval_s(PROFILE, -1.0) == 1.0


def test_eval_s_ramp_values():
    assert eval_s(PROFILE, 1.5) == pytest.approx(41 + 40j, rel=1e-14)
    assert eval_s(PROFILE, 1.25) == pytest.approx(6 + 5j, rel=1e-14)
    assert eval_s(PROFILE, -1.25) == pytest.approx(6 + 5j, rel=1e-14)


def test_eval_s_outside_domain():
    with pytest.raises(OutOfDomainError):
        eval_s(PROFILE, 1.6)


def test_eval_s_even_in_x2():
    x = np.linspace(0, 1.5, 301)
    assert np.array_equal(eval_s(PROFILE, x), eval_s(PROFILE, -x))


def test_eval_s_bounds():
    x = np.linspace(-1.5, 1.5, 1001)
    s = eval_s(PROFILE, x)
    assert np.all(s.real >= 1.0)
    assert np.all(s.imag >= 0.0)


def test_profile_rejects_bad_phase():
    with pytest.raises(ValueError):
        PmlProfile(H=1.0, delta=0.5, strength=40.0, phase=-1 + 1j)


def test_sigma_integral_closed_form():
    assert sigma_integral(PROFILE, "plus") == pytest.approx(5.5 + 5j, rel=1e-14)
    assert sigma_integral(PROFILE, "minus") == sigma_integral(PROFILE, "plus")
    off = PmlProfile(H=1.0, delta=0.5, strength=0.0)
    assert sigma_integral(off, "plus") == pytest.approx(0.5, rel=1e-14)


def test_sqrt_branch_on_beta():
    # propagating order: real nonnegative root
    me = ModeExponents(k=1.6, alpha=0.44, n=0)
    assert me.beta_n.imag == pytest.approx(0.0, abs=1e-14)
    assert me.beta_n.real > 0
    # evanescent order: positive imaginary root
    me = ModeExponents(k=1.6, alpha=0.44, n=3)
    assert me.beta_n.real == pytest.approx(0.0, abs=1e-14)
    assert me.beta_n.imag > 0


def test_sqrt_nia_matches_principal_off_cut():
    for w in (2.0 + 1j, -3.0 + 0.5j, 1j, -1j + 1e-3):
        v = sqrt_nia(w)
        assert v * v == pytest.approx(w, rel=1e-12)
        assert -math.pi / 4 < cmath.phase(v) <= 3 * math.pi / 4 + 1e-12


def test_dtn_deviation_evanescent_example():
    # beta = i makes -2i*beta*sigma = 2*sigma with sigma = 5.5 + 5i
    me = ModeExponents(k=1.6, alpha=0.44, n=2)
    sigma = 5.5 + 5j
    beta = me.beta_n
    expected = abs(beta) * abs(2.0 / (cmath.exp(-2j * beta * sigma) - 1))
    assert dtn_coth_deviation(me, sigma) == pytest.approx(expected, rel=1e-12)

    # beta exactly i: k^2 - alpha^2 = -1
    unit = ModeExponents(k=1.0, alpha=math.sqrt(2.0), n=0)
    assert unit.beta_n == pytest.approx(1j, rel=1e-12)
    val = dtn_coth_deviation(unit, sigma)
    assert val == pytest.approx(2 * math.exp(-11), rel=1e-3)


def test_dtn_deviation_halves_with_real_sigma_doubling():
    me = ModeExponents(k=1.6, alpha=0.44, n=3)
    sigma = 3.0  # real: the deviation is 2|beta|/(e^{2p sigma} - 1)
    v1 = dtn_coth_deviation(me, sigma)
    v2 = dtn_coth_deviation(me, 2 * sigma)
    w = (-2j * me.beta_n * sigma).real
    assert v2 <= v1 * math.exp(-w)


def test_dtn_deviation_monotone_on_grid():
    sigma = 5.5 + 5j
    for n in (2, 3, -3, 5):
        me = ModeExponents(k=1.6, alpha=0.44, n=n)
        assert (-2j * me.beta_n * sigma).real > 0
        ts = np.linspace(1.0, 6.0, 41)
        vals = [dtn_coth_deviation(me, t * sigma) for t in ts]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_dtn_deviation_propagating_order_finite():
    me = ModeExponents(k=1.6, alpha=0.44, n=0)  # real beta
    val = dtn_coth_deviation(me, 5.5 + 5j)
    assert 0 < val < math.inf


def test_dtn_deviation_cutoff_rejected():
    me = ModeExponents(k=1.6, alpha=1.6, n=0)
    with pytest.raises(CutoffModeError):
        dtn_coth_deviation(me, 5.5 + 5j)


def test_hz_real_sigma_case1():
    # tau = 0 limit: the exponent -2i*sqrt(k^2-z^2)*sigma is purely
    # imaginary, so |h| = 1 while the bound degenerates (gamma < 0)
    k, dp, M = 1.6, 0.05, 4.0
    z = 0.5 + 0.0j
    res = hz_lower_bound_check(k, z, 3.0 + 0.0j, dp, M)
    assert res["case"] == 1
    assert res["log_lhs"] == pytest.approx(0.0, abs=1e-12)
    assert res["rhs"] < 1.0
    assert res["ok"]
    # rotating sigma to the positive imaginary axis realizes the maximal
    # growth exp(2|sigma| sqrt(k^2 - z^2))
    res = hz_lower_bound_check(k, z, 3.0j, dp, M)
    assert res["log_lhs"] == pytest.approx(2 * 3.0 * math.sqrt(k * k - 0.25),
                                           rel=1e-12)
    assert res["ok"]


def test_hz_z_zero_tau_quarter_pi():
    sigma = 4.0 * cmath.exp(1j * math.pi / 4)
    res = hz_lower_bound_check(1.6, 0.0, sigma, 0.05, 4.0)
    assert res["ok"]


def test_hz_excluded_band_rejected():
    with pytest.raises(RegionViolationError):
        hz_lower_bound_check(1.6, 1.6 + 0.0j, 4.0 + 4.0j, 0.05, 4.0)
    with pytest.raises(RegionViolationError):
        hz_lower_bound_check(1.6, 0.5 + 0.2j, 4.0 + 4.0j, 0.05, 4.0)


def test_hz_random_admissible_samples():
    # the decay estimate must hold on 1000 random admissible points
    k, dp, M = 1.6, 0.05, 4.0
    tau = math.pi / 4
    rng = np.random.default_rng(42)
    lo = k - (M - 1) * dp
    hi = k + (M - 1) * dp
    for _ in range(1000):
        if rng.random() < 0.5:
            a = rng.uniform(0.0, lo - 1e-9)
        else:
            a = rng.uniform(hi + 1e-9, 8.0)
        z = complex(a * rng.choice((-1.0, 1.0)), rng.uniform(-dp, dp) * 0.999)
        sigma = rng.uniform(1.0, 10.0) * cmath.exp(1j * tau)
        res = hz_lower_bound_check(k, z, sigma, dp, M)
        assert res["ok"], (z, sigma)
