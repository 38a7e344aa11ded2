import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from helpers import make_config, random_config, rel
from smallcell import (KMPH, ApproximationWarning, CellGeometry, EqualPower, InvalidArgument,
                       RegimeViolation, TrafficModel, TruncatedGaussianSpeed,
                       UnsupportableVelocity, UniformSpeed, analytic_metrics, capacity_rate,
                       completion_prob, completion_prob_exact, erlang_b, ho_constants,
                       ho_probabilities, ho_rate, load_factor, load_factor_classes,
                       load_factor_continuous, region_rates, service_times)

# Reference values below come from scripts/derive_oracles.py (mpmath, 30 digits).

GEOM = CellGeometry(70.0, 5, None, 10.0, 2.5)
TRAFFIC = TrafficModel(0.01, 0.2, 0.4, 60)
SPEED_20_100 = UniformSpeed(20 * KMPH, 100 * KMPH)
SPEED_20_40 = UniformSpeed(20 * KMPH, 40 * KMPH)

config_draws = st.builds(
    make_config,
    beta=st.floats(2.0, 4.0), d0=st.floats(2.0, 10.0), n=st.integers(1, 6),
    stretch=st.floats(1.3, 6.0), mu=st.floats(0.05, 0.5), sh_frac=st.floats(0.0, 1.0),
    v_min=st.floats(5.0, 25.0), v_ratio=st.floats(1.2, 4.0), lam=st.floats(1e-3, 5e-2),
    servers=st.integers(1, 60), x_frac=st.floats(0.05, 0.95),
)


def erlang_direct(rho, k):
    r = Fraction(rho)
    terms = [r**j / math.factorial(j) for j in range(k + 1)]
    return float(terms[-1] / sum(terms))


# ---------------------------------------------------------------- geometry


def test_geometry_rejects_short_cell():
    with pytest.raises(InvalidArgument):
        CellGeometry(50.0, 5, None, 10.0, 2.5)


@pytest.mark.parametrize("edges", [(0.5, 0.4, 1.0), (0.2, 0.5, 0.9), (0.0, 0.5, 1.0)])
def test_geometry_rejects_bad_edges(edges):
    with pytest.raises(InvalidArgument):
        CellGeometry(100.0, 3, edges, 10.0, 2.5)


def test_geometry_rejects_small_beta():
    with pytest.raises(InvalidArgument):
        CellGeometry(100.0, 2, None, 10.0, 1.0)


def test_r0_is_d0_to_beta():
    assert GEOM.r0 == 10.0**2.5


def test_speed_rejects_zero_minimum():
    with pytest.raises(InvalidArgument):
        UniformSpeed(0.0, 10.0)


def test_mu_sh_warning():
    with pytest.warns(ApproximationWarning):
        TrafficModel(0.01, 0.5, 0.5, 10)


@given(st.floats(1.0, 30.0), st.floats(1.05, 5.0), st.floats(0.1, 100.0))
def test_jensen_for_both_speed_kinds(lo, ratio, var):
    for s in (UniformSpeed(lo, lo * ratio), TruncatedGaussianSpeed(lo, lo * ratio, var)):
        assert s.mean_inverse() > 1.0 / s.mean()


@given(st.floats(1.0, 30.0), st.floats(1.05, 5.0), st.floats(0.01, 1e4), st.integers(0, 2**32))
def test_truncated_gaussian_samples_in_support(lo, ratio, var, seed):
    s = TruncatedGaussianSpeed(lo, lo * ratio, var)
    x = s.sample(np.random.default_rng(seed), 500)
    assert x.min() >= s.v_min and x.max() <= s.v_max


def test_uniform_mean_inverse_closed_form():
    a, b = SPEED_20_100.v_min, SPEED_20_100.v_max
    assert SPEED_20_100.mean_inverse() == pytest.approx(math.log(b / a) / (b - a), rel=1e-15)
    assert SPEED_20_100.mean_inverse() == pytest.approx(0.07242470605953452, rel=1e-14)


# ------------------------------------------------------------------ rates


def test_capacity_rate_boundary_continuity():
    g = CellGeometry(100.0, 2, None, 10.0, 2.0)
    assert capacity_rate(10.0, 1.0, g) == 1.0
    assert capacity_rate(10.0 * (1 + 1e-12), 1.0, g) == pytest.approx(1.0, rel=1e-10)


def test_capacity_rate_square_law():
    g = CellGeometry(100.0, 2, None, 10.0, 2.0)
    assert capacity_rate(20.0, 1.0, g) == pytest.approx(0.25, rel=1e-15)


def test_capacity_rate_reference_value():
    assert capacity_rate(35.0, 0.7, GEOM) == pytest.approx(0.0305441419328485011, rel=1e-14)


@pytest.mark.parametrize("d,p", [(-1.0, 1.0), (5.0, 0.0), (5.0, -1.0)])
def test_capacity_rate_rejects(d, p):
    with pytest.raises(InvalidArgument):
        capacity_rate(d, p, GEOM)


def test_region_rates_two_regions():
    g = CellGeometry(100.0, 2, (0.5, 1.0), 10.0, 2.0)
    np.testing.assert_allclose(region_rates(g, 1.0), [0.04, 0.01], rtol=1e-14)


def test_region_rates_single_region_is_edge_rate():
    g = CellGeometry(70.0, 1, None, 10.0, 3.0)
    assert region_rates(g, 0.7)[0] == pytest.approx(capacity_rate(70.0, 0.7, g), rel=1e-14)


@given(config_draws, st.floats(0.01, 10.0))
def test_region_rates_decreasing_and_linear(cfg, p):
    geom = cfg[0]
    r = region_rates(geom, p)
    assert np.all(np.diff(r) < 0)
    assert r[-1] == pytest.approx(capacity_rate(geom.half_length, p, geom), rel=1e-12)
    np.testing.assert_allclose(region_rates(geom, 2 * p), 2 * r, rtol=1e-14)


# ------------------------------------------------------- completion probs


def test_completion_prob_zero_job_rate():
    for n in (-5, -1, 1, 5):
        assert completion_prob(n, GEOM, 0.7, SPEED_20_40, 0.0) == 0.0


def test_completion_prob_last_region_single_term():
    r = region_rates(GEOM, 0.7)
    want = 0.2 * 70.0 / 5 * r[-1] * SPEED_20_40.mean_inverse()
    assert completion_prob(5, GEOM, 0.7, SPEED_20_40, 0.2) == pytest.approx(want, rel=1e-14)


def test_completion_prob_reference_config():
    exact = completion_prob_exact(-5, GEOM, 0.7, SPEED_20_40, 0.2)
    lin = completion_prob(-5, GEOM, 0.7, SPEED_20_40, 0.2)
    assert exact == pytest.approx(0.2370591934232763, rel=1e-12)
    assert lin == pytest.approx(0.2720668493574744, rel=1e-12)
    # 1 - e^-x <= x <= 1 - e^-x + x^2/2 averaged over V
    c = lin / SPEED_20_40.mean_inverse()
    a, b = SPEED_20_40.v_min, SPEED_20_40.v_max
    e_inv2 = (1 / a - 1 / b) / (b - a)
    assert 0 <= lin - exact <= c**2 * e_inv2 / 2


@pytest.mark.parametrize("n", [0, 6, -6])
def test_completion_prob_bad_index(n):
    with pytest.raises(InvalidArgument):
        completion_prob(n, GEOM, 0.7, SPEED_20_40, 0.2)


def test_completion_prob_clamps_with_warning():
    with pytest.warns(ApproximationWarning):
        assert completion_prob(-5, GEOM, 50.0, SPEED_20_40, 0.2) == 1.0


def test_completion_prob_exact_gaussian_matches_quadrature():
    s = TruncatedGaussianSpeed(10.0, 20.0, 4.0)
    lin = completion_prob(-3, GEOM, 0.7, s, 0.2)
    c = lin / s.mean_inverse()
    want = 1 - s.expect(lambda v: math.exp(-c / v))
    assert completion_prob_exact(-3, GEOM, 0.7, s, 0.2) == pytest.approx(want, rel=1e-10)


@given(config_draws, st.integers(1, 6), st.booleans())
def test_linearisation_error_bound(cfg, k, negative):
    # 1 - e^-x >= x - x^2/2 gives rel. error <= x_max / (2 - x_max), x_max at v_min
    geom, traffic, speed, power = cfg
    n = min(k, geom.n_regions) * (-1 if negative else 1)
    exact = completion_prob_exact(n, geom, power, speed, traffic.job_rate)
    lin = completion_prob(n, geom, power, speed, traffic.job_rate)
    x_max = lin / speed.mean_inverse() / speed.v_min
    assume(0 < exact and x_max < 1)
    err = (lin - exact) / exact
    assert -1e-9 <= err <= x_max / (2 - x_max) + 1e-9
    if x_max < 2 / 11:
        assert err < 0.10


def test_linearisation_error_at_psi_point_two():
    # deterministic-speed limit: exact 0.2 already means an 11.6% linearisation error
    x = -math.log(0.8)
    assert x / 0.2 - 1 == pytest.approx(0.1157, abs=1e-4)


# ------------------------------------------------------------ constants


def test_ho_constants_reference():
    c = ho_constants(GEOM, TrafficModel(0.01, 0.2, 0.4, 60))
    assert c.c_e_ho == pytest.approx(1003.4352898921473, rel=1e-13)
    assert c.c_h_ho == pytest.approx(1824.4277998039042, rel=1e-13)
    assert c.c_b_e == pytest.approx(1.0, rel=1e-14)
    assert c.c_b_h == 2.0


def test_ho_constants_mass_at_edge_region():
    probs = [0.0] * 9 + [1.0]
    c = ho_constants(GEOM, TrafficModel(0.01, 0.2, 0.4, 60, probs))
    assert c.c_e_ho == pytest.approx(0.2 / 5 * GEOM.r0 * 1.0, rel=1e-14)
    assert c.c_b_e == 0.0


@given(config_draws, st.integers(0, 2**32))
def test_ho_constant_ordering(cfg, seed):
    geom, traffic, _, _ = cfg
    probs = tuple(np.random.default_rng(seed).dirichlet(np.ones(2 * geom.n_regions)))
    c = ho_constants(geom, TrafficModel(traffic.arrival_density, traffic.job_rate,
                                        traffic.ho_bytes, traffic.servers, probs))
    assert c.c_h_ho >= c.c_e_ho * (1 - 1e-14)
    assert c.c_b_h == 2.0


# ------------------------------------------------------ the load chain


def test_table7_base_reference_values():
    p_e, p_h = ho_probabilities(GEOM, TRAFFIC, 0.7, SPEED_20_100)
    b_e, b_h = service_times(GEOM, TRAFFIC, SPEED_20_100)
    assert p_e == pytest.approx(0.9131385465835415, rel=1e-13)
    assert p_h == pytest.approx(0.9220700846973481, rel=1e-13)
    assert b_e == pytest.approx(5.069729424167416, rel=1e-13)
    assert b_h == pytest.approx(10.139458848334832, rel=1e-13)
    lam_h = ho_rate(GEOM, TRAFFIC, 0.7, SPEED_20_100)
    assert lam_h == pytest.approx(8.202202968219158, rel=1e-12)
    lam_l = TRAFFIC.arrival_density * GEOM.half_length
    assert abs(lam_h - (lam_l * p_e + lam_h * p_h)) / lam_h < 1e-12
    assert load_factor(GEOM, TRAFFIC, 0.7, SPEED_20_100) == pytest.approx(1.4452451676477526,
                                                                          rel=1e-12)


def test_b_h_closed_form():
    a, b = SPEED_20_100.v_min, SPEED_20_100.v_max
    assert service_times(GEOM, TRAFFIC, SPEED_20_100)[1] == pytest.approx(
        140 * math.log(b / a) / (b - a), rel=1e-14)


def test_no_handover_cost_and_edge_arrivals_equal_probs():
    t = TrafficModel(0.01, 0.2, 0.0, 60, [1.0] + [0.0] * 9)
    p_e, p_h = ho_probabilities(GEOM, t, 0.7, SPEED_20_40)
    assert p_e == pytest.approx(p_h, rel=1e-14)
    b_e, b_h = service_times(GEOM, t, SPEED_20_40)
    assert b_e == pytest.approx(b_h, rel=1e-14)


def test_regime_violation_for_huge_power():
    with pytest.raises(RegimeViolation) as e:
        ho_probabilities(GEOM, TRAFFIC, 50.0, SPEED_20_40)
    assert e.value.value < 0


def test_unsupportable_velocity_tiny_power():
    with pytest.raises(UnsupportableVelocity):
        ho_rate(GEOM, TRAFFIC, 1e-3, SPEED_20_100)
    with pytest.raises(UnsupportableVelocity):
        load_factor(GEOM, TRAFFIC, 1e-3, SPEED_20_100)


def test_zero_arrivals():
    t = TrafficModel(0.0, 0.2, 0.4, 60)
    assert ho_rate(GEOM, t, 0.7, SPEED_20_40) == 0.0
    assert load_factor(GEOM, t, 0.7, SPEED_20_40) == 0.0


def test_two_class_reference():
    classes = []
    for lo, hi in ((20, 30), (30, 40)):
        p = SPEED_20_40.prob(lo * KMPH, hi * KMPH)
        classes.append((p, SPEED_20_40.cond_mean_inverse(lo * KMPH, hi * KMPH), 0.7))
    assert load_factor_classes(GEOM, TRAFFIC, classes) == pytest.approx(1.022481556011947,
                                                                        rel=1e-12)


def test_single_class_collapse():
    inv = SPEED_20_40.mean_inverse()
    assert load_factor_classes(GEOM, TRAFFIC, [(1.0, inv, 0.7)]) == pytest.approx(
        load_factor(GEOM, TRAFFIC, 0.7, SPEED_20_40), rel=1e-14)


def test_class_error_names_class():
    inv = SPEED_20_40.mean_inverse()
    with pytest.raises(UnsupportableVelocity, match="class 2"):
        load_factor_classes(GEOM, TRAFFIC, [(0.5, inv, 0.7), (0.5, inv, 1e-4)])


def test_self_consistency_and_fixed_point_on_1000_configs():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        geom, traffic, speed, power = random_config(rng, skew=bool(rng.integers(2)))
        p_e, p_h = ho_probabilities(geom, traffic, power, speed)
        b_e, b_h = service_times(geom, traffic, speed)
        lam_l = traffic.arrival_density * geom.half_length
        lam_h = ho_rate(geom, traffic, power, speed)
        assert rel(lam_h, lam_l * p_e + lam_h * p_h) < 1e-12
        assembled = (lam_l * b_e + lam_h * b_h) / traffic.servers
        assert rel(load_factor(geom, traffic, power, speed), assembled) < 1e-12


def test_rho_strictly_decreasing_in_power():
    rng = np.random.default_rng(7)
    for _ in range(100):
        geom, traffic, speed, power = random_config(rng)
        lo = load_factor(geom, traffic, power, speed)
        hi = load_factor(geom, traffic, power * (1 + 1e-3), speed)
        assert hi < lo


# -------------------------------------------------- continuous-policy rho


def test_continuous_constant_policy_matches_closed_form_without_overhead():
    t = TrafficModel(0.01, 0.2, 0.0, 60)
    got = load_factor_continuous(GEOM, t, EqualPower(0.7), SPEED_20_100)
    assert got == pytest.approx(load_factor(GEOM, t, 0.7, SPEED_20_100), rel=1e-8)


def test_continuous_degenerate_speed_matches_single_class():
    v = 10.0
    s = UniformSpeed(v, v * (1 + 1e-7))
    got = load_factor_continuous(GEOM, TRAFFIC, EqualPower(0.7), s)
    want = load_factor_classes(GEOM, TRAFFIC, [(1.0, s.mean_inverse(), 0.7)])
    assert got == pytest.approx(want, rel=1e-6)


def test_continuous_pole_reports_speed():
    with pytest.raises(UnsupportableVelocity) as e:
        load_factor_continuous(GEOM, TRAFFIC, EqualPower(0.05), SPEED_20_100)
    assert SPEED_20_100.v_min <= e.value.speed <= SPEED_20_100.v_max


# -------------------------------------------------------------- Erlang B


def test_erlang_b_spot_values():
    assert erlang_b(0.0, 7) == 0.0
    assert erlang_b(1.0, 1) == 0.5
    assert erlang_b(1.0, 2) == pytest.approx(0.2, rel=1e-15)
    assert erlang_b(5.0, 10) == pytest.approx(0.018384570336648133, rel=1e-13)


def test_erlang_b_no_overflow_at_60_servers():
    b = erlang_b(55.0, 60)
    assert 0 < b < 1 and math.isfinite(b)


def test_erlang_b_rejects_negative_load():
    with pytest.raises(InvalidArgument):
        erlang_b(-0.1, 3)


@given(st.floats(0.0, 50.0), st.integers(1, 25))
def test_erlang_b_matches_direct_sum(rho, k):
    want = erlang_direct(rho, k)
    got = erlang_b(rho, k)
    assert got == want or abs(got - want) <= 1e-12 * want


@given(st.floats(0.01, 80.0), st.floats(0.01, 80.0), st.integers(1, 60))
def test_busy_probability_strictly_increasing_in_load(a, b, k):
    assume(abs(a - b) > 1e-6 * max(a, b))
    lo, hi = sorted((a, b))
    assert erlang_b(lo, k) < erlang_b(hi, k)


def test_analytic_metrics_bundle():
    m = analytic_metrics(GEOM, TRAFFIC, 0.7, SPEED_20_100)
    assert m["p_busy"] == pytest.approx(erlang_b(m["rho"], 60), rel=1e-15)
    assert set(m) == {"p_e_ho", "p_h_ho", "b_e", "b_h", "ho_rate", "rho", "p_busy"}
