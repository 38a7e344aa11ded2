import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from smallcell import (KMPH, CellGeometry, InvalidArgument, PreconditionError, ScalingSpec,
                       TrafficModel, UniformSpeed, UnsupportableVelocity, joint_cost, optimal_cell_size_closed_form,
                       optimal_cell_size_numeric, rho_at_optimum)
from smallcell.sizing import golden_section, joint_cost_polynomial

SKEWED = (0.02,) * 6 + (0.08, 0.16, 0.26, 0.38)
GEOM = CellGeometry(100.0, 5, None, 10.0, 2.0)
TRAFFIC = TrafficModel(0.01, 0.2, 0.4, 60, SKEWED)
SPEED = UniformSpeed(20 * KMPH, 40 * KMPH)
SCALING = ScalingSpec(2e-6, 1.0, 1.0)


def closed(traffic=TRAFFIC, speed=SPEED, scaling=SCALING):
    return optimal_cell_size_closed_form(GEOM, traffic, speed, scaling)


def test_joint_cost_reference():
    # scripts/derive_oracles.py
    assert joint_cost(100.0, GEOM, TRAFFIC, SPEED, SCALING) == pytest.approx(0.6663944716611109,
                                                                             rel=1e-12)


def test_zero_weight_is_rho_star():
    s = ScalingSpec(2e-6, 1.0, 0.0)
    assert joint_cost(120.0, GEOM, TRAFFIC, SPEED, s) == rho_at_optimum(
        GEOM.with_length(120.0), TRAFFIC, SPEED, s.budget(120.0, 2.0))


@given(st.floats(55.0, 2000.0), st.floats(1e-7, 1e-4), st.floats(-0.5, 2.0), st.floats(0.0, 10.0),
       st.floats(2.0, 4.0))
def test_polynomial_form_identity(L, p_tilde, gamma, omega, beta):
    g = CellGeometry(L, 5, None, 10.0, beta)
    s = ScalingSpec(p_tilde, gamma, omega)
    try:
        direct = joint_cost(L, g, TRAFFIC, SPEED, s)
    except UnsupportableVelocity:
        assume(False)
    poly = joint_cost_polynomial(L, g, TRAFFIC, SPEED, s)
    assert poly == pytest.approx(direct, rel=1e-12)


def test_joint_cost_rejects_small_cells():
    with pytest.raises(InvalidArgument):
        joint_cost(50.0, GEOM, TRAFFIC, SPEED, SCALING)


def test_gamma_minus_one_is_increasing_and_hits_floor():
    s = ScalingSpec(1e-2, -1.0, 1.0)
    Ls = np.linspace(50.0, 100.0, 101)[1:]
    vals = [joint_cost(L, GEOM, TRAFFIC, SPEED, s) for L in Ls]
    assert np.all(np.diff(vals) > 0)
    res = optimal_cell_size_numeric(GEOM, TRAFFIC, SPEED, s)
    assert res.at_boundary
    assert res.half_length == pytest.approx(1.01 * 50.0)


def test_closed_form_preconditions():
    with pytest.raises(PreconditionError, match="pathloss_exp"):
        optimal_cell_size_closed_form(CellGeometry(100.0, 5, None, 10.0, 3.0), TRAFFIC, SPEED,
                                      SCALING)
    with pytest.raises(PreconditionError, match="gamma"):
        closed(scaling=ScalingSpec(2e-6, 2.0, 1.0))
    with pytest.raises(PreconditionError, match="C_rho_1"):
        closed(traffic=TrafficModel(0.01, 0.2, 0.4, 60))


def test_closed_form_is_stationary_and_matches_numeric():
    L = closed()
    h = 1e-5 * L
    f = joint_cost(L, GEOM, TRAFFIC, SPEED, SCALING)
    d = (joint_cost(L + h, GEOM, TRAFFIC, SPEED, SCALING)
         - joint_cost(L - h, GEOM, TRAFFIC, SPEED, SCALING)) / (2 * h)
    assert abs(d) < 1e-6 * f / L
    res = optimal_cell_size_numeric(GEOM, TRAFFIC, SPEED, SCALING)
    assert not res.at_boundary and res.unimodal
    assert res.half_length == pytest.approx(L, rel=5e-3)


def test_numeric_beats_samples_and_is_deterministic():
    res = optimal_cell_size_numeric(GEOM, TRAFFIC, SPEED, SCALING, (60.0, 600.0))
    samples = [joint_cost(L, GEOM, TRAFFIC, SPEED, SCALING) for L in np.linspace(60.0, 600.0, 100)]
    assert res.cost <= min(samples)
    assert optimal_cell_size_numeric(GEOM, TRAFFIC, SPEED, SCALING, (60.0, 600.0)) == res


def test_bad_bracket():
    with pytest.raises(InvalidArgument):
        optimal_cell_size_numeric(GEOM, TRAFFIC, SPEED, SCALING, (40.0, 100.0))


def test_golden_section_quadratic():
    assert golden_section(lambda x: (x - 3.3) ** 2, 0.0, 10.0, 1e-9) == pytest.approx(3.3, rel=1e-8)


def test_optimal_size_grows_with_speed():
    faster = UniformSpeed(30 * KMPH, 50 * KMPH)
    assert closed(speed=faster) > closed()


def test_optimal_size_falls_with_power_weight():
    sizes = [closed(scaling=ScalingSpec(2e-6, 1.0, w)) for w in np.geomspace(0.1, 10.0, 9)]
    assert np.all(np.diff(sizes) < 0)


def test_optimal_size_grows_with_overhead():
    sizes = [closed(traffic=TrafficModel(0.01, 0.2, sh, 60, SKEWED))
             for sh in np.geomspace(0.05, 0.5, 7)]
    assert np.all(np.diff(sizes) > 0)


def test_optimal_size_falls_with_job_rate_at_fixed_overhead():
    # C_h_ho carries a factor mu, which outweighs the sqrt(mu s_h) prefactor
    sizes = [closed(traffic=TrafficModel(0.01, mu, 0.4, 60, SKEWED))
             for mu in np.geomspace(0.05, 0.5, 7)]
    assert np.all(np.diff(sizes) < 0)
