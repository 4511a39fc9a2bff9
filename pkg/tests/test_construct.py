import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import benchmark_datum, constant_datum
from fracgap.construct import (
    CaseConfig,
    HypothesisViolated,
    LiftSpec,
    ResolutionError,
    StepFunction,
    build_v_eps,
    construction_constants,
    delta_objective,
    delta_star,
    delta_star_value,
    discrete_ball_volume,
    interval_lift_drop,
    lift_ball,
    lift_constants,
    refined_1d_bound,
    refined_1d_leading,
    schedule_delta,
    theta_star,
    varsigma,
)
from fracgap.energy import DoubleWell, ExteriorDatum, PhaseField, kinetic, potential
from fracgap.geometry import FarField, LipschitzGraph, build_grid
from fracgap.quadrature import interval_interaction
from fracgap.regions import Disk


def sign_field(g):
    return PhaseField(g.grid, g.values[g.grid.omega_index], g)


# --- constants ------------------------------------------------------------------

def test_lift_constants_1d_quarter():
    C0, C1 = lift_constants(0.25, 1, 0.25)
    assert C0 == pytest.approx(0.25**0.5 * 2**0.5 / (0.25 * 0.5), rel=1e-13)
    assert C0 == pytest.approx(5.65685, abs=1e-5)
    assert C1 == pytest.approx(4 * 2**-1.5, rel=1e-13)


def test_theta_star_example():
    th = theta_star(2.0, 0.25, 1, 0.25)
    C0, C1 = 4 * 2**0.5, 4 * 2**-1.5
    assert th == pytest.approx(2 * C1 * 2 * 0.0625 / (2 * C0 + C1 * 0.0625), rel=1e-13)
    assert th == pytest.approx(0.03101, abs=1e-5)


@settings(max_examples=60, deadline=None)
@given(b=st.floats(0.01, 1.3), c=st.floats(0.01, 0.49), n=st.sampled_from([1, 2]), s=st.floats(0.02, 0.48))
def test_theta_star_below_b_and_increasing(b, c, n, s):
    th = theta_star(b, c, n, s)
    assert 0 < th < b
    assert theta_star(1.5 * b, c, n, s) > th


def test_theta_star_domain():
    with pytest.raises(ValueError):
        theta_star(0.0, 0.25, 1, 0.25)
    with pytest.raises(ValueError):
        theta_star(1.0, 0.5, 1, 0.25)


def test_varsigma_formula():
    _, C1 = lift_constants(0.2, 2, 0.3)
    assert varsigma(0.1, 1.5, 0.2, 2, 0.3) == pytest.approx(0.1 * C1 * 0.2**4 * (3.0 - 0.1), rel=1e-14)


# --- delta schedule -----------------------------------------------------------

def test_delta_star_example():
    assert delta_star(0.01, 0.25, 1.0, 1.0) == pytest.approx(0.0025, rel=1e-13)
    assert delta_star_value(0.01, 0.25, 1.0, 1.0) == pytest.approx(-0.025, rel=1e-13)
    grid = np.linspace(1e-5, 0.01, 200001)
    vals = delta_objective(grid, 0.01, 0.25, 1.0, 1.0)
    assert grid[np.argmin(vals)] == pytest.approx(0.0025, rel=1e-3)
    assert vals.min() == pytest.approx(-0.025, rel=1e-6)


def test_delta_star_linear_in_eps():
    a = delta_star(0.01, 0.3, 2.0, 0.5)
    assert delta_star(0.02, 0.3, 2.0, 0.5) == pytest.approx(2 * a, rel=1e-14)


def test_schedule_delta_is_dyadic_multiple_of_eps():
    dstar, d = schedule_delta(2**-6, 0.25, 1.0, 0.1, cap=4)
    assert dstar / 2**-6 > 4 and d == 4 * 2**-6
    dstar, d = schedule_delta(2**-6, 0.25, 0.01, 1.0, cap=4)
    lam = d / 2**-6
    assert lam <= dstar / 2**-6 < 2 * lam and math.log2(lam) == int(math.log2(lam))


def test_discrete_ball_volume_counts():
    assert discrete_ball_volume(1, 3.5) == 7
    assert discrete_ball_volume(1, 3.0) == 7
    assert discrete_ball_volume(2, 1.0) == 5
    assert discrete_ball_volume(2, 1.5) == 9


# --- single lift ----------------------------------------------------------------

def _spec_example(g):
    s, c, delta, b = 0.25, 0.25, 0.2, 2.0
    th = theta_star(b, c, 1, s)
    spec = LiftSpec(np.array([-0.06]), c * delta, th, q=np.array([0.06]), delta=delta)
    return spec, th, s, c, delta, b


def test_lift_example_meets_drop_bound(bench_g):
    spec, th, s, c, delta, b = _spec_example(bench_g)
    u = sign_field(bench_g)
    new, drop, cells = lift_ball(u, spec, b, s)
    sig = varsigma(th, b, c, 1, s)
    assert drop <= -sig * delta**0.5
    assert np.all(np.isclose(new.full()[cells], -1 + th))


def test_lift_drop_identity_matches_direct_difference(bench_g64):
    spec, th, s, c, delta, b = _spec_example(bench_g64)
    u = sign_field(bench_g64)
    new, drop, _ = lift_ball(u, spec, b, s)
    direct = kinetic(new, s) - kinetic(u, s)
    assert drop == pytest.approx(direct, rel=1e-10)
    # and the quadratic-form route agrees with the run route
    _, drop_form, _ = lift_ball(u, spec, b, s, method="form")
    assert drop_form == pytest.approx(drop, rel=1e-10)


def test_lift_upper_side_mirrors_lower(bench_g64):
    spec, th, s, c, delta, b = _spec_example(bench_g64)
    u = sign_field(bench_g64)
    _, drop_lo, _ = lift_ball(u, spec, b, s)
    mirrored = LiftSpec(-spec.center, spec.radius, th, q=-spec.q, delta=delta, side="upper")
    new, drop_up, cells = lift_ball(u, mirrored, b, s)
    assert drop_up == pytest.approx(drop_lo, rel=1e-12)
    assert np.all(np.isclose(new.full()[cells], 1 - th))
    assert drop_up == pytest.approx(kinetic(new, s) - kinetic(u, s), rel=1e-10)


def test_lift_2d_identity_matches_direct_difference():
    grid = build_grid(((-1, 1), (-1, 1)), 32, Disk(0, 0, 0.9), R=2)
    g = ExteriorDatum.sample(grid, lambda p: np.sign(p[:, 1]), FarField(-1.0, 1.0, (0.0, 1.0), 0.0))
    u = PhaseField(grid, np.sign(grid.centers[grid.omega_index, 1]), g)
    s, c, delta, b = 0.25, 0.2, 0.4, 2.0
    th = theta_star(b, c, 2, s)
    spec = LiftSpec(np.array([0.0, -0.1]), c * delta, th, q=np.array([0.0, 0.1]), delta=delta)
    new, drop, _ = lift_ball(u, spec, b, s)
    assert drop == pytest.approx(kinetic(new, s) - kinetic(u, s), rel=1e-10)
    assert drop <= -varsigma(th, b, c, 2, s) * delta ** (2 - 2 * s)


def test_lift_potential_increase_is_well_value_times_volume(bench_g):
    spec, th, s, c, delta, b = _spec_example(bench_g)
    u = sign_field(bench_g)
    new, _, cells = lift_ball(u, spec, b, s)
    W = DoubleWell()
    V = len(cells) * bench_g.grid.cell_volume
    assert potential(new) - potential(u) == pytest.approx(float(W(np.array([th - 1]))[0]) * V, rel=1e-12)


def test_lift_without_level_set_is_refused():
    g = constant_datum(-1.0, h=2**-6)
    u = PhaseField.constant(g, -1.0)
    spec = LiftSpec(np.array([0.0]), 0.05, 0.01)
    with pytest.raises(HypothesisViolated, match="b-level"):
        lift_ball(u, spec, 2.0, 0.25)
    spec = LiftSpec(np.array([0.0]), 0.05, 0.01, q=np.array([0.1]), delta=0.2)
    with pytest.raises(HypothesisViolated, match="-1\\+b"):
        lift_ball(u, spec, 2.0, 0.25)


def test_lift_hypothesis_gates(bench_g64):
    u = sign_field(bench_g64)
    q = np.array([0.06])
    with pytest.raises(HypothesisViolated, match="theta"):
        lift_ball(u, LiftSpec(np.array([-0.06]), 0.05, 2.5, q=q), 2.0, 0.25)
    with pytest.raises(HypothesisViolated, match="well value"):
        lift_ball(u, LiftSpec(np.array([0.0]), 0.05, 0.01, q=q), 2.0, 0.25)
    with pytest.raises(HypothesisViolated, match="domain"):
        lift_ball(u, LiftSpec(np.array([-0.98]), 0.05, 0.01, q=q), 2.0, 0.25)
    with pytest.raises(HypothesisViolated, match="p - q"):
        lift_ball(u, LiftSpec(np.array([-0.3]), 0.05, 0.01, q=q, delta=0.2), 2.0, 0.25)


# --- v_eps ----------------------------------------------------------------------

def _interior_case(c=0.2):
    return CaseConfig(case="interior", graph=LipschitzGraph((0.0,), 0.5, 0.0, 0.1), c=c)


def test_build_v_eps_interior_single_site(bench_g):
    s, eps = 0.25, 2**-5
    u = sign_field(bench_g)
    v, tr = build_v_eps(u, eps, s, _interior_case())
    assert tr.N_delta == 1
    assert tr.drops[0] <= tr.bounds[0] < 0
    assert tr.achieved_kappa > 0
    assert tr.drops[0] == pytest.approx(kinetic(v, s) - kinetic(u, s), rel=1e-10)
    # potential increase equals W(θ-1) times the lifted volume exactly
    W = DoubleWell()
    vol = sum(tr.ball_cells) * bench_g.grid.cell_volume
    assert tr.potential_increase == pytest.approx(float(W(np.array([tr.theta - 1]))[0]) * vol, rel=1e-12)
    assert tr.omega * tr.delta == pytest.approx(float(W(np.array([tr.theta - 1]))[0]) * vol, rel=1e-12)


def test_build_v_eps_gap_is_negative(bench_g):
    s, eps = 0.25, 2**-6
    u = sign_field(bench_g)
    v, tr = build_v_eps(u, eps, s, _interior_case())
    from fracgap.energy import f_eps

    gap = f_eps(v, eps, s).total / eps - kinetic(u, s)
    assert gap < 0
    assert gap == pytest.approx(tr.total_drop + eps ** (-2 * s) * tr.potential_increase, rel=1e-9)


def test_build_v_eps_refuses_unresolved_delta():
    g = benchmark_datum(2**-4)
    with pytest.raises(ResolutionError, match="refine"):
        build_v_eps(sign_field(g), 2**-8, 0.25, _interior_case())


def test_build_v_eps_refuses_large_delta(bench_g):
    case = _interior_case()
    case.delta = 1.0
    with pytest.raises(ResolutionError, match="not small"):
        build_v_eps(sign_field(bench_g), 0.5, 0.25, case)


def test_construction_constants_keys():
    const = construction_constants(CaseConfig(b=1.0, c=0.2), 1, 0.3)
    assert set(const) == {"b", "theta", "varsigma", "omega_continuum", "W_level"}
    assert const["theta"] == pytest.approx(theta_star(1.0, 0.2, 1, 0.3))


# --- refined one-dimensional bound --------------------------------------------------

def test_refined_leading_coefficient():
    assert refined_1d_leading(2.0, 0.25) == pytest.approx(-16.0, rel=1e-14)
    for b in (0.5, 1.0, 1.7):
        assert refined_1d_leading(b, 0.3) == pytest.approx(-(b**2) / (2 * 0.3 * 0.4), rel=1e-14)


def test_refined_bound_vanishes_from_below_at_rate():
    s = 0.25
    deltas = (1e-4, 1e-6, 1e-8, 1e-10)
    vals = [refined_1d_bound(1.0, 2.0, d, s, 1.0) for d in deltas]
    assert all(v < 0 for v in vals)
    # bound / delta^(1-2s) approaches the leading coefficient -16, the linear term fading like delta^(2s)
    excess = [v / d**0.5 + 16 for v, d in zip(vals, deltas)]
    assert all(e > 0 for e in excess)
    assert all(b / a == pytest.approx(0.1, rel=1e-9) for a, b in zip(excess, excess[1:]))


def test_interval_lift_drop_example_below_bound():
    u = StepFunction([0.0], [-1.0, 1.0])
    drop = interval_lift_drop(u, 0.0, 0.05, 1.0, 0.25)
    assert drop < 0
    assert drop <= refined_1d_bound(1.0, 2.0, 0.05, 0.25, 1.0)


def test_interval_lift_drop_closed_form_single_neighbor():
    # ū = -1 left of 0, +1 right: only pieces with values != -1 interact through θ-2-2ū
    s, th, d = 0.3, 0.7, 0.1
    u = StepFunction([0.0], [-1.0, 1.0])
    left = interval_interaction((-math.inf, -d), (-d, 0.0), s)
    right = interval_interaction((-d, 0.0), (0.0, math.inf), s)
    want = 2 * th * ((th - 2 + 2) * left + (th - 2 - 2) * right)
    assert interval_lift_drop(u, 0.0, d, th, s) == pytest.approx(want, rel=1e-12)


def test_refined_bound_domain():
    with pytest.raises(ValueError):
        refined_1d_bound(1.0, 2.0, 0.6, 0.25, 1.0)
    with pytest.raises(ValueError):
        refined_1d_bound(1.0, 1.0, 0.1, 0.25, 1.5)


def test_refined_constant_holds_where_eta_step_constant_fails():
    # worst case for the bound: ū = -1 outside (0, a), so every far piece raises the energy
    held, eta_fails = True, 0
    for s in (0.02, 0.1, 0.25, 0.4, 0.48):
        for a in (0.05, 0.5, 1.0):
            for b in (0.05, 1.0, 2.0):
                for f in (0.01, 0.1, 0.49):
                    d, th = f * a, b / 2
                    drop = interval_lift_drop(StepFunction([0.0, a], [-1.0, -1 + b, -1.0]), 0.0, d, th, s)
                    held &= drop <= refined_1d_bound(a, b, d, s, th)
                    eta_fails += drop > refined_1d_bound(a, b, d, s, th, C=2 * s)
    assert held
    assert eta_fails > 0
