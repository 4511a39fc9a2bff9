import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import benchmark_datum, constant_datum
from fracgap.energy import (
    DoubleWell,
    ExteriorDatum,
    PhaseField,
    f_eps,
    frac_perimeter,
    h_functional,
    kinetic,
    kinetic_breakdown,
    ladder,
    ladder_telescoped,
    potential,
)
from fracgap.geometry import FAR_EMPTY, FAR_FULL, FarField, SetRegion, build_grid
from fracgap.quadrature import interval_interaction, unit_ball_perimeter
from fracgap.regions import Disk, HalfSpace, Interval


def sign_field(g: ExteriorDatum) -> PhaseField:
    return PhaseField(g.grid, g.values[g.grid.omega_index], g)


def sign_closed_form(s: float) -> float:
    # 8 [I((-1,0),(0,inf)) + I((-inf,-1),(0,1))], independent of the grid
    return 8 * 2 ** (1 - 2 * s) / (2 * s * (1 - 2 * s))


# --- kinetic ----------------------------------------------------------------

def test_kinetic_constant_matches_constant_datum():
    g = constant_datum(0.3)
    assert kinetic(PhaseField.constant(g, 0.3), 0.25) == 0.0


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
def test_kinetic_sign_matches_interval_sum(s):
    g = benchmark_datum(2**-6)
    parts = (
        interval_interaction((-1, 0), (0, math.inf), s)
        + interval_interaction((-math.inf, -1), (0, 1), s)
    )
    assert kinetic(sign_field(g), s) == pytest.approx(sign_closed_form(s), rel=1e-10)
    assert sign_closed_form(s) == pytest.approx(8 * parts, rel=1e-13)


def test_kinetic_domain_filling_box():
    g = build_grid((-1, 1), 8, Interval(-1, 1), R=1)
    datum = ExteriorDatum.sample(g, lambda p: np.sign(p[:, 0]), FarField(-1.0, 1.0, (1.0,), 0.0))
    assert kinetic(sign_field(datum), 0.25) == pytest.approx(32 * math.sqrt(2), rel=1e-12)


def test_kinetic_runs_and_form_agree_on_random_fields():
    g = benchmark_datum(2**-5, L=2)
    rng = np.random.default_rng(11)
    for _ in range(5):
        u = PhaseField(g.grid, rng.uniform(-1, 1, g.grid.n_omega), g)
        a, b = kinetic(u, 0.3, method="runs"), kinetic(u, 0.3, method="form")
        assert a == pytest.approx(b, rel=1e-10)


def test_kinetic_breakdown_parts_are_nonnegative_and_sum():
    g = benchmark_datum(2**-5)
    u = sign_field(g)
    parts = kinetic_breakdown(u, 0.25)
    assert all(p >= 0 for p in parts)
    assert sum(parts) == pytest.approx(kinetic(u, 0.25), rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0.05, 1.0), s=st.floats(0.05, 0.45))
def test_kinetic_homogeneity_and_sign_symmetry(seed, lam, s):
    g = build_grid((-2, 2), 64, Interval(-1, 1), R=2)
    rng = np.random.default_rng(seed)
    ext = np.clip(rng.normal(size=g.size), -1, 1)
    vals = rng.uniform(-1, 1, g.n_omega)
    far = FarField(0.5)
    u = PhaseField(g, vals, ExteriorDatum(g, ext, far))
    u_scaled = PhaseField(g, lam * vals, ExteriorDatum(g, lam * ext, FarField(0.5 * lam)))
    u_neg = PhaseField(g, -vals, ExteriorDatum(g, -ext, FarField(-0.5)))
    K = kinetic(u, s)
    assert kinetic(u_scaled, s) == pytest.approx(lam**2 * K, rel=1e-10)
    assert kinetic(u_neg, s) == pytest.approx(K, rel=1e-12)


def test_h_functional_equals_kinetic_of_induced_field():
    g = benchmark_datum(2**-6)
    E = SetRegion.from_region(g.grid, Interval(0, 100), HalfSpace((-1.0,), 0.0))
    assert h_functional(E, g, 0.25) == pytest.approx(kinetic(PhaseField.from_set(E, g), 0.25), rel=1e-10)
    assert h_functional(E, g, 0.25) == pytest.approx(sign_closed_form(0.25), rel=1e-10)


def test_h_functional_full_set_with_unit_datum():
    g = constant_datum(1.0)
    E = SetRegion(g.grid, np.ones(g.grid.size, bool), FAR_FULL)
    assert h_functional(E, g, 0.25) == 0.0


# --- potential and F_eps ---------------------------------------------------------

def test_potential_wells_and_midpoint():
    g = benchmark_datum(2**-5)
    u = sign_field(g)
    assert potential(u) == 0.0
    # W(0) = 1 on every domain cell: the potential is |Ω| = 2
    assert potential(PhaseField.constant(g, 0.0)) == pytest.approx(2.0, rel=1e-14)


def test_custom_double_well_validation():
    W = DoubleWell.from_expression("(1 - u**2)**2 * (2 + u)")
    assert W(np.array([0.0]))[0] == pytest.approx(2.0)
    assert W.derivative(np.array([0.5]))[0] == pytest.approx(
        -4 * 0.5 * (1 - 0.25) * 2.5 + (1 - 0.25) ** 2, rel=1e-8
    )
    with pytest.raises(ValueError, match="vanish"):
        DoubleWell.from_expression("1 - u**2 + 0.1")
    with pytest.raises(ValueError, match="positive"):
        DoubleWell.from_expression("-(1 - u**2)**2")


def test_f_eps_combination_and_linearity():
    g = benchmark_datum(2**-5)
    rng = np.random.default_rng(3)
    u = PhaseField(g.grid, rng.uniform(-1, 1, g.grid.n_omega), g)
    s = 0.25
    K, P = kinetic(u, s), potential(u)
    assert f_eps(u, 1.0, s).total == pytest.approx(K + P, rel=1e-13)
    assert f_eps(u, 0.1, s).total == pytest.approx(0.1 * K + 0.1**0.5 * P, rel=1e-13)
    # zero potential: the energy is linear in eps
    v = sign_field(g)
    assert f_eps(v, 0.05, s).total == pytest.approx(f_eps(v, 0.1, s).total / 2, rel=1e-13)


def test_f_eps_global_minimum_is_zero():
    g = constant_datum(1.0)
    u = PhaseField.constant(g, 1.0)
    for eps in (1.0, 0.1, 1e-3):
        assert f_eps(u, eps, 0.3).total == 0.0


def test_f_eps_rejects_nonpositive_eps():
    g = constant_datum(1.0)
    with pytest.raises(ValueError):
        f_eps(PhaseField.constant(g, 1.0), 0.0, 0.3)


def test_phase_field_validates_range_and_grid():
    g = constant_datum(1.0)
    with pytest.raises(ValueError, match="\\[-1, 1\\]"):
        PhaseField(g.grid, np.full(g.grid.n_omega, 1.5), g)
    with pytest.raises(ValueError, match="expected"):
        PhaseField(g.grid, np.zeros(3), g)


# --- fractional perimeter -------------------------------------------------------

def test_perimeter_empty_set():
    g = build_grid((-2, 2), 64, Interval(-1, 1), R=2)
    E = SetRegion(g, np.zeros(g.size, bool), FAR_EMPTY)
    assert frac_perimeter(E, "full", 0.25) == 0.0


def test_perimeter_unit_interval():
    g = build_grid((-2, 2), 64, Interval(-1, 1), R=2)
    E = SetRegion.from_region(g, Interval(0, 1))
    assert frac_perimeter(E, "full", 0.25) == pytest.approx(1 / (0.25 * 0.5), rel=1e-12)


@pytest.mark.parametrize("s", [0.1, 0.3])
def test_perimeter_dilation_scaling(s):
    g = build_grid((-4, 4), 256, Interval(-2, 2), R=4)
    small = frac_perimeter(SetRegion.from_region(g, Interval(0, 1)), "full", s)
    big = frac_perimeter(SetRegion.from_region(g, Interval(0, 2)), "full", s)
    assert big / small == pytest.approx(2 ** (1 - 2 * s), rel=1e-12)


def test_perimeter_complement_symmetry_relative_to_domain():
    g = build_grid((-2, 2), 128, Interval(-1, 1), R=2)
    E = SetRegion.from_region(g, Interval(-0.3, 0.4))
    om = Interval(-1, 1)
    assert frac_perimeter(E, om, 0.25) == pytest.approx(frac_perimeter(E.complement(), om, 0.25), rel=1e-12)


def test_perimeter_unbounded_with_full_space_is_infinite():
    g = build_grid((-2, 2), 64, Interval(-1, 1), R=2)
    E = SetRegion.from_region(g, Interval(0, 10), HalfSpace((-1.0,), 0.0))
    assert frac_perimeter(E, "full", 0.25) == math.inf


def test_perimeter_2d_disk_approaches_closed_form():
    s = 0.25
    want = 0.5 ** (2 - 2 * s) * unit_ball_perimeter(2, s)
    errs = []
    for res in (32, 64):
        g = build_grid(((-1, 1), (-1, 1)), res, Disk(0, 0, 0.9), R=2)
        E = SetRegion.from_region(g, Disk(0, 0, 0.5))
        errs.append(abs(frac_perimeter(E, "full", s) - want) / want)
    assert errs[1] < errs[0] and errs[1] < 0.05


def test_perimeter_2d_half_plane_insensitive_to_box():
    hs = HalfSpace((0.0, 1.0), 0.0)
    vals = []
    for L in (1.5, 2.0):
        n = int(2 * L * 16)
        g = build_grid(((-L, L), (-L, L)), n, Disk(0, 0, 1.0), R=1.5 * L)
        vals.append(frac_perimeter(SetRegion.from_region(g, hs, hs), Disk(0, 0, 0.5), 0.25))
    assert vals[0] == pytest.approx(vals[1], rel=1e-4)


# --- ladder ---------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(eps=st.floats(1e-3, 0.5), m=st.lists(st.floats(-10, 10), min_size=5, max_size=5), k=st.integers(1, 5))
def test_ladder_recursion_matches_telescoped_form(eps, m, k):
    g = benchmark_datum(2**-4, L=2)
    u = sign_field(g)
    F = f_eps(u, eps, 0.25).total
    a = ladder(u, eps, 0.25, m, k, energy=F)
    b = ladder_telescoped(F, eps, m, k)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12 * eps**-k)


def test_ladder_first_level_shape():
    g = benchmark_datum(2**-5, L=2)
    rng = np.random.default_rng(5)
    u = PhaseField(g.grid, rng.uniform(-1, 1, g.grid.n_omega), g)
    eps, s = 0.01, 0.25
    one = ladder(u, eps, s, [0.0], 1)
    assert one == pytest.approx(kinetic(u, s) + eps ** (-2 * s) * potential(u), rel=1e-12)


def test_ladder_of_sharp_minimizer_vanishes_at_level_two():
    g = benchmark_datum(2**-6)
    u = sign_field(g)
    m1 = kinetic(u, 0.25)
    assert ladder(u, 0.01, 0.25, [0.0, m1], 2) == pytest.approx(0.0, abs=1e-9)


def test_ladder_needs_enough_levels():
    g = constant_datum(1.0)
    with pytest.raises(ValueError, match="need 3"):
        ladder(PhaseField.constant(g, 1.0), 0.1, 0.25, [0, 0], 3)
