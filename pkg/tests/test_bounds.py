import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from disccool.advdiff import solve_steady
from disccool.bounds import (
    decompose_residual,
    delta_grid,
    lower_bound_certify,
    lower_quotient,
    plan_estimate,
    upper_bound,
    wall_cutoff,
)
from disccool.disc_field import make_grid
from disccool.flows import branching_flow, branching_plan, roll_flow, zero_flow
from disccool.sources import parse_source


def _roll_residual_oracle(n):
    """For f = 1 the roll residual is cos(2 n theta); its energy from the exact Dirichlet solution."""
    r = sp.symbols("r", positive=True)
    m = 2 * n
    a = (r**2 - r**m) / (4 - m**2)
    assert sp.simplify(a.diff(r, 2) + a.diff(r) / r - m**2 * a / r**2 - 1) == 0
    return float(-sp.integrate(a * r, (r, 0, 1)))


@pytest.fixture(scope="module")
def src():
    return parse_source("constant")


def test_zero_flow_upper_is_conduction_value(src):
    rep = upper_bound(zero_flow(src, make_grid(256, 8)), src, 100.0)
    assert rep.upper == pytest.approx(0.125, abs=1e-12)
    assert rep.residual_flux == pytest.approx(0.125, abs=1e-12)
    assert rep.residual_q == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [3, 4, 8, 16])
def test_roll_residual_matches_oracle(src, n):
    d = roll_flow(src, n, grid=make_grid(512, max(64, 4 * n)))
    flux, q, lhs = decompose_residual(d)
    want = _roll_residual_oracle(n)
    assert lhs == pytest.approx(want, rel=1e-7)
    assert flux == pytest.approx(0.0, abs=1e-15)
    assert q == pytest.approx(want, rel=1e-7)


@pytest.mark.parametrize("name,n", [("constant", 16), ("quadrupole", 16), ("quadrupole", 2), ("constant", 5)])
def test_residual_identity_for_rolls(name, n):
    s = parse_source(name)
    flux, q, lhs = decompose_residual(roll_flow(s, n, grid=make_grid(512, 256)))
    assert abs(lhs - (flux + q)) <= 1e-6 * lhs


def test_residual_identity_with_nonzero_flux():
    s = parse_source("quadrupole")
    flux, q, lhs = decompose_residual(roll_flow(s, 2, grid=make_grid(256, 64)))
    assert flux == pytest.approx(0.0078125, rel=1e-9)
    assert abs(lhs - (flux + q)) <= 1e-10 * lhs


def test_residual_identity_for_branching_flow(src):
    d = branching_flow(src, branching_plan(1e4), make_grid(1024, 480))
    flux, q, lhs = decompose_residual(d)
    assert abs(lhs - (flux + q)) <= 1e-5 * lhs


def test_design_must_match_source(src):
    d = roll_flow(src, 4, grid=make_grid(64, 16))
    with pytest.raises(ValueError):
        decompose_residual(d, parse_source("quadrupole"))


@given(st.floats(1.0, 1e5), st.floats(0.01, 100.0))
def test_assembly_identity_and_rescaling(pe, scale):
    s = parse_source("constant")
    d = roll_flow(s, 4, taper=0.1, grid=_GRID_128)
    a = upper_bound(d, s, pe)
    b = upper_bound(d.with_scale(scale), s, pe)
    assert a.upper == pytest.approx(a.residual_flux + a.residual_q + a.flow_norm * a.grad_eta / pe**2, rel=1e-12)
    assert b.upper == pytest.approx(a.upper, rel=1e-10)
    assert min(a.residual_flux, a.residual_q, a.grad_eta, a.flow_norm) >= 0


_GRID_128 = make_grid(128, 32)


def test_upper_decreases_when_rolls_refine_until_test_function_cost_dominates(src):
    g = make_grid(256, 128)
    reports = [upper_bound(roll_flow(src, n, grid=g), src, 1e3) for n in (1, 2, 4, 8, 16)]
    uppers = [r.upper for r in reports]
    assert uppers[0] > uppers[1] > uppers[2]
    assert uppers[2] < uppers[3] < uppers[4]
    last = reports[-1]
    assert last.flow_norm * last.grad_eta / 1e6 > last.residual_flux + last.residual_q


def test_upper_within_factor_three_of_closed_form(src):
    plan = branching_plan(1e4)
    rep = upper_bound(branching_flow(src, plan, make_grid(1024, 960)), src, 1e4)
    est = plan_estimate(plan, 1e4, src.c0)
    assert est / 3 <= rep.upper <= 3 * est


def test_certification_flag(src):
    assert not upper_bound(roll_flow(src, 4, grid=_GRID_128), src, 10.0).certified
    assert upper_bound(zero_flow(src, _GRID_128), src, 10.0).certified


def test_argument_validation(src):
    d = zero_flow(src, _GRID_128)
    with pytest.raises(ValueError):
        upper_bound(d, src, 0.0)
    with pytest.raises(ValueError):
        upper_bound(d, src, 10.0, "helicity")
    with pytest.raises(ValueError):
        lower_bound_certify(d, src, 10.0, "helicity")


def test_delta_grid():
    d = delta_grid(1e3)
    assert len(d) == 32 and d[0] == pytest.approx(1e-3) and d[-1] == pytest.approx(1.0)
    assert delta_grid(1e9)[0] == pytest.approx(1e-4)


@given(st.floats(1e-3, 1.0))
def test_cutoff_gradient_is_order_inverse_width(delta):
    def integrand(r):
        return wall_cutoff(delta, np.array([r]))[1][0] ** 2 * r

    grad = 2 * quad(integrand, 1 - delta, 1, limit=200)[0]
    assert grad <= 10 / delta
    chi, _ = wall_cutoff(delta, np.array([0.0, 1 - delta, 1.0]))
    np.testing.assert_allclose(chi, [1, 1, 0], atol=1e-15)


def test_lower_bound_without_flow_stays_below_conduction(src):
    d = zero_flow(src, make_grid(256, 8))
    lower, delta = lower_bound_certify(d, src, 100.0)
    assert 0 < lower <= 0.125
    # xi = chi_delta: <xi>^2 / <|grad xi|^2> peaks at an interior width once the ramp may reach the pole.
    assert 0.5 < delta < 1.0
    assert lower > max(lower_quotient(d, 100.0, "enstrophy", w) for w in (0.5, 1.0))


def test_single_width_scan_equals_quotient(src):
    d = roll_flow(src, 4, grid=_GRID_128)
    lower, delta = lower_bound_certify(d, src, 200.0, deltas=[0.5])
    assert delta == 0.5
    assert lower == lower_quotient(d, 200.0, "enstrophy", 0.5)


@given(st.floats(1e-3, 1e3))
def test_quotient_is_amplitude_invariant(amplitude):
    s = parse_source("constant")
    d = roll_flow(s, 4, grid=_GRID_128)
    a = lower_quotient(d, 200.0, "enstrophy", 0.1)
    b = lower_quotient(d, 200.0, "enstrophy", 0.1, amplitude=amplitude)
    assert b == pytest.approx(a, rel=1e-12)


def test_sandwich_for_branching_flow(src):
    pe = 10**2.5
    d = branching_flow(src, branching_plan(pe), make_grid(256, 128))
    rep = upper_bound(d, src, pe)
    lower, _ = lower_bound_certify(d, src, pe)
    exact = solve_steady(d, src, pe).cooling
    assert lower <= exact <= rep.upper


def test_lower_bound_holds_for_rolls(src):
    d = roll_flow(src, 2, grid=make_grid(256, 64))
    lower, _ = lower_bound_certify(d, src, 50.0)
    assert lower <= solve_steady(d, src, 50.0).cooling


def test_upper_non_increasing_over_five_point_sweep(src):
    """Branching designs re-planned at each pe; the upper bound should not increase."""
    pes = [10.0**e for e in (2.0, 2.5, 3.0, 3.5, 4.0)]
    uppers = []
    for pe in pes:
        plan = branching_plan(pe)
        d = branching_flow(src, plan, make_grid(512, max(256, 8 * plan.frequencies[-1])))
        uppers.append(upper_bound(d, src, pe).upper)
    print("upper:", ", ".join(f"{u:.4g}" for u in uppers))
    assert all(b <= a for a, b in zip(uppers, uppers[1:])), uppers


def test_plan_estimate_is_positive_and_decreasing(src):
    vals = [plan_estimate(branching_plan(pe), pe, src.c0) for pe in (1e3, 1e4, 1e5)]
    assert all(v > 0 and math.isfinite(v) for v in vals)
    assert vals[0] > vals[1] > vals[2]
