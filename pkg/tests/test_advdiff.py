import numpy as np
import pytest

from disccool import advdiff
from disccool.advdiff import (
    ConvergenceError,
    cell_peclet,
    cooling_value,
    duality_check,
    solve_steady,
    source_work,
)
from disccool.disc_field import make_grid
from disccool.flows import ResolutionError, branching_flow, branching_plan, roll_flow, zero_flow
from disccool.poisson import inv_laplacian_dirichlet
from disccool.sources import parse_source


@pytest.fixture(scope="module")
def src():
    return parse_source("constant")


def test_poisson_limit(src):
    g = make_grid(256, 8)
    sol = solve_steady(zero_flow(src, g), src, 0.0)
    want = (1 - g.r**2) / 4
    np.testing.assert_allclose(sol.temperature.to_collocation(), want[:, None] * np.ones((1, g.ntheta)), atol=1e-12)
    assert sol.cooling == pytest.approx(0.125, abs=1e-12)
    assert source_work(sol.temperature, src) == pytest.approx(0.125, abs=1e-12)
    ref = -inv_laplacian_dirichlet(src.samples(g))
    assert np.max(np.abs((sol.temperature - ref).coef)) <= 1e-9


def test_zero_temperature_cools_nothing():
    assert cooling_value(make_grid(32, 4).zeros()) == 0.0


def test_roll_improves_on_conduction_and_converges(src):
    # Rolls penetrate the wall, so the temperature has a thin wall layer: nr=256 fails the energy gate.
    coarse = solve_steady(roll_flow(src, 2, grid=make_grid(512, 128)), src, 100.0)
    fine = solve_steady(roll_flow(src, 2, grid=make_grid(1024, 256)), src, 100.0)
    assert fine.cooling < 0.125
    assert coarse.cooling == pytest.approx(fine.cooling, rel=1e-4)
    for sol in (coarse, fine):
        assert sol.residual <= 1e-9
        assert sol.energy_mismatch <= 1e-6
        assert sol.temperature.to_collocation()[-1].max() == 0.0


def test_grid_convergence_of_branching_solve(src):
    pe = 10**2.5
    plan = branching_plan(pe)
    a = solve_steady(branching_flow(src, plan, make_grid(256, 128)), src, pe).cooling
    b = solve_steady(branching_flow(src, plan, make_grid(512, 256)), src, pe).cooling
    assert a == pytest.approx(b, rel=1e-3)


def test_reversal_symmetry(src):
    d = roll_flow(src, 3, grid=make_grid(256, 64))
    plus = solve_steady(d, src, 80.0)
    minus = solve_steady(d, src, 80.0, sign=-1.0)
    assert minus.cooling == pytest.approx(plus.cooling, rel=1e-8)


def test_deterministic(src):
    d = roll_flow(src, 2, grid=make_grid(128, 32))
    a = solve_steady(d, src, 20.0)
    b = solve_steady(d, src, 20.0)
    assert np.array_equal(a.temperature.coef, b.temperature.coef)


def test_cell_peclet_guard_names_resolution(src):
    d = roll_flow(src, 4, grid=make_grid(32, 16))
    assert cell_peclet(d, 1e4) > 2
    with pytest.raises(ResolutionError, match="nr >="):
        solve_steady(d, src, 1e4)


def test_non_convergence_reports_history(src, monkeypatch):
    monkeypatch.setattr(advdiff, "MAX_ITER", 2)
    monkeypatch.setattr(advdiff, "RESTART", 1)
    with pytest.raises(ConvergenceError) as info:
        solve_steady(roll_flow(src, 2, grid=make_grid(128, 32)), src, 20.0)
    assert len(info.value.history) >= 1


def test_energy_identity_gate_rejects_under_resolved_solves(src, monkeypatch):
    monkeypatch.setattr(advdiff, "ENERGY_TOL", 1e-14)
    with pytest.raises(advdiff.NumericalError, match="energy identity"):
        solve_steady(roll_flow(src, 2, grid=make_grid(64, 16)), src, 10.0)


def test_duality_without_flow(src):
    rep = duality_check(zero_flow(src, make_grid(256, 8)), src, 100.0)
    assert abs(rep.upper_gap) <= 1e-10 and abs(rep.lower_gap) <= 1e-10
    assert rep.iterations == (0, 0)


@pytest.mark.parametrize("name", ["constant", "quadrupole"])
def test_duality_for_rolls(name):
    s = parse_source(name)
    rep = duality_check(roll_flow(s, 4, grid=make_grid(512, 256)), s, 200.0)
    assert rep.within(1e-4, -1e-6)
    assert rep.exact_reversed == pytest.approx(rep.exact, rel=1e-8)
