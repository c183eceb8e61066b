"""Fast invariant suites for every module, run at small sizes."""

from __future__ import annotations

import math
import tempfile
import time
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import advdiff, bounds, disc_field, flows, poisson, render, sources, sweep
from .config import RunConfig

__all__ = ["CheckResult", "SkipCheck", "CHECKS", "run_selftest", "FAULTS"]

NR, MODES = 256, 256
FAULTS = ("poisson-stencil",)


class SkipCheck(Exception):
    """A check that cannot run in the current configuration."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str
    seconds: float

    @property
    def line(self) -> str:
        return f"{self.status:<4} {self.name}" + (f"  ({self.detail})" if self.detail else "")


def _grid(nr=NR, modes=MODES):
    return disc_field.make_grid(nr, modes)


def _close(name, got, want, rel=None, abs_=None):
    err = abs(got - want)
    tol = (abs_ or 0.0) + (rel or 0.0) * abs(want)
    if not err <= tol:
        raise AssertionError(f"{name}: got {got:.15g}, expected {want:.15g} (error {err:.2e} > {tol:.2e})")
    return err


def check_quadrature():
    g = _grid()
    worst = max(abs(g.disc_mean_radial(g.r ** (2 * k)) - 1 / (k + 1)) for k in range(6))
    _close("quadrature", worst, 0.0, abs_=1e-12)
    return f"max error {worst:.1e}"


def check_transform_round_trip():
    g = _grid(64, 32)
    rng = np.random.default_rng(1)
    coef = rng.standard_normal((g.nr, g.modes)) + 1j * rng.standard_normal((g.nr, g.modes))
    coef[:, 0] = coef[:, 0].real
    phi = disc_field.SpectralScalar(g, coef)
    back = disc_field.SpectralScalar.from_collocation(g, phi.to_collocation())
    err = float(np.max(np.abs(back.coef - phi.coef)))
    _close("transform round trip", err, 0.0, abs_=1e-12)
    return f"max error {err:.1e}"


def check_gradient_adjoint():
    g = _grid()
    w = g.samples(lambda r, t: (1 - r * r) * r**3 * np.cos(3 * t))
    v = disc_field.VectorFieldPolar(
        g.samples(lambda r, t: r**2 * np.sin(2 * t) + r * np.cos(t), kind=disc_field.VECTOR),
        g.samples(lambda r, t: r**2 * np.cos(2 * t) - r * np.sin(t), kind=disc_field.VECTOR),
    )
    gw = disc_field.gradient(w)
    lhs = gw.r.inner(v.r) + gw.theta.inner(v.theta)
    rhs = -w.inner(disc_field.divergence(v))
    _close("integration by parts", lhs, rhs, abs_=1e-9)
    return f"gap {abs(lhs - rhs):.1e}"


def check_perp_gradient_divergence_free():
    # Fourth-order radial stencils: the discrete divergence shrinks 16x per doubling.
    errs = []
    for nr in (128, 256):
        g = _grid(nr, 32)
        psi = g.samples(lambda r, t: r**4 * (1 - r * r) ** 2 * np.cos(4 * t) + r**2 * np.sin(2 * t))
        div = disc_field.divergence(disc_field.perp_gradient(psi)).to_collocation()
        errs.append(float(np.max(np.abs(div[:-1]))))
    if not (errs[1] <= 1e-5 and errs[0] / errs[1] >= 12):
        raise AssertionError(f"divergence {errs[1]:.2e}, convergence ratio {errs[0] / errs[1]:.1f}")
    return f"max {errs[1]:.1e}, ratio {errs[0] / errs[1]:.1f}"


def check_poisson_ground_truth():
    g = _grid(512, 4)
    e1 = poisson.hminus1_energy(g.samples(lambda r, t: np.ones_like(r + t)))
    _close("energy of 1", e1, 0.125, abs_=1e-8)
    e2 = poisson.hminus1_energy(g.samples(lambda r, t: r * np.sin(t)))
    _close("energy of r sin", e2, 1 / 96, abs_=1e-10)
    return f"errors {abs(e1 - 0.125):.1e}, {abs(e2 - 1 / 96):.1e}"


def _identity_gap(design):
    flux, q, lhs = bounds.decompose_residual(design)
    return abs(lhs - (flux + q)) / abs(lhs)


def check_residual_identity():
    g = _grid()
    worst = 0.0
    designs = [flows.zero_flow(sources.parse_source("quadrupole"), g)]
    for name in ("constant", "quadrupole"):
        src = sources.parse_source(name)
        designs += [flows.roll_flow(src, n, grid=g) for n in (2, 8)]
    for d in designs:
        worst = max(worst, _identity_gap(d))
    _close("flux + Q identity", worst, 0.0, abs_=1e-5)
    return f"max relative gap {worst:.1e}"


def check_qform_radial_invariance():
    g = _grid()
    v = disc_field.VectorFieldPolar(
        g.samples(lambda r, t: r * (1 - r) * np.cos(2 * t) + r * np.sin(t), kind=disc_field.VECTOR),
        g.samples(lambda r, t: r**2 * np.sin(3 * t), kind=disc_field.VECTOR),
    )
    shifted = disc_field.VectorFieldPolar(
        v.r + g.samples(lambda r, t: r * (1 - r * r) + 0 * t, kind=disc_field.VECTOR), v.theta
    )
    a, b = poisson.qform(v), poisson.qform(shifted)
    _close("Q under radial shift", b, a, rel=1e-10, abs_=1e-14)
    return f"Q = {a:.6g}"


def check_source_potential():
    g = _grid()
    worst = 0.0
    for name in ("constant", "gaussian_center", "gaussian_ring", "quadrupole"):
        src = sources.parse_source(name)
        gr = sources.radial_potential(src, g)
        div = disc_field.divergence(disc_field.VectorFieldPolar(gr, g.zeros(disc_field.VECTOR)))
        err = np.abs((div - src.samples(g)).to_collocation())
        # The ring source has a cone at the pole, so only its interior is checked.
        rows = g.r > 0.05 if name == "gaussian_ring" else slice(None)
        worst = max(worst, float(np.max(err[rows])))
        flux = sources.cumulative_flux(src, g)
        fmax = max(float(np.max(src.samples(g).to_collocation())), float(np.max(src.eval("f", 0.0, g.theta))))
        if np.any(flux > fmax * g.r / 2 + 1e-12):
            raise AssertionError(f"{name}: cumulative flux exceeds max(f) r / 2")
    _close("div(g e_r) = f", worst, 0.0, abs_=1e-7)
    return f"max error {worst:.1e}"


def check_cutoff_partition():
    plan = flows.branching_plan(1e4)
    cut = flows.cutoff_family(plan)
    r = np.linspace(1e-6, plan.radii[-1], 10_000)
    total = sum(cut(k, r)[0] ** 2 for k in range(cut.n))
    err = float(np.max(np.abs(total - 1)))
    _close("sum chi^2", err, 0.0, abs_=1e-12)
    chi, d1, _ = cut(cut.n - 1, np.array([1.0]))
    if chi[0] != 0 or d1[0] != 0:
        raise AssertionError("last cutoff does not vanish at the wall")
    return f"max error {err:.1e}"


def check_plan():
    plan = flows.branching_plan(1e4)
    if plan.frequencies != (30, 60, 120):
        raise AssertionError(f"unexpected frequencies {plan.frequencies}")
    c = flows.scale_factor(1e4)
    for q, rk in zip(plan.frequencies, plan.radii):
        _close("interpolation rule", math.sqrt(1 - rk) / c, 1 / q, abs_=1e-12)
    return f"radii {', '.join(f'{x:.5f}' for x in plan.radii)}"


def check_plan_resolution():
    plan = flows.branching_plan(1e6)
    try:
        flows.branching_flow(sources.parse_source("constant"), plan, _grid(32, MODES))
    except flows.ResolutionError as exc:
        raise SkipCheck(str(exc)) from exc
    return "resolved"


def check_roll_scaling():
    src = sources.parse_source("constant")
    res = []
    for n in (8, 16, 32):
        design = flows.roll_flow(src, n, grid=_grid(NR, max(MODES, 8 * n)))
        res.append(bounds.decompose_residual(design)[2])
    ratios = [a / b for a, b in zip(res, res[1:])]
    if not all(3.0 <= x <= 5.0 for x in ratios):
        raise AssertionError(f"residual ratios {ratios}")
    return "ratios " + ", ".join(f"{x:.3f}" for x in ratios)


def check_design_invariants():
    g = _grid(NR, 480)
    src = sources.parse_source("constant")
    bad = []
    for d in (flows.roll_flow(src, 2, grid=g), flows.branching_flow(src, flows.branching_plan(1e4), g)):
        bad += [f"{d.kind}: {b}" for b in d.check_invariants()]
    e = flows.roll_flow(src, 2, grid=_grid(64, 16))
    _close("roll energy", e.energy, 0.25, abs_=1e-10)
    _close("roll enstrophy", e.enstrophy, 1.0, abs_=1e-10)
    if bad:
        raise AssertionError("; ".join(bad))
    return "divergence, no-slip, wall test function"


def check_bounds():
    g = _grid()
    src = sources.parse_source("constant")
    z = bounds.upper_bound(flows.zero_flow(src, g), src, 100.0)
    _close("zero-flow upper", z.upper, 0.125, abs_=1e-10)
    d = flows.roll_flow(src, 4, grid=g)
    a = bounds.upper_bound(d, src, 200.0)
    b = bounds.upper_bound(d.with_scale(7.5), src, 200.0)
    _close("rescaling invariance", b.upper, a.upper, rel=1e-10)
    _close("upper assembly", a.upper, a.residual_flux + a.residual_q + a.flow_norm * a.grad_eta / 200.0**2,
           rel=1e-14)
    lower, _ = bounds.lower_bound_certify(d, src, 200.0)
    if not 0 < lower <= a.upper:
        raise AssertionError(f"lower {lower} above upper {a.upper}")
    return f"lower {lower:.4g} <= upper {a.upper:.4g}"


def check_advdiff():
    g = _grid()
    src = sources.parse_source("constant")
    zero = advdiff.solve_steady(flows.zero_flow(src, g), src, 0.0)
    _close("conduction value", zero.cooling, 0.125, abs_=1e-10)
    design = flows.roll_flow(src, 2, grid=_grid(NR, 64))
    sol = advdiff.solve_steady(design, src, 50.0)
    rev = advdiff.solve_steady(design, src, 50.0, sign=-1.0)
    _close("reversal symmetry", rev.cooling, sol.cooling, rel=1e-9)
    lower, _ = bounds.lower_bound_certify(design, src, 50.0)
    if not lower <= sol.cooling < 0.125:
        raise AssertionError(f"expected lower {lower} <= exact {sol.cooling} < 0.125")
    return f"exact {sol.cooling:.6g}, energy gap {sol.energy_mismatch:.1e}, {sol.iterations} iterations"


def check_sweep_round_trip():
    cfg = RunConfig(source="constant", flow="roll", roll_n=2, pe=(50.0, 20.0), nr=64, modes=16, exact_cap=30.0)
    table = sweep.run_sweep(cfg)
    if [r.pe for r in table.rows] != [20.0, 50.0]:
        raise AssertionError("rows not sorted by pe")
    text = table.to_csv()
    back = sweep.SweepTable.from_csv(text)
    if back.to_csv() != text:
        raise AssertionError("CSV round trip is not lossless")
    pe = 10.0 ** np.arange(2, 5.5, 0.5)
    fit = sweep.fit_values(pe, pe ** (-2 / 3), "enstrophy")
    _close("synthetic slope", fit.raw_slope, -2 / 3, abs_=1e-12)
    return f"{len(table.rows)} rows"


def check_render():
    src = sources.parse_source("constant")
    d = flows.roll_flow(src, 2, grid=_grid(64, 16))
    if render.count_cells(d, 0.5) != 4:
        raise AssertionError("roll n=2 should show 4 cells")
    with tempfile.TemporaryDirectory() as tmp:
        a = render.render_streamlines(d, Path(tmp) / "a.svg").read_bytes()
        b = render.render_streamlines(d, Path(tmp) / "b.svg").read_bytes()
    if a != b:
        raise AssertionError("rendering is not deterministic")
    return f"{len(a)} bytes"


CHECKS = (
    ("disc_field.quadrature", check_quadrature),
    ("disc_field.transform_round_trip", check_transform_round_trip),
    ("disc_field.gradient_adjoint", check_gradient_adjoint),
    ("disc_field.perp_gradient_divergence_free", check_perp_gradient_divergence_free),
    ("poisson.ground_truth", check_poisson_ground_truth),
    ("poisson.residual_identity", check_residual_identity),
    ("poisson.qform_radial_invariance", check_qform_radial_invariance),
    ("sources.potential", check_source_potential),
    ("flows.cutoff_partition", check_cutoff_partition),
    ("flows.plan", check_plan),
    ("flows.plan_resolution_1e6", check_plan_resolution),
    ("flows.roll_scaling", check_roll_scaling),
    ("flows.design_invariants", check_design_invariants),
    ("bounds.assembly", check_bounds),
    ("advdiff.steady", check_advdiff),
    ("sweep.round_trip", check_sweep_round_trip),
    ("render.cells_and_determinism", check_render),
)


def run_selftest(fault: str | None = None, report=print, only: str | None = None) -> list[CheckResult]:
    """Run the suites; ``fault`` injects a known defect to prove the checks can fail."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; expected one of {', '.join(FAULTS)}")
    ctx = poisson.perturbed_stencil(1e-3) if fault == "poisson-stencil" else nullcontext()
    results = []
    with ctx:
        for name, func in CHECKS:
            if only and only not in name:
                continue
            start = time.perf_counter()
            try:
                detail = func() or ""
                status = "PASS"
            except SkipCheck as exc:
                status, detail = "SKIP", str(exc)
            except Exception as exc:  # a crash in a check is a failure of that check
                status, detail = "FAIL", f"{type(exc).__name__}: {exc}"
            res = CheckResult(name, status, detail, time.perf_counter() - start)
            results.append(res)
            if report is not None:
                report(res.line)
    return results
