"""Steady advection-diffusion on the disc: ``lambda u . grad T = Laplacian T + f``, ``T = 0`` on the wall.

The unknown is the coefficient field of ``T``.  The equation is solved in the
preconditioned form ``T - L^-1(lambda u . grad T) = -L^-1 f`` with ``L`` the
Dirichlet Laplacian, so every Krylov vector satisfies the wall condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .disc_field import SpectralScalar, gradient
from .flows import FlowDesign, ResolutionError
from .poisson import NumericalError, hminus1_energy, inv_laplacian_dirichlet

__all__ = [
    "SteadySolution",
    "solve_steady",
    "cooling_value",
    "source_work",
    "duality_check",
    "DualityReport",
    "cell_peclet",
    "ConvergenceError",
]

RESTART = 60
RTOL = 1e-10
MAX_ITER = 10_000
MAX_CELL_PECLET = 2.0
RESIDUAL_TOL = 1e-9
ENERGY_TOL = 1e-6


class ConvergenceError(NumericalError):
    """The Krylov iteration stopped before reaching the tolerance."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass
class SteadySolution:
    temperature: SpectralScalar
    velocity_factor: float
    iterations: int
    residual: float
    cooling: float
    work: float
    history: list[float] = field(repr=False, default_factory=list)

    @property
    def energy_mismatch(self) -> float:
        """Relative gap between ``<|grad T|^2>`` and ``<f T>``."""
        return abs(self.cooling - self.work) / abs(self.cooling)


def _velocity_factor(design: FlowDesign, pe: float, constraint: str) -> float:
    unit = design.with_scale(1.0)
    norm = unit.flow_norm(constraint)
    if norm == 0:
        return 0.0
    return pe / math.sqrt(norm)


def cell_peclet(design: FlowDesign, pe: float, constraint: str = "enstrophy") -> float:
    """Largest ``lambda |u| h`` over the grid, ``h`` the larger of the radial and angular spacings."""
    grid = design.grid
    lam = _velocity_factor(design, pe, constraint)
    h = np.maximum(grid.spacing, 2 * np.pi * grid.r / (2 * grid.modes))
    return float(np.max(lam * design.with_scale(1.0).speed_profile() * h))


class _Advection:
    """``v . grad T`` for a fixed velocity sampled on the collocation grid."""

    def __init__(self, design: FlowDesign, factor: float):
        grid = design.grid
        vel = design.with_scale(1.0).velocity
        self.grid = grid
        self.u_r = factor * vel.r.to_collocation()
        self.u_t = factor * vel.theta.to_collocation()

    def __call__(self, t: SpectralScalar) -> SpectralScalar:
        g = gradient(t)
        vals = self.u_r * g.r.to_collocation() + self.u_t * g.theta.to_collocation()
        return SpectralScalar.from_collocation(self.grid, vals)


def _pack(s: SpectralScalar) -> np.ndarray:
    return s.coef.view(np.float64).ravel().copy()


def _unpack(grid, x: np.ndarray) -> SpectralScalar:
    return SpectralScalar(grid, np.ascontiguousarray(x).view(np.complex128).reshape(grid.nr, grid.modes))


def solve_steady(design: FlowDesign, source=None, pe: float = 0.0, constraint: str = "enstrophy",
                 sign: float = 1.0, check: bool = True) -> SteadySolution:
    """Solve for the temperature under velocity ``sign * lambda_Pe * u``.

    A solve is accepted only if the preconditioned residual is below
    ``RESIDUAL_TOL`` and ``<|grad T|^2>`` matches ``<f T>`` to ``ENERGY_TOL``.
    """
    grid = design.grid
    src = design.source if source is None else source
    lam = _velocity_factor(design, pe, constraint) if pe else 0.0
    if lam and check:
        cp = cell_peclet(design, pe, constraint)
        if cp > MAX_CELL_PECLET:
            need = math.ceil(grid.nr * cp / MAX_CELL_PECLET)
            raise ResolutionError(
                f"cell Peclet number {cp:.3g} exceeds {MAX_CELL_PECLET:g}; "
                f"refine to about nr >= {need} and modes >= {math.ceil(grid.modes * cp / MAX_CELL_PECLET)}"
            )
    f = src.samples(grid)
    rhs = -inv_laplacian_dirichlet(f)
    if lam == 0.0:
        return _accept(rhs, f, 0.0, 0, 0.0, [])
    adv = _Advection(design, sign * lam)

    def matvec(x):
        t = _unpack(grid, x)
        return _pack(t - inv_laplacian_dirichlet(adv(t)))

    n = 2 * grid.nr * grid.modes
    op = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    b = _pack(rhs)
    history: list[float] = []
    x, info = gmres(op, b, x0=b.copy(), rtol=RTOL, atol=0.0, restart=RESTART, maxiter=MAX_ITER // RESTART + 1,
                    callback=history.append, callback_type="pr_norm")
    res = np.linalg.norm(matvec(x) - b) / np.linalg.norm(b)
    if info != 0 or not np.isfinite(res) or res > RESIDUAL_TOL:
        raise ConvergenceError(
            f"Krylov solve stopped after {len(history)} iterations at relative residual {res:.3e}", history
        )
    return _accept(_unpack(grid, x), f, sign * lam, len(history), float(res), history)


def _accept(temp, f, factor, iterations, res, history) -> SteadySolution:
    sol = SteadySolution(temp, factor, iterations, res, cooling_value(temp), f.inner(temp), history)
    if not np.isfinite(sol.cooling) or sol.energy_mismatch > ENERGY_TOL:
        raise NumericalError(
            f"energy identity violated: <|grad T|^2>={sol.cooling:.12g}, <fT>={sol.work:.12g} "
            f"(relative gap {sol.energy_mismatch:.2e}); refine nr"
        )
    return sol


def cooling_value(t: SpectralScalar) -> float:
    """Disc mean of ``|grad T|^2``."""
    return gradient(t).mean_square()


def source_work(t: SpectralScalar, source) -> float:
    """Disc mean of ``f T``."""
    return source.samples(t.grid).inner(t)


@dataclass(frozen=True)
class DualityReport:
    """Sharpness of the steady bounds at the optimal test functions.

    ``upper_gap = upper(eta*) - exact`` and ``lower_gap = exact - quotient(xi*)``
    with ``eta* = (T+ - T-) / 2`` and ``xi* = (T+ + T-) / 2``.
    """

    exact: float
    exact_reversed: float
    upper_at_optimum: float
    lower_at_optimum: float
    upper_gap: float
    lower_gap: float
    iterations: tuple[int, int]

    def within(self, rel: float = 1e-4, floor: float = -1e-6) -> bool:
        tol = rel * self.exact
        return all(floor <= g <= tol for g in (self.upper_gap, self.lower_gap))


def duality_check(design: FlowDesign, source=None, pe: float = 0.0, constraint: str = "enstrophy") -> DualityReport:
    """Solve with ``+lambda u`` and ``-lambda u`` and evaluate both bounds at the optimal pair."""
    src = design.source if source is None else source
    grid = design.grid
    plus = solve_steady(design, src, pe, constraint, sign=1.0)
    minus = solve_steady(design, src, pe, constraint, sign=-1.0)
    tp, tm = plus.temperature, minus.temperature
    exact = plus.cooling
    eta = (tp - tm) * 0.5
    xi = (tp + tm) * 0.5
    f = src.samples(grid)
    lam = abs(plus.velocity_factor)
    if lam:
        adv = _Advection(design, lam)
        adv_eta, adv_xi = adv(eta), adv(xi)
    else:
        adv_eta = adv_xi = grid.zeros()
    upper = hminus1_energy(adv_eta - f) + gradient(eta).mean_square()
    lower = f.inner(xi) ** 2 / (gradient(xi).mean_square() + hminus1_energy(adv_xi))
    return DualityReport(
        exact=exact,
        exact_reversed=minus.cooling,
        upper_at_optimum=upper,
        lower_at_optimum=lower,
        upper_gap=upper - exact,
        lower_gap=exact - lower,
        iterations=(plus.iterations, minus.iterations),
    )
