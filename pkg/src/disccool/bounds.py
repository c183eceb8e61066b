"""Upper and certified lower bounds on the mean-square temperature gradient.

For a velocity ``u`` rescaled to Peclet number ``Pe`` and any test function
``eta`` vanishing on the wall,

    <|grad T|^2>  <=  E(u . grad eta - f) + (|u|^2_c / Pe^2) <|grad eta|^2>

where ``E(rho)`` is the H^-1 energy of ``rho`` and ``|u|^2_c`` the constrained
norm (enstrophy or kinetic energy).  The residual splits exactly into a
radial flux mismatch and a nonlocal angular part.  For the same flow, any
radial cutoff ``xi`` gives

    <|grad T|^2>  >=  <f xi>^2 / (<|grad xi|^2> + E(div(lambda u xi))).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .flows import FlowDesign, scale_factor, smoothstep
from .poisson import hminus1_energy, qform
from .sources import Source

__all__ = [
    "BoundReport",
    "upper_bound",
    "decompose_residual",
    "lower_bound_certify",
    "lower_quotient",
    "delta_grid",
    "wall_cutoff",
    "plan_estimate",
    "CONSTRAINTS",
]

CONSTRAINTS = ("enstrophy", "energy")
DELTA_COUNT = 32
_GL64 = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class BoundReport:
    pe: float
    constraint: str
    upper: float
    residual_flux: float
    residual_q: float
    grad_eta: float
    flow_norm: float
    lower: float | None = None
    exact: float | None = None
    delta_star: float | None = None
    residual: float | None = None
    certified: bool = True

    def as_dict(self) -> dict:
        return asdict(self)

    def with_values(self, **kw) -> "BoundReport":
        return BoundReport(**{**self.as_dict(), **kw})


def _check_constraint(constraint: str):
    if constraint not in CONSTRAINTS:
        raise ValueError(f"unknown constraint {constraint!r}; expected one of {', '.join(CONSTRAINTS)}")


def decompose_residual(design: FlowDesign, source: Source | None = None) -> tuple[float, float, float]:
    """``(residual_flux, residual_q, lhs)`` for the residual ``u . grad eta - f``.

    ``lhs`` is the H^-1 energy of the residual computed directly; the first
    two are the disc mean of the squared angle-mean flux mismatch and the
    nonlocal energy of ``u eta - g e_r`` with its radial mean removed.
    """
    if source is not None and source is not design.source:
        raise ValueError("design was built for a different source")
    lhs = hminus1_energy(design.residual_density())
    v = design.flux_field()
    mismatch = v.r.theta_average()
    flux = design.grid.disc_mean_radial(mismatch**2)
    return flux, qform(v), lhs


def upper_bound(design: FlowDesign, source: Source | None, pe: float, constraint: str = "enstrophy") -> BoundReport:
    """Evaluate the upper-bound functional of ``design`` at Peclet number ``pe``.

    Invariant under rescaling of the design.  The value bounds the true
    cooling only if the test function vanishes on the wall; pure rolls do not,
    and their reports carry ``certified=False``.
    """
    _check_constraint(constraint)
    if not pe > 0:
        raise ValueError("pe must be positive")
    flux, q, lhs = decompose_residual(design, source)
    norm = design.flow_norm(constraint)
    grad_eta = design.grad_eta
    upper = flux + q + norm * grad_eta / pe**2
    return BoundReport(pe=float(pe), constraint=constraint, upper=upper, residual_flux=flux, residual_q=q,
                       grad_eta=grad_eta, flow_norm=norm, residual=lhs, certified=design.no_slip)


def wall_cutoff(delta: float, r: np.ndarray):
    """``(chi, chi')``: 1 on ``[0, 1 - delta]``, smooth cosine ramp to exactly 0 at ``r = 1``."""
    r = np.asarray(r, dtype=float)
    s, ds, _ = smoothstep(1.0 - (1.0 - r) / delta)
    ph = 0.5 * np.pi * (1.0 - s)
    return np.sin(ph), -np.cos(ph) * 0.5 * np.pi * ds / delta


def delta_grid(pe: float, count: int = DELTA_COUNT) -> np.ndarray:
    """Geometric widths from ``max(1/pe, 1e-4)`` to 1; the widest ramp starts at the pole."""
    lo = max(1.0 / pe, 1e-4)
    if count == 1:
        return np.array([1.0])
    return np.geomspace(lo, 1.0, count)


def _angle_mean_source(source: Source, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    vals = np.broadcast_to(source.eval("f", r[:, None], theta[None, :]), (r.size, theta.size))
    return vals.mean(axis=1)


def lower_quotient(design: FlowDesign, pe: float, constraint: str, delta: float,
                   amplitude: float = 1.0) -> float:
    """Lower-bound quotient for ``xi = amplitude * chi_delta(r)``."""
    grid, source = design.grid, design.source
    norm = design.with_scale(1.0).flow_norm(constraint)
    x, w = _GL64
    rq = 1.0 - delta + 0.5 * delta * (x + 1.0)
    wq = 0.5 * delta * w * rq
    chi_q, dchi_q = wall_cutoff(delta, rq)
    fbar_q = _angle_mean_source(source, rq, grid.theta)
    numer = amplitude * (source.disc_mean() - 2.0 * np.sum(wq * fbar_q * (1.0 - chi_q)))
    grad_xi = amplitude**2 * 2.0 * np.sum(wq * dchi_q**2)
    _, dchi = wall_cutoff(delta, grid.r)
    nonlocal_term = 0.0
    if norm > 0:
        lam = pe / math.sqrt(norm)
        rho = design._pass()["u_r"].scale_radial(lam * amplitude * dchi, flip=True)
        nonlocal_term = hminus1_energy(rho)
    return numer**2 / (grad_xi + nonlocal_term)


def lower_bound_certify(design: FlowDesign, source: Source | None, pe: float, constraint: str = "enstrophy",
                        deltas: np.ndarray | None = None) -> tuple[float, float]:
    """Best quotient over the wall-cutoff widths; returns ``(lower, delta_star)``."""
    _check_constraint(constraint)
    src = design.source if source is None else source
    if src.disc_mean() <= 0:
        raise ValueError("lower bound needs a source with positive mean")
    deltas = delta_grid(pe) if deltas is None else np.atleast_1d(np.asarray(deltas, dtype=float))
    vals = [lower_quotient(design, pe, constraint, d) for d in deltas]
    i = int(np.argmax(vals))
    return float(vals[i]), float(deltas[i])


def plan_estimate(plan, pe: float, c0: float) -> float:
    """Closed-form branching estimate ``C0 [l_bulk^2 + int l'^2 + delta_bl + (A / Pe)^2]``.

    ``A = 1/l_bulk^2 + int l^-2 + delta_bl / l_bl^2`` with ``l(r) = sqrt(1 - r) / c``.
    """
    c = scale_factor(plan.pe_target if plan.pe_target else pe)
    log_ratio = math.log(plan.delta_bulk / plan.delta_bl)
    int_dl2 = log_ratio / (4 * c * c)
    int_inv = c * c * log_ratio
    a = 1 / plan.l_bulk**2 + int_inv + plan.delta_bl / plan.l_bl**2
    return c0 * (plan.l_bulk**2 + int_dl2 + plan.delta_bl + (a / pe) ** 2)
