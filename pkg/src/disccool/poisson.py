"""Dirichlet Poisson solves on the disc, one banded radial system per mode."""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from scipy.linalg import lapack

from .disc_field import PolarGrid, SpectralScalar, VectorFieldPolar, divergence, gradient

__all__ = [
    "inv_laplacian_dirichlet",
    "hminus1_energy",
    "qform",
    "qform_upper",
    "perturbed_stencil",
    "NumericalError",
]

KL, KU = 4, 2

# Test hook: relative perturbation of the off-diagonal radial stencil.
_STENCIL_PERTURBATION = 0.0


class NumericalError(RuntimeError):
    """A discrete solve failed or produced a non-finite result."""


@contextmanager
def perturbed_stencil(eps: float):
    """Temporarily corrupt the Poisson stencil (fault injection for self-tests)."""
    global _STENCIL_PERTURBATION
    old = _STENCIL_PERTURBATION
    _STENCIL_PERTURBATION = eps
    try:
        yield
    finally:
        _STENCIL_PERTURBATION = old


def _base_band(grid: PolarGrid, parity: int) -> np.ndarray:
    """LAPACK band storage of ``d2 + d1 / r`` with a Dirichlet wall row."""
    n = grid.nr
    op = (grid.d2[parity] + grid.d1[parity].multiply(1.0 / grid.r[:, None])).tocoo()
    ab = np.zeros((2 * KL + KU + 1, n))
    keep = op.row < n - 1
    rows, cols, vals = op.row[keep], op.col[keep], op.data[keep]
    if _STENCIL_PERTURBATION:
        vals = np.where(rows != cols, vals * (1.0 + _STENCIL_PERTURBATION), vals)
    if np.any(cols - rows > KU) or np.any(rows - cols > KL):
        raise AssertionError("stencil exceeds band")
    np.add.at(ab, (KL + KU + rows - cols, cols), vals)
    ab[KL + KU, n - 1] = 1.0
    return ab


def _factors(grid: PolarGrid) -> dict:
    key = ("poisson", _STENCIL_PERTURBATION)
    cache = grid.__dict__.setdefault("_solver_cache", {})
    if key not in cache:
        cache[key] = {"base": (_base_band(grid, 0), _base_band(grid, 1)), "lu": {}}
    return cache[key]


def _mode_lu(grid: PolarGrid, m: int, parity: int):
    fac = _factors(grid)
    lu = fac["lu"].get((m, parity))
    if lu is None:
        ab = fac["base"][parity].copy()
        diag = ab[KL + KU]
        diag[:-1] -= m * m / grid.r[:-1] ** 2
        lub, piv, info = lapack.dgbtrf(ab, KL, KU)
        if info != 0:
            raise NumericalError(f"singular radial Poisson operator for mode {m}")
        lu = (lub, piv)
        fac["lu"][(m, parity)] = lu
    return lu


def inv_laplacian_dirichlet(rho: SpectralScalar) -> SpectralScalar:
    """Solve ``Laplacian w = rho`` in the disc with ``w = 0`` on ``r = 1``.

    The wall value of ``rho`` is ignored.
    """
    grid = rho.grid
    par = grid.mode_parity(rho.kind)
    out = np.empty_like(rho.coef)
    rhs = np.empty((grid.nr, 2))
    for m in range(grid.modes):
        col = rho.coef[:, m]
        if not np.any(col):
            out[:, m] = 0.0
            continue
        lub, piv = _mode_lu(grid, m, int(par[m]))
        rhs[:, 0] = col.real
        rhs[:, 1] = col.imag
        rhs[-1] = 0.0
        x, info = lapack.dgbtrs(lub, KL, KU, rhs, piv)
        if info != 0:
            raise NumericalError(f"banded solve failed for mode {m}")
        out[:, m] = x[:, 0] + 1j * x[:, 1]
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite Poisson solution")
    return SpectralScalar(grid, out, rho.kind)


def hminus1_energy(rho: SpectralScalar) -> float:
    """Disc average of ``|grad w|^2`` where ``Laplacian w = rho``, ``w = 0`` on the wall.

    Evaluated as ``-mean(rho * w)``.
    """
    w = inv_laplacian_dirichlet(rho)
    return -rho.inner(w)


def hminus1_energy_gradient_form(rho: SpectralScalar) -> float:
    return gradient(inv_laplacian_dirichlet(rho)).mean_square()


def qform(v: VectorFieldPolar) -> float:
    """Nonlocal energy of ``v`` after removing the angle-mean of its radial part."""
    w_r = v.r.copy()
    w_r.coef[:, 0] = 0.0
    return hminus1_energy(divergence(VectorFieldPolar(w_r, v.theta)))


def qform_upper(v: VectorFieldPolar) -> float:
    """Local majorant of :func:`qform` built from the angular antiderivative of ``v_r``."""
    phi = v.r.theta_antiderivative().scale_radial(v.grid.r, flip=True)
    return (phi.d_r() + v.theta).mean_square()
