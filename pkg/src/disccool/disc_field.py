"""Polar grid and Fourier-in-angle fields on the unit disc.

Fields are stored as complex radial profiles ``coef[i, m] = a_m(r_i) - i b_m(r_i)``
so that ``phi(r, theta) = sum_m a_m cos(m theta) + b_m sin(m theta)``.  Radial
derivatives are fourth-order finite differences on a boundary-clustered grid;
products are formed pseudospectrally on ``3 * modes`` collocation angles.

Regularity at the pole is imposed by parity: the mode-``m`` profile of a
scalar is continued to ``r < 0`` as ``(-1)**m`` times its mirror image, and the
polar components of a vector field carry the opposite parity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
import scipy.sparse as sp

__all__ = [
    "PolarGrid",
    "make_grid",
    "mean_over_disc",
    "theta_average",
    "theta_antiderivative",
    "SpectralScalar",
    "VectorFieldPolar",
    "fd_weights",
    "gregory_weights",
    "gradient",
    "divergence",
    "perp_gradient",
    "laplacian",
    "multiply",
]

SCALAR = 0
VECTOR = 1

# Gregory end corrections (forward-difference coefficients).
_GREGORY = (1 / 12, -1 / 24, 19 / 720, -3 / 160, 863 / 60480)


def gregory_weights(n_intervals: int) -> np.ndarray:
    """Trapezoid weights on ``[0, 1]`` with Gregory end corrections.

    Exact for polynomials of degree five; ``n_intervals`` must be at least 10.
    """
    if n_intervals < 10:
        raise ValueError("Gregory weights need at least 10 intervals")
    w = np.ones(n_intervals + 1)
    w[0] = w[-1] = 0.5
    for j, c in enumerate(_GREGORY, start=1):
        for k in range(j + 1):
            d = c * comb(j, k) * (-1) ** (j - k)
            w[k] += d
            w[n_intervals - k] += d
    return w / n_intervals


def fd_weights(x0: float, x: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``.

    Fornberg's recursion on arbitrary distinct nodes ``x``.
    """
    n = len(x)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Radial nodes ``r = 1 - (1 - s)**stretch`` at ``s = i / nr``, ``i = 1..nr``.

    The pole is excluded; the last node sits on the wall ``r = 1``.
    """

    nr: int
    modes: int
    stretch: float = 2.0

    def __post_init__(self):
        if self.nr < 16:
            raise ValueError(f"nr must be at least 16, got {self.nr}")
        if self.modes < 4:
            raise ValueError(f"modes must be at least 4, got {self.modes}")
        if not self.stretch >= 1.0:
            raise ValueError(f"stretch exponent must be at least 1, got {self.stretch}")

    @property
    def ntheta(self) -> int:
        return 3 * self.modes

    @cached_property
    def s(self) -> np.ndarray:
        return np.arange(1, self.nr + 1) / self.nr

    @cached_property
    def r(self) -> np.ndarray:
        r = 1.0 - (1.0 - self.s) ** self.stretch
        r[-1] = 1.0
        return r

    @cached_property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.ntheta) / self.ntheta

    @cached_property
    def spacing(self) -> np.ndarray:
        """Local radial spacing: the larger neighbouring gap at each node."""
        edges = np.concatenate(([0.0], self.r))
        gaps = np.diff(edges)
        return np.maximum(gaps, np.concatenate((gaps[1:], gaps[-1:])))

    @cached_property
    def radial_weights(self) -> np.ndarray:
        """Weights ``w_i`` with ``sum_i w_i phi(r_i) ~ int_0^1 phi(r) r dr``."""
        w = gregory_weights(self.nr)[1:]
        drds = self.stretch * (1.0 - self.s) ** (self.stretch - 1.0)
        return w * self.r * drds

    def disc_mean_radial(self, profile: np.ndarray) -> float:
        """Disc average of an axisymmetric profile sampled on ``r``."""
        return float(2.0 * self.radial_weights @ profile)

    def disc_mean_samples(self, values: np.ndarray) -> float:
        """Disc average of collocation samples of shape ``(nr, ntheta)``."""
        return self.disc_mean_radial(values.mean(axis=1))

    @cached_property
    def _stencil_nodes(self) -> np.ndarray:
        # three mirrored ghosts, then the physical nodes
        return np.concatenate((-self.r[2::-1], self.r))

    def _stencil(self, i: int, order: int, width: int) -> tuple[np.ndarray, np.ndarray]:
        n = self.nr
        e = i + 3
        lo = e - width // 2
        hi = lo + width
        last = n + 3
        if hi > last:
            hi = last
            lo = hi - width
        idx = np.arange(lo, hi)
        w = fd_weights(self.r[i], self._stencil_nodes[idx], order)
        return idx - 3, w

    def _fd_matrix(self, order: int, parity: int) -> sp.csr_matrix:
        sign = -1.0 if parity else 1.0
        n = self.nr
        rows, cols, vals = [], [], []
        for i in range(n):
            width = 5 if (order == 1 or i < n - 2) else 6
            idx, w = self._stencil(i, order, width)
            for j, wj in zip(idx, w):
                if j < 0:
                    j, wj = -j - 1, sign * wj
                rows.append(i)
                cols.append(j)
                vals.append(wj)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    @cached_property
    def d1(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """First-derivative matrices for even (index 0) and odd (index 1) profiles."""
        return self._fd_matrix(1, 0), self._fd_matrix(1, 1)

    @cached_property
    def d2(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        return self._fd_matrix(2, 0), self._fd_matrix(2, 1)

    def mode_parity(self, kind: int) -> np.ndarray:
        """Parity (0 even, 1 odd) of each mode for a scalar or vector component."""
        return (np.arange(self.modes) + kind) % 2

    def samples(self, func, *, kind: int = SCALAR) -> "SpectralScalar":
        """Sample ``func(r[:, None], theta[None, :])`` and project onto the modes."""
        vals = np.broadcast_to(func(self.r[:, None], self.theta[None, :]), (self.nr, self.ntheta))
        return SpectralScalar.from_collocation(self, vals, kind=kind)

    def zeros(self, kind: int = SCALAR) -> "SpectralScalar":
        return SpectralScalar(self, np.zeros((self.nr, self.modes), dtype=complex), kind)


class SpectralScalar:
    """A real field on the disc as complex radial profiles per angular mode."""

    __slots__ = ("grid", "coef", "kind")

    def __init__(self, grid: PolarGrid, coef: np.ndarray, kind: int = SCALAR):
        coef = np.asarray(coef, dtype=complex)
        if coef.shape != (grid.nr, grid.modes):
            raise ValueError(f"coefficient shape {coef.shape} does not match grid {(grid.nr, grid.modes)}")
        self.grid = grid
        self.coef = coef
        self.kind = kind

    @classmethod
    def from_collocation(cls, grid: PolarGrid, values: np.ndarray, kind: int = SCALAR) -> "SpectralScalar":
        n = grid.ntheta
        spec = np.fft.rfft(values, axis=1)[:, : grid.modes] * (2.0 / n)
        spec[:, 0] *= 0.5
        spec[:, 0] = spec[:, 0].real
        return cls(grid, spec, kind)

    @classmethod
    def from_modes(cls, grid: PolarGrid, a: np.ndarray, b: np.ndarray | None = None, kind: int = SCALAR):
        coef = np.asarray(a, dtype=complex).copy()
        if b is not None:
            coef -= 1j * np.asarray(b)
        coef[:, 0] = coef[:, 0].real
        return cls(grid, coef, kind)

    @property
    def a(self) -> np.ndarray:
        return self.coef.real

    @property
    def b(self) -> np.ndarray:
        return -self.coef.imag

    def to_collocation(self) -> np.ndarray:
        g = self.grid
        n = g.ntheta
        spec = np.zeros((g.nr, n // 2 + 1), dtype=complex)
        spec[:, : g.modes] = self.coef * (n / 2.0)
        spec[:, 0] = self.coef[:, 0].real * n
        return np.fft.irfft(spec, n=n, axis=1)

    def theta_average(self) -> np.ndarray:
        return self.coef[:, 0].real.copy()

    def disc_mean(self) -> float:
        return self.grid.disc_mean_radial(self.theta_average())

    def mean_square_profile(self) -> np.ndarray:
        """Angular average of the square, per radius."""
        c = self.coef
        return c[:, 0].real ** 2 + 0.5 * np.sum(np.abs(c[:, 1:]) ** 2, axis=1)

    def mean_square(self) -> float:
        return self.grid.disc_mean_radial(self.mean_square_profile())

    def inner(self, other: "SpectralScalar") -> float:
        """Disc average of the pointwise product."""
        c, d = self.coef, other.coef
        prof = c[:, 0].real * d[:, 0].real + 0.5 * np.sum((c[:, 1:] * d[:, 1:].conj()).real, axis=1)
        return self.grid.disc_mean_radial(prof)

    def copy(self) -> "SpectralScalar":
        return SpectralScalar(self.grid, self.coef.copy(), self.kind)

    def _check(self, other: "SpectralScalar"):
        if other.grid is not self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "SpectralScalar") -> "SpectralScalar":
        self._check(other)
        return SpectralScalar(self.grid, self.coef + other.coef, self.kind)

    def __sub__(self, other: "SpectralScalar") -> "SpectralScalar":
        self._check(other)
        return SpectralScalar(self.grid, self.coef - other.coef, self.kind)

    def __neg__(self) -> "SpectralScalar":
        return SpectralScalar(self.grid, -self.coef, self.kind)

    def __mul__(self, c: float) -> "SpectralScalar":
        return SpectralScalar(self.grid, self.coef * c, self.kind)

    __rmul__ = __mul__

    def scale_radial(self, profile: np.ndarray, flip: bool = False) -> "SpectralScalar":
        """Multiply by a radial profile; ``flip`` when the profile is odd in ``r``."""
        kind = self.kind ^ 1 if flip else self.kind
        return SpectralScalar(self.grid, self.coef * profile[:, None], kind)

    def d_theta(self) -> "SpectralScalar":
        m = np.arange(self.grid.modes)
        return SpectralScalar(self.grid, self.coef * (1j * m), self.kind)

    def theta_antiderivative(self) -> "SpectralScalar":
        """Zero-mean angular antiderivative; the mean mode is dropped."""
        m = np.arange(self.grid.modes, dtype=float)
        inv = np.zeros_like(m)
        inv[1:] = 1.0 / m[1:]
        return SpectralScalar(self.grid, self.coef * (-1j * inv), self.kind)

    def d_r(self) -> "SpectralScalar":
        g = self.grid
        out = np.empty_like(self.coef)
        par = g.mode_parity(self.kind)
        for p in (0, 1):
            cols = par == p
            if cols.any():
                out[:, cols] = g.d1[p] @ self.coef[:, cols]
        return SpectralScalar(g, out, self.kind ^ 1)

    def d_rr(self) -> "SpectralScalar":
        g = self.grid
        out = np.empty_like(self.coef)
        par = g.mode_parity(self.kind)
        for p in (0, 1):
            cols = par == p
            if cols.any():
                out[:, cols] = g.d2[p] @ self.coef[:, cols]
        return SpectralScalar(g, out, self.kind)


@dataclass
class VectorFieldPolar:
    """Polar components ``(v_r, v_theta)`` of a planar vector field."""

    r: SpectralScalar
    theta: SpectralScalar

    @property
    def grid(self) -> PolarGrid:
        return self.r.grid

    def mean_square(self) -> float:
        return self.r.mean_square() + self.theta.mean_square()

    def __mul__(self, c: float) -> "VectorFieldPolar":
        return VectorFieldPolar(self.r * c, self.theta * c)

    __rmul__ = __mul__


def gradient(phi: SpectralScalar) -> VectorFieldPolar:
    inv_r = 1.0 / phi.grid.r
    return VectorFieldPolar(phi.d_r(), phi.d_theta().scale_radial(inv_r, flip=True))


def perp_gradient(psi: SpectralScalar) -> VectorFieldPolar:
    """Velocity ``(-psi_theta / r, psi_r)`` of a streamfunction."""
    inv_r = 1.0 / psi.grid.r
    return VectorFieldPolar(-psi.d_theta().scale_radial(inv_r, flip=True), psi.d_r())


def divergence(v: VectorFieldPolar) -> SpectralScalar:
    inv_r = 1.0 / v.grid.r
    return v.r.d_r() + (v.r + v.theta.d_theta()).scale_radial(inv_r, flip=True)


def laplacian(phi: SpectralScalar) -> SpectralScalar:
    g = phi.grid
    m = np.arange(g.modes)
    inv_r = 1.0 / g.r
    out = phi.d_rr() + phi.d_r().scale_radial(inv_r, flip=True)
    out.coef -= phi.coef * (m[None, :] ** 2 * inv_r[:, None] ** 2)
    return out


def multiply(u: SpectralScalar, v: SpectralScalar) -> SpectralScalar:
    """Pseudospectral product, truncated to the grid's modes."""
    u._check(v)
    return SpectralScalar.from_collocation(u.grid, u.to_collocation() * v.to_collocation(), u.kind ^ v.kind)


def make_grid(nr: int, modes: int, stretch: float = 2.0) -> PolarGrid:
    return PolarGrid(int(nr), int(modes), float(stretch))


def mean_over_disc(phi: SpectralScalar) -> float:
    return phi.disc_mean()


def theta_average(phi: SpectralScalar) -> np.ndarray:
    return phi.theta_average()


def theta_antiderivative(phi: SpectralScalar) -> SpectralScalar:
    return phi.theta_antiderivative()
