"""Heat sources on the unit disc and their radial integrals.

Every source carries analytic evaluators for ``f`` and its first and second
polar derivatives.  The radial potential

    g(r, theta) = (1 / r) * int_0^r rho f(rho, theta) d rho

satisfies ``div(g e_r) = f`` and its angle mean is the cumulative flux
``F(r)``, the heat generated inside radius ``r`` per unit circumference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .disc_field import PolarGrid, SpectralScalar, make_grid

__all__ = ["Source", "make_source", "parse_source", "cumulative_flux", "radial_potential", "SOURCE_KINDS"]

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

DERIVATIVES = ("f", "f_r", "f_theta", "f_rr", "f_rtheta", "f_thetatheta")
SOURCE_KINDS = ("constant", "gaussian_center", "gaussian_ring", "quadrupole", "custom")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_REFERENCE_GRID = (256, 64)


def _zero(r, t):
    return np.zeros(np.broadcast(r, t).shape)


@dataclass(frozen=True, eq=False)
class Source:
    """A heat source ``f(r, theta)`` with analytic derivatives.

    Evaluators take broadcastable ``(r, theta)`` arrays.  Axisymmetric sources
    may return arrays that do not depend on ``theta``.
    """

    kind: str
    params: dict
    evaluators: dict
    axisymmetric: bool
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        mean = self.disc_mean()
        rms = np.sqrt(self._reference_mean(lambda r, t: self.eval("f", r, t) ** 2))
        if not np.isfinite(mean) or mean <= 1e-10 * max(rms, 1e-300):
            raise ValueError(f"source mean over the disc must be positive, got {mean:.3e}")
        if not np.isfinite(self.c0):
            raise ValueError("source regularity constant c0 is not finite")

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))

    def eval(self, name: str, r, theta) -> np.ndarray:
        return self.evaluators[name](r, theta)

    def _reference_mean(self, func) -> float:
        grid = self._cache.get("reference")
        if grid is None:
            grid = self._cache["reference"] = make_grid(*_REFERENCE_GRID)
        r, t = grid.r[:, None], grid.theta[None, :]
        vals = np.broadcast_to(func(r, t), (grid.nr, grid.ntheta))
        return grid.disc_mean_samples(vals)

    def disc_mean(self) -> float:
        return self._reference_mean(lambda r, t: self.eval("f", r, t))

    @cached_property
    def c0(self) -> float:
        """Disc mean of ``f**2 + |grad f|**2 + |Hess f|**2`` on a reference grid.

        For sources whose gradient does not vanish at the pole this is a
        grid-level value: the continuum integral diverges logarithmically.
        """

        def density(r, t):
            e = {k: np.broadcast_to(self.eval(k, r, t), np.broadcast(r, t).shape) for k in DERIVATIVES}
            grad2 = e["f_r"] ** 2 + (e["f_theta"] / r) ** 2
            h_rr = e["f_rr"]
            h_rt = e["f_rtheta"] / r - e["f_theta"] / r**2
            h_tt = e["f_thetatheta"] / r**2 + e["f_r"] / r
            return e["f"] ** 2 + grad2 + h_rr**2 + 2 * h_rt**2 + h_tt**2

        return self._reference_mean(density)

    def radial_integrals(self, r: np.ndarray, theta: np.ndarray, chunk: int = 4_000_000):
        """``(g, g_theta, g_thetatheta)`` at sorted radii ``r`` and angles ``theta``.

        Composite four-point Gauss rule over the cells between consecutive
        radii (the first cell starts at the pole).  Axisymmetric sources give
        arrays of shape ``(len(r), 1)``.
        """
        r = np.asarray(r, dtype=float)
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("radii must be positive and strictly increasing")
        left = np.concatenate(([0.0], r[:-1]))
        half = 0.5 * (r - left)
        nodes = (left + half)[:, None] + half[:, None] * _GL_NODES[None, :]
        wts = half[:, None] * _GL_WEIGHTS[None, :] * nodes
        rho = nodes.reshape(-1, 1)
        theta = np.zeros(1) if self.axisymmetric else np.asarray(theta, dtype=float)
        names = ("f", "f_theta", "f_thetatheta")
        out = [np.empty((len(r), len(theta))) for _ in names]
        step = max(1, chunk // (4 * len(r)))
        for j in range(0, len(theta), step):
            t = theta[None, j : j + step]
            for k, name in enumerate(names):
                vals = np.broadcast_to(self.eval(name, rho, t), (rho.shape[0], t.shape[1]))
                cell = np.einsum("ij,ijk->ik", wts, vals.reshape(len(r), 4, -1))
                out[k][:, j : j + step] = np.cumsum(cell, axis=0) / r[:, None]
        return tuple(out)

    def potential(self, grid: PolarGrid):
        """Cached :meth:`radial_integrals` on a grid's nodes and collocation angles."""
        key = ("potential", id(grid))
        hit = self._cache.get(key)
        if hit is None or hit[0] is not grid:
            hit = (grid, self.radial_integrals(grid.r, grid.theta))
            self._cache[key] = hit
        return hit[1]

    def samples(self, grid: PolarGrid) -> SpectralScalar:
        return grid.samples(lambda r, t: self.eval("f", r, t))


def _constant(value: float = 1.0):
    value = float(value)

    def f(r, t):
        return np.full(np.shape(r), value)

    ev = dict.fromkeys(DERIVATIVES, _zero)
    ev["f"] = f
    return ev, True


def _gaussian_center(a: float = 4.0):
    a = float(a)

    def f(r, t):
        return np.exp(-a * r * r)

    ev = dict.fromkeys(DERIVATIVES, _zero)
    ev["f"] = f
    ev["f_r"] = lambda r, t: -2 * a * r * f(r, t)
    ev["f_rr"] = lambda r, t: (4 * a * a * r * r - 2 * a) * f(r, t)
    return ev, True


def _gaussian_ring(a: float = 4.0):
    a = float(a)

    def f(r, t):
        return np.exp(-a * (1 - r) ** 2)

    ev = dict.fromkeys(DERIVATIVES, _zero)
    ev["f"] = f
    ev["f_r"] = lambda r, t: 2 * a * (1 - r) * f(r, t)
    ev["f_rr"] = lambda r, t: (4 * a * a * (1 - r) ** 2 - 2 * a) * f(r, t)
    return ev, True


def _quadrupole(k: int = 2):
    k = int(k)

    def ones(r, t):
        return np.ones(np.broadcast(r, t).shape)

    ev = dict.fromkeys(DERIVATIVES, _zero)
    ev["f"] = lambda r, t: ones(r, t) * np.sin(k * t) ** 2
    ev["f_theta"] = lambda r, t: ones(r, t) * k * np.sin(2 * k * t)
    ev["f_thetatheta"] = lambda r, t: ones(r, t) * 2 * k * k * np.cos(2 * k * t)
    return ev, False


_BUILDERS = {
    "constant": _constant,
    "gaussian_center": _gaussian_center,
    "gaussian_ring": _gaussian_ring,
    "quadrupole": _quadrupole,
}


def make_source(kind: str, params: dict | None = None, *, evaluators: dict | None = None,
                axisymmetric: bool = False) -> Source:
    """Build a source by kind.

    ``custom`` sources pass ``evaluators`` with every key in ``DERIVATIVES``.
    """
    params = dict(params or {})
    if kind == "custom":
        missing = [k for k in DERIVATIVES if k not in (evaluators or {})]
        if missing:
            raise ValueError(f"custom source is missing evaluators: {', '.join(missing)}")
        return Source(kind, params, dict(evaluators), axisymmetric)
    if kind not in _BUILDERS:
        raise ValueError(f"unknown source kind {kind!r}; expected one of {', '.join(SOURCE_KINDS)}")
    try:
        ev, axi = _BUILDERS[kind](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for source {kind!r}: {params}") from exc
    return Source(kind, params, ev, axi)


def parse_source(text: str) -> Source:
    """Parse ``name[:key=value,...]`` (a bare value sets the first parameter)."""
    name, _, rest = text.strip().partition(":")
    params: dict = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            key, value = {"constant": "value", "quadrupole": "k"}.get(name, "a"), key
        try:
            params[key.strip()] = float(value)
        except ValueError as exc:
            raise ValueError(f"source parameter {key!r} is not a number: {value!r}") from exc
    if name == "quadrupole" and "k" in params:
        params["k"] = int(params["k"])
    return make_source(name, params)


def cumulative_flux(source: Source, grid: PolarGrid) -> np.ndarray:
    """``F(r)`` on the grid nodes."""
    g, _, _ = source.potential(grid)
    return g.mean(axis=1)


def radial_potential(source: Source, grid: PolarGrid) -> SpectralScalar:
    g, _, _ = source.potential(grid)
    return SpectralScalar.from_collocation(grid, np.broadcast_to(g, (grid.nr, grid.ntheta)), kind=1)
