"""Roll and branching flow designs with their paired test functions.

A design is a sum of layers ``chi_k(r) * psi_k`` with ``psi_k = r g(r, theta) P_k(theta)``
and ``P_k = sqrt(2) l_k cos(theta / l_k)``; the paired test function is
``eta = taper(r) * sum_k chi_k(r) * sqrt(2) sin(theta / l_k)``.  A roll flow is a
single layer with ``chi = 1``.  All fields are evaluated from closed-form
derivatives of these expressions, never by differencing sampled data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .disc_field import VECTOR, PolarGrid, SpectralScalar, VectorFieldPolar, make_grid
from .sources import Source

__all__ = [
    "BranchingPlan",
    "CutoffSet",
    "FlowDesign",
    "branching_plan",
    "energy_roll_plan",
    "cutoff_family",
    "roll_flow",
    "branching_flow",
    "energy_roll_design",
    "zero_flow",
    "rescale_to_pe",
    "smoothstep",
    "required_modes",
    "default_modes",
    "ResolutionError",
]

BRANCHING_MIN_PE = 70.0
ENERGY_ROLL_MIN_PE = 4.0
_CHUNK_POINTS = 1_500_000


class ResolutionError(ValueError):
    """The grid cannot represent the requested design or solve."""


def smoothstep(x):
    """``S(x) = 6x^5 - 15x^4 + 10x^3`` clipped to ``[0, 1]``, with two derivatives."""
    x = np.clip(x, 0.0, 1.0)
    s = x**3 * (10 - 15 * x + 6 * x * x)
    ds = 30 * x * x * (1 - x) ** 2
    dds = 60 * x * (1 - x) * (1 - 2 * x)
    return s, ds, dds


def scale_factor(pe: float) -> float:
    """``Pe^(1/3) / log(Pe)^(1/6)``; the local roll scale is ``sqrt(1 - r)`` over this."""
    return pe ** (1 / 3) / math.log(pe) ** (1 / 6)


@dataclass(frozen=True)
class BranchingPlan:
    """Layer frequencies ``1/l_k`` and transition radii ``r_k`` of a branching flow."""

    frequencies: tuple[int, ...]
    radii: tuple[float, ...]
    pe_target: float | None = None
    r_core: float = 0.1
    family: str = "branching"

    def __post_init__(self):
        if len(self.frequencies) != len(self.radii) or not self.frequencies:
            raise ValueError("a plan needs one radius per layer")
        if any(int(q) != q or q < 1 for q in self.frequencies):
            raise ValueError("layer frequencies must be positive integers")
        if any(b <= a for a, b in zip(self.frequencies, self.frequencies[1:])):
            raise ValueError("layer scales must strictly decrease")
        rr = (0.0,) + tuple(self.radii) + (1.0,)
        if any(b <= a for a, b in zip(rr, rr[1:])):
            raise ValueError("transition radii must increase strictly inside (0, 1)")
        if not 0 < self.r_core < self.radii[0]:
            raise ValueError("core taper radius must lie in (0, r_1)")

    @property
    def n(self) -> int:
        return len(self.frequencies)

    @property
    def scales(self) -> tuple[float, ...]:
        return tuple(1.0 / q for q in self.frequencies)

    @property
    def widths(self) -> tuple[float, ...]:
        """``delta_k = r_{k+1} - r_k``, with ``delta_n = 1 - r_n``."""
        rr = tuple(self.radii) + (1.0,)
        return tuple(b - a for a, b in zip(rr, rr[1:]))

    @property
    def delta_bl(self) -> float:
        return 1.0 - self.radii[-1]

    @property
    def delta_bulk(self) -> float:
        return 1.0 - self.radii[0]

    @property
    def l_bulk(self) -> float:
        return 1.0 / self.frequencies[0]

    @property
    def l_bl(self) -> float:
        return 1.0 / self.frequencies[-1]


def branching_plan(pe: float) -> BranchingPlan:
    """Plan with ``n = floor(log2 c)`` layers, ``c = Pe^(1/3) / log^(1/6) Pe``.

    ``1/l_1`` is the smallest integer ``>= 2c``, scales halve layer to layer,
    and ``r_k`` solves ``l_k = sqrt(1 - r_k) / c``.
    """
    pe = float(pe)
    if not pe >= BRANCHING_MIN_PE:
        raise ValueError(
            f"branching plans need pe >= {BRANCHING_MIN_PE:g} (got {pe:g}); use a roll flow instead"
        )
    c = scale_factor(pe)
    n = int(math.floor(math.log2(c)))
    q1 = int(math.ceil(2 * c - 1e-12))
    freqs = tuple(q1 * 2**k for k in range(n))
    radii = tuple(1.0 - (c / q) ** 2 for q in freqs)
    return BranchingPlan(freqs, radii, pe, min(0.1, radii[0] / 4))


def energy_roll_plan(pe: float) -> BranchingPlan:
    """Single layer with ``1/l = round(sqrt(Pe))`` and boundary ramp width ``l``."""
    pe = float(pe)
    if not pe >= ENERGY_ROLL_MIN_PE:
        raise ValueError(f"energy-roll designs need pe >= {ENERGY_ROLL_MIN_PE:g} (got {pe:g})")
    q = int(round(math.sqrt(pe)))
    r1 = 1.0 - 1.0 / q
    return BranchingPlan((q,), (r1,), pe, min(0.1, r1 / 4), family="energy_roll")


@dataclass(frozen=True)
class CutoffSet:
    """Radial partition ``chi_1..chi_n``: Pythagorean on ``(0, r_n)``, ramped to zero at the wall."""

    radii: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.radii)

    @property
    def widths(self) -> tuple[float, ...]:
        rr = tuple(self.radii) + (1.0,)
        return tuple(b - a for a, b in zip(rr, rr[1:]))

    def __call__(self, k: int, r: np.ndarray):
        """``(chi_k, chi_k', chi_k'')`` at radii ``r`` (zero-based ``k``)."""
        r = np.asarray(r, dtype=float)
        rk, wk = self.radii[k], self.widths[k]
        chi = np.zeros_like(r)
        d1 = np.zeros_like(r)
        d2 = np.zeros_like(r)
        if k == 0:
            chi[r <= rk] = 1.0
        else:
            lo, w = self.radii[k - 1], self.widths[k - 1]
            sel = (r > lo) & (r <= rk)
            s, ds, dds = smoothstep((r[sel] - lo) / w)
            ph, dph, ddph = 0.5 * np.pi * s, 0.5 * np.pi * ds / w, 0.5 * np.pi * dds / w**2
            chi[sel] = np.sin(ph)
            d1[sel] = np.cos(ph) * dph
            d2[sel] = -np.sin(ph) * dph**2 + np.cos(ph) * ddph
        sel = (r > rk) & (r < rk + wk)
        s, ds, dds = smoothstep((r[sel] - rk) / wk)
        ph, dph, ddph = 0.5 * np.pi * s, 0.5 * np.pi * ds / wk, 0.5 * np.pi * dds / wk**2
        chi[sel] = np.cos(ph)
        d1[sel] = -np.sin(ph) * dph
        d2[sel] = -np.cos(ph) * dph**2 - np.sin(ph) * ddph
        return chi, d1, d2

    def support(self, k: int) -> tuple[float, float]:
        lo = 0.0 if k == 0 else self.radii[k - 1]
        return lo, self.radii[k] + self.widths[k]


def cutoff_family(plan: BranchingPlan) -> CutoffSet:
    return CutoffSet(tuple(plan.radii))


def required_modes(plan: BranchingPlan | None, roll_n: int | None = None) -> int:
    """Minimum angular modes: ``4 / l_n`` (four modes per finest layer frequency)."""
    if plan is not None:
        return 4 * plan.frequencies[-1]
    return 4 * int(roll_n)


def default_modes(plan: BranchingPlan) -> int:
    return max(256, 8 * plan.frequencies[-1])


def _core_taper(r: np.ndarray, r_core: float):
    if r_core <= 0:
        one = np.ones_like(r)
        return one, np.zeros_like(r)
    s, ds, _ = smoothstep(r / r_core)
    return s, ds / r_core


@dataclass(frozen=True, eq=False)
class FlowDesign:
    """A velocity field paired with an upper-bound test function, on a grid.

    ``scale`` multiplies the velocity and divides the test function, so the
    upper-bound residual is unchanged by rescaling.
    """

    kind: str
    source: Source
    grid: PolarGrid
    frequencies: tuple[int, ...]
    cutoffs: CutoffSet | None
    taper: float
    plan: BranchingPlan | None = None
    scale: float = 1.0
    zero: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def roll_n(self) -> int | None:
        return self.frequencies[0] if self.kind == "roll" else None

    @property
    def no_slip(self) -> bool:
        return self.cutoffs is not None or self.zero

    # pointwise evaluation -------------------------------------------------

    def evaluate(self, r: np.ndarray, theta: np.ndarray, potential=None) -> dict:
        """Closed-form fields at ``r[:, None]``, ``theta[None, :]`` (unit scale).

        Returns ``psi``, velocity ``u_r``, ``u_t``, gradient entries ``g_rr``,
        ``g_rt``, ``g_tr``, ``g_tt`` (with ``g_rt = (1/r) d_theta u_r - u_t / r``
        and ``g_tt = (1/r) d_theta u_t + u_r / r``), ``eta``, ``eta_r``, ``eta_t``
        (the latter being ``(1/r) d_theta eta``).
        """
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        rc, tc = r[:, None], theta[None, :]
        shape = (len(r), len(theta))
        if self.zero:
            z = np.zeros(shape)
            return dict.fromkeys(("psi", "u_r", "u_t", "g_rr", "g_rt", "g_tr", "g_tt", "eta", "eta_r", "eta_t"), z)
        if potential is None:
            potential = self.source.radial_integrals(r, theta)
        g, g_t, g_tt = potential
        src = self.source
        f = src.eval("f", rc, tc)
        f_r = src.eval("f_r", rc, tc)
        f_t = src.eval("f_theta", rc, tc)
        h, h_r, h_rr = rc * g, rc * f, f + rc * f_r
        h_t, h_rt, h_tt = rc * g_t, rc * f_t, rc * g_tt

        psi = np.zeros(shape)
        p_t = np.zeros(shape)
        p_r = np.zeros(shape)
        p_rt = np.zeros(shape)
        p_tt = np.zeros(shape)
        p_rr = np.zeros(shape)
        eta = np.zeros(shape)
        eta_r = np.zeros(shape)
        eta_th = np.zeros(shape)
        for k, q in enumerate(self.frequencies):
            if self.cutoffs is None:
                x, x1, x2 = np.ones_like(r), np.zeros_like(r), np.zeros_like(r)
            else:
                x, x1, x2 = self.cutoffs(k, r)
            if not (x.any() or x1.any()):
                continue
            x, x1, x2 = x[:, None], x1[:, None], x2[:, None]
            amp = math.sqrt(2.0) / q
            c, s = np.cos(q * tc), np.sin(q * tc)
            P, P1, P2 = amp * c, -amp * q * s, -amp * q * q * c
            a = h_t * P + h * P1
            psi += x * h * P
            p_t += x * a
            p_r += x1 * h * P + x * h_r * P
            p_rt += x1 * a + x * (h_rt * P + h_r * P1)
            p_tt += x * (h_tt * P + 2 * h_t * P1 + h * P2)
            p_rr += x2 * h * P + 2 * x1 * h_r * P + x * h_rr * P
            e = math.sqrt(2.0) * s
            eta += x * e
            eta_r += x1 * e
            eta_th += x * (math.sqrt(2.0) * q) * c
        inv_r = 1.0 / rc
        tp, tp1 = _core_taper(r, self.taper)
        tp, tp1 = tp[:, None], tp1[:, None]
        out = {
            "psi": psi,
            "u_r": -p_t * inv_r,
            "u_t": p_r,
            "g_rr": p_t * inv_r**2 - p_rt * inv_r,
            "g_rt": -p_tt * inv_r**2 - p_r * inv_r,
            "g_tr": p_rr,
            "g_tt": p_rt * inv_r - p_t * inv_r**2,
            "eta": tp * eta,
            "eta_r": tp1 * eta + tp * eta_r,
            "eta_t": tp * eta_th * inv_r,
        }
        return out

    # grid sampling --------------------------------------------------------

    def _row_chunks(self):
        step = max(1, _CHUNK_POINTS // self.grid.ntheta)
        for i in range(0, self.grid.nr, step):
            yield slice(i, min(i + step, self.grid.nr))

    def _pass(self) -> dict:
        """One chunked sweep over the grid at unit scale, cached."""
        hit = self._cache.get("pass")
        if hit is not None:
            return hit
        grid, src = self.grid, self.source
        nr, nt, M = grid.nr, grid.ntheta, grid.modes
        g_full = src.potential(grid)
        specs = {name: np.zeros((nr, M), dtype=complex) for name in ("psi", "u_r", "u_t", "eta", "rho", "v_r", "v_t")}
        prof = {name: np.zeros(nr) for name in ("energy", "enstrophy", "grad_eta")}
        umax = np.zeros(nr)
        trace = 0.0
        scale_g = 0.0
        for sl in self._row_chunks():
            r = grid.r[sl]
            pot = tuple(np.broadcast_to(a[sl], (r.size, a.shape[1])) for a in g_full)
            e = self.evaluate(r, grid.theta, pot)
            fv = np.broadcast_to(src.eval("f", r[:, None], grid.theta[None, :]), (r.size, nt))
            gv = np.broadcast_to(pot[0], (r.size, nt))
            fields = {
                "psi": e["psi"],
                "u_r": e["u_r"],
                "u_t": e["u_t"],
                "eta": e["eta"],
                "rho": e["u_r"] * e["eta_r"] + e["u_t"] * e["eta_t"] - fv,
                "v_r": e["u_r"] * e["eta"] - gv,
                "v_t": e["u_t"] * e["eta"],
            }
            for name, vals in fields.items():
                spec = np.fft.rfft(vals, axis=1)[:, :M] * (2.0 / nt)
                spec[:, 0] = 0.5 * spec[:, 0].real
                specs[name][sl] = spec
            u2 = e["u_r"] ** 2 + e["u_t"] ** 2
            g2 = e["g_rr"] ** 2 + e["g_rt"] ** 2 + e["g_tr"] ** 2 + e["g_tt"] ** 2
            prof["energy"][sl] = u2.mean(axis=1)
            prof["enstrophy"][sl] = g2.mean(axis=1)
            prof["grad_eta"][sl] = (e["eta_r"] ** 2 + e["eta_t"] ** 2).mean(axis=1)
            umax[sl] = np.sqrt(u2.max(axis=1))
            trace = max(trace, float(np.abs(e["g_rr"] + e["g_tt"]).max()))
            scale_g = max(scale_g, float(np.sqrt(g2.max())))
            last_eta = e["eta"][-1]
            del e, fields
        kinds = {"psi": 0, "u_r": VECTOR, "u_t": VECTOR, "eta": 0, "rho": 0, "v_r": VECTOR, "v_t": VECTOR}
        out = {name: SpectralScalar(grid, specs[name], kinds[name]) for name in specs}
        out.update(
            energy=grid.disc_mean_radial(prof["energy"]),
            enstrophy=grid.disc_mean_radial(prof["enstrophy"]),
            grad_eta=grid.disc_mean_radial(prof["grad_eta"]),
            speed_profile=umax,
            wall_speed=float(umax[-1]),
            wall_eta=float(np.abs(last_eta).max()),
            trace=trace,
            gradient_scale=scale_g,
        )
        self._cache["pass"] = out
        return out

    @property
    def psi(self) -> SpectralScalar:
        return self._pass()["psi"] * self.scale

    @property
    def velocity(self) -> VectorFieldPolar:
        p = self._pass()
        return VectorFieldPolar(p["u_r"] * self.scale, p["u_t"] * self.scale)

    @property
    def eta(self) -> SpectralScalar:
        return self._pass()["eta"] * (1.0 / self.scale)

    @property
    def enstrophy(self) -> float:
        return self._pass()["enstrophy"] * self.scale**2

    @property
    def energy(self) -> float:
        return self._pass()["energy"] * self.scale**2

    @property
    def grad_eta(self) -> float:
        return self._pass()["grad_eta"] / self.scale**2

    def flow_norm(self, constraint: str) -> float:
        if constraint == "enstrophy":
            return self.enstrophy
        if constraint == "energy":
            return self.energy
        raise ValueError(f"unknown constraint {constraint!r}; expected enstrophy or energy")

    def residual_density(self) -> SpectralScalar:
        """``u . grad eta - f`` projected onto the grid modes (scale invariant)."""
        return self._pass()["rho"]

    def flux_field(self) -> VectorFieldPolar:
        """``u eta - g e_r`` (scale invariant)."""
        p = self._pass()
        return VectorFieldPolar(p["v_r"], p["v_t"])

    def speed_profile(self) -> np.ndarray:
        """Maximum speed over angle at each radial node, at the current scale."""
        return self._pass()["speed_profile"] * self.scale

    def check_invariants(self, tol_div: float = 1e-8) -> list[str]:
        """Names of violated design invariants (empty when all hold)."""
        p = self._pass()
        bad = []
        if p["trace"] > tol_div * max(1.0, p["gradient_scale"]):
            bad.append(f"divergence {p['trace']:.2e}")
        if self.no_slip:
            if p["wall_speed"] > 1e-10:
                bad.append(f"wall speed {p['wall_speed']:.2e}")
            if p["wall_eta"] > 1e-12:
                bad.append(f"wall test function {p['wall_eta']:.2e}")
        return bad

    def with_scale(self, scale: float) -> "FlowDesign":
        new = replace(self, scale=float(scale), _cache=self._cache)
        return new


def _grid_for(grid: PolarGrid | None, modes_needed: int) -> PolarGrid:
    if grid is None:
        return make_grid(256, max(256, 2 * modes_needed))
    return grid


def roll_flow(source: Source, n: int, taper: float = 0.0, grid: PolarGrid | None = None) -> FlowDesign:
    """Single-scale rolls with ``n`` angular periods; ``taper`` is the core ramp radius."""
    if int(n) != n or n < 1:
        raise ValueError(f"roll count must be a positive integer, got {n}")
    if not 0.0 <= taper <= 0.25:
        raise ValueError(f"taper radius must lie in [0, 1/4], got {taper}")
    grid = _grid_for(grid, required_modes(None, n))
    if grid.modes < required_modes(None, n):
        raise ResolutionError(f"roll flow with n={n} needs modes >= {required_modes(None, n)}, grid has {grid.modes}")
    return FlowDesign("roll", source, grid, (int(n),), None, float(taper))


def branching_flow(source: Source, plan: BranchingPlan, grid: PolarGrid | None = None) -> FlowDesign:
    need = required_modes(plan)
    grid = grid if grid is not None else make_grid(1024, default_modes(plan))
    if grid.modes < need:
        raise ResolutionError(
            f"branching plan with 1/l_n={plan.frequencies[-1]} needs modes >= {need}, grid has {grid.modes}"
        )
    return FlowDesign(plan.family, source, grid, plan.frequencies, cutoff_family(plan), plan.r_core, plan)


def energy_roll_design(source: Source, pe: float, grid: PolarGrid | None = None) -> FlowDesign:
    return branching_flow(source, energy_roll_plan(pe), grid)


def zero_flow(source: Source, grid: PolarGrid) -> FlowDesign:
    """No flow and a vanishing test function."""
    return FlowDesign("zero", source, grid, (1,), None, 0.0, zero=True)


def rescale_to_pe(design: FlowDesign, pe: float, constraint: str = "enstrophy") -> FlowDesign:
    """Scale the velocity so its constraint norm is ``pe**2`` (test function by the inverse)."""
    norm = design.flow_norm(constraint)
    if not norm > 0:
        raise ValueError("cannot rescale a flow with zero norm")
    return design.with_scale(design.scale * pe / math.sqrt(norm))
