"""Peclet sweeps, CSV reports and scaling fits."""

from __future__ import annotations

import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .advdiff import solve_steady
from .bounds import BoundReport, lower_bound_certify, upper_bound
from .config import RunConfig
from .disc_field import make_grid
from .flows import (
    FlowDesign,
    branching_flow,
    branching_plan,
    default_modes,
    energy_roll_plan,
    roll_flow,
)
from .poisson import NumericalError
from .sources import parse_source

__all__ = [
    "CSV_COLUMNS",
    "SweepTable",
    "ScalingFit",
    "build_design",
    "evaluate_row",
    "run_sweep",
    "fit_scaling",
    "fit_values",
    "compensate",
]

CSV_COLUMNS = (
    "pe", "constraint", "upper", "lower", "exact", "residual_flux", "residual_q", "grad_eta", "flow_norm",
    "delta_star",
)
_META_KEYS = ("source", "flow", "constraint", "nr", "modes", "stretch", "exact_cap", "roll_n", "taper")
_FLOAT_COLUMNS = tuple(c for c in CSV_COLUMNS if c != "constraint")


def build_design(cfg: RunConfig, pe: float, source=None) -> FlowDesign:
    """The configured flow family at ``pe`` on the configured grid."""
    source = parse_source(cfg.source) if source is None else source
    if cfg.flow == "roll":
        grid = make_grid(cfg.nr, cfg.modes or max(256, 8 * cfg.roll_n), cfg.stretch)
        return roll_flow(source, cfg.roll_n, cfg.taper, grid)
    plan = branching_plan(pe) if cfg.flow == "branching" else energy_roll_plan(pe)
    grid = make_grid(cfg.nr, cfg.modes or default_modes(plan), cfg.stretch)
    return branching_flow(source, plan, grid)


def evaluate_row(cfg: RunConfig, pe: float) -> tuple[BoundReport, str | None, float]:
    """``(report, error, wall_seconds)`` for one Peclet number; failures never raise."""
    start = time.perf_counter()
    errors = []
    report = BoundReport(pe=float(pe), constraint=cfg.constraint, upper=None, residual_flux=None, residual_q=None,
                         grad_eta=None, flow_norm=None)
    try:
        source = parse_source(cfg.source)
        design = build_design(cfg, pe, source)
        report = upper_bound(design, source, pe, cfg.constraint)
        if cfg.lower:
            lower, delta = lower_bound_certify(design, source, pe, cfg.constraint)
            report = report.with_values(lower=lower, delta_star=delta)
        if pe <= cfg.exact_cap:
            try:
                sol = solve_steady(design, source, pe, cfg.constraint)
                report = report.with_values(exact=sol.cooling)
            except (NumericalError, ValueError) as exc:
                errors.append(f"exact: {exc}")
    except (NumericalError, ValueError) as exc:
        errors.append(str(exc))
    return report, ("; ".join(errors) or None), time.perf_counter() - start


def _evaluate_packed(args):
    return evaluate_row(*args)


@dataclass
class SweepTable:
    """Bound reports sorted by Peclet number, with shared run metadata.

    ``wall_times`` are kept in memory only so that written tables are
    byte-deterministic.
    """

    rows: list[BoundReport]
    metadata: dict[str, str] = field(default_factory=dict)
    errors: dict[float, str] = field(default_factory=dict)
    wall_times: list[float] = field(default_factory=list)

    def __post_init__(self):
        order = sorted(range(len(self.rows)), key=lambda i: self.rows[i].pe)
        self.rows = [self.rows[i] for i in order]
        if len(self.wall_times) == len(order):
            self.wall_times = [self.wall_times[i] for i in order]
        constraints = {r.constraint for r in self.rows}
        if len(constraints) > 1:
            raise ValueError("all rows of a sweep must share one constraint")

    @property
    def pe(self) -> np.ndarray:
        return np.array([r.pe for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, target=None) -> str:
        """Write the table (``target`` path or text stream) and return the text."""
        buf = io.StringIO()
        buf.write("# disccool sweep\n")
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {v}\n")
        for pe in sorted(self.errors):
            msg = " ".join(self.errors[pe].split())
            buf.write(f"# error: {_fmt(pe)}: {msg}\n")
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(_cell(getattr(r, c)) for c in CSV_COLUMNS) + "\n")
        text = buf.getvalue()
        if isinstance(target, (str, Path)):
            Path(target).write_text(text)
        elif target is not None:
            target.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "SweepTable":
        """Read a table written by :meth:`to_csv` (path, text stream or CSV text)."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        elif isinstance(source, str):
            text = source
        else:
            text = source.read()
        metadata, errors, rows = {}, {}, []
        header = None
        for line in text.splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                key, sep, value = body.partition(": ")
                if key == "error":
                    pe_text, _, msg = value.partition(": ")
                    errors[float(pe_text)] = msg
                elif sep:
                    metadata[key] = value
                continue
            if not line.strip():
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                if tuple(header) != CSV_COLUMNS:
                    raise ValueError(f"unexpected CSV header: {line}")
                continue
            row = dict(zip(header, cells))
            values = {c: (None if row[c] == "" else float(row[c])) for c in _FLOAT_COLUMNS}
            values["constraint"] = row["constraint"]
            values["residual"] = None
            rows.append(BoundReport(**values))
        return cls(rows, metadata, errors)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return _fmt(float(value))


def _metadata(cfg: RunConfig) -> dict[str, str]:
    meta = {}
    for key in _META_KEYS:
        v = getattr(cfg, key)
        if key == "modes" and v is None:
            v = "auto"
        elif isinstance(v, float):
            v = _fmt(v)
        meta[key] = str(v)
    # Pure rolls pair with a test function that is nonzero on the wall.
    meta["upper_certified"] = "no" if cfg.flow == "roll" else "yes"
    return meta


def run_sweep(cfg: RunConfig, progress=None) -> SweepTable:
    """One report per distinct Peclet number; rows run in a pool when ``cfg.workers > 1``.

    ``progress`` is called as ``progress(report, error, wall)`` in completion order.
    """
    pes = sorted(set(float(p) for p in cfg.pe))
    jobs = [(cfg, p) for p in pes]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            results = list(pool.map(_evaluate_packed, jobs))
    else:
        results = []
        for job in jobs:
            results.append(evaluate_row(*job))
            if progress is not None:
                progress(*results[-1])
    if progress is not None and cfg.workers > 1:
        for res in results:
            progress(*res)
    rows = [r for r, _, _ in results]
    errors = {r.pe: e for r, e, _ in results if e}
    walls = [w for _, _, w in results]
    return SweepTable(rows, _metadata(cfg), errors, walls)


@dataclass(frozen=True)
class ScalingFit:
    raw_slope: float
    compensated_spread: float
    r_squared: float
    compensated: tuple[float, ...] = ()


def compensate(pe: np.ndarray, values: np.ndarray, kind: str) -> np.ndarray:
    """Scale values by the expected Peclet dependence.

    ``enstrophy``: ``Pe^(2/3) / log^(4/3) Pe``; ``energy``: ``Pe``; ``lower``: ``Pe^(2/3)``.
    """
    pe = np.asarray(pe, dtype=float)
    values = np.asarray(values, dtype=float)
    if kind == "enstrophy":
        return values * pe ** (2 / 3) / np.log(pe) ** (4 / 3)
    if kind == "energy":
        return values * pe
    if kind == "lower":
        return values * pe ** (2 / 3)
    raise ValueError(f"unknown compensation {kind!r}")


def fit_values(pe, values, kind: str) -> ScalingFit:
    """Least-squares slope of ``log value`` against ``log pe`` and the compensated spread."""
    pe = np.asarray(pe, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values) & (values > 0) & np.isfinite(pe) & (pe > 1)
    pe, values = pe[ok], values[ok]
    if len(pe) < 4 or math.log10(pe.max() / pe.min()) < 2 - 1e-12:
        raise ValueError("scaling fit needs at least 4 usable rows spanning 2 decades of pe")
    x, y = np.log(pe), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    comp = compensate(pe, values, kind)
    return ScalingFit(float(slope), float(comp.max() / comp.min()), r2, tuple(float(c) for c in comp))


def fit_scaling(table: SweepTable, constraint: str | None = None, column: str = "upper") -> ScalingFit:
    """Fit ``column`` of ``table``; compensation follows ``constraint`` (``lower`` for Pe^(2/3))."""
    kind = constraint or (table.rows[0].constraint if table.rows else "enstrophy")
    return fit_values(table.pe, table.column(column), kind)
