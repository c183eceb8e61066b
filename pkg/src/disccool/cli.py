"""Command-line driver.  Exit codes: 0 success, 1 usage error, 2 numerical failure."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

from .config import FLOWS, ConfigError, load_config, parse_pe_list
from .flows import BRANCHING_MIN_PE, ENERGY_ROLL_MIN_PE, ResolutionError
from .poisson import NumericalError
from .sources import parse_source

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--source", help="name[:key=value,...], e.g. gaussian_center:a=4")
    p.add_argument("--flow", choices=FLOWS)
    p.add_argument("--constraint", choices=("enstrophy", "energy"))
    p.add_argument("--pe", type=_pe_list, help="comma separated Peclet numbers; a^b allowed")
    p.add_argument("--nr", type=int, help="radial nodes")
    p.add_argument("--modes", type=_modes, help="angular modes or 'auto'")
    p.add_argument("--stretch", type=float, help="wall clustering exponent")
    p.add_argument("--exact-cap", dest="exact_cap", type=float, help="largest pe given a direct solve")
    p.add_argument("--roll-n", dest="roll_n", type=int, help="roll count for --flow roll")
    p.add_argument("--taper", type=float, help="core ramp radius for --flow roll")
    p.add_argument("--workers", type=int, help="parallel rows")
    p.add_argument("--out", help="output path (stdout when omitted)")


def _pe_list(text):
    try:
        return parse_pe_list(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _modes(text):
    if text.strip().lower() == "auto":
        return "auto"
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="disccool", description="Bounds on heat transport by designed flows in a disc.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (
        ("bound", "upper and certified lower bounds per pe"),
        ("solve", "direct steady solve per pe, with bounds"),
        ("sweep", "bounds for every pe, direct solves up to the exact cap, scaling fit"),
        ("render", "streamline SVG of the design at the first pe"),
    ):
        _common(sub.add_parser(name, help=text, description=text))
    st = sub.add_parser("selftest", help="run the invariant suites at small sizes")
    st.add_argument("--inject-fault", dest="fault", choices=("poisson-stencil",), help="corrupt a kernel on purpose")
    st.add_argument("--only", help="run checks whose name contains this text")
    return parser


def _config(args):
    keys = ("source", "flow", "constraint", "pe", "nr", "modes", "stretch", "exact_cap", "roll_n", "taper",
            "workers", "out")
    overrides = {k: getattr(args, k) for k in keys}
    modes_auto = overrides["modes"] == "auto"
    if modes_auto:
        overrides["modes"] = None
    cfg = load_config(args.config, **overrides)
    if modes_auto:
        cfg = replace(cfg, modes=None)
    parse_source(cfg.source)
    floor = {"branching": BRANCHING_MIN_PE, "energy-roll": ENERGY_ROLL_MIN_PE}.get(cfg.flow)
    if floor is not None and min(cfg.pe) < floor:
        raise ConfigError(f"--flow {cfg.flow} needs pe >= {floor:g}; got {min(cfg.pe):g} (use --flow roll)")
    return cfg


def _log(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _progress(report, error, wall):
    status = f"error: {error}" if error else f"upper={report.upper:.6g}"
    _log(f"pe={report.pe:.6g} {status} ({wall:.1f} s)")


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_table(cfg, exact_cap):
    from .sweep import run_sweep

    return run_sweep(cfg.merged(exact_cap=exact_cap), progress=_progress)


def cmd_bound(cfg) -> int:
    table = _run_table(cfg, 0.0)
    _emit(table.to_csv(), cfg.out)
    return EXIT_NUMERICAL if table.errors else EXIT_OK


def cmd_solve(cfg) -> int:
    table = _run_table(cfg, math.inf)
    _emit(table.to_csv(), cfg.out)
    return EXIT_NUMERICAL if table.errors else EXIT_OK


def cmd_sweep(cfg) -> int:
    from .sweep import fit_scaling

    table = _run_table(cfg, cfg.exact_cap)
    _emit(table.to_csv(), cfg.out)
    for column, kind in (("upper", cfg.constraint), ("lower", "lower")):
        try:
            fit = fit_scaling(table, kind, column)
        except ValueError as exc:
            _log(f"{column}: no scaling fit ({exc})")
            continue
        _log(f"{column}: slope {fit.raw_slope:.4f}, r^2 {fit.r_squared:.4f}, compensated spread "
             f"{fit.compensated_spread:.4f}")
    if len(table.errors) == len(table.rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_render(cfg) -> int:
    from .render import render_streamlines
    from .sweep import build_design

    if not cfg.out:
        raise ConfigError("render needs --out <file.svg>")
    design = build_design(cfg, cfg.pe[0])
    try:
        render_streamlines(design, cfg.out)
    except OSError as exc:
        raise ConfigError(f"cannot write {cfg.out}: {exc.strerror}") from exc
    _log(f"wrote {cfg.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(fault=args.fault, report=print, only=args.only)
    failed = [r for r in results if r.status == "FAIL"]
    counts = {s: sum(r.status == s for r in results) for s in ("PASS", "FAIL", "SKIP")}
    print(f"{counts['PASS']} passed, {counts['FAIL']} failed, {counts['SKIP']} skipped")
    return EXIT_NUMERICAL if failed else EXIT_OK


COMMANDS = {"bound": cmd_bound, "solve": cmd_solve, "sweep": cmd_sweep, "render": cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            return cmd_selftest(args)
        cfg = _config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ConfigError) as exc:
        _log(f"disccool: error: {exc}")
        return EXIT_USAGE
    except (NumericalError, ResolutionError) as exc:
        _log(f"disccool: numerical failure: {exc}")
        return EXIT_NUMERICAL
    except ValueError as exc:
        _log(f"disccool: error: {exc}")
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())
