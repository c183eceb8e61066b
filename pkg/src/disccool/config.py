"""Run configuration: ``key = value`` files with ``#`` comments, merged over defaults.

Precedence is explicit overrides > file > defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

__all__ = ["RunConfig", "ConfigError", "parse_pe_list", "parse_config_text", "load_config", "FLOWS"]

FLOWS = ("roll", "branching", "energy-roll")
DEFAULT_PE = tuple(10.0**e for e in (2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0))


class ConfigError(ValueError):
    """Invalid configuration key or value."""


def _number(text: str) -> float:
    text = text.strip()
    base, caret, exp = text.partition("^")
    try:
        return float(base) ** float(exp) if caret else float(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_pe_list(text: str) -> tuple[float, ...]:
    """Comma or space separated numbers; ``a^b`` is accepted for powers."""
    items = [t for t in text.replace(",", " ").split() if t]
    if not items:
        raise ConfigError("empty pe list")
    values = tuple(_number(t) for t in items)
    if any(not (math.isfinite(v) and v > 0) for v in values):
        raise ConfigError(f"pe values must be positive and finite: {text!r}")
    return values


def _int(text: str) -> int:
    v = _number(text)
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def _modes(text: str):
    return None if text.strip().lower() in ("auto", "") else _int(text)


def _bool_text(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    source: str = "constant"
    flow: str = "branching"
    constraint: str = "enstrophy"
    pe: tuple[float, ...] = DEFAULT_PE
    nr: int = 1024
    modes: int | None = None
    stretch: float = 2.0
    exact_cap: float = 1e3
    roll_n: int = 8
    taper: float = 0.0
    workers: int = 1
    lower: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.flow not in FLOWS:
            raise ConfigError(f"unknown flow {self.flow!r}; expected one of {', '.join(FLOWS)}")
        if self.constraint not in ("enstrophy", "energy"):
            raise ConfigError(f"unknown constraint {self.constraint!r}; expected enstrophy or energy")
        if self.nr < 16:
            raise ConfigError("nr must be at least 16")
        if self.modes is not None and self.modes < 4:
            raise ConfigError("modes must be at least 4")
        if self.stretch < 1:
            raise ConfigError("stretch must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.roll_n < 1:
            raise ConfigError("roll_n must be a positive integer")

    def merged(self, **overrides) -> "RunConfig":
        """Copy with every non-``None`` override applied."""
        unknown = sorted(set(overrides) - _KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "pe":
                v = ",".join(repr(p) for p in v)
            elif v is None:
                v = "auto" if f.name == "modes" else ""
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "source": str.strip,
    "flow": str.strip,
    "constraint": str.strip,
    "pe": parse_pe_list,
    "nr": _int,
    "modes": _modes,
    "stretch": _number,
    "exact_cap": _number,
    "roll_n": _int,
    "taper": _number,
    "workers": _int,
    "lower": _bool_text,
    "out": lambda t: t.strip() or None,
}
_KEYS = set(_PARSERS)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into typed values; dashes in keys become underscores."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        raw[key.strip().replace("-", "_")] = value
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return {k: _PARSERS[k](v) for k, v in raw.items()}


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Defaults, then the file at ``path``, then non-``None`` overrides."""
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
        cfg = cfg.merged(**parse_config_text(text))
    return cfg.merged(**overrides)
