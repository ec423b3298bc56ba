"""Run configuration: spin-system INI plus an optional ``[run]`` section."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .nmrsim import engine
from .nmrsim.sequences import EPS90_SCALE
from .nmrsim.system import SpinSystem, SystemConfigError, format_system, parse_system, default_system_path, _where

MODES = ("ideal", "pulse")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "ideal"
    relaxation: bool = False
    ideal_selective: bool = False
    eps90_scale: float = EPS90_SCALE
    b1_error: float = 0.0
    workers: int = 1
    out: str = "out"
    format: str = "csv"
    system_path: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise SystemConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.format not in FORMATS:
            raise SystemConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not 0 < self.eps90_scale <= 1:
            raise SystemConfigError(f"eps90 scale must lie in (0, 1], got {self.eps90_scale}")
        if self.workers < 1:
            raise SystemConfigError(f"worker count must be at least 1, got {self.workers}")

    def run_options(self) -> engine.RunOptions:
        return engine.RunOptions(
            relaxation=self.relaxation,
            ideal_selective=self.ideal_selective,
            b1_error=self.b1_error,
        )

    def describe(self) -> dict:
        return asdict(self)


_BOOL_KEYS = ("relaxation", "ideal_selective")
_FLOAT_KEYS = ("eps90_scale", "b1_error")
_INT_KEYS = ("workers",)
_STR_KEYS = ("mode", "out", "format")


def parse_run(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text, source=source)
    if not cp.has_section("run"):
        return RunConfig()
    kw = {}
    sec = cp["run"]
    for key in sec:
        where = _where(source, text, "run", key)
        try:
            if key in _BOOL_KEYS:
                kw[key] = sec.getboolean(key)
            elif key in _FLOAT_KEYS:
                kw[key] = sec.getfloat(key)
            elif key in _INT_KEYS:
                kw[key] = sec.getint(key)
            elif key in _STR_KEYS:
                kw[key] = sec.get(key).strip()
            else:
                raise SystemConfigError(f"{where}: unknown run option")
        except ValueError as exc:
            if isinstance(exc, SystemConfigError):
                raise
            raise SystemConfigError(f"{where}: {exc}") from None
    try:
        return RunConfig(**kw)
    except SystemConfigError as exc:
        raise SystemConfigError(f"{source}: [run] {exc}") from None


def load_config(path: str | Path | None = None) -> tuple[SpinSystem, RunConfig]:
    """System and run defaults from ``path`` (the bundled system when None)."""
    path = Path(path) if path is not None else default_system_path()
    try:
        text = path.read_text()
    except OSError as exc:
        raise SystemConfigError(f"{path}: {exc.strerror}") from None
    sys = parse_system(text, str(path))
    run = replace(parse_run(text, str(path)), system_path=str(path))
    return sys, run


def format_config(sys: SpinSystem, run: RunConfig, header: str | None = None) -> str:
    out = [format_system(sys, header), "\n[run]\n"]
    for key in ("mode", "relaxation", "ideal_selective", "eps90_scale", "b1_error", "workers", "out", "format"):
        value = getattr(run, key)
        if isinstance(value, bool):
            value = "true" if value else "false"
        out.append(f"{key} = {value}\n")
    return "".join(out)
