"""Three-spin system parameters and their INI config format."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

LABELS = ("P", "A", "B")
CHANNELS = ("H", "P")

# Transmitter frequencies (MHz) and measured parameters for
# E-(2-chloroethenyl)phosphonic acid, 0.08 M in D2O at 20 C.
H_FREQUENCY_MHZ = 600.1517482
P_FREQUENCY_MHZ = 242.9458642


class SystemConfigError(ValueError):
    """Malformed or nonphysical spin-system configuration."""


@dataclass(frozen=True)
class SpinSystem:
    """Frequencies in Hz, relaxation times in seconds, couplings in Hz.

    ``couplings`` holds (J_PA, J_PB, J_AB).  Spins are always (P, A, B) in
    that register order; ``channels`` says which RF channel drives each.
    """

    offsets: tuple[float, float, float] = (0.0, 104.0, -104.0)
    couplings: tuple[float, float, float] = (9.1, 11.3, 14.3)
    t1: tuple[float, float, float] = (3.8, 17.6, 16.9)
    t2: tuple[float, float, float] = (0.72, 1.82, 1.82)
    channels: tuple[str, str, str] = ("P", "H", "H")
    h_frequency_mhz: float = H_FREQUENCY_MHZ
    p_frequency_mhz: float = P_FREQUENCY_MHZ

    def __post_init__(self):
        for name in ("offsets", "couplings", "t1", "t2", "channels"):
            value = tuple(getattr(self, name))
            if len(value) != 3:
                raise SystemConfigError(f"{name} needs three entries, got {len(value)}")
            object.__setattr__(self, name, value)
        for name in ("t1", "t2"):
            for label, t in zip(LABELS, getattr(self, name)):
                if not t > 0:
                    raise SystemConfigError(f"{name.upper()} of spin {label} must be positive, got {t}")
        for ch in self.channels:
            if ch not in CHANNELS:
                raise SystemConfigError(f"unknown channel {ch!r}")
        if not (self.h_frequency_mhz > 0 and self.p_frequency_mhz > 0):
            raise SystemConfigError("transmitter frequencies must be positive")

    labels = LABELS

    @property
    def ratio(self) -> float:
        """Frequency ratio r of the P channel to the H channel (gamma_P / gamma_H)."""
        return self.p_frequency_mhz / self.h_frequency_mhz

    def weight(self, label: str) -> float:
        """Gradient/thermal weight: 1 for protons, r for the P channel."""
        return 1.0 if self.channel(label) == "H" else self.ratio

    def channel(self, label: str) -> str:
        return self.channels[self.index(label)]

    def spins_on(self, channel: str) -> tuple[str, ...]:
        if channel not in CHANNELS:
            raise SystemConfigError(f"unknown channel {channel!r}")
        return tuple(l for l, c in zip(LABELS, self.channels) if c == channel)

    @staticmethod
    def index(label: str) -> int:
        try:
            return LABELS.index(label)
        except ValueError:
            raise SystemConfigError(f"unknown spin {label!r}") from None

    def j(self, a: str, b: str) -> float:
        pair = frozenset((a, b))
        for (x, y), value in zip((("P", "A"), ("P", "B"), ("A", "B")), self.couplings):
            if pair == frozenset((x, y)):
                return value
        raise SystemConfigError(f"no coupling between {a!r} and {b!r}")

    def coupling_matrix(self) -> np.ndarray:
        m = np.zeros((3, 3))
        for (x, y), value in zip(((0, 1), (0, 2), (1, 2)), self.couplings):
            m[x, y] = m[y, x] = value
        return m

    @property
    def delta_nu(self) -> float:
        """Half the separation of the two proton offsets, Hz."""
        h = [self.offsets[self.index(l)] for l in self.spins_on("H")]
        if len(h) != 2:
            raise SystemConfigError("jump-and-return needs exactly two proton spins")
        return abs(h[0] - h[1]) / 2

    def scaled_offsets(self, factor: float) -> "SpinSystem":
        """Same system with every offset multiplied by ``factor`` (J fixed)."""
        return replace(self, offsets=tuple(factor * v for v in self.offsets))

    def with_couplings(self, **kw: float) -> "SpinSystem":
        names = ("PA", "PB", "AB")
        values = list(self.couplings)
        for k, v in kw.items():
            values[names.index(k)] = float(v)
        return replace(self, couplings=tuple(values))


def default_system() -> SpinSystem:
    return SpinSystem()


_COUPLING_KEYS = ("PA", "PB", "AB")


def _line_of(text: str, section: str | None, key: str | None) -> int | None:
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key.lower():
                return n
    return None


def _where(source: str, text: str, section: str, key: str | None = None) -> str:
    line = _line_of(text, section, key)
    loc = f"{source}:{line}" if line else source
    field = f"[{section}] {key}" if key else f"[{section}]"
    return f"{loc}: {field}"


def parse_system(text: str, source: str = "<config>") -> SpinSystem:
    """Parse the INI schema written by :func:`format_system`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise SystemConfigError(f"{source}: {exc}") from None

    def number(section: str, key: str) -> float:
        if not cp.has_section(section):
            raise SystemConfigError(f"{source}: missing section [{section}]")
        if not cp.has_option(section, key):
            raise SystemConfigError(f"{_where(source, text, section)}: missing key {key!r}")
        raw = cp.get(section, key)
        try:
            return float(raw)
        except ValueError:
            raise SystemConfigError(f"{_where(source, text, section, key)}: not a number: {raw!r}") from None

    h = number("spectrometer", "h_frequency_mhz")
    p = number("spectrometer", "p_frequency_mhz")
    offsets, t1, t2, channels = [], [], [], []
    for label in LABELS:
        offsets.append(number(label, "offset_hz"))
        for key, out in (("t1_s", t1), ("t2_s", t2)):
            value = number(label, key)
            if not value > 0:
                raise SystemConfigError(f"{_where(source, text, label, key)}: must be positive, got {value}")
            out.append(value)
        ch = cp.get(label, "channel", fallback="P" if label == "P" else "H").strip()
        if ch not in CHANNELS:
            raise SystemConfigError(f"{_where(source, text, label, 'channel')}: unknown channel {ch!r}")
        channels.append(ch)
    couplings = tuple(number("couplings", key) for key in _COUPLING_KEYS)
    return SpinSystem(tuple(offsets), couplings, tuple(t1), tuple(t2), tuple(channels), h, p)


def format_system(sys: SpinSystem, header: str | None = None) -> str:
    out = io.StringIO()
    if header:
        for line in header.splitlines():
            out.write(f"# {line}\n")
    out.write("[spectrometer]\n")
    out.write(f"h_frequency_mhz = {sys.h_frequency_mhz!r}\n")
    out.write(f"p_frequency_mhz = {sys.p_frequency_mhz!r}\n")
    for i, label in enumerate(LABELS):
        out.write(f"\n[{label}]\n")
        out.write(f"channel = {sys.channels[i]}\n")
        out.write(f"offset_hz = {sys.offsets[i]!r}\n")
        out.write(f"t1_s = {sys.t1[i]!r}\n")
        out.write(f"t2_s = {sys.t2[i]!r}\n")
    out.write("\n[couplings]\n")
    for key, value in zip(_COUPLING_KEYS, sys.couplings):
        out.write(f"{key} = {value!r}\n")
    return out.getvalue()


def load_system(path: str | Path) -> SpinSystem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SystemConfigError(f"{path}: {exc.strerror}") from None
    return parse_system(text, str(path))


def default_system_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "default.ini"
