"""Pulse-program events, the three programs, and a line-based text format.

Text format, one event per line, whitespace separated::

    kind  target  angle_deg  phase_deg  duration_s  [key=value ...]

Unused columns hold ``-``.  Kinds: ``pulse`` (target = channel H|P),
``delay``, ``jr90`` (target = proton; duration = eps90), ``zrot``
(target = spin, angle = rotation), ``gradient`` (target = register,
``area=``), ``crush`` and ``zfilter`` (``delays=`` comma list, seconds).
Lines starting with ``@`` carry metadata (``@name``, ``@tau_ab`` ...);
``#`` starts a comment.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from ..cloner import THETA1, THETA2
from .system import LABELS, SpinSystem

EPS90_SCALE = 0.9
ZFILTER_STEPS = 8


class SequenceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class HardPulse:
    channel: str
    flip: float
    phase: float = 0.0

    def __post_init__(self):
        if self.channel not in ("H", "P"):
            raise ValueError(f"unknown channel {self.channel!r}")
        if not np.isfinite(self.flip) or not np.isfinite(self.phase):
            raise ValueError("pulse angles must be finite")


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError(f"delay must be non-negative, got {self.duration}")


@dataclass(frozen=True)
class JumpReturn90:
    target: str
    phase: float = 0.0
    eps90: float | None = None

    def __post_init__(self):
        if self.target not in ("A", "B"):
            raise ValueError(f"jump-and-return target must be A or B, got {self.target!r}")
        if self.eps90 is not None and not self.eps90 >= 0:
            raise ValueError("eps90 must be non-negative")


@dataclass(frozen=True)
class ZRotation:
    """Software frame update exp(-i angle I_z) on one spin (no RF, no time)."""

    spin: str
    angle: float

    def __post_init__(self):
        if self.spin not in LABELS:
            raise ValueError(f"unknown spin {self.spin!r}")


@dataclass(frozen=True)
class Gradient:
    area: float
    register: str = "z"


@dataclass(frozen=True)
class Crush:
    pass


@dataclass(frozen=True)
class ZFilter:
    delays: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(float(t) for t in self.delays))
        if not self.delays:
            raise ValueError("z-filter needs at least one delay")
        if any(t < 0 for t in self.delays):
            raise ValueError("z-filter delays must be non-negative")


PulseEvent = Union[HardPulse, Delay, JumpReturn90, ZRotation, Gradient, Crush, ZFilter]


@dataclass(frozen=True)
class Sequence:
    name: str
    events: tuple = ()
    tau_ab: float | None = None
    tau_ap: float | None = None
    tau_bp: float | None = None
    eps90: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __add__(self, other: "Sequence") -> "Sequence":
        return replace(self, name=f"{self.name}+{other.name}", events=self.events + other.events)

    def phase_shifted(self, delta: float) -> "Sequence":
        """All RF phases advanced by ``delta`` (one CYCLOPS step)."""
        out = []
        for ev in self.events:
            if isinstance(ev, (HardPulse, JumpReturn90)):
                ev = replace(ev, phase=ev.phase + delta)
            out.append(ev)
        return replace(self, events=tuple(out))

    def duration(self) -> float:
        """Wall time of the program, counting one z-filter delay (the longest)."""
        total = 0.0
        for ev in self.events:
            if isinstance(ev, Delay):
                total += ev.duration
            elif isinstance(ev, JumpReturn90):
                total += ev.eps90 or 0.0
            elif isinstance(ev, ZFilter):
                total += max(ev.delays)
        return total


# -- delays ------------------------------------------------------------------


def _tau(j: float, n: int, what: str) -> float:
    if j == 0:
        raise ValueError(f"{what}: coupling is zero, delay 1/({n}J) is undefined")
    return 1.0 / (n * abs(j))


def nominal_eps90(sys: SpinSystem) -> float:
    dnu = sys.delta_nu
    if dnu == 0:
        raise ValueError("jump-and-return: proton offsets coincide, eps90 undefined")
    return 1.0 / (4.0 * dnu)


def delays(sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> dict[str, float]:
    if not 0 < eps90_scale <= 1:
        raise ValueError(f"eps90 scale must lie in (0, 1], got {eps90_scale}")
    return {
        "tau_ab": _tau(sys.j("A", "B"), 4, "tau_AB"),
        "tau_ap": _tau(sys.j("A", "P"), 8, "tau_AP"),
        "tau_bp": _tau(sys.j("B", "P"), 8, "tau_BP"),
        "eps90": eps90_scale * nominal_eps90(sys),
    }


def default_zfilter_delays(sys: SpinSystem, steps: int = ZFILTER_STEPS) -> tuple[float, ...]:
    """``steps`` delays spread uniformly over one beat of the proton zero-quantum frequency."""
    beat = 1.0 / (2 * sys.delta_nu)
    return tuple(k * beat / steps for k in range(steps))


# -- building blocks -----------------------------------------------------------


def hadamard(channel: str) -> list:
    """H = X . Ry(pi/2) up to phase: 90_y then 180_x."""
    return [HardPulse(channel, np.pi / 2, np.pi / 2), HardPulse(channel, np.pi, 0.0)]


def selective_180(target: str, eps90: float) -> list:
    return [JumpReturn90(target, 0.0, eps90), JumpReturn90(target, 0.0, eps90)]


def _cz_corrections(pairs: list[tuple[str, str, float]]) -> list:
    """Frame updates turning exp(-i pi sgn(J) I_z I_z) products into controlled-pi gates."""
    angle = {l: 0.0 for l in LABELS}
    for a, b, j in pairs:
        for l in (a, b):
            angle[l] -= np.sign(j) * np.pi / 2
    return [ZRotation(l, angle[l]) for l in LABELS if angle[l] != 0.0]


def echo_events(sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> list:
    """Coupling element of the P-A and P-B controlled-pi gates.

    Toggling-frame design: P-A coupling evolves for 4 tau_AP, P-B for
    4 tau_BP, while the A-B coupling and every chemical shift refocus.
    """
    d = delays(sys, eps90_scale)
    half = [
        Delay(d["tau_ap"]),
        *selective_180("B", d["eps90"]),
        Delay(d["tau_ap"]),
        HardPulse("H", np.pi, 0.0),
        Delay(d["tau_bp"]),
        *selective_180("A", d["eps90"]),
        Delay(d["tau_bp"]),
    ]
    flip_all = [HardPulse("H", np.pi, 0.0), HardPulse("P", np.pi, 0.0)]
    return half + flip_all + half + flip_all


def echo_sequence(sys: SpinSystem, eps90_scale: float = EPS90_SCALE, cz: bool = True) -> Sequence:
    """Echo core; with ``cz`` the frame updates that make it exactly CZ_PA CZ_PB are appended."""
    ev = echo_events(sys, eps90_scale)
    if cz:
        ev += _cz_corrections([("P", "A", sys.j("P", "A")), ("P", "B", sys.j("P", "B"))])
    return _with_delays("echo", ev, sys, eps90_scale)


def cz_ab_events(sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> list:
    d = delays(sys, eps90_scale)
    ev = [Delay(d["tau_ab"]), HardPulse("H", np.pi, 0.0), Delay(d["tau_ab"]), HardPulse("H", np.pi, 0.0)]
    ev += _cz_corrections([("A", "B", sys.j("A", "B"))])
    # P is untouched, so its own offset precession is taken out in software
    p_shift = sum(nu for l, nu in zip(LABELS, sys.offsets) if sys.channel(l) == "P")
    if p_shift:
        ev.append(ZRotation("P", -2 * np.pi * p_shift * 2 * d["tau_ab"]))
    return ev


def cnot_p_to_ab(sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> list:
    """CNOT(P->A) CNOT(P->B) = H_A H_B . CZ_PA CZ_PB . H_A H_B."""
    return hadamard("H") + list(echo_sequence(sys, eps90_scale).events) + hadamard("H")


def cnot_ab_to_p(sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> list:
    """CNOT(A->P) CNOT(B->P) = H_P . CZ_PA CZ_PB . H_P."""
    return hadamard("P") + list(echo_sequence(sys, eps90_scale).events) + hadamard("P")


def prep_events(sys: SpinSystem, eps90_scale: float = EPS90_SCALE, theta1: float = THETA1, theta2: float = THETA2) -> list:
    """Ancilla preparation: hard Ry(theta1) on both protons, CZ_AB, hard Ry(theta2)."""
    return [HardPulse("H", theta1, np.pi / 2), *cz_ab_events(sys, eps90_scale), HardPulse("H", theta2, np.pi / 2)]


def input_pulse(theta: float, phi: float) -> HardPulse:
    """Single P pulse taking P_z to P_{theta phi}."""
    return HardPulse("P", theta, phi + np.pi / 2)


def _with_delays(name: str, events: Iterable, sys: SpinSystem, eps90_scale: float) -> Sequence:
    d = delays(sys, eps90_scale)
    return Sequence(name, tuple(events), d["tau_ab"], d["tau_ap"], d["tau_bp"], d["eps90"])


def cloning_sequence(sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> Sequence:
    ev = prep_events(sys, eps90_scale) + cnot_p_to_ab(sys, eps90_scale) + cnot_ab_to_p(sys, eps90_scale)
    return _with_delays("cloning", ev, sys, eps90_scale)


def gradient_ratio(sys: SpinSystem) -> float:
    """Second/first gradient area, (2 - r)/(2 + r)."""
    r = sys.ratio
    return (2 - r) / (2 + r)


def gradient_filter_events(sys: SpinSystem, area: float = 1.0, register: str = "z") -> list:
    """G1, 180 on the protons, G2 = G1 (2 - r)/(2 + r).

    Keeps the pathway with weighted order (2 - r) during G1, which the proton
    flip turns into the three-quantum term -(2 + r) during G2.
    """
    return [Gradient(area, register), HardPulse("H", np.pi, 0.0), Gradient(area * gradient_ratio(sys), register)]


def purification_sequence(
    sys: SpinSystem,
    eps90_scale: float = EPS90_SCALE,
    precrush: bool = True,
    zfilter_delays: tuple[float, ...] | None = None,
    area: float = 1.0,
) -> Sequence:
    """Thermal deviation -> r P_z A0 B0."""
    ev: list = []
    if precrush:
        ev += [HardPulse("H", np.pi / 2, 0.0), Crush()]
    ev += hadamard("P")
    ev += cnot_p_to_ab(sys, eps90_scale)
    ev += gradient_filter_events(sys, area)
    ev += cnot_p_to_ab(sys, eps90_scale)
    ev += hadamard("P")
    ev.append(ZFilter(zfilter_delays or default_zfilter_delays(sys)))
    return _with_delays("purification", ev, sys, eps90_scale)


def program(name: str, sys: SpinSystem, eps90_scale: float = EPS90_SCALE) -> Sequence:
    builders = {
        "purification": purification_sequence,
        "cloning": cloning_sequence,
        "echo": echo_sequence,
    }
    try:
        return builders[name](sys, eps90_scale)
    except KeyError:
        raise ValueError(f"unknown program {name!r}; choose from {sorted(builders)}") from None


# -- text format ---------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def format_sequence(seq: Sequence) -> str:
    lines = [f"@name {seq.name}"]
    for key in ("tau_ab", "tau_ap", "tau_bp", "eps90"):
        value = getattr(seq, key)
        if value is not None:
            lines.append(f"@{key} {_num(value)}")
    lines.append("# kind target angle_deg phase_deg duration_s [key=value]")
    for ev in seq.events:
        if isinstance(ev, HardPulse):
            cols = ["pulse", ev.channel, _num(np.degrees(ev.flip)), _num(np.degrees(ev.phase)), "-"]
        elif isinstance(ev, Delay):
            cols = ["delay", "-", "-", "-", _num(ev.duration)]
        elif isinstance(ev, JumpReturn90):
            eps = "-" if ev.eps90 is None else _num(ev.eps90)
            cols = ["jr90", ev.target, "90", _num(np.degrees(ev.phase)), eps]
        elif isinstance(ev, ZRotation):
            cols = ["zrot", ev.spin, _num(np.degrees(ev.angle)), "-", "-"]
        elif isinstance(ev, Gradient):
            cols = ["gradient", ev.register, "-", "-", "-", f"area={_num(ev.area)}"]
        elif isinstance(ev, Crush):
            cols = ["crush", "-", "-", "-", "-"]
        elif isinstance(ev, ZFilter):
            cols = ["zfilter", "-", "-", "-", "-", "delays=" + ",".join(_num(t) for t in ev.delays)]
        else:
            raise SequenceFormatError(f"cannot format {ev!r}")
        lines.append(" ".join(cols))
    return "\n".join(lines) + "\n"


def parse_sequence(text: str, source: str = "<sequence>") -> Sequence:
    meta: dict[str, str] = {}
    events = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{n}"
        if line.startswith("@"):
            key, _, value = line[1:].partition(" ")
            meta[key.strip()] = value.strip()
            continue
        tokens = line.split()
        if len(tokens) < 5:
            raise SequenceFormatError(f"{where}: expected 5 columns, got {len(tokens)}")
        kind, target, angle, phase, duration = tokens[:5]
        extra = {}
        for tok in tokens[5:]:
            if "=" not in tok:
                raise SequenceFormatError(f"{where}: expected key=value, got {tok!r}")
            k, v = tok.split("=", 1)
            extra[k] = v

        def num(text_value: str, what: str) -> float:
            try:
                return float(text_value)
            except ValueError:
                raise SequenceFormatError(f"{where}: {what} is not a number: {text_value!r}") from None

        try:
            if kind == "pulse":
                events.append(HardPulse(target, np.radians(num(angle, "angle")), np.radians(num(phase, "phase"))))
            elif kind == "delay":
                events.append(Delay(num(duration, "duration")))
            elif kind == "jr90":
                eps = None if duration == "-" else num(duration, "duration")
                ph = 0.0 if phase == "-" else np.radians(num(phase, "phase"))
                events.append(JumpReturn90(target, ph, eps))
            elif kind == "zrot":
                events.append(ZRotation(target, np.radians(num(angle, "angle"))))
            elif kind == "gradient":
                if "area" not in extra:
                    raise SequenceFormatError(f"{where}: gradient needs area=")
                events.append(Gradient(num(extra["area"], "area"), "z" if target == "-" else target))
            elif kind == "crush":
                events.append(Crush())
            elif kind == "zfilter":
                if "delays" not in extra:
                    raise SequenceFormatError(f"{where}: zfilter needs delays=")
                events.append(ZFilter(tuple(num(t, "delay") for t in extra["delays"].split(","))))
            else:
                raise SequenceFormatError(f"{where}: unknown event kind {kind!r}")
        except SequenceFormatError:
            raise
        except ValueError as exc:
            raise SequenceFormatError(f"{where}: {exc}") from None

    def opt(key):
        return float(meta[key]) if key in meta else None

    return Sequence(meta.get("name", Path(source).stem), tuple(events), opt("tau_ab"), opt("tau_ap"), opt("tau_bp"), opt("eps90"))


def load_sequence(path: str | Path) -> Sequence:
    path = Path(path)
    return parse_sequence(path.read_text(), str(path))
