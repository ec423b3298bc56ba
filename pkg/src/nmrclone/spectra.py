"""Transition-resolved spectra, multiplet integrals and CYCLOPS averaging.

Amplitude convention: the line for spin k between basis states a (k up) and
b (k down) carries 2 <b|rho|a>, so a multiplet integral is 2 tr(rho I_k^+),
which is x + iy of the spin's reduced (deviation) Bloch vector.  A state
A_x (x) 1/4 on the partners therefore integrates to 1, split over four
equal positive-real lines.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .nmrsim import engine
from .nmrsim.system import LABELS, SpinSystem
from .qcore import DensityState

CYCLOPS_STEPS = 4


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    """One resolved transition.  ``spin`` is None for instrumental artefacts."""

    frequency: float
    amplitude: complex
    linewidth: float
    spin: str | None = None
    partners: tuple[int, ...] = ()


@dataclass(frozen=True)
class Spectrum:
    channel: str
    lines: tuple[Line, ...]
    receiver_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))

    def for_spin(self, spin: str) -> tuple[Line, ...]:
        return tuple(l for l in self.lines if l.spin == spin)

    def rotated(self, angle: float) -> "Spectrum":
        """Every amplitude multiplied by exp(i angle)."""
        w = np.exp(1j * angle)
        return replace(self, lines=tuple(replace(l, amplitude=complex(w * l.amplitude)) for l in self.lines))

    def evaluate(self, freqs: np.ndarray) -> np.ndarray:
        """Complex Lorentzian sum; the real part of each line integrates to Re(amplitude)."""
        freqs = np.asarray(freqs, dtype=float)
        out = np.zeros(freqs.shape, dtype=complex)
        for l in self.lines:
            gamma = l.linewidth / 2
            out += l.amplitude / np.pi / (gamma + 1j * (freqs - l.frequency))
        return out

    def fid(self, n_points: int, spectral_width: float) -> np.ndarray:
        """Noiseless free induction decay sampled at dwell 1 / spectral_width."""
        t = np.arange(n_points) / spectral_width
        out = np.zeros(n_points, dtype=complex)
        for l in self.lines:
            out += l.amplitude * np.exp((2j * np.pi * l.frequency - np.pi * l.linewidth) * t)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency_hz", "real", "imag", "linewidth_hz", "spin", "partners"])
        for l in self.lines:
            w.writerow([
                fmt(l.frequency),
                fmt(l.amplitude.real),
                fmt(l.amplitude.imag),
                fmt(l.linewidth),
                l.spin or "",
                "".join(map(str, l.partners)),
            ])
        return buf.getvalue()

    def to_json(self, metadata: dict | None = None) -> str:
        payload = {
            "channel": self.channel,
            "receiver_phase": self.receiver_phase,
            "lines": [
                {
                    "frequency_hz": l.frequency,
                    "real": l.amplitude.real,
                    "imag": l.amplitude.imag,
                    "linewidth_hz": l.linewidth,
                    "spin": l.spin,
                    "partners": list(l.partners),
                }
                for l in self.lines
            ],
        }
        if metadata:
            payload["metadata"] = metadata
        return json.dumps(payload, indent=2, sort_keys=True)


def fmt(x: float, decimals: int = 12) -> str:
    """Fixed-decimal text with negative zero folded to zero."""
    s = f"{x:.{decimals}f}"
    if float(s) == 0.0:
        s = f"{0.0:.{decimals}f}"
    return s


def fft_spectrum(fid: np.ndarray, spectral_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Discrete transform of an FID, scaled to match :meth:`Spectrum.evaluate`.

    Returns (frequencies, values) sorted by frequency.  The first point is
    halved so the baseline is not offset.
    """
    fid = np.asarray(fid, dtype=complex).copy()
    fid[0] *= 0.5
    dt = 1.0 / spectral_width
    values = np.fft.fftshift(np.fft.fft(fid)) * dt * 2
    freqs = np.fft.fftshift(np.fft.fftfreq(fid.size, dt))
    return freqs, values


def _rho_of(s: DensityState | np.ndarray) -> np.ndarray:
    rho = s.rho if isinstance(s, DensityState) else np.asarray(s, dtype=complex)
    if rho.shape != (8, 8):
        raise SpectrumError(f"acquisition needs a three-spin operator, got shape {rho.shape}")
    return rho


def acquire(
    s: DensityState | np.ndarray,
    sys: SpinSystem,
    channel: str = "H",
    mode: str = "secular",
    min_amplitude: float = 0.0,
) -> Spectrum:
    """Lines of the ``channel`` spins, from eigenstates of the free Hamiltonian.

    In ``full`` mode the proton eigenstates mix weakly; each transition is
    assigned to the spin whose raising operator dominates it.
    """
    if channel not in ("H", "P"):
        raise SpectrumError(f"unknown channel {channel!r}")
    rho = _rho_of(s)
    h = engine.hamiltonian(sys, mode) / engine.TWO_PI
    if mode == "secular":
        energies = np.real(np.diag(h))
        vecs = np.eye(8, dtype=complex)
    else:
        energies, vecs = np.linalg.eigh(h)
    rho_e = vecs.conj().T @ rho @ vecs
    spins = sys.spins_on(channel)
    raising = {k: vecs.conj().T @ engine.op(k, "+") @ vecs for k in spins}
    lines = []
    for a in range(8):
        for b in range(8):
            weights = {k: raising[k][a, b] for k in spins}
            k = max(spins, key=lambda q: abs(weights[q]))
            w = weights[k]
            if abs(w) < 0.5:
                continue
            amp = complex(2 * rho_e[b, a] * sum(weights.values()))
            if abs(amp) < min_amplitude:
                continue
            # dominant product state of the upper level names the partners
            top = int(np.argmax(np.abs(vecs[:, a])))
            kq = LABELS.index(k)
            partners = tuple((top >> (2 - q)) & 1 for q in range(3) if q != kq)
            lw = 1.0 / (np.pi * sys.t2[kq])
            lines.append(Line(float(energies[a] - energies[b]), amp, lw, k, partners))
    lines.sort(key=lambda l: (-l.frequency, l.spin or ""))
    return Spectrum(channel, tuple(lines))


def integrate_multiplet(spec: Spectrum, spin: str) -> complex:
    """Software trace-out: the complex sum of one spin's lines."""
    if spin not in LABELS:
        raise SpectrumError(f"unknown spin {spin!r}")
    if not any(l.spin == spin for l in spec.lines):
        raise SpectrumError(f"spin {spin!r} has no lines on channel {spec.channel}")
    return complex(sum(l.amplitude for l in spec.for_spin(spin)))


def multiplet_integrals(s: DensityState | np.ndarray, sys: SpinSystem, scale: float = 1.0) -> tuple[complex, complex]:
    """(S_A, S_B) from a proton acquisition, divided by ``scale``."""
    spec = acquire(s, sys, "H")
    return integrate_multiplet(spec, "A") / scale, integrate_multiplet(spec, "B") / scale


# -- receiver model and phase cycling --------------------------------------------


def detect(spec: Spectrum, dc_offset: complex = 0.0, imbalance: float = 0.0) -> Spectrum:
    """Apply a quadrature receiver with a constant offset and a gain imbalance.

    I and Q gains of 1 -/+ imbalance/2 give a detected signal s - (e/2) s*,
    so each line gains an image at -f with amplitude -(e/2) a*.
    """
    lines = list(spec.lines)
    if imbalance:
        lines += [Line(-l.frequency, complex(-imbalance / 2 * np.conj(l.amplitude)), l.linewidth) for l in spec.lines]
    if dc_offset:
        width = min((l.linewidth for l in spec.lines), default=1.0)
        lines.append(Line(0.0, complex(dc_offset), width))
    return replace(spec, lines=tuple(lines))


def cyclops_phases() -> tuple[float, ...]:
    return tuple(k * np.pi / 2 for k in range(CYCLOPS_STEPS))


def _signature(spec: Spectrum) -> tuple:
    return (spec.channel, len(spec.lines), tuple((round(l.frequency, 9), l.spin, l.partners) for l in spec.lines))


def cyclops_average(runs: Sequence[Spectrum]) -> Spectrum:
    """Receiver-corrected mean of four runs stepped by 90 degrees.

    Run k must carry ``receiver_phase`` = k pi/2 and the same line layout
    (frequencies, assignments) as the others.
    """
    runs = list(runs)
    if len(runs) != CYCLOPS_STEPS:
        raise SpectrumError(f"CYCLOPS needs {CYCLOPS_STEPS} runs, got {len(runs)}")
    for k, (run, phase) in enumerate(zip(runs, cyclops_phases())):
        if not np.isclose(np.angle(np.exp(1j * (run.receiver_phase - phase))), 0.0, atol=1e-12):
            raise SpectrumError(f"run {k} has receiver phase {run.receiver_phase}, expected {phase}")
    sig = _signature(runs[0])
    if any(_signature(r) != sig for r in runs[1:]):
        raise SpectrumError("CYCLOPS runs differ in channel or line layout")
    corrected = [r.rotated(-r.receiver_phase) for r in runs]
    lines = []
    for group in zip(*(c.lines for c in corrected)):
        amp = sum(l.amplitude for l in group) / CYCLOPS_STEPS
        lines.append(replace(group[0], amplitude=complex(amp)))
    return Spectrum(runs[0].channel, tuple(lines), 0.0)


def merge_lines(spec: Spectrum, tol: float = 1e-9) -> Spectrum:
    """Sum lines that share frequency and assignment (used after image folding)."""
    merged: dict[tuple, Line] = {}
    for l in spec.lines:
        key = (round(l.frequency / tol) if tol else l.frequency, l.spin, l.partners)
        if key in merged:
            m = merged[key]
            merged[key] = replace(m, amplitude=m.amplitude + l.amplitude)
        else:
            merged[key] = l
    return replace(spec, lines=tuple(merged.values()))


def image_power(spec: Spectrum) -> float:
    """Total |amplitude| of unassigned (artefact) lines."""
    return float(sum(abs(l.amplitude) for l in spec.lines if l.spin is None))


def line_table(spectra: Iterable[tuple[str, Spectrum]]) -> str:
    """gnuplot-friendly block per spectrum: frequency real imag."""
    out = io.StringIO()
    for name, spec in spectra:
        out.write(f"# {name} channel={spec.channel}\n")
        for l in spec.lines:
            out.write(f"{fmt(l.frequency)} {fmt(l.amplitude.real)} {fmt(l.amplitude.imag)}\n")
        out.write("\n\n")
    return out.getvalue()
