"""Pulse-level cloning experiment: purify once, then input pulse + cloning per state."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import qcore, spectra
from .nmrsim import engine
from .nmrsim import sequences as seqs
from .nmrsim.system import LABELS, SpinSystem
from .qcore import DensityState


@dataclass(frozen=True)
class PulseResult:
    state: DensityState
    integral_a: complex
    integral_b: complex
    bloch_a: np.ndarray
    bloch_b: np.ndarray
    fidelity_a: float
    fidelity_b: float


def _unit(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def deviation_bloch(rho: np.ndarray, spin: str, scale: float = 1.0) -> np.ndarray:
    """(2 tr(rho I_x), 2 tr(rho I_y), 2 tr(rho I_z)) / scale for one spin."""
    return np.array([2 * np.real(np.trace(rho @ engine.op(spin, ax))) for ax in "xyz"]) / scale


@dataclass
class PulseExperiment:
    """Purification is computed lazily and reused for every input state.

    Outputs are normalized by r, the amplitude of the ideal pseudo-pure
    state, so an ideal run reproduces the gate-level numbers.
    """

    sys: SpinSystem
    options: engine.RunOptions = field(default_factory=engine.RunOptions)
    eps90_scale: float = seqs.EPS90_SCALE

    @cached_property
    def purified(self) -> DensityState:
        return engine.purification(self.sys, self.options, self.eps90_scale)

    @cached_property
    def cloning(self) -> seqs.Sequence:
        return seqs.cloning_sequence(self.sys, self.eps90_scale)

    @property
    def scale(self) -> float:
        return self.sys.weight("P")

    def program(self, theta: float, phi: float) -> seqs.Sequence:
        return seqs.Sequence("input", (seqs.input_pulse(theta, phi),)) + self.cloning

    def state(self, theta: float, phi: float, phase_shift: float = 0.0) -> DensityState:
        seq = self.program(theta, phi)
        if phase_shift:
            seq = seq.phase_shifted(phase_shift)
        return engine.run_sequence(self.purified, self.sys, seq, self.options)

    def run(self, theta: float, phi: float) -> PulseResult:
        s = self.state(theta, phi)
        ia, ib = spectra.multiplet_integrals(s, self.sys, self.scale)
        n = _unit(theta, phi)
        ba = deviation_bloch(s.rho, "A", self.scale)
        bb = deviation_bloch(s.rho, "B", self.scale)
        return PulseResult(s, ia, ib, ba, bb, float((1 + ba @ n) / 2), float((1 + bb @ n) / 2))

    def spectrum(self, theta: float, phi: float, channel: str = "H", phase_shift: float = 0.0) -> spectra.Spectrum:
        return spectra.acquire(self.state(theta, phi, phase_shift).rho / self.scale, self.sys, channel)

    def cyclops_runs(
        self, theta: float, phi: float, channel: str = "H", dc_offset: complex = 0.0, imbalance: float = 0.0
    ) -> list[spectra.Spectrum]:
        """Four scans with every pulse phase stepped by 90 degrees, as detected."""
        runs = []
        for phase in spectra.cyclops_phases():
            spec = self.spectrum(theta, phi, channel, phase)
            spec = spectra.detect(spec, dc_offset, imbalance)
            runs.append(spectra.Spectrum(spec.channel, spec.lines, phase))
        return runs

    def cyclops_spectrum(self, theta: float, phi: float, channel: str = "H", **receiver) -> spectra.Spectrum:
        return spectra.cyclops_average(self.cyclops_runs(theta, phi, channel, **receiver))


def ideal_state(theta: float, phi: float) -> DensityState:
    """Gate-level deviation output in the same units as :class:`PulseExperiment`."""
    from .cloner import deviation_output

    return deviation_output(theta, phi)
