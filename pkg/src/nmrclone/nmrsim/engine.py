"""Pulse-level dynamics for the three-spin system.

States are deviation matrices in the (P, A, B) Zeeman basis, in units where
the thermal deviation is r P_z + A_z + B_z.  Inside :func:`run_sequence` the
state is carried as an :class:`Ensemble`: a set of matrices keyed by the
gradient phase they have accumulated, so that gradient pairs refocus or dephase
whole coherence pathways exactly.  Averaging over the sample keeps only the
component whose accumulated phase is zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.linalg import expm

from .. import qcore
from ..qcore import DensityState
from . import sequences as seqs
from .system import LABELS, SpinSystem

TWO_PI = 2 * np.pi
PATHWAY_TOL = 1e-9
ORDER_DECIMALS = 9


class SequenceError(ValueError):
    """Invalid event, sequence or evolution request."""


# -- operators ---------------------------------------------------------------


@lru_cache(maxsize=None)
def spin_operators() -> dict[tuple[str, str], np.ndarray]:
    """I_x, I_y, I_z, I_+ and I_- for each spin, keyed ``(label, axis)``."""
    single = {
        "x": qcore.SX / 2,
        "y": qcore.SY / 2,
        "z": qcore.SZ / 2,
        "+": np.array([[0, 1], [0, 0]], dtype=complex),
        "-": np.array([[0, 0], [1, 0]], dtype=complex),
    }
    ops = {}
    for k, label in enumerate(LABELS):
        for axis, m in single.items():
            op = qcore.embed(m, [k], 3)
            op.flags.writeable = False
            ops[(label, axis)] = op
    return ops


def op(label: str, axis: str) -> np.ndarray:
    return spin_operators()[(label, axis)]


def magnetic_numbers() -> np.ndarray:
    """m_k(i) = +1/2 for bit 0, -1/2 for bit 1; shape (8, 3)."""
    idx = np.arange(8)
    bits = np.stack([(idx >> (2 - k)) & 1 for k in range(3)], axis=1)
    return 0.5 - bits


@lru_cache(maxsize=64)
def weighted_orders(sys: SpinSystem) -> np.ndarray:
    """Matrix of m_i - m_j for the weighted total z magnetization F_z^w."""
    w = np.array([sys.weight(l) for l in LABELS])
    m = magnetic_numbers() @ w
    q = m[:, None] - m[None, :]
    q.flags.writeable = False
    return q


def thermal_deviation(sys: SpinSystem) -> np.ndarray:
    return sum(sys.weight(l) * op(l, "z") for l in LABELS)


@lru_cache(maxsize=64)
def hamiltonian(sys: SpinSystem, mode: str = "secular") -> np.ndarray:
    """H in rad/s.  ``full`` adds the flip-flop term between same-channel spins."""
    if mode not in ("secular", "full"):
        raise SequenceError(f"unknown coupling mode {mode!r}")
    h = sum(nu * op(l, "z") for l, nu in zip(LABELS, sys.offsets))
    jm = sys.coupling_matrix()
    for a in range(3):
        for b in range(a + 1, 3):
            la, lb = LABELS[a], LABELS[b]
            h = h + jm[a, b] * op(la, "z") @ op(lb, "z")
            if mode == "full" and sys.channels[a] == sys.channels[b]:
                h = h + jm[a, b] * (op(la, "x") @ op(lb, "x") + op(la, "y") @ op(lb, "y"))
    h = TWO_PI * h
    h.flags.writeable = False
    return h


@lru_cache(maxsize=4096)
def propagator(sys: SpinSystem, t: float, mode: str = "secular") -> np.ndarray:
    if t < 0:
        raise SequenceError(f"negative evolution time {t}")
    u = expm(-1j * t * hamiltonian(sys, mode))
    u.flags.writeable = False
    return u


@lru_cache(maxsize=4096)
def rotation(spins: tuple[str, ...], flip: float, phase: float) -> np.ndarray:
    """exp(-i flip (cos phase F_x + sin phase F_y)) over ``spins``."""
    gen = sum(np.cos(phase) * op(l, "x") + np.sin(phase) * op(l, "y") for l in spins)
    u = expm(-1j * flip * gen)
    u.flags.writeable = False
    return u


@lru_cache(maxsize=4096)
def z_rotation(spins: tuple[str, ...], angle: float) -> np.ndarray:
    """exp(-i angle I_z) on each listed spin (diagonal)."""
    d = np.zeros(8)
    for l in spins:
        d = d + np.real(np.diag(op(l, "z")))
    u = np.diag(np.exp(-1j * angle * d))
    u.flags.writeable = False
    return u


def _conj(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


# -- relaxation --------------------------------------------------------------


@lru_cache(maxsize=None)
def _walsh() -> tuple[np.ndarray, np.ndarray]:
    """Rows: z-product operators prod_{k in S} sigma_z^k as diagonal sign patterns."""
    signs = 1 - 2 * ((np.arange(8)[:, None] >> (2 - np.arange(3))[None, :]) & 1)
    subsets = np.array([[(s >> (2 - k)) & 1 for k in range(3)] for s in range(8)])
    table = np.array([[np.prod(np.where(sub, signs[i], 1)) for i in range(8)] for sub in subsets])
    return subsets, table.astype(float)


@lru_cache(maxsize=4096)
def _relaxation_factors(sys: SpinSystem, t: float) -> tuple[np.ndarray, np.ndarray]:
    flips = (np.arange(8)[:, None] ^ np.arange(8)[None, :])
    bits = np.stack([(flips >> (2 - k)) & 1 for k in range(3)], axis=-1)
    r2 = np.exp(-t / np.array(sys.t2))
    offdiag = np.prod(np.where(bits == 1, r2, 1.0), axis=-1)
    subsets, _ = _walsh()
    r1 = np.exp(-t / np.array(sys.t1))
    zfac = np.prod(np.where(subsets == 1, r1, 1.0), axis=1)
    offdiag.flags.writeable = False
    zfac.flags.writeable = False
    return offdiag, zfac


def _relax_array(rho: np.ndarray, sys: SpinSystem, t: float, eq: np.ndarray | None) -> np.ndarray:
    offdiag, zfac = _relaxation_factors(sys, t)
    _, table = _walsh()
    out = rho * offdiag
    d = np.real(np.diag(rho))
    c = table @ d / 8
    if eq is not None:
        ceq = table @ np.real(np.diag(eq)) / 8
        c = ceq + (c - ceq) * zfac
        c[0] = (table @ d / 8)[0]
    else:
        c = c * zfac
    np.fill_diagonal(out, table.T @ c)
    return out


def relax(s: DensityState, sys: SpinSystem, t: float, equilibrium: np.ndarray | None = None) -> DensityState:
    """Uncorrelated per-spin relaxation over time ``t``.

    Coherences decay by exp(-t/T2) for every spin whose state differs between
    the bra and ket; z-order terms decay towards ``equilibrium`` (default:
    thermal deviation) by exp(-t/T1) per participating spin.
    """
    if t < 0:
        raise SequenceError(f"negative relaxation time {t}")
    if t == 0:
        return s
    eq = thermal_deviation(sys) if equilibrium is None else equilibrium
    return s.with_rho(_relax_array(s.rho, sys, t, eq))


# -- single-state operations -------------------------------------------------


def free_evolution(s: DensityState, sys: SpinSystem, t: float, mode: str = "secular") -> DensityState:
    if t < 0:
        raise SequenceError(f"negative evolution time {t}")
    return s.with_rho(_conj(propagator(sys, float(t), mode), s.rho))


def hard_pulse(s: DensityState, sys: SpinSystem, channel: str, flip: float, phase: float = 0.0) -> DensityState:
    return s.with_rho(_conj(rotation(sys.spins_on(channel), float(flip), float(phase)), s.rho))


def selective_rotation(s: DensityState, target: str, flip: float, phase: float = 0.0) -> DensityState:
    """Perfect single-spin rotation, used when selective pulses are idealized."""
    return s.with_rho(_conj(rotation((target,), float(flip), float(phase)), s.rho))


def jump_return_90(
    s: DensityState,
    sys: SpinSystem,
    target: str,
    phase: float = 0.0,
    eps90: float | None = None,
    mode: str = "secular",
    b1_error: float = 0.0,
) -> DensityState:
    """Selective 90 degree rotation of one proton by jump-and-return."""
    if eps90 is None:
        eps90 = seqs.nominal_eps90(sys)
    u = jump_return_unitary(sys, target, phase, eps90, mode, b1_error)
    return s.with_rho(_conj(u, s.rho))


def _jr_frames(sys: SpinSystem, target: str, phase: float, eps: float):
    """Pulse phases and frame corrections for a 45 - eps - 45 jump-and-return.

    The non-target proton sets the reference frame: its precession during the
    delay is tracked in software so that the second pulse undoes the first for
    it exactly.  The target picks up a relative precession that is pi when
    eps = 1 / (4 delta nu), turning the two 45 degree pulses into one 90.
    """
    if target not in sys.spins_on("H"):
        raise SequenceError(f"jump-and-return target must be a proton, got {target!r}")
    other = next(l for l in sys.spins_on("H") if l != target)
    alpha = {l: TWO_PI * nu * eps for l, nu in zip(LABELS, sys.offsets)}
    delta = alpha[target] - alpha[other]
    phi1 = phase - np.pi
    phi2 = phi1 + np.pi + alpha[other]
    pre = z_rotation((target,), -delta)
    post = z_rotation(sys.spins_on("H"), -alpha[other])
    for l in sys.spins_on("P"):
        post = z_rotation((l,), -alpha[l]) @ post
    return phi1, phi2, pre, post


@lru_cache(maxsize=1024)
def jump_return_unitary(
    sys: SpinSystem, target: str, phase: float, eps90: float, mode: str = "secular", b1_error: float = 0.0
) -> np.ndarray:
    phi1, phi2, pre, post = _jr_frames(sys, target, phase, eps90)
    flip = (np.pi / 4) * (1 + b1_error)
    h = sys.spins_on("H")
    u = post @ rotation(h, flip, phi2) @ propagator(sys, float(eps90), mode) @ rotation(h, flip, phi1) @ pre
    u.flags.writeable = False
    return u


def selective_error(sys: SpinSystem, eps90_scale: float = seqs.EPS90_SCALE, mode: str = "secular") -> float:
    """Mean gate infidelity 1 - |tr(U_ideal^dag U)|^2 / 64 of the two jump-and-returns."""
    eps = eps90_scale * seqs.nominal_eps90(sys)
    errs = []
    for target in sys.spins_on("H"):
        u = jump_return_unitary(sys, target, 0.0, eps, mode)
        ideal = rotation((target,), np.pi / 2, 0.0)
        errs.append(1 - abs(np.trace(ideal.conj().T @ u)) ** 2 / 64)
    return float(np.mean(errs))


def gradient(s: DensityState, sys: SpinSystem, area: float) -> DensityState:
    """Gradient phase for a single isochromat: element (i, j) gets exp(-i area q_ij)."""
    return s.with_rho(s.rho * np.exp(-1j * area * weighted_orders(sys)))


def crush(s: DensityState, sys: SpinSystem) -> DensityState:
    """Uniform phase average of a strong gradient: keeps only q_ij = 0 elements."""
    return s.with_rho(np.where(np.abs(weighted_orders(sys)) < PATHWAY_TOL, s.rho, 0))


def z_filter(
    s: DensityState,
    sys: SpinSystem,
    delay_set: Iterable[float] | None = None,
    mode: str = "secular",
    sandwich: tuple[str, float] | None = None,
) -> DensityState:
    """Average of (delay, crush) over ``delay_set``.

    With ``sandwich=(channel, phase)`` the block is bracketed by 90 degree
    pulses at ``phase`` and ``phase + pi``, the form used when the wanted
    terms are transverse on entry.
    """
    delays = seqs.default_zfilter_delays(sys) if delay_set is None else tuple(delay_set)
    if not delays:
        raise SequenceError("z-filter needs at least one delay")
    ens = Ensemble.from_array(s.rho)
    ens = _zfilter(ens, sys, delays, RunOptions(mode=mode), sandwich)
    return s.with_rho(ens.average())


# -- ensembles and sequence execution ---------------------------------------


def _key(registers: dict[str, float]) -> tuple:
    return tuple(sorted((r, v) for r, v in registers.items() if abs(v) > PATHWAY_TOL))


class Ensemble:
    """Sample state resolved by accumulated gradient phase.

    Keys are tuples of ``(register, accumulated area * order)``; the empty key
    is the unphased component.  Each gradient direction has its own register.
    """

    def __init__(self, parts: dict[tuple, np.ndarray] | None = None):
        self.parts: dict[tuple, np.ndarray] = dict(parts or {})

    @classmethod
    def from_array(cls, rho: np.ndarray) -> "Ensemble":
        return cls({(): np.array(rho, dtype=complex)})

    def map(self, f) -> "Ensemble":
        return Ensemble({k: f(v) for k, v in self.parts.items()})

    def unitary(self, u: np.ndarray) -> "Ensemble":
        return self.map(lambda rho: _conj(u, rho))

    def gradient(self, sys: SpinSystem, area: float, register: str = "z") -> "Ensemble":
        q = np.round(weighted_orders(sys), ORDER_DECIMALS)
        out: dict[tuple, np.ndarray] = {}
        for key, rho in self.parts.items():
            regs = dict(key)
            for value in np.unique(q):
                mask = q == value
                if not np.any(rho[mask]):
                    continue
                new = dict(regs)
                new[register] = round(new.get(register, 0.0) + area * value, ORDER_DECIMALS) + 0.0
                k = _key(new)
                part = np.where(mask, rho, 0)
                out[k] = out[k] + part if k in out else part
        return Ensemble(out)

    def crush(self, sys: SpinSystem) -> "Ensemble":
        keep = np.abs(weighted_orders(sys)) < PATHWAY_TOL
        return self.map(lambda rho: np.where(keep, rho, 0))

    def __add__(self, other: "Ensemble") -> "Ensemble":
        out = dict(self.parts)
        for k, v in other.parts.items():
            out[k] = out[k] + v if k in out else v
        return Ensemble(out)

    def scale(self, c: float) -> "Ensemble":
        return self.map(lambda rho: c * rho)

    def average(self) -> np.ndarray:
        """Sample average: only the refocused (zero-phase) component survives."""
        rho = self.parts.get(())
        return np.zeros((8, 8), dtype=complex) if rho is None else rho.copy()


@dataclass(frozen=True)
class RunOptions:
    relaxation: bool = False
    t1: bool = True
    ideal_selective: bool = False
    b1_error: float = 0.0
    mode: str = "secular"
    step: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("secular", "full"):
            raise SequenceError(f"unknown coupling mode {self.mode!r}")
        if not self.step > 0:
            raise SequenceError("relaxation step must be positive")


def _delay(ens: Ensemble, sys: SpinSystem, t: float, opts: RunOptions, eq: np.ndarray) -> Ensemble:
    if t < 0:
        raise SequenceError(f"negative delay {t}")
    if t == 0:
        return ens
    if not opts.relaxation:
        return ens.unitary(propagator(sys, float(t), opts.mode))
    n = max(1, math.ceil(t / opts.step - 1e-9))
    dt = t / n
    u = propagator(sys, dt, opts.mode)
    for _ in range(n):
        ens = _relax_step(ens.unitary(u), sys, dt, opts, eq)
    return ens


def _relax_step(ens: Ensemble, sys: SpinSystem, dt: float, opts: RunOptions, eq: np.ndarray) -> Ensemble:
    relax_sys = sys if opts.t1 else _no_t1(sys)
    out = {}
    for k, rho in ens.parts.items():
        out[k] = _relax_array(rho, relax_sys, dt, None)
    # thermal recovery only feeds the unphased component
    rec = _relax_array(np.zeros((8, 8), dtype=complex), relax_sys, dt, eq)
    out[()] = out[()] + rec if () in out else rec
    return Ensemble(out)


@lru_cache(maxsize=64)
def _no_t1(sys: SpinSystem) -> SpinSystem:
    from dataclasses import replace

    return replace(sys, t1=(math.inf,) * 3)


def _zfilter(ens, sys, delays, opts, sandwich=None, eq=None) -> Ensemble:
    eq = thermal_deviation(sys) if eq is None else eq
    if sandwich is not None:
        ch, ph = sandwich
        ens = ens.unitary(rotation(sys.spins_on(ch), np.pi / 2, ph))
    acc = None
    for t in delays:
        part = _delay(ens, sys, float(t), opts, eq).crush(sys)
        acc = part if acc is None else acc + part
    ens = acc.scale(1.0 / len(delays))
    if sandwich is not None:
        ens = ens.unitary(rotation(sys.spins_on(ch), np.pi / 2, ph + np.pi))
    return ens


def apply_event(ens: Ensemble, sys: SpinSystem, ev, opts: RunOptions, eq: np.ndarray) -> Ensemble:
    flip_scale = 1.0 + opts.b1_error
    if isinstance(ev, seqs.HardPulse):
        return ens.unitary(rotation(sys.spins_on(ev.channel), ev.flip * flip_scale, ev.phase))
    if isinstance(ev, seqs.Delay):
        return _delay(ens, sys, ev.duration, opts, eq)
    if isinstance(ev, seqs.JumpReturn90):
        if ev.target not in sys.spins_on("H"):
            raise SequenceError(f"jump-and-return target must be a proton, got {ev.target!r}")
        if opts.ideal_selective:
            return ens.unitary(rotation((ev.target,), np.pi / 2, ev.phase))
        eps = seqs.nominal_eps90(sys) * seqs.EPS90_SCALE if ev.eps90 is None else ev.eps90
        if not opts.relaxation:
            return ens.unitary(jump_return_unitary(sys, ev.target, ev.phase, eps, opts.mode, opts.b1_error))
        phi1, phi2, pre, post = _jr_frames(sys, ev.target, ev.phase, eps)
        h = sys.spins_on("H")
        flip = (np.pi / 4) * flip_scale
        ens = ens.unitary(rotation(h, flip, phi1) @ pre)
        ens = _delay(ens, sys, eps, opts, eq)
        return ens.unitary(post @ rotation(h, flip, phi2))
    if isinstance(ev, seqs.ZRotation):
        return ens.unitary(z_rotation((ev.spin,), ev.angle))
    if isinstance(ev, seqs.Gradient):
        return ens.gradient(sys, ev.area, ev.register)
    if isinstance(ev, seqs.Crush):
        return ens.crush(sys)
    if isinstance(ev, seqs.ZFilter):
        return _zfilter(ens, sys, ev.delays, opts, eq=eq)
    raise SequenceError(f"unsupported event {ev!r}")


def event_unitary(sys: SpinSystem, ev, opts: RunOptions = RunOptions()) -> np.ndarray:
    """Propagator of a coherent event; gradients, crushers and z-filters have none."""
    flip_scale = 1.0 + opts.b1_error
    if isinstance(ev, seqs.HardPulse):
        return rotation(sys.spins_on(ev.channel), ev.flip * flip_scale, ev.phase)
    if isinstance(ev, seqs.Delay):
        return propagator(sys, float(ev.duration), opts.mode)
    if isinstance(ev, seqs.JumpReturn90):
        if opts.ideal_selective:
            return rotation((ev.target,), np.pi / 2, ev.phase)
        eps = seqs.nominal_eps90(sys) * seqs.EPS90_SCALE if ev.eps90 is None else ev.eps90
        return jump_return_unitary(sys, ev.target, ev.phase, eps, opts.mode, opts.b1_error)
    if isinstance(ev, seqs.ZRotation):
        return z_rotation((ev.spin,), ev.angle)
    raise SequenceError(f"{type(ev).__name__} is not a unitary event")


def sequence_unitary(sys: SpinSystem, seq: "seqs.Sequence | Iterable", options: RunOptions = RunOptions()) -> np.ndarray:
    """Product of the event propagators (relaxation is ignored)."""
    events = seq.events if isinstance(seq, seqs.Sequence) else tuple(seq)
    u = np.eye(8, dtype=complex)
    for ev in events:
        u = event_unitary(sys, ev, options) @ u
    return u


def run_ensemble(
    rho: np.ndarray | Ensemble,
    sys: SpinSystem,
    seq: "seqs.Sequence | Iterable",
    options: RunOptions = RunOptions(),
    equilibrium: np.ndarray | None = None,
) -> Ensemble:
    ens = rho if isinstance(rho, Ensemble) else Ensemble.from_array(rho)
    eq = thermal_deviation(sys) if equilibrium is None else equilibrium
    events = seq.events if isinstance(seq, seqs.Sequence) else tuple(seq)
    for ev in events:
        ens = apply_event(ens, sys, ev, options, eq)
    return ens


def run_sequence(
    s: DensityState,
    sys: SpinSystem,
    seq: "seqs.Sequence | Iterable",
    options: RunOptions = RunOptions(),
    equilibrium: np.ndarray | None = None,
) -> DensityState:
    """Fold the events over ``s`` and average over the sample."""
    ens = run_ensemble(s.rho, sys, seq, options, equilibrium)
    return DensityState(ens.average(), s.labels, deviation=True)


def purification(
    sys: SpinSystem,
    options: RunOptions = RunOptions(),
    eps90_scale: float = seqs.EPS90_SCALE,
    initial: np.ndarray | None = None,
    precrush: bool = True,
) -> DensityState:
    """Run the purification program from the thermal deviation (or ``initial``)."""
    rho = thermal_deviation(sys) if initial is None else initial
    seq = seqs.purification_sequence(sys, eps90_scale, precrush=precrush)
    return run_sequence(DensityState(rho, LABELS, deviation=True), sys, seq, options)


def target_pseudopure(sys: SpinSystem) -> np.ndarray:
    """r P_z A0 B0: the ideal purification output in thermal units."""
    a0 = np.diag([1.0, 0.0]).astype(complex)
    return sys.weight("P") * np.kron(qcore.SZ / 2, np.kron(a0, a0))
