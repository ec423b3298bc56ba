"""Ideal gate-level 1 -> 2 approximate cloning network.

Register order is (P, A, B): P carries the input, A and B start in |0> and
end up holding the two clones.  The preparation stage acts on A and B only:

    Ry(theta1) on A and B,  controlled-pi between A and B,  Ry(theta2) on A and B

with Ry(t) = exp(-i t sigma_y / 2), theta1 = arcsin(1/sqrt 3) and
theta2 = pi/12.  The copy stage is CNOT(P->A), CNOT(P->B), CNOT(A->P),
CNOT(B->P), each CNOT written as H . controlled-pi . H on its target.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qcore
from .qcore import DensityState, I2, PHYSICAL_TOL, StateError

THETA1 = float(np.arcsin(1 / np.sqrt(3)))
THETA2 = float(np.pi / 12)

# Preparation state on (A, B) that makes the copy stage a universal cloner.
# Frozen from a root-finding oracle over real amplitudes (see tests).
GOLDEN_PREP_AMPLITUDES = np.array([2.0, 1.0, 1.0, 0.0]) / np.sqrt(6.0)


@dataclass(frozen=True)
class Gate:
    name: str
    targets: tuple[str, ...]
    matrix: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class PrepSpec:
    theta1: float = THETA1
    theta2: float = THETA2

    def gates(self) -> list[Gate]:
        cz = qcore.cphase(np.pi)
        return [
            Gate("ry", ("A",), qcore.ry(self.theta1)),
            Gate("ry", ("B",), qcore.ry(self.theta1)),
            Gate("cphase", ("A", "B"), cz),
            Gate("ry", ("A",), qcore.ry(self.theta2)),
            Gate("ry", ("B",), qcore.ry(self.theta2)),
        ]


def _circuit_unitary(gates: list[Gate], labels: tuple[str, ...]) -> np.ndarray:
    u = np.eye(2 ** len(labels), dtype=complex)
    for g in gates:
        u = qcore.embed(g.matrix, [labels.index(t) for t in g.targets], len(labels)) @ u
    return u


def prep_unitary(spec: PrepSpec = PrepSpec()) -> np.ndarray:
    """4x4 preparation unitary on (A, B)."""
    return _circuit_unitary(spec.gates(), ("A", "B"))


def prep_state(spec: PrepSpec = PrepSpec()) -> np.ndarray:
    """prep_unitary |00>, phased so the first nonzero amplitude is real positive."""
    psi = prep_unitary(spec)[:, 0]
    k = np.flatnonzero(np.abs(psi) > PHYSICAL_TOL)[0]
    return psi * (abs(psi[k]) / psi[k])


def copy_gates() -> list[Gate]:
    h = qcore.hadamard()
    cz = qcore.cphase(np.pi)
    gates = []
    for control, target in (("P", "A"), ("P", "B"), ("A", "P"), ("B", "P")):
        gates += [
            Gate("h", (target,), h),
            Gate("cphase", (control, target), cz),
            Gate("h", (target,), h),
        ]
    return gates


@lru_cache(maxsize=None)
def _copy_unitary() -> np.ndarray:
    u = _circuit_unitary(copy_gates(), qcore.REGISTER)
    u.flags.writeable = False
    return u


def copy_unitary() -> np.ndarray:
    """8x8 copy stage on (P, A, B)."""
    return _copy_unitary().copy()


@lru_cache(maxsize=None)
def _network_unitary() -> np.ndarray:
    u = _copy_unitary() @ np.kron(I2, prep_unitary())
    u.flags.writeable = False
    return u


def network_unitary() -> np.ndarray:
    """Full 8x8 network (preparation then copy) acting on |input> x |00>."""
    return _network_unitary().copy()


@dataclass(frozen=True)
class CloneOutput:
    full: DensityState
    clone_a: DensityState
    clone_b: DensityState
    anti: DensityState
    fidelity_a: float | None
    fidelity_b: float | None


def _pure_ket(s: DensityState) -> np.ndarray | None:
    w, v = np.linalg.eigh(s.rho)
    if abs(w[-1] - 1.0) > PHYSICAL_TOL:
        return None
    return v[:, -1]


def clone(inp: DensityState) -> CloneOutput:
    """Run the network on a one-qubit input (pure or mixed).

    Fidelities are reported against the input's pure state and are ``None``
    for mixed inputs.
    """
    if inp.n_qubits != 1 or inp.deviation:
        raise StateError("clone() needs a normalized single-qubit input state")
    anc = np.zeros((4, 4), dtype=complex)
    anc[0, 0] = 1.0
    u = _network_unitary()
    full = DensityState(u @ np.kron(inp.rho, anc) @ u.conj().T, qcore.REGISTER)
    clone_a = qcore.partial_trace(full, ["A"])
    clone_b = qcore.partial_trace(full, ["B"])
    anti = qcore.partial_trace(full, ["P"])
    psi = _pure_ket(inp)
    fa = fb = None
    if psi is not None:
        fa = qcore.fidelity(clone_a, psi)
        fb = qcore.fidelity(clone_b, psi)
    return CloneOutput(full, clone_a, clone_b, anti, fa, fb)


def clone_angles(theta: float, phi: float) -> CloneOutput:
    return clone(qcore.state_from_angles(theta, phi))


def deviation_output(theta: float, phi: float) -> DensityState:
    """Network applied to the NMR input P_{theta phi} A0 B0 (traceless part).

    P_{theta phi} = sin t cos p P_x + sin t sin p P_y + cos t P_z with
    P_x = sigma_x / 2 etc.; A0 = |0><0|.
    """
    n = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    p_op = 0.5 * sum(c * s for c, s in zip(n, qcore.PAULIS))
    anc = np.zeros((4, 4), dtype=complex)
    anc[0, 0] = 1.0
    u = _network_unitary()
    return DensityState(u @ np.kron(p_op, anc) @ u.conj().T, qcore.REGISTER, deviation=True)


def single_quantum_terms(s: DensityState) -> dict[tuple[str, tuple[int, ...]], complex]:
    """Line-resolved single-quantum content of a 3-qubit operator.

    Key ``(spin, partners)`` names the active spin and the basis states (0/1)
    of the other two spins in register order.  The value is twice the matrix
    element <..1..|rho|..0..>, i.e. the coefficient c in
    c_x K_x (x) proj + c_y K_y (x) proj with c = c_x + i c_y.
    """
    out = {}
    n = s.n_qubits
    for k, label in enumerate(s.labels):
        bit = 1 << (n - 1 - k)
        others = [q for q in range(n) if q != k]
        for idx in range(2**n):
            if idx & bit:
                continue
            partners = tuple((idx >> (n - 1 - q)) & 1 for q in others)
            out[(label, partners)] = complex(2 * s.rho[idx | bit, idx])
    return out


def observable_line_coefficients(theta: float, phi: float) -> dict[tuple[str, tuple[int, ...]], complex]:
    """Expected proton single-quantum terms for input P_{theta phi} A0 B0.

    A_{theta phi} (B0 P0 + B1 P1) / 3 + B_{theta phi} (A0 P0 + A1 P1) / 3,
    keyed like :func:`single_quantum_terms`.  Only the observed 1H spins
    appear; P keeps the anti-clone terms P_{theta phi}(A0 B1 + A1 B0) / 6.
    """
    c = np.sin(theta) * np.exp(1j * phi) / 3
    coeffs = {}
    for spin in ("A", "B"):
        for partners in ((0, 0), (0, 1), (1, 0), (1, 1)):
            coeffs[(spin, partners)] = 0j
    coeffs[("A", (0, 0))] = coeffs[("A", (1, 1))] = c
    coeffs[("B", (0, 0))] = coeffs[("B", (1, 1))] = c
    return coeffs


def ideal_signal(theta: float, phi: float) -> tuple[complex, complex]:
    """Multiplet-integrated transverse signal (S_A, S_B) after software trace-out."""
    s = 2.0 / 3.0 * np.sin(theta) * np.exp(1j * phi)
    return complex(s), complex(s)


def _affine_bloch_map(channel) -> np.ndarray:
    def bloch(rho_in):
        return qcore.bloch_vector(channel(DensityState(rho_in, ("P",)))).as_array()

    offset = bloch(I2 / 2)
    m = np.zeros((4, 4))
    m[0, 0] = 1.0
    m[1:, 0] = offset
    for j, p in enumerate(qcore.PAULIS):
        m[1:, j + 1] = bloch((I2 + p) / 2) - offset
    return m


def clone_channel_matrix(which: str = "A") -> np.ndarray:
    """Affine Bloch map [[1, 0], [t, M]] of one output qubit, probed on basis inputs."""
    pick = {"A": "clone_a", "B": "clone_b", "P": "anti"}
    if which not in pick:
        raise StateError(f"unknown output qubit {which!r}")
    return _affine_bloch_map(lambda s: getattr(clone(s), pick[which]))


def anticlone_channel_matrix() -> np.ndarray:
    return clone_channel_matrix("P")
