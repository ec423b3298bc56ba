"""Dense density-matrix engine for up to three qubits.

Qubit ordering is fixed throughout the package: the first label is the most
significant bit of a basis index.  For the cloning register that means
``("P", "A", "B")`` with ``|pab>`` at index ``4p + 2a + b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ALGEBRA_TOL = 1e-12
PHYSICAL_TOL = 1e-10
MAX_QUBITS = 3

REGISTER = ("P", "A", "B")

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


class StateError(ValueError):
    """Raised for malformed states, operators or qubit labels."""


def _check_power_of_two(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise StateError(f"dimension {dim} is not a power of two")
    return n


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the operands, left operand most significant.

    Works for kets (1-D) as well as operators, as long as they are not mixed.
    """
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def is_unitary(u: np.ndarray, atol: float = ALGEBRA_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < atol)


def embed(op: np.ndarray, positions: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift ``op`` acting on ``positions`` (in op's own qubit order) to n qubits."""
    op = np.asarray(op, dtype=complex)
    k = len(positions)
    if op.shape != (2**k, 2**k):
        raise StateError(f"operator shape {op.shape} does not match {k} target qubit(s)")
    if len(set(positions)) != k or any(not 0 <= p < n_qubits for p in positions):
        raise StateError(f"invalid target positions {tuple(positions)}")
    if k == n_qubits and list(positions) == list(range(n_qubits)):
        return op.copy()
    rest = [q for q in range(n_qubits) if q not in positions]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    order = list(positions) + rest
    perm = [order.index(q) for q in range(n_qubits)]
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(perm + [n_qubits + p for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


@dataclass(frozen=True, eq=False)
class DensityState:
    """Density operator on labelled qubits.

    ``deviation=True`` marks a traceless NMR deviation matrix; the unit-trace
    and positivity checks are replaced by a zero-trace check.
    """

    rho: np.ndarray
    labels: tuple[str, ...] = REGISTER
    deviation: bool = False

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        labels = tuple(self.labels)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"density matrix must be square, got shape {rho.shape}")
        n = _check_power_of_two(rho.shape[0])
        if not 1 <= n <= MAX_QUBITS:
            raise StateError(f"{n} qubits not supported (1..{MAX_QUBITS})")
        if len(labels) != n or len(set(labels)) != n:
            raise StateError(f"labels {labels} do not name {n} distinct qubits")
        scale = max(1.0, float(np.max(np.abs(rho))))
        if np.max(np.abs(rho - rho.conj().T)) > PHYSICAL_TOL * scale:
            raise StateError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if self.deviation:
            if abs(tr) > PHYSICAL_TOL * scale:
                raise StateError(f"deviation matrix must be traceless, trace = {tr:.3e}")
        else:
            if abs(tr - 1.0) > PHYSICAL_TOL:
                raise StateError(f"state trace {tr:.12f} differs from 1")
            if np.min(np.linalg.eigvalsh(rho)) < -PHYSICAL_TOL:
                raise StateError("density matrix has negative eigenvalues")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "labels", labels)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"unknown qubit label {label!r}; have {self.labels}") from None

    def with_rho(self, rho: np.ndarray) -> "DensityState":
        return DensityState(rho, self.labels, self.deviation)

    @classmethod
    def from_ket(cls, psi: np.ndarray, labels: Iterable[str] | None = None) -> "DensityState":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        n = _check_power_of_two(psi.size)
        if labels is None:
            labels = REGISTER if n == 3 else tuple(f"q{i}" for i in range(n))
        labels = tuple(labels)
        return cls(np.outer(psi, psi.conj()), labels)

    def __repr__(self):
        kind = "deviation" if self.deviation else "state"
        return f"DensityState({kind}, labels={self.labels})"


def product_state(*states: DensityState) -> DensityState:
    """Tensor product of states, labels concatenated in argument order."""
    labels = sum((s.labels for s in states), ())
    deviation = any(s.deviation for s in states)
    return DensityState(tensor(*(s.rho for s in states)), labels, deviation)


def apply_unitary(s: DensityState, u: np.ndarray, targets: Sequence[str]) -> DensityState:
    """Conjugate ``s`` by ``u`` acting on the labelled ``targets``."""
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, PHYSICAL_TOL):
        raise StateError("operator is not unitary")
    positions = [s.index(t) for t in targets]
    full = embed(u, positions, s.n_qubits)
    return s.with_rho(full @ s.rho @ full.conj().T)


def _partial_trace_array(rho: np.ndarray, n: int, keep: Sequence[int]) -> np.ndarray:
    t = rho.reshape([2] * (2 * n))
    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    d = 2 ** len(keep)
    return np.einsum("".join(row) + "".join(col) + "->" + out, t).reshape(d, d)


def partial_trace(s: DensityState, keep: Sequence[str]) -> DensityState:
    """Reduced state on ``keep``; the result follows the order of ``s.labels``."""
    keep = list(keep)
    if not keep:
        raise StateError("partial trace must keep at least one qubit")
    positions = sorted({s.index(k) for k in keep})
    rho = _partial_trace_array(s.rho, s.n_qubits, positions)
    return DensityState(rho, tuple(s.labels[p] for p in positions), s.deviation)


def _single_qubit(s: DensityState, what: str) -> None:
    if s.n_qubits != 1:
        raise StateError(f"{what} needs a single-qubit state, got {s.n_qubits} qubits")


def fidelity(s: DensityState, psi: np.ndarray) -> float:
    """Overlap <psi|rho|psi> of a one-qubit state with a pure reference."""
    _single_qubit(s, "fidelity")
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ s.rho @ psi))


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def bloch_vector(s: DensityState) -> BlochVector:
    _single_qubit(s, "bloch_vector")
    x, y, z = (float(np.real(np.trace(s.rho @ p))) for p in PAULIS)
    return BlochVector(x, y, z)


def ket_from_angles(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def state_from_angles(theta: float, phi: float, label: str = "P") -> DensityState:
    """Pure qubit with Bloch vector (sin t cos p, sin t sin p, cos t)."""
    return DensityState.from_ket(ket_from_angles(theta, phi), (label,))


def state_from_bloch(b: Sequence[float], label: str = "P") -> DensityState:
    bx, by, bz = b
    return DensityState(0.5 * (I2 + bx * SX + by * SY + bz * SZ), (label,))


# Gates.  Rotations follow R(theta) = exp(-i theta sigma / 2).


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def cphase(phase: float = np.pi) -> np.ndarray:
    """Controlled phase shift: |11> picks up exp(i phase)."""
    return np.diag([1, 1, 1, np.exp(1j * phase)]).astype(complex)


def cnot() -> np.ndarray:
    """CNOT with the first qubit as control, built as (1 x H) CZ (1 x H)."""
    hh = np.kron(I2, hadamard())
    return hh @ cphase(np.pi) @ hh


def same_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = ALGEBRA_TOL) -> bool:
    """True when a = exp(i g) b for some real g."""
    a = np.asarray(a)
    b = np.asarray(b)
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) < atol:
        return bool(np.max(np.abs(a)) < atol)
    g = a[k] / b[k]
    if abs(abs(g) - 1) > atol * 10:
        return False
    return bool(np.max(np.abs(a - g * b)) < atol)
