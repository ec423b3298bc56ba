import numpy as np
import pytest

from nmrclone import qcore
from nmrclone.qcore import DensityState, StateError

from conftest import random_density, random_ket


class TestTensor:
    def test_identity(self):
        np.testing.assert_array_equal(qcore.tensor(qcore.I2, qcore.I2), np.eye(4))

    def test_basis_bookkeeping(self):
        proj0 = np.diag([1, 0])
        assert qcore.tensor(qcore.SX, proj0)[2, 0] == 1

    def test_hadamard_pair_gives_uniform_state(self):
        h = qcore.hadamard()
        psi = qcore.tensor(h, h) @ qcore.tensor(qcore.KET0, qcore.KET0)
        np.testing.assert_allclose(psi, 0.5 * np.ones(4), atol=1e-15)

    def test_associative(self, rng):
        a, b, c = (rng.normal(size=(2, 2)) for _ in range(3))
        np.testing.assert_allclose(qcore.tensor(qcore.tensor(a, b), c), qcore.tensor(a, qcore.tensor(b, c)))


class TestDensityState:
    def test_rejects_non_hermitian(self):
        with pytest.raises(StateError, match="Hermitian"):
            DensityState(np.array([[0.5, 0.1], [0.0, 0.5]]), ("q",))

    def test_rejects_bad_trace(self):
        with pytest.raises(StateError, match="trace"):
            DensityState(np.eye(2), ("q",))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(StateError, match="negative"):
            DensityState(np.diag([1.5, -0.5]), ("q",))

    def test_deviation_needs_zero_trace(self):
        DensityState(qcore.SZ / 2, ("q",), deviation=True)
        with pytest.raises(StateError, match="traceless"):
            DensityState(np.diag([1.0, 0.0]), ("q",), deviation=True)

    @pytest.mark.parametrize("labels", [("P", "A"), ("P", "P", "A")])
    def test_label_count_checked(self, labels):
        with pytest.raises(StateError):
            DensityState(np.eye(8) / 8, labels)

    def test_four_qubits_rejected(self):
        with pytest.raises(StateError, match="not supported"):
            DensityState(np.eye(16) / 16, tuple("abcd"))

    def test_rho_is_read_only(self):
        s = DensityState(np.eye(2) / 2, ("q",))
        with pytest.raises(ValueError):
            s.rho[0, 0] = 1.0


class TestApplyUnitary:
    def test_x_flips_ground_state(self):
        s = qcore.state_from_angles(0, 0, "q")
        out = qcore.apply_unitary(s, qcore.SX, ["q"])
        np.testing.assert_allclose(out.rho, np.diag([0, 1]), atol=1e-15)

    def test_hadamard_is_involution(self, rng):
        s = DensityState(random_density(rng), qcore.REGISTER)
        out = qcore.apply_unitary(qcore.apply_unitary(s, qcore.hadamard(), ["A"]), qcore.hadamard(), ["A"])
        np.testing.assert_allclose(out.rho, s.rho, atol=1e-13)

    def test_rejects_non_unitary(self):
        s = DensityState(np.eye(8) / 8)
        with pytest.raises(StateError, match="unitary"):
            qcore.apply_unitary(s, np.diag([1.0, 0.5]), ["P"])

    def test_rejects_bad_label(self):
        s = DensityState(np.eye(8) / 8)
        with pytest.raises(StateError, match="label"):
            qcore.apply_unitary(s, qcore.SX, ["Q"])

    def test_embedding_matches_kron_order(self, rng):
        # u on (B, P) must equal the explicit permuted Kronecker construction
        u = qcore.cnot()
        full = qcore.embed(u, [2, 0], 3)
        for idx in range(8):
            p, a, b = (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
            out = np.flatnonzero(np.abs(full[:, idx]) > 0.5)[0]
            assert ((out >> 2) & 1, (out >> 1) & 1, out & 1) == (p ^ b, a, b)

    def test_trace_and_hermiticity_preserved(self, rng):
        s = DensityState(random_density(rng), qcore.REGISTER)
        u = qcore.embed(qcore.cnot(), [1, 2], 3)
        out = qcore.apply_unitary(s, u, list(qcore.REGISTER))
        assert abs(np.trace(out.rho) - 1) < 1e-12
        assert np.max(np.abs(out.rho - out.rho.conj().T)) < 1e-12


class TestPartialTrace:
    def test_bell_state(self):
        psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        s = DensityState.from_ket(psi, ("x", "y"))
        np.testing.assert_allclose(qcore.partial_trace(s, ["x"]).rho, np.eye(2) / 2, atol=1e-15)

    def test_product_state(self, rng):
        rp = DensityState(random_density(rng, 1), ("P",))
        ra = DensityState(random_density(rng, 1), ("A",))
        out = qcore.partial_trace(qcore.product_state(rp, ra), ["P"])
        np.testing.assert_allclose(out.rho, rp.rho, atol=1e-14)

    def test_empty_keep_rejected(self):
        with pytest.raises(StateError, match="at least one"):
            qcore.partial_trace(DensityState(np.eye(8) / 8), [])

    def test_staged_equals_direct(self, rng):
        for _ in range(100):
            s = DensityState(random_density(rng), qcore.REGISTER)
            staged = qcore.partial_trace(qcore.partial_trace(s, ["A", "B"]), ["A"])
            direct = qcore.partial_trace(s, ["A"])
            np.testing.assert_allclose(staged.rho, direct.rho, atol=1e-12)

    def test_against_explicit_sum(self, rng):
        rho = random_density(rng)
        t = rho.reshape(2, 4, 2, 4)
        expected = np.einsum("ajbj->ab", t)
        got = qcore.partial_trace(DensityState(rho), ["P"]).rho
        np.testing.assert_allclose(got, expected, atol=1e-14)


class TestFidelityAndBloch:
    def test_pure_self_overlap(self, rng):
        psi = random_ket(rng)
        assert qcore.fidelity(DensityState.from_ket(psi, ("q",)), psi) == pytest.approx(1.0, abs=1e-14)

    def test_maximally_mixed(self, rng):
        assert qcore.fidelity(DensityState(np.eye(2) / 2, ("q",)), random_ket(rng)) == pytest.approx(0.5)

    def test_multi_qubit_rejected(self):
        with pytest.raises(StateError, match="single-qubit"):
            qcore.fidelity(DensityState(np.eye(4) / 4, ("a", "b")), qcore.KET0)

    def test_fidelity_matches_bloch_formula(self, rng):
        for _ in range(50):
            s = DensityState(random_density(rng, 1), ("q",))
            psi = random_ket(rng)
            b = qcore.bloch_vector(s).as_array()
            n = qcore.bloch_vector(DensityState.from_ket(psi, ("q",))).as_array()
            assert qcore.fidelity(s, psi) == pytest.approx((1 + b @ n) / 2, abs=1e-12)

    def test_ground_state_bloch(self):
        assert qcore.bloch_vector(qcore.state_from_angles(0, 0)).as_array() == pytest.approx([0, 0, 1])

    def test_px_bloch(self):
        b = qcore.bloch_vector(qcore.state_from_angles(np.pi / 2, 0)).as_array()
        np.testing.assert_allclose(b, [1, 0, 0], atol=1e-15)

    def test_grid_round_trip(self):
        for t in range(0, 181, 15):
            for p in range(0, 346, 15):
                th, ph = np.radians(t), np.radians(p)
                want = [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
                got = qcore.bloch_vector(qcore.state_from_angles(th, ph)).as_array()
                np.testing.assert_allclose(got, want, atol=1e-12)

    def test_state_from_bloch_inverts(self):
        b = [0.3, -0.2, 0.4]
        assert qcore.bloch_vector(qcore.state_from_bloch(b)).as_array() == pytest.approx(b)


class TestGates:
    def test_hadamard_on_zero(self):
        np.testing.assert_allclose(qcore.hadamard() @ qcore.KET0, [1 / np.sqrt(2)] * 2)

    def test_cphase_on_11(self):
        assert qcore.cphase(np.pi)[3, 3] == pytest.approx(-1)

    def test_cnot_decomposition(self):
        expected = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        np.testing.assert_allclose(qcore.cnot(), expected, atol=1e-13)

    def test_ry_double_theta1_amplitude(self):
        theta1 = np.arcsin(1 / np.sqrt(3))
        psi = qcore.ry(2 * theta1) @ qcore.KET0
        assert psi[1] == pytest.approx(1 / np.sqrt(3), abs=1e-14)

    @pytest.mark.parametrize("gate", [qcore.rx, qcore.ry, qcore.rz])
    def test_rotations_unitary(self, gate):
        assert qcore.is_unitary(gate(0.37))

    @pytest.mark.parametrize(
        "gate, pauli",
        [(qcore.rx, qcore.SX), (qcore.ry, qcore.SY), (qcore.rz, qcore.SZ)],
    )
    def test_rotation_convention(self, gate, pauli):
        from scipy.linalg import expm

        np.testing.assert_allclose(gate(0.9), expm(-0.45j * pauli), atol=1e-14)

    def test_same_up_to_phase(self):
        u = qcore.hadamard()
        assert qcore.same_up_to_phase(np.exp(0.3j) * u, u)
        assert not qcore.same_up_to_phase(qcore.SX, u)
