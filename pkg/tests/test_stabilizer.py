import numpy as np
import pytest

from qcertbench.errors import BudgetExceededError, InvalidGroupError, InvalidInputError
from qcertbench.linalg import is_unitary
from qcertbench.stabilizer import (
    CliffordElement,
    PauliString,
    StabilizerGroup,
    choi_stabilizer_group,
    enumerate_cliffords,
    enumerate_stabilizer_states,
    outcome_distribution,
    sample_clifford,
    stabilizer_overlap,
)

from .conftest import ghz_vector

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def equal_up_to_phase(A, B, tol=1e-10):
    k = np.argmax(np.abs(B.ravel()))
    phase = A.ravel()[k] / B.ravel()[k]
    return abs(abs(phase) - 1) < tol and np.allclose(A, phase * B, atol=tol)


class TestPauliString:
    @pytest.mark.parametrize("label", ["+XIZY", "-ZZ", "+iX", "-iYY"])
    def test_label_round_trip(self, label):
        assert PauliString.from_label(label).label == label

    def test_bare_letters_default_to_plus(self):
        assert PauliString.from_label("XYZ").label == "+XYZ"

    @pytest.mark.parametrize("label", ["", "+", "XQ", "*X"])
    def test_bad_labels(self, label):
        with pytest.raises(InvalidInputError):
            PauliString.from_label(label)

    def test_dense_qubit_zero_is_most_significant(self):
        assert np.allclose(PauliString.from_label("XZ").to_dense(), np.kron(X, Z))
        assert np.allclose(PauliString.from_label("-YI").to_dense(), -np.kron(Y, np.eye(2)))

    def test_product_matches_dense(self):
        a, b = PauliString.from_label("XY"), PauliString.from_label("ZZ")
        assert np.allclose((a * b).to_dense(), a.to_dense() @ b.to_dense())

    def test_commutation(self):
        assert PauliString.from_label("XX").commutes(PauliString.from_label("ZZ"))
        assert not PauliString.from_label("XI").commutes(PauliString.from_label("ZI"))

    def test_apply_and_expectation(self, rng):
        p = PauliString.from_label("+YXZ")
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.allclose(p.apply(v), p.to_dense() @ v)
        rho = np.outer(v, v.conj())
        assert p.expectation(rho) == pytest.approx(np.trace(p.to_dense() @ rho))

    def test_single(self):
        assert PauliString.single(3, 1, "Y").label == "+IYI"


class TestStabilizerGroup:
    def test_ghz_state(self, ghz3):
        psi = ghz3.state_vector().amplitudes
        assert abs(np.vdot(psi, ghz_vector(3))) == pytest.approx(1.0)

    def test_state_is_stabilized(self, ghz3):
        psi = ghz3.state_vector().amplitudes
        for g in ghz3.elements():
            assert np.allclose(g.apply(psi), psi)

    def test_elements_identity_first(self, bell):
        elements = bell.elements()
        assert len(elements) == 4
        assert elements[0].is_identity_letters()
        assert {e.label for e in elements} == {"+II", "+XX", "+ZZ", "-YY"}

    @pytest.mark.parametrize(
        "labels",
        [["+XX", "+ZI"], ["+XX", "+XX"], ["+XX"], ["+iXX", "+ZZ"], ["+II", "+ZZ"]],
    )
    def test_invalid_generators(self, labels):
        with pytest.raises(InvalidGroupError):
            StabilizerGroup.from_labels(labels)

    def test_sign_of(self, bell):
        assert bell.sign_of(PauliString.from_label("+YY")) == -1
        assert bell.sign_of(PauliString.from_label("+XX")) == 1
        assert bell.sign_of(PauliString.from_label("+XZ")) == 0

    def test_text_round_trip(self, ghz3):
        text = "# ghz\n" + ghz3.to_text() + "\n"
        assert StabilizerGroup.from_text(text) == ghz3

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_minimax_spectrum(self, rng, n):
        S = StabilizerGroup.computational_zero(n).conjugated(sample_clifford(rng, n))
        evals = np.sort(np.linalg.eigvalsh(S.minimax_operator_dense()))[::-1]
        assert evals[0] == pytest.approx(1.0)
        if n > 1:
            assert evals[1] == pytest.approx((2 ** (n - 1) - 1) / (2**n - 1), abs=1e-12)

    def test_outcome_distribution(self, ghz3):
        probs = outcome_distribution(ghz3)
        assert probs[0] == pytest.approx(0.5)
        assert probs[7] == pytest.approx(0.5)
        assert probs.sum() == pytest.approx(1.0)

    def test_enumerated_stabilizer_states(self):
        assert len(enumerate_stabilizer_states(1)) == 6
        assert len(enumerate_stabilizer_states(2)) == 60
        with pytest.raises(BudgetExceededError):
            enumerate_stabilizer_states(4)


class TestClifford:
    def test_group_sizes(self):
        assert len(enumerate_cliffords(1)) == 24
        with pytest.raises(BudgetExceededError):
            enumerate_cliffords(3)

    def test_hadamard_dense(self):
        assert equal_up_to_phase(CliffordElement.hadamard(1, 0).to_dense(), H)

    def test_cnot_dense(self):
        cnot = np.eye(4)[[0, 1, 3, 2]]
        assert equal_up_to_phase(CliffordElement.cnot(2, 0, 1).to_dense(), cnot)

    def test_label_round_trip(self, rng):
        c = sample_clifford(rng, 3)
        assert CliffordElement.from_label(c.label) == c

    def test_bad_label(self):
        with pytest.raises(InvalidInputError):
            CliffordElement.from_label("nonsense")

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_compose_matches_matrix_product(self, rng, n):
        a, b = sample_clifford(rng, n), sample_clifford(rng, n)
        assert equal_up_to_phase(a.compose(b).to_dense(), a.to_dense() @ b.to_dense())

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_inverse(self, rng, n):
        c = sample_clifford(rng, n)
        assert c.compose(c.inverse()).is_identity()
        assert c.inverse().compose(c).is_identity()

    def test_conjugation_matches_dense(self, rng):
        c = sample_clifford(rng, 2)
        p = PauliString.from_label("+XY")
        U = c.to_dense()
        assert np.allclose(c.conjugate(p).to_dense(), U @ p.to_dense() @ U.conj().T)

    def test_dense_is_unitary(self, rng):
        assert is_unitary(sample_clifford(rng, 3).to_dense())

    def test_from_dense(self, rng):
        c = sample_clifford(rng, 2)
        assert CliffordElement.from_dense(c.to_dense()) == c

    def test_pauli_gate_flips_signs(self):
        c = CliffordElement.pauli_gate(PauliString.from_label("X"))
        assert c.conjugate(PauliString.from_label("Z")).label == "-Z"

    def test_stabilizer_overlap(self, rng, bell):
        c = sample_clifford(rng, 2)
        amps = np.abs(c.to_dense() @ bell.state_vector().amplitudes) ** 2
        for b in range(4):
            assert stabilizer_overlap(bell, c, format(b, "02b")) == pytest.approx(amps[b], abs=1e-12)

    def test_choi_group_stabilizes_choi_state(self, rng):
        c = sample_clifford(rng, 1)
        U = c.to_dense()
        omega = np.eye(2).reshape(-1) / np.sqrt(2)
        choi = np.kron(U, np.eye(2)) @ omega
        for g in choi_stabilizer_group(c).elements():
            assert np.allclose(g.apply(choi), choi)
