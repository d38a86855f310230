import numpy as np
import pytest

from qcertbench.errors import BudgetExceededError, DesignCheckError, InvalidInputError
from qcertbench.linalg import PureState, is_unitary
from qcertbench.randomness import (
    SeededRng,
    UnitaryEnsemble,
    as_generator,
    haar_moment_operator,
    moment_operator_empirical,
    sample_density_matrix,
    sample_haar_state,
    sample_haar_unitary,
    sym_dimension,
    sym_projector,
    tensor_power,
    verify_design,
    verify_state_design,
)
from qcertbench.stabilizer import enumerate_stabilizer_states


class TestSeededRng:
    def test_same_stream_same_draws(self):
        a = SeededRng(7, ("x", 1)).generator().random(5)
        b = SeededRng(7, ("x", 1)).generator().random(5)
        assert np.array_equal(a, b)

    def test_substreams_differ(self):
        root = SeededRng(7, ("x",))
        assert not np.array_equal(root.substream(1).generator().random(5), root.substream(2).generator().random(5))
        assert root.substream(1) == SeededRng(7, ("x", 1))

    def test_seed_range(self):
        with pytest.raises(InvalidInputError):
            SeededRng(-1)

    @pytest.mark.parametrize("value", [None, 3, SeededRng(3), np.random.default_rng(3)])
    def test_as_generator(self, value):
        assert isinstance(as_generator(value), np.random.Generator)

    def test_as_generator_rejects_strings(self):
        with pytest.raises(InvalidInputError):
            as_generator("seed")


class TestSamplers:
    @pytest.mark.parametrize("d", [1, 2, 5, 16])
    def test_haar_unitary_is_unitary(self, rng, d):
        assert is_unitary(sample_haar_unitary(rng, d))

    def test_haar_state_normalised(self, rng):
        psi = sample_haar_state(rng, 8)
        assert isinstance(psi, PureState)
        assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0)

    def test_density_matrix_rank(self, rng):
        rho = sample_density_matrix(rng, 4, rank=1)
        assert rho.purity() == pytest.approx(1.0)
        with pytest.raises(InvalidInputError):
            sample_density_matrix(rng, 4, rank=5)

    def test_first_row_moments(self, rng):
        d, n = 4, 20000
        x = np.array([abs(sample_haar_unitary(rng, d)[0, 0]) ** 2 for _ in range(n)])
        assert x.mean() == pytest.approx(1 / d, abs=4 * x.std() / np.sqrt(n))
        x2 = x**2
        assert x2.mean() == pytest.approx(1 / (d * (d + 1)), abs=4 * x2.std() / np.sqrt(n))


class TestSymmetricSubspace:
    @pytest.mark.parametrize("d,k", [(2, 2), (3, 2), (2, 3), (3, 3)])
    def test_projector(self, d, k):
        P = sym_projector(d, k)
        assert np.allclose(P @ P, P)
        assert np.trace(P).real == pytest.approx(sym_dimension(d, k))

    def test_known_dimensions(self):
        assert sym_dimension(2, 2) == 3
        assert sym_dimension(3, 2) == 6

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            sym_projector(64, 4)

    def test_haar_second_moment_matches_monte_carlo(self, rng):
        A = np.zeros((4, 4), dtype=complex)
        A[0, 0] = 1.0
        exact = haar_moment_operator(2, 2, A)
        mc = moment_operator_empirical(UnitaryEnsemble.haar(2), 2, A, n_samples=4000, rng=rng)
        assert np.max(np.abs(exact - mc)) < 0.03

    def test_third_moment_needs_symmetric_input(self):
        A = np.zeros((8, 8))
        A[0, 1] = 1.0
        A[1, 0] = 1.0
        with pytest.raises(InvalidInputError):
            haar_moment_operator(2, 3, A)

    def test_tensor_power_shape(self):
        assert tensor_power(np.eye(2), 3).shape == (8, 8)


class TestDesigns:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_single_qubit_clifford_is_3_design(self, k):
        report = verify_design(UnitaryEnsemble.clifford(1), k)
        assert report.passed
        assert report.max_deviation < 1e-10

    def test_single_qubit_clifford_is_not_4_design(self):
        report = verify_design(UnitaryEnsemble.clifford(1), 4)
        assert not report.passed
        assert report.max_deviation > 1e-3
        with pytest.raises(DesignCheckError):
            report.raise_if_failed()

    @pytest.mark.slow
    def test_two_qubit_clifford_2_design_enumerated(self):
        report = verify_design(UnitaryEnsemble.clifford(2), 2)
        assert report.passed and not report.trusted

    def test_multi_qubit_clifford_third_moment_trusted(self):
        report = verify_design(UnitaryEnsemble.clifford(3), 3)
        assert report.passed and report.trusted
        with pytest.raises(DesignCheckError):
            verify_design(UnitaryEnsemble.clifford(3), 4)

    def test_pauli_group_is_1_design_only(self):
        paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
        ens = UnitaryEnsemble.explicit(paulis)
        assert verify_design(ens, 1).passed
        assert not verify_design(ens, 2).passed

    def test_explicit_weights_validated(self):
        with pytest.raises(InvalidInputError):
            UnitaryEnsemble.explicit([np.eye(2)], weights=[0.5])

    def test_stabilizer_states_form_3_design_not_4(self):
        states = enumerate_stabilizer_states(1)
        assert len(states) == 6
        assert verify_state_design(states, 3).passed
        assert not verify_state_design(states, 4).passed
