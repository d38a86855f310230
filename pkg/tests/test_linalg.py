import numpy as np
import pytest

from qcertbench.errors import DimensionMismatchError, InvalidInputError
from qcertbench.linalg import (
    DensityMatrix,
    Povm,
    PureState,
    bures_angle,
    bures_distance,
    fidelity,
    hs_inner,
    infidelity_trace_distance_bounds,
    is_hermitian,
    is_psd,
    is_unitary,
    kron,
    partial_trace,
    projector_positive_part,
    psd_sqrt,
    pure_state_fidelity,
    schatten_norm,
    swap_operator,
    trace_distance,
    unvectorize,
    vectorize,
)
from qcertbench.randomness import sample_density_matrix, sample_haar_state


class TestStates:
    def test_density_matrix_rejects_non_unit_trace(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.eye(2))

    def test_density_matrix_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_density_matrix_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.array([[np.nan, 0], [0, 1]]))

    def test_pure_state_requires_unit_norm(self):
        with pytest.raises(InvalidInputError):
            PureState(np.array([1.0, 1.0]))
        assert PureState.normalized([1.0, 1.0]).amplitudes == pytest.approx([2**-0.5, 2**-0.5])

    def test_basis_state_projector(self):
        psi = PureState.basis(4, 2)
        assert psi.projector()[2, 2] == pytest.approx(1.0)
        assert np.trace(psi.projector()) == pytest.approx(1.0)

    def test_two_outcome_povm_probabilities(self):
        psi = PureState.basis(2, 0)
        povm = Povm.two_outcome(psi.projector())
        probs = povm.probabilities(DensityMatrix.maximally_mixed(2))
        assert probs == pytest.approx([0.5, 0.5])


class TestNorms:
    def test_schatten_norms_of_diagonal(self):
        X = np.diag([3.0, -4.0])
        assert schatten_norm(X, 1) == pytest.approx(7.0)
        assert schatten_norm(X, 2) == pytest.approx(5.0)
        assert schatten_norm(X, np.inf) == pytest.approx(4.0)
        assert schatten_norm(X, "inf") == pytest.approx(4.0)

    def test_unsupported_index(self):
        with pytest.raises(InvalidInputError):
            schatten_norm(np.eye(2), 3)

    def test_hs_inner_is_conjugate_linear_in_first_slot(self):
        X = np.array([[1j, 0], [0, 0]])
        assert hs_inner(X, np.eye(2)) == pytest.approx(-1j)

    def test_hs_inner_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            hs_inner(np.eye(2), np.eye(3))

    def test_holder(self, rng, dimension):
        A = rng.standard_normal((dimension, dimension)) + 1j * rng.standard_normal((dimension, dimension))
        B = rng.standard_normal((dimension, dimension))
        lhs = abs(hs_inner(A, B))
        for p, q in ((1, np.inf), (2, 2), (np.inf, 1)):
            assert lhs <= schatten_norm(A, p) * schatten_norm(B, q) + 1e-9

    def test_rank_one_difference(self, rng, dimension):
        psi, phi = sample_haar_state(rng, dimension), sample_haar_state(rng, dimension)
        X = psi.projector() - phi.projector()
        gap = np.sqrt(1 - abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)
        assert schatten_norm(X, 1) == pytest.approx(2 * gap, abs=1e-10)
        assert schatten_norm(X, 2) == pytest.approx(np.sqrt(2) * gap, abs=1e-10)
        assert schatten_norm(X, np.inf) == pytest.approx(gap, abs=1e-10)


class TestDistances:
    def test_orthogonal_states(self):
        rho, sigma = PureState.basis(2, 0).density(), PureState.basis(2, 1).density()
        assert trace_distance(rho, sigma) == pytest.approx(1.0)
        assert fidelity(rho, sigma) == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            trace_distance(DensityMatrix.maximally_mixed(2), DensityMatrix.maximally_mixed(4))

    def test_fuchs_van_de_graaf(self, rng, dimension):
        for _ in range(20):
            rho, sigma = sample_density_matrix(rng, dimension), sample_density_matrix(rng, dimension)
            F = fidelity(rho, sigma)
            lower, upper = infidelity_trace_distance_bounds(F)
            T = trace_distance(rho, sigma)
            assert lower - 1e-9 <= T <= upper + 1e-9

    def test_pure_states_saturate_upper_bound(self, rng, dimension):
        psi, phi = sample_haar_state(rng, dimension), sample_haar_state(rng, dimension)
        F = pure_state_fidelity(psi, phi.density())
        assert trace_distance(psi, phi) == pytest.approx(np.sqrt(1 - F), abs=1e-10)

    def test_fidelity_symmetric(self, rng):
        rho, sigma = sample_density_matrix(rng, 3), sample_density_matrix(rng, 3)
        assert fidelity(rho, sigma) == pytest.approx(fidelity(sigma, rho), abs=1e-9)

    def test_positive_part_projector_attains_trace_distance(self, rng, dimension):
        rho, sigma = sample_density_matrix(rng, dimension), sample_density_matrix(rng, dimension)
        delta = rho.matrix - sigma.matrix
        P = projector_positive_part(delta)
        assert np.real(np.trace(P @ delta)) == pytest.approx(trace_distance(rho, sigma), abs=1e-10)

    def test_bures_of_identical_states(self, rng):
        rho = sample_density_matrix(rng, 2)
        assert bures_distance(rho, rho) == pytest.approx(0.0, abs=1e-6)
        assert bures_angle(rho, rho) == pytest.approx(0.0, abs=1e-6)

    def test_fidelity_bounds_reject_out_of_range(self):
        with pytest.raises(InvalidInputError):
            infidelity_trace_distance_bounds(1.5)


class TestTensorAlgebra:
    def test_psd_sqrt(self, rng):
        rho = sample_density_matrix(rng, 4)
        root = psd_sqrt(rho.matrix)
        assert np.allclose(root @ root, rho.matrix, atol=1e-10)

    def test_psd_sqrt_rejects_indefinite(self):
        with pytest.raises(InvalidInputError):
            psd_sqrt(np.diag([1.0, -1.0]))

    def test_partial_trace_of_product(self, rng):
        a, b = sample_density_matrix(rng, 2), sample_density_matrix(rng, 3)
        joint = kron(a.matrix, b.matrix)
        assert np.allclose(partial_trace(joint, (2, 3), 1), a.matrix)
        assert np.allclose(partial_trace(joint, (2, 3), 0), b.matrix)

    def test_swap_trick(self, rng, dimension):
        A = rng.standard_normal((dimension, dimension))
        B = rng.standard_normal((dimension, dimension))
        F = swap_operator(dimension)
        assert np.trace(F @ np.kron(A, B)) == pytest.approx(np.trace(A @ B))

    def test_vectorize_is_column_stacking(self):
        X = np.array([[1, 2], [3, 4]])
        assert vectorize(X) == pytest.approx([1, 3, 2, 4])
        assert np.array_equal(unvectorize(vectorize(X), (2, 2)), X)

    def test_vec_of_product(self, rng):
        A, B, C = (rng.standard_normal((3, 3)) for _ in range(3))
        assert np.allclose(vectorize(A @ B @ C), np.kron(C.T, A) @ vectorize(B))


class TestPredicates:
    def test_predicates(self):
        H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        assert is_hermitian(H) and is_unitary(H)
        assert not is_psd(H)
        assert is_psd(np.eye(2))
        assert not is_unitary(2 * np.eye(2))
