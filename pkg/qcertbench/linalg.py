"""Dense complex-matrix substrate: states, POVMs, norms and state distances."""

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from . import settings
from .errors import DimensionMismatchError, InvalidInputError


def as_matrix(X, name="matrix"):
    """Returns X as a finite 2-D complex array or raises InvalidInputError."""
    arr = np.asarray(X, dtype=complex)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def as_square(X, name="matrix"):
    arr = as_matrix(X, name)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    return arr


def _frozen(arr):
    out = np.array(arr, dtype=complex, copy=True)
    out.flags.writeable = False
    return out


def is_hermitian(X, tol=settings.TAU_HERM):
    arr = as_square(X)
    return bool(np.max(np.abs(arr - arr.conj().T)) <= tol)


def is_psd(X, tol=settings.TAU_PSD):
    arr = as_square(X)
    if not is_hermitian(arr, max(tol, settings.TAU_HERM)):
        return False
    return bool(np.linalg.eigvalsh((arr + arr.conj().T) / 2).min() >= -tol)


def is_unitary(U, tol=settings.TAU_UNIT):
    arr = as_square(U)
    eye = np.eye(arr.shape[0])
    return bool(np.max(np.abs(arr.conj().T @ arr - eye)) <= tol)


# --- STATES & MEASUREMENTS ---

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one positive semidefinite operator; validated and read-only."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_square(self.matrix, "density matrix")
        if np.max(np.abs(m - m.conj().T)) > settings.TAU_HERM:
            raise InvalidInputError("density matrix is not Hermitian")
        m = (m + m.conj().T) / 2
        if np.linalg.eigvalsh(m).min() < -settings.TAU_PSD:
            raise InvalidInputError("density matrix has negative eigenvalues")
        if abs(np.trace(m) - 1) > settings.TAU_UNIT:
            raise InvalidInputError(f"density matrix trace is {np.trace(m).real:.12g}, expected 1")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, psi):
        vec = PureState(psi).amplitudes if not isinstance(psi, PureState) else psi.amplitudes
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def maximally_mixed(cls, d):
        return cls(np.eye(d) / d)

    @classmethod
    def basis(cls, d, index=0):
        return PureState.basis(d, index).density()

    def purity(self):
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def expectation(self, A):
        """Tr[A rho]; real part for Hermitian A."""
        arr = as_square(A, "observable")
        _check_dims(arr.shape[0], self.dim)
        return complex(np.trace(arr @ self.matrix))

    def mix(self, weight, other):
        """weight * self + (1 - weight) * other."""
        return DensityMatrix(weight * self.matrix + (1 - weight) * other.matrix)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.amplitudes, dtype=complex)
        if vec.ndim == 2 and 1 in vec.shape:
            vec = vec.ravel()
        if vec.ndim != 1 or vec.size == 0:
            raise InvalidInputError(f"state vector must be 1-D, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise InvalidInputError("state vector has non-finite entries")
        if abs(np.linalg.norm(vec) - 1) > settings.TAU_NORM:
            raise InvalidInputError(f"state vector norm is {np.linalg.norm(vec):.15g}, expected 1")
        out = vec.copy()
        out.flags.writeable = False
        object.__setattr__(self, "amplitudes", out)

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    @classmethod
    def normalized(cls, vec):
        arr = np.asarray(vec, dtype=complex).ravel()
        norm = np.linalg.norm(arr)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidInputError("cannot normalise a zero or non-finite vector")
        return cls(arr / norm)

    @classmethod
    def basis(cls, d, index=0):
        if not 0 <= index < d:
            raise InvalidInputError(f"basis index {index} out of range for dimension {d}")
        vec = np.zeros(d, dtype=complex)
        vec[index] = 1.0
        return cls(vec)

    def projector(self):
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self):
        return DensityMatrix(self.projector())


@dataclass(frozen=True, eq=False)
class Povm:
    """Measurement given by PSD effects summing to the identity."""

    effects: tuple
    labels: tuple = None

    def __post_init__(self):
        effects = [as_square(E, "POVM effect") for E in self.effects]
        if not effects:
            raise InvalidInputError("POVM needs at least one effect")
        d = effects[0].shape[0]
        for E in effects:
            _check_dims(E.shape[0], d)
            if not is_psd(E):
                raise InvalidInputError("POVM effect is not positive semidefinite")
        if np.max(np.abs(sum(effects) - np.eye(d))) > settings.TAU_UNIT:
            raise InvalidInputError("POVM effects do not sum to the identity")
        labels = tuple(str(i) for i in range(len(effects))) if self.labels is None else tuple(self.labels)
        if len(labels) != len(effects) or len(set(labels)) != len(labels):
            raise InvalidInputError("POVM labels must be unique, one per effect")
        object.__setattr__(self, "effects", tuple(_frozen(E) for E in effects))
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self):
        return self.effects[0].shape[0]

    @classmethod
    def computational_basis(cls, d, labels=None):
        effects = []
        for i in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, i] = 1.0
            effects.append(E)
        return cls(tuple(effects), labels)

    @classmethod
    def two_outcome(cls, M, labels=("pass", "fail")):
        """{M, 1 - M} for an effect 0 <= M <= 1."""
        arr = as_square(M, "effect")
        return cls((arr, np.eye(arr.shape[0]) - arr), labels)

    def probabilities(self, rho):
        """Born-rule outcome distribution, clipped and renormalised against rounding."""
        state = _as_density(rho)
        _check_dims(state.dim, self.dim)
        probs = np.array([np.real(np.vdot(E, state.matrix)) for E in self.effects])
        probs = np.clip(probs, 0.0, None)
        return probs / probs.sum()


def _check_dims(a, b):
    if a != b:
        raise DimensionMismatchError(f"dimension mismatch: {a} vs {b}")


def _as_density(state):
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.density()
    return DensityMatrix(state)


# --- NORMS & DISTANCES ---

def schatten_norm(X, p):
    """Schatten p-norm, p in {1, 2, inf}."""
    sv = scipy.linalg.svdvals(as_matrix(X))
    if p == 1:
        return float(np.sum(sv))
    if p == 2:
        return float(np.sqrt(np.sum(sv**2)))
    if p in (np.inf, "inf"):
        return float(np.max(sv))
    raise InvalidInputError(f"unsupported Schatten index p={p!r}")


def hs_inner(X, Y):
    """Hilbert-Schmidt inner product Tr[X^dagger Y]."""
    a, b = as_matrix(X), as_matrix(Y)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def psd_sqrt(X):
    """Square root of a PSD matrix; eigenvalues within -TAU_PSD are clamped to 0."""
    arr = as_square(X)
    if not is_hermitian(arr):
        raise InvalidInputError("matrix square root needs a Hermitian input")
    w, V = np.linalg.eigh((arr + arr.conj().T) / 2)
    if w.min() < -settings.TAU_PSD:
        raise InvalidInputError(f"matrix is not PSD (min eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def projector_positive_part(X):
    """Orthogonal projector onto the span of eigenvectors with positive eigenvalue."""
    arr = as_square(X)
    if not is_hermitian(arr):
        raise InvalidInputError("positive part needs a Hermitian input")
    w, V = np.linalg.eigh((arr + arr.conj().T) / 2)
    keep = V[:, w > 0]
    return keep @ keep.conj().T


def trace_distance(rho, sigma):
    r, s = _as_density(rho), _as_density(sigma)
    _check_dims(r.dim, s.dim)
    w = np.linalg.eigvalsh(r.matrix - s.matrix)
    return float(np.clip(0.5 * np.sum(np.abs(w)), 0.0, 1.0))


def pure_state_fidelity(psi, sigma):
    """<psi|sigma|psi> for a pure psi."""
    vec = psi.amplitudes if isinstance(psi, PureState) else PureState(psi).amplitudes
    s = _as_density(sigma)
    _check_dims(vec.shape[0], s.dim)
    return float(np.clip(np.real(vec.conj() @ s.matrix @ vec), 0.0, 1.0))


def fidelity(rho, sigma):
    """Squared fidelity ||sqrt(rho) sqrt(sigma)||_1^2."""
    if isinstance(rho, PureState):
        return pure_state_fidelity(rho, sigma)
    if isinstance(sigma, PureState):
        return pure_state_fidelity(sigma, rho)
    r, s = _as_density(rho), _as_density(sigma)
    _check_dims(r.dim, s.dim)
    overlap = np.sum(scipy.linalg.svdvals(psd_sqrt(r.matrix) @ psd_sqrt(s.matrix)))
    return float(np.clip(overlap**2, 0.0, 1.0))


def infidelity_trace_distance_bounds(F):
    """Fuchs-van de Graaf interval (1 - sqrt F, sqrt(1 - F)) for the trace distance."""
    if not 0.0 <= F <= 1.0 + settings.TAU_CLAMP:
        raise InvalidInputError(f"fidelity {F} outside [0, 1]")
    F = min(F, 1.0)
    return float(1.0 - np.sqrt(F)), float(np.sqrt(1.0 - F))


def bures_distance(rho, sigma):
    F = fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - np.sqrt(F)))))


def bures_angle(rho, sigma):
    return float(np.arccos(np.clip(np.sqrt(fidelity(rho, sigma)), 0.0, 1.0)))


# --- TENSOR ALGEBRA ---

def kron(*ops):
    if not ops:
        raise InvalidInputError("kron needs at least one operand")
    return reduce(np.kron, [np.asarray(op, dtype=complex) for op in ops])


def partial_trace(X, dims, which):
    """Traces out the subsystems listed in `which` (int or iterable) of a square X."""
    arr = as_square(X)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != arr.shape[0]:
        raise DimensionMismatchError(f"subsystem dims {dims} do not multiply to {arr.shape[0]}")
    traced = sorted({which} if isinstance(which, (int, np.integer)) else set(which), reverse=True)
    if any(not 0 <= k < len(dims) for k in traced):
        raise InvalidInputError(f"subsystem index out of range: {traced}")
    t = arr.reshape(dims + dims)
    n_left = len(dims)
    for k in traced:
        t = np.trace(t, axis1=k, axis2=k + n_left)
        n_left -= 1
    keep = [d for i, d in enumerate(dims) if i not in traced]
    size = int(np.prod(keep)) if keep else 1
    return t.reshape(size, size)


def swap_operator(d):
    """Flip operator F|i, j> = |j, i> on C^d (x) C^d."""
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    i, j = np.divmod(np.arange(d * d), d)
    F = np.zeros((d * d, d * d), dtype=complex)
    F[j * d + i, i * d + j] = 1.0
    return F


def vectorize(X):
    """Column-stacking vec, so vec(ABC) = (C^T (x) A) vec(B)."""
    return as_matrix(X).reshape(-1, order="F")


def unvectorize(v, shape):
    return np.asarray(v, dtype=complex).reshape(shape, order="F")
