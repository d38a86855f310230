"""Seeded random streams, Haar samplers, unitary ensembles and moment operators."""

import logging
import math
import zlib
from dataclasses import dataclass
from functools import lru_cache, reduce
from itertools import permutations

import numpy as np
import scipy.linalg
from scipy.special import comb

from . import settings
from .errors import BudgetExceededError, DesignCheckError, InvalidInputError
from .linalg import DensityMatrix, PureState, as_square, is_unitary

logger = logging.getLogger(__name__)

ENSEMBLE_KINDS = ("haar", "clifford", "explicit")


def _stream_key(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise InvalidInputError(f"stream keys must be non-negative, got {key}")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


@dataclass(frozen=True)
class SeededRng:
    """A (seed, stream) pair; the same pair always yields the same sample sequence."""

    seed: int = settings.DEFAULT_SEED
    stream: tuple = ()

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "stream", tuple(_stream_key(k) for k in self.stream))

    def generator(self):
        """Fresh numpy Generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, *keys):
        return SeededRng(self.seed, self.stream + tuple(_stream_key(k) for k in keys))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    if rng is None:
        return SeededRng().generator()
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng)).generator()
    raise InvalidInputError(f"cannot build a random generator from {type(rng).__name__}")


def _check_dim(d):
    if int(d) < 1:
        raise InvalidInputError(f"dimension must be at least 1, got {d}")
    return int(d)


def _check_operator_budget(size):
    if size * size > settings.MAX_OPERATOR_ENTRIES:
        raise BudgetExceededError(
            f"operator of size {size}x{size} exceeds the {settings.MAX_OPERATOR_ENTRIES} entry budget"
        )


# --- HAAR SAMPLERS ---

def sample_haar_unitary(rng, d):
    """QR of a complex Ginibre matrix with the phases of R's diagonal divided out."""
    d = _check_dim(d)
    gen = as_generator(rng)
    Z = (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))) / np.sqrt(2)
    Q, R = scipy.linalg.qr(Z)
    diag = np.diag(R)
    return Q * (diag / np.abs(diag))


def sample_haar_state(rng, d):
    # Normalised Gaussian vector; same law as a column of a Haar unitary.
    d = _check_dim(d)
    gen = as_generator(rng)
    vec = gen.standard_normal(d) + 1j * gen.standard_normal(d)
    return PureState.normalized(vec)


def sample_density_matrix(rng, d, rank=None):
    """Random mixed state G G^dagger / Tr from a d x rank Ginibre matrix."""
    d = _check_dim(d)
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise InvalidInputError(f"rank must lie in [1, {d}], got {rank}")
    gen = as_generator(rng)
    G = gen.standard_normal((d, rank)) + 1j * gen.standard_normal((d, rank))
    rho = G @ G.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


# --- PERMUTATIONS & SYMMETRIC SUBSPACE ---

def tensor_power(U, k):
    return reduce(np.kron, [np.asarray(U, dtype=complex)] * k)


def permutation_operator(d, perm):
    """Operator permuting the tensor factors of (C^d)^{(x)k} according to `perm`."""
    d = _check_dim(d)
    perm = tuple(int(p) for p in perm)
    k = len(perm)
    if sorted(perm) != list(range(k)):
        raise InvalidInputError(f"{perm} is not a permutation")
    size = d**k
    _check_operator_budget(size)
    digits = np.array(np.unravel_index(np.arange(size), (d,) * k))
    target = np.ravel_multi_index(tuple(digits[list(perm)]), (d,) * k)
    P = np.zeros((size, size), dtype=complex)
    P[target, np.arange(size)] = 1.0
    return P


def sym_projector(d, k):
    """P_sym = (1/k!) sum over permutations of the k tensor factors."""
    d = _check_dim(d)
    if k < 1:
        raise InvalidInputError(f"tensor power must be at least 1, got {k}")
    _check_operator_budget(d**k)
    total = sum(permutation_operator(d, perm) for perm in permutations(range(k)))
    return total / math.factorial(k)


def sym_dimension(d, k):
    return int(comb(k + d - 1, k, exact=True))


def haar_moment_operator(d, k, A):
    """Closed-form Haar k-th moment E[U^{(x)k} A U^{dagger (x)k}].

    k = 1 and k = 2 accept any input; for k >= 3 the input must be supported on
    the symmetric subspace, where the result is Tr(A)/Tr(P_sym) * P_sym.
    """
    d = _check_dim(d)
    A = as_square(A, "moment input")
    size = d**k
    if A.shape[0] != size:
        raise InvalidInputError(f"input must be {size}x{size} for d={d}, k={k}")
    _check_operator_budget(size)
    if k == 1:
        return np.trace(A) * np.eye(d) / d
    if k == 2:
        F = permutation_operator(d, (1, 0))
        P_sym = (np.eye(size) + F) / 2
        P_anti = (np.eye(size) - F) / 2
        out = 2 / (d * (d + 1)) * np.trace(A @ P_sym) * P_sym
        if d > 1:
            out = out + 2 / (d * (d - 1)) * np.trace(A @ P_anti) * P_anti
        return out
    P = sym_projector(d, k)
    if np.max(np.abs(P @ A @ P - A)) > settings.TAU_DESIGN:
        raise InvalidInputError("closed form for k >= 3 needs an input on the symmetric subspace")
    return np.trace(A) / sym_dimension(d, k) * P


# --- ENSEMBLES ---

@dataclass(frozen=True, eq=False)
class UnitaryEnsemble:
    """Probability measure on U(d): Haar, uniform Clifford, or a weighted explicit set."""

    kind: str
    dim: int
    unitaries: tuple = None
    weights: tuple = None
    n_qubits: int = None

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise InvalidInputError(f"unknown ensemble kind {self.kind!r}")
        dim = _check_dim(self.dim)
        if self.kind == "clifford":
            n = int(round(math.log2(dim)))
            if 2**n != dim:
                raise InvalidInputError(f"Clifford ensemble needs a power-of-two dimension, got {dim}")
            object.__setattr__(self, "n_qubits", n)
        if self.kind == "explicit":
            if not self.unitaries:
                raise InvalidInputError("explicit ensemble needs at least one unitary")
            mats = tuple(as_square(U, "ensemble element") for U in self.unitaries)
            for U in mats:
                if U.shape[0] != dim or not is_unitary(U, settings.TAU_UNITARY_CHECK):
                    raise InvalidInputError("explicit ensemble elements must be d x d unitaries")
            if self.weights is None:
                w = np.full(len(mats), 1.0 / len(mats))
            else:
                w = np.asarray(self.weights, dtype=float)
                if w.shape != (len(mats),) or np.any(w < 0) or abs(w.sum() - 1) > settings.TAU_NORM:
                    raise InvalidInputError("ensemble weights must form a probability vector")
            object.__setattr__(self, "unitaries", mats)
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "dim", dim)

    @classmethod
    def haar(cls, d):
        return cls("haar", d)

    @classmethod
    def clifford(cls, n_qubits):
        return cls("clifford", 2**int(n_qubits))

    @classmethod
    def explicit(cls, unitaries, weights=None):
        mats = tuple(unitaries)
        if not mats:
            raise InvalidInputError("explicit ensemble needs at least one unitary")
        return cls("explicit", np.asarray(mats[0]).shape[0], mats, weights)

    @property
    def is_finite(self):
        return self.kind == "explicit" or (
            self.kind == "clifford" and self.n_qubits <= settings.MAX_ENUMERATED_CLIFFORD_QUBITS
        )

    def as_explicit(self):
        if self.kind == "explicit":
            return self
        if self.kind == "clifford" and self.is_finite:
            return _explicit_clifford_ensemble(self.n_qubits)
        raise BudgetExceededError(f"{self.kind} ensemble on dimension {self.dim} has no explicit form")

    def sample(self, rng):
        """One dense unitary drawn from the ensemble."""
        gen = as_generator(rng)
        if self.kind == "haar":
            return sample_haar_unitary(gen, self.dim)
        if self.kind == "clifford":
            from .stabilizer import sample_clifford

            return sample_clifford(gen, self.n_qubits).to_dense()
        index = gen.choice(len(self.unitaries), p=np.asarray(self.weights))
        return self.unitaries[index]


def _weighted_conjugation(weights, stack, A):
    """sum_n w_n V_n A V_n^dagger over a stacked array of V_n."""
    conj = np.matmul(np.matmul(stack, A), stack.conj().transpose(0, 2, 1))
    return np.tensordot(weights, conj, axes=1)


@lru_cache(maxsize=None)
def _explicit_clifford_ensemble(n_qubits):
    from .stabilizer import enumerate_cliffords

    return UnitaryEnsemble.explicit([c.to_dense() for c in enumerate_cliffords(n_qubits)])


def moment_operator_empirical(ensemble, k, A, n_samples=None, rng=None):
    """E[U^{(x)k} A U^{dagger (x)k}]: exact weighted sum for finite ensembles, Monte Carlo otherwise."""
    size = ensemble.dim**k
    _check_operator_budget(size)
    A = as_square(A, "moment input")
    if A.shape[0] != size:
        raise InvalidInputError(f"input must be {size}x{size}")
    if ensemble.is_finite:
        explicit = ensemble.as_explicit()
        stack = np.array([tensor_power(U, k) for U in explicit.unitaries])
        w = np.asarray(explicit.weights)
        return _weighted_conjugation(w, stack, A)
    if not n_samples or n_samples < 1:
        raise InvalidInputError("Monte-Carlo moment operator needs n_samples >= 1")
    gen = as_generator(rng)
    out = np.zeros((size, size), dtype=complex)
    for _ in range(int(n_samples)):
        V = tensor_power(ensemble.sample(gen), k)
        out += V @ A @ V.conj().T
    return out / n_samples


# --- DESIGN VERIFICATION ---

@dataclass(frozen=True)
class DesignReport:
    k: int
    max_deviation: float
    passed: bool
    n_probes: int
    trusted: bool = False

    def raise_if_failed(self):
        if not self.passed:
            raise DesignCheckError(
                f"ensemble is not a {self.k}-design (max deviation {self.max_deviation:.3g})"
            )
        return self


def design_probes(d, k):
    """Spanning probe inputs: matrix units for k <= 2, symmetric product probes otherwise."""
    size = d**k
    _check_operator_budget(size)
    if k <= 2:
        probes = []
        for a in range(size):
            for b in range(size):
                E = np.zeros((size, size), dtype=complex)
                E[a, b] = 1.0
                probes.append(E)
        return probes
    gen = SeededRng(settings.DEFAULT_SEED, ("design-probes", d, k)).generator()
    vectors = [np.eye(d)[i] for i in range(d)]
    vectors += [sample_haar_state(gen, d).amplitudes for _ in range(sym_dimension(d, k) ** 2)]
    return [tensor_power(np.outer(v, v.conj()), k) for v in vectors]


def verify_design(ensemble, k, tol=settings.TAU_DESIGN):
    """Compares exact moment operators with the Haar closed forms on a spanning probe set."""
    if ensemble.kind == "haar":
        return DesignReport(k, 0.0, True, 0, trusted=True)
    if ensemble.kind == "clifford" and ensemble.n_qubits > 1 and (k >= 3 or not ensemble.is_finite):
        # third moments of the multi-qubit group are too large to enumerate
        if k > 3:
            raise DesignCheckError("the multi-qubit Clifford group is only a 3-design")
        return DesignReport(k, 0.0, True, 0, trusted=True)
    explicit = ensemble.as_explicit()
    d = explicit.dim
    stack = np.array([tensor_power(U, k) for U in explicit.unitaries])
    w = np.asarray(explicit.weights)
    worst = 0.0
    probes = design_probes(d, k)
    for A in probes:
        emp = _weighted_conjugation(w, stack, A)
        worst = max(worst, float(np.max(np.abs(emp - haar_moment_operator(d, k, A)))))
    report = DesignReport(k, worst, worst <= tol, len(probes))
    logger.debug("design check k=%d d=%d: deviation %.3g over %d probes", k, d, worst, len(probes))
    return report


def verify_state_design(states, k, weights=None, tol=settings.TAU_DESIGN):
    """Checks sum_i w_i |s_i><s_i|^{(x)k} against P_sym / dim Sym^k."""
    vecs = [s.amplitudes if isinstance(s, PureState) else PureState(s).amplitudes for s in states]
    if not vecs:
        raise InvalidInputError("state design check needs at least one state")
    d = vecs[0].shape[0]
    _check_operator_budget(d**k)
    w = np.full(len(vecs), 1.0 / len(vecs)) if weights is None else np.asarray(weights, dtype=float)
    avg = sum(wi * tensor_power(np.outer(v, v.conj()), k) for wi, v in zip(w, vecs))
    target = sym_projector(d, k) / sym_dimension(d, k)
    worst = float(np.max(np.abs(avg - target)))
    return DesignReport(k, worst, worst <= tol, 1)
