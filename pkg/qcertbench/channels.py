"""Quantum channels, their representations, and process-quality measures.

Vectorisation is column stacking throughout. The Choi matrix is the unnormalised
sum_ij X(|i><j|) (x) |i><j| with the output factor first; the Choi state is that
matrix divided by the input dimension.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import settings
from .errors import DimensionMismatchError, InvalidInputError, NotCPTError
from .linalg import (
    DensityMatrix,
    as_matrix,
    as_square,
    is_unitary,
    kron,
    partial_trace,
    schatten_norm,
)
from .randomness import as_generator, sample_haar_state, sample_haar_unitary

logger = logging.getLogger(__name__)

CHANNEL_KINDS = ("identity", "depolarizing", "unitary", "bit_flip", "kraus", "choi")


def _check_choi_budget(d_in, d_out):
    size = d_in * d_out
    if size * size > settings.MAX_OPERATOR_ENTRIES:
        raise InvalidInputError(
            f"Choi matrix of a {d_in}->{d_out} channel exceeds the {settings.MAX_OPERATOR_ENTRIES} entry budget"
        )


def _flip_qubit(A, qubit, n):
    """X_q A X_q for an operator on n qubits."""
    idx = np.arange(2**n) ^ (1 << (n - 1 - qubit))
    return A[np.ix_(idx, idx)]


@dataclass(frozen=True, eq=False)
class Channel:
    """Linear map L(C^dim_in) -> L(C^dim_out).

    Structured kinds (identity, depolarizing, unitary, bit_flip) act without
    building a Choi matrix, so they stay usable at large dimension.
    """

    dim_in: int
    dim_out: int
    kind: str = "choi"
    params: tuple = ()
    kraus_ops: tuple = None
    choi_matrix: np.ndarray = field(default=None, repr=False)
    trace_preserving: bool = True

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise InvalidInputError(f"unknown channel kind {self.kind!r}")
        if self.dim_in < 1 or self.dim_out < 1:
            raise InvalidInputError("channel dimensions must be positive")

    # -- constructors --

    @classmethod
    def from_kraus(cls, kraus, trace_preserving=None):
        ops = tuple(as_matrix(K, "Kraus operator") for K in kraus)
        if not ops:
            raise InvalidInputError("channel needs at least one Kraus operator")
        d_out, d_in = ops[0].shape
        if any(K.shape != (d_out, d_in) for K in ops):
            raise DimensionMismatchError("Kraus operators have different shapes")
        gram = sum(K.conj().T @ K for K in ops)
        tp = bool(np.max(np.abs(gram - np.eye(d_in))) <= settings.TAU_TP)
        if trace_preserving and not tp:
            raise NotCPTError("Kraus operators do not satisfy sum K^dagger K = 1")
        if not tp and np.linalg.eigvalsh((gram + gram.conj().T) / 2).max() > 1 + settings.TAU_TP:
            logger.debug("Kraus family is trace-increasing")
        return cls(d_in, d_out, "kraus", (), ops, None, tp)

    @classmethod
    def from_choi(cls, choi, dim_in, dim_out=None):
        """Validates CP and records whether the map is trace preserving."""
        dim_out = dim_in if dim_out is None else dim_out
        J = as_square(choi, "Choi matrix")
        if J.shape[0] != dim_in * dim_out:
            raise DimensionMismatchError(f"Choi matrix has size {J.shape[0]}, expected {dim_in * dim_out}")
        if np.max(np.abs(J - J.conj().T)) > settings.TAU_HERM * max(1.0, dim_in):
            raise NotCPTError("Choi matrix is not Hermitian")
        J = (J + J.conj().T) / 2
        if np.linalg.eigvalsh(J).min() < -settings.TAU_PSD * max(1.0, dim_in):
            raise NotCPTError("Choi matrix is not positive semidefinite")
        out_trace = np.einsum("aiaj->ij", J.reshape(dim_out, dim_in, dim_out, dim_in))
        tp = bool(np.max(np.abs(out_trace - np.eye(dim_in))) <= settings.TAU_TP)
        return cls(dim_in, dim_out, "choi", (), None, J, tp)

    @classmethod
    def from_liouville(cls, L, dim_in, dim_out=None):
        dim_out = dim_in if dim_out is None else dim_out
        L = as_matrix(L, "Liouville matrix")
        if L.shape != (dim_out**2, dim_in**2):
            raise DimensionMismatchError(f"Liouville matrix has shape {L.shape}")
        J4 = L.reshape(dim_out, dim_out, dim_in, dim_in).transpose(1, 3, 0, 2)
        return cls.from_choi(J4.reshape(dim_out * dim_in, dim_out * dim_in), dim_in, dim_out)

    @classmethod
    def from_descriptor(cls, desc, dim):
        """Builds a channel from a JSON descriptor {"kind": ..., params...}."""
        if not isinstance(desc, dict) or "kind" not in desc:
            raise InvalidInputError("channel descriptor must be an object with a 'kind' field")
        kind = desc["kind"]
        if kind == "identity":
            return identity_channel(dim)
        if kind == "depolarizing":
            return depolarizing(dim, _number(desc, "p"))
        if kind == "unitary":
            return unitary_channel(parse_complex_matrix(desc.get("matrix")))
        if kind == "bit_flip":
            return bit_flip(_number(desc, "p"), _qubits_for(dim))
        if kind == "amplitude_damping":
            gamma = _number(desc, "gamma")
            single = amplitude_damping(gamma)
            if dim == 2:
                return single
            out = single
            for _ in range(_qubits_for(dim) - 1):
                out = out.tensor(single)
            return out
        if kind == "kraus_list":
            ops = desc.get("kraus")
            if not isinstance(ops, list) or not ops:
                raise InvalidInputError("kraus_list descriptor needs a non-empty 'kraus' list")
            ch = cls.from_kraus([parse_complex_matrix(K) for K in ops])
            if ch.dim_in != dim:
                raise DimensionMismatchError(f"Kraus operators act on dimension {ch.dim_in}, expected {dim}")
            return ch
        raise InvalidInputError(f"unknown channel kind {kind!r}")

    # -- representations --

    @cached_property
    def choi(self):
        if self.choi_matrix is not None:
            return self.choi_matrix
        _check_choi_budget(self.dim_in, self.dim_out)
        d = self.dim_in
        if self.kind == "identity":
            omega = np.eye(d).ravel()
            return np.outer(omega, omega).astype(complex)
        if self.kind == "depolarizing":
            p = self.params[0]
            omega = np.eye(d).ravel()
            return p * np.outer(omega, omega) + (1 - p) / d * np.eye(d * d, dtype=complex)
        if self.kind == "unitary":
            vec = self.params[0].ravel()
            return np.outer(vec, vec.conj())
        if self.kraus_ops is not None:
            vecs = np.array([K.ravel() for K in self.kraus_ops])
            return vecs.T @ vecs.conj()
        J = np.zeros((self.dim_out * d, self.dim_out * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d), dtype=complex)
                E[i, j] = 1.0
                J += np.kron(self.apply_operator(E), E)
        return J

    @cached_property
    def kraus(self):
        """Kraus operators (given, or from the Choi eigendecomposition)."""
        if self.kraus_ops is not None:
            return self.kraus_ops
        if self.kind in ("identity", "unitary"):
            return (np.eye(self.dim_in, dtype=complex) if self.kind == "identity" else self.params[0],)
        w, V = np.linalg.eigh(self.choi)
        cutoff = settings.TAU_PSD * max(1.0, w.max())
        return tuple(
            np.sqrt(lam) * V[:, k].reshape(self.dim_out, self.dim_in) for k, lam in enumerate(w) if lam > cutoff
        )

    @cached_property
    def liouville(self):
        """L with vec(X(A)) = L vec(A) for column-stacking vec."""
        J4 = self.choi.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        return J4.transpose(2, 0, 3, 1).reshape(self.dim_out**2, self.dim_in**2)

    # -- action --

    def apply_operator(self, A):
        A = as_square(A, "channel input")
        if A.shape[0] != self.dim_in:
            raise DimensionMismatchError(f"channel input has dimension {A.shape[0]}, expected {self.dim_in}")
        if self.kind == "identity":
            return A.copy()
        if self.kind == "depolarizing":
            p = self.params[0]
            return p * A + (1 - p) * np.trace(A) * np.eye(self.dim_in) / self.dim_in
        if self.kind == "unitary":
            U = self.params[0]
            return U @ A @ U.conj().T
        if self.kind == "bit_flip":
            p, n = self.params
            out = A
            for q in range(n):
                out = (1 - p) * out + p * _flip_qubit(out, q, n)
            return out
        if self.kraus_ops is not None:
            return sum(K @ A @ K.conj().T for K in self.kraus_ops)
        J4 = self.choi.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        return np.einsum("aibj,ij->ab", J4, A)

    def apply(self, rho):
        """Image of a density matrix; the channel must be trace preserving."""
        if not self.trace_preserving:
            raise NotCPTError("apply() needs a trace-preserving channel; use apply_operator()")
        m = rho.matrix if isinstance(rho, DensityMatrix) else rho
        return DensityMatrix(self.apply_operator(m))

    def __call__(self, rho):
        return self.apply(rho)

    # -- algebra --

    def compose(self, other):
        """self o other (other acts first)."""
        if other.dim_out != self.dim_in:
            raise DimensionMismatchError(f"cannot compose {self.dim_in}-input after {other.dim_out}-output")
        if self.kind == "identity":
            return other
        if other.kind == "identity":
            return self
        if self.kind == other.kind == "depolarizing":
            return depolarizing(self.dim_in, self.params[0] * other.params[0])
        if self.kind == other.kind == "unitary":
            return unitary_channel(self.params[0] @ other.params[0])
        return Channel.from_liouville(self.liouville @ other.liouville, other.dim_in, self.dim_out)

    def __matmul__(self, other):
        return self.compose(other)

    def tensor(self, other):
        if self.kind == other.kind == "unitary":
            return unitary_channel(np.kron(self.params[0], other.params[0]))
        ops = [np.kron(A, B) for A in self.kraus for B in other.kraus]
        return Channel.from_kraus(ops)

    def adjoint(self):
        """Heisenberg-picture map with Tr[E X(rho)] = Tr[X^dagger(E) rho]."""
        if self.kind in ("identity", "depolarizing", "bit_flip"):
            return self
        if self.kind == "unitary":
            return unitary_channel(self.params[0].conj().T)
        return Channel.from_kraus([K.conj().T for K in self.kraus])

    def __sub__(self, other):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionMismatchError("channel difference needs equal dimensions")
        return ChoiMap(self.choi - other.choi, self.dim_in, self.dim_out)

    # -- predicates --

    def is_cp(self):
        return bool(np.linalg.eigvalsh((self.choi + self.choi.conj().T) / 2).min() >= -settings.TAU_PSD)

    def is_tp(self):
        J4 = self.choi.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        return bool(np.max(np.abs(np.einsum("aiaj->ij", J4) - np.eye(self.dim_in))) <= settings.TAU_TP)

    def is_cptp(self):
        if self.kind in ("identity", "depolarizing", "unitary", "bit_flip"):
            return True
        return self.is_cp() and self.is_tp()

    def is_unital(self):
        return bool(np.max(np.abs(self.apply_operator(np.eye(self.dim_in)) - np.eye(self.dim_out))) <= settings.TAU_TP)


@dataclass(frozen=True, eq=False)
class ChoiMap:
    """Hermiticity-preserving map given only by its (unnormalised) Choi matrix, e.g. a channel difference."""

    choi: np.ndarray
    dim_in: int
    dim_out: int

    def trace_norm(self):
        return schatten_norm(self.choi / self.dim_in, 1)


def _number(desc, key):
    value = desc.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise InvalidInputError(f"channel parameter {key!r} must be a number")
    return float(value)


def _qubits_for(dim):
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise InvalidInputError(f"dimension {dim} is not a power of two")
    return n


def parse_complex_matrix(rows):
    """Matrix from nested lists whose entries are numbers or [re, im] pairs."""
    if not isinstance(rows, list) or not rows:
        raise InvalidInputError("matrix must be a non-empty list of rows")
    try:
        out = [[complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in row] for row in rows]
    except (TypeError, IndexError, ValueError) as exc:
        raise InvalidInputError(f"cannot parse matrix entries: {exc}") from exc
    return as_matrix(np.array(out, dtype=complex))


# --- STOCK CHANNELS ---

def identity_channel(d):
    return Channel(int(d), int(d), "identity")


def depolarizing(d, p):
    """D_p(X) = p X + (1 - p) Tr[X] 1/d, CPT for -1/(d^2 - 1) <= p <= 1."""
    d = int(d)
    p = float(p)
    low = -1.0 / (d * d - 1) if d > 1 else -np.inf
    if not low - settings.TAU_CLAMP <= p <= 1 + settings.TAU_CLAMP or not np.isfinite(p):
        raise NotCPTError(f"depolarizing parameter {p} outside the CPT range [{low:.6g}, 1]")
    return Channel(d, d, "depolarizing", (p,))


def unitary_channel(U):
    U = as_square(U, "unitary")
    if not is_unitary(U, settings.TAU_UNITARY_CHECK):
        raise NotCPTError("unitary channel needs a unitary matrix")
    U = U.copy()
    U.flags.writeable = False
    return Channel(U.shape[0], U.shape[0], "unitary", (U,))


def amplitude_damping(gamma):
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise NotCPTError(f"damping rate {gamma} outside [0, 1]")
    K0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    K1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return Channel.from_kraus([K0, K1], trace_preserving=True)


def bit_flip(p, n_qubits):
    """Independent X flip with probability p on each of n qubits (readout error)."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise NotCPTError(f"flip probability {p} outside [0, 1]")
    return Channel(2**n_qubits, 2**n_qubits, "bit_flip", (p, int(n_qubits)))


def random_channel(rng, d, n_kraus=2):
    """Kraus blocks of the first d columns of a Haar unitary on C^(d * n_kraus)."""
    gen = as_generator(rng)
    V = sample_haar_unitary(gen, d * n_kraus)[:, :d]
    return Channel.from_kraus([V[k * d:(k + 1) * d, :] for k in range(n_kraus)], trace_preserving=True)


# --- MEASURES ---

def choi_state(ch):
    if not ch.trace_preserving:
        raise NotCPTError("Choi state needs a trace-preserving channel")
    return DensityMatrix(ch.choi / ch.dim_in)


def _check_pair(a, b):
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise DimensionMismatchError(f"channels on {a.dim_in}->{a.dim_out} and {b.dim_in}->{b.dim_out}")
    if a.dim_in != a.dim_out:
        raise DimensionMismatchError("fidelity measures need channels with equal input and output dimension")


def entanglement_fidelity(a, b=None):
    """<J(a), J(b)> of the normalised Choi states; b defaults to the identity."""
    b = identity_channel(a.dim_in) if b is None else b
    _check_pair(a, b)
    d = a.dim_in
    return float(np.real(np.vdot(a.choi, b.choi))) / d**2


def avg_gate_fidelity(a, b=None):
    """F_avg(a, b) = (<a, b> + <a(1), b(1)>) / (d (d + 1)), closed form."""
    b = identity_channel(a.dim_in) if b is None else b
    _check_pair(a, b)
    d = a.dim_in
    inner = np.real(np.vdot(a.choi, b.choi))
    unital = np.real(np.vdot(a.apply_operator(np.eye(d)), b.apply_operator(np.eye(d))))
    return float((inner + unital) / (d * (d + 1)))


def effective_depol_parameter(ch):
    d = ch.dim_in
    if d == 1:
        return 1.0
    return (d * avg_gate_fidelity(ch) - 1) / (d - 1)


def unitarity(ch):
    """||P X P||_HS^2 / (d^2 - 1) with P the projector onto traceless operators."""
    d = ch.dim_in
    if d == 1:
        return 1.0
    one = np.eye(d).reshape(-1, order="F")
    P = np.eye(d * d) - np.outer(one, one) / d
    block = P @ ch.liouville @ P
    return float(np.real(np.vdot(block, block)) / (d * d - 1))


def unitarity_lower_bound(r, d):
    """(1 - d r / (d - 1))^2, the least unitarity compatible with infidelity r."""
    return (1 - d * r / (d - 1)) ** 2


def twirl(ch, ensemble, method="exact", n_samples=None, rng=None):
    """Average of U^dagger o X o U over the ensemble, computed on Liouville matrices."""
    d = ch.dim_in
    if ensemble.dim != d:
        raise DimensionMismatchError(f"ensemble on dimension {ensemble.dim}, channel on {d}")
    if method == "exact":
        if ensemble.kind == "haar":
            return depolarizing(d, effective_depol_parameter(ch))
        explicit = ensemble.as_explicit()
        mats, weights = explicit.unitaries, explicit.weights
    elif method == "mc":
        if not n_samples or n_samples < 1:
            raise InvalidInputError("Monte-Carlo twirl needs n_samples >= 1")
        gen = as_generator(rng)
        mats = [ensemble.sample(gen) for _ in range(int(n_samples))]
        weights = [1.0 / len(mats)] * len(mats)
    else:
        raise InvalidInputError(f"unknown twirl method {method!r}")
    L = ch.liouville
    total = np.zeros_like(L)
    for w, U in zip(weights, mats):
        L_U = np.kron(U.conj(), U)
        L_Udag = np.kron(U.T, U.conj().T)
        total += w * (L_Udag @ L @ L_U)
    return Channel.from_liouville(total, d)


# --- DIAMOND NORM ---

def diamond_distance_unitaries(U, V):
    """Half the diamond distance of two unitary channels, from the spectrum of U^dagger V."""
    U, V = as_square(U, "U"), as_square(V, "V")
    if U.shape != V.shape:
        raise DimensionMismatchError(f"unitaries of shape {U.shape} and {V.shape}")
    if not (is_unitary(U, settings.TAU_UNITARY_CHECK) and is_unitary(V, settings.TAU_UNITARY_CHECK)):
        raise InvalidInputError("diamond_distance_unitaries needs unitary inputs")
    angles = np.sort(np.angle(np.linalg.eigvals(U.conj().T @ V)))
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    arc = 2 * np.pi - gaps.max()
    dist = np.cos(arc / 2) if arc < np.pi else 0.0
    return float(np.sqrt(max(0.0, 1 - dist**2)))


def diamond_distance_brute_force(U, V, n_samples, rng):
    """Lower estimate of the same quantity: best of n random inputs on C^d (x) C^d."""
    U, V = as_square(U, "U"), as_square(V, "V")
    d = U.shape[0]
    W = U.conj().T @ V
    gen = as_generator(rng)
    best = 0.0
    for _ in range(int(n_samples)):
        M = sample_haar_state(gen, d * d).amplitudes.reshape(d, d)
        overlap = np.vdot(M, W @ M)
        best = max(best, float(np.sqrt(max(0.0, 1 - abs(overlap) ** 2))))
    return best


def diamond_trace_bounds(diff):
    """(||J||_1, d ||J||_1) bracketing the full diamond norm of a Hermiticity-preserving map."""
    if isinstance(diff, Channel):
        diff = ChoiMap(diff.choi, diff.dim_in, diff.dim_out)
    value = diff.trace_norm()
    return value, diff.dim_in * value


def infidelity_diamond_bounds(ch):
    """Bounds on half the diamond distance to the identity from r = 1 - F_avg."""
    d = ch.dim_in
    r = max(0.0, 1 - avg_gate_fidelity(ch))
    return (d + 1) / d * r, float(np.sqrt(d * (d + 1) * r))


def _clamped_sqrt(arg, name):
    if arg < -settings.TAU_CLAMP:
        raise InvalidInputError(f"{name} = {arg:.3g} is negative beyond rounding")
    return float(np.sqrt(max(arg, 0.0)))


def composite_param_bound(p_xy, p_y, u_y):
    """(center, halfwidth) bracketing p(X) from p(XY), p(Y) and u(Y)."""
    if u_y <= 0:
        raise InvalidInputError(f"unitarity must be positive, got {u_y}")
    center = p_xy * p_y / u_y
    halfwidth = _clamped_sqrt(1 - p_y**2 / u_y, "1 - p_y^2/u_y") * _clamped_sqrt(
        1 - p_xy**2 / u_y, "1 - p_xy^2/u_y"
    )
    return float(center), halfwidth


# --- NOISE MODEL ---

@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Gate-independent noise after every gate plus SPAM channels and per-gate overrides."""

    dim: int
    gate_noise: Channel = None
    prep_error: Channel = None
    meas_error: Channel = None
    gate_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        d = int(self.dim)
        for name in ("gate_noise", "prep_error", "meas_error"):
            ch = getattr(self, name)
            object.__setattr__(self, name, identity_channel(d) if ch is None else self._checked(name, ch, d))
        overrides = {str(k): self._checked(f"gate_overrides.{k}", ch, d) for k, ch in self.gate_overrides.items()}
        object.__setattr__(self, "gate_overrides", overrides)

    @staticmethod
    def _checked(name, ch, d):
        if ch.dim_in != d or ch.dim_out != d:
            raise DimensionMismatchError(f"{name} acts on {ch.dim_in}->{ch.dim_out}, device dimension is {d}")
        if not ch.is_cptp():
            raise NotCPTError(f"{name} is not completely positive and trace preserving")
        return ch

    @classmethod
    def noiseless(cls, d):
        return cls(d)

    @classmethod
    def from_descriptor(cls, desc, d):
        desc = desc or {}
        parts = {
            key: Channel.from_descriptor(desc[key], d)
            for key in ("gate_noise", "prep_error", "meas_error")
            if key in desc
        }
        overrides = {k: Channel.from_descriptor(v, d) for k, v in (desc.get("gate_overrides") or {}).items()}
        return cls(d, gate_overrides=overrides, **parts)

    def for_gate(self, gate_id):
        return self.gate_overrides.get(gate_id, self.gate_noise)

    @property
    def is_noiseless(self):
        chans = [self.gate_noise, self.prep_error, self.meas_error, *self.gate_overrides.values()]
        return all(ch.kind == "identity" for ch in chans)
