"""Pauli strings, stabilizer groups and states, and Clifford tableaux.

Conventions: qubit 0 is the leftmost letter of a label and the most significant
bit of a computational-basis index. A PauliString with bits (x, z) and phase
exponent e is the operator i^e times the tensor product of the letters
I (0,0), X (1,0), Y (1,1), Z (0,1), with Y the usual Hermitian Pauli matrix.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product

import numpy as np

from . import settings
from .errors import BudgetExceededError, InvalidGroupError, InvalidInputError
from .linalg import DensityMatrix, PureState, as_square
from .randomness import SeededRng, as_generator

logger = logging.getLogger(__name__)

LETTERS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
BITS_TO_LETTER = {v: k for k, v in LETTERS.items()}
PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}
PREFIX_PHASE = {"": 0, "+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
I_POWERS = np.array([1, 1j, -1, -1j])


def _popcount(arr, n_bits):
    arr = np.asarray(arr, dtype=np.int64)
    total = np.zeros_like(arr)
    for k in range(n_bits):
        total += (arr >> k) & 1
    return total


def _bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(value, n):
    return np.array([(value >> (n - 1 - j)) & 1 for j in range(n)], dtype=np.uint8)


def parse_bitstring(b, n):
    """Accepts '0101', an int, or a bit array; returns a uint8 array of length n."""
    if isinstance(b, str):
        if len(b) != n or set(b) - {"0", "1"}:
            raise InvalidInputError(f"bit string {b!r} is not {n} binary digits")
        return np.array([int(c) for c in b], dtype=np.uint8)
    if isinstance(b, (int, np.integer)):
        if not 0 <= b < 2**n:
            raise InvalidInputError(f"outcome index {b} out of range for {n} qubits")
        return _int_to_bits(int(b), n)
    arr = np.asarray(b, dtype=np.uint8)
    if arr.shape != (n,):
        raise InvalidInputError(f"bit vector must have length {n}")
    return arr


def _phase_g(x1, z1, x2, z2):
    """Per-qubit power of i picked up by sigma_(x1,z1) * sigma_(x2,z2)."""
    x1, z1, x2, z2 = (np.asarray(a, dtype=np.int64) for a in (x1, z1, x2, z2))
    return np.where(
        (x1 == 0) & (z1 == 0),
        0,
        np.where(
            (x1 == 1) & (z1 == 1),
            z2 - x2,
            np.where(x1 == 1, z2 * (2 * x2 - 1), x2 * (1 - 2 * z2)),
        ),
    )


# --- PAULI STRINGS ---

@dataclass(frozen=True, eq=False)
class PauliString:
    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint8).ravel() % 2
        z = np.asarray(self.z, dtype=np.uint8).ravel() % 2
        if x.shape != z.shape:
            raise InvalidInputError("x and z bit vectors must have equal length")
        x.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self):
        return self.x.shape[0]

    @classmethod
    def from_label(cls, label):
        """Parses '+XIZY', '-ZZ', '+iX' or a bare 'XYZ'."""
        text = label.strip()
        head = len(text) - len(text.lstrip("+-i"))
        prefix, letters = text[:head], text[head:]
        if prefix not in PREFIX_PHASE or not letters or set(letters) - set(LETTERS):
            raise InvalidInputError(f"cannot parse Pauli label {label!r}")
        bits = np.array([LETTERS[c] for c in letters], dtype=np.uint8)
        return cls(bits[:, 0], bits[:, 1], PREFIX_PHASE[prefix])

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8))

    @classmethod
    def single(cls, n, qubit, letter):
        x, z = np.zeros(n, np.uint8), np.zeros(n, np.uint8)
        x[qubit], z[qubit] = LETTERS[letter]
        return cls(x, z)

    @classmethod
    def from_ints(cls, n, x_int, z_int, phase=0):
        return cls(_int_to_bits(x_int, n), _int_to_bits(z_int, n), phase)

    @property
    def label(self):
        letters = "".join(BITS_TO_LETTER[(int(a), int(b))] for a, b in zip(self.x, self.z))
        return PHASE_PREFIX[self.phase] + letters

    @property
    def letters(self):
        return self.label.lstrip("+-i")

    def __repr__(self):
        return f"PauliString({self.label!r})"

    def __eq__(self, other):
        if not isinstance(other, PauliString):
            return NotImplemented
        return (
            self.phase == other.phase
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def __hash__(self):
        return hash((self.x.tobytes(), self.z.tobytes(), self.phase))

    @property
    def symplectic(self):
        return np.concatenate([self.x, self.z])

    @property
    def x_int(self):
        return _bits_to_int(self.x)

    @property
    def z_int(self):
        return _bits_to_int(self.z)

    @property
    def n_y(self):
        return int(np.sum(self.x & self.z))

    @property
    def weight(self):
        return int(np.sum(self.x | self.z))

    def is_hermitian(self):
        return self.phase % 2 == 0

    def is_identity_letters(self):
        return not self.x.any() and not self.z.any()

    def with_phase(self, phase):
        return PauliString(self.x, self.z, phase)

    def hermitian_part(self):
        """Same letters with phase +1."""
        return PauliString(self.x, self.z, 0)

    def __neg__(self):
        return PauliString(self.x, self.z, self.phase + 2)

    def commutes(self, other):
        return (int(self.x @ other.z) + int(self.z @ other.x)) % 2 == 0

    def __mul__(self, other):
        if self.n != other.n:
            raise InvalidInputError(f"Pauli strings on {self.n} and {other.n} qubits")
        g = int(np.sum(_phase_g(self.x, self.z, other.x, other.z)))
        return PauliString(self.x ^ other.x, self.z ^ other.z, self.phase + other.phase + g)

    def tensor(self, other):
        return PauliString(
            np.concatenate([self.x, other.x]),
            np.concatenate([self.z, other.z]),
            self.phase + other.phase,
        )

    def _column_coefficients(self):
        # P|w> = i^(e + #Y) (-1)^{popcount(z & w)} |w ^ x>
        w = np.arange(2**self.n)
        signs = 1 - 2 * (_popcount(self.z_int & w, self.n) % 2)
        return w, I_POWERS[(self.phase + self.n_y) % 4] * signs

    def to_dense(self):
        if self.n > settings.MAX_DENSE_QUBITS:
            raise BudgetExceededError(f"dense Pauli on {self.n} qubits exceeds the budget")
        w, coeff = self._column_coefficients()
        M = np.zeros((2**self.n, 2**self.n), dtype=complex)
        M[w ^ self.x_int, w] = coeff
        return M

    def apply(self, vec):
        """P |v> without building the dense matrix."""
        v = np.asarray(vec, dtype=complex)
        w, coeff = self._column_coefficients()
        out = np.empty_like(v)
        out[w ^ self.x_int] = coeff * v
        return out

    def expectation(self, rho):
        """Tr[P rho] in O(d) from the matrix entries rho[w, w ^ x]."""
        m = rho.matrix if isinstance(rho, DensityMatrix) else as_square(rho)
        w, coeff = self._column_coefficients()
        return complex(np.sum(coeff * m[w, w ^ self.x_int]))


def pauli_to_dense(p):
    return p.to_dense()


def _walsh_hadamard(G, n):
    H = G.reshape((G.shape[0],) + (2,) * n)
    for axis in range(1, n + 1):
        a = np.take(H, 0, axis=axis)
        b = np.take(H, 1, axis=axis)
        H = np.stack((a + b, a - b), axis=axis)
    return H.reshape(G.shape[0], 2**n)


def pauli_expectation_table(rho, n):
    """T[x, z] = Tr[P_(x,z) rho] for every Hermitian Pauli letter string, in O(d^2 log d)."""
    if n > settings.MAX_DENSE_QUBITS:
        raise BudgetExceededError(f"Pauli table on {n} qubits exceeds the budget")
    if isinstance(rho, PureState):
        psi = rho.amplitudes
        m = None
    else:
        m = rho.matrix if isinstance(rho, DensityMatrix) else as_square(rho)
    d = 2**n
    w = np.arange(d)
    xs = w[:, None]
    if m is None:
        G = psi[w][None, :] * psi[w[None, :] ^ xs].conj()
    else:
        G = m[w[None, :], w[None, :] ^ xs]
    H = _walsh_hadamard(G, n)
    n_y = _popcount(xs & w[None, :], n) % 4
    return np.real(I_POWERS[n_y] * H)


# --- GF(2) ---

def gf2_rank(M):
    A = np.array(M, dtype=np.uint8) % 2
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        hits = np.nonzero(A[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        A[[r, p]] = A[[p, r]]
        mask = A[:, c].astype(bool)
        mask[r] = False
        A[mask] ^= A[r]
        r += 1
        if r == rows:
            break
    return r


def gf2_solve(A, b):
    """Solves A s = b over GF(2); returns one solution or None if inconsistent."""
    A = np.array(A, dtype=np.uint8) % 2
    b = np.array(b, dtype=np.uint8) % 2
    rows, cols = A.shape
    M = np.concatenate([A, b[:, None]], axis=1)
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(M[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        M[[r, p]] = M[[p, r]]
        mask = M[:, c].astype(bool)
        mask[r] = False
        M[mask] ^= M[r]
        pivots.append(c)
        r += 1
    if np.any(M[r:, cols]):
        return None
    s = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        s[c] = M[i, cols]
    return s


def symplectic_product(a, b):
    """<a, b> = a_x . b_z + a_z . b_x mod 2 for length-2n bit vectors."""
    n = len(a) // 2
    return int(a[:n] @ b[n:] + a[n:] @ b[:n]) % 2


def _canonical_phase(vec):
    idx = int(np.argmax(np.abs(vec) > 1e-9 * np.max(np.abs(vec))))
    return vec * (abs(vec[idx]) / vec[idx])


# --- STABILIZER GROUPS ---

@dataclass(frozen=True, eq=False)
class StabilizerGroup:
    """Maximal abelian Pauli subgroup given by n independent commuting Hermitian generators."""

    generators: tuple

    def __post_init__(self):
        gens = tuple(g if isinstance(g, PauliString) else PauliString.from_label(g) for g in self.generators)
        if not gens:
            raise InvalidGroupError("stabilizer group needs at least one generator")
        n = gens[0].n
        if any(g.n != n for g in gens):
            raise InvalidGroupError("generators act on different numbers of qubits")
        if len(gens) != n:
            raise InvalidGroupError(f"{n}-qubit stabilizer group needs {n} generators, got {len(gens)}")
        for g in gens:
            if not g.is_hermitian():
                raise InvalidGroupError(f"generator {g.label} is not Hermitian")
            if g.is_identity_letters():
                raise InvalidGroupError(f"generator {g.label} is a multiple of the identity")
        for i, g in enumerate(gens):
            for h in gens[i + 1:]:
                if not g.commutes(h):
                    raise InvalidGroupError(f"generators {g.label} and {h.label} anticommute")
        if gf2_rank(np.array([g.symplectic for g in gens])) != n:
            raise InvalidGroupError("generators are not independent")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_labels(cls, labels):
        return cls(tuple(PauliString.from_label(lab) for lab in labels))

    @classmethod
    def from_text(cls, text):
        """One generator label per line; blank lines and '#' comments are ignored."""
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        return cls.from_labels([ln for ln in lines if ln])

    @classmethod
    def computational_zero(cls, n):
        return cls(tuple(PauliString.single(n, j, "Z") for j in range(n)))

    def to_text(self):
        return "\n".join(g.label for g in self.generators) + "\n"

    @property
    def n(self):
        return self.generators[0].n

    @property
    def key(self):
        return tuple(g.label for g in self.generators)

    def __eq__(self, other):
        if not isinstance(other, StabilizerGroup):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"StabilizerGroup({list(self.key)})"

    def element(self, mask):
        out = PauliString.identity(self.n)
        for j, g in enumerate(self.generators):
            if (mask >> j) & 1:
                out = out * g
        return out

    def elements(self):
        """All 2^n group elements, identity first."""
        return [self.element(mask) for mask in range(2**self.n)]

    def sign_of(self, p):
        """+1 / -1 if +p / -p lies in the group, 0 otherwise."""
        if not p.is_hermitian():
            raise InvalidInputError(f"{p.label} is not Hermitian")
        if p.n != self.n:
            raise InvalidInputError(f"{p.label} acts on {p.n} qubits, group on {self.n}")
        A = np.array([g.symplectic for g in self.generators]).T
        s = gf2_solve(A, p.symplectic)
        if s is None:
            return 0
        q = PauliString.identity(self.n)
        for j, g in enumerate(self.generators):
            if s[j]:
                q = q * g
        return 1 if q.phase == p.phase else -1

    def conjugated(self, clifford):
        return StabilizerGroup(tuple(clifford.conjugate(g) for g in self.generators))

    @cached_property
    def _vector(self):
        if self.n > settings.MAX_DENSE_QUBITS:
            raise BudgetExceededError(f"dense stabilizer state on {self.n} qubits exceeds the budget")
        gen = SeededRng(settings.DEFAULT_SEED, ("stabilizer-state", self.n)).generator()
        d = 2**self.n
        for _ in range(8):
            v = gen.standard_normal(d) + 1j * gen.standard_normal(d)
            for g in self.generators:
                v = (v + g.apply(v)) / 2
            norm = np.linalg.norm(v)
            if norm > 1e-6:
                return _canonical_phase(v / norm)
        raise InvalidGroupError("could not project onto the stabilized subspace")

    def state_vector(self):
        return PureState.normalized(self._vector)

    def density(self):
        return DensityMatrix.from_vector(self.state_vector())

    def minimax_operator_dense(self):
        """Omega = average over nontrivial elements S of (1 + S)/2."""
        if self.n > settings.MAX_CACHED_CLIFFORD_QUBITS:
            raise BudgetExceededError(f"dense minimax operator on {self.n} qubits exceeds the budget")
        d = 2**self.n
        omega = np.zeros((d, d), dtype=complex)
        for S in self.elements()[1:]:
            omega += (np.eye(d) + S.to_dense()) / 2
        return omega / (d - 1)


def stabilizer_state_dense(S):
    return S.density()


def stabilizer_state_vector(S):
    return S.state_vector()


def pauli_expectation_stabilizer(S, p):
    return S.sign_of(p)


def minimax_operator_dense(S):
    return S.minimax_operator_dense()


def _single_qubit_gates():
    H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    S = np.diag([1, 1j])
    return H, S


def enumerate_stabilizer_states(n):
    """All n-qubit stabilizer states (n <= 3) by breadth-first search under H, S, CNOT."""
    if not 1 <= n <= 3:
        raise BudgetExceededError("stabilizer state enumeration is limited to 1 <= n <= 3 qubits")
    H, S = _single_qubit_gates()
    gates = []
    for q in range(n):
        for G in (H, S):
            ops = [np.eye(2)] * n
            ops[q] = G
            M = ops[0]
            for op in ops[1:]:
                M = np.kron(M, op)
            gates.append(M)
    for c in range(n):
        for t in range(n):
            if c != t:
                gates.append(CliffordElement.cnot(n, c, t).to_dense())
    start = np.zeros(2**n, dtype=complex)
    start[0] = 1.0
    seen = {_state_key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            for G in gates:
                w = _canonical_phase(G @ v)
                key = _state_key(w)
                if key not in seen:
                    seen[key] = w
                    nxt.append(w)
        frontier = nxt
    return [PureState.normalized(v) for v in seen.values()]


def _state_key(vec):
    v = np.round(_canonical_phase(vec), 8) + 0.0
    return v.tobytes()


# --- CLIFFORD TABLEAUX ---

def _lambda(n):
    L = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    L[:n, n:] = np.eye(n, dtype=np.uint8)
    L[n:, :n] = np.eye(n, dtype=np.uint8)
    return L


def is_symplectic(T):
    T = np.asarray(T, dtype=np.int64)
    n = T.shape[0] // 2
    return bool(np.array_equal((T @ _lambda(n) @ T.T) % 2, _lambda(n)))


@dataclass(frozen=True, eq=False)
class CliffordElement:
    """Clifford unitary (mod global phase) stored as the images of X_0..X_{n-1}, Z_0..Z_{n-1}.

    Row g of `table` holds the [x | z] letters of the image of generator g and
    `signs[g]` its sign bit.
    """

    table: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.table, dtype=np.uint8) % 2
        r = np.asarray(self.signs, dtype=np.uint8).ravel() % 2
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] % 2 or T.shape[0] == 0:
            raise InvalidInputError(f"Clifford tableau must be 2n x 2n, got shape {T.shape}")
        if r.shape != (T.shape[0],):
            raise InvalidInputError("Clifford tableau needs one sign bit per row")
        if not is_symplectic(T):
            raise InvalidInputError("Clifford tableau is not symplectic")
        T.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "table", T)
        object.__setattr__(self, "signs", r)

    @property
    def n(self):
        return self.table.shape[0] // 2

    @cached_property
    def images(self):
        n = self.n
        return tuple(
            PauliString(self.table[g, :n], self.table[g, n:], 2 * int(self.signs[g])) for g in range(2 * n)
        )

    @cached_property
    def label(self):
        bits = np.concatenate([self.table.ravel(), self.signs])
        return f"C{self.n}:{np.packbits(bits).tobytes().hex()}"

    @classmethod
    def from_label(cls, label):
        try:
            head, payload = label.split(":", 1)
            n = int(head[1:])
            if not head.startswith("C") or n < 1:
                raise ValueError(head)
            bits = np.unpackbits(np.frombuffer(bytes.fromhex(payload), dtype=np.uint8))
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse Clifford label {label!r}") from exc
        size = 4 * n * n
        if bits.size < size + 2 * n:
            raise InvalidInputError(f"Clifford label {label!r} is truncated")
        return cls(bits[:size].reshape(2 * n, 2 * n), bits[size:size + 2 * n])

    def __eq__(self, other):
        if not isinstance(other, CliffordElement):
            return NotImplemented
        return self.label == other.label

    def __hash__(self):
        return hash(self.label)

    def __repr__(self):
        return f"CliffordElement({self.label!r})"

    # -- standard gates --

    @classmethod
    def identity(cls, n):
        return cls(np.eye(2 * n, dtype=np.uint8), np.zeros(2 * n, np.uint8))

    @classmethod
    def hadamard(cls, n, qubit):
        T = np.eye(2 * n, dtype=np.uint8)
        T[[qubit, n + qubit]] = T[[n + qubit, qubit]]
        return cls(T, np.zeros(2 * n, np.uint8))

    @classmethod
    def phase_gate(cls, n, qubit):
        T = np.eye(2 * n, dtype=np.uint8)
        T[qubit, n + qubit] = 1  # X -> Y
        return cls(T, np.zeros(2 * n, np.uint8))

    @classmethod
    def cnot(cls, n, control, target):
        if control == target:
            raise InvalidInputError("CNOT needs distinct control and target")
        T = np.eye(2 * n, dtype=np.uint8)
        T[control, target] = 1          # X_c -> X_c X_t
        T[n + target, n + control] = 1  # Z_t -> Z_c Z_t
        return cls(T, np.zeros(2 * n, np.uint8))

    @classmethod
    def pauli_gate(cls, p):
        n = p.n
        signs = np.zeros(2 * n, np.uint8)
        for j in range(n):
            signs[j] = p.z[j]
            signs[n + j] = p.x[j]
        return cls(np.eye(2 * n, dtype=np.uint8), signs)

    # -- algebra --

    def conjugate(self, p):
        """C p C^dagger."""
        if p.n != self.n:
            raise InvalidInputError(f"{p.label} acts on {p.n} qubits, Clifford on {self.n}")
        out = PauliString(np.zeros(self.n, np.uint8), np.zeros(self.n, np.uint8), p.phase + p.n_y)
        imgs = self.images
        for j in range(self.n):
            if p.x[j]:
                out = out * imgs[j]
            if p.z[j]:
                out = out * imgs[self.n + j]
        return out

    def compose(self, other):
        """self o other: the unitary C_self C_other (other acts first)."""
        new = [self.conjugate(img) for img in other.images]
        return CliffordElement(
            np.array([img.symplectic for img in new]),
            np.array([img.phase // 2 for img in new], dtype=np.uint8),
        )

    def inverse(self):
        n = self.n
        L = _lambda(n)
        T_inv = (L @ self.table.T.astype(np.int64) @ L) % 2
        signs = np.zeros(2 * n, np.uint8)
        for g in range(2 * n):
            candidate = PauliString(T_inv[g, :n], T_inv[g, n:])
            signs[g] = self.conjugate(candidate).phase // 2
        return CliffordElement(T_inv, signs)

    def is_identity(self):
        return np.array_equal(self.table, np.eye(2 * self.n, dtype=np.uint8)) and not self.signs.any()

    def to_dense(self):
        """Dense unitary with the first nonzero entry of column 0 positive real (n <= 6)."""
        if self.n > settings.MAX_CACHED_CLIFFORD_QUBITS:
            raise BudgetExceededError(f"dense Clifford on {self.n} qubits exceeds the budget")
        return _dense_clifford(self.label)

    @classmethod
    def from_dense(cls, U):
        """Recovers the tableau of a dense Clifford unitary by Pauli decomposition (n <= 4)."""
        U = as_square(U, "Clifford unitary")
        d = U.shape[0]
        n = int(round(np.log2(d)))
        if 2**n != d or n > 4:
            raise InvalidInputError("from_dense supports 1 to 4 qubits")
        rows, signs = [], []
        for g in range(2 * n):
            letter = "X" if g < n else "Z"
            P = PauliString.single(n, g % n, letter).to_dense()
            M = U @ P @ U.conj().T
            table = pauli_expectation_table(M, n) / d
            x_int, z_int = np.unravel_index(int(np.argmax(np.abs(table))), table.shape)
            coeff = table[x_int, z_int]
            if abs(abs(coeff) - 1) > 1e-8:
                raise InvalidInputError("matrix does not map Pauli strings to Pauli strings")
            img = PauliString.from_ints(n, int(x_int), int(z_int))
            rows.append(img.symplectic)
            signs.append(0 if coeff > 0 else 1)
        return cls(np.array(rows), np.array(signs, dtype=np.uint8))


@lru_cache(maxsize=2**15)
def _dense_clifford(label):
    c = CliffordElement.from_label(label)
    n = c.n
    d = 2**n
    psi0 = StabilizerGroup(c.images[n:]).state_vector().amplitudes
    U = np.zeros((d, d), dtype=complex)
    U[:, 0] = psi0
    for w in range(1, d):
        low = w & -w
        j = n - 1 - (low.bit_length() - 1)
        U[:, w] = c.images[j].apply(U[:, w ^ low])
    U.flags.writeable = False
    return U


def clifford_to_dense(c):
    return c.to_dense()


@lru_cache(maxsize=None)
def enumerate_cliffords(n):
    """Every n-qubit Clifford mod phase (24 for n=1, 11520 for n=2)."""
    if not 1 <= n <= settings.MAX_ENUMERATED_CLIFFORD_QUBITS:
        raise BudgetExceededError(
            f"Clifford enumeration is limited to n <= {settings.MAX_ENUMERATED_CLIFFORD_QUBITS}"
        )
    m = 2 * n
    codes = np.arange(2 ** (m * m), dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(m * m)[::-1]) & 1).reshape(-1, m, m)
    L = _lambda(n).astype(np.int64)
    forms = np.einsum("kab,bc,kdc->kad", bits, L, bits) % 2
    symplectic = bits[np.all(forms == L, axis=(1, 2))]
    out = []
    for T in symplectic:
        for signs in product((0, 1), repeat=m):
            out.append(CliffordElement(T, np.array(signs, dtype=np.uint8)))
    logger.debug("enumerated %d Cliffords on %d qubits", len(out), n)
    return tuple(out)


def _random_symplectic(gen, n):
    m = 2 * n
    basis = [row for row in np.eye(m, dtype=np.uint8)]
    rows = [None] * m
    for j in range(n):
        B = np.array(basis)
        while True:
            c = gen.integers(0, 2, size=len(basis), dtype=np.uint8)
            if c.any():
                break
        v = (c @ B) % 2
        while True:
            c = gen.integers(0, 2, size=len(basis), dtype=np.uint8)
            w = (c @ B) % 2
            if symplectic_product(v, w) == 1:
                break
        rows[j], rows[n + j] = v, w
        projected = []
        for u in basis:
            u2 = (u + symplectic_product(u, w) * v + symplectic_product(u, v) * w) % 2
            projected.append(u2.astype(np.uint8))
        basis = _row_basis(np.array(projected))
    return np.array(rows, dtype=np.uint8)


def _row_basis(M):
    A = np.array(M, dtype=np.uint8) % 2
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(A[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        A[[r, p]] = A[[p, r]]
        mask = A[:, c].astype(bool)
        mask[r] = False
        A[mask] ^= A[r]
        r += 1
    return [row for row in A[:r]]


def sample_clifford(rng, n):
    """Uniform Clifford: enumeration for n <= 2, random symplectic basis otherwise."""
    if n < 1:
        raise InvalidInputError(f"number of qubits must be positive, got {n}")
    gen = as_generator(rng)
    if n <= settings.MAX_ENUMERATED_CLIFFORD_QUBITS:
        group = enumerate_cliffords(n)
        return group[int(gen.integers(len(group)))]
    T = _random_symplectic(gen, n)
    signs = gen.integers(0, 2, size=2 * n, dtype=np.uint8)
    return CliffordElement(T, signs)


# --- OVERLAPS ---

def stabilizer_overlap(S, c, b):
    """|<b| C |psi_S>|^2 from tableau algebra."""
    bits = parse_bitstring(b, S.n)
    return float(_overlap_table(S, c.label)[_bits_to_int(bits)])


@lru_cache(maxsize=2**16)
def _overlap_table(S, clifford_label):
    c = CliffordElement.from_label(clifford_label)
    return outcome_distribution(S.conjugated(c))


def outcome_distribution(S):
    """Z-basis outcome distribution of a stabilizer state: uniform on an affine subspace."""
    n = S.n
    rows = list(S.generators)
    pivots = 0
    for col in range(n):
        hit = next((i for i in range(pivots, n) if rows[i].x[col]), None)
        if hit is None:
            continue
        rows[pivots], rows[hit] = rows[hit], rows[pivots]
        for i in range(n):
            if i != pivots and rows[i].x[col]:
                rows[i] = rows[i] * rows[pivots]
        pivots += 1
    probs = np.full(2**n, 2.0**-pivots)
    w = np.arange(2**n)
    for row in rows[pivots:]:
        sign = 1 if row.phase == 0 else -1
        parity = _popcount(row.z_int & w, n) % 2
        probs[sign * (1 - 2 * parity) < 0] = 0.0
    probs.flags.writeable = False
    return probs


def choi_stabilizer_group(c):
    """Stabilizer group on 2n qubits (output then input) of the Choi state of c."""
    n = c.n
    gens = []
    for j in range(n):
        for letter in ("X", "Z"):
            local = PauliString.single(n, j, letter)
            gens.append(c.conjugate(local).tensor(local))
    return StabilizerGroup(tuple(gens))
