"""Seeded simulated device: noisy preparation, gates and measurement.

Protocols talk to a device only through `execute(settings, shots)`; exact states
and probabilities are reachable through `SimulatedDevice.oracle()` for tests.
"""

import hashlib
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from . import settings
from .channels import NoiseModel
from .errors import BudgetExceededError, DimensionMismatchError, InvalidInputError, NotCPTError
from .linalg import DensityMatrix, Povm, PureState, as_square, is_unitary, kron
from .randomness import SeededRng
from .stabilizer import CliffordElement, PauliString, StabilizerGroup

logger = logging.getLogger(__name__)

PREP_MODES = ("iid", "drift")
PAULI_OUTCOMES = ("+1", "-1")
SAMPLING_CHUNK = 10**6

_SQ = 1 / np.sqrt(2)
PRODUCT_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([_SQ, _SQ], dtype=complex),
    "-": np.array([_SQ, -_SQ], dtype=complex),
    "r": np.array([_SQ, 1j * _SQ], dtype=complex),
    "l": np.array([_SQ, -1j * _SQ], dtype=complex),
}


def _digest(arr):
    return hashlib.sha1(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class Setting:
    """One measurement descriptor: preparation, gate ids, measurement.

    prep is "target" or a per-qubit string over 0 1 + - r l; measure is "Z",
    a signed Pauli label such as "+XZ", or "povm:<name>" with `povm` set.
    `basis` holds gate ids of a noise-free basis change applied just before
    readout. `operators` binds extra gate ids to explicit unitaries.

    Settings read back from a record carry no effects (`detached`); a replay
    re-attaches them from the regenerated plan.
    """

    prep: str = "target"
    circuit: tuple = ()
    measure: str = "Z"
    povm: Povm = field(default=None, compare=False)
    operators: tuple = field(default=(), compare=False)
    basis: tuple = ()
    detached: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "circuit", tuple(str(g) for g in self.circuit))
        object.__setattr__(self, "basis", tuple(str(g) for g in self.basis))
        object.__setattr__(self, "operators", tuple((str(k), v) for k, v in self.operators))
        if self.measure.startswith("povm:") and self.povm is None and not self.detached:
            raise InvalidInputError(f"measurement {self.measure!r} needs a Povm")

    @property
    def key(self):
        parts = [self.prep, ",".join(self.circuit), self.measure]
        if self.basis:
            parts.append("basis=" + ",".join(self.basis))
        if self.povm is not None:
            parts.append(_digest(np.array(self.povm.effects)))
        parts.extend(f"{k}={_digest(np.asarray(v))}" for k, v in self.operators)
        return "|".join(parts)

    def to_dict(self):
        out = {"prep": self.prep, "circuit": list(self.circuit), "measure": self.measure}
        if self.basis:
            out["basis"] = list(self.basis)
        return out

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                str(data["prep"]),
                tuple(data["circuit"]),
                str(data["measure"]),
                basis=tuple(data.get("basis", ())),
                detached=True,
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise InvalidInputError(f"malformed setting {data!r}") from exc


@dataclass(frozen=True)
class ShotBatch:
    setting_id: str
    setting: Setting
    first_shot: int
    counts: dict
    outcomes: tuple = None

    @property
    def shots(self):
        return sum(self.counts.values())


@dataclass(frozen=True)
class ExperimentRecord:
    batches: tuple
    seed: int
    n_qubits: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def total_shots(self):
        return sum(b.shots for b in self.batches)

    def by_id(self):
        return {b.setting_id: b for b in self.batches}


@dataclass(frozen=True, eq=False)
class DeviceConfig:
    n_qubits: int
    target: object = None
    noise: NoiseModel = None
    prep_mode: str = "iid"
    drift_rate: float = 0.0
    seed: int = settings.DEFAULT_SEED
    gates: dict = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.n_qubits)
        if not 1 <= n <= settings.MAX_DENSE_QUBITS:
            raise BudgetExceededError(f"device size must lie in [1, {settings.MAX_DENSE_QUBITS}] qubits, got {n}")
        d = 2**n
        noise = NoiseModel.noiseless(d) if self.noise is None else self.noise
        if noise.dim != d:
            raise DimensionMismatchError(f"noise model acts on dimension {noise.dim}, device on {d}")
        if self.prep_mode not in PREP_MODES:
            raise InvalidInputError(f"prep_mode must be one of {PREP_MODES}, got {self.prep_mode!r}")
        if not 0.0 <= self.drift_rate <= 1.0:
            raise InvalidInputError(f"drift rate must lie in [0, 1], got {self.drift_rate}")
        if self.target is not None and not isinstance(self.target, (StabilizerGroup, PureState)):
            raise InvalidInputError("target must be a StabilizerGroup, a PureState or None")
        if self.target is not None and getattr(self.target, "n", None) not in (None, n):
            raise DimensionMismatchError(f"target acts on {self.target.n} qubits, device has {n}")
        if isinstance(self.target, PureState) and self.target.dim != d:
            raise DimensionMismatchError(f"target has dimension {self.target.dim}, device {d}")
        gates = {}
        for gid, U in self.gates.items():
            U = as_square(U, f"gate {gid}")
            if U.shape[0] != d or not is_unitary(U, settings.TAU_UNITARY_CHECK):
                raise NotCPTError(f"gate {gid!r} is not a {d}x{d} unitary")
            gates[str(gid)] = U
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "gates", gates)

    @property
    def dim(self):
        return 2**self.n_qubits

    def target_vector(self):
        if self.target is None:
            return PureState.basis(self.dim).amplitudes
        if isinstance(self.target, StabilizerGroup):
            return self.target.state_vector().amplitudes
        return self.target.amplitudes


class _State:
    """w |psi><psi| + (1 - w) 1/d, or an explicit density matrix."""

    __slots__ = ("weight", "vector", "matrix")

    def __init__(self, weight, vector, matrix=None):
        self.weight = weight
        self.vector = vector
        self.matrix = matrix

    @property
    def dim(self):
        return self.vector.shape[0] if self.matrix is None else self.matrix.shape[0]

    def dense(self):
        if self.matrix is not None:
            return self.matrix
        d = self.dim
        return self.weight * np.outer(self.vector, self.vector.conj()) + (1 - self.weight) * np.eye(d) / d

    def apply_unitary(self, U):
        if self.matrix is None:
            return _State(self.weight, U @ self.vector)
        return _State(0.0, None, U @ self.matrix @ U.conj().T)

    def apply_channel(self, ch):
        if ch.kind == "identity":
            return self
        if ch.kind == "unitary":
            return self.apply_unitary(ch.params[0])
        if ch.kind == "depolarizing" and self.matrix is None:
            return _State(self.weight * ch.params[0], self.vector)
        return _State(0.0, None, ch.apply_operator(self.dense()))

    def z_probabilities(self):
        if self.matrix is None:
            probs = self.weight * np.abs(self.vector) ** 2 + (1 - self.weight) / self.dim
        else:
            probs = np.real(np.diag(self.matrix))
        return probs

    def pauli_expectation(self, p):
        if self.matrix is not None:
            return float(np.real(p.expectation(self.matrix)))
        value = self.weight * np.real(np.vdot(self.vector, p.apply(self.vector)))
        if p.is_identity_letters():
            value += (1 - self.weight) * (1 if p.phase == 0 else -1)
        return float(value)


def _normalised(probs):
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return probs / probs.sum()


class Device(ABC):
    """Settings in, outcome counts out."""

    n_qubits: int

    @abstractmethod
    def execute(self, settings_list, shots, setting_ids=None, keep_outcomes=False):
        """Runs each setting for its shot count and returns an ExperimentRecord."""


def _shot_list(settings_list, shots):
    if isinstance(shots, (int, np.integer)):
        shot_list = [int(shots)] * len(settings_list)
    else:
        shot_list = [int(s) for s in shots]
    if len(shot_list) != len(settings_list):
        raise InvalidInputError("one shot count per setting is required")
    if any(s < 1 for s in shot_list):
        raise InvalidInputError("shot counts must be positive")
    if sum(shot_list) > settings.MAX_SHOTS_PER_RECORD:
        raise BudgetExceededError(f"{sum(shot_list)} shots exceed the per-record cap")
    return shot_list


def _setting_ids(settings_list, setting_ids):
    if setting_ids is None:
        return [f"s{i:06d}" for i in range(len(settings_list))]
    ids = [str(s) for s in setting_ids]
    if len(ids) != len(settings_list) or len(set(ids)) != len(ids):
        raise InvalidInputError("setting ids must be unique, one per setting")
    return ids


class SimulatedDevice(Device):
    """Born-rule sampling from exactly computed outcome distributions."""

    def __init__(self, config, rng=None):
        self.config = config
        self.n_qubits = config.n_qubits
        self._root = rng if isinstance(rng, SeededRng) else SeededRng(config.seed, ("device",))
        self._calls = 0
        self._shots_done = 0
        self._cache = {}

    # -- state model --

    def _gate(self, gate_id, setting):
        local = dict(setting.operators)
        if gate_id in local:
            U = as_square(local[gate_id], f"gate {gate_id}")
            if U.shape[0] != self.config.dim:
                raise DimensionMismatchError(f"gate {gate_id!r} has dimension {U.shape[0]}")
            return U
        if gate_id in self.config.gates:
            return self.config.gates[gate_id]
        if gate_id.startswith("C") and ":" in gate_id:
            c = CliffordElement.from_label(gate_id)
            if c.n != self.n_qubits:
                raise DimensionMismatchError(f"Clifford {gate_id} acts on {c.n} qubits")
            return c.to_dense()
        raise InvalidInputError(f"unknown gate id {gate_id!r}")

    def _prepared(self, prep):
        n = self.n_qubits
        if prep == "target":
            vec = self.config.target_vector()
        else:
            if len(prep) != n or set(prep) - set(PRODUCT_STATES):
                raise InvalidInputError(f"product preparation {prep!r} must give one of 01+-rl per qubit")
            vec = kron(*[PRODUCT_STATES[c][:, None] for c in prep]).ravel()
        return _State(1.0, np.asarray(vec, dtype=complex))

    def _evolve(self, state, setting, prep_noise=True):
        noise = self.config.noise
        if prep_noise:
            state = state.apply_channel(noise.prep_error)
        for gid in setting.circuit:
            state = state.apply_unitary(self._gate(gid, setting))
            state = state.apply_channel(noise.for_gate(gid))
        for gid in setting.basis:
            state = state.apply_unitary(self._gate(gid, setting))
        return state.apply_channel(noise.meas_error)

    def _measure(self, state, setting):
        m = setting.measure
        if m == "Z":
            labels = None
            probs = state.z_probabilities()
        elif m.startswith("povm:"):
            if setting.povm is None:
                raise InvalidInputError(f"measurement {m!r} has no effects attached")
            labels = setting.povm.labels
            if setting.povm.dim != self.config.dim:
                raise DimensionMismatchError("POVM dimension does not match the device")
            rho = state.dense()
            probs = setting.povm.probabilities(DensityMatrix((rho + rho.conj().T) / 2))
        else:
            p = PauliString.from_label(m)
            if p.n != self.n_qubits or not p.is_hermitian():
                raise InvalidInputError(f"measurement {m!r} is not a Hermitian {self.n_qubits}-qubit Pauli")
            e = state.pauli_expectation(p)
            labels = PAULI_OUTCOMES
            probs = np.array([(1 + e) / 2, (1 - e) / 2])
        return labels, _normalised(probs)

    def _distribution(self, setting):
        key = setting.key
        if key not in self._cache:
            labels, probs = self._measure(self._evolve(self._prepared(setting.prep), setting), setting)
            mixed = None
            if self.config.prep_mode == "drift":
                # drifted component is the maximally mixed state itself, not its prep-noise image
                blank = _State(0.0, np.zeros(self.config.dim, dtype=complex))
                mixed = self._measure(self._evolve(blank, setting, prep_noise=False), setting)[1]
            self._cache[key] = (labels, probs, mixed)
        return self._cache[key]

    def _label(self, labels, index):
        if labels is None:
            return format(int(index), f"0{self.n_qubits}b")
        return labels[int(index)]

    # -- sampling --

    def _sample(self, gen, probs, mixed, shots, first_shot):
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        mixed_cdf = None
        if mixed is not None:
            mixed_cdf = np.cumsum(mixed)
            mixed_cdf[-1] = 1.0
        chunks = []
        done = 0
        while done < shots:
            size = min(SAMPLING_CHUNK, shots - done)
            u = gen.random(size)
            idx = np.searchsorted(cdf, u, side="right")
            if mixed_cdf is not None:
                t = np.arange(first_shot + done, first_shot + done + size)
                keep = gen.random(size) < (1 - self.config.drift_rate) ** t
                idx = np.where(keep, idx, np.searchsorted(mixed_cdf, u, side="right"))
            chunks.append(np.minimum(idx, len(probs) - 1))
            done += size
        return np.concatenate(chunks)

    def execute(self, settings_list, shots, setting_ids=None, keep_outcomes=False):
        settings_list = list(settings_list)
        shot_list = _shot_list(settings_list, shots)
        ids = _setting_ids(settings_list, setting_ids)
        gen = self._root.substream(self._calls).generator()
        self._calls += 1
        batches = []
        for sid, setting, s in zip(ids, settings_list, shot_list):
            labels, probs, mixed = self._distribution(setting)
            idx = self._sample(gen, probs, mixed, s, self._shots_done)
            values, freq = np.unique(idx, return_counts=True)
            counts = {self._label(labels, v): int(c) for v, c in zip(values, freq)}
            outcomes = tuple(self._label(labels, v) for v in idx) if keep_outcomes else None
            batches.append(ShotBatch(sid, setting, self._shots_done, counts, outcomes))
            self._shots_done += s
        logger.debug("executed %d settings, %d shots", len(batches), sum(shot_list))
        return ExperimentRecord(tuple(batches), self.config.seed, self.n_qubits)

    def oracle(self):
        return DeviceOracle(self)


class DeviceOracle:
    """Exact access to the simulated device, for tests and validators only."""

    def __init__(self, device):
        self._device = device

    def prepared_state(self, prep="target", shot=0):
        dev = self._device
        state = dev._prepared(prep).apply_channel(dev.config.noise.prep_error)
        rho = state.dense()
        if dev.config.prep_mode == "drift":
            f = (1 - dev.config.drift_rate) ** shot
            rho = f * rho + (1 - f) * np.eye(dev.config.dim) / dev.config.dim
        return DensityMatrix((rho + rho.conj().T) / 2)

    def outcome_distribution(self, setting):
        labels, probs, _ = self._device._distribution(setting)
        return {self._device._label(labels, i): float(p) for i, p in enumerate(probs)}

    def run_gate_sequence(self, gate_ids, noise=None):
        return run_gate_sequence(self._device.config, gate_ids, noise)


def run_gate_sequence(cfg, gate_ids, noise=None):
    """Exact channel meas o (L_g o G_g) ... o prep for the given gate ids."""
    from .channels import unitary_channel

    noise = cfg.noise if noise is None else noise
    device = SimulatedDevice(cfg)
    probe = Setting("target", tuple(gate_ids))
    total = noise.prep_error
    for gid in probe.circuit:
        step = noise.for_gate(gid).compose(unitary_channel(device._gate(gid, probe)))
        total = step.compose(total)
    return noise.meas_error.compose(total)


def prepare_and_measure(cfg, setting, shots, rng=None, keep_outcomes=False):
    """One-off execution of a single setting on a fresh simulated device."""
    return SimulatedDevice(cfg, rng).execute([setting], shots, keep_outcomes=keep_outcomes)


class RecordReplayDevice(Device):
    """Serves batches from an existing record; used to analyse external data."""

    def __init__(self, record):
        self.record = record
        self.n_qubits = record.n_qubits
        self._batches = record.by_id()

    def execute(self, settings_list, shots, setting_ids=None, keep_outcomes=False):
        settings_list = list(settings_list)
        ids = _setting_ids(settings_list, setting_ids)
        out = []
        for sid, setting in zip(ids, settings_list):
            batch = self._batches.get(sid)
            if batch is None:
                raise InvalidInputError(f"record has no batch for setting id {sid!r}")
            if batch.setting.to_dict() != setting.to_dict():
                raise InvalidInputError(f"record setting for {sid!r} does not match the plan")
            if keep_outcomes and batch.outcomes is None:
                raise InvalidInputError(f"record batch {sid!r} lacks per-shot outcomes")
            out.append(ShotBatch(sid, setting, batch.first_shot, dict(batch.counts), batch.outcomes))
        return ExperimentRecord(tuple(out), self.record.seed, self.n_qubits, dict(self.record.meta))
