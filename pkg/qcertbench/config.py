"""Experiment configs: JSON parsing and schema validation.

A config looks like

    {
      "protocol": "dfe",
      "seed": 7,
      "spec": {"epsilon": 0.05, "delta": 0.05},
      "device": {
        "n_qubits": 3,
        "target": {"stabilizer": ["+XXX", "+ZZI", "+IZZ"]},
        "noise": {"prep_error": {"kind": "depolarizing", "p": 0.9}}
      },
      "params": {"mode": "well_conditioned"},
      "output_dir": "results/dfe"
    }

Every violation raises ConfigError naming the JSON path of the offending field.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import settings
from .channels import NoiseModel, parse_complex_matrix
from .devicesim import PREP_MODES, DeviceConfig
from .errors import ConfigError, InvalidInputError
from .linalg import PureState
from .stabilizer import CliffordElement, PauliString, StabilizerGroup
from .stats import ConfidenceSpec

logger = logging.getLogger(__name__)

PROTOCOLS = ("observable", "direct_state", "dfe", "sfe", "direct_process", "rb", "irb", "xeb")
# protocols whose sample counts derive from (epsilon, delta)
SPEC_PROTOCOLS = ("observable", "direct_state", "dfe", "sfe", "direct_process")
TOP_LEVEL_KEYS = ("protocol", "seed", "spec", "device", "params", "output_dir", "records")
DEVICE_KEYS = ("n_qubits", "target", "noise", "prep_mode", "drift_rate", "gates")
GATE_BUILDERS = {"H": 1, "S": 1, "X": 1, "Y": 1, "Z": 1, "CNOT": 2}


@dataclass(frozen=True, eq=False)
class DeviceSpec:
    n_qubits: int
    target: object = None
    noise: NoiseModel = None
    prep_mode: str = "iid"
    drift_rate: float = 0.0
    gates: dict = field(default_factory=dict)

    def build(self, seed):
        return DeviceConfig(self.n_qubits, self.target, self.noise, self.prep_mode, self.drift_rate, seed, self.gates)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    protocol: str
    params: dict
    spec: ConfidenceSpec
    seed: int
    device: DeviceSpec
    output_dir: Path
    config_hash: str
    records: Path = None

    def with_overrides(self, seed=None, output_dir=None, records=None):
        changes = {}
        if seed is not None:
            changes["seed"] = _seed(seed, "--seed")
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if records is not None:
            changes["records"] = _existing_file(records, "--records")
        return replace(self, **changes) if changes else self

    def device_config(self):
        return self.device.build(self.seed)


# --- FIELD HELPERS ---

def _object(value, path):
    if not isinstance(value, dict):
        raise ConfigError(path, "must be a JSON object")
    return value


def _required(obj, key, path):
    if key not in obj:
        raise ConfigError(f"{path}.{key}" if path else key, "is required")
    return obj[key]


def _number(value, path, low=None, high=None):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not np.isfinite(value):
        raise ConfigError(path, "must be a finite number")
    value = float(value)
    if (low is not None and value < low) or (high is not None and value > high):
        raise ConfigError(path, f"must lie in [{low}, {high}], got {value}")
    return value


def _integer(value, path, low=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(path, "must be an integer")
    if low is not None and value < low:
        raise ConfigError(path, f"must be at least {low}, got {value}")
    return value


def _choice(value, options, path):
    if value not in options:
        raise ConfigError(path, f"must be one of {list(options)}, got {value!r}")
    return value


def _seed(value, path):
    value = _integer(value, path, 0)
    if value >= 2**64:
        raise ConfigError(path, "must fit in 64 bits")
    return value


def _existing_file(value, path):
    if not isinstance(value, (str, Path)):
        raise ConfigError(path, "must be a file path")
    p = Path(value)
    if not p.is_file():
        raise ConfigError(path, f"file {p} does not exist")
    return p


def _unknown_keys(obj, allowed, path):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        where = f"{path}.{extra[0]}" if path else extra[0]
        raise ConfigError(where, "unknown field")


def _matrix(value, path):
    try:
        return parse_complex_matrix(value)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from exc


# --- SECTIONS ---

def parse_spec(raw, path="spec"):
    raw = _object(raw, path)
    eps = _number(_required(raw, "epsilon", path), f"{path}.epsilon")
    delta = _number(_required(raw, "delta", path), f"{path}.delta")
    try:
        return ConfidenceSpec(eps, delta)
    except InvalidInputError as exc:
        field_name = "delta" if "delta" in str(exc) else "epsilon"
        raise ConfigError(f"{path}.{field_name}", str(exc)) from exc


def parse_target(raw, n_qubits, path="device.target"):
    if raw is None:
        return None
    raw = _object(raw, path)
    if "stabilizer" in raw:
        labels = raw["stabilizer"]
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ConfigError(f"{path}.stabilizer", "must be a list of Pauli labels")
        try:
            group = StabilizerGroup.from_labels(labels)
        except InvalidInputError as exc:
            raise ConfigError(f"{path}.stabilizer", str(exc)) from exc
        if group.n != n_qubits:
            raise ConfigError(f"{path}.stabilizer", f"acts on {group.n} qubits, device has {n_qubits}")
        return group
    if "vector" in raw:
        rows = raw["vector"]
        if not isinstance(rows, list):
            raise ConfigError(f"{path}.vector", "must be a list of amplitudes")
        vec = _matrix([rows], f"{path}.vector").ravel()
        if vec.size != 2**n_qubits:
            raise ConfigError(f"{path}.vector", f"needs {2**n_qubits} amplitudes, got {vec.size}")
        try:
            return PureState.normalized(vec)
        except InvalidInputError as exc:
            raise ConfigError(f"{path}.vector", str(exc)) from exc
    raise ConfigError(path, "needs a 'stabilizer' or 'vector' entry")


def parse_clifford(raw, n_qubits, path):
    """Clifford from {"label": "C1:..."} or {"gates": [["H", 0], ["CNOT", 0, 1]]}, applied left to right."""
    raw = _object(raw, path)
    if "label" in raw:
        try:
            c = CliffordElement.from_label(str(raw["label"]))
        except InvalidInputError as exc:
            raise ConfigError(f"{path}.label", str(exc)) from exc
        if c.n != n_qubits:
            raise ConfigError(f"{path}.label", f"acts on {c.n} qubits, device has {n_qubits}")
        return c
    gates = _required(raw, "gates", path)
    if not isinstance(gates, list):
        raise ConfigError(f"{path}.gates", "must be a list of [name, qubit...] entries")
    total = CliffordElement.identity(n_qubits)
    for i, entry in enumerate(gates):
        where = f"{path}.gates[{i}]"
        if not isinstance(entry, list) or not entry or entry[0] not in GATE_BUILDERS:
            raise ConfigError(where, f"must start with one of {list(GATE_BUILDERS)}")
        name, qubits = entry[0], entry[1:]
        if len(qubits) != GATE_BUILDERS[name]:
            raise ConfigError(where, f"{name} takes {GATE_BUILDERS[name]} qubit index(es)")
        for q in qubits:
            if not isinstance(q, int) or isinstance(q, bool) or not 0 <= q < n_qubits:
                raise ConfigError(where, f"qubit index {q!r} out of range")
        try:
            if name == "H":
                g = CliffordElement.hadamard(n_qubits, qubits[0])
            elif name == "S":
                g = CliffordElement.phase_gate(n_qubits, qubits[0])
            elif name == "CNOT":
                g = CliffordElement.cnot(n_qubits, qubits[0], qubits[1])
            else:
                g = CliffordElement.pauli_gate(PauliString.single(n_qubits, qubits[0], name))
        except InvalidInputError as exc:
            raise ConfigError(where, str(exc)) from exc
        total = g.compose(total)
    return total


def parse_device(raw, path="device"):
    raw = _object(raw, path)
    _unknown_keys(raw, DEVICE_KEYS, path)
    n = _integer(_required(raw, "n_qubits", path), f"{path}.n_qubits", 1)
    if n > settings.MAX_DENSE_QUBITS:
        raise ConfigError(f"{path}.n_qubits", f"must be at most {settings.MAX_DENSE_QUBITS}")
    target = parse_target(raw.get("target"), n, f"{path}.target")
    try:
        noise = NoiseModel.from_descriptor(_object(raw.get("noise") or {}, f"{path}.noise"), 2**n)
    except InvalidInputError as exc:
        raise ConfigError(f"{path}.noise", str(exc)) from exc
    prep_mode = _choice(raw.get("prep_mode", "iid"), PREP_MODES, f"{path}.prep_mode")
    drift = _number(raw.get("drift_rate", 0.0), f"{path}.drift_rate", 0.0, 1.0)
    gates = {}
    for gid, rows in _object(raw.get("gates") or {}, f"{path}.gates").items():
        gates[str(gid)] = _matrix(rows, f"{path}.gates.{gid}")
    return DeviceSpec(n, target, noise, prep_mode, drift, gates)


def _check_params(protocol, params, device):
    """Validates protocol parameters and returns them with parsed objects filled in."""
    out = dict(params)
    n = device.n_qubits
    if protocol == "observable":
        obs = _required(params, "observable", "params")
        if isinstance(obs, list):
            out["observable"] = _matrix(obs, "params.observable")
        elif not isinstance(obs, str):
            raise ConfigError("params.observable", "must be a Pauli label or a matrix")
        if "threshold" in params:
            out["threshold"] = _number(params["threshold"], "params.threshold")
    elif protocol == "direct_state":
        out["strategy"] = _choice(
            params.get("strategy", "stabilizer_minimax"),
            ("exact_povm", "stabilizer_minimax", "gap_aware"),
            "params.strategy",
        )
        if out["strategy"] != "exact_povm" and not isinstance(device.target, StabilizerGroup):
            raise ConfigError("device.target", f"strategy {out['strategy']} needs a stabilizer target")
        out["adaptive"] = bool(params.get("adaptive", True))
    elif protocol in ("dfe", "sfe"):
        if device.target is None:
            raise ConfigError("device.target", f"{protocol} needs a target state")
        if protocol == "dfe":
            out["mode"] = _choice(params.get("mode", "well_conditioned"), ("general", "well_conditioned"), "params.mode")
            if params.get("alpha") is not None:
                out["alpha"] = _number(params["alpha"], "params.alpha", 0.0, 1.0)
        elif params.get("n_samples") is not None:
            out["n_samples"] = _integer(params["n_samples"], "params.n_samples", 1)
        if "certify" in params:
            cert = _object(params["certify"], "params.certify")
            out["certify"] = {
                "epsilon": _number(_required(cert, "epsilon", "params.certify"), "params.certify.epsilon", 0.0, 1.0),
                "policy": _choice(
                    cert.get("policy", "trace_distance"), ("infidelity", "trace_distance"), "params.certify.policy"
                ),
            }
    elif protocol in ("direct_process", "irb"):
        out["clifford"] = parse_clifford(_required(params, "clifford", "params"), n, "params.clifford")
    if protocol in ("rb", "irb"):
        lengths = _required(params, "lengths", "params")
        if not isinstance(lengths, list) or not lengths:
            raise ConfigError("params.lengths", "must be a non-empty list of integers")
        out["lengths"] = [_integer(m, f"params.lengths[{i}]", 1) for i, m in enumerate(lengths)]
        if any(b <= a for a, b in zip(out["lengths"], out["lengths"][1:])):
            raise ConfigError("params.lengths", "must be strictly increasing")
        out["n_sequences"] = _integer(_required(params, "n_sequences", "params"), "params.n_sequences", 1)
        out["shots"] = _integer(_required(params, "shots", "params"), "params.shots", 1)
        if out["n_sequences"] * out["shots"] < settings.RB_MIN_SAMPLES_PER_POINT:
            raise ConfigError("params.shots", f"n_sequences * shots must be at least {settings.RB_MIN_SAMPLES_PER_POINT}")
    if protocol == "irb":
        out["unitarity_source"] = _choice(
            params.get("unitarity_source", "assumed"), ("oracle", "assumed"), "params.unitarity_source"
        )
        out["incoherence"] = _number(params.get("incoherence", 0.0), "params.incoherence", 0.0, 1.0)
    if protocol == "xeb":
        circuit = params.get("circuit", "haar")
        if isinstance(circuit, list):
            out["circuit"] = _matrix(circuit, "params.circuit")
        else:
            out["circuit"] = _choice(circuit, ("haar", "identity"), "params.circuit")
        out["n_circuits"] = _integer(params.get("n_circuits", 1), "params.n_circuits", 1)
        if params.get("shots") is not None:
            out["shots"] = _integer(params["shots"], "params.shots", 1)
        out["estimator"] = _choice(params.get("estimator", "linear"), ("linear", "log", "dxe"), "params.estimator")
        if params.get("porter_thomas") is not None:
            out["porter_thomas"] = _choice(params["porter_thomas"], ("ks_statistic", "moment"), "params.porter_thomas")
    if "gate_id" in params:
        if not isinstance(params["gate_id"], str) or not params["gate_id"]:
            raise ConfigError("params.gate_id", "must be a non-empty string")
    return out


def config_hash(raw):
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_config(raw, source="config"):
    raw = _object(raw, "<root>")
    _unknown_keys(raw, TOP_LEVEL_KEYS, "")
    protocol = _choice(_required(raw, "protocol", ""), PROTOCOLS, "protocol")
    seed = _seed(raw.get("seed", settings.DEFAULT_SEED), "seed")
    device = parse_device(_required(raw, "device", ""))
    if protocol in SPEC_PROTOCOLS or (protocol == "xeb" and (raw.get("params") or {}).get("shots") is None):
        spec = parse_spec(_required(raw, "spec", ""))
    else:
        spec = parse_spec(raw["spec"]) if "spec" in raw else None
    params = _check_params(protocol, _object(raw.get("params") or {}, "params"), device)
    gate_id = params.get("gate_id")
    if gate_id is not None and "clifford" in params and gate_id not in device.gates:
        # custom gate ids must resolve to the Clifford they name
        device = replace(device, gates={**device.gates, gate_id: params["clifford"].to_dense()})
    output_dir = Path(raw.get("output_dir") or Path(settings.OUTPUT_FOLDER) / Path(source).stem)
    records = _existing_file(raw["records"], "records") if raw.get("records") else None
    cfg = ExperimentConfig(protocol, params, spec, seed, device, output_dir, config_hash(raw), records)
    logger.debug("parsed %s config %s (hash %s)", protocol, source, cfg.config_hash[:12])
    return cfg


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError("<file>", f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw, path.name)
