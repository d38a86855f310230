"""Observable estimation and direct (pass/fail) certification of states and Clifford gates."""

import logging
from functools import lru_cache

import numpy as np

from .. import settings
from ..devicesim import PAULI_OUTCOMES, Setting
from ..errors import DimensionMismatchError, InvalidInputError, StrategyMismatchError
from ..linalg import Povm, PureState, as_square, is_hermitian, is_psd
from ..randomness import as_generator
from ..stabilizer import CliffordElement, PauliString, StabilizerGroup, choi_stabilizer_group
from ..stats import (
    Estimate,
    gap_certification_n,
    hoeffding_n,
    naive_certification_n,
    stabilizer_certification_n,
)
from .types import Plan, Verdict, grouped_plan, sequence_outcomes

logger = logging.getLogger(__name__)

STRATEGIES = ("exact_povm", "stabilizer_minimax", "gap_aware", "custom")
PASS, FAIL = "pass", "fail"

# eigenstate preparations of single-qubit Pauli letters, keyed by eigenvalue
EIGEN_PREPS = {"X": {1: "+", -1: "-"}, "Y": {1: "r", -1: "l"}, "Z": {1: "0", -1: "1"}}


# --- OBSERVABLES ---

def _observable_measurement(observable, n_qubits):
    """(measure, povm, outcome values, spectral range) for a Pauli label or Hermitian matrix."""
    if isinstance(observable, str):
        observable = PauliString.from_label(observable)
    if isinstance(observable, PauliString):
        if observable.n != n_qubits or not observable.is_hermitian():
            raise InvalidInputError(f"{observable.label} is not a Hermitian {n_qubits}-qubit Pauli")
        width = 0.0 if observable.is_identity_letters() else 2.0
        return observable.label, None, {"+1": 1.0, "-1": -1.0}, width
    A = as_square(observable, "observable")
    if A.shape[0] != 2**n_qubits:
        raise DimensionMismatchError(f"observable has dimension {A.shape[0]}, device {2**n_qubits}")
    if not is_hermitian(A):
        raise InvalidInputError("observable must be Hermitian")
    evals, evecs = np.linalg.eigh((A + A.conj().T) / 2)
    labels = tuple(f"e{i}" for i in range(evals.size))
    povm = Povm(tuple(np.outer(v, v.conj()) for v in evecs.T), labels)
    values = dict(zip(labels, (float(x) for x in evals)))
    return "povm:observable", povm, values, float(evals[-1] - evals[0])


def plan_estimate_observable(observable, spec, n_qubits):
    measure, povm, values, width = _observable_measurement(observable, n_qubits)
    n = hoeffding_n(width, spec)
    setting = Setting("target", (), measure, povm)
    info = {"values": values, "range": width, "epsilon": spec.epsilon, "delta": spec.delta}
    return Plan("observable", (setting,), (n,), ("observable",), None, info)


def analyze_estimate_observable(plan, record):
    batch = record.by_id()["observable"]
    values = plan.info["values"]
    total = sum(values[label] * c for label, c in batch.counts.items())
    return Estimate(
        total / batch.shots,
        plan.info["epsilon"],
        plan.info["delta"],
        batch.shots,
        "observable",
        {"range": plan.info["range"]},
    )


def estimate_observable(device, observable, spec):
    """Empirical mean of eigenvalue outcomes with a Hoeffding sample count."""
    plan = plan_estimate_observable(observable, spec, device.n_qubits)
    return analyze_estimate_observable(plan, plan.execute(device))


def observable_verdict(est, threshold, spec):
    decision = "accept" if est.value >= threshold - spec.epsilon else "reject"
    return Verdict(
        decision,
        spec.epsilon,
        spec.delta,
        est.n_samples_used,
        "observable",
        details={"estimate": est.value, "threshold": float(threshold)},
    )


def observable_certify(device, observable, threshold, spec):
    """Accepts iff the estimated expectation reaches threshold - epsilon."""
    return observable_verdict(estimate_observable(device, observable, spec), threshold, spec)


# --- STRATEGY OPERATORS ---

def minimax_spectral_gap(n_qubits):
    """1 - lambda_2 of the uniform nontrivial-stabilizer strategy: 2^(n-1) / (2^n - 1)."""
    n = int(n_qubits)
    if n < 1:
        raise InvalidInputError(f"number of qubits must be positive, got {n_qubits}")
    return 2 ** (n - 1) / (2**n - 1)


def strategy_operator(decomposition):
    """Omega = sum_i w_i M_i for (weight, pass effect) pairs."""
    if not decomposition:
        raise StrategyMismatchError("custom strategy needs at least one (weight, effect) pair")
    weights = np.array([float(w) for w, _ in decomposition])
    if np.any(weights < 0) or abs(weights.sum() - 1) > settings.TAU_NORM * 1e3:
        raise StrategyMismatchError("strategy weights must form a probability vector")
    effects = [as_square(M, "pass effect") for _, M in decomposition]
    d = effects[0].shape[0]
    for M in effects:
        if M.shape[0] != d or not is_psd(M) or not is_psd(np.eye(d) - M):
            raise StrategyMismatchError("pass effects must satisfy 0 <= M <= 1")
    return sum(w * M for w, M in zip(weights, effects))


def strategy_gap(omega, psi):
    """Spectral gap of Omega after checking <psi|Omega|psi> = 1."""
    vec = psi.amplitudes
    accept = float(np.real(np.vdot(vec, omega @ vec)))
    if accept < 1 - 1e-9:
        raise StrategyMismatchError(f"strategy accepts the target with probability {accept:.6g} < 1")
    evals = np.sort(np.linalg.eigvalsh((omega + omega.conj().T) / 2))[::-1]
    lam2 = float(evals[1]) if evals.size > 1 else 0.0
    return 1.0 - lam2


@lru_cache(maxsize=64)
def _check_stabilizer_target(S):
    if S.n > settings.MAX_CACHED_CLIFFORD_QUBITS:
        return
    strategy_gap(S.minimax_operator_dense(), S.state_vector())


def _target_state(target):
    if isinstance(target, StabilizerGroup):
        return target.state_vector()
    if isinstance(target, PureState):
        return target
    raise StrategyMismatchError("target must be a StabilizerGroup or a PureState")


# --- STATE CERTIFICATION ---

def plan_direct_state_certify(target, spec, strategy="stabilizer_minimax", rng=None, decomposition=None, adaptive=True):
    if strategy not in STRATEGIES:
        raise StrategyMismatchError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    gen = as_generator(rng)
    draws, passes = [], []
    if strategy == "exact_povm":
        psi = _target_state(target)
        povm = Povm.two_outcome(psi.projector(), (PASS, FAIL))
        n = naive_certification_n(spec)
        gap = 1.0
        setting = Setting("target", (), "povm:target", povm)
        draws = [("exact", setting)] * n
        passes = [PASS] * n
    elif strategy in ("stabilizer_minimax", "gap_aware"):
        if not isinstance(target, StabilizerGroup):
            raise StrategyMismatchError(f"{strategy} needs a stabilizer target")
        _check_stabilizer_target(target)
        gap = minimax_spectral_gap(target.n)
        n = stabilizer_certification_n(spec) if strategy == "stabilizer_minimax" else gap_certification_n(spec, gap)
        cache = {}
        for mask in gen.integers(1, 2**target.n, size=n):
            mask = int(mask)
            if mask not in cache:
                label = target.element(mask).label
                cache[mask] = (f"stab{label}", Setting("target", (), label))
            draws.append(cache[mask])
            passes.append(PAULI_OUTCOMES[0])
    else:
        psi = _target_state(target)
        omega = strategy_operator(decomposition)
        if omega.shape[0] != psi.dim:
            raise DimensionMismatchError("strategy and target dimensions differ")
        gap = strategy_gap(omega, psi)
        n = gap_certification_n(spec, gap)
        weights = np.array([float(w) for w, _ in decomposition])
        options = [
            (f"custom{i}", Setting("target", (), f"povm:custom{i}", Povm.two_outcome(M, (PASS, FAIL))))
            for i, (_, M) in enumerate(decomposition)
        ]
        for i in gen.choice(len(options), size=n, p=weights / weights.sum()):
            draws.append(options[int(i)])
            passes.append(PASS)
    info = {
        "strategy": strategy,
        "pass": tuple(passes),
        "gap": gap,
        "adaptive": bool(adaptive),
        "epsilon": spec.epsilon,
        "delta": spec.delta,
    }
    logger.debug("direct certification plan: %s, n=%d, gap=%.4g", strategy, n, gap)
    return grouped_plan("direct_state", draws, info)


def _pass_fail_verdict(plan, record, protocol):
    outcomes = sequence_outcomes(plan, record)
    fails = [i for i, (got, ok) in enumerate(zip(outcomes, plan.info["pass"])) if got != ok]
    n = len(outcomes)
    first = fails[0] if fails else None
    if first is None:
        decision, n_used = "accept", n
    else:
        decision = "reject"
        n_used = first + 1 if plan.info["adaptive"] else n
    return Verdict(
        decision,
        plan.info["epsilon"],
        plan.info["delta"],
        n_used,
        protocol,
        n_planned=n,
        details={
            "strategy": plan.info.get("strategy"),
            "gap": plan.info["gap"],
            "first_failure": first,
            "n_fail": len(fails),
        },
    )


def analyze_direct_state_certify(plan, record):
    """Rejects at the first failed shot (adaptive) or on any failure (batch)."""
    return _pass_fail_verdict(plan, record, "direct_state")


def direct_state_certify(device, target, spec, strategy="stabilizer_minimax", rng=None, decomposition=None, adaptive=True):
    plan = plan_direct_state_certify(target, spec, strategy, rng, decomposition, adaptive)
    return analyze_direct_state_certify(plan, plan.execute(device))


# --- PROCESS CERTIFICATION ---

def pam_setting(element, n_qubits, gen, gate_id):
    """Prepare-and-measure realisation of one Choi stabilizer sigma * A (x) B.

    Returns (setting, expected outcome): the input is a random product eigenstate
    of B, the process runs once, and A is measured; the shot passes when the
    outcome equals sign(sigma) * (-1)^#Y(B) * (eigenvalue of the prepared state).
    """
    letters = element.letters
    out_letters, in_letters = letters[:n_qubits], letters[n_qubits:]
    sigma = 1 if element.phase == 0 else -1
    tau = sigma * (-1) ** in_letters.count("Y")
    prep, lam = [], 1
    for c in in_letters:
        mu = 1 if gen.integers(2) == 0 else -1
        if c == "I":
            prep.append("0" if mu == 1 else "1")
            continue
        prep.append(EIGEN_PREPS[c][mu])
        lam *= mu
    expected = PAULI_OUTCOMES[0] if lam * tau == 1 else PAULI_OUTCOMES[1]
    return Setting("".join(prep), (gate_id,), "+" + out_letters), expected


def plan_direct_process_certify(target, spec, rng=None, gate_id=None, adaptive=True):
    if not isinstance(target, CliffordElement):
        raise StrategyMismatchError("direct process certification needs a Clifford target")
    n = target.n
    gate_id = target.label if gate_id is None else str(gate_id)
    group = choi_stabilizer_group(target)
    gen = as_generator(rng)
    n_samples = stabilizer_certification_n(spec)
    draws, passes = [], []
    for mask in gen.integers(1, 4**n, size=n_samples):
        setting, expected = pam_setting(group.element(int(mask)), n, gen, gate_id)
        draws.append((f"pam-{setting.prep}-{setting.measure}", setting))
        passes.append(expected)
    info = {
        "strategy": "choi_stabilizer",
        "pass": tuple(passes),
        "gap": minimax_spectral_gap(2 * n),
        "adaptive": bool(adaptive),
        "epsilon": spec.epsilon,
        "delta": spec.delta,
    }
    return grouped_plan("direct_process", draws, info)


def analyze_direct_process_certify(plan, record):
    return _pass_fail_verdict(plan, record, "direct_process")


def direct_process_certify(device, target, spec, rng=None, gate_id=None, adaptive=True):
    """Certifies entanglement infidelity <= epsilon of the gate behind `gate_id`."""
    plan = plan_direct_process_certify(target, spec, rng, gate_id, adaptive)
    return analyze_direct_process_certify(plan, plan.execute(device))
