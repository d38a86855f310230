"""Cross-entropy benchmarking of explicit circuit unitaries."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .. import settings
from ..devicesim import Setting
from ..errors import InvalidInputError
from ..linalg import as_square, is_unitary
from ..stats import THREE_SIGMA_DELTA, Estimate
from .types import Plan

logger = logging.getLogger(__name__)

ESTIMATORS = ("linear", "log", "dxe")
PT_MODES = ("ks_statistic", "moment")
KS_THRESHOLD = 0.05
CIRCUIT_ID = "xeb_circuit"
# Var[v^k] for v ~ Exp(1): (2k)! - (k!)^2
_PT_MOMENT_VARIANCE = {1: 1.0, 2: 20.0, 3: 684.0}


def _check_circuit(U):
    U = as_square(U, "circuit unitary")
    n = int(round(math.log2(U.shape[0])))
    if 2**n != U.shape[0] or n > settings.MAX_DENSE_QUBITS:
        raise InvalidInputError(f"circuit must act on 1 to {settings.MAX_DENSE_QUBITS} qubits")
    if not is_unitary(U, settings.TAU_UNITARY_CHECK):
        raise InvalidInputError("circuit matrix is not unitary")
    return U, n


def ideal_probabilities(U):
    """p_U(x) = |<x|U|0>|^2."""
    return np.abs(np.asarray(U)[:, 0]) ** 2


# --- DISTRIBUTION MEASURES ---

def entropy(p):
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def cross_entropy(q, p):
    """H_X(q, p) = -sum q ln p; infinite when q puts weight where p vanishes."""
    q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
    support = q > 0
    if np.any(p[support] <= 0):
        return math.inf
    return float(-np.sum(q[support] * np.log(p[support])))


def cross_entropy_fidelity(q, p):
    q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
    return float(np.sum(q * (p.size * p - 1)))


def cross_entropy_difference(q, p):
    """H_X(p_uni, p) - H_X(q, p)."""
    p = np.asarray(p, dtype=float)
    return cross_entropy(np.full(p.size, 1.0 / p.size), p) - cross_entropy(q, p)


def cross_entropy_discrepancy(q, p):
    """H_X(q, p) - H(p); bounds the KL divergence when H(q) >= H(p)."""
    return cross_entropy(q, p) - entropy(p)


def pinsker_tv_bound(discrepancy):
    return math.sqrt(max(discrepancy, 0.0) / 2)


def total_variation(q, p):
    return 0.5 * float(np.sum(np.abs(np.asarray(q, dtype=float) - np.asarray(p, dtype=float))))


def porter_thomas_entropy(d):
    return math.log(d) + settings.EULER_GAMMA - 1


def porter_thomas_uniform_cross_entropy(d):
    return math.log(d) + settings.EULER_GAMMA


def haar_xeb_fidelity(d):
    """E_U[F_X(p_U, p_U)] = (d - 1) / (d + 1) over a unitary 2-design."""
    return (d - 1) / (d + 1)


def max_probability_tail_bound(d, b):
    """Pr_U[max_x p_U(x) >= b] <= d exp(-d b / e)."""
    return min(1.0, d * math.exp(-d * b / math.e))


def xeb_sample_count(spec, d):
    """m = ceil(e^2 / (2 eps^2) ln^2(2d/delta) ln(2/delta))."""
    return max(
        1,
        math.ceil(
            settings.E_SQUARED / (2 * spec.epsilon**2) * math.log(2 * d / spec.delta) ** 2 * math.log(2 / spec.delta)
        ),
    )


# --- PORTER-THOMAS ---

@dataclass(frozen=True)
class PorterThomasReport:
    mode: str
    statistic: float
    pvalue: float
    moments: tuple
    expected_moments: tuple
    moment_stderr: tuple
    passed: bool


def porter_thomas_moments(d):
    """E[(d p_U(x))^k] for k = 1, 2, 3 under the Haar measure."""
    return (1.0, 2 * d / (d + 1), 6 * d**2 / ((d + 1) * (d + 2)))


def porter_thomas_check(U, mode="ks_statistic"):
    """Compares {d p_U(x)} with Exp(1) by Kolmogorov-Smirnov distance or first three moments."""
    if mode not in PT_MODES:
        raise InvalidInputError(f"mode must be one of {PT_MODES}, got {mode!r}")
    U, _ = _check_circuit(U)
    d = U.shape[0]
    v = d * ideal_probabilities(U)
    ks = stats.kstest(v, "expon")
    moments = tuple(float(np.mean(v**k)) for k in (1, 2, 3))
    expected = porter_thomas_moments(d)
    stderr = tuple(math.sqrt(_PT_MOMENT_VARIANCE[k] / d) for k in (1, 2, 3))
    if mode == "ks_statistic":
        passed = ks.statistic < KS_THRESHOLD
    else:
        passed = all(abs(m - e) <= 3 * s for m, e, s in zip(moments, expected, stderr))
    return PorterThomasReport(mode, float(ks.statistic), float(ks.pvalue), moments, expected, stderr, bool(passed))


# --- PROTOCOL ---

def plan_xeb(U, shots=None, spec=None, setting_id="xeb"):
    U, n = _check_circuit(U)
    d = 2**n
    if shots is None:
        if spec is None:
            raise InvalidInputError("XEB needs either a shot count or a confidence spec")
        shots = xeb_sample_count(spec, d)
    shots = int(shots)
    if shots < 1:
        raise InvalidInputError("XEB needs at least one shot")
    setting = Setting("0" * n, (CIRCUIT_ID,), "Z", operators=((CIRCUIT_ID, U),))
    info = {"probs": ideal_probabilities(U), "n_qubits": n, "epsilon": None if spec is None else spec.epsilon}
    if spec is not None:
        info["delta"] = spec.delta
    return Plan("xeb", (setting,), (shots,), (str(setting_id),), None, info)


def analyze_xeb(plan, record, estimator="linear"):
    if estimator not in ESTIMATORS:
        raise InvalidInputError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    probs = plan.info["probs"]
    d = probs.size
    batch = record.by_id()[plan.setting_ids[0]]
    idx = np.array([int(label, 2) for label in batch.counts], dtype=np.int64)
    freq = np.array(list(batch.counts.values()), dtype=float)
    m = float(freq.sum())
    observed = probs[idx]
    details = {"shots": int(m), "ideal_fidelity": cross_entropy_fidelity(probs, probs)}
    if estimator == "linear":
        values = d * observed - 1
    elif np.any(observed <= 0):
        logger.warning("an observed outcome has zero ideal probability; cross entropy is infinite")
        details["infinite_cross_entropy"] = True
        value = math.inf if estimator == "log" else -math.inf
        return Estimate(value, math.inf, THREE_SIGMA_DELTA, int(m), f"xeb_{estimator}", details)
    else:
        values = -np.log(observed)
        details["infinite_cross_entropy"] = False
    mean = float(np.sum(freq * values) / m)
    spread = math.sqrt(max(0.0, float(np.sum(freq * (values - mean) ** 2) / max(m - 1, 1))))
    if estimator == "log":
        details["discrepancy"] = mean - entropy(probs)
        details["pinsker_tv_bound"] = pinsker_tv_bound(details["discrepancy"])
    if estimator == "dxe":
        shift = cross_entropy(np.full(d, 1.0 / d), probs)
        details["shift"] = shift
        mean = shift - mean
    eps = plan.info["epsilon"] if plan.info["epsilon"] is not None else 3 * spread / math.sqrt(m)
    delta = plan.info.get("delta", THREE_SIGMA_DELTA)
    return Estimate(mean, eps, delta, int(m), f"xeb_{estimator}", details)


def xeb(device, U, shots=None, estimator="linear", spec=None, setting_id="xeb"):
    plan = plan_xeb(U, shots, spec, setting_id)
    return analyze_xeb(plan, plan.execute(device), estimator)
