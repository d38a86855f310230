"""Fidelity estimation: direct fidelity estimation, shadow fidelity estimation, threshold certification."""

import logging
import math

import numpy as np

from .. import settings
from ..devicesim import PAULI_OUTCOMES, Setting
from ..errors import DimensionMismatchError, InvalidInputError
from ..linalg import DensityMatrix, PureState, infidelity_trace_distance_bounds
from ..randomness import UnitaryEnsemble, as_generator, verify_design
from ..stabilizer import PauliString, StabilizerGroup, pauli_expectation_table, sample_clifford, stabilizer_overlap
from ..stats import ConfidenceSpec, Estimate, median_of_means, mom_sample_plan
from .types import DISTANCES, Plan, Verdict, grouped_plan, sequence_outcomes

logger = logging.getLogger(__name__)

DFE_MODES = ("general", "well_conditioned")
SUPPORT_CUTOFF = 1e-12
SFE_VARIANCE_BOUND = 5.0


def _n_qubits(dim):
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise DimensionMismatchError(f"dimension {dim} is not a power of two")
    return n


def _pure_target(target):
    """(n_qubits, PureState or StabilizerGroup) after rejecting mixed targets."""
    if isinstance(target, StabilizerGroup):
        return target.n, target
    if isinstance(target, DensityMatrix):
        if abs(target.purity() - 1) > settings.TAU_UNIT:
            raise InvalidInputError(f"target has purity {target.purity():.12g}; a pure target is required")
        evals, evecs = np.linalg.eigh(target.matrix)
        target = PureState.normalized(evecs[:, -1])
    if not isinstance(target, PureState):
        raise InvalidInputError("target must be a StabilizerGroup, PureState or pure DensityMatrix")
    return _n_qubits(target.dim), target


# --- DIRECT FIDELITY ESTIMATION ---

def _pauli_support(target, n):
    """(x ints, z ints, Tr[W_k rho], q_k) over Paulis with non-zero target expectation."""
    d = 2**n
    if isinstance(target, StabilizerGroup):
        elems = target.elements()
        xs = np.array([p.x_int for p in elems])
        zs = np.array([p.z_int for p in elems])
        vals = np.array([1.0 if p.phase == 0 else -1.0 for p in elems])
        return xs, zs, vals, np.full(d, 1.0 / d)
    table = pauli_expectation_table(target, n)
    xs, zs = np.nonzero(np.abs(table) > SUPPORT_CUTOFF)
    vals = table[xs, zs]
    q = vals**2 / d
    return xs, zs, vals, q / q.sum()


def dfe_settings_count(spec, mode, alpha=1.0):
    if mode == "well_conditioned":
        return max(1, math.ceil(2 / (alpha**2 * spec.epsilon**2) * math.log(2 / spec.delta)))
    return max(1, math.ceil(1 / (spec.epsilon**2 * spec.delta)))


def dfe_shots_per_setting(value, ell, spec):
    """m_i = ceil(2 / (d chi^2 l eps^2) ln(2/delta)) with d chi^2 = Tr[W_k rho]^2."""
    return max(1, math.ceil(2 / (value**2 * ell * spec.epsilon**2) * math.log(2 / spec.delta)))


def dfe_expected_preparations(spec, d):
    return 1 + 1 / (spec.epsilon**2 * spec.delta) + 2 * d / spec.epsilon**2 * math.log(2 / spec.delta)


def plan_dfe(target, spec, mode="well_conditioned", alpha=None, rng=None):
    if mode not in DFE_MODES:
        raise InvalidInputError(f"DFE mode must be one of {DFE_MODES}, got {mode!r}")
    n, target = _pure_target(target)
    xs, zs, vals, q = _pauli_support(target, n)
    if mode == "well_conditioned":
        floor = float(np.min(np.abs(vals)))
        alpha = floor if alpha is None else float(alpha)
        if not 0 < alpha <= 1:
            raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
        if floor < alpha - settings.TAU_UNIT:
            raise InvalidInputError(f"target is not {alpha:.4g}-well-conditioned (smallest |Tr[W rho]| = {floor:.4g})")
        ell = dfe_settings_count(spec, mode, alpha)
    else:
        ell = dfe_settings_count(spec, mode)
    gen = as_generator(rng)
    picks, multiplicity = np.unique(gen.choice(q.size, size=ell, p=q), return_counts=True)
    settings_list, shots, ids, table = [], [], [], {}
    for idx, count in zip(picks, multiplicity):
        letters = PauliString.from_ints(n, int(xs[idx]), int(zs[idx])).letters
        value = float(vals[idx])
        m = 1 if mode == "well_conditioned" else dfe_shots_per_setting(value, ell, spec)
        sid = f"dfe-{letters}"
        settings_list.append(Setting("target", (), "+" + letters))
        shots.append(int(count) * m)
        ids.append(sid)
        table[sid] = (value, m)
    if mode == "general":
        eps_out, delta_out = 2 * spec.epsilon, min(1.0, 2 * spec.delta)
    else:
        eps_out, delta_out = spec.epsilon, spec.delta
    info = {
        "mode": mode,
        "alpha": alpha,
        "ell": ell,
        "table": table,
        "epsilon": eps_out,
        "delta": delta_out,
        "expected_preparations": dfe_expected_preparations(spec, 2**n),
    }
    logger.debug("DFE plan: mode=%s l=%d distinct=%d shots=%d", mode, ell, len(ids), sum(shots))
    return Plan("dfe", tuple(settings_list), tuple(shots), tuple(ids), None, info)


def analyze_dfe(plan, record):
    """Y = (1/l) sum_i (1/m_i) sum_j A_ij / Tr[W_ki rho]."""
    batches = record.by_id()
    total = 0.0
    for sid, (value, m) in plan.info["table"].items():
        counts = batches[sid].counts
        signed = counts.get(PAULI_OUTCOMES[0], 0) - counts.get(PAULI_OUTCOMES[1], 0)
        total += signed / (m * value)
    shots_used = sum(batches[sid].shots for sid in plan.info["table"])
    return Estimate(
        total / plan.info["ell"],
        plan.info["epsilon"],
        plan.info["delta"],
        shots_used,
        "dfe",
        {
            "mode": plan.info["mode"],
            "ell": plan.info["ell"],
            "alpha": plan.info["alpha"],
            "distinct_settings": len(plan.info["table"]),
            "expected_preparations": plan.info["expected_preparations"],
        },
    )


def dfe(device, target, spec, mode="well_conditioned", alpha=None, rng=None):
    plan = plan_dfe(target, spec, mode, alpha, rng)
    return analyze_dfe(plan, plan.execute(device))


# --- SHADOW FIDELITY ESTIMATION ---

def plan_sfe(target, spec, ensemble=None, rng=None, n_requested=None, constant=settings.SFE_CONSTANT):
    n, target = _pure_target(target)
    d = 2**n
    ensemble = UnitaryEnsemble.clifford(n) if ensemble is None else ensemble
    if ensemble.dim != d:
        raise DimensionMismatchError(f"ensemble acts on dimension {ensemble.dim}, target on {d}")
    verify_design(ensemble, 3).raise_if_failed()
    n_samples, group_size, n_groups = mom_sample_plan(spec, constant, n_requested)
    gen = as_generator(rng)
    psi = target.state_vector() if isinstance(target, StabilizerGroup) else target
    tableau_path = ensemble.kind == "clifford" and isinstance(target, StabilizerGroup)
    draws, overlaps = [], {}
    for i in range(n_samples):
        if ensemble.kind == "clifford":
            c = sample_clifford(gen, n)
            sid = f"sfe-{c.label}"
            if sid not in overlaps:
                overlaps[sid] = c if tableau_path else np.abs(c.to_dense() @ psi.amplitudes) ** 2
            draws.append((sid, Setting("target", (), "Z", basis=(c.label,))))
        else:
            U = ensemble.sample(gen)
            sid = f"sfe{i:07d}"
            overlaps[sid] = np.abs(U @ psi.amplitudes) ** 2
            draws.append((sid, Setting("target", (), "Z", operators=(("sfe_unitary", U),), basis=("sfe_unitary",))))
    info = {
        "target": target,
        "dim": d,
        "overlaps": overlaps,
        "group_size": group_size,
        "n_groups": n_groups,
        "epsilon": spec.epsilon,
        "delta": spec.delta,
    }
    logger.debug("SFE plan: n=%d in %d groups of %d", n_samples, n_groups, group_size)
    return grouped_plan("sfe", draws, info)


def sfe_single_shot_estimates(plan, record):
    """f_i = (d + 1) <b_i| U_i rho U_i^dagger |b_i> - 1 in draw order."""
    d = plan.info["dim"]
    target = plan.info["target"]
    overlaps = plan.info["overlaps"]
    out = np.empty(len(plan.order))
    for i, (sid, b) in enumerate(zip(plan.order, sequence_outcomes(plan, record))):
        entry = overlaps[sid]
        if isinstance(entry, np.ndarray):
            overlap = entry[int(b, 2)]
        else:
            overlap = stabilizer_overlap(target, entry, b)
        out[i] = (d + 1) * overlap - 1
    return out


def analyze_sfe(plan, record):
    f = sfe_single_shot_estimates(plan, record)
    variance = float(f.var(ddof=1)) if f.size > 1 else 0.0
    if variance > SFE_VARIANCE_BOUND:
        logger.warning("single-shot variance %.3g exceeds the 3-design bound %.1f", variance, SFE_VARIANCE_BOUND)
    return Estimate(
        median_of_means(f, plan.info["n_groups"]),
        plan.info["epsilon"],
        plan.info["delta"],
        f.size,
        "sfe",
        {
            "mean": float(f.mean()),
            "variance": variance,
            "group_size": plan.info["group_size"],
            "n_groups": plan.info["n_groups"],
        },
    )


def sfe(device, target, spec, ensemble=None, rng=None, n_requested=None):
    plan = plan_sfe(target, spec, ensemble, rng, n_requested)
    return analyze_sfe(plan, plan.execute(device))


# --- THRESHOLD CERTIFICATION ---

def certification_gap(epsilon, policy="trace_distance"):
    """Distance below 1 at which an estimate still accepts: eps^2/2 or eps/2."""
    if policy not in DISTANCES:
        raise InvalidInputError(f"policy must be one of {DISTANCES}, got {policy!r}")
    if not 0 < epsilon <= 1:
        raise InvalidInputError(f"certification epsilon must lie in (0, 1], got {epsilon}")
    return epsilon**2 / 2 if policy == "trace_distance" else epsilon / 2


def estimation_spec(epsilon, delta, policy="trace_distance"):
    """Accuracy the underlying fidelity estimate needs for a sound threshold test."""
    return ConfidenceSpec(certification_gap(epsilon, policy), delta)


def certify_from_estimate(est, epsilon, policy="trace_distance"):
    gap = certification_gap(epsilon, policy)
    threshold = 1 - gap
    decision = "accept" if est.value >= threshold else "reject"
    F = float(np.clip(est.value, 0.0, 1.0))
    lower, upper = infidelity_trace_distance_bounds(F)
    return Verdict(
        decision,
        float(epsilon),
        est.delta,
        est.n_samples_used,
        f"{est.method}_threshold",
        distance=policy,
        details={
            "estimate": est.value,
            "threshold": threshold,
            "infidelity": 1 - F,
            "trace_distance_interval": [lower, upper],
        },
    )
