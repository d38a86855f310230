"""Standard and interleaved randomized benchmarking over the Clifford group."""

import logging
import math
import warnings

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .. import settings
from ..devicesim import Setting
from ..errors import InvalidInputError, ProtocolFailure
from ..randomness import as_generator
from ..stabilizer import CliffordElement, sample_clifford
from ..stats import THREE_SIGMA_DELTA, Estimate, empirical_mean_with_stderr
from ..channels import composite_param_bound
from .types import Plan, RbCurve, RbFit

logger = logging.getLogger(__name__)

UNITARITY_SOURCES = ("oracle", "assumed")
FIT_BOUNDS = ([-2.0, -1.0, 0.0], [2.0, 2.0, 1.0])
FLAT_SPREAD = 1e-12


def _check_lengths(lengths):
    lengths = [int(m) for m in lengths]
    if not lengths or lengths[0] < 1 or any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise InvalidInputError(f"sequence lengths must be positive and strictly increasing, got {lengths}")
    return lengths


def rb_sequence(gen, n_qubits, m, interleaved=None, interleaved_id=None):
    """Gate ids of m random Cliffords (each followed by the interleaved gate) and their inverse."""
    total = CliffordElement.identity(n_qubits)
    ids = []
    for _ in range(m):
        g = sample_clifford(gen, n_qubits)
        total = g.compose(total)
        ids.append(g.label)
        if interleaved is not None:
            total = interleaved.compose(total)
            ids.append(interleaved_id)
    inverse = total.inverse()
    if not inverse.compose(total).is_identity():
        raise ProtocolFailure("sequence inverse does not restore the identity", {"length": m})
    ids.append(inverse.label)
    return tuple(ids)


def plan_rb(n_qubits, lengths, n_sequences, shots, rng=None, interleaved=None, interleaved_id=None):
    """Reference decay settings, plus the interleaved decay when a target Clifford is given."""
    lengths = _check_lengths(lengths)
    n_sequences, shots = int(n_sequences), int(shots)
    if n_sequences < 1 or shots < 1 or n_sequences * shots < settings.RB_MIN_SAMPLES_PER_POINT:
        raise InvalidInputError(
            f"need K * s >= {settings.RB_MIN_SAMPLES_PER_POINT} per length, got K={n_sequences}, s={shots}"
        )
    if interleaved is not None:
        if not isinstance(interleaved, CliffordElement) or interleaved.n != n_qubits:
            raise InvalidInputError(f"interleaved gate must be a {n_qubits}-qubit Clifford")
        interleaved_id = interleaved.label if interleaved_id is None else str(interleaved_id)
    gen = as_generator(rng)
    prep = "0" * n_qubits
    settings_list, ids, curves = [], [], {}
    kinds = ["reference"] if interleaved is None else ["reference", "interleaved"]
    for kind in kinds:
        curves[kind] = {}
        extra = (interleaved, interleaved_id) if kind == "interleaved" else (None, None)
        for m in lengths:
            curves[kind][m] = []
            for k in range(n_sequences):
                seq = rb_sequence(gen, n_qubits, m, *extra)
                sid = f"{kind[:3]}-m{m}-k{k}"
                settings_list.append(Setting(prep, seq, "Z"))
                ids.append(sid)
                curves[kind][m].append(sid)
    info = {"n_qubits": n_qubits, "lengths": lengths, "n_sequences": n_sequences, "shots": shots, "curves": curves}
    logger.debug("RB plan: %d sequences over lengths %s", len(ids), lengths)
    return Plan("rb", tuple(settings_list), (shots,) * len(ids), tuple(ids), None, info)


# --- FITTING ---

def _decay(m, A, B, p):
    return A * np.power(p, m) + B


def _initial_guess(x, y):
    tail = max(1, len(y) // 4)
    B0 = float(np.mean(y[-tail:]))
    shifted = y - B0
    keep = shifted > FLAT_SPREAD
    if np.count_nonzero(keep) >= 2:
        slope = np.polyfit(x[keep], np.log(shifted[keep]), 1)[0]
        p0 = float(np.clip(math.exp(slope), 0.01, 0.999))
    else:
        p0 = 0.9
    A0 = float(np.clip((y[0] - B0) / p0 ** x[0], -1.99, 1.99))
    return [A0, float(np.clip(B0, -0.99, 1.99)), p0]


def fit_rb_decay(lengths, survival, stderr, dim):
    """Least-squares fit of A p^m + B; non-convergence raises ProtocolFailure with residuals."""
    x = np.asarray(lengths, dtype=float)
    y = np.asarray(survival, dtype=float)
    if x.size != y.size or x.size < 1:
        raise InvalidInputError("one survival value per length is required")
    if np.ptp(y) < FLAT_SPREAD:
        B = 1.0 / dim
        return RbFit(float(y.mean() - B), B, 1.0, {"A": 0.0, "B": 0.0, "p": 0.0}, tuple(np.zeros(x.size)))
    if x.size < 3:
        raise ProtocolFailure("an exponential fit needs at least three lengths", {"lengths": x.tolist()})
    # if at least one of the std values is zero, then sigma is replaced by None
    sigma = np.asarray(stderr, dtype=float)
    if np.any(sigma == 0) or not np.all(np.isfinite(sigma)):
        sigma = None
    guess = _initial_guess(x, y)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", OptimizeWarning)
            params, pcov = curve_fit(_decay, x, y, p0=guess, sigma=sigma, bounds=FIT_BOUNDS, maxfev=10000)
    except (RuntimeError, OptimizeWarning, ValueError) as exc:
        residuals = (y - _decay(x, *guess)).tolist()
        raise ProtocolFailure(
            f"RB decay fit did not converge: {exc}",
            {"lengths": x.tolist(), "survival": y.tolist(), "initial": guess, "residuals": residuals},
        ) from exc
    A, B, p = (float(v) for v in params)
    errs = np.sqrt(np.abs(np.diag(pcov)))
    residuals = tuple(float(r) for r in y - _decay(x, A, B, p))
    return RbFit(A, B, p, {"A": float(errs[0]), "B": float(errs[1]), "p": float(errs[2])}, residuals)


def agf_from_decay(p, dim):
    return (1 - 1 / dim) * p + 1 / dim


# --- ANALYSIS ---

def _curve(record, sids_by_length, n_qubits, n_sequences, shots):
    batches = record.by_id()
    ground = "0" * n_qubits
    lengths, means, errs = [], [], []
    for m, sids in sids_by_length.items():
        values = []
        for sid in sids:
            batch = batches.get(sid)
            if batch is None:
                raise InvalidInputError(f"record has no batch for RB sequence {sid!r}")
            values.append(batch.counts.get(ground, 0) / batch.shots)
        mean, err = empirical_mean_with_stderr(values)
        if not math.isfinite(err):
            err = math.sqrt(mean * (1 - mean) / shots)
        lengths.append(m)
        means.append(min(1.0, max(0.0, mean)))
        errs.append(err)
    fit = fit_rb_decay(lengths, means, errs, 2**n_qubits)
    return RbCurve(tuple(lengths), tuple(means), tuple(errs), n_sequences, shots, fit)


def analyze_rb(plan, record, kind="reference"):
    info = plan.info
    return _curve(record, info["curves"][kind], info["n_qubits"], info["n_sequences"], info["shots"])


def rb_estimate(curve, dim, n_shots):
    fit = curve.fit
    scale = 1 - 1 / dim
    return Estimate(
        agf_from_decay(fit.p, dim),
        3 * scale * fit.stderr["p"],
        THREE_SIGMA_DELTA,
        n_shots,
        "rb",
        {"p": fit.p, "A": fit.A, "B": fit.B, "p_stderr": fit.stderr["p"]},
    )


def rb_standard(device, lengths, n_sequences, shots, rng=None):
    """(RbCurve, Estimate of the average gate fidelity) from a single-exponential fit."""
    n = device.n_qubits
    plan = plan_rb(n, lengths, n_sequences, shots, rng)
    record = plan.execute(device)
    curve = analyze_rb(plan, record)
    return curve, rb_estimate(curve, 2**n, plan.n_planned)


def interleaved_estimate(ref, inter, dim, unitarity_source="assumed", unitarity=None, incoherence=0.0, n_shots=1):
    """Target-gate decay bracket from the reference and interleaved fits."""
    if unitarity_source not in UNITARITY_SOURCES:
        raise InvalidInputError(f"unitarity source must be one of {UNITARITY_SOURCES}")
    p_ref, p_int = ref.fit.p, inter.fit.p
    if unitarity_source == "oracle":
        if unitarity is None:
            raise InvalidInputError("oracle unitarity source needs a unitarity value")
        u = float(unitarity)
    else:
        u = min(1.0, p_ref**2 + float(incoherence))
    if not 0 < u <= 1:
        raise InvalidInputError(f"unitarity must lie in (0, 1], got {u}")
    root = math.sqrt(u)
    center, systematic = composite_param_bound(min(p_int, root), min(p_ref, root), u)
    if p_ref > 0 and p_int > 0:
        statistical = center * math.hypot(inter.fit.stderr["p"] / p_int, ref.fit.stderr["p"] / p_ref)
    else:
        statistical = math.inf
    halfwidth = systematic + 3 * statistical
    scale = (dim - 1) / dim
    uninformative = halfwidth > settings.IRB_UNINFORMATIVE_HALFWIDTH
    if uninformative:
        logger.warning("interleaved bound is uninformative: halfwidth %.3g", halfwidth)
    return Estimate(
        scale * center + 1 / dim,
        scale * halfwidth,
        THREE_SIGMA_DELTA,
        n_shots,
        "irb",
        {
            "p_center": center,
            "p_halfwidth": halfwidth,
            "systematic": systematic,
            "statistical": statistical,
            "p_ratio": p_int / p_ref if p_ref > 0 else math.inf,
            "agf_ratio": agf_from_decay(p_int / p_ref, dim) if p_ref > 0 else math.inf,
            "p_reference": p_ref,
            "p_interleaved": p_int,
            "unitarity": u,
            "unitarity_source": unitarity_source,
            "uninformative": uninformative,
        },
    )


def rb_interleaved(
    device,
    target,
    lengths,
    n_sequences,
    shots,
    rng=None,
    unitarity_source="assumed",
    unitarity=None,
    incoherence=0.0,
    gate_id=None,
):
    """(reference curve, interleaved curve, Estimate of the target gate's AGF)."""
    n = device.n_qubits
    plan = plan_rb(n, lengths, n_sequences, shots, rng, target, gate_id)
    record = plan.execute(device)
    ref = analyze_rb(plan, record, "reference")
    inter = analyze_rb(plan, record, "interleaved")
    est = interleaved_estimate(ref, inter, 2**n, unitarity_source, unitarity, incoherence, plan.n_planned)
    return ref, inter, est
