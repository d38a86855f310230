"""Acceptance suites driven by `qcertbench verify <suite>`.

Each suite returns rows of (check, measured, expected, tolerance, passed, detail);
`run_suites` collects them into one report table.
"""

import logging
import math
import tempfile
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import comb
from tqdm import tqdm
from tqdm.contrib.logging import logging_redirect_tqdm

from . import settings
from .channels import (
    Channel,
    NoiseModel,
    amplitude_damping,
    bit_flip,
    composite_param_bound,
    depolarizing,
    diamond_distance_brute_force,
    diamond_distance_unitaries,
    diamond_trace_bounds,
    effective_depol_parameter,
    identity_channel,
    infidelity_diamond_bounds,
    random_channel,
    twirl,
    unitarity,
    unitary_channel,
)
from .devicesim import DeviceConfig, SimulatedDevice
from .errors import ProtocolFailure, QCertError
from .linalg import (
    fidelity,
    hs_inner,
    projector_positive_part,
    pure_state_fidelity,
    schatten_norm,
    swap_operator,
    trace_distance,
    vectorize,
)
from .protocols.direct import (
    analyze_direct_process_certify,
    analyze_direct_state_certify,
    minimax_spectral_gap,
    plan_direct_process_certify,
    plan_direct_state_certify,
)
from .protocols.fidelity import analyze_dfe, analyze_sfe, plan_dfe, plan_sfe, sfe_single_shot_estimates
from .protocols.rb import rb_interleaved, rb_standard
from .protocols.types import sequence_outcomes
from .protocols.xeb import analyze_xeb, plan_xeb, porter_thomas_check
from .randomness import (
    SeededRng,
    UnitaryEnsemble,
    sample_density_matrix,
    sample_haar_state,
    sample_haar_unitary,
    sym_projector,
    verify_design,
    verify_state_design,
)
from .stabilizer import CliffordElement, StabilizerGroup, enumerate_stabilizer_states, sample_clifford
from .stats import ConfidenceSpec, empirical_mean_with_stderr, mom_sample_plan, stabilizer_certification_n

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["suite", "check", "measured", "expected", "tolerance", "passed", "detail"]
GHZ3 = ("+XXX", "+ZZI", "+IZZ")
BELL = ("+XX", "+ZZ")


@dataclass(frozen=True)
class SuiteContext:
    quick: bool = False
    threads: int = settings.MAX_WORKERS
    seed: int = settings.DEFAULT_SEED

    def count(self, full, quick):
        return quick if self.quick else full

    def stream(self, *keys):
        return SeededRng(self.seed, keys)

    def rng(self, *keys):
        return self.stream(*keys).generator()


def _row(check, measured, expected, tolerance, passed, detail=""):
    return {
        "check": check,
        "measured": float(measured),
        "expected": float(expected),
        "tolerance": float(tolerance),
        "passed": bool(passed),
        "detail": detail,
    }


def _trial(fn):
    """Wraps a per-trial worker so it returns (result, status) like the pool expects."""

    def run(index):
        try:
            return fn(index), "Done"
        except QCertError as exc:
            logger.debug("trial %d failed: %s", index, exc)
            return None, "Failed"

    return run


def _parallel(ctx, fn, n_items, desc):
    """Runs fn(0..n-1) on the worker pool; results come back in index order."""
    worker = _trial(fn)
    results = [None] * n_items
    stats = {"Done": 0, "Failed": 0}
    with tqdm(total=n_items, desc=desc, leave=False) as pbar:
        with ThreadPoolExecutor(max_workers=ctx.threads) as executor:
            futures = {executor.submit(worker, i): i for i in range(n_items)}
            for future in as_completed(futures):
                result, status = future.result()
                results[futures[future]] = result
                stats[status] += 1
                pbar.set_postfix(stats)
                pbar.update(1)
    if stats["Failed"]:
        raise ProtocolFailure(f"{stats['Failed']} of {n_items} {desc} trials failed", stats)
    return results


def _gaussian(gen, rows, cols):
    return gen.standard_normal((rows, cols)) + 1j * gen.standard_normal((rows, cols))


# --- SUITES ---

def suite_norms(ctx):
    n_trials = ctx.count(1000, 100)
    worst = dict.fromkeys(
        ["fuchs_van_de_graaf", "fvdg_pure_tightness", "holder", "reversed_rank", "swap_trick", "rank_one_norms",
         "vec_identity", "trace_distance_projector"],
        0.0,
    )
    for d in (2, 3, 4, 8):
        gen = ctx.rng("norms", d)
        F_swap = swap_operator(d)
        for _ in range(n_trials):
            rho, sigma = sample_density_matrix(gen, d), sample_density_matrix(gen, d)
            F, T = fidelity(rho, sigma), trace_distance(rho, sigma)
            worst["fuchs_van_de_graaf"] = max(worst["fuchs_van_de_graaf"], (1 - math.sqrt(F)) - T, T - math.sqrt(1 - F))
            P = projector_positive_part(rho.matrix - sigma.matrix)
            worst["trace_distance_projector"] = max(
                worst["trace_distance_projector"], abs(np.real(np.trace(P @ (rho.matrix - sigma.matrix))) - T)
            )

            psi, phi = sample_haar_state(gen, d), sample_haar_state(gen, d)
            Tp, Fp = trace_distance(psi.density(), phi.density()), pure_state_fidelity(psi, phi.density())
            worst["fvdg_pure_tightness"] = max(worst["fvdg_pure_tightness"], abs(Tp - math.sqrt(max(0.0, 1 - Fp))))
            X = psi.projector() - phi.projector()
            gap = math.sqrt(max(0.0, 1 - abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2))
            for p, scale in ((1, 2.0), (2, math.sqrt(2)), (np.inf, 1.0)):
                worst["rank_one_norms"] = max(worst["rank_one_norms"], abs(schatten_norm(X, p) - scale * gap))

            A, B = _gaussian(gen, d, d), _gaussian(gen, d, d)
            lhs = abs(hs_inner(A, B))
            for p, q in ((1, np.inf), (2, 2), (np.inf, 1)):
                worst["holder"] = max(worst["holder"], lhs - schatten_norm(A, p) * schatten_norm(B, q))
            worst["swap_trick"] = max(
                worst["swap_trick"], abs(np.trace(F_swap @ np.kron(A, B)) - np.trace(A @ B))
            )
            C = _gaussian(gen, d, d)
            worst["vec_identity"] = max(
                worst["vec_identity"],
                float(np.max(np.abs(vectorize(A @ B @ C) - np.kron(C.T, A) @ vectorize(B)))),
            )

            r = int(gen.integers(1, d + 1))
            L = _gaussian(gen, d, r) @ _gaussian(gen, r, d)
            n1, n2, ninf = schatten_norm(L, 1), schatten_norm(L, 2), schatten_norm(L, np.inf)
            worst["reversed_rank"] = max(worst["reversed_rank"], n1 - math.sqrt(r) * n2, math.sqrt(r) * n2 - r * ninf)
    detail = f"{n_trials} instances per d in 2,3,4,8"
    rows = []
    for check, value in worst.items():
        tol = 1e-10 if check == "fvdg_pure_tightness" else 1e-9
        rows.append(_row(check, value, 0.0, tol, value <= tol, detail))
    return rows


def suite_designs(ctx):
    rows = []
    ens = UnitaryEnsemble.clifford(1)
    for k in (1, 2, 3):
        rep = verify_design(ens, k)
        rows.append(_row(f"clifford1_k{k}", rep.max_deviation, 0.0, settings.TAU_DESIGN, rep.passed, f"{rep.n_probes} probes"))
    rep = verify_design(ens, 4)
    rows.append(_row("clifford1_k4_fails", rep.max_deviation, 1e-3, 0.0, rep.max_deviation > 1e-3, "deviation must exceed 1e-3"))
    states = enumerate_stabilizer_states(1)
    rep = verify_state_design(states, 3)
    rows.append(_row("stabilizer_states_k3", rep.max_deviation, 0.0, settings.TAU_DESIGN, rep.passed, f"{len(states)} states"))
    rep = verify_state_design(states, 4)
    rows.append(_row("stabilizer_states_k4_fails", rep.max_deviation, 1e-3, 0.0, rep.max_deviation > 1e-3))
    for d, k in ((2, 2), (3, 2), (2, 3)):
        P = sym_projector(d, k)
        trace = float(np.real(np.trace(P)))
        expected = comb(k + d - 1, d - 1, exact=True)
        idem = float(np.max(np.abs(P @ P - P)))
        rows.append(_row(f"sym_trace_d{d}_k{k}", trace, expected, 1e-10, abs(trace - expected) <= 1e-10))
        rows.append(_row(f"sym_idempotent_d{d}_k{k}", idem, 0.0, 1e-12, idem <= 1e-12))
    return rows


def suite_haar(ctx):
    rows = []
    n_samples = ctx.count(100_000, 10_000)
    for d in (2, 4, 16):
        gen = ctx.rng("haar", "state", d)
        overlaps = np.array([abs(sample_haar_state(gen, d).amplitudes[0]) ** 2 for _ in range(n_samples)])
        for k in (1, 2, 3, 4):
            mean, err = empirical_mean_with_stderr(overlaps**k)
            expected = 1 / comb(k + d - 1, k, exact=True)
            rows.append(_row(f"state_moment_d{d}_k{k}", mean, expected, 3 * err, abs(mean - expected) <= 3 * err))
    gen = ctx.rng("haar", "unitary")
    n_unitaries = ctx.count(100_000, 5_000)
    entries = np.array([abs(sample_haar_unitary(gen, 4)[0, 0]) ** 2 for _ in range(n_unitaries)])
    for power, expected in ((1, 1 / 4), (2, 1 / 10)):
        mean, err = empirical_mean_with_stderr(entries**power)
        rows.append(_row(f"unitary_entry_moment_k{power}", mean, expected, 3 * err, abs(mean - expected) <= 3 * err))
    return rows


def suite_minimax(ctx):
    rows = []
    for n in (1, 2, 3, 4):
        S = StabilizerGroup.computational_zero(n).conjugated(sample_clifford(ctx.rng("minimax", n), n))
        evals = np.sort(np.linalg.eigvalsh(S.minimax_operator_dense()))[::-1]
        lam2 = float(evals[1])
        expected = (2 ** (n - 1) - 1) / (2**n - 1)
        rows.append(_row(f"lambda2_n{n}", lam2, expected, 1e-12, abs(lam2 - expected) <= 1e-12, ",".join(S.key)))
        gap = minimax_spectral_gap(n)
        rows.append(_row(f"gap_n{n}", gap, 1 - expected, 1e-12, abs(gap - (1 - expected)) <= 1e-12))
    return rows


def _certification_trials(ctx, label, n_trials, cfg, planner, analyzer):
    """(accept count, passed shots, total shots) over seeded trials."""

    def one(i):
        device = SimulatedDevice(cfg, ctx.stream(label, "device", i))
        plan = planner(ctx.rng(label, "plan", i))
        record = plan.execute(device)
        verdict = analyzer(plan, record)
        outcomes = sequence_outcomes(plan, record)
        passes = sum(1 for got, ok in zip(outcomes, plan.info["pass"]) if got == ok)
        return verdict.accepted, passes, len(outcomes)

    results = _parallel(ctx, one, n_trials, label)
    return sum(r[0] for r in results), sum(r[1] for r in results), sum(r[2] for r in results)


def suite_direct(ctx):
    rows = []
    spec = ConfidenceSpec(0.05, 0.1)
    target = StabilizerGroup.from_labels(GHZ3)
    d = 8
    n_shots = stabilizer_certification_n(spec)
    expected_n = math.ceil(2 * math.log(1 / spec.delta) / spec.epsilon)
    rows.append(_row("state_sample_count", n_shots, expected_n, 0, n_shots == expected_n))
    n_trials = ctx.count(10_000, 500)

    def planner(gen):
        return plan_direct_state_certify(target, spec, "stabilizer_minimax", gen)

    clean = DeviceConfig(3, target, seed=ctx.seed)
    accepted, _, _ = _certification_trials(ctx, "direct-clean", n_trials, clean, planner, analyze_direct_state_certify)
    rows.append(_row("noiseless_accept_rate", accepted / n_trials, 1.0, 0.0, accepted == n_trials, f"{n_trials} trials"))

    p = 1 - 2 * spec.epsilon * d / (d - 1)
    planted = DeviceConfig(3, target, NoiseModel(d, prep_error=depolarizing(d, p)), seed=ctx.seed)
    accepted, passes, shots = _certification_trials(
        ctx, "direct-planted", n_trials, planted, planner, analyze_direct_state_certify
    )
    reject = 1 - accepted / n_trials
    rows.append(_row("planted_reject_rate", reject, 0.9, 0.0, reject >= 0.9, f"infidelity {2 * spec.epsilon}"))
    rho = SimulatedDevice(planted).oracle().prepared_state()
    infidelity = 1 - pure_state_fidelity(target.state_vector(), rho)
    q = 1 - minimax_spectral_gap(3) * infidelity
    q_hat = passes / shots
    err = math.sqrt(q_hat * (1 - q_hat) / shots)
    rows.append(_row("per_shot_pass_probability", q_hat, q, 3 * err, abs(q_hat - q) <= 3 * err))

    gate = CliffordElement.phase_gate(1, 0).compose(CliffordElement.hadamard(1, 0))
    n_process = ctx.count(1000, 100)

    def process_planner(gen):
        return plan_direct_process_certify(gate, spec, gen)

    clean = DeviceConfig(1, seed=ctx.seed)
    accepted, _, _ = _certification_trials(
        ctx, "process-clean", n_process, clean, process_planner, analyze_direct_process_certify
    )
    rows.append(_row("process_noiseless_accept_rate", accepted / n_process, 1.0, 0.0, accepted == n_process))
    p = 1 - 2 * spec.epsilon * 4 / 3
    noisy = DeviceConfig(1, noise=NoiseModel(2, gate_noise=depolarizing(2, p)), seed=ctx.seed)
    accepted, _, _ = _certification_trials(
        ctx, "process-noisy", n_process, noisy, process_planner, analyze_direct_process_certify
    )
    reject = 1 - accepted / n_process
    rows.append(_row("process_reject_rate", reject, 0.9, 0.0, reject >= 0.9, "entanglement infidelity 2 eps"))
    return rows


def suite_dfe(ctx):
    rows = []
    spec = ConfidenceSpec(0.05, 0.05)
    target = StabilizerGroup.from_labels(GHZ3)
    cfg = DeviceConfig(3, target, NoiseModel(8, prep_error=depolarizing(8, 0.9)), seed=ctx.seed)
    F_true = pure_state_fidelity(target.state_vector(), SimulatedDevice(cfg).oracle().prepared_state())
    ell = plan_dfe(target, spec, rng=ctx.rng("dfe", "probe")).info["ell"]
    expected_ell = math.ceil(2 / spec.epsilon**2 * math.log(2 / spec.delta))
    rows.append(_row("planned_ell", ell, expected_ell, 0, ell == expected_ell))

    def one(i):
        plan = plan_dfe(target, spec, rng=ctx.rng("dfe", "plan", i))
        return analyze_dfe(plan, plan.execute(SimulatedDevice(cfg, ctx.stream("dfe", "device", i)))).value

    n_runs = ctx.count(10_000, 300)
    values = np.array(_parallel(ctx, one, n_runs, "dfe"))
    mean, err = empirical_mean_with_stderr(values)
    rows.append(_row("bias", mean, F_true, 3 * err, abs(mean - F_true) < 3 * err, f"{n_runs} runs"))
    hit = float(np.mean(np.abs(values - F_true) <= spec.epsilon))
    rows.append(_row("accuracy_hit_rate", hit, 1 - spec.delta, 0.0, hit >= 1 - spec.delta))

    gen = ctx.rng("dfe", "general")
    psi = sample_haar_state(gen, 4)
    general_cfg = DeviceConfig(2, psi, NoiseModel(4, prep_error=depolarizing(4, 0.95)), seed=ctx.seed)
    F_general = pure_state_fidelity(psi, SimulatedDevice(general_cfg).oracle().prepared_state())
    plan = plan_dfe(psi, ConfidenceSpec(0.1, 0.1), mode="general", rng=gen)
    est = analyze_dfe(plan, plan.execute(SimulatedDevice(general_cfg, ctx.stream("dfe", "general-device"))))
    rows.append(_row("general_mode_accuracy", est.value, F_general, est.epsilon, abs(est.value - F_general) <= est.epsilon))
    return rows


def suite_sfe(ctx):
    rows = []
    target = StabilizerGroup.from_labels(BELL)
    psi = target.state_vector()
    noises = {
        "identity": identity_channel(4),
        "depolarizing": depolarizing(4, 0.5),
        "amplitude_damping": Channel.from_descriptor({"kind": "amplitude_damping", "gamma": 0.2}, 4),
        "bit_flip": bit_flip(0.1, 2),
    }
    n_var = ctx.count(20_000, 2_000)
    configs = {}
    for name, ch in noises.items():
        cfg = DeviceConfig(2, target, NoiseModel(4, prep_error=ch), seed=ctx.seed)
        configs[name] = cfg
        spec = ConfidenceSpec(0.1, 0.05)
        plan = plan_sfe(target, spec, rng=ctx.rng("sfe", name, "var"), n_requested=n_var)
        f = sfe_single_shot_estimates(plan, plan.execute(SimulatedDevice(cfg, ctx.stream("sfe", name, "var"))))
        var = float(f.var(ddof=1))
        rows.append(_row(f"variance_{name}", var, 5.0, 0.0, var < 5.0, f"{f.size} single-shot estimates"))

    spec = ConfidenceSpec(0.1, 0.05)
    n, k, _ = mom_sample_plan(spec)
    rows.append(_row("sample_count_multiple_of_group", n % k, 0, 0, n % k == 0, f"n={n}, k={k}"))
    cfg = configs["depolarizing"]
    F_true = pure_state_fidelity(psi, SimulatedDevice(cfg).oracle().prepared_state())

    def one(i):
        plan = plan_sfe(target, spec, rng=ctx.rng("sfe", "mom", i))
        return analyze_sfe(plan, plan.execute(SimulatedDevice(cfg, ctx.stream("sfe", "mom-device", i)))).value

    n_runs = ctx.count(200, 10)
    values = np.array(_parallel(ctx, one, n_runs, "sfe"))
    hit = float(np.mean(np.abs(values - F_true) <= spec.epsilon))
    rows.append(_row("mom_hit_rate", hit, 0.95, 0.0, hit >= 0.95, f"{n_runs} runs of {n} samples"))
    return rows


def suite_twirl(ctx):
    rows = []
    cases = [
        ("amplitude_damping", amplitude_damping(0.3), UnitaryEnsemble.clifford(1)),
        ("random_channel", random_channel(ctx.rng("twirl"), 2), UnitaryEnsemble.clifford(1)),
        ("two_qubit_bit_flip", bit_flip(0.1, 2), UnitaryEnsemble.clifford(2)),
    ]
    for name, ch, ens in cases:
        tw = twirl(ch, ens)
        reference = depolarizing(ch.dim_in, effective_depol_parameter(ch))
        err = float(np.max(np.abs(tw.choi - reference.choi)))
        rows.append(_row(f"clifford_twirl_{name}", err, 0.0, 1e-10, err <= 1e-10))
    return rows


def suite_diamond(ctx):
    rows = []
    n_pairs = ctx.count(50, 10)
    n_inputs = ctx.count(10_000, 2_000)
    tol = 1e-3 if not ctx.quick else 1e-2

    def one(i):
        gen = ctx.rng("diamond", "pair", i)
        U, V = sample_haar_unitary(gen, 2), sample_haar_unitary(gen, 2)
        return diamond_distance_unitaries(U, V) - diamond_distance_brute_force(U, V, n_inputs, gen)

    gaps = np.array(_parallel(ctx, one, n_pairs, "diamond"))
    rows.append(_row("closed_form_vs_brute_force", float(gaps.max()), 0.0, tol, gaps.max() <= tol and gaps.min() >= -1e-9))

    gen = ctx.rng("diamond", "sandwich")
    worst, worst_infid = 0.0, 0.0
    for _ in range(ctx.count(1000, 100)):
        U, V = sample_haar_unitary(gen, 2), sample_haar_unitary(gen, 2)
        lower, upper = diamond_trace_bounds(unitary_channel(U) - unitary_channel(V))
        full = 2 * diamond_distance_unitaries(U, V)
        worst = max(worst, lower - full, full - upper)
        low, high = infidelity_diamond_bounds(unitary_channel(U.conj().T @ V))
        half = diamond_distance_unitaries(np.eye(2), U.conj().T @ V)
        worst_infid = max(worst_infid, low - half, half - high)
    rows.append(_row("trace_norm_sandwich", worst, 0.0, 1e-9, worst <= 1e-9))
    rows.append(_row("infidelity_bounds", worst_infid, 0.0, 1e-9, worst_infid <= 1e-9))
    return rows


def suite_rb(ctx):
    rows = []
    lengths = [1, 2, 4, 8, 16, 32, 64, 128] if not ctx.quick else [1, 2, 4, 8, 16, 32, 64]
    n_sequences, shots = ctx.count(30, 8), ctx.count(200, 100)
    gate_noise = depolarizing(4, 0.95)
    clean = DeviceConfig(2, noise=NoiseModel(4, gate_noise=gate_noise), seed=ctx.seed)
    spam = DeviceConfig(
        2,
        noise=NoiseModel(4, gate_noise=gate_noise, prep_error=depolarizing(4, 0.9), meas_error=bit_flip(0.05, 2)),
        seed=ctx.seed,
    )
    fits = {}
    for name, cfg in (("gate_noise_only", clean), ("with_spam", spam)):
        curve, _ = rb_standard(SimulatedDevice(cfg, ctx.stream("rb", name)), lengths, n_sequences, shots, ctx.rng("rb", name))
        fits[name] = curve.fit
        p = curve.fit.p
        rows.append(_row(f"decay_{name}", p, 0.95, 0.01, 0.94 <= p <= 0.96, f"A={curve.fit.A:.4f} B={curve.fit.B:.4f}"))
    shift = max(abs(fits["with_spam"].A - fits["gate_noise_only"].A), abs(fits["with_spam"].B - fits["gate_noise_only"].B))
    rows.append(_row("spam_moves_constants", shift, 0.02, 0.0, shift > 0.02, "max of |dA|, |dB|"))
    return rows


def suite_irb(ctx):
    rows = []
    target = CliffordElement.hadamard(1, 0)
    noise = NoiseModel(2, gate_noise=depolarizing(2, 0.995), gate_overrides={"G": depolarizing(2, 0.98)})
    cfg = DeviceConfig(1, noise=noise, seed=ctx.seed, gates={"G": target.to_dense()})
    lengths = [1, 2, 4, 8, 16, 32, 64, 128, 256]
    _, _, est = rb_interleaved(
        SimulatedDevice(cfg, ctx.stream("irb")),
        target,
        lengths,
        ctx.count(30, 10),
        ctx.count(200, 100),
        ctx.rng("irb"),
        unitarity_source="oracle",
        unitarity=unitarity(noise.gate_noise),
        gate_id="G",
    )
    center, halfwidth = est.details["p_center"], est.details["p_halfwidth"]
    rows.append(_row("target_decay_in_bracket", center, 0.98, halfwidth, abs(center - 0.98) <= halfwidth))
    rows.append(_row("bracket_halfwidth", halfwidth, 0.01, 0.0, halfwidth < 0.01))

    gen = ctx.rng("irb", "composite")
    worst = -math.inf
    for _ in range(ctx.count(1000, 100)):
        X, Y = random_channel(gen, 2), random_channel(gen, 2)
        center, hw = composite_param_bound(effective_depol_parameter(X.compose(Y)), effective_depol_parameter(Y), unitarity(Y))
        worst = max(worst, abs(effective_depol_parameter(X) - center) - hw)
    rows.append(_row("composite_bound", worst, 0.0, 1e-9, worst <= 1e-9))
    return rows


def suite_xeb(ctx):
    rows = []
    n = ctx.count(10, 7)
    d = 2**n
    n_circuits = ctx.count(50, 8)
    shots = ctx.count(100_000, 20_000)
    phi = 0.7
    scenarios = {
        "noiseless": None,
        "uniform": NoiseModel(d, gate_noise=depolarizing(d, 0.0)),
        "depolarized": NoiseModel(d, gate_noise=depolarizing(d, phi)),
    }

    def one(c):
        U = sample_haar_unitary(ctx.rng("xeb", "circuit", c), d)
        plan = plan_xeb(U, shots, setting_id=f"xeb-c{c:04d}")
        out = {}
        for name, noise in scenarios.items():
            device = SimulatedDevice(DeviceConfig(n, noise=noise, seed=ctx.seed), ctx.stream("xeb", name, c))
            out[name] = analyze_xeb(plan, plan.execute(device)).value
        out["ks"] = porter_thomas_check(U).statistic if c == 0 else None
        return out

    results = _parallel(ctx, one, n_circuits, "xeb")
    haar = (d - 1) / (d + 1)
    for name, expected in (("noiseless", haar), ("uniform", 0.0), ("depolarized", phi * haar)):
        mean, err = empirical_mean_with_stderr([r[name] for r in results])
        rows.append(_row(f"linear_xeb_{name}", mean, expected, 3 * err, abs(mean - expected) <= 3 * err, f"n={n}"))

    spec = ConfidenceSpec(0.05, 0.05)
    planned = plan_xeb(np.eye(d), spec=spec).n_planned
    formula = math.ceil(math.e**2 / (2 * spec.epsilon**2) * math.log(2 * d / spec.delta) ** 2 * math.log(2 / spec.delta))
    rows.append(_row("planned_shots", planned, formula, 0, planned == formula))
    ks = results[0]["ks"]
    rows.append(_row("porter_thomas_haar", ks, 0.05, 0.0, ks < 0.05, "KS statistic"))
    identity = porter_thomas_check(np.eye(d))
    rows.append(_row("porter_thomas_identity_fails", identity.statistic, 0.05, 0.0, not identity.passed))
    return rows


def suite_repro(ctx):
    """Identical results across two runs with different worker counts."""
    from .cli import run_experiment, save_outputs
    from .config import parse_config

    raws = {
        "dfe": {
            "protocol": "dfe",
            "seed": ctx.seed,
            "spec": {"epsilon": 0.1, "delta": 0.1},
            "device": {"n_qubits": 3, "target": {"stabilizer": list(GHZ3)},
                       "noise": {"prep_error": {"kind": "depolarizing", "p": 0.9}}},
        },
        "rb": {
            "protocol": "rb",
            "seed": ctx.seed,
            "device": {"n_qubits": 1, "noise": {"gate_noise": {"kind": "depolarizing", "p": 0.97}}},
            "params": {"lengths": [1, 4, 16, 64], "n_sequences": 5, "shots": 50},
        },
        "xeb": {
            "protocol": "xeb",
            "seed": ctx.seed,
            "device": {"n_qubits": 3, "noise": {"gate_noise": {"kind": "depolarizing", "p": 0.8}}},
            "params": {"n_circuits": 4, "shots": 500},
        },
    }
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, raw in raws.items():
            outputs = []
            for threads in (1, max(2, ctx.threads)):
                cfg = parse_config(raw, f"repro_{name}").with_overrides(output_dir=Path(tmp) / f"{name}-{threads}")
                out_dir = save_outputs(cfg, run_experiment(cfg, threads), 0.0)
                outputs.append(
                    {p.name: p.read_bytes() for p in sorted(out_dir.iterdir()) if p.name != settings.TIMING_FILENAME}
                )
            same = outputs[0] == outputs[1]
            rows.append(_row(f"byte_identical_{name}", float(same), 1.0, 0.0, same, ",".join(sorted(outputs[0]))))
    return rows


SUITES = {
    "norms": suite_norms,
    "designs": suite_designs,
    "haar": suite_haar,
    "minimax": suite_minimax,
    "direct": suite_direct,
    "dfe": suite_dfe,
    "sfe": suite_sfe,
    "twirl": suite_twirl,
    "diamond": suite_diamond,
    "rb": suite_rb,
    "irb": suite_irb,
    "xeb": suite_xeb,
    "repro": suite_repro,
}


def run_suites(names, quick=False, threads=settings.MAX_WORKERS, seed=settings.DEFAULT_SEED):
    ctx = SuiteContext(bool(quick), max(1, int(threads)), int(seed))
    rows = []
    with logging_redirect_tqdm():
        for name in tqdm(names, desc="Suites", leave=False):
            try:
                suite_rows = SUITES[name](ctx)
            except Exception as exc:
                logger.exception("suite %s raised", name)
                suite_rows = [_row("suite_completed", 0.0, 1.0, 0.0, False, f"{type(exc).__name__}: {exc}")]
            for row in suite_rows:
                row["suite"] = name
                tag = "[OK]" if row["passed"] else "[FAIL]"
                log = logger.info if row["passed"] else logger.error
                log("%s %s/%s: measured=%.6g expected=%.6g tol=%.3g", tag, name, row["check"],
                    row["measured"], row["expected"], row["tolerance"])
            rows.extend(suite_rows)
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def save_report(report, out_dir, label, excel=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"verify_{label}.csv"
    report.to_csv(csv_path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    if excel:
        report.to_excel(out_dir / f"{label}_{settings.EXCEL_FILENAME}", index=False, engine="openpyxl")
    logger.info("report saved to %s", csv_path)
    return csv_path
