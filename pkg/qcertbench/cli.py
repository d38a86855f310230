"""Experiment runner: `run <config>` and `verify <suite>`."""

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm
from tqdm.contrib.logging import logging_redirect_tqdm

from . import settings
from .channels import unitarity
from .config import load_config
from .devicesim import ExperimentRecord, RecordReplayDevice, SimulatedDevice
from .errors import BudgetExceededError, ConfigError, DesignCheckError, InvalidInputError, ProtocolFailure
from .logs import setup_logging
from .protocols.direct import (
    analyze_direct_process_certify,
    analyze_direct_state_certify,
    analyze_estimate_observable,
    observable_verdict,
    plan_direct_process_certify,
    plan_direct_state_certify,
    plan_estimate_observable,
)
from .protocols.fidelity import analyze_dfe, analyze_sfe, certify_from_estimate, estimation_spec, plan_dfe, plan_sfe
from .protocols.rb import analyze_rb, interleaved_estimate, plan_rb, rb_estimate
from .protocols.xeb import analyze_xeb, plan_xeb, porter_thomas_check
from .randomness import SeededRng, sample_haar_unitary
from .records import read_record, write_record
from .stats import THREE_SIGMA_DELTA, Estimate, empirical_mean_with_stderr

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED_CHECKS, EXIT_INVALID, EXIT_PROTOCOL = 0, 1, 2, 3


class RunOutput:
    """What a protocol run hands back to the writer."""

    def __init__(self, result, planned_n, used_n, record, tables=None):
        self.result = result
        self.planned_n = int(planned_n)
        self.used_n = int(used_n)
        self.record = record
        self.tables = tables or {}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_result(payload):
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


# --- PROTOCOL RUNNERS ---

def _plan_rng(cfg):
    return SeededRng(cfg.seed, ("plan", cfg.protocol)).generator()


def _device(cfg):
    if cfg.records is not None:
        record = read_record(cfg.records)
        if record.n_qubits != cfg.device.n_qubits:
            raise InvalidInputError(f"record has {record.n_qubits} qubits, config {cfg.device.n_qubits}")
        logger.info("replaying %d batches from %s", len(record.batches), cfg.records)
        return RecordReplayDevice(record)
    return SimulatedDevice(cfg.device_config())


def _run_observable(cfg, device, threads):
    p = cfg.params
    plan = plan_estimate_observable(p["observable"], cfg.spec, cfg.device.n_qubits)
    record = plan.execute(device)
    est = analyze_estimate_observable(plan, record)
    result = {"estimate": est.to_dict()}
    if "threshold" in p:
        result["verdict"] = observable_verdict(est, p["threshold"], cfg.spec).to_dict()
    return RunOutput(result, plan.n_planned, est.n_samples_used, record)


def _run_direct_state(cfg, device, threads):
    p = cfg.params
    plan = plan_direct_state_certify(
        cfg.device.target, cfg.spec, p["strategy"], _plan_rng(cfg), adaptive=p["adaptive"]
    )
    record = plan.execute(device)
    verdict = analyze_direct_state_certify(plan, record)
    return RunOutput({"verdict": verdict.to_dict()}, plan.n_planned, verdict.n_used, record)


def _estimation_spec(cfg):
    """(spec for the estimate, certify block or None)."""
    cert = cfg.params.get("certify")
    if cert is None:
        return cfg.spec, None
    return estimation_spec(cert["epsilon"], cfg.spec.delta, cert["policy"]), cert


def _finish_estimate(plan, record, est, cert):
    result = {"estimate": est.to_dict()}
    if cert is not None:
        result["verdict"] = certify_from_estimate(est, cert["epsilon"], cert["policy"]).to_dict()
    return RunOutput(result, plan.n_planned, est.n_samples_used, record)


def _run_dfe(cfg, device, threads):
    p = cfg.params
    spec, cert = _estimation_spec(cfg)
    plan = plan_dfe(cfg.device.target, spec, p["mode"], p.get("alpha"), _plan_rng(cfg))
    record = plan.execute(device)
    return _finish_estimate(plan, record, analyze_dfe(plan, record), cert)


def _run_sfe(cfg, device, threads):
    p = cfg.params
    spec, cert = _estimation_spec(cfg)
    plan = plan_sfe(cfg.device.target, spec, rng=_plan_rng(cfg), n_requested=p.get("n_samples"))
    record = plan.execute(device)
    return _finish_estimate(plan, record, analyze_sfe(plan, record), cert)


def _run_direct_process(cfg, device, threads):
    p = cfg.params
    plan = plan_direct_process_certify(p["clifford"], cfg.spec, _plan_rng(cfg), p.get("gate_id"))
    record = plan.execute(device)
    verdict = analyze_direct_process_certify(plan, record)
    return RunOutput({"verdict": verdict.to_dict()}, plan.n_planned, verdict.n_used, record)


def _run_rb(cfg, device, threads):
    p = cfg.params
    n = cfg.device.n_qubits
    plan = plan_rb(n, p["lengths"], p["n_sequences"], p["shots"], _plan_rng(cfg))
    record = plan.execute(device)
    curve = analyze_rb(plan, record)
    est = rb_estimate(curve, 2**n, plan.n_planned)
    result = {"estimate": est.to_dict(), "curve": curve.to_dict()}
    return RunOutput(result, plan.n_planned, record.total_shots, record, {"rb_curve.csv": curve.to_frame()})


def _run_irb(cfg, device, threads):
    p = cfg.params
    n = cfg.device.n_qubits
    plan = plan_rb(n, p["lengths"], p["n_sequences"], p["shots"], _plan_rng(cfg), p["clifford"], p.get("gate_id"))
    record = plan.execute(device)
    ref = analyze_rb(plan, record, "reference")
    inter = analyze_rb(plan, record, "interleaved")
    u = unitarity(cfg.device.noise.gate_noise) if p["unitarity_source"] == "oracle" else None
    est = interleaved_estimate(ref, inter, 2**n, p["unitarity_source"], u, p["incoherence"], plan.n_planned)
    frames = []
    for kind, curve in (("reference", ref), ("interleaved", inter)):
        df = curve.to_frame()
        df.insert(0, "kind", kind)
        frames.append(df)
    result = {"estimate": est.to_dict(), "reference": ref.to_dict(), "interleaved": inter.to_dict()}
    tables = {"irb_curves.csv": pd.concat(frames, ignore_index=True)}
    return RunOutput(result, plan.n_planned, record.total_shots, record, tables)


def _xeb_circuit(cfg, index):
    circuit = cfg.params["circuit"]
    d = 2**cfg.device.n_qubits
    if isinstance(circuit, np.ndarray):
        return circuit
    if circuit == "identity":
        return np.eye(d, dtype=complex)
    return sample_haar_unitary(SeededRng(cfg.seed, ("xeb_circuit", index)).generator(), d)


def _xeb_worker(cfg, index, replay):
    """Returns ((index, planned shots, estimate, record, Porter-Thomas report), status)."""
    p = cfg.params
    U = _xeb_circuit(cfg, index)
    spec = cfg.spec if p.get("shots") is None else None
    plan = plan_xeb(U, p.get("shots"), spec, setting_id=f"xeb-c{index:04d}")
    if replay is None:
        device = SimulatedDevice(cfg.device_config(), SeededRng(cfg.seed, ("device", "xeb", index)))
    else:
        device = replay
    record = plan.execute(device)
    est = analyze_xeb(plan, record, p["estimator"])
    report = porter_thomas_check(U, p["porter_thomas"]) if p.get("porter_thomas") else None
    return (index, plan.n_planned, est, record, report), "Done"


def _run_xeb(cfg, device, threads):
    p = cfg.params
    replay = device if isinstance(device, RecordReplayDevice) else None
    n_circuits = p["n_circuits"]
    stats = {"Done": 0}
    outputs = {}
    with logging_redirect_tqdm(), tqdm(total=n_circuits, desc="XEB circuits", leave=False) as pbar:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(_xeb_worker, cfg, c, replay) for c in range(n_circuits)]
            for future in as_completed(futures):
                out, status = future.result()
                outputs[out[0]] = out
                stats[status] += 1
                pbar.set_postfix(stats)
                pbar.update(1)
    rows, batches, planned = [], [], 0
    for c in range(n_circuits):
        _, n_plan, est, record, report = outputs[c]
        planned += n_plan
        batches.extend(record.batches)
        row = {"circuit": c, "value": est.value, "shots": est.n_samples_used}
        row["ideal_fidelity"] = est.details["ideal_fidelity"]
        if report is not None:
            row["pt_statistic"] = report.statistic
            row["pt_passed"] = report.passed
        rows.append(row)
    trace = pd.DataFrame(rows)
    values = trace["value"].to_numpy(dtype=float)
    mean, err = empirical_mean_with_stderr(values) if values.size > 1 else (float(values[0]), math.inf)
    first = outputs[0][2]
    eps = first.epsilon if values.size == 1 or not np.all(np.isfinite(values)) else 3 * err
    summary = Estimate(
        mean,
        eps,
        first.delta if values.size == 1 else THREE_SIGMA_DELTA,
        int(trace["shots"].sum()),
        first.method,
        {"n_circuits": n_circuits, "stderr": err, "mean_ideal_fidelity": float(trace["ideal_fidelity"].mean())},
    )
    result = {"estimate": summary.to_dict(), "circuits": rows}
    if "pt_passed" in trace:
        result["porter_thomas_passed"] = int(trace["pt_passed"].sum())
    merged = ExperimentRecord(tuple(batches), cfg.seed, cfg.device.n_qubits)
    return RunOutput(result, planned, summary.n_samples_used, merged, {"xeb_trace.csv": trace})


RUNNERS = {
    "observable": _run_observable,
    "direct_state": _run_direct_state,
    "dfe": _run_dfe,
    "sfe": _run_sfe,
    "direct_process": _run_direct_process,
    "rb": _run_rb,
    "irb": _run_irb,
    "xeb": _run_xeb,
}


def run_experiment(cfg, threads=settings.MAX_WORKERS):
    device = _device(cfg)
    return RUNNERS[cfg.protocol](cfg, device, max(1, int(threads)))


def save_outputs(cfg, output, wall_time):
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "protocol": cfg.protocol,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "planned_n": output.planned_n,
        "used_n": output.used_n,
        "result": output.result,
    }
    (out_dir / settings.RESULT_FILENAME).write_text(dumps_result(payload), encoding="utf-8")
    (out_dir / settings.TIMING_FILENAME).write_text(
        json.dumps({"wall_time": round(wall_time, 6)}, sort_keys=True) + "\n", encoding="utf-8"
    )
    if cfg.records is None:
        meta = {"protocol": cfg.protocol, "config_hash": cfg.config_hash}
        write_record(output.record, out_dir / settings.RECORD_FILENAME, meta)
    for name, df in output.tables.items():
        df.to_csv(out_dir / name, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    logger.info("[OK] %s results saved to %s", cfg.protocol, out_dir)
    return out_dir


# --- COMMANDS ---

def cmd_run(args):
    cfg = load_config(args.config).with_overrides(args.seed, args.out, args.records)
    logger.info("running %s (seed %d, hash %s)", cfg.protocol, cfg.seed, cfg.config_hash[:12])
    start = time.perf_counter()
    output = run_experiment(cfg, args.threads)
    save_outputs(cfg, output, time.perf_counter() - start)
    return EXIT_OK


def cmd_verify(args):
    from .suites import SUITES, run_suites, save_report

    names = list(SUITES) if args.suite == "all" else [args.suite]
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    report = run_suites(names, quick=args.quick, threads=args.threads, seed=seed)
    out_dir = Path(args.out or settings.OUTPUT_FOLDER)
    save_report(report, out_dir, args.suite, excel=args.excel)
    failed = int((~report["passed"]).sum())
    if failed:
        logger.error("[FAIL] %d of %d checks failed", failed, len(report))
        return EXIT_FAILED_CHECKS
    logger.info("[OK] all %d checks passed", len(report))
    return EXIT_OK


def parse_args(argv=None):
    from .suites import SUITES

    parser = argparse.ArgumentParser(prog="qcertbench", description="Quantum certification workbench")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--records", type=Path, default=None, help="analyse an existing record instead of simulating")

    verify = sub.add_parser("verify", help="run an acceptance suite")
    verify.add_argument("suite", choices=[*SUITES, "all"])
    verify.add_argument("--quick", action="store_true", help="scaled-down trial counts")
    verify.add_argument("--excel", action="store_true", help="also write the report as .xlsx")

    for p in (run, verify):
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--threads", type=int, default=settings.MAX_WORKERS, help="worker cap")
        p.add_argument("--out", type=Path, default=None, help="output directory")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    setup_logging(-1 if args.quiet else args.verbose)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except ConfigError as exc:
        logger.error("[ERR] invalid config: %s", exc)
        return EXIT_INVALID
    except (InvalidInputError, BudgetExceededError) as exc:
        logger.error("[ERR] %s", exc)
        return EXIT_INVALID
    except ProtocolFailure as exc:
        logger.error("[ERR] protocol failure: %s", exc)
        if exc.diagnostics:
            logger.error("diagnostics: %s", json.dumps(exc.diagnostics, sort_keys=True, default=_json_default))
        return EXIT_PROTOCOL
    except DesignCheckError as exc:
        logger.error("[ERR] design check failed: %s", exc)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
