import json
from pathlib import Path

import pandas as pd
import pytest

from qcertbench.cli import EXIT_INVALID, EXIT_OK, dumps_result, main, parse_args
from qcertbench.records import read_record

from .conftest import GHZ3_LABELS

DFE_CONFIG = {
    "protocol": "dfe",
    "seed": 11,
    "spec": {"epsilon": 0.1, "delta": 0.1},
    "device": {"n_qubits": 3, "target": {"stabilizer": list(GHZ3_LABELS)}},
    "params": {"mode": "well_conditioned"},
}

RB_CONFIG = {
    "protocol": "rb",
    "seed": 5,
    "device": {"n_qubits": 1, "noise": {"gate_noise": {"kind": "depolarizing", "p": 0.95}}},
    "params": {"lengths": [1, 2, 4, 8, 16], "n_sequences": 4, "shots": 50},
}

XEB_CONFIG = {
    "protocol": "xeb",
    "seed": 3,
    "device": {"n_qubits": 2},
    "params": {"n_circuits": 3, "shots": 400, "porter_thomas": "moment"},
}


def write_config(tmp_path, raw, name="experiment.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


def result_of(out_dir):
    return json.loads((Path(out_dir) / "result.json").read_text(encoding="utf-8"))


class TestParseArgs:
    def test_run_defaults(self):
        args = parse_args(["run", "cfg.json"])
        assert args.command == "run"
        assert args.config == Path("cfg.json")
        assert args.seed is None
        assert args.threads == 4
        assert args.records is None

    def test_verify_flags(self):
        args = parse_args(["-v", "verify", "designs", "--quick", "--excel", "--seed", "9"])
        assert args.verbose == 1
        assert args.suite == "designs"
        assert args.quick and args.excel
        assert args.seed == 9

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            parse_args(["verify", "everything"])


class TestRun:
    def test_dfe_outputs(self, tmp_path):
        cfg = write_config(tmp_path, DFE_CONFIG)
        out = tmp_path / "out"
        assert main(["-q", "run", str(cfg), "--out", str(out)]) == EXIT_OK
        result = result_of(out)
        assert result["protocol"] == "dfe"
        assert result["seed"] == 11
        assert result["result"]["estimate"]["value"] == pytest.approx(1.0)
        assert result["planned_n"] == result["used_n"] == 600
        assert "wall_time" in json.loads((out / "timing.json").read_text(encoding="utf-8"))
        record = read_record(out / "record.jsonl")
        assert record.total_shots == 600

    def test_result_keys_are_sorted(self):
        text = dumps_result({"b": 1, "a": {"d": 2, "c": 3}})
        assert text.index('"a"') < text.index('"b"')
        assert text.index('"c"') < text.index('"d"')

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path, DFE_CONFIG)
        out = tmp_path / "out"
        main(["-q", "run", str(cfg), "--out", str(out), "--seed", "99"])
        assert result_of(out)["seed"] == 99

    def test_replay_matches_simulation(self, tmp_path):
        cfg = write_config(tmp_path, RB_CONFIG)
        first, second = tmp_path / "sim", tmp_path / "replay"
        assert main(["-q", "run", str(cfg), "--out", str(first)]) == EXIT_OK
        records = first / "record.jsonl"
        assert main(["-q", "run", str(cfg), "--out", str(second), "--records", str(records)]) == EXIT_OK
        assert (first / "result.json").read_bytes() == (second / "result.json").read_bytes()
        assert not (second / "record.jsonl").exists()

    @pytest.mark.parametrize(
        "raw",
        [
            {
                "protocol": "direct_state",
                "seed": 4,
                "spec": {"epsilon": 0.1, "delta": 0.1},
                "device": {"n_qubits": 3, "target": {"stabilizer": list(GHZ3_LABELS)}},
                "params": {"strategy": "exact_povm"},
            },
            {
                "protocol": "observable",
                "seed": 6,
                "spec": {"epsilon": 0.2, "delta": 0.1},
                "device": {"n_qubits": 2, "target": {"stabilizer": ["+XX", "+ZZ"]}},
                "params": {"observable": [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, -1, 0], [0, 0, 0, 1]]},
            },
        ],
        ids=["exact_povm", "matrix_observable"],
    )
    def test_replay_of_povm_settings(self, tmp_path, raw):
        cfg = write_config(tmp_path, raw)
        first, second = tmp_path / "sim", tmp_path / "replay"
        assert main(["-q", "run", str(cfg), "--out", str(first)]) == EXIT_OK
        records = first / "record.jsonl"
        assert main(["-q", "run", str(cfg), "--out", str(second), "--records", str(records)]) == EXIT_OK
        assert (first / "result.json").read_bytes() == (second / "result.json").read_bytes()

    def test_rb_curve_table(self, tmp_path):
        cfg = write_config(tmp_path, RB_CONFIG)
        out = tmp_path / "out"
        main(["-q", "run", str(cfg), "--out", str(out)])
        curve = pd.read_csv(out / "rb_curve.csv")
        assert list(curve["m"]) == [1, 2, 4, 8, 16]
        assert 0.5 < result_of(out)["result"]["estimate"]["value"] <= 1.0

    def test_thread_count_does_not_change_results(self, tmp_path):
        cfg = write_config(tmp_path, XEB_CONFIG)
        one, four = tmp_path / "t1", tmp_path / "t4"
        main(["-q", "run", str(cfg), "--out", str(one), "--threads", "1"])
        main(["-q", "run", str(cfg), "--out", str(four), "--threads", "4"])
        assert (one / "result.json").read_bytes() == (four / "result.json").read_bytes()
        assert (one / "record.jsonl").read_bytes() == (four / "record.jsonl").read_bytes()
        trace = pd.read_csv(one / "xeb_trace.csv")
        assert len(trace) == 3
        assert "pt_passed" in trace

    @pytest.mark.parametrize(
        "raw",
        [
            {**DFE_CONFIG, "protocol": "tomography"},
            {**DFE_CONFIG, "spec": {"epsilon": 0.1, "delta": 1.5}},
            {**RB_CONFIG, "params": {"lengths": [4, 2], "n_sequences": 4, "shots": 50}},
        ],
        ids=["protocol", "delta", "lengths"],
    )
    def test_invalid_config(self, tmp_path, raw):
        cfg = write_config(tmp_path, raw)
        assert main(["-q", "run", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_INVALID
        assert not (tmp_path / "out" / "result.json").exists()

    def test_missing_config(self, tmp_path):
        assert main(["-q", "run", str(tmp_path / "absent.json")]) == EXIT_INVALID

    def test_missing_records(self, tmp_path):
        cfg = write_config(tmp_path, DFE_CONFIG)
        assert main(["-q", "run", str(cfg), "--records", str(tmp_path / "none.jsonl")]) == EXIT_INVALID


class TestVerify:
    def test_minimax_suite(self, tmp_path):
        assert main(["-q", "verify", "minimax", "--quick", "--out", str(tmp_path), "--excel"]) == EXIT_OK
        report = pd.read_csv(tmp_path / "verify_minimax.csv")
        assert len(report) == 8
        assert report["passed"].all()
        assert (tmp_path / "minimax_verify_report.xlsx").is_file()
