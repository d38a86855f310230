import json

import numpy as np
import pytest

from qcertbench.devicesim import DeviceConfig, Setting, SimulatedDevice
from qcertbench.errors import InvalidInputError
from qcertbench.linalg import Povm
from qcertbench.records import FORMAT_VERSION, dump_lines, read_record, write_record
from qcertbench.stabilizer import CliffordElement

HADAMARD = CliffordElement.hadamard(1, 0).label


@pytest.fixture
def record():
    dev = SimulatedDevice(DeviceConfig(2))
    return dev.execute(
        [Setting("+0", (), "Z"), Setting("00", (), "+XZ")], [20, 5], setting_ids=["a", "b"], keep_outcomes=True
    )


class TestRecordFiles:
    def test_meta_header_first(self, record):
        lines = dump_lines(record, {"protocol": "demo"}).splitlines()
        head = json.loads(lines[0])["meta"]
        assert head["version"] == FORMAT_VERSION
        assert head["n_qubits"] == 2
        assert head["protocol"] == "demo"
        assert len(lines) == 3

    def test_write_then_read(self, record, tmp_path):
        path = write_record(record, tmp_path / "sub" / "record.jsonl", {"protocol": "demo"})
        back = read_record(path)
        assert back == record
        assert back.meta == {"protocol": "demo"}

    def test_povm_setting_reads_back(self, tmp_path):
        povm = Povm.two_outcome(np.diag([1.0, 0.0, 0.0, 0.0]), ("pass", "fail"))
        original = SimulatedDevice(DeviceConfig(2)).execute([Setting("00", (), "povm:target", povm)], 15)
        back = read_record(write_record(original, tmp_path / "povm.jsonl"))
        assert back == original
        setting = back.batches[0].setting
        assert setting.measure == "povm:target"
        assert setting.detached and setting.povm is None
        assert back.batches[0].counts == {"pass": 15}

    def test_basis_change_reads_back(self, tmp_path):
        original = SimulatedDevice(DeviceConfig(1)).execute([Setting("0", (), "Z", basis=(HADAMARD,))], 5)
        back = read_record(write_record(original, tmp_path / "basis.jsonl"))
        assert back.batches[0].setting.basis == (HADAMARD,)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_record(tmp_path / "nope.jsonl")

    def test_error_names_line(self, record, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(dump_lines(record) + "{not json\n", encoding="utf-8")
        with pytest.raises(InvalidInputError, match=r"bad.jsonl:4"):
            read_record(path)

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"setting_id": "a"}\n', encoding="utf-8")
        with pytest.raises(InvalidInputError, match="meta header"):
            read_record(path)

    def test_duplicate_setting_ids(self, record, tmp_path):
        lines = dump_lines(record).splitlines()
        path = tmp_path / "dup.jsonl"
        path.write_text("\n".join(lines + [lines[1]]) + "\n", encoding="utf-8")
        with pytest.raises(InvalidInputError, match="duplicate"):
            read_record(path)

    def test_outcomes_must_match_counts(self, record, tmp_path):
        lines = dump_lines(record).splitlines()
        row = json.loads(lines[1])
        row["outcomes"] = row["outcomes"][:-1]
        path = tmp_path / "short.jsonl"
        path.write_text("\n".join([lines[0], json.dumps(row)]) + "\n", encoding="utf-8")
        with pytest.raises(InvalidInputError, match="outcomes"):
            read_record(path)

    def test_negative_counts(self, record, tmp_path):
        lines = dump_lines(record).splitlines()
        row = json.loads(lines[2])
        row["counts"] = {"+1": -1}
        row.pop("outcomes")
        path = tmp_path / "neg.jsonl"
        path.write_text("\n".join([lines[0], json.dumps(row)]) + "\n", encoding="utf-8")
        with pytest.raises(InvalidInputError, match="non-negative"):
            read_record(path)
