import numpy as np
import pytest

from qcertbench.channels import NoiseModel, amplitude_damping, bit_flip, depolarizing
from qcertbench.devicesim import (
    DeviceConfig,
    ExperimentRecord,
    RecordReplayDevice,
    Setting,
    ShotBatch,
    SimulatedDevice,
    prepare_and_measure,
    run_gate_sequence,
)
from qcertbench.errors import BudgetExceededError, DimensionMismatchError, InvalidInputError, NotCPTError
from qcertbench.linalg import Povm, PureState
from qcertbench.randomness import SeededRng
from qcertbench.stabilizer import CliffordElement

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]])


class TestConfig:
    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            DeviceConfig(13)

    def test_target_dimension(self, bell):
        with pytest.raises(DimensionMismatchError):
            DeviceConfig(3, bell)

    def test_noise_dimension(self):
        with pytest.raises(DimensionMismatchError):
            DeviceConfig(1, noise=NoiseModel(4))

    def test_gate_must_be_unitary(self):
        with pytest.raises(NotCPTError):
            DeviceConfig(1, gates={"G": 2 * np.eye(2)})

    def test_prep_mode(self):
        with pytest.raises(InvalidInputError):
            DeviceConfig(1, prep_mode="sometimes")

    def test_default_target_is_all_zero(self):
        assert DeviceConfig(2).target_vector() == pytest.approx([1, 0, 0, 0])


class TestSampling:
    def test_same_seed_same_counts(self, ghz3):
        cfg = DeviceConfig(3, ghz3, NoiseModel(8, prep_error=depolarizing(8, 0.8)), seed=11)
        settings = [Setting("target", (), "Z"), Setting("target", (), "+XXX")]
        a = SimulatedDevice(cfg).execute(settings, 500)
        b = SimulatedDevice(cfg).execute(settings, 500)
        assert a == b

    def test_independent_substreams(self):
        cfg = DeviceConfig(1, PureState(H[:, 0]))
        a = SimulatedDevice(cfg, SeededRng(1, ("a",))).execute([Setting()], 1000)
        b = SimulatedDevice(cfg, SeededRng(1, ("b",))).execute([Setting()], 1000)
        assert a.batches[0].counts != b.batches[0].counts

    def test_noiseless_stabilizer_measurement(self, ghz3):
        dev = SimulatedDevice(DeviceConfig(3, ghz3))
        record = dev.execute([Setting("target", (), "+XXX"), Setting("target", (), "-XXX")], 200)
        assert record.batches[0].counts == {"+1": 200}
        assert record.batches[1].counts == {"-1": 200}

    def test_z_outcomes_of_ghz(self, ghz3):
        counts = SimulatedDevice(DeviceConfig(3, ghz3)).execute([Setting()], 4000).batches[0].counts
        assert set(counts) == {"000", "111"}
        assert counts["000"] == pytest.approx(2000, abs=200)

    def test_qubit_zero_is_leftmost_bit(self):
        dev = SimulatedDevice(DeviceConfig(2))
        counts = dev.execute([Setting("10", (), "Z")], 10).batches[0].counts
        assert counts == {"10": 10}

    def test_readout_error(self):
        cfg = DeviceConfig(1, noise=NoiseModel(2, meas_error=bit_flip(0.25, 1)))
        dist = SimulatedDevice(cfg).oracle().outcome_distribution(Setting())
        assert dist == {"0": pytest.approx(0.75), "1": pytest.approx(0.25)}

    def test_depolarized_pauli_expectation(self, bell):
        cfg = DeviceConfig(2, bell, NoiseModel(4, prep_error=depolarizing(4, 0.6)))
        dist = SimulatedDevice(cfg).oracle().outcome_distribution(Setting("target", (), "+ZZ"))
        assert dist["+1"] == pytest.approx(0.8)

    def test_gate_noise_and_overrides(self):
        noise = NoiseModel(2, gate_noise=depolarizing(2, 0.9), gate_overrides={"G": depolarizing(2, 0.5)})
        dev = SimulatedDevice(DeviceConfig(1, noise=noise, gates={"G": np.eye(2)}))
        oracle = dev.oracle()
        assert oracle.outcome_distribution(Setting("0", ("G",), "Z"))["0"] == pytest.approx(0.75)
        assert oracle.outcome_distribution(Setting("0", ("G", "G"), "Z"))["0"] == pytest.approx(0.625)

    def test_clifford_label_gate(self):
        c = CliffordElement.hadamard(1, 0)
        dist = SimulatedDevice(DeviceConfig(1)).oracle().outcome_distribution(Setting("0", (c.label,), "+X"))
        assert dist["+1"] == pytest.approx(1.0)

    def test_setting_operators(self):
        setting = Setting("0", ("U",), "+X", operators=(("U", H),))
        dist = SimulatedDevice(DeviceConfig(1)).oracle().outcome_distribution(setting)
        assert dist["+1"] == pytest.approx(1.0)

    def test_povm_measurement(self):
        povm = Povm.two_outcome(np.diag([1.0, 0.0]), ("pass", "fail"))
        record = SimulatedDevice(DeviceConfig(1)).execute([Setting("0", (), "povm:zero", povm)], 50)
        assert record.batches[0].counts == {"pass": 50}

    def test_povm_needs_effects(self):
        with pytest.raises(InvalidInputError):
            Setting("0", (), "povm:zero")
        detached = Setting.from_dict({"prep": "0", "circuit": [], "measure": "povm:zero"})
        assert detached.detached and detached.povm is None
        with pytest.raises(InvalidInputError):
            SimulatedDevice(DeviceConfig(1)).execute([detached], 5)

    def test_basis_change_is_noise_free(self):
        cfg = DeviceConfig(1, noise=NoiseModel(2, gate_noise=depolarizing(2, 0.0)))
        oracle = SimulatedDevice(cfg).oracle()
        in_circuit = Setting("0", ("U",), "Z", operators=(("U", X),))
        as_basis = Setting("0", (), "Z", operators=(("U", X),), basis=("U",))
        assert oracle.outcome_distribution(in_circuit)["1"] == pytest.approx(0.5)
        assert oracle.outcome_distribution(as_basis)["1"] == pytest.approx(1.0)
        assert as_basis.to_dict()["basis"] == ["U"]
        assert "basis" not in in_circuit.to_dict()

    def test_unknown_gate(self):
        with pytest.raises(InvalidInputError):
            SimulatedDevice(DeviceConfig(1)).execute([Setting("0", ("nope",), "Z")], 1)

    def test_shot_validation(self):
        dev = SimulatedDevice(DeviceConfig(1))
        with pytest.raises(InvalidInputError):
            dev.execute([Setting()], 0)
        with pytest.raises(InvalidInputError):
            dev.execute([Setting(), Setting()], [1])
        with pytest.raises(InvalidInputError):
            dev.execute([Setting(), Setting()], 1, setting_ids=["a", "a"])

    def test_keep_outcomes(self):
        record = SimulatedDevice(DeviceConfig(1, PureState(H[:, 0]))).execute([Setting()], 30, keep_outcomes=True)
        batch = record.batches[0]
        assert len(batch.outcomes) == 30
        assert batch.counts == {k: batch.outcomes.count(k) for k in set(batch.outcomes)}

    def test_first_shot_is_device_wide(self):
        dev = SimulatedDevice(DeviceConfig(1))
        dev.execute([Setting()], 10)
        record = dev.execute([Setting(), Setting("1", (), "Z")], [5, 7])
        assert [b.first_shot for b in record.batches] == [10, 15]
        assert record.total_shots == 12


class TestDrift:
    def test_drift_decays_towards_mixed(self):
        cfg = DeviceConfig(1, prep_mode="drift", drift_rate=0.01)
        oracle = SimulatedDevice(cfg).oracle()
        assert oracle.prepared_state(shot=0).matrix[0, 0].real == pytest.approx(1.0)
        expected = 0.99**100 + (1 - 0.99**100) / 2
        assert oracle.prepared_state(shot=100).matrix[0, 0].real == pytest.approx(expected)

    def test_late_shots_are_noisier(self):
        cfg = DeviceConfig(1, prep_mode="drift", drift_rate=0.01)
        record = SimulatedDevice(cfg).execute([Setting()] * 2, [100, 1000], setting_ids=["early", "late"])
        early, late = record.by_id()["early"], record.by_id()["late"]
        assert early.counts.get("1", 0) < late.counts.get("1", 0)

    def test_zero_rate_is_iid(self):
        cfg = DeviceConfig(1, prep_mode="drift", drift_rate=0.0)
        assert SimulatedDevice(cfg).execute([Setting()], 1000).batches[0].counts == {"0": 1000}

    def test_drift_mixes_in_maximally_mixed_state(self):
        noise = NoiseModel(2, prep_error=amplitude_damping(1.0))
        cfg = DeviceConfig(1, noise=noise, prep_mode="drift", drift_rate=0.5)
        device = SimulatedDevice(cfg)
        assert device.oracle().prepared_state("1", shot=50).matrix[1, 1].real == pytest.approx(0.5)
        counts = device.execute([Setting("1", (), "Z")], 20000).batches[0].counts
        assert counts.get("1", 0) / 20000 == pytest.approx(0.5, abs=0.02)


class TestOracle:
    def test_prepared_state_with_noise(self, bell):
        cfg = DeviceConfig(2, bell, NoiseModel(4, prep_error=depolarizing(4, 0.5)))
        rho = SimulatedDevice(cfg).oracle().prepared_state()
        psi = bell.state_vector().amplitudes
        assert np.real(psi.conj() @ rho.matrix @ psi) == pytest.approx(0.5 + 0.5 / 4)

    def test_run_gate_sequence(self):
        noise = NoiseModel(2, gate_noise=depolarizing(2, 0.9))
        cfg = DeviceConfig(1, noise=noise, gates={"G": H})
        ch = run_gate_sequence(cfg, ["G", "G"])
        assert np.allclose(ch.apply_operator(np.diag([1.0, 0.0])), np.diag([0.905, 0.095]))

    def test_prepare_and_measure(self):
        record = prepare_and_measure(DeviceConfig(1), Setting("1", (), "Z"), 5)
        assert record.batches[0].counts == {"1": 5}


class TestReplay:
    def test_replays_matching_plan(self):
        record = SimulatedDevice(DeviceConfig(1)).execute([Setting()], 10, setting_ids=["a"])
        replay = RecordReplayDevice(record).execute([Setting()], 10, setting_ids=["a"])
        assert replay.batches[0].counts == record.batches[0].counts

    def test_missing_or_mismatched_batch(self):
        record = ExperimentRecord((), 0, 1)
        with pytest.raises(InvalidInputError):
            RecordReplayDevice(record).execute([Setting()], 1, setting_ids=["a"])
        record = SimulatedDevice(DeviceConfig(1)).execute([Setting()], 10, setting_ids=["a"])
        with pytest.raises(InvalidInputError):
            RecordReplayDevice(record).execute([Setting("1", (), "Z")], 10, setting_ids=["a"])

    def test_replay_reattaches_povm(self):
        povm = Povm.two_outcome(np.diag([1.0, 0.0]), ("pass", "fail"))
        setting = Setting("0", (), "povm:zero", povm)
        record = SimulatedDevice(DeviceConfig(1)).execute([setting], 20, setting_ids=["a"])
        batch = record.batches[0]
        stored_batch = ShotBatch("a", Setting.from_dict(batch.setting.to_dict()), batch.first_shot, batch.counts)
        stored = ExperimentRecord((stored_batch,), record.seed, record.n_qubits)
        replay = RecordReplayDevice(stored).execute([setting], 20, setting_ids=["a"])
        assert replay.batches[0].setting.povm is povm
        assert replay.batches[0].counts == {"pass": 20}

    def test_replay_needs_outcomes_when_asked(self):
        record = SimulatedDevice(DeviceConfig(1)).execute([Setting()], 10, setting_ids=["a"])
        with pytest.raises(InvalidInputError):
            RecordReplayDevice(record).execute([Setting()], 10, setting_ids=["a"], keep_outcomes=True)
