import numpy as np
import pytest

from qcertbench.channels import NoiseModel, depolarizing
from qcertbench.devicesim import DeviceConfig, SimulatedDevice
from qcertbench.errors import DimensionMismatchError, InvalidInputError
from qcertbench.linalg import DensityMatrix, PureState
from qcertbench.protocols.fidelity import (
    certification_gap,
    certify_from_estimate,
    dfe,
    estimation_spec,
    plan_dfe,
    plan_sfe,
    sfe,
    sfe_single_shot_estimates,
)
from qcertbench.randomness import UnitaryEnsemble, sample_haar_state
from qcertbench.stats import ConfidenceSpec, Estimate

from .conftest import ghz_vector


def depolarized_device(target, n, p):
    d = 2**n
    return SimulatedDevice(DeviceConfig(n, target, NoiseModel(d, prep_error=depolarizing(d, p))))


class TestDirectFidelityEstimation:
    def test_noiseless_ghz(self, ghz3, rng):
        spec = ConfidenceSpec(0.05, 0.05)
        est = dfe(SimulatedDevice(DeviceConfig(3, ghz3)), ghz3, spec, rng=rng)
        assert est.value == pytest.approx(1.0)
        assert est.details["ell"] == 2952
        assert est.details["mode"] == "well_conditioned"
        assert est.details["distinct_settings"] <= 8

    def test_dense_target_matches_stabilizer_path(self, rng):
        psi = PureState(ghz_vector(2))
        est = dfe(SimulatedDevice(DeviceConfig(2, psi)), psi, ConfidenceSpec(0.1, 0.1), rng=rng)
        assert est.value == pytest.approx(1.0)
        assert est.details["alpha"] == pytest.approx(1.0)

    def test_depolarized_ghz(self, ghz3, rng):
        spec = ConfidenceSpec(0.05, 0.05)
        est = dfe(depolarized_device(ghz3, 3, 0.5), ghz3, spec, rng=rng)
        assert est.value == pytest.approx(0.5 + 0.5 / 8, abs=0.07)

    def test_general_mode(self, rng):
        psi = sample_haar_state(rng, 4)
        spec = ConfidenceSpec(0.1, 0.1)
        plan = plan_dfe(psi, spec, mode="general", rng=rng)
        assert plan.info["ell"] == 1000
        assert plan.info["epsilon"] == pytest.approx(0.2)
        assert plan.info["delta"] == pytest.approx(0.2)
        est = dfe(SimulatedDevice(DeviceConfig(2, psi)), psi, spec, mode="general", rng=rng)
        assert est.value == pytest.approx(1.0, abs=0.2)

    def test_ill_conditioned_target(self, rng):
        psi = sample_haar_state(rng, 4)
        with pytest.raises(InvalidInputError):
            plan_dfe(psi, ConfidenceSpec(0.1, 0.1), alpha=0.5, rng=rng)

    def test_mixed_target_rejected(self):
        with pytest.raises(InvalidInputError):
            plan_dfe(DensityMatrix(np.eye(2) / 2), ConfidenceSpec(0.1, 0.1))

    def test_pure_density_matrix_accepted(self, rng):
        rho = DensityMatrix(PureState(ghz_vector(2)).projector())
        assert plan_dfe(rho, ConfidenceSpec(0.1, 0.1), rng=rng).info["alpha"] == pytest.approx(1.0)

    def test_unknown_mode(self, bell):
        with pytest.raises(InvalidInputError):
            plan_dfe(bell, ConfidenceSpec(0.1, 0.1), mode="fast")


class TestShadowFidelityEstimation:
    def test_sample_plan(self, bell, rng):
        plan = plan_sfe(bell, ConfidenceSpec(0.1, 0.05), rng=rng, n_requested=100)
        assert len(plan.order) == 120
        assert plan.info["group_size"] == 24
        assert plan.info["n_groups"] == 5

    def test_noiseless_bell(self, bell, rng):
        plan = plan_sfe(bell, ConfidenceSpec(0.1, 0.05), rng=rng, n_requested=2400)
        f = sfe_single_shot_estimates(plan, plan.execute(SimulatedDevice(DeviceConfig(2, bell))))
        assert f.mean() == pytest.approx(1.0, abs=0.1)
        assert set(np.round(f, 9)) <= {4.0, 1.5, 0.25}

    def test_gate_noise_does_not_touch_measurement_basis(self, bell, rng):
        cfg = DeviceConfig(2, bell, NoiseModel(4, gate_noise=depolarizing(4, 0.0)))
        plan = plan_sfe(bell, ConfidenceSpec(0.1, 0.05), rng=rng, n_requested=2400)
        assert all(not s.circuit and len(s.basis) == 1 for s in plan.settings)
        f = sfe_single_shot_estimates(plan, plan.execute(SimulatedDevice(cfg)))
        assert f.mean() == pytest.approx(1.0, abs=0.1)

    def test_estimate_fields(self, bell, rng):
        est = sfe(SimulatedDevice(DeviceConfig(2, bell)), bell, ConfidenceSpec(0.1, 0.05), rng=rng, n_requested=2400)
        assert est.method == "sfe"
        assert est.n_samples_used == 2400
        assert est.value == pytest.approx(1.0, abs=0.15)
        assert est.details["variance"] < 5.0

    def test_fully_depolarized_state(self, bell, rng):
        est = sfe(depolarized_device(bell, 2, 0.0), bell, ConfidenceSpec(0.1, 0.05), rng=rng, n_requested=240)
        assert est.value == pytest.approx(0.25)
        assert est.details["variance"] == pytest.approx(0.0, abs=1e-12)

    def test_haar_ensemble(self, bell, rng):
        est = sfe(
            SimulatedDevice(DeviceConfig(2, bell)),
            bell,
            ConfidenceSpec(0.1, 0.05),
            UnitaryEnsemble.haar(4),
            rng,
            n_requested=48,
        )
        assert est.n_samples_used == 48

    def test_ensemble_dimension(self, bell):
        with pytest.raises(DimensionMismatchError):
            plan_sfe(bell, ConfidenceSpec(0.1, 0.05), UnitaryEnsemble.haar(2), n_requested=24)


class TestThresholdCertification:
    @pytest.mark.parametrize("policy, gap", [("trace_distance", 0.005), ("infidelity", 0.05)])
    def test_gap(self, policy, gap):
        assert certification_gap(0.1, policy) == pytest.approx(gap)

    @pytest.mark.parametrize("epsilon, policy", [(0.0, "infidelity"), (1.5, "infidelity"), (0.1, "bures")])
    def test_gap_arguments(self, epsilon, policy):
        with pytest.raises(InvalidInputError):
            certification_gap(epsilon, policy)

    def test_estimation_spec(self):
        tight = estimation_spec(0.1, 0.05)
        assert tight.epsilon == pytest.approx(0.005)
        assert tight.delta == 0.05
        assert estimation_spec(0.1, 0.05, "infidelity") == ConfidenceSpec(0.05, 0.05)

    def test_accept_above_threshold(self):
        verdict = certify_from_estimate(Estimate(0.996, 0.005, 0.05, 10, "dfe"), 0.1)
        assert verdict.accepted
        assert verdict.protocol == "dfe_threshold"
        assert verdict.distance == "trace_distance"

    def test_reject_below_threshold(self):
        verdict = certify_from_estimate(Estimate(0.99, 0.005, 0.05, 10, "sfe"), 0.1)
        assert verdict.decision == "reject"
        lower, upper = verdict.details["trace_distance_interval"]
        assert lower == pytest.approx(1 - np.sqrt(0.99))
        assert upper == pytest.approx(0.1)

    def test_estimate_above_one_is_clipped(self):
        verdict = certify_from_estimate(Estimate(1.03, 0.05, 0.1, 10, "dfe"), 0.2, "infidelity")
        assert verdict.accepted
        assert verdict.details["infidelity"] == 0.0
