import math

import numpy as np
import pytest

from qcertbench.errors import InvalidInputError
from qcertbench.stats import (
    ConfidenceSpec,
    Estimate,
    amplified_runs,
    amplify_confidence,
    chebyshev_bound,
    empirical_mean_with_stderr,
    gap_certification_n,
    hoeffding_n,
    hoeffding_tail_bound,
    importance_sampler,
    markov_bound,
    median_of_means,
    median_of_means_error_bound,
    mom_group_size,
    mom_sample_plan,
    naive_certification_n,
    stabilizer_certification_n,
    union_bound,
)


class TestConfidenceSpec:
    @pytest.mark.parametrize("eps,delta", [(0, 0.1), (-1, 0.1), (0.1, 0), (0.1, 1), (float("nan"), 0.1)])
    def test_invalid(self, eps, delta):
        with pytest.raises(InvalidInputError):
            ConfidenceSpec(eps, delta)

    def test_estimate_needs_a_sample(self):
        with pytest.raises(InvalidInputError):
            Estimate(0.5, 0.1, 0.1, 0, "x")

    def test_estimate_to_dict(self):
        est = Estimate(0.5, 0.1, 0.1, 3, "x", {"k": 1})
        assert est.to_dict() == {
            "value": 0.5, "epsilon": 0.1, "delta": 0.1, "n_samples_used": 3, "method": "x", "details": {"k": 1}
        }


class TestSampleCounts:
    def test_hoeffding(self):
        assert hoeffding_n(2, ConfidenceSpec(0.1, 0.05)) == math.ceil(4 / 0.02 * math.log(40))
        assert hoeffding_n(0, ConfidenceSpec(0.1, 0.05)) == 1

    def test_certification_counts(self):
        spec = ConfidenceSpec(0.05, 0.1)
        assert naive_certification_n(spec) == 47
        assert stabilizer_certification_n(spec) == 93
        assert gap_certification_n(spec, 0.5) == 93

    def test_gap_range(self):
        with pytest.raises(InvalidInputError):
            gap_certification_n(ConfidenceSpec(0.05, 0.1), 0.0)

    def test_mom_plan(self):
        n, k, groups = mom_sample_plan(ConfidenceSpec(0.1, 0.05))
        assert k == mom_group_size(0.05) == 24
        assert n == 47952
        assert groups == n // k

    def test_mom_plan_rounds_request_up(self, caplog):
        n, k, _ = mom_sample_plan(ConfidenceSpec(0.1, 0.05), n_requested=100)
        assert n == 120 and k == 24
        assert "rounded up" in caplog.text


class TestEstimators:
    def test_mean_with_stderr(self):
        mean, err = empirical_mean_with_stderr([1.0, 3.0])
        assert mean == 2.0
        assert err == pytest.approx(1.0)

    def test_single_sample_has_infinite_stderr(self):
        assert empirical_mean_with_stderr([4.0]) == (4.0, math.inf)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            empirical_mean_with_stderr([])

    def test_median_of_means_lower_median(self):
        assert median_of_means([1, 1, 2, 2, 3, 3, 4, 4], 4) == 2.0

    def test_median_of_means_resists_outliers(self):
        x = np.zeros(100)
        x[0] = 1e6
        assert median_of_means(x, 10) == 0.0

    def test_median_of_means_drops_remainder(self, caplog):
        assert median_of_means([1, 1, 5], 2) == 1.0
        assert "dropping 1" in caplog.text

    def test_median_of_means_group_range(self):
        with pytest.raises(InvalidInputError):
            median_of_means([1, 2], 3)

    def test_error_bound(self):
        assert median_of_means_error_bound(1.0, 32, math.exp(-1)) == pytest.approx(1.0)

    def test_importance_sampler_unbiased(self, rng):
        p = np.array([0.7, 0.2, 0.1])
        q = np.array([0.2, 0.3, 0.5])
        f = np.array([1.0, 4.0, 10.0])
        est = importance_sampler(p, q, f, 20000, rng)
        assert est.value == pytest.approx(p @ f, abs=est.epsilon)

    def test_importance_sampler_support(self, rng):
        with pytest.raises(InvalidInputError):
            importance_sampler([0.5, 0.5], [1.0, 0.0], [1.0, 1.0], 10, rng)


class TestConfidence:
    def test_majority_vote(self):
        vote = amplify_confidence(lambda i: i % 3 != 0, 9)
        assert vote.accepted and vote.n_accept == 6

    def test_tie_rejects(self):
        assert not amplify_confidence(lambda i: i % 2 == 0, 4).accepted

    def test_amplified_runs(self):
        assert amplified_runs(0.01) == math.ceil(18 * math.log(100))

    def test_union_bound(self):
        assert union_bound([0.01, 0.02]) == pytest.approx(0.03)
        with pytest.raises(InvalidInputError):
            union_bound([-0.1])


class TestTailBounds:
    def test_markov(self):
        assert markov_bound(1.0, 4.0) == 0.25
        assert markov_bound(10.0, 1.0) == 1.0

    def test_chebyshev(self):
        assert chebyshev_bound(1.0, 2.0) == 0.25

    def test_hoeffding_tail_matches_sample_count(self):
        spec = ConfidenceSpec(0.1, 0.05)
        m = hoeffding_n(1, spec)
        assert hoeffding_tail_bound(m, 1, spec.epsilon) <= spec.delta

    @pytest.mark.parametrize("fn,args", [(markov_bound, (1, 0)), (chebyshev_bound, (1, -1)), (hoeffding_tail_bound, (5, 0, 1))])
    def test_invalid_thresholds(self, fn, args):
        with pytest.raises(InvalidInputError):
            fn(*args)
